import random

from dagkit import SCHEME_SEED, Kit, sends
from obelia.aux_node import AuxNode
from obelia.committee import Committee, aux, core
from obelia.crypto import MockScheme
from obelia.dag import DagState
from obelia.messages import AuxCertificate, AuxProposal, CoreVertex
from obelia.protocol import CounterSig, FetchRequest, FetchResponse, GossipBatch, NodeConfig

C = Committee.uniform(4, 2, t_a=2)
SCHEME = MockScheme(SCHEME_SEED)


def node(committee=C, **cfg) -> AuxNode:
    return AuxNode(aux(0), committee, SCHEME, NodeConfig(**cfg), random.Random(7), pacing_phase=0)


def fed(rounds=2, committee=C, **cfg):
    n = node(committee, **cfg)
    k = Kit(committee, dag=DagState())
    values = k.rounds(1, rounds)
    n.handle(core(0), GossipBatch(tuple(values)), 0)
    return n, k


def test_gossip_grows_the_full_node_copy():
    n, k = fed(3)
    assert all(v.digest in n.dag.core for v in k.v.values())
    assert n.dag.max_round == 3


def test_missing_parents_fetch_from_a_core():
    n = node(fetch_delay=0)
    k = Kit(C, dag=DagState())
    k.rounds(1, 1)
    reqs = sends(n.handle(core(2), GossipBatch((k.vertex(1, 2),)), 0), FetchRequest)
    assert reqs and all(r.dst.is_core for r in reqs)
    assert reqs[0].dst == core(1)


def test_pacing_tick_broadcasts_proposal_to_all_cores():
    n, k = fed(2)
    fx = n.on_timer(("pace",), 5000)
    props = sends(fx, AuxProposal)
    assert sorted(s.dst for s in props) == list(C.core_ids)
    p = props[0].msg
    assert p.ref_round == 2 and len(p.core_refs) == 4 and n.in_flight == p


def test_single_proposal_in_flight():
    n, k = fed(2)
    first = sends(n.aux_try_advance(0), AuxProposal)[0].msg
    n.handle(core(0), GossipBatch(tuple(k.rounds(3, 3))), 1000)
    again = sends(n.aux_try_advance(2_000_000), AuxProposal)
    assert {s.msg.digest for s in again} == {first.digest}
    assert n.metrics["proposals_sent"] == 1 and n.metrics["proposals_retransmitted"] == 1


def test_no_proposal_without_a_quorum_round():
    n = node()
    assert sends(n.aux_try_advance(0), AuxProposal) == []


def _sig(p, i):
    return CounterSig(p.digest, core(i), Kit(C).sig(p, i)[1])


def test_counter_signatures_form_a_certificate_at_quorum():
    n, _ = fed(2)
    p = sends(n.aux_try_advance(0), AuxProposal)[0].msg
    assert sends(n.on_counter_sig(core(0), _sig(p, 0), 10)) == []
    n.on_counter_sig(core(0), _sig(p, 0), 11)
    assert n.metrics["counter_sig_duplicate"] == 1 and len(n.collected) == 1
    assert sends(n.on_counter_sig(core(1), _sig(p, 1), 12)) == []
    out = sends(n.on_counter_sig(core(2), _sig(p, 2), 13), AuxCertificate)
    assert sorted(s.dst for s in out) == list(C.core_ids)
    cert = out[0].msg
    assert cert.signers() == [core(0), core(1), core(2)]
    assert cert.digest in n.dag.aux and n.in_flight is None


def test_stale_and_invalid_counter_signatures_are_ignored():
    n, _ = fed(2)
    p = sends(n.aux_try_advance(0), AuxProposal)[0].msg
    n.on_counter_sig(core(1), CounterSig(b"\x00" * 32, core(1), b"x"), 0)
    assert n.metrics["counter_sig_stale"] == 1
    n.on_counter_sig(core(1), CounterSig(p.digest, core(1), b"\x00" * 32), 0)
    n.on_counter_sig(aux(1), CounterSig(p.digest, aux(1), b"\x00" * 32), 0)
    assert n.metrics["counter_sig_invalid"] == 2 and n.collected == {}


def test_stale_in_flight_proposal_is_replaced():
    # lenient, so the scripted inclusion leaders need no certificates
    n, k = fed(2, Committee.uniform(4, 2, t_a=2, strict_aux_inclusion=False))
    first = sends(n.aux_try_advance(0), AuxProposal)[0].msg
    n.handle(core(0), GossipBatch(tuple(k.rounds(3, 2 + C.gc_depth))), 1000)
    again = sends(n.aux_try_advance(2_000_000), AuxProposal)
    assert again and again[0].msg.digest != first.digest
    assert n.metrics["proposals_aborted"] == 1


def test_aux_never_authors_core_vertices_and_serves_history():
    n, k = fed(4)
    effects = n.aux_try_advance(0) + n.on_timer(("sync",), 1) + n.on_timer(("pace",), 2)
    assert not sends(effects, CoreVertex)
    resp = sends(n.handle(core(3), FetchRequest((k.v[(0, 1)].digest,)), 5), FetchResponse)
    assert resp[0].msg.values == (k.v[(0, 1)],)
