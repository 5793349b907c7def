import pytest

from dagkit import Kit
from obelia.committee import Committee, aux, core
from obelia.crypto import signer_for
from obelia.messages import AuxCertificate, AuxProposal, AuxRef, CoreVertex
from obelia.validation import (
    InsufficientSignatures,
    Mempool,
    Reason,
    assemble_certificate,
    aux_proposal_rejection,
    aux_vertex_rejection,
    core_vertex_rejection,
    select_aux_parents,
    try_new_core_vertex,
    try_new_proposal,
)

C = Committee.uniform(4, 2, t_a=2)


def reject(k: Kit, v):
    return core_vertex_rejection(v, k.dag, k.c, k.scheme)


def test_core_vertex_quorum_of_parents():
    k = Kit(C)
    assert reject(k, k.vertex(0, 1, parents=(0, 1, 2))) is None
    assert reject(k, k.vertex(1, 1, parents=(0, 1))) is Reason.BAD_PARENTS


def test_core_vertex_structural_rejections():
    k = Kit(C)
    k.rounds(1, 1)
    g = k.v[(0, 0)]
    r1 = k.v[(0, 1)].digest
    assert reject(k, CoreVertex(aux(0), 2, (r1,))) is Reason.BAD_AUTHOR
    unsigned = CoreVertex(core(0), 2, tuple(k.v[(i, 1)].digest for i in range(4)), signature=b"x")
    assert reject(k, unsigned) is Reason.BAD_SIG
    # parents from two rounds, or one author twice
    mixed = CoreVertex(core(1), 2, (r1, k.v[(1, 1)].digest, g.digest))
    mixed = mixed.with_signature(signer_for(k.scheme, core(1))(mixed.body))
    assert reject(k, mixed) is Reason.BAD_PARENTS
    twice = CoreVertex(core(1), 2, (r1, r1, k.v[(1, 1)].digest))
    twice = twice.with_signature(signer_for(k.scheme, core(1))(twice.body))
    assert reject(k, twice) is Reason.BAD_PARENTS
    unknown = CoreVertex(core(1), 2, (b"\x00" * 32, r1, k.v[(1, 1)].digest))
    unknown = unknown.with_signature(signer_for(k.scheme, core(1))(unknown.body))
    assert reject(k, unknown) is Reason.MISSING_ANCESTOR
    assert reject(k, CoreVertex(core(0), 0, payload=(r1,))) is Reason.BAD_PARENTS


def test_inclusion_leader_needs_t_a():
    k = Kit(C)
    k.rounds(1, 4)
    one = k.certificate(0, 3, range(4))
    two = k.certificate(1, 4, range(4))
    k.dag.insert_aux(one)
    k.dag.insert_aux(two)
    leader = C.leader_of(5).index
    assert reject(k, k.vertex(leader, 5, aux_refs=(one.ref,))) is Reason.INSUFFICIENT_AUX_STAKE
    assert reject(k, k.vertex(leader, 5, aux_refs=(one.ref, two.ref))) is None
    # non-leaders and lenient committees are not held to t_a
    assert reject(k, k.vertex((leader + 1) % 4, 5)) is None
    lenient = Kit(Committee.uniform(4, 2, t_a=2, strict_aux_inclusion=False))
    lenient.rounds(1, 4)
    assert reject(lenient, lenient.vertex(leader, 5)) is None


def test_aux_refs_must_be_in_window():
    k = Kit(C)
    k.rounds(1, 3)
    cert = k.certificate(0, 2, range(4))
    k.dag.insert_aux(cert)
    same = k.certificate(1, 3, range(4))
    k.dag.insert_aux(same)
    assert reject(k, k.vertex(0, 3, aux_refs=(cert.ref,))) is None
    assert reject(k, k.vertex(0, 3, aux_refs=(same.ref,))) is Reason.STALE_ROUND
    wrong = AuxRef(cert.digest, 1)
    assert reject(k, k.vertex(1, 4, aux_refs=(wrong,))) is Reason.BAD_PARENTS
    assert reject(k, k.vertex(2, 4, aux_refs=(cert.ref, cert.ref))) is Reason.BAD_PARENTS


def test_proposal_validity():
    k = Kit(C)
    k.rounds(1, 3)
    assert aux_proposal_rejection(k.proposal(0, 3, (1, 2, 3)), k.dag, C, k.scheme) is None
    spanning = AuxProposal(aux(0), 3, (k.v[(1, 3)].digest, k.v[(2, 3)].digest, k.v[(3, 2)].digest))
    spanning = spanning.with_signature(signer_for(k.scheme, aux(0))(spanning.body))
    assert aux_proposal_rejection(spanning, k.dag, C, k.scheme) is Reason.BAD_PARENTS
    by_core = AuxProposal(core(0), 3, tuple(k.v[(i, 3)].digest for i in range(3)))
    by_core = by_core.with_signature(signer_for(k.scheme, core(0))(by_core.body))
    assert aux_proposal_rejection(by_core, k.dag, C, k.scheme) is Reason.BAD_AUTHOR
    assert aux_proposal_rejection(k.proposal(0, 3, (1, 2)), k.dag, C, k.scheme) is Reason.BAD_PARENTS


def test_assemble_certificate():
    k = Kit(C)
    k.rounds(1, 1)
    p = k.proposal(0, 1, range(4))
    three = [k.sig(p, i) for i in (1, 2, 3)]
    assert assemble_certificate(p, three, C, k.scheme).signers() == [core(1), core(2), core(3)]
    bad = [k.sig(p, 1), k.sig(p, 2), (core(3), b"\x00" * 32)]
    with pytest.raises(InsufficientSignatures) as e:
        assemble_certificate(p, bad, C, k.scheme)
    assert e.value.valid_stake == 2
    four = [k.sig(p, i) for i in (3, 1, 0, 2)]
    assert assemble_certificate(p, four, C, k.scheme).signers() == [core(0), core(1), core(2)]


def test_aux_vertex_validity():
    k = Kit(C)
    k.rounds(1, 1)
    cert = k.certificate(0, 1, range(4))
    assert aux_vertex_rejection(cert, k.dag, C, k.scheme) is None
    p = cert.proposal
    dup = AuxCertificate(p, (k.sig(p, 1), k.sig(p, 1), k.sig(p, 2)))
    assert aux_vertex_rejection(dup, k.dag, C, k.scheme) is Reason.BAD_CERTIFICATE
    forged = AuxCertificate(p, (k.sig(p, 0), k.sig(p, 1), (core(2), b"\x01" * 32)))
    assert aux_vertex_rejection(forged, k.dag, C, k.scheme) is Reason.BAD_CERTIFICATE
    k.rounds(2, 3)
    k.dag.prune(2)
    assert aux_vertex_rejection(cert, k.dag, C, k.scheme) is Reason.STALE_ROUND


def test_try_new_core_vertex_non_leader():
    k = Kit(C)
    for i in (0, 1, 2):
        k.add(k.vertex(i, 1))
    me = core(3)
    v = try_new_core_vertex(Mempool(), k.dag, C, me, 2, [], signer_for(k.scheme, me))
    assert v is not None and len(v.core_parents) == 3 and v.aux_parents == ()
    assert reject(k, v) is None


def test_try_new_core_vertex_leader_blocked_or_timed_out():
    k = Kit(C)
    for i in (0, 2, 3):
        k.add(k.vertex(i, 1))
    me = core(0)
    sign = signer_for(k.scheme, me)
    # leader of round 1 (c1) is absent
    assert try_new_core_vertex(Mempool(), k.dag, C, me, 2, [], sign) is None
    assert try_new_core_vertex(Mempool(), k.dag, C, me, 2, [], sign, timed_out=True) is not None


def test_try_new_core_vertex_inclusion_round():
    k = Kit(C)
    k.rounds(1, 4)
    i_cert = k.certificate(0, 3, (1, 2, 3))
    k_cert = k.certificate(1, 1, (0, 1, 2))
    k.dag.insert_aux(i_cert)
    k.dag.insert_aux(k_cert)
    me = C.leader_of(5)
    sign = signer_for(k.scheme, me)
    v = try_new_core_vertex(Mempool(), k.dag, C, me, 5, [i_cert, k_cert], sign)
    assert v is not None and set(v.aux_parents) == {i_cert.ref, k_cert.ref}
    assert reject(k, v) is None
    assert try_new_core_vertex(Mempool(), k.dag, C, me, 5, [i_cert], sign) is None
    chosen, stake = select_aux_parents([i_cert, k_cert], k.dag, C, 5)
    assert chosen == [k_cert, i_cert] and stake == 2


def test_try_new_core_vertex_drains_mempool():
    k = Kit(C)
    k.rounds(1, 1)
    pool = Mempool()
    txs = [bytes([i]) * 32 for i in range(5)]
    assert pool.extend(txs + txs[:2]) == 5
    v = try_new_core_vertex(pool, k.dag, C, core(2), 2, [], signer_for(k.scheme, core(2)), max_payload=3)
    assert v.payload == tuple(txs[:3]) and len(pool) == 2


def test_try_new_proposal():
    k = Kit(C)
    k.rounds(1, 3)
    for i in range(4):
        k.add(k.vertex(i, 4, payload=(b"\x04" * 32,)))
    k.add(k.vertex(0, 5))
    me = aux(0)
    sign = signer_for(k.scheme, me)
    p = try_new_proposal(Mempool(), k.dag, C, me, 0, sign)
    assert p.ref_round == 4 and len(p.core_refs) == 4
    assert aux_proposal_rejection(p, k.dag, C, k.scheme) is None
    assert try_new_proposal(Mempool(), k.dag, C, me, 2_001_000, sign, last_proposal_time=2_000_000) is None
    # 2 of 4 vertices per round, stored without validation
    sparse = Kit(C)
    for r in (1, 2, 3):
        for i in (0, 1):
            sparse.add(sparse.vertex(i, r, parents=(0, 1)))
    assert try_new_proposal(Mempool(), sparse.dag, C, me, 0, sign) is None
