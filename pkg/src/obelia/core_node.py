"""Core validator state machine."""

from __future__ import annotations

import random

from .commit import (
    CommitOutput,
    DecisionRule,
    SlotHistory,
    linearize,
    order_new_leaders,
)
from .committee import Committee, Kind, ValidatorId
from .crypto import SignatureScheme
from .messages import AuxCertificate, AuxProposal, CoreVertex, Digest
from .node import BaseNode
from .protocol import (
    CommitBatch,
    CounterSig,
    FetchRequest,
    FetchResponse,
    GossipBatch,
    NodeConfig,
)
from .validation import Mempool, aux_proposal_rejection, counter_sign, try_new_core_vertex


class CoreNode(BaseNode):
    """One core validator.

    ``round`` is the round of the newest vertex this node authored. The node
    advances from the highest round ``h >= round`` holding quorum stake once
    the leader of ``h`` is present or the round deadline has passed.

    A node built with ``recovering=True`` models a restart from empty state:
    it refrains from authoring until a vertex delivered live (not fetched)
    has been inserted, so it never re-authors rounds it signed before.
    """

    is_core = True

    def __init__(
        self,
        me: ValidatorId,
        committee: Committee,
        scheme: SignatureScheme,
        config: NodeConfig | None = None,
        rng: random.Random | None = None,
        *,
        rule: DecisionRule | None = None,
        subscribers: tuple[ValidatorId, ...] = (),
        recovering: bool = False,
    ):
        super().__init__(me, committee, scheme, config, rng)
        self.rule = rule
        self.mempool = Mempool()
        self.history = SlotHistory()
        self.output = CommitOutput()
        self.aux_pending: dict[Digest, AuxCertificate] = {}
        self.referenced_aux: set[Digest] = set()
        self.signed_proposals: set[Digest] = set()
        self.subscribers = tuple(subscribers)
        self.gossip_queue: list = []
        self.round = 0
        self.own_max_round = 0
        self.deadline = 0
        self.consecutive_timeouts = 0
        self.recovering = recovering
        self._live: set[Digest] = set()
        self._dirty = False

    # -- public entry points -------------------------------------------------------

    def start(self, now: int) -> list:
        self._begin(now)
        self.deadline = now + self.cfg.timeout
        self._timer(now + self.cfg.sync_interval, ("sync",))
        if self.subscribers:
            self._timer(now + self.cfg.gossip_interval, ("gossip",))
        self._try_advance()
        return self._flush()

    def submit(self, txs, now: int) -> list:
        """Add client transactions to the mempool."""
        self.mempool.extend(txs)
        return []

    def on_core_vertex(self, v: CoreVertex, now: int, src: ValidatorId | None = None) -> list:
        return self.handle(src or v.author, v, now)

    def on_aux_proposal(self, p: AuxProposal, now: int) -> list:
        return self.handle(p.author, p, now)

    def on_aux_vertex(self, cert: AuxCertificate, now: int, src: ValidatorId | None = None) -> list:
        return self.handle(src or cert.author, cert, now)

    def on_fetch_request(self, src: ValidatorId, req: FetchRequest, now: int) -> list:
        return self.handle(src, req, now)

    def on_fetch_response(self, src: ValidatorId, resp: FetchResponse, now: int) -> list:
        return self.handle(src, resp, now)

    def try_advance(self, now: int) -> list:
        self._begin(now)
        self._try_advance()
        return self._flush()

    # -- dispatch ------------------------------------------------------------------

    def _dispatch(self, src: ValidatorId, msg) -> None:
        if isinstance(msg, CoreVertex):
            if self.recovering:
                self._live.add(msg.digest)
            self._ingest([msg], src)
        elif isinstance(msg, (AuxProposal, AuxCertificate)):
            self._ingest([msg], src)
        elif isinstance(msg, FetchRequest):
            self._serve_fetch(src, msg)
        elif isinstance(msg, FetchResponse):
            self._on_fetch_response(src, msg)
        else:
            self.metrics[f"unexpected:{type(msg).__name__}"] += 1

    def _on_timer(self, tag: tuple) -> None:
        name = tag[0]
        if name == "round":
            if tag[1] == self.round and self.now >= self.deadline:
                self.metrics["round_timer_fired"] += 1
                self._try_advance()
        elif name == "gossip":
            self._flush_gossip()
            self._timer(self.now + self.cfg.gossip_interval, ("gossip",))

    def _after_insert(self) -> None:
        if self._dirty:
            self._dirty = False
            self._run_commit()
        self._try_advance()

    def _fetch_targets(self, hints: set) -> list[ValidatorId]:
        c = self.committee
        targets = sorted(h for h in hints if h is not None and h != self.me and c.is_member(h))
        others = [p for p in self.core_peers if p not in targets]
        k = min(len(others), c.f + 1)
        targets += self.rng.sample(others, k)
        aux_ids = [a for a in c.aux_ids if a not in targets]
        if aux_ids and self.cfg.fetch_aux_targets > 0:
            targets += self.rng.sample(aux_ids, min(len(aux_ids), self.cfg.fetch_aux_targets))
        return targets

    # -- ingest hooks ----------------------------------------------------------------

    def _core_inserted(self, v: CoreVertex) -> None:
        if v.author == self.me and v.round > self.own_max_round:
            self.own_max_round = v.round
        if v.round >= self.history.next_round:
            self._dirty = True
        if self.subscribers:
            self.gossip_queue.append(v)
        if self.recovering and v.digest in self._live:
            self.recovering = False
            self._live.clear()
            self.metrics["recovered"] += 1

    def _aux_inserted(self, cert: AuxCertificate) -> None:
        d = cert.digest
        if d not in self.output and d not in self.referenced_aux:
            self.aux_pending[d] = cert
        if self.subscribers:
            self.gossip_queue.append(cert)

    def _ingest_proposal(self, p: AuxProposal, src) -> list:
        d = p.digest
        if d in self.signed_proposals:
            self.metrics["replayed_proposals"] += 1
            return []
        mc, _ = self.dag.missing_ancestors(p)
        if mc:
            # the aux author is asked first: it holds everything it referenced
            return self._wait(("p", d), p, mc, p.author)
        reason = aux_proposal_rejection(p, self.dag, self.committee, self.scheme)
        if reason is not None:
            self.metrics[f"rejected:{reason.value}"] += 1
            return []
        self.signed_proposals.add(d)
        sig = counter_sign(p, self.signer)
        self._send(p.author, CounterSig(d, self.me, sig))
        self.metrics["counter_sigs"] += 1
        return []

    # -- round advancement -------------------------------------------------------------

    def _broadcast_vertex(self, v: CoreVertex) -> None:
        for peer in self.core_peers:
            self._send(peer, v)

    def _make_vertex(self, r: int, timed_out: bool) -> CoreVertex | None:
        return try_new_core_vertex(
            self.mempool,
            self.dag,
            self.committee,
            self.me,
            r,
            list(self.aux_pending.values()),
            self.signer,
            timed_out=timed_out,
            max_payload=self.cfg.max_payload,
            max_aux_parents=self.cfg.max_aux_parents,
        )

    def _try_advance(self) -> None:
        if self.recovering:
            return
        c = self.committee
        dag = self.dag
        while True:
            floor = max(self.round, self.own_max_round, dag.gc_round)
            made = False
            for h in range(dag.max_round, floor - 1, -1):
                if dag.round_stake(h, c) < c.quorum:
                    continue
                leader_present = h == 0 or dag.slot(c.leader_of(h), h) is not None
                timed_out = not leader_present and self.now >= self.deadline
                if not (leader_present or timed_out):
                    continue
                v = self._make_vertex(h + 1, timed_out)
                if v is None:
                    self.metrics["blocked_on_aux_stake"] += 1
                    return
                self._adopt_own(v, timed_out)
                made = True
                break
            if not made:
                return

    def _adopt_own(self, v: CoreVertex, timed_out: bool) -> None:
        self.dag.insert_core(v)
        self.metrics["vertices_created"] += 1
        for ref in v.aux_parents:
            self.aux_pending.pop(ref.digest, None)
            self.referenced_aux.add(ref.digest)
        self.round = v.round
        self.own_max_round = max(self.own_max_round, v.round)
        if timed_out:
            self.metrics["timeouts"] += 1
            self.consecutive_timeouts += 1
        else:
            self.consecutive_timeouts = 0
        k = min(self.consecutive_timeouts, self.cfg.max_timeout_doublings)
        self.deadline = self.now + (self.cfg.timeout << k)
        self._timer(self.deadline, ("round", self.round))
        self._broadcast_vertex(v)
        if self.subscribers:
            self.gossip_queue.append(v)
        if v.round >= self.history.next_round:
            self._run_commit()

    # -- commits -------------------------------------------------------------------------

    def _run_commit(self) -> None:
        leaders = order_new_leaders(self.dag, self.committee, self.history, self.rule)
        if not leaders:
            return
        entries = linearize(leaders, self.dag, self.output, gc_depth=self.committee.gc_depth)
        self.metrics["leaders_committed"] += len(leaders)
        self.metrics["values_committed"] += len(entries)
        for e in entries:
            if e.kind == Kind.AUX:
                self.aux_pending.pop(e.digest, None)
                self.metrics["aux_committed"] += 1
        dag = self.dag
        aux_authors = tuple(
            tuple(dag.aux[a.digest].author for a in dag.core[ld].aux_parents if a.digest in dag.aux)
            for ld in leaders
        )
        values = tuple(dag.get(e.digest) for e in entries)
        self._fx.append(CommitBatch(tuple(entries), tuple(leaders), values, aux_authors))
        self._collect_garbage()

    def _collect_garbage(self) -> None:
        gc = self.history.last_committed_round - self.committee.gc_depth
        dag = self.dag
        if gc <= dag.gc_round:
            return
        dag.prune(gc)
        self.pending.drop_where(lambda v: v.round <= gc if isinstance(v, CoreVertex) else v.ref_round < gc)
        for d in [d for d, v in self.stash.items() if v.round <= gc]:
            del self.stash[d]
        for d in [d for d, x in self.aux_pending.items() if x.ref_round < gc]:
            del self.aux_pending[d]
        self.referenced_aux = {d for d in self.referenced_aux if d in dag.aux}
        horizon = self.now - 4 * self.cfg.sync_interval
        self.requested = {d: t for d, t in self.requested.items() if t > horizon}

    def _flush_gossip(self) -> None:
        if not self.gossip_queue:
            return
        batch = GossipBatch(tuple(self.gossip_queue))
        self.gossip_queue = []
        for a in self.subscribers:
            self._send(a, batch)
