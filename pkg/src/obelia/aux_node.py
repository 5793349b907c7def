"""Auxiliary validator state machine.

An aux node is a full node: it keeps every core vertex and certificate it
learns (no pruning), so it can serve fetches for history the core
validators have already garbage collected.
"""

from __future__ import annotations

import random

from .committee import Committee, ValidatorId
from .crypto import SignatureScheme
from .messages import AuxCertificate, AuxProposal, CoreVertex, counter_sig_message
from .node import BaseNode
from .protocol import CounterSig, FetchRequest, FetchResponse, GossipBatch, NodeConfig
from .validation import InsufficientSignatures, Mempool, assemble_certificate, try_new_proposal


class AuxNode(BaseNode):
    """One auxiliary validator with a single proposal in flight at a time."""

    def __init__(
        self,
        me: ValidatorId,
        committee: Committee,
        scheme: SignatureScheme,
        config: NodeConfig | None = None,
        rng: random.Random | None = None,
        *,
        pacing_phase: int | None = None,
    ):
        super().__init__(me, committee, scheme, config, rng)
        self.mempool = Mempool()
        self.in_flight: AuxProposal | None = None
        self.collected: dict[ValidatorId, bytes] = {}
        self.last_proposal_time: int | None = None
        self.certificates: list[AuxCertificate] = []
        if pacing_phase is None:
            pacing_phase = self.rng.randrange(max(1, self.cfg.aux_pacing))
        self.pacing_phase = pacing_phase

    def start(self, now: int) -> list:
        self._begin(now)
        self._timer(now + self.pacing_phase, ("pace",))
        self._timer(now + self.cfg.sync_interval, ("sync",))
        return self._flush()

    def submit(self, txs, now: int) -> list:
        self.mempool.extend(txs)
        return []

    def aux_try_advance(self, now: int) -> list:
        self._begin(now)
        self._aux_try_advance()
        return self._flush()

    def on_counter_sig(self, src: ValidatorId, cs: CounterSig, now: int) -> list:
        return self.handle(src, cs, now)

    # -- dispatch --------------------------------------------------------------------

    def _dispatch(self, src: ValidatorId, msg) -> None:
        if isinstance(msg, GossipBatch):
            self._ingest(msg.values, src)
        elif isinstance(msg, (CoreVertex, AuxCertificate)):
            self._ingest([msg], src)
        elif isinstance(msg, CounterSig):
            self._on_counter_sig(src, msg)
        elif isinstance(msg, FetchRequest):
            self._serve_fetch(src, msg)
        elif isinstance(msg, FetchResponse):
            self._on_fetch_response(src, msg)
        else:
            self.metrics[f"unexpected:{type(msg).__name__}"] += 1

    def _on_timer(self, tag: tuple) -> None:
        if tag[0] == "pace":
            self._aux_try_advance()
            self._timer(self.now + self.cfg.aux_pacing, ("pace",))

    def _fetch_targets(self, hints: set) -> list[ValidatorId]:
        cores = list(self.committee.core_ids)
        hinted = sorted(h for h in hints if h is not None and h.is_core)
        pick = self.rng.choice(cores)
        return hinted + ([pick] if pick not in hinted else [])

    # -- proposals -------------------------------------------------------------------

    def _stale(self, p: AuxProposal) -> bool:
        return p.ref_round < self.dag.max_round - self.committee.gc_depth // 2

    def _aux_try_advance(self) -> None:
        p = self.in_flight
        if p is not None:
            if not self._stale(p):
                self._broadcast_proposal(p, retransmit=True)
                return
            self.metrics["proposals_aborted"] += 1
            self.in_flight = None
            self.collected = {}
        p = try_new_proposal(
            self.mempool,
            self.dag,
            self.committee,
            self.me,
            self.now,
            self.signer,
            last_proposal_time=None,
            pacing=self.cfg.aux_pacing,
            max_payload=self.cfg.max_payload,
        )
        if p is None:
            return
        self.in_flight = p
        self.collected = {}
        self.last_proposal_time = self.now
        self.metrics["proposals_sent"] += 1
        self._broadcast_proposal(p)

    def _broadcast_proposal(self, p: AuxProposal, retransmit: bool = False) -> None:
        for core in self.committee.core_ids:
            if core not in self.collected:
                self._send(core, p)
        if retransmit:
            self.metrics["proposals_retransmitted"] += 1

    def _on_counter_sig(self, src: ValidatorId, cs: CounterSig) -> None:
        p = self.in_flight
        c = self.committee
        if p is None or cs.proposal_digest != p.digest:
            self.metrics["counter_sig_stale"] += 1
            return
        if cs.signer in self.collected:
            self.metrics["counter_sig_duplicate"] += 1
            return
        if not (cs.signer.is_core and c.is_member(cs.signer)):
            self.metrics["counter_sig_invalid"] += 1
            return
        if not self.scheme.verify(cs.signer, counter_sig_message(p.digest), cs.signature):
            self.metrics["counter_sig_invalid"] += 1
            return
        self.collected[cs.signer] = cs.signature
        if c.stake_of(self.collected) < c.quorum:
            return
        try:
            cert = assemble_certificate(p, self.collected.items(), c, self.scheme)
        except InsufficientSignatures:  # pragma: no cover - stake checked above
            return
        self.in_flight = None
        self.collected = {}
        self.certificates.append(cert)
        self.metrics["certificates_formed"] += 1
        self._ingest([cert])
        for core in c.core_ids:
            self._send(core, cert)
