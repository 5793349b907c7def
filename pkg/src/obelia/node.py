"""Machinery shared by core and auxiliary nodes: ingest, sync and fetch serving."""

from __future__ import annotations

import random
from collections import Counter, OrderedDict, deque
from typing import Iterable

from .committee import Committee, ValidatorId
from .crypto import SignatureScheme, signer_for
from .dag import DagState
from .messages import AuxCertificate, AuxProposal, CoreVertex, Digest
from .protocol import FetchRequest, FetchResponse, NodeConfig, Send, SetTimer
from .validation import aux_vertex_rejection, core_vertex_rejection, genesis_vertices

_FAR_PAST = -(1 << 62)


class PendingBuffer:
    """Values waiting on missing ancestors, oldest evicted first."""

    def __init__(self, limit: int = 10_000):
        self.limit = limit
        self.entries: OrderedDict[tuple, tuple[object, set[Digest]]] = OrderedDict()
        self.waiting: dict[Digest, dict[tuple, None]] = {}
        self.evicted = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: tuple) -> bool:
        return key in self.entries

    def add(self, key: tuple, value, missing: Iterable[Digest]) -> None:
        if key in self.entries:
            self.discard(key)
        missing = set(missing)
        self.entries[key] = (value, missing)
        for m in missing:
            self.waiting.setdefault(m, {})[key] = None
        while len(self.entries) > self.limit:
            old = next(iter(self.entries))
            self.discard(old)
            self.evicted += 1

    def discard(self, key: tuple) -> None:
        entry = self.entries.pop(key, None)
        if entry is None:
            return
        for m in entry[1]:
            w = self.waiting.get(m)
            if w is not None:
                w.pop(key, None)
                if not w:
                    del self.waiting[m]

    def is_awaited(self, digest: Digest) -> bool:
        return digest in self.waiting

    def release(self, digest: Digest) -> list:
        """Mark ``digest`` as arrived; return values with nothing left missing."""
        keys = self.waiting.pop(digest, None)
        if not keys:
            return []
        ready = []
        for key in keys:
            entry = self.entries.get(key)
            if entry is None:
                continue
            entry[1].discard(digest)
            if not entry[1]:
                del self.entries[key]
                ready.append(entry[0])
        return ready

    def awaited(self) -> list[Digest]:
        return list(self.waiting)

    def drop_where(self, pred) -> int:
        doomed = [k for k, (v, _) in self.entries.items() if pred(v)]
        for k in doomed:
            self.discard(k)
        return len(doomed)


class BaseNode:
    """Event-driven state machine; every handler returns a list of effects."""

    is_core = False

    def __init__(
        self,
        me: ValidatorId,
        committee: Committee,
        scheme: SignatureScheme,
        config: NodeConfig | None = None,
        rng: random.Random | None = None,
    ):
        self.me = me
        self.committee = committee
        self.scheme = scheme
        self.cfg = config or NodeConfig()
        self.rng = rng or random.Random(0)
        self.signer = signer_for(scheme, me)
        self.dag = DagState()
        for g in genesis_vertices(committee):
            self.dag.insert_core(g)
        self.pending = PendingBuffer(self.cfg.pending_limit)
        self.stash: OrderedDict[Digest, CoreVertex] = OrderedDict()
        self.metrics: Counter = Counter()
        self.requested: dict[Digest, int] = {}
        self.wanted: dict[Digest, ValidatorId | None] = {}
        self.fetch_armed = False
        self.core_peers = [v for v in committee.core_ids if v != me]
        self.now = 0
        self._fx: list = []
        self._inserted = False

    # -- plumbing ------------------------------------------------------------

    def _send(self, dst: ValidatorId, msg) -> None:
        self._fx.append(Send(dst, msg))

    def _timer(self, at: int, tag: tuple) -> None:
        self._fx.append(SetTimer(at, tag))

    def _outgoing(self, fx: list) -> list:
        """Hook for adversarial overrides of everything a node emits."""
        return fx

    def _flush(self) -> list:
        fx, self._fx = self._fx, []
        return self._outgoing(fx)

    def _begin(self, now: int) -> None:
        self.now = now
        self._fx = []
        self._inserted = False

    def handle(self, src: ValidatorId, msg, now: int) -> list:
        self._begin(now)
        try:
            self._dispatch(src, msg)
        except Exception:  # pragma: no cover - handlers absorb bad input
            self.metrics["handler_errors"] += 1
            raise
        if self._inserted:
            self._after_insert()
        return self._flush()

    def on_timer(self, tag: tuple, now: int) -> list:
        self._begin(now)
        name = tag[0]
        if name == "fetch":
            self.fetch_armed = False
            self._flush_wanted()
        elif name == "sync":
            self._resync()
            self._timer(now + self.cfg.sync_interval, ("sync",))
        else:
            self._on_timer(tag)
        if self._inserted:
            self._after_insert()
        return self._flush()

    def _dispatch(self, src: ValidatorId, msg) -> None:
        raise NotImplementedError

    def _on_timer(self, tag: tuple) -> None:
        pass

    def _after_insert(self) -> None:
        pass

    # -- ingest ----------------------------------------------------------------

    def _ingest(self, values: Iterable, src: ValidatorId | None = None) -> None:
        queue = deque(values)
        while queue:
            queue.extend(self._ingest_one(queue.popleft(), src))

    def _ingest_one(self, value, src) -> list:
        if isinstance(value, CoreVertex):
            return self._ingest_core(value, src)
        if isinstance(value, AuxCertificate):
            return self._ingest_aux(value, src)
        if isinstance(value, AuxProposal):
            return self._ingest_proposal(value, src)
        self.metrics["rejected:Undecodable"] += 1
        return []

    def _ingest_proposal(self, p: AuxProposal, src) -> list:
        self.metrics["rejected:UnexpectedProposal"] += 1
        return []

    def _ingest_core(self, v: CoreVertex, src) -> list:
        dag = self.dag
        d = v.digest
        if d in dag.core:
            return []
        if v.round <= dag.gc_round:
            self.metrics["rejected:StaleRound"] += 1
            return []
        needed = self.pending.is_awaited(d)
        slots = dag.first_seen.get(v.round)
        if slots is not None and v.author in slots and not needed:
            if d not in self.stash:
                self.metrics["equivocations_seen"] += 1
                self.stash[d] = v
                while len(self.stash) > self.cfg.stash_limit:
                    self.stash.popitem(last=False)
            return []
        mc, ma = dag.missing_ancestors(v)
        if mc or ma:
            # more missing parents than empty slots: some are conflicting
            # versions, which will never arrive unasked
            known = len(dag.first_seen.get(v.round - 1, ()))
            urgent = len(mc) > len(self.committee.core_ids) - known
            return self._wait(("v", d), v, mc + ma, v.author, urgent)
        reason = core_vertex_rejection(v, dag, self.committee, self.scheme)
        if reason is not None:
            self.metrics[f"rejected:{reason.value}"] += 1
            return []
        self.stash.pop(d, None)
        dag.insert_core(v, allow_equivocation=needed)
        self.metrics["accepted_core"] += 1
        self._inserted = True
        self._core_inserted(v)
        return self.pending.release(d)

    def _ingest_aux(self, cert: AuxCertificate, src) -> list:
        dag = self.dag
        d = cert.digest
        if d in dag.aux:
            return []
        if cert.ref_round < dag.gc_round:
            self.metrics["rejected:BelowGcHorizon"] += 1
            return []
        mc, _ = dag.missing_ancestors(cert)
        if mc:
            return self._wait(("c", d), cert, mc, cert.author)
        reason = aux_vertex_rejection(cert, dag, self.committee, self.scheme)
        if reason is not None:
            self.metrics[f"rejected:{reason.value}"] += 1
            return []
        dag.insert_aux(cert)
        self.metrics["accepted_aux"] += 1
        self._inserted = True
        self._aux_inserted(cert)
        return self.pending.release(d)

    def _core_inserted(self, v: CoreVertex) -> None:
        pass

    def _aux_inserted(self, cert: AuxCertificate) -> None:
        pass

    def _wait(self, key: tuple, value, missing, hint: ValidatorId | None, urgent: bool = False) -> list:
        self.pending.add(key, value, missing)
        self.metrics["buffered"] += 1
        followups = [self.stash.pop(m) for m in missing if m in self.stash]
        self._request([m for m in missing if m not in self.dag], hint, urgent)
        return followups

    # -- fetching ----------------------------------------------------------------

    def _request(self, digests, hint: ValidatorId | None, urgent: bool = False) -> None:
        now = self.now
        fresh = []
        for d in digests:
            if now - self.requested.get(d, _FAR_PAST) >= self.cfg.sync_interval:
                self.requested[d] = now
                fresh.append(d)
        if not fresh:
            return
        if urgent or self.cfg.fetch_delay <= 0:
            self._send_fetch(fresh, {hint})
            return
        for d in fresh:
            self.wanted.setdefault(d, hint)
        if not self.fetch_armed:
            self.fetch_armed = True
            self._timer(now + self.cfg.fetch_delay, ("fetch",))

    def _flush_wanted(self) -> None:
        wanted, self.wanted = self.wanted, {}
        ds = [d for d in wanted if d not in self.dag]
        if ds:
            self._send_fetch(ds, set(wanted[d] for d in ds))

    def _resync(self) -> None:
        awaited = [d for d in self.pending.awaited() if d not in self.dag]
        if awaited:
            self._request(awaited[: self.cfg.fetch_batch * self.cfg.fetch_fill_batches], None)

    def _fetch_targets(self, hints: set) -> list[ValidatorId]:
        raise NotImplementedError

    def _send_fetch(self, digests: list[Digest], hints: set) -> None:
        req = FetchRequest(tuple(digests), self.dag.max_round)
        for t in self._fetch_targets(hints):
            self._send(t, req)
        self.metrics["fetch_requests"] += 1

    def _serve_fetch(self, src: ValidatorId, req: FetchRequest) -> None:
        dag = self.dag
        cap = self.cfg.fetch_batch * self.cfg.fetch_fill_batches
        out = []
        seen = set()
        for d in req.digests:
            if len(out) >= cap:
                break
            v = dag.get(d)
            if v is None:
                v = self.stash.get(d)
            if v is not None and d not in seen:
                seen.add(d)
                out.append(v)
        i = 0
        floor = req.floor_round
        while i < len(out) and len(out) < cap:
            v = out[i]
            i += 1
            if isinstance(v, CoreVertex):
                refs = list(v.core_parents) + [a.digest for a in v.aux_parents]
            else:
                refs = v.proposal.core_refs
            for p in refs:
                if p in seen:
                    continue
                pv = dag.get(p)
                if pv is None or pv.round < floor:
                    continue
                seen.add(p)
                out.append(pv)
                if len(out) >= cap:
                    break
        b = self.cfg.fetch_batch
        for k in range(0, len(out), b):
            self._send(src, FetchResponse(tuple(out[k : k + b])))
        self.metrics["fetch_served"] += 1

    def _on_fetch_response(self, src: ValidatorId, resp: FetchResponse) -> None:
        values = [x for x in resp.values if isinstance(x, (CoreVertex, AuxCertificate))]
        values.sort(key=lambda x: (x.round, isinstance(x, AuxCertificate)))
        self._ingest(values, src)
