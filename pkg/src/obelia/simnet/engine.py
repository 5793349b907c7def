"""Deterministic discrete-event network simulator.

Virtual time is integer microseconds. Events are ordered by (time,
insertion sequence); every random draw comes from generators seeded by the
config seed, so a config and committee fully determine the run.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
import random
import statistics
from dataclasses import asdict, dataclass, field
from typing import Callable

from ..aux_node import AuxNode
from ..committee import Committee, Kind, ValidatorId
from ..core_node import CoreNode
from ..crypto import make_scheme
from ..messages import AuxCertificate, AuxProposal, CoreVertex
from ..protocol import (
    CommitBatch,
    CounterSig,
    FetchRequest,
    FetchResponse,
    GossipBatch,
    NodeConfig,
    Send,
    SetTimer,
)
from .adversary import AUX_STRATEGIES, CORE_STRATEGIES
from .config import SimConfig

DELIVER, TIMER, CRASH, RECOVER, INJECT, SAMPLE = range(6)

MS = 1000

ROUTES = {
    (Kind.CORE, Kind.CORE): frozenset({CoreVertex, FetchRequest, FetchResponse}),
    (Kind.AUX, Kind.CORE): frozenset({AuxProposal, AuxCertificate, FetchRequest, FetchResponse}),
    (Kind.CORE, Kind.AUX): frozenset({GossipBatch, CounterSig, FetchRequest, FetchResponse}),
    (Kind.AUX, Kind.AUX): frozenset(),
}


class RoutingViolation(RuntimeError):
    """A node emitted a message type its role may not send on that link."""


def derive_seed(seed: int, *labels) -> int:
    h = hashlib.sha256(repr((seed,) + labels).encode()).digest()
    return int.from_bytes(h[:8], "big")


def _entry_line(e) -> str:
    kind = "core" if e.kind == Kind.CORE else "aux"
    return f"{kind} {e.author} {e.round} {e.digest.hex()}"


@dataclass
class SimReport:
    seed: int
    duration_ms: float
    committee: dict
    honest_core: list[str]
    stable_core: list[str]
    excluded: bool
    commits: dict[str, list[str]] = field(default_factory=dict)
    leaders: dict[str, list[dict]] = field(default_factory=dict)
    highwater: dict[str, list[list]] = field(default_factory=dict)
    metrics: dict[str, dict] = field(default_factory=dict)
    samples: list[dict] = field(default_factory=list)
    audits: dict[str, list[str]] = field(default_factory=dict)
    tx_injected: int = 0
    tx_latencies_ms: list[float] = field(default_factory=list)
    tx_committed_any: int = 0
    aux_certs_committed: int = 0
    messages_sent: int = 0
    messages_dropped: int = 0
    events: int = 0
    trace: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def commit_dump(self) -> str:
        out = []
        for label in sorted(self.commits):
            out.append(f"# {label}\n")
            out.extend(f"{i} {line}\n" for i, line in enumerate(self.commits[label]))
        return "".join(out)

    def median_latency_ms(self) -> float | None:
        xs = self.tx_latencies_ms
        return statistics.median(xs) if xs else None

    def quantile_latency_ms(self, q: float) -> float | None:
        xs = self.tx_latencies_ms
        if not xs:
            return None
        return xs[min(len(xs) - 1, int(q * len(xs)))]


class Simulator:
    def __init__(
        self,
        cfg: SimConfig,
        committee: Committee,
        registry: dict[str, Callable] | None = None,
        rule=None,
    ):
        self.cfg = cfg
        self.committee = committee
        self.rule = rule
        self.registry = {"core": CoreNode, "aux": AuxNode}
        self.registry.update(registry or {})
        self.scheme = make_scheme(cfg.scheme, cfg.seed.to_bytes(8, "big"))
        self.node_cfg = NodeConfig(**cfg.node)
        self.net_rng = random.Random(derive_seed(cfg.seed, "net"))
        self.load_rng = random.Random(derive_seed(cfg.seed, "load"))
        self.end = int(cfg.duration_ms * MS)
        self.gst = int(cfg.gst_ms * MS) if cfg.gst_ms is not None else 0
        self.links = {}
        names = {Kind.CORE: "core", Kind.AUX: "aux"}
        for sk in Kind:
            for dk in Kind:
                link = cfg.latency.get(f"{names[sk]}->{names[dk]}")
                if link is not None:
                    self.links[(sk, dk)] = (int(link.base_ms * MS), int(link.jitter_ms * MS))
        self.partitions = [
            (int(p.start_ms * MS), int(p.end_ms * MS), frozenset(ValidatorId.parse(x) for x in p.group))
            for p in cfg.partitions
        ]
        self.adversaries = {ValidatorId.parse(k): v for k, v in cfg.adversaries.items()}
        for vid, strat in self.adversaries.items():
            table = CORE_STRATEGIES if vid.is_core else AUX_STRATEGIES
            if strat not in table and strat not in self.registry:
                raise ValueError(f"unknown strategy {strat!r} for {vid}")
            if not committee.is_member(vid):
                raise ValueError(f"adversary {vid} is not a committee member")
        bad_core_stake = committee.stake_of(v for v in self.adversaries if v.is_core)
        self.excluded = bad_core_stake > committee.f
        self.honest_core = [v for v in committee.core_ids if v not in self.adversaries]
        crashed = {ValidatorId.parse(c.node) for c in cfg.crashes}
        self.stable_core = [v for v in self.honest_core if v not in crashed]

        self.heap: list = []
        self.seq = 0
        self.nodes: dict[ValidatorId, object] = {}
        self.alive: dict[ValidatorId, bool] = {}
        self.epoch: dict[ValidatorId, int] = {}
        self.incarnation: dict[ValidatorId, int] = {}
        self.recover_at: dict[ValidatorId, int] = {}
        self.subscribers: dict[ValidatorId, tuple] = {}

        self.report = SimReport(
            seed=cfg.seed,
            duration_ms=cfg.duration_ms,
            committee=committee.to_dict(),
            honest_core=[str(v) for v in self.honest_core],
            stable_core=[str(v) for v in self.stable_core],
            excluded=self.excluded,
        )
        self.inject_time: dict[bytes, int] = {}
        self.first_commit: dict[bytes, int] = {}
        self.commit_count: dict[bytes, int] = {}
        self.aux_committed: set[bytes] = set()
        self.tx_counter = 0
        self._stable = set(self.stable_core)

    # -- setup ---------------------------------------------------------------

    def _push(self, t: int, kind: int, a, b=None, c=None) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, a, b, c))

    def _label(self, vid: ValidatorId) -> str:
        inc = self.incarnation.get(vid, 0)
        return str(vid) if inc == 0 else f"{vid}#{inc}"

    def _build(self, vid: ValidatorId, recovering: bool = False):
        inc = self.incarnation.get(vid, 0)
        rng = random.Random(derive_seed(self.cfg.seed, "node", str(vid), inc))
        strat = self.adversaries.get(vid)
        if vid.is_core:
            cls = self.registry.get(strat) or CORE_STRATEGIES.get(strat) or self.registry["core"]
            return cls(
                vid,
                self.committee,
                self.scheme,
                self.node_cfg,
                rng,
                rule=self.rule,
                subscribers=self.subscribers.get(vid, ()),
                recovering=recovering,
            )
        cls = self.registry.get(strat) or AUX_STRATEGIES.get(strat) or self.registry["aux"]
        return cls(vid, self.committee, self.scheme, self.node_cfg, rng)

    def _setup(self) -> None:
        c = self.committee
        sub_rng = random.Random(derive_seed(self.cfg.seed, "subscriptions"))
        subs: dict[ValidatorId, list] = {v: [] for v in c.core_ids}
        k = min(self.cfg.aux_subscriptions, len(c.core_ids))
        for a in c.aux_ids:
            for core in sub_rng.sample(list(c.core_ids), k):
                subs[core].append(a)
        self.subscribers = {v: tuple(sorted(xs)) for v, xs in subs.items()}

        crash_at = {}
        for cr in self.cfg.crashes:
            vid = ValidatorId.parse(cr.node)
            crash_at[vid] = int(cr.at_ms * MS)
            if cr.recover_ms is not None:
                self.recover_at[vid] = int(cr.recover_ms * MS)
        for vid in list(c.core_ids) + list(c.aux_ids):
            self.epoch[vid] = 0
            self.incarnation[vid] = 0
            at = crash_at.get(vid)
            if at is not None and at <= 0:
                self.alive[vid] = False
                self.nodes[vid] = None
            else:
                self.alive[vid] = True
                self.nodes[vid] = self._build(vid)
            if at is not None and at > 0:
                self._push(at, CRASH, vid)
            if vid in self.recover_at:
                self._push(self.recover_at[vid], RECOVER, vid)
        for vid in list(c.core_ids) + list(c.aux_ids):
            if self.alive[vid]:
                self._apply(vid, self.nodes[vid].start(0), 0)
        if self.cfg.load_tps > 0:
            self._push(0, INJECT, None)
        self._push(0, SAMPLE, None)

    # -- effects ---------------------------------------------------------------

    def _partitioned(self, src, dst, t) -> bool:
        for start, end, group in self.partitions:
            if start <= t < end and ((src in group) != (dst in group)):
                return True
        return False

    def _apply(self, src: ValidatorId, effects: list, t: int) -> None:
        for e in effects:
            if type(e) is Send:
                self._route(src, e.dst, e.msg, t)
            elif type(e) is SetTimer:
                self._push(max(e.at, t), TIMER, src, self.epoch[src], e.tag)
            elif type(e) is CommitBatch:
                self._record_commit(src, e, t)

    def _route(self, src: ValidatorId, dst: ValidatorId, msg, t: int) -> None:
        allowed = ROUTES[(src.kind, dst.kind)]
        if type(msg) not in allowed:
            raise RoutingViolation(f"{src} -> {dst}: {type(msg).__name__} not allowed")
        if dst == src:
            return
        self.report.messages_sent += 1
        if t < self.gst:
            if self.partitions and self._partitioned(src, dst, t):
                self.report.messages_dropped += 1
                return
            if self.cfg.drop_prob and self.net_rng.random() < self.cfg.drop_prob:
                self.report.messages_dropped += 1
                return
        base, jitter = self.links[(src.kind, dst.kind)]
        arrive = t + base + (self.net_rng.randrange(jitter + 1) if jitter else 0)
        if not self.alive[dst]:
            rec = self.recover_at.get(dst)
            if rec is None or rec > arrive or self.incarnation[dst] > 0:
                self.report.messages_dropped += 1
                return
        self._push(arrive, DELIVER, dst, src, msg)
        if self.cfg.trace:
            self.report.trace.append(f"{t} {src} {dst} {type(msg).__name__}")

    def _record_commit(self, vid: ValidatorId, batch: CommitBatch, t: int) -> None:
        if vid in self.adversaries:
            return
        label = self._label(vid)
        lines = self.report.commits.setdefault(label, [])
        lines.extend(_entry_line(e) for e in batch.entries)
        by_digest = {e.digest: v for e, v in zip(batch.entries, batch.values)}
        info = self.report.leaders.setdefault(label, [])
        c = self.committee
        for ld, authors in zip(batch.leaders, batch.leader_aux_authors or [()] * len(batch.leaders)):
            v = by_digest.get(ld)
            rnd = v.round if v is not None else -1
            info.append(
                {
                    "round": rnd,
                    "digest": ld.hex(),
                    "inclusion": c.is_inclusion_round(rnd),
                    "aux": [a.digest.hex() for a in v.aux_parents] if v is not None else [],
                    "aux_stake": c.stake_of(authors),
                }
            )
        stable = vid in self._stable and self.incarnation[vid] == 0
        for e, v in zip(batch.entries, batch.values):
            if e.kind == Kind.AUX:
                self.aux_committed.add(e.digest)
            if not stable or v is None:
                continue
            for tx in v.payload:
                if tx not in self.inject_time:
                    continue
                if tx not in self.first_commit:
                    self.first_commit[tx] = t
                self.commit_count[tx] = self.commit_count.get(tx, 0) + 1

    # -- events ------------------------------------------------------------------

    def _inject(self, t: int) -> None:
        cfg = self.cfg
        dt = int(cfg.inject_interval_ms * MS)
        m = cfg.load_tps * cfg.inject_interval_ms / 1000.0
        trials = max(1, math.ceil(2 * m))
        p = m / trials
        rng = self.load_rng
        count = sum(1 for _ in range(trials) if rng.random() < p)
        if cfg.load_targets == "core":
            targets = self.committee.core_ids
        else:
            targets = self.committee.core_ids + self.committee.aux_ids
        for _ in range(count):
            tgt = targets[rng.randrange(len(targets))]
            self.tx_counter += 1
            tx = hashlib.blake2b(
                self.tx_counter.to_bytes(8, "big"), key=b"tx" + cfg.seed.to_bytes(8, "big"), digest_size=32
            ).digest()
            self.report.tx_injected += 1
            node = self.nodes[tgt] if self.alive[tgt] else None
            if node is None:
                continue
            self.inject_time[tx] = t
            node.submit((tx,), t)
        if t + dt <= self.end:
            self._push(t + dt, INJECT, None)

    def _sample(self, t: int) -> None:
        row = {"t_ms": t / MS, "nodes": {}}
        for vid in self.committee.core_ids:
            node = self.nodes[vid]
            if node is None or vid in self.adversaries:
                continue
            label = self._label(vid)
            hw = node.history.last_committed_round
            self.report.highwater.setdefault(label, []).append([t / MS, hw, len(node.output)])
            row["nodes"][label] = {
                "round": node.round,
                "last_committed_round": hw,
                "committed": len(node.output),
                "timeouts": node.metrics["timeouts"],
                "fetch_requests": node.metrics["fetch_requests"],
            }
        self.report.samples.append(row)
        dt = int(self.cfg.sample_interval_ms * MS)
        if t + dt <= self.end:
            self._push(t + dt, SAMPLE, None)

    def run(self) -> SimReport:
        self._setup()
        heap = self.heap
        nodes = self.nodes
        alive = self.alive
        epoch = self.epoch
        end = self.end
        n_events = 0
        while heap:
            t, _, kind, a, b, c = heapq.heappop(heap)
            if t > end:
                break
            n_events += 1
            if kind == DELIVER:
                if alive[a]:
                    self._apply(a, nodes[a].handle(b, c, t), t)
            elif kind == TIMER:
                if alive[a] and epoch[a] == b:
                    self._apply(a, nodes[a].on_timer(c, t), t)
            elif kind == INJECT:
                self._inject(t)
            elif kind == SAMPLE:
                self._sample(t)
            elif kind == CRASH:
                alive[a] = False
                nodes[a] = None
                epoch[a] += 1
            elif kind == RECOVER:
                epoch[a] += 1
                self.incarnation[a] += 1
                alive[a] = True
                nodes[a] = self._build(a, recovering=a.is_core)
                self._apply(a, nodes[a].start(t), t)
        self.report.events = n_events
        self._finish()
        return self.report

    def _finish(self) -> None:
        rep = self.report
        need = len(self.stable_core)
        lat = []
        for tx, cnt in self.commit_count.items():
            if cnt >= need:
                lat.append((self.first_commit[tx] - self.inject_time[tx]) / MS)
        lat.sort()
        rep.tx_latencies_ms = lat
        rep.tx_committed_any = len(self.first_commit)
        rep.aux_certs_committed = len(self.aux_committed)
        for vid, node in self.nodes.items():
            if node is None:
                continue
            label = self._label(vid)
            if vid.is_core or node.metrics:
                rep.metrics[label] = dict(sorted(node.metrics.items()))
            if vid.is_core and vid not in self.adversaries:
                problems = node.dag.audit()
                if problems:
                    rep.audits[label] = problems


def run(cfg: SimConfig, committee: Committee, registry=None, rule=None) -> SimReport:
    """Run one simulation to ``cfg.duration_ms`` and return its report."""
    return Simulator(cfg, committee, registry, rule).run()
