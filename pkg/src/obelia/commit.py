"""Leader ordering and deterministic linearization of the DAG.

The shipped decision rule works in waves of three rounds. A round-(r+1)
vertex *supports* the slot-r leader vertex it references; a round-(r+2)
vertex *certifies* it when its parents include supporters with quorum
stake. Slot r is

* committed directly once certifiers reach quorum stake,
* skipped directly once round-(r+1) vertices referencing no version of the
  slot reach quorum stake,
* otherwise decided through the first non-skipped slot at round >= r+3:
  commit iff that anchor's causal history holds a certificate for it.

At most one version of a slot can ever be certified (two certificates
would need two quorums of supporters, whose intersection contains an
honest author that references a single version), so all honest nodes agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Protocol, Sequence

from .committee import Committee, Kind, ValidatorId
from .dag import DagState, MissingAncestor
from .messages import CoreVertex, Digest


class SlotStatus(Enum):
    UNDECIDED = "undecided"
    COMMIT = "commit"
    SKIP = "skip"


@dataclass
class LeaderSlot:
    round: int
    leader: ValidatorId
    status: SlotStatus = SlotStatus.UNDECIDED
    digest: Digest | None = None


class SlotHistory:
    """Decided slots, contiguous from round 1; decisions never change."""

    def __init__(self) -> None:
        self.slots: dict[int, LeaderSlot] = {}
        self.next_round = 1
        self.last_committed_round = 0

    def record(self, slot: LeaderSlot) -> None:
        if slot.status is SlotStatus.UNDECIDED:
            raise ValueError("only decided slots are recorded")
        old = self.slots.get(slot.round)
        if old is not None:
            if (old.status, old.digest) != (slot.status, slot.digest):
                raise ValueError(f"slot {slot.round} would flip from {old.status} to {slot.status}")
            return
        if slot.round != self.next_round:
            raise ValueError(f"slot {slot.round} decided out of order (next is {self.next_round})")
        self.slots[slot.round] = slot
        self.next_round += 1
        if slot.status is SlotStatus.COMMIT:
            self.last_committed_round = slot.round

    def status(self, r: int) -> SlotStatus:
        s = self.slots.get(r)
        return s.status if s is not None else SlotStatus.UNDECIDED


class Entry(NamedTuple):
    digest: Digest
    kind: Kind
    author: ValidatorId
    round: int


class CommitOutput:
    """Append-only sequence handed to the application."""

    def __init__(self) -> None:
        self.entries: list[Entry] = []
        self._seen: set[Digest] = set()
        self.high_water = 0
        self.skipped_below_gc = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, digest: Digest) -> bool:
        return digest in self._seen

    def append(self, entry: Entry) -> None:
        if entry.digest in self._seen:
            raise ValueError(f"{entry.digest.hex()} already committed")
        self._seen.add(entry.digest)
        self.entries.append(entry)

    def digests(self) -> list[Digest]:
        return [e.digest for e in self.entries]

    def lines(self) -> list[str]:
        return [
            f"{i} {'core' if e.kind == Kind.CORE else 'aux'} {e.author} {e.round} {e.digest.hex()}"
            for i, e in enumerate(self.entries)
        ]

    def dump(self) -> str:
        return "".join(line + "\n" for line in self.lines())


# -- decision rule -------------------------------------------------------------


class DecisionRule(Protocol):
    def decide(self, d: DagState, c: Committee, history: SlotHistory) -> list[LeaderSlot]:
        """Newly decided slots, ascending and contiguous from ``history.next_round``."""
        ...


def _stake(c: Committee, authors) -> int:
    return sum(c.stake(a) for a in authors)


def supporters(d: DagState, v: CoreVertex) -> list[CoreVertex]:
    return [u for u in d.round_vertices(v.round + 1) if v.digest in u.parent_set]


def certifies(c: Committee, w: CoreVertex, support: set[Digest], authors: dict[Digest, ValidatorId]) -> bool:
    """Whether ``w``'s parents include supporters with quorum stake."""
    return _stake(c, {authors[p] for p in w.core_parents if p in support}) >= c.quorum


def direct_decision(d: DagState, c: Committee, r: int) -> tuple[SlotStatus, Digest | None]:
    leader = c.leader_of(r)
    versions = d.slot_versions(leader, r)
    nxt = d.round_vertices(r + 1)
    if not nxt:
        return SlotStatus.UNDECIDED, None
    after = d.round_vertices(r + 2)
    for v in sorted(versions, key=lambda x: x.digest):
        support = {u.digest: u.author for u in nxt if v.digest in u.parent_set}
        if _stake(c, set(support.values())) < c.quorum:
            continue
        certifiers = {w.author for w in after if certifies(c, w, set(support), support)}
        if _stake(c, certifiers) >= c.quorum:
            return SlotStatus.COMMIT, v.digest
    vdigs = {v.digest for v in versions}
    blamers = {u.author for u in nxt if not (u.parent_set & vdigs)}
    if _stake(c, blamers) >= c.quorum:
        return SlotStatus.SKIP, None
    return SlotStatus.UNDECIDED, None


class _CausalLevels:
    """Causal history of one vertex, materialised round by round downward."""

    def __init__(self, d: DagState, anchor: CoreVertex):
        self.d = d
        self.levels: dict[int, set[Digest]] = {anchor.round: {anchor.digest}}
        self.lowest = anchor.round

    def at(self, r: int) -> set[Digest]:
        core = self.d.core
        while self.lowest > r:
            nxt = set()
            for dg in self.levels[self.lowest]:
                v = core.get(dg)
                if v is not None:
                    nxt.update(v.core_parents)
            self.lowest -= 1
            self.levels[self.lowest] = nxt
        return self.levels.get(r, set())


class CertifiedSupportRule:
    name = "certified-support"

    def direct(self, d: DagState, c: Committee, r: int) -> tuple[SlotStatus, Digest | None]:
        return direct_decision(d, c, r)

    def _indirect(self, d, c, r, anchor_history: _CausalLevels):
        versions = d.slot_versions(c.leader_of(r), r)
        if not versions:
            return SlotStatus.SKIP, None
        core = d.core
        ws = [core[x] for x in anchor_history.at(r + 2) if x in core]
        for v in sorted(versions, key=lambda x: x.digest):
            support = {u.digest: u.author for u in supporters(d, v)}
            if not support:
                continue
            sset = set(support)
            if any(certifies(c, w, sset, support) for w in ws):
                return SlotStatus.COMMIT, v.digest
        return SlotStatus.SKIP, None

    def decide(self, d: DagState, c: Committee, history: SlotHistory) -> list[LeaderSlot]:
        start = history.next_round
        top = d.max_round
        if top < start:
            return []
        decisions: dict[int, tuple[SlotStatus, Digest | None]] = {}
        anchors: dict[Digest, _CausalLevels] = {}
        for r in range(top, start - 1, -1):
            status, digest = self.direct(d, c, r)
            if status is SlotStatus.UNDECIDED:
                for ra in range(r + 3, top + 1):
                    st, dg = decisions[ra]
                    if st is SlotStatus.SKIP:
                        continue
                    if st is SlotStatus.COMMIT:
                        levels = anchors.get(dg)
                        if levels is None:
                            levels = anchors[dg] = _CausalLevels(d, d.core[dg])
                        status, digest = self._indirect(d, c, r, levels)
                    break
            decisions[r] = (status, digest)
        out = []
        for r in range(start, top + 1):
            status, digest = decisions[r]
            if status is SlotStatus.UNDECIDED:
                break
            out.append(LeaderSlot(r, c.leader_of(r), status, digest))
        return out


DEFAULT_RULE = CertifiedSupportRule()


def order_new_leaders(
    d: DagState, c: Committee, history: SlotHistory, rule: DecisionRule | None = None
) -> list[Digest]:
    """Record newly decided slots; return newly committed leader digests (ascending)."""
    slots = (rule or DEFAULT_RULE).decide(d, c, history)
    for s in slots:
        history.record(s)
    return [s.digest for s in slots if s.status is SlotStatus.COMMIT]


# -- linearization ----------------------------------------------------------------


def _refs(value, d: DagState, horizon: int, out: CommitOutput):
    """References of ``value`` above the horizon, sorted (round, author, digest)."""
    refs = []
    core, aux = d.core, d.aux
    if isinstance(value, CoreVertex):
        prnd = value.round - 1
        if value.core_parents and prnd < horizon:
            out.skipped_below_gc += len(value.core_parents)
        else:
            for p in value.core_parents:
                v = core.get(p)
                if v is None:
                    raise MissingAncestor((p,), ())
                refs.append((prnd, v.author, p))
        for a in value.aux_parents:
            if a.ref_round < horizon:
                out.skipped_below_gc += 1
                continue
            cert = aux.get(a.digest)
            if cert is None:
                raise MissingAncestor((), (a.digest,))
            refs.append((a.ref_round + 1, cert.author, a.digest))
    else:
        prnd = value.ref_round
        if prnd < horizon:
            out.skipped_below_gc += len(value.proposal.core_refs)
            return refs
        for p in value.proposal.core_refs:
            v = core.get(p)
            if v is None:
                raise MissingAncestor((p,), ())
            refs.append((prnd, v.author, p))
    refs.sort()
    return refs


def linearize(
    leaders: Sequence[Digest], d: DagState, out: CommitOutput, *, gc_depth: int
) -> list[Entry]:
    """Append each leader's not-yet-output sub-DAG to ``out``.

    Depth-first over core and aux references in (round, author, digest)
    order; a value is emitted when first reached, and the leader closes its
    own batch. References below ``leader.round - gc_depth`` are skipped.
    """
    appended: list[Entry] = []
    core, aux = d.core, d.aux
    for ld in leaders:
        leader = core.get(ld)
        if leader is None:
            raise MissingAncestor((ld,), ())
        horizon = max(0, leader.round - gc_depth)
        stack = list(reversed(_refs(leader, d, horizon, out)))
        while stack:
            rnd, author, dg = stack.pop()
            if dg in out:
                continue
            value = core.get(dg)
            kind = Kind.CORE
            if value is None:
                value = aux[dg]
                kind = Kind.AUX
            e = Entry(dg, kind, author, rnd)
            out.append(e)
            appended.append(e)
            stack.extend(reversed(_refs(value, d, horizon, out)))
        if ld not in out:
            e = Entry(ld, Kind.CORE, leader.author, leader.round)
            out.append(e)
            appended.append(e)
        out.high_water = max(out.high_water, leader.round)
    return appended
