"""Content-addressed storage for core vertices and auxiliary certificates."""

from __future__ import annotations

from .committee import Committee, ValidatorId
from .messages import AuxCertificate, CoreVertex, Digest, DagValue


class MissingAncestor(Exception):
    def __init__(self, core=(), aux=()):
        self.core = tuple(core)
        self.aux = tuple(aux)
        super().__init__(f"missing {len(self.core)} core / {len(self.aux)} aux ancestors")


class BelowGcHorizon(Exception):
    pass


class DagState:
    """The two keyed stores (core vertices and auxiliary certificates).

    Each (author, round) slot has one *first-seen* vertex, which is what an
    honest node references when it builds on that round. A conflicting
    version is refused unless the caller passes ``allow_equivocation``
    (used when another vertex needs it as an ancestor).
    """

    def __init__(self) -> None:
        self.core: dict[Digest, CoreVertex] = {}
        self.core_by_round: dict[int, dict[Digest, None]] = {}
        self.first_seen: dict[int, dict[ValidatorId, Digest]] = {}
        self.aux: dict[Digest, AuxCertificate] = {}
        self.aux_by_round: dict[int, dict[Digest, None]] = {}
        self.gc_round = 0
        self.max_round = -1
        self.equivocations = 0

    def __len__(self) -> int:
        return len(self.core) + len(self.aux)

    def __contains__(self, digest: Digest) -> bool:
        return digest in self.core or digest in self.aux

    def get(self, digest: Digest):
        v = self.core.get(digest)
        return v if v is not None else self.aux.get(digest)

    # -- queries -------------------------------------------------------------

    def missing_ancestors(self, value: DagValue) -> tuple[tuple[Digest, ...], tuple[Digest, ...]]:
        """Direct references of ``value`` not stored locally (core, aux).

        Aux references whose ref_round is below the GC horizon count as
        satisfied: they are pruned everywhere and never linearized.
        """
        core = self.core
        if isinstance(value, CoreVertex):
            mc = tuple(p for p in value.core_parents if p not in core)
            ma = tuple(
                a.digest for a in value.aux_parents if a.digest not in self.aux and a.ref_round >= self.gc_round
            )
            return mc, ma
        proposal = value.proposal if isinstance(value, AuxCertificate) else value
        return tuple(p for p in proposal.core_refs if p not in core), ()

    def round_vertices(self, r: int) -> list[CoreVertex]:
        return [self.core[d] for d in self.core_by_round.get(r, ())]

    def first_seen_vertices(self, r: int) -> list[CoreVertex]:
        """Slot-designated vertices of round ``r``, ordered by author."""
        slots = self.first_seen.get(r)
        if not slots:
            return []
        return [self.core[slots[a]] for a in sorted(slots)]

    def slot(self, author: ValidatorId, r: int) -> CoreVertex | None:
        d = self.first_seen.get(r, {}).get(author)
        return self.core[d] if d is not None else None

    def slot_versions(self, author: ValidatorId, r: int) -> list[CoreVertex]:
        return [v for v in self.round_vertices(r) if v.author == author]

    def round_stake(self, r: int, committee: Committee) -> int:
        return sum(committee.stake(a) for a in self.first_seen.get(r, ()))

    def aux_certs(self) -> list[AuxCertificate]:
        return list(self.aux.values())

    # -- mutation ------------------------------------------------------------

    def insert_core(self, v: CoreVertex, *, allow_equivocation: bool = False) -> bool:
        d = v.digest
        if d in self.core:
            return False
        if v.round < self.gc_round:
            raise BelowGcHorizon(f"{v!r} below gc round {self.gc_round}")
        mc, ma = self.missing_ancestors(v)
        if mc or ma:
            raise MissingAncestor(mc, ma)
        slots = self.first_seen.setdefault(v.round, {})
        if v.author in slots:
            self.equivocations += 1
            if not allow_equivocation:
                return False
        else:
            slots[v.author] = d
        self.core[d] = v
        self.core_by_round.setdefault(v.round, {})[d] = None
        if v.round > self.max_round:
            self.max_round = v.round
        return True

    def insert_aux(self, cert: AuxCertificate) -> bool:
        if cert.ref_round < self.gc_round:
            raise BelowGcHorizon(f"{cert!r} ref_round {cert.ref_round} < gc round {self.gc_round}")
        d = cert.digest
        if d in self.aux:
            return False
        mc, _ = self.missing_ancestors(cert)
        if mc:
            raise MissingAncestor(mc, ())
        self.aux[d] = cert
        self.aux_by_round.setdefault(cert.round, {})[d] = None
        return True

    def prune(self, new_gc_round: int) -> int:
        """Drop everything below ``new_gc_round``; returns the number removed."""
        if new_gc_round < self.gc_round:
            raise ValueError("gc round must not decrease")
        removed = 0
        for r in [r for r in self.core_by_round if r < new_gc_round]:
            for d in self.core_by_round.pop(r):
                del self.core[d]
                removed += 1
            self.first_seen.pop(r, None)
        # certs go once their referenced round is gone (ref_round < gc)
        for r in [r for r in self.aux_by_round if r - 1 < new_gc_round]:
            for d in self.aux_by_round.pop(r):
                del self.aux[d]
                removed += 1
        self.gc_round = new_gc_round
        return removed

    # -- diagnostics ---------------------------------------------------------

    def audit(self) -> list[str]:
        """Full-scan consistency check; returns a list of problems (empty if sound)."""
        problems = []
        indexed = {d for ds in self.core_by_round.values() for d in ds}
        if indexed != set(self.core):
            problems.append("core index/map mismatch")
        for r, ds in self.core_by_round.items():
            for d in ds:
                v = self.core.get(d)
                if v is not None and v.round != r:
                    problems.append(f"{v!r} indexed under round {r}")
        aux_indexed = {d for ds in self.aux_by_round.values() for d in ds}
        if aux_indexed != set(self.aux):
            problems.append("aux index/map mismatch")
        for r, slots in self.first_seen.items():
            for a, d in slots.items():
                v = self.core.get(d)
                if v is None or v.author != a or v.round != r:
                    problems.append(f"bad first-seen slot ({a},{r})")
        for v in self.core.values():
            if v.round < self.gc_round:
                problems.append(f"{v!r} below gc round")
            for p in v.core_parents:
                if p not in self.core and v.round - 1 >= self.gc_round:
                    problems.append(f"{v!r} dangling core parent")
            for a in v.aux_parents:
                if a.digest not in self.aux and a.ref_round >= self.gc_round:
                    problems.append(f"{v!r} dangling aux parent")
        for c in self.aux.values():
            if c.ref_round < self.gc_round:
                problems.append(f"{c!r} below gc round")
            for p in c.proposal.core_refs:
                if p not in self.core:
                    problems.append(f"{c!r} dangling core ref")
        return problems

    def dump(self) -> str:
        """Line-oriented text dump: kind, author, round, digest, references."""
        rows = []
        for v in self.core.values():
            refs = ",".join(p.hex() for p in v.core_parents)
            aux = ",".join(f"{a.digest.hex()}@{a.ref_round}" for a in v.aux_parents)
            rows.append(((v.round, 0, v.author, v.digest), f"core {v.author} {v.round} {v.digest.hex()} {refs} {aux}".rstrip()))
        for c in self.aux.values():
            refs = ",".join(p.hex() for p in c.proposal.core_refs)
            rows.append(((c.round, 1, c.author, c.digest), f"aux {c.author} {c.round} {c.digest.hex()} {refs}"))
        rows.sort(key=lambda t: t[0])
        return "".join(line + "\n" for _, line in rows)

