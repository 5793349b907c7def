"""Machine-checked properties over simulation reports."""

from __future__ import annotations

import statistics
from collections import Counter

from ..simnet.engine import SimReport


def prefix_violations(rep: SimReport) -> list[str]:
    """Pairs of honest commit sequences (all incarnations) that diverge."""
    seqs = rep.commits
    if not seqs:
        return []
    ref_label = max(seqs, key=lambda k: (len(seqs[k]), k))
    ref = seqs[ref_label]
    bad = []
    for label, seq in sorted(seqs.items()):
        if ref[: len(seq)] != seq:
            i = next(i for i, (a, b) in enumerate(zip(seq, ref)) if a != b)
            bad.append(f"{label} diverges from {ref_label} at position {i}")
    return bad


def duplicate_emissions(rep: SimReport) -> list[str]:
    bad = []
    for label, seq in sorted(rep.commits.items()):
        digests = Counter(line.rsplit(" ", 1)[1] for line in seq)
        dup = [d for d, n in digests.items() if n > 1]
        if dup:
            bad.append(f"{label}: {len(dup)} values emitted twice")
    return bad


def highwater_at(rep: SimReport, label: str, t_ms: float) -> int:
    """Last-committed leader round of ``label`` at the latest sample <= t."""
    best = 0
    for t, hw, _ in rep.highwater.get(label, ()):
        if t <= t_ms:
            best = hw
    return best


def round_progress(rep: SimReport, start_ms: float, end_ms: float) -> dict[str, int]:
    return {
        label: highwater_at(rep, label, end_ms) - highwater_at(rep, label, start_ms)
        for label in rep.stable_core
    }


def aux_inclusion_violations(rep: SimReport, t_a: int, strict: bool) -> list[str]:
    """Inclusion-round leaders below t_a, and referenced certs not emitted exactly once."""
    bad = []
    for label, leaders in sorted(rep.leaders.items()):
        seq = rep.commits.get(label, [])
        position = {}
        counts = Counter()
        for i, line in enumerate(seq):
            d = line.rsplit(" ", 1)[1]
            counts[d] += 1
            position.setdefault(d, i)
        for ld in leaders:
            if strict and ld["inclusion"] and ld["aux_stake"] < t_a:
                bad.append(f"{label}: leader round {ld['round']} carries aux stake {ld['aux_stake']} < {t_a}")
            lpos = position.get(ld["digest"])
            for a in ld["aux"]:
                if counts[a] != 1:
                    bad.append(f"{label}: cert {a[:8]} emitted {counts[a]} times")
                elif lpos is not None and position[a] > lpos:
                    bad.append(f"{label}: cert {a[:8]} emitted after its leader")
    return bad


def recovery_gap(rep: SimReport, node: str, t_ms: float) -> int | None:
    """Committed-round distance of the recovered incarnation from the best peer."""
    label = f"{node}#1"
    if label not in rep.highwater:
        return None
    top = max(highwater_at(rep, lb, t_ms) for lb in rep.highwater)
    return top - highwater_at(rep, label, t_ms)


def pooled_median(samples: list[list[float]]) -> float | None:
    xs = [x for s in samples for x in s]
    return statistics.median(xs) if xs else None
