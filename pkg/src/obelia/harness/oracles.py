"""Brute-force oracles for certificate assembly and the direct commit rule.

The oracles work on plain lists and counts; they share no helper with the
production code beyond the value types.
"""

from __future__ import annotations

import itertools
import random

from ..commit import SlotStatus, direct_decision
from ..committee import Committee, aux, core
from ..crypto import MockScheme, signer_for
from ..dag import DagState
from ..messages import AuxProposal, CoreVertex
from ..validation import InsufficientSignatures, assemble_certificate, counter_sign, genesis_vertices


def oracle_quorum(n: int) -> int:
    f = max(f for f in range(n) if 3 * f + 1 <= n)
    return 2 * f + 1


def certificate_equivalence(sizes=(4, 7, 10)) -> int:
    """Mismatches between ``assemble_certificate`` and subset counting."""
    scheme = MockScheme(b"oracle")
    mismatches = 0
    for n in sizes:
        c = Committee.uniform(n, 1)
        unsigned = AuxProposal(aux(0), 1, ())
        p = unsigned.with_signature(signer_for(scheme, aux(0))(unsigned.body))
        sigs = {i: counter_sign(p, signer_for(scheme, core(i))) for i in range(n)}
        q = oracle_quorum(n)
        for k in range(n + 1):
            for subset in itertools.combinations(range(n), k):
                offered = [(core(i), sigs[i]) for i in subset]
                outsiders = [i for i in range(n) if i not in subset]
                variants = [offered]
                if outsiders:
                    # a forged entry from a non-signer must not count
                    variants.append(offered + [(core(outsiders[0]), b"\x00" * 32)])
                for attempt in variants:
                    try:
                        cert = assemble_certificate(p, attempt, c, scheme)
                        accepted = True
                        ok = len(cert.counter_sigs) == q and set(cert.signers()) <= {core(i) for i in subset}
                    except InsufficientSignatures:
                        accepted, ok = False, True
                    if accepted != (k >= q) or not ok:
                        mismatches += 1
    return mismatches


def random_dag(rng: random.Random, n: int = 4, max_rounds: int = 6) -> DagState:
    """Small DAG with gaps and equivocations; parents pick one version per author."""
    c = Committee.uniform(n)
    d = DagState()
    prev = []
    for g in genesis_vertices(c):
        d.insert_core(g)
        prev.append(g)
    rounds = rng.randint(2, max_rounds)
    for r in range(1, rounds + 1):
        cur = []
        for i in range(n):
            if rng.random() < 0.15:
                continue
            versions = 2 if rng.random() < 0.15 else 1
            for k in range(versions):
                by_author = {}
                for u in prev:
                    by_author.setdefault(u.author, []).append(u)
                authors = sorted(by_author)
                want = min(len(authors), rng.randint(3, n)) if len(authors) >= 3 else len(authors)
                picked = rng.sample(authors, want)
                parents = tuple(rng.choice(by_author[a]).digest for a in sorted(picked))
                v = CoreVertex(core(i), r, parents, (), ((bytes([r, i, k]) * 11)[:32],))
                d.insert_core(v, allow_equivocation=True)
                cur.append(v)
        if not cur:
            break
        prev = cur
    return d


def oracle_direct(vertices: list[CoreVertex], n: int, r: int, leader) -> tuple[str, bytes | None]:
    """Support counting straight from the definition, over a flat vertex list."""
    q = oracle_quorum(n)
    at = {k: [v for v in vertices if v.round == k] for k in (r, r + 1, r + 2)}
    if not at[r + 1]:
        return "undecided", None
    versions = sorted((v for v in at[r] if v.author == leader), key=lambda v: v.digest)
    for v in versions:
        sup = [u for u in at[r + 1] if v.digest in u.core_parents]
        if len({u.author for u in sup}) < q:
            continue
        sup_digests = {u.digest for u in sup}
        cert_authors = set()
        for w in at[r + 2]:
            backing = {u.author for u in sup if u.digest in w.core_parents and u.digest in sup_digests}
            if len(backing) >= q:
                cert_authors.add(w.author)
        if len(cert_authors) >= q:
            return "commit", v.digest
    ids = {v.digest for v in versions}
    blame = {u.author for u in at[r + 1] if not ids.intersection(u.core_parents)}
    if len(blame) >= q:
        return "skip", None
    return "undecided", None


def direct_commit_equivalence(count: int = 1000, seed: int = 0, n: int = 4) -> int:
    rng = random.Random(seed)
    c = Committee.uniform(n)
    mismatches = 0
    for _ in range(count):
        d = random_dag(rng, n)
        vertices = list(d.core.values())
        for r in range(1, d.max_round + 1):
            status, digest = direct_decision(d, c, r)
            want = oracle_direct(vertices, n, r, c.leader_of(r))
            got = (status.value if status is not SlotStatus.UNDECIDED else "undecided", digest)
            if got != want:
                mismatches += 1
    return mismatches
