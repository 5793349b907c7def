"""Scripted four-validator DAG with two aux certificates and known output.

Rounds 0 and 1 are settled prehistory (slot 1 already committed). From
round 2 on:

* round 2: every core votes for all of round 1; ``c3`` is the slow one.
* round 3: ``c0..c2`` reference ``c0..c2`` of round 2; ``c3`` references
  ``c1, c2, c3`` and is left behind by everybody.
* round 4: ``c0..c2`` reference ``c0..c2`` of round 3, so slot 3 (led by
  ``c3``) is skipped.
* round 5: the leader ``c1`` also carries weak links to two certificates,
  ``aux_i`` (over round 3, including the orphaned ``c3``) and ``aux_k``
  (over round 1).
* rounds 6 and 7: full references.

Leaders rotate as c0, c3, c2, c1 over rounds 2..5. The expected leaders are
``c0@2, c2@4, c1@5``; the second batch is a depth-first walk and the third
one pulls in both certificates and the two orphaned ``c3`` vertices.
"""

from __future__ import annotations

import difflib
import time
from dataclasses import dataclass, field

from ..commit import CommitOutput, Entry, LeaderSlot, SlotHistory, SlotStatus, linearize, order_new_leaders
from ..committee import Committee, Kind, aux, core
from ..crypto import MockScheme, signer_for
from ..dag import DagState
from ..messages import AuxCertificate, AuxProposal, CoreVertex
from ..validation import (
    aux_vertex_rejection,
    core_vertex_rejection,
    counter_sign,
    assemble_certificate,
    genesis_vertices,
)

COMMITTEE = Committee(
    core_stakes=(1, 1, 1, 1),
    aux_stakes=(1, 1),
    t_a=2,
    aux_inclusion_period=5,
    leader_rotation=(2, 1, 0, 3),
)

EXPECTED_LEADERS = ["c0@2", "c2@4", "c1@5"]
EXPECTED_BATCHES = [
    ["c0@2"],
    ["c0@3", "c1@2", "c2@2", "c1@3", "c2@3", "c2@4"],
    ["aux_k", "c0@4", "c1@4", "aux_i", "c3@3", "c3@2", "c1@5"],
]
ORANGE = ["c3@2", "c3@3", "aux_i", "aux_k"]


@dataclass
class GoldenDag:
    dag: DagState
    history: SlotHistory
    output: CommitOutput
    names: dict = field(default_factory=dict)
    problems: list[str] = field(default_factory=list)


def build(*, drop_aux_k: bool = False) -> GoldenDag:
    c = COMMITTEE
    scheme = MockScheme(b"golden")
    dag = DagState()
    names = {}
    problems = []
    rounds: dict[int, dict[int, CoreVertex]] = {}

    def add(v: CoreVertex, check: bool = True) -> CoreVertex:
        if check:
            reason = core_vertex_rejection(v, dag, c, scheme)
            if reason is not None:
                problems.append(f"{names.get(v.digest, v)} rejected: {reason.value}")
        dag.insert_core(v)
        return v

    def vertex(i: int, r: int, parents, aux_refs=()) -> CoreVertex:
        unsigned = CoreVertex(core(i), r, tuple(rounds[r - 1][p].digest for p in parents), tuple(aux_refs))
        v = unsigned.with_signature(signer_for(scheme, core(i))(unsigned.body))
        names[v.digest] = f"c{i}@{r}"
        rounds.setdefault(r, {})[i] = v
        return v

    def certificate(a: int, ref_round: int, refs, name: str) -> AuxCertificate:
        unsigned = AuxProposal(aux(a), ref_round, tuple(rounds[ref_round][i].digest for i in refs))
        p = unsigned.with_signature(signer_for(scheme, aux(a))(unsigned.body))
        sigs = [(core(i), counter_sign(p, signer_for(scheme, core(i)))) for i in range(4)]
        cert = assemble_certificate(p, sigs, c, scheme)
        reason = aux_vertex_rejection(cert, dag, c, scheme)
        if reason is not None:
            problems.append(f"{name} rejected: {reason.value}")
        dag.insert_aux(cert)
        names[cert.digest] = name
        return cert

    rounds[0] = {}
    for g in genesis_vertices(c):
        add(g)
        rounds[0][g.author.index] = g
        names[g.digest] = f"c{g.author.index}@0"
    everyone = (0, 1, 2, 3)
    first3 = (0, 1, 2)
    for i in everyone:
        add(vertex(i, 1, everyone))
    for i in everyone:
        add(vertex(i, 2, everyone))
    for i in first3:
        add(vertex(i, 3, first3))
    add(vertex(3, 3, (1, 2, 3)))
    for i in first3:
        add(vertex(i, 4, first3))
    aux_i = certificate(0, 3, (1, 2, 3), "aux_i")
    aux_k = certificate(1, 1, first3, "aux_k")
    for i in first3:
        refs = ()
        if i == 1:
            refs = (aux_i.ref,) if drop_aux_k else (aux_i.ref, aux_k.ref)
        # the mutant leader is short of t_a on purpose; insert it unchecked
        add(vertex(i, 5, first3, refs), check=not (drop_aux_k and i == 1))
    for r in (6, 7):
        for i in first3:
            add(vertex(i, r, first3))

    history = SlotHistory()
    history.record(LeaderSlot(1, c.leader_of(1), SlotStatus.COMMIT, rounds[1][1].digest))
    output = CommitOutput()
    for r in (0, 1):
        for i in everyone:
            v = rounds[r][i]
            output.append(Entry(v.digest, Kind.CORE, v.author, r))
    output.high_water = 1
    return GoldenDag(dag, history, output, names, problems)


@dataclass
class GoldenResult:
    passed: bool
    leaders: list[str]
    batches: list[list[str]]
    problems: list[str]
    seconds: float

    def report(self) -> str:
        lines = [f"leaders: {' '.join(self.leaders)}"]
        for i, b in enumerate(self.batches, 1):
            lines.append(f"batch {i}: {' '.join(b)}")
        lines.extend(self.problems)
        lines.append(f"golden: {'PASS' if self.passed else 'FAIL'} ({self.seconds * 1000:.1f} ms)")
        return "\n".join(lines) + "\n"


def _diff(label: str, want: list[str], got: list[str]) -> list[str]:
    return [f"{label} mismatch:"] + [
        "  " + line for line in difflib.unified_diff(want, got, "expected", "actual", lineterm="")
    ]


def run_golden(*, drop_aux_k: bool = False) -> GoldenResult:
    t0 = time.perf_counter()
    g = build(drop_aux_k=drop_aux_k)
    names = g.names
    leaders = order_new_leaders(g.dag, COMMITTEE, g.history)
    batches = []
    for ld in leaders:
        entries = linearize([ld], g.dag, g.output, gc_depth=COMMITTEE.gc_depth)
        batches.append([names[e.digest] for e in entries])
    leader_names = [names[d] for d in leaders]
    problems = list(g.problems)
    if leader_names != EXPECTED_LEADERS:
        problems += _diff("leaders", EXPECTED_LEADERS, leader_names)
    for i, (want, got) in enumerate(zip(EXPECTED_BATCHES, batches), 1):
        if want != got:
            problems += _diff(f"batch {i}", want, got)
    if len(batches) >= 3:
        for name in ORANGE:
            if batches[2].count(name) != 1:
                problems.append(f"{name} appears {batches[2].count(name)} times in batch 3")
    seconds = time.perf_counter() - t0
    if seconds >= 1.0:
        problems.append(f"golden check took {seconds:.2f} s")
    return GoldenResult(not problems, leader_names, batches, problems, seconds)
