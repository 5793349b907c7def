import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagkit import Kit
from obelia.commit import (
    CommitOutput,
    LeaderSlot,
    SlotHistory,
    SlotStatus,
    direct_decision,
    linearize,
    order_new_leaders,
)
from obelia.committee import Committee, core
from obelia.dag import DagState
from obelia.harness.oracles import random_dag

C = Committee.uniform(4)


def names(k: Kit):
    return {v.digest: f"c{i}@{r}" for (i, r), v in k.v.items()}


def decide_all(k: Kit):
    h = SlotHistory()
    leaders = order_new_leaders(k.dag, C, h)
    return h, leaders


def test_empty_dag_decides_nothing():
    h, leaders = decide_all(Kit(C))
    assert leaders == [] and h.next_round == 1


def test_fully_connected_rounds_commit_two_behind():
    k = Kit(C)
    k.rounds(1, 2)
    assert decide_all(k)[1] == []
    k.rounds(3, 3)
    h, leaders = decide_all(k)
    assert leaders == [k.v[(1, 1)].digest]
    k.rounds(4, 4)
    h, leaders = decide_all(k)
    assert leaders == [k.v[(1, 1)].digest, k.v[(2, 2)].digest]
    assert h.last_committed_round == 2 and h.next_round == 3


def test_absent_leader_is_skipped():
    k = Kit(C)
    k.rounds(1, 1)
    for i in (0, 1, 3):
        k.add(k.vertex(i, 2))
    for r in range(3, 7):
        for i in (0, 1, 3) if r == 3 else range(4):
            k.add(k.vertex(i, r, parents=(0, 1, 3) if r == 3 else None))
    h, leaders = decide_all(k)
    assert h.status(2) is SlotStatus.SKIP
    assert direct_decision(k.dag, C, 2) == (SlotStatus.SKIP, None)
    n = names(k)
    assert [n[d] for d in leaders] == ["c1@1", "c3@3", "c0@4"]


@pytest.mark.parametrize("certifier_survives, expect", [(True, SlotStatus.COMMIT), (False, SlotStatus.SKIP)])
def test_indirect_decision_through_anchor(certifier_survives, expect):
    k = Kit(C)
    k.rounds(1, 1)
    # three of four round-2 vertices support c1@1, so it cannot be skipped directly
    for i in (0, 1, 2):
        k.add(k.vertex(i, 2))
    k.add(k.vertex(3, 2, parents=(0, 2, 3)))
    # only c0@3 sees a quorum of supporters: not enough to commit directly
    if certifier_survives:
        k.add(k.vertex(0, 3, parents=(0, 1, 2)))
    for i in (1, 2, 3):
        k.add(k.vertex(i, 3, parents=(1, 2, 3)))
    authors3 = (0, 1, 2, 3) if certifier_survives else (1, 2, 3)
    for i in range(4):
        k.add(k.vertex(i, 4, parents=authors3))
    k.rounds(5, 6)
    assert direct_decision(k.dag, C, 1) == (SlotStatus.UNDECIDED, None)
    h, _ = decide_all(k)
    assert h.status(1) is expect
    assert h.status(4) is SlotStatus.COMMIT


def test_history_never_flips_or_skips_ahead():
    h = SlotHistory()
    h.record(LeaderSlot(1, core(1), SlotStatus.SKIP))
    h.record(LeaderSlot(1, core(1), SlotStatus.SKIP))
    with pytest.raises(ValueError):
        h.record(LeaderSlot(1, core(1), SlotStatus.COMMIT, b"\x00" * 32))
    with pytest.raises(ValueError):
        h.record(LeaderSlot(3, core(3), SlotStatus.SKIP))
    with pytest.raises(ValueError):
        h.record(LeaderSlot(2, core(2)))


def test_linearize_depth_first_leader_last():
    k = Kit(C)
    k.rounds(1, 4)
    _, leaders = decide_all(k)
    out = CommitOutput()
    n = names(k)
    assert linearize([], k.dag, out, gc_depth=30) == [] and len(out) == 0
    first = linearize(leaders[:1], k.dag, out, gc_depth=30)
    assert [n[e.digest] for e in first] == ["c0@0", "c1@0", "c2@0", "c3@0", "c1@1"]
    second = linearize(leaders[1:], k.dag, out, gc_depth=30)
    assert [n[e.digest] for e in second] == ["c0@1", "c2@1", "c3@1", "c2@2"]
    assert out.high_water == 2
    with pytest.raises(ValueError):
        out.append(first[0])


def test_linearize_skips_below_horizon():
    k = Kit(C)
    k.rounds(1, 4)
    out = CommitOutput()
    batch = linearize([k.v[(2, 2)].digest], k.dag, out, gc_depth=1)
    assert all(e.round >= 1 for e in batch)
    assert out.skipped_below_gc == 4 * 4


def _replay(d: DagState, order: list) -> list[bytes]:
    """Insert in ``order`` (ancestors first), deciding after every insert."""
    mine = DagState()
    h = SlotHistory()
    out = CommitOutput()
    for v in order:
        mine.insert_core(v, allow_equivocation=True)
        linearize(order_new_leaders(mine, C, h), mine, out, gc_depth=30)
    return out.digests()


def _topological(d: DagState, rng: random.Random) -> list:
    todo = sorted(d.core.values(), key=lambda v: v.digest)
    have = set()
    order = []
    while todo:
        ready = [v for v in todo if all(p in have for p in v.core_parents)]
        v = rng.choice(ready)
        todo.remove(v)
        have.add(v.digest)
        order.append(v)
    return order


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 2**32), st.integers(0, 2**32))
def test_arrival_order_never_breaks_prefix_consistency(dag_seed, s1, s2):
    d = random_dag(random.Random(dag_seed), 4, 7)
    a = _replay(d, _topological(d, random.Random(s1)))
    b = _replay(d, _topological(d, random.Random(s2)))
    n = min(len(a), len(b))
    assert a[:n] == b[:n]
    assert len(set(a)) == len(a)
