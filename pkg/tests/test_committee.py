import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from obelia.committee import (
    Committee,
    CommitteeError,
    Kind,
    ValidatorId,
    aux,
    core,
    leader_of,
    max_faulty,
    quorum_threshold,
    validity_threshold,
)


@pytest.mark.parametrize("n, f", [(4, 1), (10, 3), (100, 33)])
def test_max_faulty(n, f):
    c = Committee.uniform(n)
    assert max_faulty(c) == f
    assert 3 * f + 1 <= n < 3 * (f + 1) + 1


@pytest.mark.parametrize("n, q", [(4, 3), (10, 7), (7, 5)])
def test_quorum_threshold(n, q):
    assert quorum_threshold(Committee.uniform(n)) == q


@pytest.mark.parametrize("n, v", [(4, 2), (10, 4), (100, 34)])
def test_validity_threshold(n, v):
    assert validity_threshold(Committee.uniform(n)) == v


@pytest.mark.parametrize("r, idx", [(1, 1), (4, 0), (6, 2)])
def test_round_robin_leader(r, idx):
    assert leader_of(Committee.uniform(4), r) == core(idx)


def test_custom_rotation():
    c = Committee.uniform(4, leader_rotation=(2, 1, 0, 3))
    assert [c.leader_of(r).index for r in range(1, 9)] == [1, 0, 3, 2, 1, 0, 3, 2]
    with pytest.raises(ValueError):
        c.leader_of(0)


def test_inclusion_rounds():
    c = Committee.uniform(4, 10)
    assert [r for r in range(1, 21) if c.is_inclusion_round(r)] == [5, 10, 15, 20]


def test_default_t_a_is_ten_percent_rounded_up():
    assert Committee.uniform(10, 50).t_a == 5
    assert Committee.uniform(10, 8).t_a == 1
    assert Committee.uniform(10, 0).t_a == 0


def test_weighted_thresholds_use_stake():
    c = Committee(core_stakes=(3, 1, 1, 1, 1, 1, 2), aux_stakes=(5, 1), t_a=2)
    assert c.n_c == 10 and c.f == 3 and c.quorum == 7
    assert c.stake(core(0)) == 3 and c.stake(aux(0)) == 5
    assert c.stake_of([core(0), core(6)]) == 5


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(core_stakes=(1, 1, 1)),
        dict(core_stakes=(1, 1, 1, 0)),
        dict(core_stakes=(1,) * 4, aux_stakes=(1, 1), t_a=3),
        dict(core_stakes=(1,) * 4, aux_stakes=(1, 1), t_a=0),
        dict(core_stakes=(1,) * 4, t_a=1),
        dict(core_stakes=(1,) * 4, leader_rotation=(0, 1, 1, 3)),
        dict(core_stakes=(1,) * 4, gc_depth=3),
    ],
)
def test_invalid_committees_rejected(kwargs):
    with pytest.raises(CommitteeError):
        Committee(**kwargs)


def test_json_round_trip(tmp_path):
    c = Committee(core_stakes=(2, 1, 1, 1), aux_stakes=(1, 3), t_a=2, leader_rotation=(3, 2, 1, 0))
    path = tmp_path / "committee.json"
    c.dump(path)
    assert Committee.load(path) == c
    assert Committee.from_dict(json.loads(path.read_text())) == c


def test_validator_id_text():
    assert str(core(3)) == "c3" and str(aux(17)) == "a17"
    assert ValidatorId.parse("a17") == ValidatorId(Kind.AUX, 17)
    assert core(9) < aux(0)
    with pytest.raises(ValueError):
        ValidatorId.parse("x1")


@given(st.lists(st.integers(1, 20), min_size=4, max_size=30))
def test_two_quorums_overlap_beyond_f(stakes):
    if sum(stakes) < 4:
        return
    c = Committee(core_stakes=tuple(stakes))
    # any two quorums share more than f stake, so an honest member
    assert 2 * c.quorum - c.n_c >= c.f + 1
    assert c.validity == c.f + 1
    if c.n_c == 3 * c.f + 1:
        assert c.quorum == 2 * c.f + 1
