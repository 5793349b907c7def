"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints one ``criterion N PASS|FAIL`` line. The suites are the
same named scenarios the CLI runs (``obelia-sim run <name>``); results
shared between criteria are computed once per session.
"""

import functools
import time

import pytest

from obelia.harness.golden import ORANGE, run_golden
from obelia.harness.oracles import certificate_equivalence, direct_commit_equivalence
from obelia.harness.scenarios import SAFETY_STRATEGIES, Options, run_scenario

pytestmark = pytest.mark.acceptance


@functools.cache
def suite(name: str):
    t0 = time.perf_counter()
    res = run_scenario(name, Options())
    res.seconds = time.perf_counter() - t0
    return res


def verdict(res, name):
    return next(v for v in res.verdicts if v.name == name)


def test_criterion_01_golden(criterion):
    g = run_golden()
    m = run_golden(drop_aux_k=True)
    batch3 = g.batches[2] if len(g.batches) > 2 else []
    ok = g.passed and g.seconds < 1.0 and all(batch3.count(x) == 1 for x in ORANGE) and not m.passed
    detail = f"leaders {' '.join(g.leaders)}, {g.seconds * 1000:.1f} ms, mutation {'detected' if not m.passed else 'missed'}"
    assert criterion(1, "golden DAG", ok, detail), g.report()


def test_criterion_02_safety(criterion):
    res = suite("safety")
    specs = [r.spec for r in res.results]
    sizes = {len(s.committee.core_stakes) for s in specs}
    strategies = {v for s in specs for v in s.config.adversaries.values()}
    exact_f = all(len(s.config.adversaries) == (len(s.committee.core_stakes) - 1) // 3 for s in specs)
    prefix = verdict(res, "prefix-consistency")
    dups = verdict(res, "no-duplicates")
    coverage = verdict(res, "full-aux-crash-covered")
    ok = (
        len(specs) == 200
        and sizes == set(range(4, 11))
        and strategies == set(SAFETY_STRATEGIES)
        and exact_f
        and prefix.passed
        and dups.passed
        and coverage.passed
    )
    detail = f"{len(specs)} runs, {prefix.value} prefix violations, {dups.value} duplicates, {res.seconds:.0f} s"
    assert criterion(2, "safety suite", ok, detail), [v.to_dict() for v in res.verdicts]


def test_criterion_03_liveness(criterion):
    res = suite("liveness")
    v = verdict(res, "progress-after-gst")
    ok = len(res.results) == 100 and v.passed and all(r.spec.committee.strict_aux_inclusion for r in res.results)
    detail = f"{len(res.results)} runs, min {v.value} rounds in [GST, GST+5 s] (need >= 20), {res.seconds:.0f} s"
    assert criterion(3, "liveness after GST", ok, detail), v.detail


def test_criterion_04_aux_inclusion(criterion):
    res = suite("liveness")
    v = verdict(res, "aux-inclusion")
    assert criterion(4, "aux inclusion", v.passed, f"{v.value} violations, {v.detail}"), v.detail


def _ratio_criterion(criterion, number, title, name):
    res = suite(name)
    v = verdict(res, "latency-within-10pct")
    safe = verdict(res, "prefix-consistency").passed
    ok = v.passed and safe and len(res.results) == 40
    assert criterion(number, title, ok, f"{v.detail}, tolerance 10%, 20 seeds each, {res.seconds:.0f} s"), v.detail


def test_criterion_05_overhead(criterion):
    _ratio_criterion(criterion, 5, "O-10-50 vs M-10 latency", "overhead")


def test_criterion_06_scaling(criterion):
    _ratio_criterion(criterion, 6, "O-10-200 vs O-10-50 latency", "scaling")


def test_criterion_07_crash_tolerance(criterion):
    res = suite("crash-tolerance")
    crashed = {r.spec.crashed_aux for r in res.results}
    _ratio_criterion(criterion, 7, f"O-10-200 with {max(crashed)} aux crashed vs none", "crash-tolerance")
    assert crashed == {0, 190}


def test_criterion_08_recovery(criterion):
    res = suite("recovery")
    v = verdict(res, "recovered-within-5-rounds")
    prefix = verdict(res, "prefix-consistency")
    ok = v.passed and prefix.passed and len(res.results) == 20
    assert criterion(8, "crash-recovery catch-up", ok, f"{v.detail}, {prefix.value} prefix violations"), v.detail


def test_criterion_09_oracles(criterion):
    cert = certificate_equivalence((4, 7, 10))
    direct = direct_commit_equivalence(1000, seed=0, n=4)
    ok = cert == 0 and direct == 0
    assert criterion(9, "oracle equivalence", ok, f"{cert} certificate mismatches, {direct} direct-commit mismatches / 1000 DAGs")


def test_criterion_10_determinism(criterion):
    across = run_scenario("determinism", Options())
    opts = Options(seeds=10, duration_ms=2000)
    a = run_scenario("safety", opts)
    b = run_scenario("safety", opts)
    same = a.rows_csv() == b.rows_csv() and a.commit_dump() == b.commit_dump()
    ok = across.passed and same
    detail = f"hash-seed sweep {'identical' if across.passed else 'DIFFERS'}, adversarial re-run {'identical' if same else 'DIFFERS'}"
    assert criterion(10, "determinism", ok, detail)
