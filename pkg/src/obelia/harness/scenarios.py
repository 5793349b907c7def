"""Named experiment scenarios, their expansion into runs, and success predicates.

Scenario names:

* ``M-X``    X core validators, no auxiliary validators.
* ``O-X-Y``  X core and Y auxiliary validators (unit stake, t_a = 10%).
* named suites (``safety``, ``liveness``, ...) bundle several variants and
  the predicate that decides them; see ``SUITES``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import re
import subprocess
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from ..committee import Committee
from ..simnet import SimConfig, run
from ..simnet.engine import SimReport, derive_seed
from . import checks

SAFETY_STRATEGIES = ("equivocator", "withholder", "mute")

ROW_FIELDS = [
    "scenario",
    "variant",
    "seed",
    "n_core",
    "n_aux",
    "crashed_aux",
    "adversaries",
    "excluded",
    "strict_aux",
    "load_tps",
    "duration_ms",
    "median_ms",
    "p95_ms",
    "throughput_tps",
    "committed_tx",
    "aux_certs_committed",
    "min_committed_round",
    "timeouts",
    "fetch_requests",
    "rejected",
    "prefix_ok",
    "duplicates",
]


@dataclass
class Options:
    seeds: int | None = None
    base_seed: int = 0
    load: float | None = None
    aux: int | None = None
    crash_aux: int | None = None
    strict_aux: bool | None = None
    duration_ms: float | None = None
    trace: bool = False


@dataclass
class RunSpec:
    scenario: str
    variant: str
    seed: int
    committee: Committee
    config: SimConfig

    @property
    def crashed_aux(self) -> int:
        return sum(1 for c in self.config.crashes if c.node.startswith("a"))


@dataclass
class RunResult:
    spec: RunSpec
    report: SimReport
    row: dict


@dataclass
class Verdict:
    name: str
    passed: bool
    detail: str = ""
    value: float | None = None

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "detail": self.detail, "value": self.value}


@dataclass
class ScenarioResult:
    name: str
    rows: list[dict] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    results: list[RunResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def rows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=ROW_FIELDS, lineterminator="\n")
        w.writeheader()
        for row in sorted(self.rows, key=lambda r: (r["scenario"], r["variant"], r["seed"])):
            w.writerow(row)
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "scenario": self.name,
            "runs": len(self.rows),
            "pass": self.passed,
            "predicates": [v.to_dict() for v in self.verdicts],
        }

    def commit_dump(self) -> str:
        parts = []
        for r in sorted(self.results, key=lambda x: (x.spec.variant, x.spec.seed)):
            parts.append(f"## {r.spec.variant} seed={r.spec.seed}\n")
            parts.append(r.report.commit_dump())
        return "".join(parts)

    def write(self, out: str | Path) -> None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "rows.csv").write_text(self.rows_csv())
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        (out / "commits.txt").write_text(self.commit_dump())
        traces = [t for r in self.results for t in r.report.trace]
        if traces:
            (out / "trace.log").write_text("\n".join(traces) + "\n")


# -- committees and configs ------------------------------------------------------------


def uniform_committee(n_core: int, n_aux: int, strict: bool = True) -> Committee:
    return Committee.uniform(n_core, n_aux, strict_aux_inclusion=strict)


def survivor_weighted_committee(n_core: int, n_aux: int, crashed: int, strict: bool = True) -> Committee:
    """The last ``crashed`` aux validators have stake 1; survivors share as much.

    Survivors jointly hold at least half the aux stake, so with t_a = 10%
    the surviving stake clears t_a no matter how many of the rest crash.
    """
    survivors = n_aux - crashed
    if survivors <= 0:
        raise ValueError("at least one aux validator must survive")
    weight = max(1, math.ceil(crashed / survivors))
    stakes = (weight,) * survivors + (1,) * crashed
    t_a = max(1, math.ceil(sum(stakes) / 10))
    return Committee(core_stakes=(1,) * n_core, aux_stakes=stakes, t_a=t_a, strict_aux_inclusion=strict)


def _row(spec: RunSpec, rep: SimReport) -> dict:
    med = rep.median_latency_ms()
    p95 = rep.quantile_latency_ms(0.95)
    honest = rep.stable_core
    rejected: dict[str, int] = {}
    timeouts = fetches = 0
    for label in honest:
        m = rep.metrics.get(label, {})
        timeouts += m.get("timeouts", 0)
        fetches += m.get("fetch_requests", 0)
        for k, v in m.items():
            if k.startswith("rejected:"):
                rejected[k[9:]] = rejected.get(k[9:], 0) + v
    dur_s = spec.config.duration_ms / 1000
    return {
        "scenario": spec.scenario,
        "variant": spec.variant,
        "seed": spec.seed,
        "n_core": len(spec.committee.core_stakes),
        "n_aux": len(spec.committee.aux_stakes),
        "crashed_aux": spec.crashed_aux,
        "adversaries": ";".join(f"{k}={v}" for k, v in sorted(spec.config.adversaries.items())),
        "excluded": int(rep.excluded),
        "strict_aux": int(spec.committee.strict_aux_inclusion),
        "load_tps": f"{spec.config.load_tps:g}",
        "duration_ms": f"{spec.config.duration_ms:g}",
        "median_ms": "" if med is None else f"{med:.3f}",
        "p95_ms": "" if p95 is None else f"{p95:.3f}",
        "throughput_tps": f"{len(rep.tx_latencies_ms) / dur_s:.3f}",
        "committed_tx": len(rep.tx_latencies_ms),
        "aux_certs_committed": rep.aux_certs_committed,
        "min_committed_round": min(
            (checks.highwater_at(rep, lb, spec.config.duration_ms) for lb in honest), default=0
        ),
        "timeouts": timeouts,
        "fetch_requests": fetches,
        "rejected": ";".join(f"{k}={v}" for k, v in sorted(rejected.items())),
        "prefix_ok": int(not checks.prefix_violations(rep)),
        "duplicates": len(checks.duplicate_emissions(rep)),
    }


def execute(specs: list[RunSpec]) -> list[RunResult]:
    out = []
    for spec in specs:
        rep = run(spec.config, spec.committee)
        out.append(RunResult(spec, rep, _row(spec, rep)))
    return out


# -- scenario definitions -----------------------------------------------------------------

_PATTERN = re.compile(r"^(?:M-(\d+)|O-(\d+)-(\d+))$")


def parse_variant(name: str) -> tuple[int, int]:
    m = _PATTERN.match(name)
    if not m:
        raise KeyError(name)
    if m.group(1):
        return int(m.group(1)), 0
    return int(m.group(2)), int(m.group(3))


def _seed(opts: Options, name: str, i: int) -> int:
    return derive_seed(opts.base_seed, name, i)


def variant_specs(
    scenario: str,
    variant: str,
    opts: Options,
    *,
    seeds: int,
    load: float = 1000.0,
    duration_ms: float = 6000.0,
    weighted: int | None = None,
    crash_aux: int = 0,
    seed_label: str | None = None,
) -> list[RunSpec]:
    """Runs of one committee shape over ``seeds`` seeds.

    ``weighted`` builds the survivor-weighted committee for that crash
    count even when fewer (or no) aux validators actually crash.
    """
    n_core, n_aux = parse_variant(variant)
    if opts.aux is not None and n_aux:
        n_aux = opts.aux
    strict = True if opts.strict_aux is None else opts.strict_aux
    crash = opts.crash_aux if opts.crash_aux is not None else crash_aux
    if crash > n_aux:
        raise ValueError(f"cannot crash {crash} of {n_aux} aux validators")
    if weighted is None and crash and strict:
        weighted = crash
    if weighted:
        committee = survivor_weighted_committee(n_core, n_aux, weighted, strict)
    else:
        committee = uniform_committee(n_core, n_aux, strict)
    specs = []
    for i in range(opts.seeds if opts.seeds is not None else seeds):
        seed = _seed(opts, seed_label or scenario, i)
        cfg = SimConfig(
            seed=seed,
            duration_ms=opts.duration_ms or duration_ms,
            load_tps=opts.load if opts.load is not None else load,
            crashes=[{"node": f"a{j}", "at_ms": 0.0} for j in range(n_aux - crash, n_aux)],
            trace=opts.trace,
        )
        specs.append(RunSpec(scenario, variant, seed, committee, cfg))
    return specs


def _safety_verdicts(results: list[RunResult]) -> list[Verdict]:
    counted = [r for r in results if not r.report.excluded]
    prefix = [f"seed {r.spec.seed}: {p}" for r in counted for p in checks.prefix_violations(r.report)]
    dups = [f"seed {r.spec.seed}: {p}" for r in counted for p in checks.duplicate_emissions(r.report)]
    audits = [f"seed {r.spec.seed}: {k}" for r in counted for k in r.report.audits]
    excluded = len(results) - len(counted)
    return [
        Verdict("prefix-consistency", not prefix, "; ".join(prefix[:5]) or f"{len(counted)} runs", len(prefix)),
        Verdict("no-duplicates", not dups, "; ".join(dups[:5]) or f"{excluded} beyond-threshold runs excluded", len(dups)),
        Verdict("dag-audit", not audits, "; ".join(audits[:5]) or "no inconsistencies", len(audits)),
    ]


def simple(name: str, opts: Options) -> ScenarioResult:
    specs = variant_specs(name, name, opts, seeds=5)
    res = ScenarioResult(name)
    res.results = execute(specs)
    res.rows = [r.row for r in res.results]
    res.verdicts = _safety_verdicts(res.results)
    return res


def safety(opts: Options) -> ScenarioResult:
    n = opts.seeds if opts.seeds is not None else 200
    specs = []
    for i in range(n):
        seed = _seed(opts, "safety", i)
        rng = random.Random(seed)
        n_core = 4 + i % 7
        f = (n_core - 1) // 3
        n_aux = rng.choice((4, 8, 12))
        all_crashed = i % 5 == 4
        strict = not all_crashed if opts.strict_aux is None else opts.strict_aux
        committee = uniform_committee(n_core, n_aux, strict)
        bad = rng.sample(range(n_core), f)
        adversaries = {f"c{c}": SAFETY_STRATEGIES[(i + j) % 3] for j, c in enumerate(sorted(bad))}
        duration = opts.duration_ms or 4000.0
        if all_crashed:
            crashes = [{"node": f"a{j}", "at_ms": 0.0} for j in range(n_aux)]
        else:
            crashes = [
                {"node": f"a{j}", "at_ms": float(rng.randrange(int(duration)))}
                for j in range(n_aux)
                if rng.random() < 0.5
            ]
        lossy = i % 3 == 0
        cfg = SimConfig(
            seed=seed,
            duration_ms=duration,
            load_tps=opts.load if opts.load is not None else 200.0,
            adversaries=adversaries,
            crashes=crashes,
            drop_prob=0.1 if lossy else 0.0,
            gst_ms=duration / 2 if lossy else None,
            trace=opts.trace,
        )
        specs.append(RunSpec("safety", f"O-{n_core}-{n_aux}", seed, committee, cfg))
    res = ScenarioResult("safety")
    res.results = execute(specs)
    res.rows = [r.row for r in res.results]
    res.verdicts = _safety_verdicts(res.results)
    res.verdicts.append(
        Verdict(
            "full-aux-crash-covered",
            any(r.spec.crashed_aux == len(r.spec.committee.aux_stakes) and not r.spec.committee.strict_aux_inclusion for r in res.results) or n < 5,
            "runs with every aux crashed and lenient inclusion",
        )
    )
    return res


GST_MS = 5000.0


def liveness(opts: Options) -> ScenarioResult:
    n = opts.seeds if opts.seeds is not None else 100
    specs = []
    for i in range(n):
        seed = _seed(opts, "liveness", i)
        rng = random.Random(seed)
        n_core = 4 + i % 4
        committee = uniform_committee(n_core, 8, True if opts.strict_aux is None else opts.strict_aux)
        victim = f"c{rng.randrange(n_core)}"
        start = float(rng.randrange(0, 3000))
        cfg = SimConfig(
            seed=seed,
            duration_ms=opts.duration_ms or 10_000.0,
            load_tps=opts.load if opts.load is not None else 200.0,
            drop_prob=0.2,
            gst_ms=GST_MS,
            partitions=[{"start_ms": start, "end_ms": GST_MS, "group": [victim]}],
            trace=opts.trace,
        )
        specs.append(RunSpec("liveness", f"O-{n_core}-8", seed, committee, cfg))
    res = ScenarioResult("liveness")
    res.results = execute(specs)
    res.rows = [r.row for r in res.results]
    res.verdicts = _safety_verdicts(res.results)
    worst = None
    slow = []
    for r in res.results:
        prog = checks.round_progress(r.report, GST_MS, GST_MS + 5000.0)
        low = min(prog.values())
        worst = low if worst is None else min(worst, low)
        if low < 20:
            slow.append(f"seed {r.spec.seed}: {low} rounds")
    res.verdicts.append(Verdict("progress-after-gst", not slow and worst is not None, "; ".join(slow[:5]) or f"min {worst} rounds", worst))
    bad = [
        f"seed {r.spec.seed}: {p}"
        for r in res.results
        for p in checks.aux_inclusion_violations(r.report, r.spec.committee.t_a, r.spec.committee.strict_aux_inclusion)
    ]
    inclusion_leaders = sum(
        1 for r in res.results for ls in r.report.leaders.values() for ld in ls if ld["inclusion"]
    )
    res.verdicts.append(
        Verdict("aux-inclusion", not bad and inclusion_leaders > 0, "; ".join(bad[:5]) or f"{inclusion_leaders} inclusion leaders checked", len(bad))
    )
    return res


def recovery(opts: Options) -> ScenarioResult:
    n = opts.seeds if opts.seeds is not None else 20
    specs = []
    for i in range(n):
        seed = _seed(opts, "recovery", i)
        committee = uniform_committee(4, 8, True if opts.strict_aux is None else opts.strict_aux)
        cfg = SimConfig(
            seed=seed,
            duration_ms=opts.duration_ms or 12_000.0,
            load_tps=opts.load if opts.load is not None else 200.0,
            crashes=[{"node": f"c{i % 4}", "at_ms": 3000.0, "recover_ms": 6000.0}],
            trace=opts.trace,
        )
        specs.append(RunSpec("recovery", "O-4-8", seed, committee, cfg))
    res = ScenarioResult("recovery")
    res.results = execute(specs)
    res.rows = [r.row for r in res.results]
    res.verdicts = _safety_verdicts(res.results)
    gaps = []
    for r in res.results:
        node = r.spec.config.crashes[0].node
        gap = checks.recovery_gap(r.report, node, r.spec.config.duration_ms)
        gaps.append((r.spec.seed, gap))
    bad = [f"seed {s}: gap {g}" for s, g in gaps if g is None or g > 5]
    worst = max((g for _, g in gaps if g is not None), default=None)
    res.verdicts.append(Verdict("recovered-within-5-rounds", not bad, "; ".join(bad[:5]) or f"max gap {worst}", worst))
    return res


def _ratio_verdict(name: str, test: list[RunResult], base: list[RunResult], tol: float = 0.10) -> Verdict:
    a = checks.pooled_median([r.report.tx_latencies_ms for r in test])
    b = checks.pooled_median([r.report.tx_latencies_ms for r in base])
    if a is None or b is None:
        return Verdict(name, False, "no committed transactions")
    ratio = a / b
    return Verdict(name, abs(ratio - 1) <= tol, f"{a:.1f} ms vs {b:.1f} ms (ratio {ratio:.3f})", ratio)


def _comparison(name: str, test_specs, base_specs, verdict_name: str) -> ScenarioResult:
    res = ScenarioResult(name)
    base = execute(base_specs)
    test = execute(test_specs)
    res.results = base + test
    res.rows = [r.row for r in res.results]
    res.verdicts = _safety_verdicts(res.results)
    res.verdicts.append(_ratio_verdict(verdict_name, test, base))
    return res


def overhead(opts: Options) -> ScenarioResult:
    base = variant_specs("overhead", "M-10", opts, seeds=20, seed_label="perf")
    test = variant_specs("overhead", "O-10-50", opts, seeds=20, seed_label="perf")
    return _comparison("overhead", test, base, "latency-within-10pct")


def scaling(opts: Options) -> ScenarioResult:
    base = variant_specs("scaling", "O-10-50", opts, seeds=20, seed_label="perf")
    test = variant_specs("scaling", "O-10-200", opts, seeds=20, seed_label="perf")
    return _comparison("scaling", test, base, "latency-within-10pct")


def crash_tolerance(opts: Options) -> ScenarioResult:
    crashed = opts.crash_aux if opts.crash_aux is not None else 190
    o = replace(opts, crash_aux=None)
    base = variant_specs("crash-tolerance", "O-10-200", o, seeds=20, weighted=crashed, seed_label="perf")
    test = variant_specs(
        "crash-tolerance", "O-10-200", o, seeds=20, weighted=crashed, crash_aux=crashed, seed_label="perf"
    )
    res = _comparison("crash-tolerance", test, base, "latency-within-10pct")
    for r in res.results:
        r.row["variant"] = f"O-10-200/crash{r.spec.crashed_aux}"
    return res


def golden(opts: Options) -> ScenarioResult:
    from .golden import run_golden

    g = run_golden()
    m = run_golden(drop_aux_k=True)
    res = ScenarioResult("golden")
    res.verdicts = [
        Verdict("golden-dag", g.passed, "; ".join(g.problems) or f"{g.seconds * 1000:.1f} ms"),
        Verdict("mutation-detected", not m.passed, "dropping aux_k must fail"),
    ]
    return res


def oracle(opts: Options) -> ScenarioResult:
    from .oracles import certificate_equivalence, direct_commit_equivalence

    res = ScenarioResult("oracle")
    mism = certificate_equivalence((4, 7, 10))
    res.verdicts.append(Verdict("certificate-subsets", mism == 0, f"{mism} mismatches", mism))
    n = opts.seeds if opts.seeds is not None else 1000
    mism = direct_commit_equivalence(n, opts.base_seed)
    res.verdicts.append(Verdict("direct-commit", mism == 0, f"{mism} mismatches over {n} DAGs", mism))
    return res


def determinism(opts: Options) -> ScenarioResult:
    """Re-run a small sweep in fresh interpreters with different hash seeds."""
    res = ScenarioResult("determinism")
    outputs = []
    for hashseed in ("0", "12345"):
        code = (
            "import sys\n"
            "from obelia.harness.scenarios import Options, simple\n"
            f"r = simple('O-4-8', Options(seeds={opts.seeds or 3}, base_seed={opts.base_seed}, duration_ms=3000))\n"
            "sys.stdout.write(r.rows_csv() + '\\0' + r.commit_dump())\n"
        )
        env = {"PYTHONHASHSEED": hashseed, "PATH": "/usr/bin:/bin"}
        proc = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env | _pythonpath(), check=True
        )
        outputs.append(proc.stdout)
    a, b = outputs
    rows_a, dump_a = a.split("\0", 1)
    rows_b, dump_b = b.split("\0", 1)
    res.verdicts = [
        Verdict("rows-identical", rows_a == rows_b, f"{len(rows_a)} bytes"),
        Verdict("commits-identical", dump_a == dump_b, f"{len(dump_a)} bytes"),
    ]
    return res


def _pythonpath() -> dict:
    import os

    src = str(Path(__file__).resolve().parents[2])
    extra = os.environ.get("PYTHONPATH")
    return {"PYTHONPATH": src + (os.pathsep + extra if extra else "")}


SUITES: dict[str, tuple[Callable[[Options], ScenarioResult], str]] = {
    "golden": (golden, "scripted DAG with known leaders and batches, plus a planted mutation"),
    "safety": (safety, "f equivocating/withholding/mute cores, random aux crashes; prefix consistency"),
    "liveness": (liveness, "lossy network and a partition until GST; progress and aux inclusion after it"),
    "recovery": (recovery, "a core crashes at 3 s and restarts empty at 6 s; catches up via fetch"),
    "overhead": (overhead, "M-10 vs O-10-50 latency at 1000 tx/s"),
    "scaling": (scaling, "O-10-50 vs O-10-200 latency at 1000 tx/s"),
    "crash-tolerance": (crash_tolerance, "O-10-200 with 190 aux crashed vs none"),
    "oracle": (oracle, "certificate assembly and direct commit against brute force"),
    "determinism": (determinism, "identical rows and commits across interpreter hash seeds"),
}


def run_scenario(name: str, opts: Options | None = None) -> ScenarioResult:
    opts = opts or Options()
    if name in SUITES:
        return SUITES[name][0](opts)
    parse_variant(name)
    return simple(name, opts)
