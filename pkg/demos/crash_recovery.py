"""A core validator loses its state at 3 s, restarts at 6 s and catches up.

Prints the committed-leader round of every core over time; the restarted
incarnation appears as ``c1#1``.

    python3 demos/crash_recovery.py
"""

from obelia.committee import Committee
from obelia.harness.checks import highwater_at, prefix_violations
from obelia.simnet import SimConfig, run


def main() -> None:
    cfg = SimConfig(
        seed=7,
        duration_ms=12_000,
        load_tps=200,
        crashes=[{"node": "c1", "at_ms": 3000, "recover_ms": 6000}],
    )
    rep = run(cfg, Committee.uniform(4, 8))
    labels = sorted(rep.highwater)
    print("t (s)  " + "  ".join(f"{lb:>5}" for lb in labels))
    for t in range(0, 12_001, 1000):
        cells = []
        for lb in labels:
            first = rep.highwater[lb][0][0]
            cells.append(f"{highwater_at(rep, lb, t):5d}" if t >= first else "    -")
        print(f"{t / 1000:5.0f}  " + "  ".join(cells))
    m = rep.metrics.get("c1#1", {})
    print(f"restarted node: {m.get('fetch_requests', 0)} fetch requests, {m.get('accepted_core', 0)} vertices ingested")
    print("prefix consistent" if not prefix_violations(rep) else prefix_violations(rep))


if __name__ == "__main__":
    main()
