"""Seven core validators, two of them Byzantine, aux validators crashing midway.

Prints per-node commit counts and checks that honest sequences agree.

    python3 demos/adversaries.py [seed]
"""

import sys

from obelia.committee import Committee
from obelia.harness.checks import duplicate_emissions, prefix_violations
from obelia.simnet import SimConfig, run


def main(seed: int = 1) -> None:
    committee = Committee.uniform(7, 8, strict_aux_inclusion=False)
    cfg = SimConfig(
        seed=seed,
        duration_ms=6000,
        load_tps=300,
        adversaries={"c2": "equivocator", "c5": "withholder"},
        crashes=[{"node": f"a{i}", "at_ms": 1000.0 * (i + 1)} for i in range(8)],
        drop_prob=0.05,
        gst_ms=3000,
    )
    rep = run(cfg, committee)
    print(f"seed {seed}: {rep.events} events, {rep.messages_sent} messages, {rep.messages_dropped} dropped")
    for label in sorted(rep.commits):
        m = rep.metrics[label]
        print(
            f"  {label}: {len(rep.commits[label]):5d} values committed, "
            f"{m.get('equivocations_seen', 0):3d} conflicting versions seen, {m.get('timeouts', 0):3d} timeouts"
        )
    print(f"aux certificates committed: {rep.aux_certs_committed}")
    print(f"median latency: {rep.median_latency_ms():.1f} ms over {len(rep.tx_latencies_ms)} txs")
    bad = prefix_violations(rep) + duplicate_emissions(rep)
    print("honest sequences consistent" if not bad else "\n".join(bad))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 1)
