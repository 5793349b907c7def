"""Walk through the scripted four-validator DAG and its three commits.

    python3 demos/golden_walkthrough.py
"""

from obelia.harness.golden import COMMITTEE, ORANGE, build, run_golden


def main() -> None:
    g = build()
    print(f"committee: {COMMITTEE.n_c} core, {COMMITTEE.n_a} aux, quorum {COMMITTEE.quorum}, t_a {COMMITTEE.t_a}")
    for r in range(2, 8):
        row = sorted(g.names[v.digest] for v in g.dag.round_vertices(r))
        print(f"round {r}: {' '.join(row)}  (leader c{COMMITTEE.leader_of(r).index})")
    print("certificates:", " ".join(sorted(g.names[d] for d in g.dag.aux)))
    print()
    res = run_golden()
    print(res.report(), end="")
    print(f"values only reachable through aux certificates: {' '.join(ORANGE)}")
    print()
    mutant = run_golden(drop_aux_k=True)
    print("with aux_k dropped from the round-5 leader:")
    print("\n".join(mutant.problems[:8]))


if __name__ == "__main__":
    main()
