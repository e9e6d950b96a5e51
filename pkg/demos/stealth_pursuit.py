"""Demo: close a relaxation gap by pursuing disagreeing cluster pairs.

A frustrated 4-cycle (three edges reward disagreement, one rewards
agreement) is the smallest instance where the pairwise relaxation is not
tight: its dual settles about one unit above the best integer assignment.
The pursuit loop inspects pairs of clusters that share a sub-cluster but
disagree about it, adds their unions as new clusters, and re-solves.  Two or
three rounds close the gap to machine precision.
"""

from __future__ import annotations

import numpy as np

import maplp


def frustrated_cycle(seed: int) -> maplp.FactorGraph:
    rng = maplp.XorShift64Star(seed)
    agree = np.array([[1.0, 0.0], [0.0, 1.0]])
    disagree = np.array([[0.0, 1.0], [1.0, 0.0]])
    edges = [(0, 1), (1, 2), (2, 3), (0, 3)]
    tables = [
        (agree if i == 3 else disagree) + rng.normals(4).reshape(2, 2) * 0.02
        for i in range(4)
    ]
    return maplp.FactorGraph([2] * 4, edges, tables)


def main() -> None:
    graph = frustrated_cycle(seed=1)
    exact = maplp.brute_force_map(graph)
    print("frustrated 4-cycle, exhaustive optimum:", round(exact.value, 6))

    spec = maplp.dd_spec(graph)
    params = maplp.SolverParams(max_sweeps=500, pursuit_sweeps=50)

    plain = maplp.run(graph, spec, params, label="dd")
    print(f"\npairwise relaxation alone: dual={plain.dual:.6f} "
          f"decoded={plain.primal:.6f} gap={plain.gap:.4f}")

    candidates = maplp.stealth_candidates(spec, plain.beliefs)
    print(f"{len(candidates)} disagreeing cluster pairs at the fixed point:")
    for cand in candidates[:4]:
        print(f"  parents {cand.parents} disagree on {cand.shared}; "
              f"union {cand.union}, one-update decrease {cand.score:.4f}")

    result = maplp.run_with_pursuit(graph, spec, params, label="dd+stealth")
    added = [c for c in result.spec.extended_clusters if len(c) > 2]
    print(f"\nwith pursuit: dual={result.dual:.6f} decoded={result.primal:.6f} "
          f"gap={result.gap:.2e} after {result.rounds} rounds")
    print("clusters added:", added)
    print("decoded assignment matches optimum:",
          maplp.energy(graph, result.assignment) == exact.value)

    print("\ndual trajectory (sweep, dual, decoded):")
    for rec in result.trace.records[:: max(1, len(result.trace.records) // 12)]:
        print(f"  {rec.sweep:>4} {rec.dual:>12.6f} {rec.primal:>12.6f} "
              f"round {rec.pursuit_round}")


if __name__ == "__main__":
    main()
