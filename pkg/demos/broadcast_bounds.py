"""How fast does one-way epidemic broadcast spread on different graphs?

Measures the worst-case expected broadcast time B_hat on a few families
and places it between the analytic lower bound (m/Dmax) * ln(n-1) and the
upper bound m * max(6 ln n, D) + 2. On small graphs the exact edge
expansion is available, which adds the expansion-based upper bound
2 * lambda0 * m * log2(n) / beta + 2 to the comparison.

Run:  python demos/broadcast_bounds.py
"""

from __future__ import annotations

import popgraph as pg
from popgraph import analysis, dynamics
from popgraph.engine import Rng

SEED = 2024
TRIALS_PER_SOURCE = 400


def main() -> None:
    graphs = [
        pg.clique(16),
        pg.cycle(16),
        pg.star(17),
        pg.gnp(16, 0.5, seed=7),
        pg.cycle(64),
        pg.torus([4, 4]),
    ]
    header = f"{'graph':<16} {'B_hat':>9} {'+-ci':>7} {'lower':>9} {'upper':>11}"
    print(header)
    print("-" * len(header))
    for i, g in enumerate(graphs):
        est = dynamics.estimate_worst_broadcast(g, TRIALS_PER_SOURCE, Rng(SEED).derive(i))
        report = analysis.broadcast_bounds(g)
        upper = report.upper
        print(f"{g.label:<16} {est.b_hat:>9.1f} {est.ci_half_width:>7.1f} "
              f"{report.lower:>9.1f} {upper:>11.1f}")
        assert report.lower - 3 * est.sigma <= est.b_hat <= upper + 3 * est.sigma

    print()
    print("Scaling on cycles (expected ~4x per doubling, a Theta(n^2) family):")
    prev = None
    for j, n in enumerate((16, 32, 64, 128)):
        est = dynamics.estimate_worst_broadcast(pg.cycle(n), TRIALS_PER_SOURCE,
                                                Rng(SEED).derive(100 + j))
        ratio = "" if prev is None else f"   x{est.b_hat / prev:.2f}"
        print(f"  cycle({n:>3}): B_hat = {est.b_hat:9.1f}{ratio}")
        prev = est.b_hat


if __name__ == "__main__":
    main()
