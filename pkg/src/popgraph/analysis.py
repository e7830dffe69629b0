"""Analytic broadcast-time bounds, cover verification, isolation experiments.

The three bound formulas evaluated here bracket the worst-case expected
broadcast time of any connected graph with n nodes, m edges, diameter D,
maximum degree Dmax and edge expansion beta:

    lower:            (m / Dmax) * ln(n - 1)
    diameter upper:   m * max(6 ln n, D) + 2
    expansion upper:  2 * lambda0 * m * log2(n) / beta + 2

lambda0 is the least lambda >= 2 with lambda - e - ln(lambda) >= lambda/2,
computed once by bisection (about 10.12). The expansion form uses log base
2 so that 2*log2(n) dominates the harmonic sums its derivation compares
against at every n >= 4.

Cover checking is certificate-based: the construction supplies explicit
bijections and this module verifies them; no isomorphism search happens
here. Isolation experiments measure how long the influence entering a
cover set stays confined to its radius-ell ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .engine import Rng
from .graph import Cover, Graph, GraphMetrics, ball_of_set, compute_metrics

__all__ = [
    "c_lambda",
    "lambda0",
    "BoundReport",
    "broadcast_bounds",
    "CoverReport",
    "verify_cover",
    "isolation_time",
    "IsolationEstimate",
    "isolation_probability",
    "wilson_interval",
]


def c_lambda(lam: float) -> float:
    """The rate function lambda - 1 - ln(lambda) of geometric-sum tails."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return lam - 1.0 - math.log(lam)


@lru_cache(maxsize=1)
def lambda0(tol: float = 1e-12) -> float:
    """Least lambda >= 2 with lambda - e - ln(lambda) >= lambda / 2."""

    def short(lam: float) -> float:
        return lam / 2.0 - math.e - math.log(lam)

    lo, hi = 2.0, 64.0
    if short(lo) >= 0:
        return lo
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if short(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bound formulas for one graph."""

    lower: float
    upper_diameter: float
    upper_expansion: float | None
    lambda0: float

    @property
    def upper(self) -> float:
        if self.upper_expansion is None:
            return self.upper_diameter
        return min(self.upper_diameter, self.upper_expansion)


def broadcast_bounds(g: Graph, metrics: GraphMetrics | None = None) -> BoundReport:
    """Evaluate the lower and upper bound formulas for graph g.

    The expansion upper bound is only reported when the metrics carry an
    exact expansion value; there is no estimated fallback.
    """
    if metrics is None:
        metrics = compute_metrics(g)
    n, m = g.n, g.m
    lam0 = lambda0()
    lower = m / metrics.max_degree * math.log(n - 1) if n > 2 else float(m)
    upper_diam = m * max(6.0 * math.log(n), float(metrics.diameter)) + 2.0
    upper_exp = None
    if metrics.edge_expansion is not None:
        beta = float(metrics.edge_expansion)
        upper_exp = 2.0 * lam0 * m * math.log2(n) / beta + 2.0
    return BoundReport(lower=lower, upper_diameter=upper_diam,
                       upper_expansion=upper_exp, lambda0=lam0)


# ---------------------------------------------------------------------------
# Cover verification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverReport:
    union_ok: bool
    sizes_ok: bool
    iso_ok: bool
    disjoint_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.union_ok and self.sizes_ok and self.iso_ok and self.disjoint_ok


def _check_certificate(g: Graph, cover: Cover, i: int, j: int) -> bool:
    phi = cover.iso_certificates.get((i, j))
    if phi is None:
        raise ValueError(f"cover is missing the isomorphism certificate for pair ({i},{j})")
    ball_i = ball_of_set(g, cover.sets[i], cover.radius)
    ball_j = ball_of_set(g, cover.sets[j], cover.radius)
    if set(phi.keys()) != set(ball_i):
        return False
    image = set(phi.values())
    if len(image) != len(phi) or image != set(ball_j):
        return False
    if {phi[u] for u in cover.sets[i]} != set(cover.sets[j]):
        return False
    # edge preservation both ways: bijection + injectivity on edges + equal
    # induced edge counts make phi an isomorphism of the induced subgraphs
    edges_i = [(u, v) for u, v in g.edges if int(u) in ball_i and int(v) in ball_i]
    count_j = sum(1 for u, v in g.edges if int(u) in ball_j and int(v) in ball_j)
    if len(edges_i) != count_j:
        return False
    for u, v in edges_i:
        if not g.has_edge(phi[int(u)], phi[int(v)]):
            return False
    return True


def verify_cover(g: Graph, cover: Cover) -> CoverReport:
    """Check the three cover properties plus the claimed disjoint pair."""
    all_nodes = set()
    for s in cover.sets:
        all_nodes |= s
    union_ok = all_nodes == set(range(g.n))
    sizes = {len(s) for s in cover.sets}
    sizes_ok = len(sizes) == 1
    iso_ok = True
    for i in range(cover.k):
        for j in range(i + 1, cover.k):
            if not _check_certificate(g, cover, i, j):
                iso_ok = False
    di, dj = cover.disjoint_pair
    ball_i = ball_of_set(g, cover.sets[di], cover.radius)
    ball_j = ball_of_set(g, cover.sets[dj], cover.radius)
    disjoint_ok = not (ball_i & ball_j)
    return CoverReport(union_ok=union_ok, sizes_ok=sizes_ok, iso_ok=iso_ok,
                       disjoint_ok=disjoint_ok)


# ---------------------------------------------------------------------------
# Isolation time
# ---------------------------------------------------------------------------

def _isolation_masks(g: Graph, cover: Cover) -> list[tuple[int, int]]:
    """(outside-seed mask, cover-set mask) per set with a nonempty outside.

    A set's influencers escape its ball exactly when the forward epidemic
    seeded at the outside region first touches the set, so tracking those
    epidemics reproduces the isolation time realization for realization.
    """
    pairs = []
    for s in cover.sets:
        b = ball_of_set(g, s, cover.radius)
        outside = [v for v in range(g.n) if v not in b]
        if not outside:
            continue
        seed = 0
        for v in outside:
            seed |= 1 << v
        target = 0
        for v in s:
            target |= 1 << v
        pairs.append((seed, target))
    return pairs


def _isolation_run(g: Graph, pairs: list[tuple[int, int]], rng: Rng, t_cap: int) -> int:
    if not pairs:
        return t_cap
    spread = [seed for seed, _ in pairs]
    targets = [tgt for _, tgt in pairs]
    edges = g.edges
    two_m = 2 * g.m
    live = len(pairs)
    for t in range(1, t_cap + 1):
        r = rng.next_below(two_m)
        eidx = r >> 1
        u, v = int(edges[eidx, 0]), int(edges[eidx, 1])
        bits = (1 << u) | (1 << v)
        for i in range(live):
            s = spread[i]
            if s & bits:
                s |= bits
                spread[i] = s
                if s & targets[i]:
                    return t
    return t_cap


def isolation_time(g: Graph, cover: Cover, rng: Rng, t_cap: int) -> int:
    """First step any cover set is influenced from outside its ball.

    Simulates all K sets jointly on one schedule; returns t_cap when no
    escape happens within the cap (in particular when every ball already
    covers the whole graph, making escape impossible).
    """
    if t_cap < 1:
        raise ValueError("t_cap must be >= 1")
    return _isolation_run(g, _isolation_masks(g, cover), rng, t_cap)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("need trials > 0")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class IsolationEstimate:
    """Monte Carlo estimate of Pr[isolation time >= t]."""

    t: int
    fraction: float
    wilson_low: float
    wilson_high: float
    trials: int


def isolation_probability(g: Graph, cover: Cover, t: int, trials: int,
                          rng: Rng) -> IsolationEstimate:
    """Fraction of seeded schedules whose isolation time reaches t."""
    if trials < 1:
        raise ValueError("need trials >= 1")
    pairs = _isolation_masks(g, cover)
    hits = 0
    for i in range(trials):
        child = rng.derive(i)
        if _isolation_run(g, pairs, child, t) >= t:
            hits += 1
    low, high = wilson_interval(hits, trials)
    return IsolationEstimate(t=t, fraction=hits / trials, wilson_low=low,
                             wilson_high=high, trials=trials)
