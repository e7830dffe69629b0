"""Streak-counter phase clock: exact waiting-time distribution and samplers.

A node ticks once it has been the initiator in h consecutive interactions.
K is the number of its own interactions until the first tick, i.e. the
number of fair coin flips until h consecutive heads. The survival function
f[k] = Pr[K >= k] obeys

    f[k] = 1                          for k <= h,
    f[h+1] = 1 - 2**-h,
    f[k+1] = f[k] - f[k-h] / 2**(h+1) for k >= h+1,

which gives E[K] = 2**(h+1) - 2 exactly. The recurrence identity as usually
stated starts one index earlier (k >= h), but at k = h the flip that the
identity removes does not exist; direct enumeration gives
Pr[K = h] = 2**-h, so the boundary above is the one consistent with both
the enumeration and the closed-form mean. The h = 1 check: the stated-range
version yields E[K] = 3 instead of 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .engine import Rng
from .graph import Graph

__all__ = [
    "StreakDistribution",
    "streak_survival",
    "streak_survival_exact",
    "expected_streak_interactions",
    "survival_lower_bound",
    "survival_upper_bound",
    "geometric_lower_survival",
    "geometric_upper_survival",
    "sample_K",
    "StreakStepStats",
    "measure_streak_steps",
]

H_MAX = 24


def _check_h(h: int) -> None:
    if not (1 <= h <= H_MAX):
        raise ValueError(f"streak length h must be in [1, {H_MAX}], got {h}")


@dataclass(frozen=True)
class StreakDistribution:
    """Survival function of K with a truncation-error certificate.

    ``expected_k`` is sum(f[1..k_max]); ``tail_bound`` bounds the mass
    beyond k_max, so the exact mean 2**(h+1) - 2 lies within
    [expected_k, expected_k + tail_bound].
    """

    h: int
    f: np.ndarray
    expected_k: float
    tail_bound: float

    @property
    def k_max(self) -> int:
        return len(self.f) - 1


def streak_survival(h: int, k_max: int) -> StreakDistribution:
    """Survival array f[0..k_max] from the corrected recurrence."""
    _check_h(h)
    if k_max < h + 1:
        raise ValueError(f"k_max must be >= h + 1 = {h + 1}")
    f = np.ones(k_max + 1, dtype=float)
    half = 2.0 ** -(h + 1)
    f[h + 1] = 1.0 - 2.0**-h
    for k in range(h + 1, k_max):
        f[k + 1] = f[k] - f[k - h] * half
    # f[k+1] >= f[k] * (1 - 2^-(h+1)) since f is nonincreasing, so the tail
    # past k_max is dominated by a geometric series.
    tail = float(f[k_max]) * (2.0 ** (h + 1) - 1.0)
    expected = float(f[1:].sum())
    return StreakDistribution(h=h, f=f, expected_k=expected, tail_bound=tail)


def streak_survival_exact(h: int, k_max: int) -> list[Fraction]:
    """Rational-arithmetic twin of the recurrence; oracle for small h."""
    if not (1 <= h <= 8):
        raise ValueError("exact mode supports h in [1, 8]")
    if k_max < h + 1:
        raise ValueError(f"k_max must be >= h + 1 = {h + 1}")
    one = Fraction(1)
    f = [one] * (k_max + 1)
    f[h + 1] = 1 - Fraction(1, 2**h)
    half = Fraction(1, 2 ** (h + 1))
    for k in range(h + 1, k_max):
        f[k + 1] = f[k] - f[k - h] * half
    return f


def expected_streak_interactions(h: int, rel_tol: float = 1e-6) -> float:
    """E[K] = 2**(h+1) - 2, cross-checked against the recurrence sum."""
    _check_h(h)
    target = 2.0 ** (h + 1) - 2.0
    # Walk k_max out until the geometric tail certificate meets rel_tol.
    k_max = h + 1
    while True:
        k_max *= 2
        dist = streak_survival(h, k_max)
        if dist.tail_bound <= rel_tol * target:
            break
    if abs(dist.expected_k - target) > rel_tol * target + dist.tail_bound:
        raise AssertionError(
            f"recurrence sum {dist.expected_k} disagrees with closed form {target}"
        )
    return target


def survival_lower_bound(h: int, k: int) -> float:
    """(1 - 2**-h)**k, valid lower bound on f[k] for k >= h."""
    return (1.0 - 2.0**-h) ** k


def survival_upper_bound(h: int, k: int) -> float:
    """(1 - 2**-(h+1))**(k-h), valid upper bound on f[k] for k >= h."""
    return (1.0 - 2.0 ** -(h + 1)) ** (k - h)


def geometric_lower_survival(h: int, k: int) -> float:
    """Pr[Z0 >= k] for Z0 ~ Geom(2**-h) counting failures before success."""
    return (1.0 - 2.0**-h) ** k


def geometric_upper_survival(h: int, k: int) -> float:
    """Pr[Z1 + h >= k] for Z1 ~ Geom(2**-(h+1)), same convention."""
    return (1.0 - 2.0 ** -(h + 1)) ** max(k - h, 0)


def sample_K(h: int, rng: Rng) -> int:
    """Simulate fair initiator/responder flips until h consecutive initiator roles."""
    _check_h(h)
    run = 0
    count = 0
    while True:
        count += 1
        if rng.next_u64() >> 63:  # top bit as the fair coin
            run += 1
            if run == h:
                return count
        else:
            run = 0


@dataclass(frozen=True)
class StreakStepStats:
    """Monte Carlo means for one node completing ell streaks."""

    mean_r: float
    std_r: float
    mean_s: float
    std_s: float
    trials: int

    def sigma_r(self) -> float:
        return self.std_r / math.sqrt(self.trials)

    def sigma_s(self) -> float:
        return self.std_s / math.sqrt(self.trials)


def measure_streak_steps(g: Graph, node: int, h: int, ell: int, trials: int,
                         rng: Rng) -> StreakStepStats:
    """Run the full scheduler; R counts the node's own interactions and S
    counts global steps until it completes ell streaks.

    Expected values: E[R] = (2**(h+1) - 2) * ell and E[S] = E[R] * m / d for
    a node of degree d.
    """
    _check_h(h)
    if not (0 <= node < g.n):
        raise ValueError("node out of range")
    if ell < 1 or trials < 1:
        raise ValueError("ell and trials must be >= 1")
    two_m = 2 * g.m
    edges = g.edges
    r_vals = np.empty(trials, dtype=np.int64)
    s_vals = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        child = rng.derive(t)
        run = 0
        done = 0
        r_count = 0
        s_count = 0
        while done < ell:
            r = child.next_below(two_m)
            eidx, orient = r >> 1, r & 1
            u, v = int(edges[eidx, 0]), int(edges[eidx, 1])
            if orient:
                u, v = v, u
            s_count += 1
            if u == node:
                r_count += 1
                run += 1
                if run == h:
                    run = 0
                    done += 1
            elif v == node:
                r_count += 1
                run = 0
        r_vals[t] = r_count
        s_vals[t] = s_count
    return StreakStepStats(
        mean_r=float(r_vals.mean()),
        std_r=float(r_vals.std(ddof=1)) if trials > 1 else 0.0,
        mean_s=float(s_vals.mean()),
        std_s=float(s_vals.std(ddof=1)) if trials > 1 else 0.0,
        trials=trials,
    )
