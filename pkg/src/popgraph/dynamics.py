"""Information-propagation and random-walk measurements.

The epidemic here is the two-way merge process: when the scheduler samples
an edge, both endpoints learn everything the other knows. Broadcast time
from a source is the first step at which all n nodes hold the source's
message; the influencer set of a node collects everyone whose initial
state could have causally reached it.

Random walks come in two flavors. The population-model walk moves exactly
when the sampled edge contains its position; the classic walk jumps to a
uniformly random neighbor on every step of its own clock. Classic hitting
times are solved exactly from their linear system; population hitting and
meeting times are Monte Carlo estimates measured on the scheduler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .engine import Rng
from .graph import Graph, bfs_distances

__all__ = [
    "broadcast_time",
    "BroadcastEstimate",
    "estimate_worst_broadcast",
    "propagation_time",
    "InfluencerTrace",
    "influencer_trace",
    "InfluencerMultigraphStats",
    "influencer_multigraph",
    "classic_hitting_exact",
    "HittingTable",
    "hitting_table",
    "classic_hitting_worst",
    "McEstimate",
    "population_hitting_mc",
    "meeting_time_mc",
    "trace_to_csv",
    "broadcast_table_to_csv",
]

HITTING_MAX_N = 2000
ALL_SOURCES_MAX_N = 256


def _draw_pair(g: Graph, rng: Rng) -> tuple[int, int]:
    r = rng.next_below(2 * g.m)
    eidx, orient = r >> 1, r & 1
    u, v = int(g.edges[eidx, 0]), int(g.edges[eidx, 1])
    if orient:
        return v, u
    return u, v


def broadcast_time(g: Graph, source: int, rng: Rng, max_steps: int | None = None) -> int:
    """First step at which every node holds the source's message."""
    if not (0 <= source < g.n):
        raise ValueError("source out of range")
    if max_steps is None:
        max_steps = _broadcast_budget(g)
    if K.HAVE_NUMBA:
        eu, ev = K.edge_arrays(g)
        state, gamma = rng.state_pair()
        res = int(K.run_broadcast(eu, ev, g.n, np.int64(source), state, gamma,
                                  np.int64(max_steps)))
    else:
        res = _broadcast_py(g, source, rng, max_steps)
    if res < 0:
        raise RuntimeError(f"broadcast did not complete within {max_steps} steps")
    return res


def _broadcast_py(g: Graph, source: int, rng: Rng, max_steps: int) -> int:
    informed = bytearray(g.n)
    informed[source] = 1
    cnt = 1
    t = 0
    while cnt < g.n and t < max_steps:
        u, v = _draw_pair(g, rng)
        t += 1
        if informed[u] != informed[v]:
            informed[u] = informed[v] = 1
            cnt += 1
    return t if cnt == g.n else -1


def _broadcast_budget(g: Graph) -> int:
    # far above the m * max(6 ln n, D) + 2 expectation bound; hitting it
    # means something is broken, not unlucky
    return 1000 * g.m * max(6 * math.ceil(math.log(max(g.n, 3))), g.n) + 1000


@dataclass(frozen=True)
class BroadcastEstimate:
    """Worst-case-over-sources mean broadcast time with its uncertainty."""

    b_hat: float
    ci_half_width: float
    argmax_source: int
    per_source_mean: dict[int, float]
    per_source_sigma: dict[int, float]
    trials_per_source: int

    @property
    def sigma(self) -> float:
        """Standard error of the reported maximum's mean."""
        return self.per_source_sigma[self.argmax_source]


def estimate_worst_broadcast(g: Graph, trials_per_source: int, rng: Rng,
                             source_policy: str = "auto",
                             sample_size: int = 32) -> BroadcastEstimate:
    """Estimate max over sources of the expected broadcast time.

    All sources are measured up to n = 256; beyond that a seed-derived
    sample of sources plus the degree-extremal nodes stands in for the
    max, which is then an estimate of a maximum and reported as such.
    """
    if trials_per_source < 2:
        raise ValueError("need trials_per_source >= 2")
    if source_policy == "all" or (source_policy == "auto" and g.n <= ALL_SOURCES_MAX_N):
        sources = list(range(g.n))
    elif source_policy in ("auto", "sampled"):
        deg = g.degrees
        picked = {int(np.argmax(deg)), int(np.argmin(deg))}
        pick_rng = rng.derive(2**40)
        while len(picked) < min(sample_size, g.n):
            picked.add(pick_rng.next_below(g.n))
        sources = sorted(picked)
    else:
        raise ValueError(f"unknown source_policy {source_policy!r}")

    means: dict[int, float] = {}
    sigmas: dict[int, float] = {}
    budget = _broadcast_budget(g)
    for s_i, source in enumerate(sources):
        vals = np.empty(trials_per_source, dtype=np.int64)
        for t_i in range(trials_per_source):
            child = rng.derive(s_i * trials_per_source + t_i)
            vals[t_i] = broadcast_time(g, source, child, budget)
        means[source] = float(vals.mean())
        sigmas[source] = float(vals.std(ddof=1) / math.sqrt(trials_per_source))
    argmax = max(means, key=lambda s: (means[s], s))
    return BroadcastEstimate(
        b_hat=means[argmax],
        ci_half_width=1.96 * sigmas[argmax],
        argmax_source=argmax,
        per_source_mean=means,
        per_source_sigma=sigmas,
        trials_per_source=trials_per_source,
    )


def propagation_time(g: Graph, source: int, k: int, rng: Rng,
                     max_steps: int | None = None) -> int | None:
    """First step the source's message reaches a node at distance exactly k.

    Returns None when no node sits at that distance ("unreachable").
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 0
    dist = bfs_distances(g, source)
    targets = (dist == k)
    if not targets.any():
        return None
    if max_steps is None:
        max_steps = _broadcast_budget(g)
    if K.HAVE_NUMBA:
        eu, ev = K.edge_arrays(g)
        state, gamma = rng.state_pair()
        res = int(K.run_propagation(eu, ev, g.n, np.int64(source),
                                    targets.astype(np.uint8), state, gamma,
                                    np.int64(max_steps)))
    else:
        informed = bytearray(g.n)
        informed[source] = 1
        res = -1
        t = 0
        while t < max_steps:
            u, v = _draw_pair(g, rng)
            t += 1
            if informed[u] != informed[v]:
                newly = v if informed[u] else u
                informed[u] = informed[v] = 1
                if targets[newly]:
                    res = t
                    break
    if res < 0:
        raise RuntimeError(f"propagation did not reach distance {k} within {max_steps} steps")
    return res


@dataclass(frozen=True)
class InfluencerTrace:
    """Evolution of one node's influencer set |I_t(v)|."""

    source: int
    sizes: np.ndarray
    completion_step: int | None
    snapshots: dict[int, frozenset[int]]


def influencer_trace(g: Graph, v: int, t_max: int, rng: Rng,
                     checkpoints: Iterable[int] = ()) -> InfluencerTrace:
    """Exact influencer-set sizes of node v for t = 0..t_max.

    Needs the full system state (an interaction merges the two endpoint
    sets both ways), held as one bitmask per node. Set snapshots are only
    materialized at the requested checkpoints.
    """
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    if not (0 <= v < g.n):
        raise ValueError("node out of range")
    checkpoints = set(checkpoints)
    masks = [1 << i for i in range(g.n)]
    sizes = np.empty(t_max + 1, dtype=np.int64)
    sizes[0] = 1
    snapshots: dict[int, frozenset[int]] = {}
    completion: int | None = None if g.n > 1 else 0

    def unpack(mask: int) -> frozenset[int]:
        return frozenset(i for i in range(g.n) if mask >> i & 1)

    if 0 in checkpoints:
        snapshots[0] = unpack(masks[v])
    for t in range(1, t_max + 1):
        a, b = _draw_pair(g, rng)
        merged = masks[a] | masks[b]
        masks[a] = merged
        masks[b] = merged
        sizes[t] = masks[v].bit_count()
        if completion is None and sizes[t] == g.n:
            completion = t
        if t in checkpoints:
            snapshots[t] = unpack(masks[v])
    return InfluencerTrace(source=v, sizes=sizes, completion_step=completion,
                           snapshots=snapshots)


@dataclass(frozen=True)
class InfluencerMultigraphStats:
    """Size and internal-interaction count of a reverse-replayed dependency
    multigraph."""

    node_count: int
    internal_count: int
    edge_count: int


def influencer_multigraph(g: Graph, v: int, t0: int, rng: Rng) -> InfluencerMultigraphStats:
    """Replay a recorded t0-step schedule in reverse from node v.

    Walking the schedule backwards, an interaction joins the multigraph
    when it touches a node already reached; it is internal when both its
    endpoints were already reached (only internal interactions can close
    cycles).
    """
    if t0 < 0:
        raise ValueError("t0 must be >= 0")
    schedule = [_draw_pair(g, rng) for _ in range(t0)]
    member = bytearray(g.n)
    member[v] = 1
    node_count = 1
    internal = 0
    edge_count = 0
    for u, w in reversed(schedule):
        mu, mw = member[u], member[w]
        if mu or mw:
            edge_count += 1
            if mu and mw:
                internal += 1
            else:
                if not mu:
                    member[u] = 1
                else:
                    member[w] = 1
                node_count += 1
    return InfluencerMultigraphStats(node_count=node_count,
                                     internal_count=internal,
                                     edge_count=edge_count)


# ---------------------------------------------------------------------------
# Hitting and meeting times
# ---------------------------------------------------------------------------

def classic_hitting_exact(g: Graph, target: int, residual_tol: float = 1e-9) -> np.ndarray:
    """Expected classic-walk hitting times to `target` from every node.

    Solves h[t] = 0, h[u] = 1 + mean over neighbors of h, by dense LU with
    partial pivoting, and verifies the back-substituted residual.
    """
    if g.n > HITTING_MAX_N:
        raise ValueError(f"dense hitting solve limited to n <= {HITTING_MAX_N}")
    if not (0 <= target < g.n):
        raise ValueError("target out of range")
    n = g.n
    a = np.eye(n)
    deg = g.degrees.astype(float)
    for u in range(n):
        if u == target:
            continue
        a[u, g.neighbors(u)] -= 1.0 / deg[u]
    a[target, :] = 0.0
    a[target, target] = 1.0
    rhs = np.ones(n)
    rhs[target] = 0.0
    h = np.linalg.solve(a, rhs)
    residual = np.abs(a @ h - rhs).max()
    if residual > residual_tol:
        raise RuntimeError(f"hitting solve residual {residual:g} exceeds {residual_tol:g}")
    return h


@dataclass(frozen=True)
class HittingTable:
    """All-pairs classic hitting times; matrix[u, v] is from u to v."""

    matrix: np.ndarray

    @property
    def worst(self) -> float:
        return float(self.matrix.max())


def hitting_table(g: Graph, max_n: int = 500) -> HittingTable:
    if g.n > max_n:
        raise ValueError(f"all-pairs table limited to n <= {max_n}")
    mat = np.empty((g.n, g.n))
    for target in range(g.n):
        mat[:, target] = classic_hitting_exact(g, target)
    mat.setflags(write=False)
    return HittingTable(matrix=mat)


def classic_hitting_worst(g: Graph) -> float:
    return hitting_table(g).worst


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with a normal-approximation 95% interval."""

    mean: float
    std: float
    trials: int

    @property
    def sigma(self) -> float:
        return self.std / math.sqrt(self.trials)

    @property
    def ci_half_width(self) -> float:
        return 1.96 * self.sigma


def _walk_budget(g: Graph) -> int:
    # classic worst-case hitting is O(n^3); population adds a factor ~27n
    return 4000 * g.n**3 + 100000


def population_hitting_mc(g: Graph, u: int, v: int, trials: int, rng: Rng) -> McEstimate:
    """Mean steps for the population-model walk from u to occupy v."""
    if trials < 2:
        raise ValueError("need trials >= 2")
    budget = _walk_budget(g)
    vals = np.empty(trials, dtype=np.int64)
    if K.HAVE_NUMBA:
        eu, ev = K.edge_arrays(g)
        for i in range(trials):
            child = rng.derive(i)
            state, gamma = child.state_pair()
            res = int(K.run_pop_hit(eu, ev, np.int64(u), np.int64(v), state, gamma,
                                    np.int64(budget)))
            if res < 0:
                raise RuntimeError("population walk exceeded its step budget")
            vals[i] = res
    else:
        for i in range(trials):
            child = rng.derive(i)
            pos = u
            t = 0
            while pos != v and t < budget:
                x, y = _draw_pair(g, child)
                t += 1
                if pos == x:
                    pos = y
                elif pos == y:
                    pos = x
            if pos != v:
                raise RuntimeError("population walk exceeded its step budget")
            vals[i] = t
    return McEstimate(mean=float(vals.mean()), std=float(vals.std(ddof=1)), trials=trials)


def meeting_time_mc(g: Graph, u: int, v: int, trials: int, rng: Rng) -> McEstimate:
    """Mean steps until the sampled edge has the two walks at its endpoints.

    The meeting check precedes movement, matching the definition of a
    meeting as the walks sitting at opposite ends of the sampled edge.
    """
    if u == v:
        raise ValueError("meeting time needs distinct start nodes")
    if trials < 2:
        raise ValueError("need trials >= 2")
    budget = _walk_budget(g)
    vals = np.empty(trials, dtype=np.int64)
    if K.HAVE_NUMBA:
        eu, ev = K.edge_arrays(g)
        for i in range(trials):
            child = rng.derive(i)
            state, gamma = child.state_pair()
            res = int(K.run_meet(eu, ev, np.int64(u), np.int64(v), state, gamma,
                                 np.int64(budget)))
            if res < 0:
                raise RuntimeError("meeting simulation exceeded its step budget")
            vals[i] = res
    else:
        for i in range(trials):
            child = rng.derive(i)
            a, b = u, v
            t = 0
            met = -1
            while t < budget:
                x, y = _draw_pair(g, child)
                t += 1
                if (a == x and b == y) or (a == y and b == x):
                    met = t
                    break
                if a == x:
                    a = y
                elif a == y:
                    a = x
                if b == x:
                    b = y
                elif b == y:
                    b = x
            if met < 0:
                raise RuntimeError("meeting simulation exceeded its step budget")
            vals[i] = met
    return McEstimate(mean=float(vals.mean()), std=float(vals.std(ddof=1)), trials=trials)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def trace_to_csv(trace: InfluencerTrace, path_out) -> None:
    """Columns step,size."""
    with open(path_out, "w") as fh:
        fh.write("step,size\n")
        for t, s in enumerate(trace.sizes):
            fh.write(f"{t},{int(s)}\n")


def broadcast_table_to_csv(est: BroadcastEstimate, path_out) -> None:
    """Columns source,mean,ci."""
    with open(path_out, "w") as fh:
        fh.write("source,mean,ci\n")
        for source in sorted(est.per_source_mean):
            mean = est.per_source_mean[source]
            ci = 1.96 * est.per_source_sigma[source]
            fh.write(f"{source},{mean:.10g},{ci:.10g}\n")
