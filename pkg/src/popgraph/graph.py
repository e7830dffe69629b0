"""Graph representation, deterministic generators, and structural metrics.

Graphs are immutable simple undirected connected graphs stored both as a
sorted edge array (for O(1) uniform edge sampling by the scheduler) and as
a CSR adjacency (for traversals and the numba kernels). Node indices are
always 0..n-1.

Besides the standard families this module builds the two lower-bound
constructions used by the isolation experiments: a four-copy "renitent"
graph whose copies are joined hub-to-hub by long paths, and a target-time
wrapper that picks the base graph and path length to hit a prescribed
broadcast/election time scale.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Graph",
    "GraphMetrics",
    "Cover",
    "from_edges",
    "clique",
    "cycle",
    "path",
    "star",
    "torus",
    "gnp",
    "generate",
    "clique_with_pendant_path",
    "generate_renitent",
    "generate_target_time",
    "diameter",
    "bfs_distances",
    "ball",
    "is_connected",
    "edge_expansion_exact",
    "compute_metrics",
    "cycle_cover",
    "write_edgelist",
    "read_edgelist",
]

EXACT_EXPANSION_MAX_N = 20
GNP_RETRY_BUDGET = 1000


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph (identity equality, weak-refable).

    ``edges`` is an (m, 2) array with u < v in each row, sorted
    lexicographically. ``indptr``/``indices`` form the CSR adjacency with
    sorted neighbor lists.
    """

    n: int
    edges: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    label: str = ""

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, v)
        return i < nbrs.size and nbrs[i] == v

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        tag = f" {self.label}" if self.label else ""
        return f"Graph(n={self.n}, m={self.m}{tag})"


@dataclass(frozen=True)
class GraphMetrics:
    """Structural quantities used by the analytic bound formulas."""

    diameter: int
    max_degree: int
    min_degree: int
    edge_expansion: Fraction | None = None

    @property
    def conductance(self) -> Fraction | None:
        if self.edge_expansion is None:
            return None
        return self.edge_expansion / self.max_degree


@dataclass(frozen=True)
class Cover:
    """A family of K equal-size node subsets with radius-ell certificates.

    ``iso_certificates[(i, j)]`` is an explicit node bijection from
    B_ell(sets[i]) onto B_ell(sets[j]) mapping sets[i] onto sets[j];
    ``disjoint_pair`` names the two indices whose radius-ell balls are
    claimed disjoint. Verification lives in :mod:`popgraph.analysis`.
    """

    sets: tuple[frozenset[int], ...]
    radius: int
    iso_certificates: Mapping[tuple[int, int], Mapping[int, int]]
    disjoint_pair: tuple[int, int]

    @property
    def k(self) -> int:
        return len(self.sets)


def from_edges(n: int, edge_list: Iterable[tuple[int, int]], label: str = "",
               require_connected: bool = True) -> Graph:
    """Build a Graph from an iterable of node pairs, validating simplicity."""
    if n < 2:
        raise ValueError("graphs must have at least 2 nodes")
    seen = set()
    rows = []
    for u, v in edge_list:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self-loop at node {u}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u},{v}) out of range for n={n}")
        if u > v:
            u, v = v, u
        if (u, v) in seen:
            raise ValueError(f"duplicate edge ({u},{v})")
        seen.add((u, v))
        rows.append((u, v))
    if not rows:
        raise ValueError("graph has no edges")
    edges = np.array(sorted(rows), dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    np.add.at(deg, edges[:, 0], 1)
    np.add.at(deg, edges[:, 1], 1)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.empty(2 * len(rows), dtype=np.int64)
    fill = indptr[:-1].copy()
    for u, v in rows:
        indices[fill[u]] = v
        fill[u] += 1
        indices[fill[v]] = u
        fill[v] += 1
    for v in range(n):
        indices[indptr[v]:indptr[v + 1]].sort()
    edges.setflags(write=False)
    indptr.setflags(write=False)
    indices.setflags(write=False)
    g = Graph(n=n, edges=edges, indptr=indptr, indices=indices, label=label)
    if require_connected and not is_connected(g):
        raise ValueError("graph is not connected")
    return g


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def clique(n: int) -> Graph:
    if n < 2:
        raise ValueError("clique needs n >= 2")
    return from_edges(n, ((u, v) for u in range(n) for v in range(u + 1, n)),
                      label=f"clique({n})")


def cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycle needs n >= 3")
    return from_edges(n, ((i, (i + 1) % n) for i in range(n)), label=f"cycle({n})")


def path(n: int) -> Graph:
    if n < 2:
        raise ValueError("path needs n >= 2")
    return from_edges(n, ((i, i + 1) for i in range(n - 1)), label=f"path({n})")


def star(n: int) -> Graph:
    """Star on n nodes total: hub 0 plus n-1 leaves."""
    if n < 2:
        raise ValueError("star needs n >= 2")
    return from_edges(n, ((0, i) for i in range(1, n)), label=f"star({n})")


def torus(dims: Sequence[int]) -> Graph:
    """Toroidal grid with the given side lengths (each side >= 3)."""
    dims = [int(d) for d in dims]
    if len(dims) < 1 or any(d < 3 for d in dims):
        raise ValueError("torus dims must each be >= 3")
    n = math.prod(dims)
    strides = np.cumprod([1] + dims[:-1]).tolist()

    def node(coord):
        return sum(c * s for c, s in zip(coord, strides))

    edges = []
    for idx in range(n):
        coord = []
        rest = idx
        for d in dims:
            coord.append(rest % d)
            rest //= d
        for axis, d in enumerate(dims):
            nb = list(coord)
            nb[axis] = (nb[axis] + 1) % d
            edges.append((idx, node(nb)))
    return from_edges(n, edges, label=f"torus({','.join(map(str, dims))})")


def gnp(n: int, p: float, seed: int) -> Graph:
    """Erdos-Renyi graph conditioned on connectivity.

    Each pair gets an edge independently with probability p; disconnected
    samples are retried with derived sub-seeds up to a fixed budget so the
    draw stays a pure function of (n, p, seed).
    """
    if n < 2:
        raise ValueError("gnp needs n >= 2")
    if not (0.0 < p <= 1.0):
        raise ValueError("gnp needs 0 < p <= 1")
    if seed is None:
        raise ValueError("gnp requires an explicit seed")
    pairs = np.array([(u, v) for u in range(n) for v in range(u + 1, n)], dtype=np.int64)
    for attempt in range(GNP_RETRY_BUDGET):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), attempt])))
        mask = rng.random(pairs.shape[0]) < p
        if not mask.any():
            continue
        try:
            return from_edges(n, pairs[mask], label=f"gnp({n},{p},{seed})")
        except ValueError:
            continue
    raise ValueError(
        f"gnp({n}, {p}, seed={seed}): no connected sample within {GNP_RETRY_BUDGET} attempts"
    )


_FAMILIES: dict[str, Callable[..., Graph]] = {
    "clique": lambda params: clique(int(params["n"])),
    "cycle": lambda params: cycle(int(params["n"])),
    "path": lambda params: path(int(params["n"])),
    "star": lambda params: star(int(params["n"])),
    "torus": lambda params: torus(params["dims"]),
    "gnp": lambda params: gnp(int(params["n"]), float(params["p"]), int(params["seed"])),
}


def generate(family: str, params: Mapping, seed: int | None = None) -> Graph:
    """Dispatch to a named generator; `seed` is folded into gnp params."""
    if family not in _FAMILIES:
        raise ValueError(f"unknown graph family {family!r}; choose from {sorted(_FAMILIES)}")
    params = dict(params)
    if seed is not None and family == "gnp":
        params.setdefault("seed", seed)
    return _FAMILIES[family](params)


def clique_with_pendant_path(clique_n: int, path_len: int) -> Graph:
    """Clique on `clique_n` nodes with a pendant path of `path_len` extra nodes."""
    if clique_n < 2 or path_len < 1:
        raise ValueError("need clique_n >= 2 and path_len >= 1")
    n = clique_n + path_len
    edges = [(u, v) for u in range(clique_n) for v in range(u + 1, clique_n)]
    prev = 0
    for i in range(path_len):
        edges.append((prev, clique_n + i))
        prev = clique_n + i
    return from_edges(n, edges, label=f"clique({clique_n})+path({path_len})")


# ---------------------------------------------------------------------------
# Traversals and metrics
# ---------------------------------------------------------------------------

def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from source; -1 for unreachable nodes."""
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    q = deque([source])
    while q:
        u = q.popleft()
        du = dist[u]
        for v in g.neighbors(u):
            if dist[v] < 0:
                dist[v] = du + 1
                q.append(int(v))
    return dist


def is_connected(g: Graph) -> bool:
    return bool((bfs_distances(g, 0) >= 0).all())


def diameter(g: Graph) -> int:
    """Exact diameter via all-sources BFS."""
    best = 0
    for s in range(g.n):
        dist = bfs_distances(g, s)
        if (dist < 0).any():
            raise ValueError("diameter requires a connected graph")
        best = max(best, int(dist.max()))
    return best


def ball(g: Graph, u: int, r: int) -> frozenset[int]:
    """All nodes within hop distance r of u."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    dist = bfs_distances(g, u)
    return frozenset(int(v) for v in np.flatnonzero((dist >= 0) & (dist <= r)))


def ball_of_set(g: Graph, nodes: Iterable[int], r: int) -> frozenset[int]:
    """Union of radius-r balls around the given nodes (multi-source BFS)."""
    dist = np.full(g.n, -1, dtype=np.int64)
    q = deque()
    for u in nodes:
        dist[u] = 0
        q.append(int(u))
    while q:
        u = q.popleft()
        if dist[u] == r:
            continue
        du = dist[u]
        for v in g.neighbors(u):
            if dist[v] < 0:
                dist[v] = du + 1
                q.append(int(v))
    return frozenset(int(v) for v in np.flatnonzero(dist >= 0))


def edge_expansion_exact(g: Graph, max_n: int = EXACT_EXPANSION_MAX_N) -> Fraction:
    """Exact edge expansion min |boundary(S)| / |S| over 1 <= |S| <= n/2.

    Subset enumeration is exponential, so this is gated to small n; larger
    graphs get analytic bounds only, never a heuristic estimate. Gray-code
    order makes each subset an O(1) update from the previous one.
    """
    n = g.n
    if n > max_n:
        raise ValueError(f"exact expansion limited to n <= {max_n} (got n={n})")
    adj_mask = [0] * n
    for u, v in g.edges:
        adj_mask[u] |= 1 << int(v)
        adj_mask[v] |= 1 << int(u)
    deg = g.degrees
    half = n // 2
    best: Fraction | None = None
    boundary = 0
    size = 0
    member = 0
    for code in range(1, 1 << n):
        flip = (code ^ (code >> 1)) ^ ((code - 1) ^ ((code - 1) >> 1))
        v = flip.bit_length() - 1
        inside = (adj_mask[v] & member).bit_count()
        if member >> v & 1:
            member ^= flip
            size -= 1
            boundary -= int(deg[v]) - 2 * inside
        else:
            member ^= flip
            size += 1
            boundary += int(deg[v]) - 2 * inside
        if 1 <= size <= half:
            ratio = Fraction(boundary, size)
            if best is None or ratio < best:
                best = ratio
    assert best is not None
    return best


def compute_metrics(g: Graph, exact_expansion: bool | None = None) -> GraphMetrics:
    """Diameter and degree extremes; exact expansion only when feasible."""
    if exact_expansion is None:
        exact_expansion = g.n <= EXACT_EXPANSION_MAX_N
    beta = edge_expansion_exact(g) if exact_expansion else None
    deg = g.degrees
    return GraphMetrics(
        diameter=diameter(g),
        max_degree=int(deg.max()),
        min_degree=int(deg.min()),
        edge_expansion=beta,
    )


# ---------------------------------------------------------------------------
# Lower-bound constructions
# ---------------------------------------------------------------------------

def _is_cycle(g: Graph) -> bool:
    return g.m == g.n and bool((g.degrees == 2).all())


def cycle_cover(g: Graph, ell_mode: str = "disjoint_safe") -> Cover:
    """Four consecutive arcs of a cycle as a (4, ell)-cover.

    ``disjoint_safe`` uses radius floor(n/8), for which the opposite-arc
    balls are genuinely disjoint; ``paper`` uses radius ceil(n/4), kept for
    comparison even though its disjointness claim fails on direct
    computation (opposite quarter-arc balls meet). Requires n divisible by
    4: with indivisible n the four arcs cannot have equal size and a
    disjoint opposite pair at radius floor(n/8) simultaneously.
    """
    if not _is_cycle(g):
        raise ValueError("cycle_cover requires a cycle graph")
    n = g.n
    if n < 16:
        raise ValueError("cycle_cover requires n >= 16")
    if n % 4 != 0:
        raise ValueError("cycle_cover requires n divisible by 4")
    arc = n // 4
    if ell_mode == "disjoint_safe":
        radius = n // 8
    elif ell_mode == "paper":
        radius = -(-n // 4)
    else:
        raise ValueError(f"unknown ell_mode {ell_mode!r}")
    sets = tuple(frozenset(range(i * arc, (i + 1) * arc)) for i in range(4))
    certificates: dict[tuple[int, int], dict[int, int]] = {}
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            shift = ((j - i) % 4) * arc
            dom = ball_of_set(g, sets[i], radius)
            certificates[(i, j)] = {u: (u + shift) % n for u in sorted(dom)}
    return Cover(sets=sets, radius=radius, iso_certificates=certificates,
                 disjoint_pair=(0, 2))


def generate_renitent(base: Graph, hub: int, ell: int) -> tuple[Graph, Cover]:
    """Four copies of `base` joined hub-to-hub in a ring by length-2*ell paths.

    Copy i's hub is connected to copy (i+1 mod 4)'s hub by a fresh path of
    2*ell edges (2*ell - 1 new internal nodes). Cover set i is copy i plus
    the interior of its outgoing path; the far path endpoint belongs to the
    next copy, which keeps the radius-ell balls of opposite sets disjoint.
    """
    if not (0 <= hub < base.n):
        raise ValueError("hub out of range")
    d = diameter(base)
    if ell < d:
        raise ValueError(f"need ell >= diameter(base) = {d}, got ell = {ell}")
    nb = base.n
    interior = 2 * ell - 1
    n_total = 4 * nb + 4 * interior

    def copy_node(i: int, v: int) -> int:
        return i * nb + v

    def path_node(i: int, j: int) -> int:
        # j in 1..2*ell-1, interior of the path leaving copy i's hub
        return 4 * nb + i * interior + (j - 1)

    edges: list[tuple[int, int]] = []
    for i in range(4):
        for u, v in base.edges:
            edges.append((copy_node(i, int(u)), copy_node(i, int(v))))
    for i in range(4):
        chain = [copy_node(i, hub)]
        chain += [path_node(i, j) for j in range(1, 2 * ell)]
        chain.append(copy_node((i + 1) % 4, hub))
        for a, b in zip(chain[:-1], chain[1:]):
            edges.append((a, b))
    g = from_edges(n_total, edges, label=f"renitent({base.label or base.n},ell={ell})")

    sets = tuple(
        frozenset(
            [copy_node(i, v) for v in range(nb)]
            + [path_node(i, j) for j in range(1, 2 * ell)]
        )
        for i in range(4)
    )

    def rotate(node: int, shift: int) -> int:
        if node < 4 * nb:
            i, v = divmod(node, nb)
            return copy_node((i + shift) % 4, v)
        rest = node - 4 * nb
        i, j = divmod(rest, interior)
        return 4 * nb + ((i + shift) % 4) * interior + j

    certificates: dict[tuple[int, int], dict[int, int]] = {}
    for i in range(4):
        dom = ball_of_set(g, sets[i], ell)
        for j in range(4):
            if i != j:
                certificates[(i, j)] = {u: rotate(u, (j - i) % 4) for u in sorted(dom)}
    cover = Cover(sets=sets, radius=ell, iso_certificates=certificates,
                  disjoint_pair=(0, 2))
    return g, cover


def generate_target_time(N: int, T: Callable[[int], float], regime: str) -> tuple[Graph, Cover]:
    """Renitent graph tuned so information needs ~T(N) steps to cross it.

    dense:  base = clique(N), path half-length ell = ceil(T(N) / N^2).
    sparse: base = star(N) plus ceil(T(N)/ell) extra edges,
            ell = ceil(log2(N) + T(N) / (N * log2(N))).
    """
    if N < 4:
        raise ValueError("need N >= 4")
    t_val = float(T(N))
    lo, hi = N * math.log2(N), float(N) ** 3
    if not (lo <= t_val <= hi):
        raise ValueError(
            f"T(N) = {t_val:g} outside admissible range [{lo:g}, {hi:g}] "
            f"(need N*log2(N) <= T(N) <= N^3)"
        )
    if regime == "dense":
        ell = math.ceil(t_val / N**2)
        base = clique(N)
        hub = 0
    elif regime == "sparse":
        ell = math.ceil(math.log2(N) + t_val / (N * math.log2(N)))
        extra = math.ceil(t_val / ell)
        if (N - 1) + extra > N * (N - 1) // 2:
            raise ValueError(
                f"sparse regime needs {extra} extra edges on top of the star; "
                f"exceeds the {N * (N - 1) // 2} available slots"
            )
        edges = [(0, i) for i in range(1, N)]
        added = 0
        for u in range(1, N):
            for v in range(u + 1, N):
                if added == extra:
                    break
                edges.append((u, v))
                added += 1
            if added == extra:
                break
        base = from_edges(N, edges, label=f"star+{extra}({N})")
        hub = 0
    else:
        raise ValueError(f"unknown regime {regime!r}")
    ell = max(ell, diameter(base))
    return generate_renitent(base, hub, ell)


# ---------------------------------------------------------------------------
# Edge-list text format
# ---------------------------------------------------------------------------

def write_edgelist(g: Graph, path_out) -> None:
    """First line "n m"; then one "u v" line per edge, u < v, sorted."""
    with open(path_out, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges:
            fh.write(f"{int(u)} {int(v)}\n")


def read_edgelist(path_in) -> Graph:
    with open(path_in) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError("edge-list file must start with a 'n m' line")
        n, m = int(header[0]), int(header[1])
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    if len(edges) != m:
        raise ValueError(f"edge-list declares m={m} but has {len(edges)} edges")
    return from_edges(n, edges)
