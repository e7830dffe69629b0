"""Graph construction, generators, metrics, and cover constructions."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import popgraph as pg
from popgraph.graph import ball_of_set, bfs_distances, clique_with_pendant_path


def brute_force_expansion(g: pg.Graph) -> Fraction:
    """Independent oracle: direct enumeration via itertools, no gray code."""
    best = None
    nodes = range(g.n)
    for size in range(1, g.n // 2 + 1):
        for sub in combinations(nodes, size):
            s = set(sub)
            boundary = sum(1 for u, v in g.edges if (int(u) in s) != (int(v) in s))
            ratio = Fraction(boundary, size)
            if best is None or ratio < best:
                best = ratio
    return best


class TestGenerators:
    def test_clique4(self):
        g = pg.clique(4)
        assert g.m == 6
        assert pg.diameter(g) == 1

    def test_cycle6(self):
        g = pg.cycle(6)
        assert g.m == 6
        assert all(g.degree(v) == 2 for v in range(6))
        assert pg.diameter(g) == 3

    def test_star5(self):
        g = pg.star(5)
        assert pg.diameter(g) == 2
        assert g.degree(0) == 4

    def test_torus_dims(self):
        g = pg.torus([3, 4])
        assert g.n == 12
        assert all(g.degree(v) == 4 for v in range(12))
        with pytest.raises(ValueError):
            pg.torus([2, 4])

    def test_gnp_connected_and_edge_bulk(self):
        g = pg.gnp(30, 0.5, seed=7)
        assert g.n == 30
        assert 130 <= g.m <= 305
        assert pg.graph.is_connected(g)

    def test_gnp_edge_counts_over_seeds(self):
        # Binomial(435, 0.5) bulk: every seed should land in the wide window
        for seed in range(60):
            g = pg.gnp(30, 0.5, seed=seed)
            assert 130 <= g.m <= 305

    def test_gnp_requires_seed_and_valid_p(self):
        with pytest.raises(ValueError):
            pg.gnp(10, 0.0, seed=1)
        with pytest.raises(ValueError):
            pg.gnp(10, 0.5, seed=None)

    def test_generate_dispatch(self):
        g = pg.generate("cycle", {"n": 8})
        assert g.n == 8
        with pytest.raises(ValueError):
            pg.generate("mobius", {"n": 8})

    @given(st.sampled_from(["clique", "cycle", "path", "star"]),
           st.integers(min_value=3, max_value=24))
    @settings(max_examples=40, deadline=None)
    def test_generator_invariants(self, family, n):
        g = pg.generate(family, {"n": n})
        assert pg.graph.is_connected(g)
        assert int(g.degrees.sum()) == 2 * g.m
        assert (g.edges[:, 0] < g.edges[:, 1]).all()

    def test_from_edges_rejects_bad_input(self):
        with pytest.raises(ValueError):
            pg.from_edges(3, [(0, 0)])
        with pytest.raises(ValueError):
            pg.from_edges(3, [(0, 1), (1, 0)])
        with pytest.raises(ValueError):
            pg.from_edges(4, [(0, 1), (2, 3), (0, 1)])
        with pytest.raises(ValueError):
            pg.from_edges(4, [(0, 1)])  # disconnected


class TestMetrics:
    def test_ball_examples(self):
        assert pg.ball(pg.cycle(6), 0, 1) == {5, 0, 1}
        assert pg.ball(pg.clique(4), 2, 0) == {2}
        assert pg.ball(pg.clique(4), 0, 1) == {0, 1, 2, 3}

    def test_expansion_examples(self):
        assert pg.edge_expansion_exact(pg.clique(4)) == Fraction(2)
        assert pg.edge_expansion_exact(pg.cycle(6)) == Fraction(2, 3)
        assert pg.edge_expansion_exact(pg.star(5)) == Fraction(1)

    @pytest.mark.parametrize("gen", [lambda: pg.cycle(8), lambda: pg.star(7),
                                     lambda: pg.clique(5), lambda: pg.gnp(9, 0.4, seed=3)])
    def test_expansion_matches_independent_enumeration(self, gen):
        g = gen()
        assert pg.edge_expansion_exact(g) == brute_force_expansion(g)

    def test_cycle_expansion_closed_form(self):
        for n in range(4, 17):
            assert pg.edge_expansion_exact(pg.cycle(n)) == Fraction(2, n // 2)

    def test_expansion_gate(self):
        with pytest.raises(ValueError):
            pg.edge_expansion_exact(pg.cycle(24))

    def test_metrics_fields(self):
        met = pg.compute_metrics(pg.star(5))
        assert met.diameter == 2
        assert met.max_degree == 4
        assert met.min_degree == 1
        assert met.edge_expansion == 1
        assert met.conductance == Fraction(1, 4)

    def test_diameter_requires_connected(self):
        g = pg.path(4)
        assert pg.diameter(g) == 3


class TestEdgelistIO:
    def test_roundtrip(self, tmp_path):
        g = pg.gnp(12, 0.4, seed=2)
        path = tmp_path / "g.edgelist"
        pg.write_edgelist(g, path)
        h = pg.read_edgelist(path)
        assert h.n == g.n
        assert np.array_equal(h.edges, g.edges)

    def test_export_is_deterministic(self, tmp_path):
        g = pg.torus([3, 3])
        p1, p2 = tmp_path / "a", tmp_path / "b"
        pg.write_edgelist(g, p1)
        pg.write_edgelist(g, p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestRenitent:
    def test_counts_clique4(self):
        g, cover = pg.generate_renitent(pg.clique(4), hub=0, ell=3)
        assert g.n == 36
        assert g.m == 48

    def test_counts_k2(self):
        g, cover = pg.generate_renitent(pg.clique(2), hub=0, ell=1)
        assert g.n == 12
        assert g.m == 12

    @pytest.mark.parametrize("base_n,ell", [(2, 2), (4, 4), (3, 3)])
    def test_count_formula(self, base_n, ell):
        base = pg.clique(base_n)
        g, _ = pg.generate_renitent(base, hub=0, ell=ell)
        assert g.n == 4 * base.n + 4 * (2 * ell - 1)
        assert g.m == 4 * base.m + 8 * ell

    def test_cover_union_is_everything(self):
        g, cover = pg.generate_renitent(pg.clique(4), hub=0, ell=3)
        union = set()
        for s in cover.sets:
            union |= s
        assert union == set(range(g.n))

    def test_ell_below_diameter_rejected(self):
        with pytest.raises(ValueError):
            pg.generate_renitent(pg.path(5), hub=0, ell=2)

    def test_diameter_window(self):
        base = pg.clique(4)
        for ell in (2, 4):
            g, _ = pg.generate_renitent(base, hub=0, ell=ell)
            d = pg.diameter(g)
            assert 2 * ell <= d <= 4 * ell + 2 * pg.diameter(base)


class TestTargetTime:
    def test_dense_example(self):
        g, cover = pg.generate_target_time(8, lambda n: n**3, "dense")
        assert cover.radius == 8  # ceil(512 / 64)
        # base clique(8): four copies of 28 edges plus 8 paths of weight
        assert g.m == 4 * 28 + 8 * 8

    def test_sparse_example(self):
        g, cover = pg.generate_target_time(8, lambda n: n * 3 * 2, "sparse")
        assert cover.radius == 5  # ceil(log2 8 + 48 / 24)

    def test_node_count_window(self):
        for regime, T in (("dense", lambda n: n**3), ("sparse", lambda n: 8 * n)):
            g, cover = pg.generate_target_time(8, T, regime)
            assert 4 * 8 <= g.n <= 4 * 8 + 8 * cover.radius

    def test_range_check(self):
        with pytest.raises(ValueError):
            pg.generate_target_time(8, lambda n: n**4, "dense")
        with pytest.raises(ValueError):
            pg.generate_target_time(8, lambda n: 1, "sparse")


class TestCycleCover:
    def test_disjoint_safe_example(self):
        cover = pg.cycle_cover(pg.cycle(16))
        assert cover.radius == 2
        assert cover.sets == (frozenset(range(0, 4)), frozenset(range(4, 8)),
                              frozenset(range(8, 12)), frozenset(range(12, 16)))
        assert cover.disjoint_pair == (0, 2)

    def test_union_covers_cycle(self):
        cover = pg.cycle_cover(pg.cycle(16))
        union = set()
        for s in cover.sets:
            union |= s
        assert union == set(range(16))

    def test_opposite_balls_disjoint_at_safe_radius(self):
        g = pg.cycle(16)
        cover = pg.cycle_cover(g)
        b0 = ball_of_set(g, cover.sets[0], 2)
        b2 = ball_of_set(g, cover.sets[2], 2)
        assert not (b0 & b2)

    def test_paper_radius_balls_do_intersect(self):
        # the flagged divergence: quarter-arc balls at radius n/4 meet
        g = pg.cycle(16)
        cover = pg.cycle_cover(g, ell_mode="paper")
        b0 = ball_of_set(g, cover.sets[0], cover.radius)
        b2 = ball_of_set(g, cover.sets[2], cover.radius)
        assert b0 & b2

    def test_preconditions(self):
        with pytest.raises(ValueError):
            pg.cycle_cover(pg.cycle(12))
        with pytest.raises(ValueError):
            pg.cycle_cover(pg.cycle(18))
        with pytest.raises(ValueError):
            pg.cycle_cover(pg.clique(16))


class TestHelpers:
    def test_bfs_distances(self):
        g = pg.path(5)
        assert list(bfs_distances(g, 0)) == [0, 1, 2, 3, 4]

    def test_clique_with_pendant_path(self):
        g = clique_with_pendant_path(5, 3)
        assert g.n == 8
        assert g.degree(7) == 1
        assert pg.diameter(g) == 4
