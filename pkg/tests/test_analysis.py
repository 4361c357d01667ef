from math import comb

import numpy as np
import pytest

from cgakit import (
    CgaModel,
    DomainError,
    Game,
    NoiseExperiment,
    PlayerUniverse,
    l1_bounds,
    l2_worst_bound,
    mc_average_case,
    pmac_coverage,
    random_cga,
    shapley_bruteforce,
    shapley_matrix,
    spectrum,
    truncate,
    weights_from_game,
)
from cgakit.analysis import gram_entries, top_singular_direction
from cgakit.game import popcount

from conftest import oracle_shapley_permutations, random_game


class TestShapleyMatrix:
    def test_n2_row(self):
        np.testing.assert_allclose(shapley_matrix(2).entries[0], [-0.5, 0.5, -0.5, 0.5])

    @pytest.mark.parametrize("n", range(1, 9))
    def test_rows_sum_to_zero(self, n):
        np.testing.assert_allclose(shapley_matrix(n).entries.sum(axis=1), 0.0, atol=1e-12)

    def test_matches_bruteforce(self):
        g = random_game(6, seed=1, empty_zero=False)
        np.testing.assert_allclose(shapley_matrix(6).apply(g.values),
                                   shapley_bruteforce(g).payoffs, atol=1e-9)

    def test_matches_permutations(self):
        g = random_game(4, seed=3, empty_zero=False)
        np.testing.assert_allclose(shapley_matrix(4).apply(g.values),
                                   oracle_shapley_permutations(g.values, 4), atol=1e-12)


def gram_oracle(n):
    """Gram entries summed directly over coalitions, independent of the closed form."""
    s = popcount(np.arange(1 << n))
    a = np.array([[1.0 / (n * comb(n - 1, k - 1)) if m & 1 else -1.0 / (n * comb(n - 1, k))
                   for m, k in zip(range(1 << n), s)]])
    b = np.array([[1.0 / (n * comb(n - 1, k - 1)) if m & 2 else -1.0 / (n * comb(n - 1, k))
                   for m, k in zip(range(1 << n), s)]])
    return float((a @ a.T)[0, 0]), float((a @ b.T)[0, 0])


class TestSpectrum:
    def test_n4_top(self):
        assert spectrum(4).sigma_max_sq == pytest.approx(0.5, abs=1e-12)

    def test_n10_trace(self):
        rep = spectrum(10)
        assert rep.trace == pytest.approx(10 * rep.d1)
        assert rep.trace <= 0.6
        assert rep.d1 <= 6 / 100

    def test_n3_rest(self):
        rep = spectrum(3)
        np.testing.assert_allclose(rep.numeric_rest, rep.d1 - rep.d2, atol=1e-12)

    @pytest.mark.parametrize("n", range(2, 9))
    def test_gram_against_direct_sum(self, n):
        d1, d2 = gram_entries(n)
        o1, o2 = gram_oracle(n)
        assert d1 == pytest.approx(o1, abs=1e-12)
        assert d2 == pytest.approx(o2, abs=1e-12)


class TestL2Bound:
    def test_zero_error(self):
        g = random_game(5, 0)
        assert l2_worst_bound(g, g) == (0.0, 0.0, True, True, "")

    def test_tight_direction(self):
        u = top_singular_direction(8)
        chk = l2_worst_bound(u, np.zeros_like(u))
        assert chk.lhs == pytest.approx(chk.rhs, abs=1e-9)

    def test_random_sweep(self):
        rng = np.random.default_rng(0)
        assert all(l2_worst_bound(rng.normal(size=256), np.zeros(256)).holds for _ in range(200))


class TestL1Bounds:
    def test_grand_equality(self):
        dv = np.zeros(256)
        dv[-1] = 1.7
        rep = l1_bounds(dv, np.zeros(256))
        assert rep.general.lhs == pytest.approx(rep.general.rhs, abs=1e-9)
        assert not rep.anchored.applicable

    def test_anchored_sweep(self):
        rng = np.random.default_rng(1)
        sizes = popcount(np.arange(256))
        for _ in range(200):
            dv = rng.normal(size=256) * ((sizes > 0) & (sizes < 8))
            rep = l1_bounds(dv, np.zeros(256))
            assert rep.general.holds and rep.anchored.holds

    def test_grouped_sweep(self):
        rng = np.random.default_rng(2)
        groups = [[0, 1, 2, 3], [4, 5, 6, 7]]
        m = np.arange(256)
        inside = ((m & 0xF0) == 0) | ((m & 0x0F) == 0)
        support = inside & (m != 0) & (m != 0x0F) & (m != 0xF0)
        for _ in range(200):
            dv = rng.normal(size=256) * support
            rep = l1_bounds(dv, np.zeros(256), groups)
            assert rep.grouped.applicable and rep.grouped.holds
            assert rep.grouped.rhs == pytest.approx(0.5 * np.abs(dv).sum())

    def test_grouped_hypotheses(self):
        dv = np.zeros(256)
        dv[0b00010001] = 1.0
        assert not l1_bounds(dv, np.zeros(256), [[0, 1, 2, 3], [4, 5, 6, 7]]).grouped.applicable
        assert not l1_bounds(dv, np.zeros(256), [[0, 1], [2, 3, 4, 5, 6, 7]]).grouped.applicable

    def test_rejects_mismatched(self):
        with pytest.raises(DomainError):
            l1_bounds(np.zeros(8), np.zeros(16))


class TestMonteCarlo:
    def test_zero_radius(self):
        res = mc_average_case(NoiseExperiment(6, "L2", radius=0.0, trials=100))
        assert res.empirical_mean == 0.0

    def test_l2_matches_trace(self):
        res = mc_average_case(NoiseExperiment(6, "L2", radius=1.0, trials=20_000, seed=4))
        assert res.exact_within_3se
        assert res.empirical_mean <= res.bound

    def test_block_determinism(self):
        a = mc_average_case(NoiseExperiment(5, "L1", trials=3000, seed=1), keep_trials=True)
        b = mc_average_case(NoiseExperiment(5, "L1", trials=2000, seed=1), keep_trials=True)
        np.testing.assert_array_equal(a.per_trial[:2000], b.per_trial)

    def test_radius_mixture(self):
        cfg = NoiseExperiment(5, "L2", radius=[1.0, 2.0], radius_probs=[0.5, 0.5], trials=20_000)
        res = mc_average_case(cfg)
        assert res.exact_within_3se

    def test_bad_kind(self):
        with pytest.raises(DomainError):
            NoiseExperiment(5, "Linf")


def coverage_oracle(v, vhat, eps):
    hits = 0
    for a, b in zip(v[1:], vhat[1:]):
        lo, hi = sorted(((1 - eps) * b, (1 + eps) * b))
        hits += lo <= a <= hi
    return hits / (len(v) - 1)


class TestCoverage:
    def test_exact_model(self):
        g = random_game(6, 3)
        assert pmac_coverage(weights_from_game(g), g, 0.1) == 1.0

    def test_zero_model(self):
        u = PlayerUniverse.of_size(4)
        g = Game.from_function(u, lambda m: 1.0 + m)
        assert pmac_coverage(CgaModel(u, 1, [], []), g, 0.5) == 0.0

    def test_truncation_matches_oracle(self):
        full = random_cga(8, 2, seed=6)
        g = full.to_game()
        approx = truncate(full, 1)
        expected = coverage_oracle(g.values, approx.to_game().values, 0.5)
        assert pmac_coverage(approx, g, 0.5) == pytest.approx(expected)
