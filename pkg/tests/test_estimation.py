import math

import numpy as np
import pytest

from cgakit import (
    CgaModel,
    DomainError,
    FitConfig,
    LowRankPairwiseModel,
    MatchupDataset,
    PerformanceDataset,
    PlayerUniverse,
    eval_cga,
    fit_bradley_terry,
    fit_least_squares,
    fit_lowrank_pairwise,
    pairwise_to_cga,
    predict_win_prob,
    random_cga,
)
from cgakit.errors import NumericalError
from cgakit.estimation import (
    bradley_terry_loss,
    least_squares_loss,
    lowrank_loss,
    one_hot,
    split_dataset,
    team_features,
)
from cgakit.game import all_masks, canonical_columns, subset_indicator
from cgakit.identification import coalitions_of_sizes


def full_dataset(model, coalitions):
    return PerformanceDataset(model.universe, coalitions, model.evaluate(coalitions))


def finite_difference(fun, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def assert_gradient(analytic, numeric, rtol=1e-4):
    scale = max(np.abs(numeric).max(), 1e-8)
    assert np.abs(analytic - numeric).max() / scale <= rtol


class TestLeastSquares:
    def test_additive_from_singletons_and_grand(self):
        u = PlayerUniverse.of_size(4)
        a = np.array([1.0, -2.0, 0.5, 3.0])
        c = np.array([1, 2, 4, 8, 15])
        data = PerformanceDataset(u, c, [1.0, -2.0, 0.5, 3.0, a.sum()])
        m = fit_least_squares(data, 1)
        np.testing.assert_allclose(m.weight_vector(1), a, atol=1e-12)
        assert m.meta["identified"]

    def test_recovery_sizes_2_3(self):
        gen = random_cga(6, 2, seed=5)
        data = full_dataset(gen, coalitions_of_sizes(6, [2, 3]))
        fit = fit_least_squares(data, 2)
        np.testing.assert_allclose(fit.weight_vector(2), gen.weight_vector(2), atol=1e-6)

    def test_ridge_raises_training_error(self):
        gen = random_cga(6, 2, seed=5)
        data = full_dataset(gen, coalitions_of_sizes(6, [2, 3]))
        assert fit_least_squares(data, 2, l2=1e3).meta["train_mse"] > fit_least_squares(data, 2).meta["train_mse"]

    def test_matches_normal_equations(self):
        rng = np.random.default_rng(0)
        u = PlayerUniverse.of_size(5)
        c = rng.integers(1, 32, 80)
        data = PerformanceDataset(u, c, rng.normal(size=80))
        m = subset_indicator(c, canonical_columns(5, 2))
        expected = np.linalg.solve(m.T @ m + 0.3 * np.eye(m.shape[1]), m.T @ data.values)
        np.testing.assert_allclose(fit_least_squares(data, 2, l2=0.3).weight_vector(2), expected, atol=1e-10)

    def test_underdetermined_flagged(self):
        gen = random_cga(4, 2, seed=1)
        fit = fit_least_squares(full_dataset(gen, coalitions_of_sizes(4, [3])), 2)
        assert not fit.meta["identified"]

    def test_gradient(self):
        rng = np.random.default_rng(3)
        design, y, w = rng.integers(0, 2, (20, 6)).astype(float), rng.normal(size=20), rng.normal(size=6)
        _, grad = least_squares_loss(w, design, y, 0.7)
        assert_gradient(grad, finite_difference(lambda z: least_squares_loss(z, design, y, 0.7)[0], w))

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            fit_least_squares(PerformanceDataset(PlayerUniverse.of_size(2), [], []), 1)


def lowrank_generator(n, rank, seed):
    rng = np.random.default_rng(seed)
    return LowRankPairwiseModel(PlayerUniverse.of_size(n), rng.normal(size=n),
                                rng.normal(size=(n, rank)) * 0.5, rng.normal(size=(n, rank)) * 0.5)


class TestLowRank:
    def test_rank1_fits_own_family(self):
        gen = lowrank_generator(8, 1, seed=0)
        c = all_masks(8)[1:]
        data = PerformanceDataset(gen.universe, c, gen.evaluate(c))
        fit = fit_lowrank_pairwise(data, FitConfig(rank=1, learning_rate=0.03, epochs=2000, batch_size=32))
        assert fit.meta["train_mse"] <= 1e-3

    def test_full_rank_fits_any_pairwise_game(self):
        gen = random_cga(5, 2, seed=2)
        c = all_masks(5)[1:]
        fit = fit_lowrank_pairwise(full_dataset(gen, c),
                                   FitConfig(rank=5, learning_rate=0.03, epochs=3000, batch_size=32))
        ls = fit_least_squares(full_dataset(gen, c), 2).meta["train_mse"]
        assert fit.meta["train_mse"] <= 1e-4
        assert fit.meta["train_mse"] >= ls - 1e-12

    def test_under_ranked_fits_worse(self):
        gen = lowrank_generator(8, 3, seed=4)
        c = all_masks(8)[1:]
        data = PerformanceDataset(gen.universe, c, gen.evaluate(c))
        mse = {r: fit_lowrank_pairwise(data, FitConfig(rank=r, learning_rate=0.03, epochs=1500,
                                                       batch_size=32)).meta["train_mse"]
               for r in (1, 3)}
        assert mse[1] > mse[3]

    def test_deterministic(self):
        gen = lowrank_generator(5, 1, seed=1)
        c = all_masks(5)[1:]
        data = PerformanceDataset(gen.universe, c, gen.evaluate(c))
        cfg = FitConfig(rank=2, epochs=5, seed=9)
        a, b = fit_lowrank_pairwise(data, cfg), fit_lowrank_pairwise(data, cfg)
        np.testing.assert_array_equal(a.factors_left, b.factors_left)

    def test_gradient(self):
        rng = np.random.default_rng(7)
        n, r = 5, 2
        x = one_hot(rng.integers(1, 32, 30), n)
        y = rng.normal(size=30)
        w, f, g = rng.normal(size=n), rng.normal(size=(n, r)), rng.normal(size=(n, r))
        _, (dw, df, dg) = lowrank_loss((w, f, g), x, y, 0.1)
        assert_gradient(dw, finite_difference(lambda z: lowrank_loss((z, f, g), x, y, 0.1)[0], w))
        assert_gradient(df, finite_difference(lambda z: lowrank_loss((w, z, g), x, y, 0.1)[0], f))
        assert_gradient(dg, finite_difference(lambda z: lowrank_loss((w, f, z), x, y, 0.1)[0], g))

    def test_divergence_reports_epoch(self):
        gen = lowrank_generator(6, 1, seed=1)
        c = all_masks(6)[1:]
        data = PerformanceDataset(gen.universe, c, 1e3 * gen.evaluate(c))
        with pytest.raises(NumericalError) as err:
            fit_lowrank_pairwise(data, FitConfig(rank=1, learning_rate=5.0, epochs=50, batch_size=63))
        assert err.value.epoch is not None


class TestPairwiseToCga:
    def test_zero_factors_additive(self):
        u = PlayerUniverse.of_size(3)
        m = pairwise_to_cga(LowRankPairwiseModel(u, [1.0, 2.0, 3.0], np.zeros((3, 1)), np.zeros((3, 1))))
        np.testing.assert_allclose(m.weight_vector(2), [1, 2, 3, 0, 0, 0])

    def test_symmetrisation(self):
        u = PlayerUniverse.of_size(2)
        m = pairwise_to_cga(LowRankPairwiseModel(u, [0.0, 0.0], [[1.0], [0.0]], [[0.0], [1.0]]))
        assert m.weights == {1: 0.0, 2: 0.0, 3: 1.0}

    def test_evaluations_agree(self):
        gen = lowrank_generator(8, 2, seed=3)
        cga = pairwise_to_cga(gen)
        for c in np.random.default_rng(0).integers(0, 256, 100).tolist():
            x = np.array([c >> i & 1 for i in range(8)], dtype=float)
            direct = x @ gen.w + x @ gen.interaction @ x
            assert eval_cga(cga, c) == pytest.approx(direct, abs=1e-9)


def logistic_matchups(seed, samples=10_000):
    """Two fixed teams with score gap ln 3, outcomes drawn from the logistic model."""
    u = PlayerUniverse.of_size(4)
    rng = np.random.default_rng(seed)
    won = rng.random(samples) < 0.75
    return MatchupDataset(u, np.full(samples, 0b0011), np.full(samples, 0b1100), won)


class TestBradleyTerry:
    def test_win_prob_closed_form(self):
        u = PlayerUniverse.of_size(2)
        m = CgaModel.from_weights(u, 1, {1: math.log(3.0), 2: 0.0})
        assert predict_win_prob(m, 1, 2) == pytest.approx(0.75, abs=1e-12)
        assert predict_win_prob(m, 1, 2) + predict_win_prob(m, 2, 1) == pytest.approx(1.0, abs=1e-12)
        same = CgaModel.from_weights(u, 1, {1: 0.4, 2: 0.4})
        assert predict_win_prob(same, 1, 2) == 0.5

    def test_rejects_overlap(self):
        m = random_cga(3, 1, 0)
        with pytest.raises(DomainError):
            predict_win_prob(m, 3, 6)
        with pytest.raises(DomainError):
            MatchupDataset(PlayerUniverse.of_size(3), [3], [6], [1])

    def test_recovers_three_to_one(self):
        m = fit_bradley_terry(logistic_matchups(0), 1,
                              FitConfig(learning_rate=0.5, epochs=50, batch_size=10_000))
        assert predict_win_prob(m, 0b0011, 0b1100) == pytest.approx(0.75, abs=0.03)

    def test_even_outcomes(self):
        u = PlayerUniverse.of_size(2)
        data = MatchupDataset(u, np.ones(2000, int), np.full(2000, 2), np.arange(2000) % 2 == 0)
        m = fit_bradley_terry(data, 1, FitConfig(learning_rate=0.5, epochs=50, batch_size=2000))
        assert predict_win_prob(m, 1, 2) == pytest.approx(0.5, abs=0.02)
        assert m.meta["mean_nll"] == pytest.approx(math.log(2), abs=1e-3)

    def test_centering_only_for_equal_sizes(self):
        m = fit_bradley_terry(logistic_matchups(1, 500), 1, FitConfig(epochs=2))
        assert m.meta["centered"]
        u = PlayerUniverse.of_size(3)
        mixed = MatchupDataset(u, [1, 1], [6, 6], [1, 0])
        assert not fit_bradley_terry(mixed, 1, FitConfig(epochs=2)).meta["centered"]

    def test_gradient(self):
        rng = np.random.default_rng(5)
        cols = canonical_columns(6, 2)
        a = rng.choice([0b000111, 0b001011, 0b100101], 40)
        b = rng.choice([0b111000, 0b110100, 0b011010], 40)
        diff = (team_features(a, cols) - team_features(b, cols)).tocsr()
        won = rng.random(40) < 0.5
        w = rng.normal(size=cols.size) * 0.3
        _, grad, _ = bradley_terry_loss(w, diff, won, 0.05)
        assert_gradient(grad, finite_difference(lambda z: bradley_terry_loss(z, diff, won, 0.05)[0], w))

    def test_team_features_match_dense_indicator(self):
        cols = canonical_columns(5, 2)
        teams = np.array([3, 7, 21, 31])
        np.testing.assert_array_equal(team_features(teams, cols).toarray(), subset_indicator(teams, cols))

    def test_fixed_size_regularisation_agrees_on_probabilities(self):
        n = 10
        u = PlayerUniverse.of_size(n)
        rng = np.random.default_rng(2)
        truth = rng.normal(size=n)

        def draw(count):
            a, b = [], []
            for _ in range(count):
                p = rng.permutation(n)
                a.append(int(sum(1 << i for i in p[:5])))
                b.append(int(sum(1 << i for i in p[5:])))
            return np.array(a), np.array(b)

        a, b = draw(4000)
        score = lambda t: ((t[:, None] >> np.arange(n)) & 1) @ truth
        won = rng.random(a.size) < 1 / (1 + np.exp(score(b) - score(a)))
        data = MatchupDataset(u, a, b, won)
        fits = [fit_bradley_terry(data, 1, FitConfig(l2=l2, learning_rate=0.5, epochs=100,
                                                     batch_size=4000)) for l2 in (0.0, 1e-3)]
        assert not np.allclose(fits[0].values, fits[1].values)
        ha, hb = draw(200)
        p = [[predict_win_prob(f, x, y) for x, y in zip(ha, hb)] for f in fits]
        assert np.mean(np.abs(np.subtract(*p))) < 0.05


class TestDatasets:
    def test_split_partitions(self):
        gen = random_cga(5, 2, 0)
        data = full_dataset(gen, all_masks(5))
        parts = split_dataset(data, [0.5, 0.25, 0.25], seed=3)
        assert sum(len(p) for p in parts) == 32
        assert sorted(np.concatenate([p.coalitions for p in parts]).tolist()) == list(range(32))
        again = split_dataset(data, [0.5, 0.25, 0.25], seed=3)
        np.testing.assert_array_equal(parts[0].coalitions, again[0].coalitions)

    def test_split_rejects_bad_fractions(self):
        with pytest.raises(DomainError):
            split_dataset(full_dataset(random_cga(3, 1, 0), all_masks(3)), [0.5, 0.6])


class TestLargeUniverse:
    """Matchup data with more players than fit in a 64-bit mask."""

    def test_bradley_terry_beyond_64_players(self):
        n = 120
        u = PlayerUniverse.of_size(n)
        rng = np.random.default_rng(0)
        strength = np.zeros(n)
        strength[:5] = 1.0
        a, b, won = [], [], []
        for _ in range(3000):
            p = rng.permutation(n)
            ta, tb = p[:5], p[5:10]
            a.append(sum(1 << int(i) for i in ta))
            b.append(sum(1 << int(i) for i in tb))
            gap = strength[ta].sum() - strength[tb].sum()
            won.append(rng.random() < 1 / (1 + np.exp(-gap)))
        data = MatchupDataset(u, a, b, won)
        m = fit_bradley_terry(data, 2, FitConfig(learning_rate=0.5, epochs=60, batch_size=500))
        assert m.masks.dtype == object
        assert m.values.size == n + n * (n - 1) // 2
        stars = sum(1 << i for i in range(5))
        bench = sum(1 << i for i in range(100, 105))
        assert predict_win_prob(m, stars, bench) > 0.7
        assert eval_cga(m, stars) == pytest.approx(m.evaluate([stars])[0])

    def test_shapley_and_pairwise_beyond_64_players(self):
        from cgakit import shapley_from_weights

        n = 70
        u = PlayerUniverse.of_size(n)
        m = CgaModel.from_weights(u, 2, {1 << 69: 2.0, (1 << 69) | 1: 1.0})
        phi = shapley_from_weights(m).payoffs
        assert phi[69] == 2.5 and phi[0] == 0.5
        assert m.evaluate([(1 << 69) | 1, 1 << 69, 1])[0] == 3.0
        lr = LowRankPairwiseModel(u, np.ones(n), np.zeros((n, 1)), np.zeros((n, 1)))
        assert pairwise_to_cga(lr).evaluate([(1 << 70) - 1])[0] == pytest.approx(n)
