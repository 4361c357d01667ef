import itertools

import numpy as np
import pytest

from cgakit import (
    CgaModel,
    CompletionQuery,
    DomainError,
    PlayerUniverse,
    best_completion,
    fit_least_squares,
    random_cga,
    score_team_percentile,
    simulate_game,
    weights_from_game,
)
from cgakit.errors import CapacityError
from cgakit.experiments import default_sizes
from cgakit.formats import read_model_json, read_performance_csv

from conftest import random_game


class TestCompletion:
    def test_single_candidate(self):
        m = random_cga(5, 2, 0)
        team, _ = best_completion(CompletionQuery(m, base=0b00001, slots=2, pool=0b00110))
        assert team == 0b00111

    def test_exact_model_hits_bruteforce_max(self):
        g = random_game(8, seed=3)
        m = weights_from_game(g)
        base, pool = 0b00000011, 0b11111100
        team, score = best_completion(CompletionQuery(m, base, 3, pool))
        best = max(g.values[base | sum(1 << i for i in c)] for c in itertools.combinations(range(2, 8), 3))
        assert score == pytest.approx(best, abs=1e-9)
        assert g.values[team] == pytest.approx(best, abs=1e-9)

    def test_additive_picks_top_weights(self):
        u = PlayerUniverse.of_size(6)
        w = [0.5, 3.0, -1.0, 2.0, 0.1, 4.0]
        m = CgaModel.from_weights(u, 1, {1 << i: x for i, x in enumerate(w)})
        team, _ = best_completion(CompletionQuery(m, 0, 3, 0b111111))
        assert team == (1 << 1) | (1 << 3) | (1 << 5)

    def test_ties_go_to_smallest_mask(self):
        m = CgaModel.from_weights(PlayerUniverse.of_size(4), 1, {})
        assert best_completion(CompletionQuery(m, 0, 2, 0b1111))[0] == 0b0011

    def test_validation(self):
        m = random_cga(4, 1, 0)
        with pytest.raises(DomainError):
            CompletionQuery(m, base=1, slots=1, pool=1)
        with pytest.raises(DomainError):
            CompletionQuery(m, base=0, slots=3, pool=0b11)

    def test_capacity(self):
        u = PlayerUniverse.of_size(40)
        m = CgaModel.from_weights(u, 1, {1: 1.0})
        with pytest.raises(CapacityError):
            best_completion(CompletionQuery(m, 0, 20, (1 << 40) - 1))


class TestPercentile:
    def test_argmax_and_argmin(self):
        m = random_cga(8, 2, seed=5)
        teams = [sum(1 << i for i in c) for c in itertools.combinations(range(8), 4)]
        scores = m.evaluate(teams)
        top, bottom = teams[int(np.argmax(scores))], teams[int(np.argmin(scores))]
        assert score_team_percentile(m, top, 1000, 4, seed=0) == 1.0
        assert score_team_percentile(m, bottom, 1000, 4, seed=0) == 0.0

    def test_reproducible(self):
        m = random_cga(12, 2, seed=1)
        a = score_team_percentile(m, 0b111, 50, 3, seed=4)
        assert 0.0 <= a <= 1.0
        assert a == score_team_percentile(m, 0b111, 50, 3, seed=4)


class TestSimulate:
    def test_noise_free_recovery(self, tmp_path):
        csv_path, model_path = simulate_game(6, 2, seed=2, noise_sd=0.0, out_path=tmp_path / "s.csv")
        truth = read_model_json(model_path)
        fit = fit_least_squares(read_performance_csv(csv_path, truth.universe), 2)
        np.testing.assert_allclose(fit.weight_vector(2), truth.weight_vector(2), atol=1e-6)

    def test_noisy_consistency(self, tmp_path):
        errs = []
        for repeats in (1, 25):
            csv_path, model_path = simulate_game(5, 2, seed=7, noise_sd=0.1, repeats=repeats,
                                                 out_path=tmp_path / f"s{repeats}.csv")
            truth = read_model_json(model_path)
            fit = fit_least_squares(read_performance_csv(csv_path, truth.universe), 2)
            errs.append(np.abs(fit.weight_vector(2) - truth.weight_vector(2)).max())
        assert errs[1] < errs[0]
        # with 25 repeats each weight's standard error is well below 0.1
        assert errs[1] < 3 * 0.1

    def test_byte_identical(self, tmp_path):
        a = simulate_game(6, 2, 11, 0.3, tmp_path / "a.csv")
        b = simulate_game(6, 2, 11, 0.3, tmp_path / "b.csv")
        assert a[0].read_bytes() == b[0].read_bytes()
        assert a[1].read_bytes() == b[1].read_bytes()

    def test_default_sizes_identify(self):
        assert default_sizes(6, 2) == (2, 3)
