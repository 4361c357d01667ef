"""
Fitting a model and building teams
==================================

Simulate noisy team scores from a known order-2 model, recover it by least
squares and by a low-rank pairwise fit, then use the fit to pick teammates.
"""

import tempfile
from pathlib import Path

import numpy as np

from cgakit import (
    CompletionQuery,
    FitConfig,
    best_completion,
    fit_least_squares,
    fit_lowrank_pairwise,
    pairwise_to_cga,
    score_team_percentile,
    simulate_game,
)
from cgakit.formats import read_model_json, read_performance_csv

with tempfile.TemporaryDirectory() as tmp:
    csv_path, model_path = simulate_game(8, 2, seed=1, noise_sd=0.05, repeats=4,
                                         out_path=Path(tmp) / "teams.csv")
    truth = read_model_json(model_path)
    data = read_performance_csv(csv_path, truth.universe)

print(len(data), "observed teams")

# Least squares on all order-2 weights.
ls = fit_least_squares(data, 2)
err = np.abs(ls.weight_vector(2) - truth.weight_vector(2)).max()
print("least squares: identified", ls.meta["identified"], "max weight error", round(err, 4))

# The low-rank pairwise model converts to ordinary order-2 weights.
lr = fit_lowrank_pairwise(data, FitConfig(rank=3, learning_rate=0.03, epochs=400, batch_size=32))
print("low rank: train MSE", round(lr.meta["train_mse"], 4))
lr_cga = pairwise_to_cga(lr)

# Best two players to add to player p0, under the fitted model.
q = CompletionQuery(ls, base=0b1, slots=2, pool=0b11111110)
team, score = best_completion(q)
print("best completion:", truth.universe.players(team), "predicted", round(score, 3),
      "true", round(truth.evaluate([team])[0], 3))

# How that team ranks among random three-player teams.
print("percentile:", score_team_percentile(lr_cga, team, 50, 3, seed=0))
