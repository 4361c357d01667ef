"""
Win/loss data
=============

When only match outcomes are seen, the team score difference drives a
logistic win probability.  Scores are then known only up to a shift.
"""

import numpy as np

from cgakit import FitConfig, MatchupDataset, PlayerUniverse, fit_bradley_terry, predict_win_prob

n = 10
u = PlayerUniverse.of_size(n)
rng = np.random.default_rng(3)
skill = rng.normal(size=n)

# Random five-a-side games between disjoint teams.
a, b = [], []
for _ in range(5000):
    p = rng.permutation(n)
    a.append(sum(1 << int(i) for i in p[:5]))
    b.append(sum(1 << int(i) for i in p[5:]))
a, b = np.array(a), np.array(b)
score = lambda t: ((t[:, None] >> np.arange(n)) & 1) @ skill
won = rng.random(a.size) < 1 / (1 + np.exp(score(b) - score(a)))
data = MatchupDataset(u, a, b, won)

model = fit_bradley_terry(data, 1, FitConfig(learning_rate=0.5, epochs=100, batch_size=5000))
print("mean NLL", round(model.meta["mean_nll"], 4), "centered", model.meta["centered"])

# Fitted skills match the truth after removing the mean.
fitted = model.weight_vector(1)
print("skill correlation", round(np.corrcoef(fitted, skill)[0, 1], 3))

best, worst = int(np.argmax(skill)), int(np.argmin(skill))
print("P(best beats worst) =", round(predict_win_prob(model, 1 << best, 1 << worst), 3))
