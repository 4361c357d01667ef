"""
Least-core subsidies
====================

At a fixed allocation the least-core subsidy is the largest coalition
deficit.  Sampling a few thousand coalitions bounds it for all but a small
fraction of coalitions.
"""

import numpy as np

from cgakit import (
    Allocation,
    SampleBudget,
    exact_max_deficit,
    improve_allocation,
    random_cga,
    sampled_least_core_value,
    shapley_from_weights,
)
from cgakit.allocation import exceedance_fraction

model = random_cga(12, 3, seed=4)
game = model.to_game()
x = shapley_from_weights(model)

exact = exact_max_deficit(game, x)
budget = SampleBudget.from_confidence(delta=0.1, failure_prob=0.1, seed=0)
est = sampled_least_core_value(game, x, budget)
print(f"exact {exact.value:.4f}, sampled {est.e_hat:.4f} from {budget.m} draws")
print("share of coalitions above the estimate:", exceedance_fraction(game, x, est.e_hat))

# For order-2 games the Shapley allocation already minimises the max deficit.
pair = random_cga(6, 2, seed=1)
x0 = shapley_from_weights(pair)
x1 = improve_allocation(pair, x0, steps=5000)
print("order 2:", exact_max_deficit(pair, x0).value, "->", exact_max_deficit(pair, x1).value)

# For higher order, descent from an equal split lowers it.
g3 = random_cga(6, 3, seed=1)
grand = g3.evaluate([63])[0]
x0 = Allocation(g3.universe, np.full(6, grand / 6))
x1 = improve_allocation(g3, x0, steps=5000)
print("order 3:", round(exact_max_deficit(g3, x0).value, 4), "->",
      round(exact_max_deficit(g3, x1).value, 4))
