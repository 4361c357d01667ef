"""
Interaction weights and Shapley values
======================================

A characteristic function over n players splits uniquely into one weight per
non-empty coalition.  Truncating to small coalitions gives a compact model,
and the Shapley value follows from the weights by sharing each one evenly.
"""

import numpy as np

from cgakit import (
    Game,
    PlayerUniverse,
    group_shapley,
    shapley_bruteforce,
    shapley_from_weights,
    truncate,
    weights_from_game,
)

# A three-player majority game: any two players win.
u = PlayerUniverse(("ann", "bo", "cy"))
majority = Game.from_function(u, lambda m: 1.0 if bin(m).count("1") >= 2 else 0.0)

# Its weights: +1 on each pair, -2 on the triple.
model = weights_from_game(majority)
for mask, w in model.weights.items():
    print(u.players(mask), w)

# Shapley from the weights matches the permutation definition.
print("closed form:", shapley_from_weights(model).payoffs)
print("brute force:", shapley_bruteforce(majority).payoffs)

# Dropping the triple leaves an order-2 model that overstates the grand coalition.
pairwise = truncate(model, 2)
print("v(grand): exact", majority.value(u.grand), "order-2", pairwise.evaluate([u.grand])[0])

# Shapley values restricted to groups: each group splits only its own value.
rng = np.random.default_rng(0)
g = Game(PlayerUniverse.of_size(6), np.r_[0.0, rng.normal(size=63)])
phi = group_shapley(g, [[0, 1, 2], [3, 4, 5]]).payoffs
print("group sums:", phi[:3].sum(), g.values[0b000111], phi[3:].sum(), g.values[0b111000])
