"""
Which team sizes identify a model
=================================

Observing every coalition of a few sizes pins down an order-k model exactly
when the 0/1 design matrix has full column rank.
"""

from cgakit import check_identifiability
from cgakit.identification import misspec_spectrum, sufficient_size_sets

n, k = 6, 2

# k distinct sizes in [k, n-1] always suffice.
for sizes in sufficient_size_sets(n, k)[:4]:
    rep = check_identifiability(n, k, sizes, exact=True)
    print(sizes, "rank", rep.exact_rank, "of", rep.column_count, "identified", rep.identified)

# Only leave-one-out teams, or leave-one-out plus the grand coalition, are not enough.
for sizes in ([n - 1], [1, n - 1], [n - 1, n]):
    rep = check_identifiability(n, k, sizes, exact=True)
    print(sizes, "rank", rep.exact_rank, "of", rep.column_count, "identified", rep.identified)

# Fitting order 1 to order-r games leaves a residual that grows with n and r.
for n_, r in [(5, 2), (6, 2), (6, 3)]:
    s = misspec_spectrum(n_, 1, r)
    print(f"n={n_} r={r}: top eigenvalue {s.max_eigenvalue:.3f}, mean trace {s.avg_trace:.3f}")
