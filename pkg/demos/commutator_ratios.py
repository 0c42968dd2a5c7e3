"""Two-weight commutator norms against the Bloom bmo norm of the symbol.

For a random symbol b and two cascade weights mu, lambda the ratio
||[b, T]|| / ||b||_{bmo(nu)} should stay of order one as the grid is refined,
both for a dyadic shift T (upper bound) and for the tensor Hilbert transform
(lower bound).
"""
from dyadic_bloom import (BloomTriple, DyadicGrid, ShiftComplexity, cascade_weight,
                          lower_bound_ratio, random_cancellative_shift, random_series,
                          upper_bound_ratio)

c = ShiftComplexity((1, 0), (0, 1))
for K in (3, 4, 5):
    grid = DyadicGrid((K, K))
    b = random_series(grid, seed=1, smoothness=0.5)
    triple = BloomTriple(cascade_weight(grid, 0.6, 2, 0.5), cascade_weight(grid, 0.6, 3, 0.5), 2.0)
    s = random_cancellative_shift(grid, c, seed=4)
    up, est, nb = upper_bound_ratio(b, s, triple, c)
    low, _, _ = lower_bound_ratio(b, triple)
    print(f"K={K}: ||b||_bmo(nu) {nb:.4f}  ||[b,S]|| {est.value:.4f}  "
          f"upper ratio {up:.4f}  lower ratio {low:.4f}")
