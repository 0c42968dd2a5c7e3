"""Split a product b*f into its sixteen paraproduct pieces and check they add up.

Both factors are projected to be fully cancellative, so every slice average
vanishes and the decomposition is exact up to rounding.
"""
import numpy as np

from dyadic_bloom import DyadicGrid, product_decomposition, random_function

grid = DyadicGrid((4, 4), (1, 1))
rng = np.random.default_rng(0)
b = random_function(grid, rng, cancellative=True)
f = random_function(grid, rng, cancellative=True)

pieces = product_decomposition(b, f)
total = sum(p.values for p in pieces.values())
print(f"{len(pieces)} pieces on a {grid.shape} grid")
for tag, piece in sorted(pieces.items(), key=lambda kv: -np.linalg.norm(kv[1].values)):
    print(f"  {tag:10s} L2 mass {np.sqrt(np.mean(piece.values ** 2)):.4f}")
print(f"max |b*f - sum| = {np.abs(b.values * f.values - total).max():.2e}")
