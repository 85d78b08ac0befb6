"""
Eighty points in the unit square
================================

Minimize the 2-nearest-neighbor Riesz energy with s = 1 and compare the
result with a uniform sample: the minimizer has a much larger separation and
a smaller covering radius, both of order N^(-1/2).
"""
import numpy as np

from rknn import Box, EnergyModel, OptimizerConfig, covering_radius, minimize, separation

square = Box([[0.0, 1.0], [0.0, 1.0]])
n = 80
x0 = square.sample_uniform(n, 3)
x, trace = minimize(x0, EnergyModel(1.0, 2, 2), square, OptimizerConfig(seed=3, restarts=1))

quad = square.build_quadrature(200)
for name, pts in (("uniform sample", x0), ("minimizer", x)):
    sep, cov = separation(pts, square), covering_radius(pts, quad)
    print(f"{name:15s} separation*sqrt(N) = {sep * np.sqrt(n):.3f}  covering*sqrt(N) = {cov * np.sqrt(n):.3f}")
print(f"energy {trace.energies[0]:.1f} -> {trace.best_energy:.1f} in {trace.iters} iterations")

# points pushed onto the boundary are expected: nothing holds them inside
on_edge = np.sum(np.any((x == 0) | (x == 1), axis=1))
print(f"{on_edge} of {n} points sit on the boundary")
