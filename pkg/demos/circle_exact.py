"""
Equally spaced points on the circle
===================================

On the unit circle (the one-dimensional flat torus) the k-energy of N equally
spaced points has a closed form: every point sees the same k neighbors, so

    E = N * sum over the k nearest offsets of (j / N)^(-s) = N^(1+s) * C(s, k).

This script checks the identity and then lets the optimizer find it from a
random start.
"""
import numpy as np

from rknn import EnergyModel, OptimizerConfig, Torus, constant_Cs1k, evaluate, minimize

circle = Torus([1.0])

# the closed form, for a few sizes
for n in (10, 50, 200):
    x = (np.arange(n) / n)[:, None]
    for k in (1, 2, 4):
        e = evaluate(x, EnergyModel(2.0, k, 1), circle).interaction
        print(f"N={n:4d} k={k}  E/N^3 = {e / n**3:.15f}  C(2,k) = {constant_Cs1k(2.0, k):.15f}")

# random start, 60 points
model = EnergyModel(2.0, 2, 1)
x, trace = minimize(circle.sample_uniform(60, 0), model, circle, OptimizerConfig(seed=0))
gaps = np.diff(np.sort(np.concatenate([x[:, 0], [x[:, 0].min() + 1.0]])))
print(f"\nafter {trace.iters} iterations ({trace.stop_reason}):")
print(f"  rescaled energy {trace.best_energy / 60**3:.10f}")
print(f"  gaps in [{gaps.min():.6f}, {gaps.max():.6f}], 1/60 = {1 / 60:.6f}")
