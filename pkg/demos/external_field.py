"""
An external field
=================

With V(x) = x on [0, 1], s = d = 1, k = 1 and no weight, the limiting density
solves rho = (L1 - V)_+ / (C (1 + s/d)) with L1 fixed by unit mass. Here
C = 1 and the answer is rho(x) = 5/4 - x/2 with L1 = 5/2.
"""
import numpy as np

from rknn import Box, DensityTarget, EnergyModel, OptimizerConfig, TensorCells, empirical_density, minimize, solve_L1
from rknn.builtins import field

unit = Box([[0.0, 1.0]])
quad = unit.build_quadrature(4000)
V = field("V=x")

sol = solve_L1(V, lambda y: np.ones(len(y)), 1.0, 1.0, 1, quad)
print(f"L1 = {sol.L1:.10f}, support fraction {sol.support_fraction}")

x, trace = minimize(unit.sample_uniform(500, 1), EnergyModel(1.0, 1, 1, field=V), unit,
                    OptimizerConfig(seed=1, coarsen=2, smoothing=(0.1,)))
rep = empirical_density(x, TensorCells(unit, 10), DensityTarget(sol.rho), quad)
print(f"TV distance to 5/4 - x/2: {rep.tv_distance:.4f}")

# quantiles of the limit density against the sorted minimizer
u = (np.arange(500) + 0.5) / 500
q = (5 - np.sqrt(25 - 16 * u)) / 2
print(f"max |x_(i) - quantile_i| = {np.max(np.abs(np.sort(x[:, 0]) - q)):.4f}")
