"""
Twenty thousand points on a genus-3 surface
===========================================

A qualitative picture only: the points follow a density proportional to
x3^2 (floored so the weight stays finite) on an algebraic genus-3 surface.
Nothing here is checked against a reference value.

Writes ``genus3.ply`` (open it in any mesh viewer) and prints a latitude-style
histogram along x3.

    python3 demos/genus3_surface.py --N 20000 --max-iters 200
"""
import argparse

import numpy as np

from rknn import EnergyModel, OptimizerConfig, minimize, weight_from_density
from rknn.builtins import density
from rknn.export import write_ply
from rknn.geometry import implicit_surface

ap = argparse.ArgumentParser()
ap.add_argument("--N", type=int, default=20000)
ap.add_argument("--max-iters", type=int, default=200)
ap.add_argument("--out", default="genus3.ply")
args = ap.parse_args()

surf = implicit_surface("genus3")
rho = density("rho=x3sq", surf)
model = EnergyModel(4.0, 30, 2, weight_from_density(rho, 4.0, 2))

x0 = surf.sample_uniform(args.N, 0)
x, trace = minimize(x0, model, surf, OptimizerConfig(max_iters=args.max_iters, seed=0))
print(f"energy {trace.energies[0]:.4g} -> {trace.best_energy:.4g} in {trace.iters} iterations ({trace.stop_reason})")

edges = np.linspace(x[:, 2].min(), x[:, 2].max(), 9)
counts, _ = np.histogram(x[:, 2], edges)
start, _ = np.histogram(x0[:, 2], edges)
print("x3 band            start   final")
for a, b, c0, c in zip(edges, edges[1:], start, counts):
    print(f"[{a:+.2f}, {b:+.2f})  {c0:7d} {c:7d}")
write_ply(args.out, x)
print(f"wrote {args.out}")
