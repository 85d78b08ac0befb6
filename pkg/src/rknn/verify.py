"""Property suites with machine-readable verdicts.

Every suite is deterministic for a given seed and returns a :class:`Verdict`.
The command line runs them by name; the test suite calls them directly.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import TensorCells, empirical_density, k_monotonicity_check, separation, short_range_check
from .density import constant_Cs1k, weight_from_density
from .energy import ConstantWeight, DensityWeight, EnergyModel, FieldSpec, RadialWeight, energy, gradient
from .geometry import Box, Sphere, Torus
from .neighbors import build_graph, knn_brute
from .optimize import OptimizerConfig, minimize


@dataclass
class Verdict:
    suite: str
    passed: bool
    cases: int
    failures: int
    details: dict = field(default_factory=dict)

    def to_json(self, **kw):
        return json.dumps(
            {"suite": self.suite, "passed": self.passed, "cases": self.cases,
             "failures": self.failures, "details": self.details},
            **kw,
        )


# -- neighbors -------------------------------------------------------------

def _random_instance(rng):
    kind = rng.integers(3)
    n = int(rng.integers(2, 60))
    if kind == 0:
        d = int(rng.integers(1, 4))
        dom = Box([[0.0, 1.0]] * d)
    elif kind == 1:
        d = int(rng.integers(1, 4))
        dom = Torus(np.ones(d))
    else:
        dom = Sphere(1.0, 3)
    flavor = rng.integers(3)
    if flavor == 0:
        x = dom.sample_uniform(n, int(rng.integers(2**31)))
    elif flavor == 1 and not isinstance(dom, Sphere):
        # lattice points: many exactly equal distances
        m = int(rng.integers(2, 6))
        x = rng.integers(0, m, size=(n, dom.p)) / m
        x = dom.project(x)
    else:
        x = dom.sample_uniform(n, int(rng.integers(2**31)))
        # duplicates at other indices
        dup = rng.integers(0, n, size=max(1, n // 4))
        x[rng.integers(0, n, size=dup.size)] = x[dup]
    k = int(rng.integers(1, 8))
    return dom, x, k


def neighbors_oracle(seed=0, cases=1000) -> Verdict:
    """Tree search against brute force, including ties and duplicates."""
    rng = np.random.default_rng(seed)
    bad = []
    for c in range(cases):
        dom, x, k = _random_instance(rng)
        a, b = build_graph(x, dom, k), knn_brute(x, dom, k)
        same = (
            np.array_equal(a.neighbor_index, b.neighbor_index)
            and np.array_equal(a.neighbor_dist, b.neighbor_dist)
            and np.array_equal(a.next_index, b.next_index)
            and np.array_equal(a.next_dist, b.next_dist)
        )
        if not same:
            bad.append(c)
    return Verdict("neighbors-oracle", not bad, cases, len(bad), {"failed_cases": bad[:20]})


# -- gradient --------------------------------------------------------------

def _random_model(rng, dom):
    s = float(rng.uniform(0.5, 4.0))
    k = int(rng.integers(1, 6))
    choice = rng.integers(3)
    if choice == 0:
        w = ConstantWeight(float(rng.uniform(0.5, 2.0)))
    elif choice == 1:
        a = float(rng.uniform(0.1, 1.0))
        w = RadialWeight(
            lambda x, r: (1.0 + a * np.sum(x * x, axis=1)) * np.exp(-r),
            lambda x, r: (2.0 * a * x) * np.exp(-r)[:, None],
            lambda x, r: -(1.0 + a * np.sum(x * x, axis=1)) * np.exp(-r),
        )
    else:
        c = float(rng.uniform(0.2, 1.0))
        w = DensityWeight(
            lambda x: 1.0 + c * np.sum(x * x, axis=1),
            lambda x: 2.0 * c * x,
            s, dom.d,
        )
    if rng.random() < 0.5:
        f = FieldSpec(lambda x: np.sum(x * x, axis=1) + x[:, 0], lambda x: 2.0 * x + np.eye(x.shape[1])[0])
    else:
        f = FieldSpec()
    return EnergyModel(s, k, dom.d, w, f)


def gradient_fd(seed=0, cases=50, rtol=1e-6) -> Verdict:
    """Analytic gradient against central differences on tie-free configurations."""
    rng = np.random.default_rng(seed)
    worst, bad, done = 0.0, [], 0
    while done < cases:
        kind = rng.integers(3)
        dom = [Box([[0.0, 1.0]] * 2), Torus(np.ones(2)), Sphere(1.0, 3)][kind]
        n = int(rng.integers(8, 30))
        x = dom.sample_uniform(n, int(rng.integers(2**31)))
        model = _random_model(rng, dom)
        g = build_graph(x, dom, model.k)
        gap = (g.next_dist - g.neighbor_dist[:, -1]) / g.neighbor_dist[:, -1]
        if np.min(gap) < 1e-3:
            continue
        exact = gradient(x, model, g, dom).grad
        h = 1e-6 * float(np.min(g.neighbor_dist[:, 0]))
        fd = np.zeros_like(x)
        for i in range(n):
            for j in range(x.shape[1]):
                xp, xm = x.copy(), x.copy()
                xp[i, j] += h
                xm[i, j] -= h
                fd[i, j] = (energy(xp, model, g, dom).total - energy(xm, model, g, dom).total) / (2 * h)
        err = float(np.linalg.norm(exact - fd) / np.linalg.norm(exact))
        worst = max(worst, err)
        if not err < rtol:
            bad.append(done)
        done += 1
    return Verdict("gradient-fd", not bad, cases, len(bad), {"worst_rel_error": worst, "rtol": rtol})


# -- structural inequalities -----------------------------------------------

def short_range(seed=0, cases=200, gaps=(0.25, 0.5, 1.0)) -> Verdict:
    """Splitting over two unit squares a distance h apart."""
    rng = np.random.default_rng(seed)
    bad, total = [], 0
    for h in gaps:
        A1 = Box([[0.0, 1.0], [0.0, 1.0]])
        A2 = Box([[1.0 + h, 2.0 + h], [0.0, 1.0]])
        for c in range(cases):
            n1, n2 = int(rng.integers(2, 40)), int(rng.integers(2, 40))
            x = np.vstack([A1.sample_uniform(n1, int(rng.integers(2**31))), A2.sample_uniform(n2, int(rng.integers(2**31)))])
            s = float(rng.uniform(0.5, 4.0))
            k = int(rng.integers(1, 8))
            rep = short_range_check(x, A1, A2, s, k)
            total += 1
            if not rep.ok:
                bad.append({"h": h, "case": c})
    return Verdict("short-range", not bad, total, len(bad), {"failed_cases": bad[:20]})


def monotonicity(seed=0, cases=100, k_max=8) -> Verdict:
    rng = np.random.default_rng(seed)
    bad = []
    for c in range(cases):
        dom = [Box([[0.0, 1.0]] * 2), Torus(np.ones(2)), Sphere(1.0, 3)][rng.integers(3)]
        n = int(rng.integers(k_max + 2, 40))
        x = dom.sample_uniform(n, int(rng.integers(2**31)))
        s = float(rng.uniform(1.0, 4.0))
        rep = k_monotonicity_check(x, dom, s, k_max)
        if not rep.ok:
            bad.append(c)
    return Verdict("monotonicity", not bad, cases, len(bad), {"failed_cases": bad[:20]})


def circle_exact(seed=0, Ns=(10, 50, 200), ks=(1, 2, 3, 4), ss=(1.5, 2.0, 4.0), rtol=1e-12) -> Verdict:
    """Equally spaced points on the unit circle: E = N^(1+s) C(s, k)."""
    circle = Torus(np.ones(1))
    worst, bad, total = 0.0, [], 0
    for n in Ns:
        x = (np.arange(n) / n)[:, None]
        for k in ks:
            g = build_graph(x, circle, k)
            for s in ss:
                e = energy(x, EnergyModel(s, k, 1), g, circle).interaction
                want = n ** (1.0 + s) * constant_Cs1k(s, k)
                err = abs(e - want) / want
                worst = max(worst, err)
                total += 1
                if not err <= rtol:
                    bad.append({"N": n, "k": k, "s": s, "rel_error": err})
    return Verdict("circle-exact", not bad, total, len(bad), {"worst_rel_error": worst, "failed_cases": bad})


# -- optimizer-backed suites -------------------------------------------------

def separation_scaling(seed=0, Ns=(100, 200, 400), s=3.0, k=2, max_ratio=2.0) -> Verdict:
    """Separation times N^(1/2) on the unit square stays within a bounded ratio."""
    square = Box([[0.0, 1.0], [0.0, 1.0]])
    model = EnergyModel(s, k, 2)
    scaled = []
    for n in Ns:
        x, _ = minimize(square.sample_uniform(n, seed + n), model, square, OptimizerConfig(seed=seed + n))
        scaled.append(separation(x, square) * math.sqrt(n))
    ratio = max(scaled) / min(scaled) if min(scaled) > 0 else math.inf
    ok = min(scaled) > 0 and ratio < max_ratio
    return Verdict("separation-scaling", ok, len(Ns), 0 if ok else 1,
                   {"N": list(Ns), "scaled_separation": scaled, "ratio": ratio, "max_ratio": max_ratio})


def density_matching(seed=0, n=500, bins=10, tv_max=0.08) -> Verdict:
    """Linear density on [0, 1] reached through the density-matching weight."""
    from .builtins import density

    unit = Box([[0.0, 1.0]])
    target = density("rho=2x-floored", unit)
    quad = unit.build_quadrature(4000)
    model = EnergyModel(2.0, 2, 1, weight_from_density(target, 2.0, 1, quad))
    opts = OptimizerConfig(seed=seed, coarsen=2, smoothing=(0.1,))
    x, trace = minimize(unit.sample_uniform(n, seed), model, unit, opts)
    rep = empirical_density(x, TensorCells(unit, bins), target, quad)
    ok = rep.tv_distance < tv_max
    return Verdict("density-matching", ok, 1, 0 if ok else 1,
                   {"tv_distance": rep.tv_distance, "tv_max": tv_max, "iterations": trace.iters})


SUITES = {
    "neighbors-oracle": neighbors_oracle,
    "gradient-fd": gradient_fd,
    "short-range": short_range,
    "monotonicity": monotonicity,
    "circle-exact": circle_exact,
    "separation-scaling": separation_scaling,
    "density-matching": density_matching,
}


def run_suite(name: str, seed=0) -> Verdict:
    try:
        fn = SUITES[name]
    except KeyError:
        raise KeyError(f"unknown suite {name!r}; known: {sorted(SUITES)}") from None
    return fn(seed=seed)
