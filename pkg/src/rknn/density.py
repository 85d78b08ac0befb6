"""Limiting densities, the normalization constant L1, and asymptotic constants.

Minimizers of the k-energy with weight ``w`` and field ``V`` distribute like::

    rho(x) = ( (L1 - V(x))_+ / (C * (1 + s/d) * w(x, x)) )^(d/s)

with ``L1`` fixed by ``rho`` integrating to one. ``C`` is the asymptotic
constant of the unweighted energy on the unit cube. It is known in closed form
for d = 1 and is estimated numerically otherwise.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .energy import DensityWeight, EnergyModel, FieldSpec
from .geometry import Box, Quadrature


# -- closed-form constants -------------------------------------------------

def constant_Cs1k(s: float, k: int) -> float:
    """Exact constant for d = 1: sum of |j|^-s over j = -floor(k/2)..ceil(k/2), j != 0."""
    if not s > 0:
        raise ValueError("s must be positive")
    if k < 1:
        raise ValueError("k must be at least 1")
    left = k // 2
    right = k - left
    terms = [j ** (-s) for j in range(1, left + 1)] + [j ** (-s) for j in range(1, right + 1)]
    return math.fsum(terms)


def constant_full_1d(s: float, terms: int = 1000) -> float:
    """2 * zeta(s) for s > 1: direct sum plus an Euler-Maclaurin tail.

    After ``terms`` summands the tail is integral + half-term + two Bernoulli
    corrections; the neglected remainder is below 1e-12 relative for
    ``terms >= 1000`` and every s > 1.
    """
    if not s > 1:
        raise ValueError("the full 1-d constant is finite only for s > 1")
    m = terms
    head = math.fsum(j ** (-s) for j in range(1, m))
    tail = (
        m ** (1 - s) / (s - 1)
        + 0.5 * m ** (-s)
        + s * m ** (-s - 1) / 12
        - s * (s + 1) * (s + 2) * m ** (-s - 3) / 720
    )
    return 2.0 * (head + tail)


# -- density targets and the field solve -----------------------------------

@dataclass(frozen=True, eq=False)
class DensityTarget:
    rho: Callable
    grad_rho: Callable | None = None
    normalized: bool = False

    def __call__(self, x):
        return np.asarray(self.rho(np.atleast_2d(x)), dtype=float)

    def integral(self, quad: Quadrature) -> float:
        return quad.integrate(self(quad.nodes))

    def normalize(self, quad: Quadrature) -> "DensityTarget":
        z = self.integral(quad)
        if not z > 0:
            raise ValueError("density integrates to zero")
        rho, grad = self.rho, self.grad_rho
        return DensityTarget(
            lambda x: rho(x) / z,
            None if grad is None else (lambda x: grad(x) / z),
            True,
        )


def floor_density(target: DensityTarget, eps: float, quad: Quadrature) -> DensityTarget:
    """(rho + eps) renormalized on ``quad``; makes a vanishing density strictly positive."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    rho, grad = target.rho, target.grad_rho
    return DensityTarget(lambda x: rho(x) + eps, grad, False).normalize(quad)


@dataclass(frozen=True, eq=False)
class FieldSolve:
    L1: float
    C_k: float
    rho: DensityTarget
    support_fraction: float
    residual: float
    iterations: int


def rho_equilibrium(field: FieldSpec, w_diag, C_k: float, L1: float, x, s: float, d: int):
    """Equilibrium density at the points ``x`` (shape (N, p))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    wd = np.asarray(w_diag(x), dtype=float)
    if np.any(~(wd > 0)):
        raise ValueError("w(x, x) must be positive")
    excess = np.maximum(L1 - field.value(x), 0.0)
    return (excess / (C_k * (1.0 + s / d) * wd)) ** (d / s)


def solve_L1(
    field: FieldSpec,
    w_diag,
    C_k: float,
    s: float,
    d: int,
    quad: Quadrature,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> FieldSolve:
    """Find L1 with the equilibrium density integrating to one on ``quad``.

    The mass is a nondecreasing function of L1, zero at L1 = min V. The upper
    end of the bracket doubles until the mass exceeds one, then bisection
    narrows the bracket until the mass is within ``tol`` of one.
    """
    if not C_k > 0:
        raise ValueError("C_k must be positive")
    nodes, weights = quad.nodes, quad.weights
    V = field.value(nodes)
    if np.any(~np.isfinite(V)):
        raise ValueError("external field is not finite on every quadrature node")
    wd = np.asarray(w_diag(nodes), dtype=float)
    if np.any(~(wd > 0)):
        raise ValueError("w(x, x) must be positive")
    scale = C_k * (1.0 + s / d) * wd

    def mass(L):
        return float(np.dot(weights, (np.maximum(L - V, 0.0) / scale) ** (d / s)))

    lo = float(np.min(V))
    width = max(1.0, float(np.max(np.abs(V))), float(np.max(scale)))
    hi = lo + width
    for _ in range(200):
        if mass(hi) >= 1.0:
            break
        lo, hi = hi, hi + 2 * (hi - lo)
    else:
        raise ValueError("could not bracket L1")

    it = 0
    m_lo, m_hi = mass(lo), mass(hi)
    L = hi
    m = m_hi
    while it < max_iter:
        assert m_lo <= 1.0 <= m_hi, "bracket lost monotonicity"
        if abs(m_hi - 1.0) <= tol:
            L, m = hi, m_hi
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            L, m = (lo, m_lo) if abs(m_lo - 1) < abs(m_hi - 1) else (hi, m_hi)
            break
        m_mid = mass(mid)
        it += 1
        if abs(m_mid - 1.0) <= tol:
            L, m = mid, m_mid
            break
        if m_mid < 1.0:
            lo, m_lo = mid, m_mid
        else:
            hi, m_hi = mid, m_mid
        L, m = mid, m_mid

    support = min(1.0, float(np.dot(weights, V < L) / np.sum(weights)))
    Lf = float(L)
    target = DensityTarget(lambda x: rho_equilibrium(field, w_diag, C_k, Lf, x, s, d), None, True)
    return FieldSolve(Lf, float(C_k), target, support, float(abs(m - 1.0)), it)


def weight_from_density(target: DensityTarget, s: float, d: int, quad: Quadrature | None = None) -> DensityWeight:
    """Weight (rho(x) + |x - y|)^(-s/d) whose minimizers follow ``rho`` (with V = 0).

    ``rho`` must be strictly positive; it is checked on ``quad`` when given.
    """
    if quad is not None:
        vals = target(quad.nodes)
        if np.any(~(vals > 0)):
            raise ValueError("density vanishes on a quadrature node; floor it first (see floor_density)")
    return DensityWeight(target.rho, target.grad_rho, float(s), int(d))


# -- numerical calibration of the cube constant ----------------------------

@dataclass
class Calibration:
    value: float
    residual: float
    slope: float
    pairs: list
    oracle: float | None

    @property
    def oracle_error(self):
        if self.oracle is None:
            return None
        return abs(self.value - self.oracle) / self.oracle


def calibrate_Csdk(s, d, k, N_list, opts=None, seed=0, init="stratified", warm_start=True):
    """Estimate the cube constant from minimizers on [0, 1]^d.

    For each N the unweighted energy is minimized, and E / N^(1 + s/d) is fit
    to C + b N^(-1/d). For d = 1 the exact constant is attached as ``oracle``.

    Small k has many poor local minima (with k = 1 on an interval, unequal
    gap patterns can balance their forces). With ``warm_start`` each run
    starts from a minimizer of the (k+1)-energy, which is far better behaved.
    """
    from .analysis import asymptotics_fit
    from .optimize import OptimizerConfig, minimize

    N_list = [int(n) for n in N_list]
    if len(N_list) < 3 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list needs at least three increasing values")
    cube = Box([[0.0, 1.0]] * d)
    model = EnergyModel(float(s), int(k), int(d))
    base = opts or OptimizerConfig(max_iters=20000, tol_rel_energy=1e-12, window=100)
    pairs = []
    for n in N_list:
        o = OptimizerConfig(**{**base.__dict__, "seed": seed + n})
        if init == "stratified":
            x0 = stratified_sample(cube, n, seed + n)
        else:
            x0 = cube.sample_uniform(n, seed + n)
        if warm_start and n > k + 1:
            x0, _ = minimize(x0, EnergyModel(float(s), int(k) + 1, int(d)), cube, o)
        x, trace = minimize(x0, model, cube, o)
        pairs.append((n, trace.best_energy))
    fit = asymptotics_fit(pairs, s, d)
    oracle = constant_Cs1k(s, k) if d == 1 else None
    return Calibration(fit.C_hat, fit.residual, fit.b_hat, fit.pairs, oracle)


def stratified_sample(box: Box, n: int, seed=0):
    """One uniform point in each of n cells of a near-square grid, in random order."""
    rng = np.random.default_rng(seed)
    d = box.d
    m = int(math.ceil(n ** (1.0 / d)))
    cells = np.stack(np.unravel_index(rng.permutation(m**d)[:n], (m,) * d), axis=-1)
    u = (cells + rng.random((n, d))) / m
    return box.lower + (box.upper - box.lower) * u


# -- constant registry -----------------------------------------------------

def registry_key(s, d, k):
    return f"s={float(s)!r};d={int(d)};k={int(k)}"


def load_registry(path) -> dict:
    if path is None or not os.path.exists(path):
        return {}
    with open(path) as fh:
        return json.load(fh)


def upsert_registry(path, s, d, k, entry: dict) -> dict:
    reg = load_registry(path)
    reg[registry_key(s, d, k)] = {"s": float(s), "d": int(d), "k": int(k), **entry}
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(reg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return reg


def lookup_constant(s, d, k, path=None) -> float:
    """Exact value for d = 1, otherwise the registry entry."""
    if int(d) == 1:
        return constant_Cs1k(s, k)
    reg = load_registry(path)
    try:
        return float(reg[registry_key(s, d, k)]["value"])
    except KeyError:
        raise KeyError(f"no registered constant for s={s}, d={d}, k={k}; run calibration first") from None
