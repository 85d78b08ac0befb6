"""Truncated and full Riesz energies with weights and external fields.

The k-energy of a configuration ``x_1, ..., x_N`` is::

    sum_i sum_{j in N_k(i)} w(x_i, x_j) |x_i - x_j|^(-s)  +  N^(s/d) sum_i V(x_i)

where ``N_k(i)`` is row ``i`` of a :class:`~rknn.neighbors.NeighborGraph`.
All built-in weights are radial in the second argument, ``w(x, y) = W(x, |x - y|)``,
so a weight is evaluated from the source point and the edge length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .geometry import Domain, _norm
from .neighbors import NeighborGraph, build_graph

FULL = "full"


# -- weights ---------------------------------------------------------------

class WeightSpec:
    """Weight ``W(x, r)``; subclasses provide the value and partial derivatives.

    ``x`` has shape (E, p) and ``r`` shape (E,), one row per edge.
    """

    kind = ""
    constant = False

    def value(self, x, r):
        raise NotImplementedError

    def grad_x(self, x, r):
        raise NotImplementedError

    def grad_r(self, x, r):
        raise NotImplementedError

    def diagonal(self, x):
        """w(x, x), the factor entering the limiting density."""
        x = np.atleast_2d(x)
        return self.value(x, np.zeros(x.shape[0]))


@dataclass(frozen=True)
class ConstantWeight(WeightSpec):
    c: float = 1.0
    kind = "constant"
    constant = True

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("constant weight must be positive")

    def value(self, x, r):
        return np.full(np.shape(r), self.c)

    def grad_x(self, x, r):
        return np.zeros(np.shape(x))

    def grad_r(self, x, r):
        return np.zeros(np.shape(r))


@dataclass(frozen=True, eq=False)
class RadialWeight(WeightSpec):
    """Marginally radial weight from user callables.

    ``W(x, r) * r**-s`` should be nonincreasing in ``r``;
    :func:`validate_weight` spot-checks that.
    """

    W: Callable
    dW_dx: Callable | None = None
    dW_dr: Callable | None = None
    kind = "marginally-radial"

    def value(self, x, r):
        return np.asarray(self.W(x, r), dtype=float)

    def grad_x(self, x, r):
        if self.dW_dx is None:
            raise ValueError("radial weight has no x-derivative; gradients need dW_dx")
        return np.asarray(self.dW_dx(x, r), dtype=float)

    def grad_r(self, x, r):
        if self.dW_dr is None:
            raise ValueError("radial weight has no r-derivative; gradients need dW_dr")
        return np.asarray(self.dW_dr(x, r), dtype=float)


@dataclass(frozen=True, eq=False)
class DensityWeight(WeightSpec):
    """``w(x, y) = (rho(x) + |x - y|)^(-s/d)``.

    With ``V = 0`` minimizers distribute according to ``rho`` whatever the
    value of the asymptotic constant, because ``w(x, x) = rho(x)^(-s/d)``.
    """

    rho: Callable
    grad_rho: Callable | None
    s: float
    d: int
    kind = "density-derived"

    def value(self, x, r):
        return (self.rho(x) + r) ** (-self.s / self.d)

    def _dbase(self, x, r):
        a = self.s / self.d
        return -a * (self.rho(x) + r) ** (-a - 1.0)

    def grad_x(self, x, r):
        if self.grad_rho is None:
            raise ValueError("density weight has no grad_rho; gradients need it")
        return self._dbase(x, r)[:, None] * self.grad_rho(x)

    def grad_r(self, x, r):
        return self._dbase(x, r)


# -- external fields -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldSpec:
    """External field ``V`` acting on arrays of points (N, p) -> (N,)."""

    V: Callable | None = None
    grad: Callable | None = None

    @property
    def is_zero(self):
        return self.V is None

    def value(self, x):
        x = np.atleast_2d(x)
        if self.V is None:
            return np.zeros(x.shape[0])
        return np.asarray(self.V(x), dtype=float)

    def gradient(self, x):
        x = np.atleast_2d(x)
        if self.V is None:
            return np.zeros_like(x)
        if self.grad is None:
            raise ValueError("external field has no gradient")
        return np.asarray(self.grad(x), dtype=float)


NO_FIELD = FieldSpec()


@dataclass(frozen=True, eq=False)
class EnergyModel:
    """Parameters of the energy: exponent ``s``, neighbor count ``k``
    (or ``"full"`` for all pairs), dimension ``d`` of the field scaling,
    weight and field."""

    s: float
    k: int | str
    d: int
    weight: WeightSpec = field(default_factory=ConstantWeight)
    field: FieldSpec = NO_FIELD

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("s must be positive")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        if self.k != FULL and (int(self.k) != self.k or self.k < 1):
            raise ValueError("k must be a positive integer or 'full'")

    @property
    def full(self):
        return self.k == FULL

    def field_scale(self, n):
        return float(n) ** (self.s / self.d)


class EnergyBreakdown(NamedTuple):
    total: float
    interaction: float
    field: float
    per_point: np.ndarray


class GradientResult(NamedTuple):
    grad: np.ndarray
    tie: bool


def _kernel(w, r, s):
    with np.errstate(divide="ignore", invalid="ignore"):
        t = w * r ** (-s)
    # coincident points: infinite regardless of the weight's value at r = 0
    return np.where(r == 0, np.inf, t)


def _field_part(x, model):
    n = x.shape[0]
    if model.field.is_zero:
        return np.zeros(n)
    return model.field_scale(n) * model.field.value(x)


def _assemble(per_edge_rows, field_terms):
    interaction_rows = per_edge_rows.sum(axis=1) if per_edge_rows.ndim == 2 else per_edge_rows
    interaction = math.fsum(interaction_rows)
    field_total = math.fsum(field_terms)
    if math.isinf(interaction) or math.isinf(field_total):
        total = interaction + field_total
    else:
        total = math.fsum((interaction, field_total))
    return EnergyBreakdown(total, interaction, field_total, interaction_rows + field_terms)


def energy(config, model: EnergyModel, graph: NeighborGraph, domain: Domain) -> EnergyBreakdown:
    """k-energy over the edges of ``graph``.

    Distances are recomputed from ``config`` so a stale graph still yields the
    energy of the current positions over the graph's edges. Totals are
    correctly rounded sums, independent of evaluation order.
    """
    x = np.asarray(config, dtype=float)
    if graph.n != x.shape[0]:
        raise ValueError(f"graph has {graph.n} rows but configuration has {x.shape[0]} points")
    n, keff = graph.n, graph.k_eff
    if keff == 0:
        rows = np.zeros((n, 0))
    else:
        src, dst = graph.edges()
        r = domain.dist(x[src], x[dst])
        w = model.weight.value(x[src], r)
        rows = _kernel(w, r, model.s).reshape(n, keff)
    return _assemble(rows.sum(axis=1), _field_part(x, model))


def energy_full(config, model: EnergyModel, domain: Domain) -> EnergyBreakdown:
    """All-pairs energy, O(N^2)."""
    x = np.asarray(config, dtype=float)
    n = x.shape[0]
    if n < 2:
        raise ValueError("full energy needs at least two points")
    r = domain.dist(x[:, None, :], x[None, :, :])
    src = np.repeat(x, n, axis=0)
    w = model.weight.value(src, r.ravel()).reshape(n, n)
    t = _kernel(w, r, model.s)
    np.fill_diagonal(t, 0.0)
    return _assemble(t.sum(axis=1), _field_part(x, model))


def evaluate(config, model: EnergyModel, domain: Domain, workers=None) -> EnergyBreakdown:
    """Energy on a freshly built graph (or all pairs for ``k="full"``)."""
    x = np.asarray(config, dtype=float)
    if model.full:
        if x.shape[0] < 2:
            return _assemble(np.zeros(x.shape[0]), _field_part(x, model))
        return energy_full(x, model, domain)
    return energy(x, model, build_graph(x, domain, int(model.k), workers), domain)


def _edge_forces(x, model, src, dst, domain):
    """Per-edge gradient pieces for w(x_src, |x_src - x_dst|) r^-s.

    Returns (d/dx_src, d/dx_dst) with shapes (E, p).
    """
    s = model.s
    delta = domain.displacement(x[src], x[dst])
    r = _norm(delta)
    wt = model.weight
    w = wt.value(x[src], r)
    rs = r ** (-s)
    radial = -s * w * rs / r
    if not wt.constant:
        radial = radial + wt.grad_r(x[src], r) * rs
    unit = delta / r[:, None]
    g_dst = -radial[:, None] * unit
    g_src = -g_dst
    if not wt.constant:
        g_src = g_src + wt.grad_x(x[src], r) * rs[:, None]
    return g_src, g_dst


def gradient(config, model: EnergyModel, graph: NeighborGraph, domain: Domain, tie_tol: float = 0.0) -> GradientResult:
    """Gradient of the k-energy with the graph held fixed.

    Each edge (i, j) acts on both ends: the graph is not symmetric, so
    incoming edges are accumulated in a separate transpose pass. At a tie for
    the k-th neighbor the energy is not differentiable; the value returned is
    the one-sided gradient of the current graph and ``tie`` is set.

    With ``tie_tol > 0``, rows whose k-th and (k+1)-st distances agree to that
    relative tolerance split their last edge evenly between the two
    candidates. The result is then the average of the two one-sided gradients,
    a better descent direction near kinks.
    """
    x = np.asarray(config, dtype=float)
    if graph.n != x.shape[0]:
        raise ValueError(f"graph has {graph.n} rows but configuration has {x.shape[0]} points")
    n, p = x.shape
    g = np.zeros((n, p))
    if graph.k_eff > 0:
        src, dst = graph.edges()
        with np.errstate(divide="ignore", invalid="ignore"):
            g_src, g_dst = _edge_forces(x, model, src, dst, domain)
        near = np.zeros(n, dtype=bool)
        if tie_tol > 0:
            last = graph.neighbor_dist[:, -1]
            near = (graph.next_index >= 0) & (graph.next_dist - last <= tie_tol * last)
        if np.any(near):
            rows = np.flatnonzero(near)
            half = np.ones((n, graph.k_eff))
            half[rows, -1] = 0.5
            half = half.ravel()[:, None]
            g_src, g_dst = g_src * half, g_dst * half
            with np.errstate(divide="ignore", invalid="ignore"):
                e_src, e_dst = _edge_forces(x, model, rows, graph.next_index[rows], domain)
            np.add.at(g, rows, 0.5 * e_src)
            np.add.at(g, graph.next_index[rows], 0.5 * e_dst)
        # outgoing edges: rows are contiguous blocks of k_eff
        g += g_src.reshape(n, graph.k_eff, p).sum(axis=1)
        # incoming edges
        np.add.at(g, dst, g_dst)
    if not model.field.is_zero:
        g += model.field_scale(n) * model.field.gradient(x)
    return GradientResult(g, graph.has_ties)


def stiffness(config, model: EnergyModel, graph: NeighborGraph | None, domain: Domain) -> np.ndarray:
    """Per-point curvature scale: sum over incident edges of s(s+1) w r^(-s-2).

    This is the radial second derivative of the kernel, summed over edges in
    both directions (all pairs when ``graph`` is None). Used as a diagonal
    preconditioner; weight derivatives are ignored.
    """
    x = np.asarray(config, dtype=float)
    n = x.shape[0]
    h = np.zeros(n)
    if graph is None:
        src, dst = np.nonzero(~np.eye(n, dtype=bool))
    elif graph.k_eff == 0:
        return h
    else:
        src, dst = graph.edges()
    r = domain.dist(x[src], x[dst])
    w = model.weight.value(x[src], r)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = model.s * (model.s + 1.0) * w * r ** (-model.s - 2.0)
    h += np.bincount(src, weights=c, minlength=n)
    h += np.bincount(dst, weights=c, minlength=n)
    return h


def gradient_full(config, model: EnergyModel, domain: Domain) -> np.ndarray:
    x = np.asarray(config, dtype=float)
    n, p = x.shape
    src, dst = np.nonzero(~np.eye(n, dtype=bool))
    with np.errstate(divide="ignore", invalid="ignore"):
        g_src, g_dst = _edge_forces(x, model, src, dst, domain)
    g = g_src.reshape(n, n - 1, p).sum(axis=1)
    np.add.at(g, dst, g_dst)
    if not model.field.is_zero:
        g += model.field_scale(n) * model.field.gradient(x)
    return g


@dataclass
class WeightReport:
    samples: int
    violations: int
    worst_increase: float
    examples: list

    @property
    def ok(self):
        return self.violations == 0


def validate_weight(spec: WeightSpec, domain: Domain, samples: int = 1000, seed=0, s: float = 1.0) -> WeightReport:
    """Sample (x, r1 < r2) and report where ``W(x, r) r^-s`` increases.

    Advisory only: a clean report is evidence, not proof, that the weight is
    marginally radial.
    """
    rng = np.random.default_rng(seed)
    x = domain.sample_uniform(samples, seed)
    scale = domain.measure() ** (1.0 / domain.d)
    r = np.sort(rng.random((samples, 2)) * scale, axis=1) + 1e-12
    r1, r2 = r[:, 0], r[:, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = spec.value(x, r1) * r1 ** (-s)
        b = spec.value(x, r2) * r2 ** (-s)
    rel = (b - a) / np.maximum(np.abs(a), 1e-300)
    bad = np.flatnonzero(rel > 1e-12)
    examples = [
        {"x": x[i].tolist(), "r1": float(r1[i]), "r2": float(r2[i])} for i in bad[:5]
    ]
    worst = float(np.max(rel[bad])) if bad.size else 0.0
    return WeightReport(samples, int(bad.size), worst, examples)
