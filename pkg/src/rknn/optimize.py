"""Projected descent for k-energies.

Each iteration takes a gradient step on the current neighbor graph, projects
the points back onto the domain, and accepts the step only if the energy,
evaluated on a freshly built graph at the candidate, went down. Trial steps
come from the Barzilai-Borwein rule and are halved until accepted. Optional
restarts perturb the best configuration found so far and descend again.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import (
    EnergyModel,
    _edge_forces,
    _field_part,
    _kernel,
    energy,
    energy_full,
    gradient,
    gradient_full,
    stiffness,
)
from .geometry import Domain, _norm
from .neighbors import build_graph


class OptimizationError(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    max_iters: int = 2000
    step0: float | None = None
    shrink: float = 0.5
    max_halvings: int = 30
    graph_refresh: int = 1
    tol_rel_energy: float = 1e-9
    window: int = 50
    restarts: int = 0
    jitter: float = 0.0
    seed: int = 0
    max_move: float = 0.25
    tie_tol: float = 1e-4
    precondition: bool = True
    smoothing: tuple = ()
    coarsen: int = 0
    coarse_min: int = 30
    workers: int | None = None

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.graph_refresh < 1 or self.window < 1 or self.max_iters < 0:
            raise ValueError("graph_refresh and window must be positive, max_iters nonnegative")
        if self.step0 is not None and not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if self.restarts < 0 or self.jitter < 0:
            raise ValueError("restarts and jitter must be nonnegative")
        self.smoothing = tuple(float(t) for t in self.smoothing)
        if any(not t > 0 for t in self.smoothing):
            raise ValueError("smoothing temperatures must be positive")
        if self.coarsen == 1 or self.coarsen < 0 or self.coarse_min < 2:
            raise ValueError("coarsen must be 0 (off) or at least 2, coarse_min at least 2")


@dataclass
class RunTrace:
    energies: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    separations: list = field(default_factory=list)
    iters: int = 0
    stop_reason: str = ""
    best_energy: float = math.inf

    def log(self, e, gnorm, sep):
        self.energies.append(float(e))
        self.grad_norms.append(float(gnorm))
        self.separations.append(float(sep))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "energy", "grad_norm", "separation"])
            for i, row in enumerate(zip(self.energies, self.grad_norms, self.separations)):
                w.writerow([i] + [repr(float(v)) for v in row])


def step_projected(config, grad, step: float, domain: Domain):
    """x_i <- project(x_i - step * g_i)."""
    g = np.asarray(grad, dtype=float)
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient has non-finite entries")
    return domain.project(np.asarray(config, dtype=float) - step * g)


def resolve_duplicates(config, domain: Domain, magnitude: float, seed=0):
    """Jitter every group of exactly coincident points; other points stay put.

    Each member of a group moves by a uniformly random direction and a radius
    below ``magnitude`` before projection.
    """
    x = np.array(config, dtype=float, copy=True)
    _, inverse, counts = np.unique(x, axis=0, return_inverse=True, return_counts=True)
    dup = counts[inverse.ravel()] > 1
    idx = np.flatnonzero(dup)
    if idx.size == 0:
        return x
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((idx.size, x.shape[1]))
    direction /= np.maximum(_norm(direction), 1e-300)[:, None]
    radius = magnitude * rng.uniform(0.1, 1.0, idx.size)
    x[idx] = domain.project(x[idx] + radius[:, None] * direction)
    return x


class _Objective:
    """Energy, gradient and preconditioner for one model on one domain."""

    def __init__(self, model: EnergyModel, domain: Domain, opts: OptimizerConfig):
        self.model = model
        self.domain = domain
        self.workers = opts.workers
        self.tie_tol = opts.tie_tol
        self.precondition = opts.precondition

    def fresh(self, x):
        if self.model.full:
            return energy_full(x, self.model, self.domain).total, None
        g = build_graph(x, self.domain, int(self.model.k), self.workers)
        return energy(x, self.model, g, self.domain).total, g

    def grad(self, x, graph):
        if self.model.full:
            return gradient_full(x, self.model, self.domain)
        return gradient(x, self.model, graph, self.domain, self.tie_tol).grad

    def scale(self, x, graph):
        """Diagonal metric: local kernel curvature, or ones without preconditioning."""
        n = x.shape[0]
        if not self.precondition:
            return np.ones(n)
        h = stiffness(x, self.model, graph, self.domain)
        good = np.isfinite(h) & (h > 0)
        if not np.any(good):
            return np.ones(n)
        # points without edges fall back to the typical curvature
        return np.where(good, h, np.median(h[good]))


class _SmoothObjective(_Objective):
    """k-energy with the k-th term of each row replaced by a soft maximum.

    Row i contributes the kernel values of its first k - 1 neighbors plus
    ``sigma * log(exp(f_k / sigma) + exp(f_{k+1} / sigma))`` where f_k and
    f_{k+1} are the kernel values at the k-th and (k+1)-st neighbors. This
    is an upper bound on the exact row that stays differentiable when the
    k-th neighbor changes, so descent can slide along the kinks of the exact
    energy instead of stalling on them.
    """

    def __init__(self, model, domain, opts, sigma):
        super().__init__(model, domain, opts)
        self.sigma = float(sigma)

    def _terms(self, x, graph):
        n, k = graph.n, graph.k_eff
        m = self.model
        src, dst = graph.edges()
        r = self.domain.dist(x[src], x[dst])
        f = _kernel(m.weight.value(x[src], r), r, m.s).reshape(n, k)
        has = graph.next_index >= 0
        nxt = np.where(has, graph.next_index, 0)
        rn = self.domain.dist(x, x[nxt])
        with np.errstate(invalid="ignore"):
            fn = np.where(has, _kernel(m.weight.value(x, rn), rn, m.s), -np.inf)
        return f, fn, has

    def fresh(self, x):
        g = build_graph(x, self.domain, int(self.model.k), self.workers)
        if g.k_eff == 0:
            return energy(x, self.model, g, self.domain).total, g
        f, fn, has = self._terms(x, g)
        if not np.all(np.isfinite(f)):
            return math.inf, g
        a = f[:, -1]
        # a >= fn away from weight effects; the soft max is symmetric anyway
        hi, lo = np.maximum(a, fn), np.minimum(a, fn)
        soft = np.where(has, hi + self.sigma * np.log1p(np.exp((lo - hi) / self.sigma)), a)
        rows = f[:, :-1].sum(axis=1) + soft
        return math.fsum(rows) + math.fsum(_field_part(x, self.model)), g

    def grad(self, x, graph):
        n, p = x.shape
        k = graph.k_eff
        m = self.model
        g = np.zeros((n, p))
        if k > 0:
            f, fn, has = self._terms(x, graph)
            with np.errstate(over="ignore"):
                q = np.where(has, 1.0 / (1.0 + np.exp((f[:, -1] - fn) / self.sigma)), 0.0)
            wts = np.ones((n, k))
            wts[:, -1] = 1.0 - q
            wts = wts.ravel()[:, None]
            src, dst = graph.edges()
            with np.errstate(divide="ignore", invalid="ignore"):
                g_src, g_dst = _edge_forces(x, m, src, dst, self.domain)
            g += (g_src * wts).reshape(n, k, p).sum(axis=1)
            np.add.at(g, dst, g_dst * wts)
            rows = np.flatnonzero(has & (q > 0))
            if rows.size:
                nxt = graph.next_index[rows]
                with np.errstate(divide="ignore", invalid="ignore"):
                    e_src, e_dst = _edge_forces(x, m, rows, nxt, self.domain)
                np.add.at(g, rows, e_src * q[rows, None])
                np.add.at(g, nxt, e_dst * q[rows, None])
        if not m.field.is_zero:
            g += m.field_scale(n) * m.field.gradient(x)
        return g


def _separation(x, graph, domain):
    if x.shape[0] < 2:
        return math.inf
    if graph is not None and graph.k_eff > 0:
        return float(np.min(graph.neighbor_dist[:, 0]))
    r = domain.dist(x[:, None, :], x[None, :, :])
    np.fill_diagonal(r, np.inf)
    return float(np.min(r))


def _descend(x, E, graph, obj, domain, opts, trace, budget, spacing):
    """Run projected descent from (x, E); returns (x, E, graph, iterations used, reason).

    The search direction is the gradient scaled pointwise by the inverse of
    the local curvature, so every point moves on the scale of its own
    neighbor distance. Step lengths follow Barzilai-Borwein in that metric.
    """
    n = x.shape[0]
    work_graph = graph
    g = obj.grad(x, work_graph)
    h = obj.scale(x, work_graph)
    if opts.step0 is not None:
        step = opts.step0
    elif opts.precondition:
        step = 0.5
    else:
        step = _default_step(n, obj.model, domain)
    history = [E]
    used = 0
    reason = "max_iters"
    while used < budget:
        used += 1
        direction = g / h[:, None]
        move = _norm(direction)
        if not np.any(move > 0):
            reason = "tol"
            break
        # cap every point's displacement at a fraction of the typical spacing
        t = min(step, opts.max_move * spacing / float(np.max(move)))
        accepted = False
        for _ in range(opts.max_halvings + 1):
            xt = step_projected(x, direction, t, domain)
            Et, gt_graph = obj.fresh(xt)
            if Et < E:
                accepted = True
                break
            t *= opts.shrink
        if not accepted:
            reason = "stall"
            break
        if used % opts.graph_refresh == 0 or obj.model.full:
            work_graph = gt_graph
        g_new = obj.grad(xt, work_graph)
        h_new = obj.scale(xt, work_graph)
        s_vec = domain.displacement(xt, x)
        y_vec = g_new - g
        sy = float(np.sum(s_vec * y_vec))
        shs = float(np.sum(h[:, None] * s_vec * s_vec))
        # Barzilai-Borwein step; fall back to growing the accepted step
        step = shs / sy if sy > 0 else 2.0 * t
        x, E, g, h, graph = xt, Et, g_new, h_new, gt_graph
        trace.log(E, float(np.sqrt(np.sum(g * g))), _separation(x, graph, domain))
        history.append(E)
        if len(history) > opts.window:
            old = history[-opts.window - 1]
            if old - E <= opts.tol_rel_energy * abs(E):
                reason = "tol"
                break
    return x, E, graph, used, reason


def _default_step(n, model, domain):
    return 0.1 * n ** (-1.0 / domain.d - 1.0 / model.s)


def prolong(coarse, n: int, domain: Domain, seed=0):
    """Spread ``n`` points around a coarse configuration.

    Each coarse point gets n // m children (the remainder goes to the first
    ones), placed uniformly in a ball of half its nearest-neighbor distance
    and projected onto the domain. Children that coincide are separated.
    """
    y = np.asarray(coarse, dtype=float)
    m, p = y.shape
    if not 2 <= m <= n:
        raise ValueError("need 2 <= coarse size <= n")
    rng = np.random.default_rng(seed)
    r = build_graph(y, domain, 1).neighbor_dist[:, 0]
    counts = np.full(m, n // m)
    counts[: n - counts.sum()] += 1
    parent = np.repeat(np.arange(m), counts)
    u = rng.standard_normal((n, p))
    u /= np.maximum(_norm(u), 1e-300)[:, None]
    radius = 0.5 * r[parent] * rng.random(n) ** (1.0 / domain.d)
    x = domain.project(y[parent] + radius[:, None] * u)
    return resolve_duplicates(x, domain, 0.1 * domain.spacing(n), int(rng.integers(2**63)))


def _typical_kernel(x, model, graph, domain):
    src, dst = graph.edges()
    r = domain.dist(x[src], x[dst])
    f = _kernel(model.weight.value(x[src], r), r, model.s).reshape(graph.n, graph.k_eff)[:, -1]
    f = f[np.isfinite(f) & (f > 0)]
    return float(np.median(f)) if f.size else 1.0


def minimize(init, model: EnergyModel, domain: Domain, opts: OptimizerConfig | None = None):
    """Minimize the energy from ``init``; returns (best configuration, RunTrace).

    The returned configuration is the lowest-energy iterate seen, evaluated on
    a fresh graph. Deterministic for a fixed ``opts.seed``.

    Two optional stages run before the exact descent. With ``opts.coarsen``
    set to f, a random 1/f subset of ``init`` is minimized first (recursively,
    down to ``opts.coarse_min`` points) and the result is refined with
    :func:`prolong`; this moves mass across the domain far faster than descent
    at full size. With ``opts.smoothing`` the energy is first minimized with a
    soft maximum at each row's k-th neighbor (see ``_SmoothObjective``), one
    stage per temperature, given relative to the median k-th kernel value.
    """
    opts = opts or OptimizerConfig()
    x = domain.project(np.asarray(init, dtype=float))
    n = x.shape[0]
    if n < 1:
        raise ValueError("empty configuration")
    obj = _Objective(model, domain, opts)
    spacing = domain.spacing(n)
    rng = np.random.default_rng(opts.seed)
    trace = RunTrace()

    staged = not model.full and n > 1
    if staged and opts.coarsen and n // opts.coarsen >= opts.coarse_min:
        sub = np.sort(rng.choice(n, n // opts.coarsen, replace=False))
        y, sub_trace = minimize(x[sub], model, domain, opts)
        trace.iters += sub_trace.iters
        x = prolong(y, n, domain, int(rng.integers(2**63)))

    E, graph = obj.fresh(x)
    if not math.isfinite(E):
        x = resolve_duplicates(x, domain, 1e-3 * spacing, int(rng.integers(2**63)))
        E, graph = obj.fresh(x)
        if not math.isfinite(E):
            raise OptimizationError("initial energy is not finite and duplicate resolution did not help")

    if staged and opts.smoothing and graph.k_eff > 0:
        scratch = RunTrace()
        for tau in opts.smoothing:
            sobj = _SmoothObjective(model, domain, opts, tau * _typical_kernel(x, model, graph, domain))
            Es, sgraph = sobj.fresh(x)
            x, _, _, used, _ = _descend(x, Es, sgraph, sobj, domain, opts, scratch, opts.max_iters, spacing)
            trace.iters += used
            E, graph = obj.fresh(x)

    trace.log(E, float("nan"), _separation(x, graph, domain))

    best_x, best_E = x, E
    reason = "max_iters"
    for attempt in range(opts.restarts + 1):
        if attempt > 0:
            if opts.jitter <= 0:
                break
            mag = opts.jitter * spacing * 0.5 ** (attempt - 1)
            x = domain.project(best_x + mag * rng.standard_normal(best_x.shape))
            E, graph = obj.fresh(x)
            if not math.isfinite(E):
                continue
        x, E, graph, used, reason = _descend(x, E, graph, obj, domain, opts, trace, opts.max_iters, spacing)
        trace.iters += used
        if E < best_E:
            best_x, best_E = x, E
    trace.stop_reason = reason
    trace.best_energy = best_E
    return best_x, trace
