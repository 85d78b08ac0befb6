"""Compact sets carrying point configurations.

Every domain exposes the same small surface: ``project``, ``dist``,
``displacement``, ``sample_uniform`` and ``build_quadrature``. The rest of the
package only talks to domains through it.

Points are numpy arrays. A single point has shape ``(p,)`` and a configuration
of ``N`` points has shape ``(N, p)``; row order is meaningful (it decides ties
between equidistant neighbors).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi
from typing import Callable

import numpy as np

PROJECTION_TOL = 1e-10
NEWTON_BUDGET = 50


class ProjectionError(RuntimeError):
    """Newton projection onto an implicit surface did not converge."""

    def __init__(self, residual):
        self.residual = float(residual)
        super().__init__(f"implicit-surface projection did not converge, |f(x)| = {self.residual:.3e}")


class SamplingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Discretization of the d-dimensional Hausdorff measure on a domain.

    ``mesh_size`` is the grid spacing the rule was built with; it bounds how far
    any point of the domain is from the nearest node (up to a constant).
    """

    nodes: np.ndarray
    weights: np.ndarray
    mesh_size: float

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return x


def _norm(delta):
    """Euclidean norm over the last axis.

    Components are accumulated one at a time so that the result depends only
    on the pair of points, never on the shape of the surrounding array. Tree
    and brute-force neighbor searches rely on that to agree bit for bit.
    """
    delta = np.asarray(delta, dtype=float)
    acc = delta[..., 0] * delta[..., 0]
    for j in range(1, delta.shape[-1]):
        acc = acc + delta[..., j] * delta[..., j]
    return np.sqrt(acc)


class Domain:
    """Base class for compact sets A in R^p with intrinsic dimension d."""

    kind: str = ""
    d: int
    p: int
    periodic: bool = False

    def project(self, x):
        raise NotImplementedError

    def displacement(self, x, y):
        """Vector x - y in the domain's metric (minimal image on the torus)."""
        return _as_points(x) - _as_points(y)

    def dist(self, x, y):
        return _norm(self.displacement(x, y))

    def sample_uniform(self, n: int, seed: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def build_quadrature(self, resolution: int) -> Quadrature:
        raise NotImplementedError

    def measure(self) -> float:
        """H_d(A), exact where a closed form exists."""
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-9):
        x = np.atleast_2d(_as_points(x))
        return self.dist(x, self.project(x)) <= tol

    def tree_data(self, x):
        """Coordinates and ``boxsize`` argument for a scipy cKDTree."""
        return self.project(x), None

    def to_json(self) -> dict:
        raise NotImplementedError

    def spacing(self, n: int) -> float:
        """Typical nearest-neighbor distance of n well-spread points."""
        return (self.measure() / max(n, 1)) ** (1.0 / self.d)


@dataclass(frozen=True, eq=False)
class Box(Domain):
    """Axis-aligned box; d = p = number of axes."""

    bounds: np.ndarray
    kind: str = field(default="box", init=False)

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if np.any(~np.isfinite(b)) or np.any(b[:, 0] >= b[:, 1]):
            raise ValueError(f"box bounds must be ordered intervals, got {b.tolist()}")
        object.__setattr__(self, "bounds", b)

    @property
    def d(self):
        return self.bounds.shape[0]

    @property
    def p(self):
        return self.bounds.shape[0]

    @property
    def lower(self):
        return self.bounds[:, 0]

    @property
    def upper(self):
        return self.bounds[:, 1]

    def project(self, x):
        return np.clip(_as_points(x), self.lower, self.upper)

    def sample_uniform(self, n, seed=None):
        rng = np.random.default_rng(seed)
        return self.lower + (self.upper - self.lower) * rng.random((n, self.p))

    def build_quadrature(self, resolution):
        if resolution < 1:
            raise ValueError("resolution must be positive")
        axes = []
        for lo, hi in self.bounds:
            h = (hi - lo) / resolution
            axes.append(lo + h * (np.arange(resolution) + 0.5))
        grid = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([g.ravel() for g in grid], axis=-1)
        cell = float(np.prod((self.upper - self.lower) / resolution))
        weights = np.full(nodes.shape[0], cell)
        return Quadrature(nodes, weights, float(np.max(self.upper - self.lower)) / resolution)

    def measure(self):
        return float(np.prod(self.upper - self.lower))

    def contains(self, x, tol=1e-9):
        x = np.atleast_2d(_as_points(x))
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def to_json(self):
        return {"kind": "box", "bounds": self.bounds.tolist()}


@dataclass(frozen=True, eq=False)
class Torus(Domain):
    """Flat torus: the box [0, L_1) x ... x [0, L_d) with periodic wraparound."""

    period: np.ndarray
    kind: str = field(default="torus", init=False)
    periodic: bool = field(default=True, init=False)

    def __post_init__(self):
        per = np.atleast_1d(np.asarray(self.period, dtype=float))
        if np.any(~(per > 0)):
            raise ValueError("torus periods must be positive")
        object.__setattr__(self, "period", per)

    @property
    def d(self):
        return self.period.shape[0]

    @property
    def p(self):
        return self.period.shape[0]

    def project(self, x):
        y = np.mod(_as_points(x), self.period)
        # fmod of a tiny negative number rounds up to the period itself
        return np.where(y >= self.period, 0.0, y)

    def displacement(self, x, y):
        delta = _as_points(x) - _as_points(y)
        return delta - self.period * np.round(delta / self.period)

    def sample_uniform(self, n, seed=None):
        rng = np.random.default_rng(seed)
        return self.project(self.period * rng.random((n, self.p)))

    def build_quadrature(self, resolution):
        return Box(np.stack([np.zeros(self.d), self.period], axis=-1)).build_quadrature(resolution)

    def measure(self):
        return float(np.prod(self.period))

    def contains(self, x, tol=1e-9):
        x = np.atleast_2d(_as_points(x))
        return np.all((x >= -tol) & (x < self.period + tol), axis=-1)

    def tree_data(self, x):
        return self.project(x), self.period

    def to_json(self):
        return {"kind": "torus", "period": self.period.tolist(), "d": self.d}


@dataclass(frozen=True, eq=False)
class Sphere(Domain):
    """Round sphere of dimension d = p - 1 embedded in R^p."""

    radius: float = 1.0
    p: int = 3
    center: np.ndarray | None = None
    kind: str = field(default="sphere", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        if self.p < 2:
            raise ValueError("sphere needs ambient dimension p >= 2")
        c = np.zeros(self.p) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.p,):
            raise ValueError("sphere center must have p coordinates")
        object.__setattr__(self, "center", c)

    @property
    def d(self):
        return self.p - 1

    def project(self, x):
        y = _as_points(x) - self.center
        # rescale first so tiny or huge offsets do not under- or overflow
        m = np.max(np.abs(y), axis=-1, keepdims=True)
        y = y / np.where(m > 0, m, 1.0)
        r = _norm(y)[..., None]
        # the center has no nearest point; send it to the first pole
        pole = np.zeros(self.p)
        pole[0] = 1.0
        y = np.where(r > 0, y / np.where(r > 0, r, 1.0), pole)
        return self.center + self.radius * y

    def sample_uniform(self, n, seed=None):
        rng = np.random.default_rng(seed)
        g = rng.standard_normal((n, self.p))
        return self.project(self.center + g)

    def build_quadrature(self, resolution):
        """Latitude-longitude midpoint rule with exact cell areas (p = 3 only)."""
        if self.p != 3:
            raise NotImplementedError("sphere quadrature is implemented for the 2-sphere in R^3")
        if resolution < 2:
            raise ValueError("resolution must be at least 2")
        nt, nphi = resolution, 2 * resolution
        t_edges = np.linspace(0.0, pi, nt + 1)
        theta = 0.5 * (t_edges[:-1] + t_edges[1:])
        dphi = 2 * pi / nphi
        phi = dphi * (np.arange(nphi) + 0.5)
        band = self.radius**2 * (np.cos(t_edges[:-1]) - np.cos(t_edges[1:])) * dphi
        T, P = np.meshgrid(theta, phi, indexing="ij")
        nodes = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
        weights = np.repeat(band, nphi)
        return Quadrature(self.center + self.radius * nodes, weights, self.radius * pi / nt)

    def measure(self):
        return 2 * pi ** (self.p / 2) / gamma(self.p / 2) * self.radius ** (self.p - 1)

    def to_json(self):
        out = {"kind": "sphere", "radius": float(self.radius), "p": int(self.p)}
        if np.any(self.center != 0):
            out["center"] = self.center.tolist()
        return out


@dataclass(frozen=True, eq=False)
class ImplicitSurface(Domain):
    """Level set {f = 0} of a smooth function in R^p.

    ``f`` and ``grad`` act on arrays of shape (N, p). The quadrature and the
    sampler are first-order approximations of the surface measure.
    """

    f: Callable
    grad: Callable
    bbox: np.ndarray
    name: str = "custom"
    tol: float = PROJECTION_TOL
    budget: int = NEWTON_BUDGET
    kind: str = field(default="implicit", init=False)

    def __post_init__(self):
        object.__setattr__(self, "bbox", np.asarray(self.bbox, dtype=float).reshape(-1, 2))

    @property
    def p(self):
        return self.bbox.shape[0]

    @property
    def d(self):
        return self.p - 1

    def project(self, x):
        x = _as_points(x)
        single = x.ndim == 1
        y = np.atleast_2d(x).copy()
        val = self.f(y)
        for _ in range(self.budget):
            active = np.abs(val) >= self.tol
            if not np.any(active):
                break
            g = self.grad(y[active])
            gg = np.sum(g * g, axis=-1)
            gg = np.where(gg > 0, gg, 1.0)
            y[active] -= (val[active] / gg)[:, None] * g
            val = self.f(y)
        res = np.max(np.abs(val), initial=0.0)
        if not res < self.tol:
            raise ProjectionError(res)
        return y[0] if single else y

    def _band(self, x):
        g = self.grad(x)
        return np.abs(self.f(x)) / np.maximum(_norm(g), 1e-300)

    def sample_uniform(self, n, seed=None, max_rounds=200):
        rng = np.random.default_rng(seed)
        lo, hi = self.bbox[:, 0], self.bbox[:, 1]
        width = 0.01 * float(np.min(hi - lo))
        kept = []
        count = 0
        for _ in range(max_rounds):
            cand = lo + (hi - lo) * rng.random((max(4 * n, 1024), self.p))
            near = cand[self._band(cand) < width]
            kept.append(near)
            count += near.shape[0]
            if count >= n:
                break
        if count < n:
            raise SamplingError(f"rejection sampler found {count} of {n} points on the surface")
        pts = np.concatenate(kept)[:n]
        return self.project(pts)

    def build_quadrature(self, resolution):
        """Grid nodes within half a cell of the surface, projected, weight h^(p-1)."""
        lo, hi = self.bbox[:, 0], self.bbox[:, 1]
        h = float(np.max(hi - lo)) / resolution
        axes = [np.arange(a + 0.5 * h, b, h) for a, b in zip(lo, hi)]
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        near = grid[self._band(grid) < 0.5 * h]
        nodes = self.project(near)
        return Quadrature(nodes, np.full(nodes.shape[0], h ** (self.p - 1)), h)

    def measure(self):
        return self.build_quadrature(60).total

    def contains(self, x, tol=1e-9):
        x = np.atleast_2d(_as_points(x))
        return self._band(x) <= tol

    def to_json(self):
        return {"kind": "implicit", "expr": self.name, "p": int(self.p)}


# -- named implicit surfaces ----------------------------------------------

def _genus3_f(x):
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    return 2 * b * (b * b - 3 * a * a) * (1 - c * c) + (a * a + b * b) ** 2 - (9 * c * c - 1) * (1 - c * c)


def _genus3_grad(x):
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    r2 = a * a + b * b
    da = -12 * a * b * (1 - c * c) + 4 * a * r2
    db = (6 * b * b - 6 * a * a) * (1 - c * c) + 4 * b * r2
    dc = -4 * c * b * (b * b - 3 * a * a) - 18 * c * (1 - c * c) + 2 * c * (9 * c * c - 1)
    return np.stack([da, db, dc], axis=-1)


def _torus_f(x, R=1.0, r=0.4):
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    q = np.sqrt(a * a + b * b)
    return (q - R) ** 2 + c * c - r * r


def _torus_grad(x, R=1.0, r=0.4):
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    q = np.maximum(np.sqrt(a * a + b * b), 1e-300)
    t = 2 * (q - R) / q
    return np.stack([t * a, t * b, 2 * c], axis=-1)


def _sphere_f(x):
    return np.sum(x * x, axis=-1) - 1.0


def _sphere_grad(x):
    return 2 * x


IMPLICIT_SURFACES = {
    # genus-3 algebraic surface inside [-2, 2]^3, for illustration
    "genus3": (_genus3_f, _genus3_grad, [[-2, 2], [-2, 2], [-2, 2]]),
    "torus": (_torus_f, _torus_grad, [[-1.5, 1.5], [-1.5, 1.5], [-0.5, 0.5]]),
    "sphere": (_sphere_f, _sphere_grad, [[-1.2, 1.2], [-1.2, 1.2], [-1.2, 1.2]]),
}


def implicit_surface(name: str) -> ImplicitSurface:
    try:
        f, g, bbox = IMPLICIT_SURFACES[name]
    except KeyError:
        raise ValueError(f"unknown implicit surface {name!r}; known: {sorted(IMPLICIT_SURFACES)}") from None
    return ImplicitSurface(f, g, bbox, name=name)


def domain_from_json(obj: dict) -> Domain:
    kind = obj.get("kind")
    if kind == "box":
        return Box(obj["bounds"])
    if kind == "torus":
        period = np.atleast_1d(np.asarray(obj.get("period", 1.0), dtype=float))
        d = int(obj.get("d", period.size))
        if period.size == 1 and d > 1:
            period = np.full(d, period[0])
        if period.size != d:
            raise ValueError("torus period must have one entry per axis")
        return Torus(period)
    if kind == "sphere":
        return Sphere(float(obj.get("radius", 1.0)), int(obj.get("p", 3)), obj.get("center"))
    if kind == "implicit":
        surf = implicit_surface(obj["expr"])
        if int(obj.get("p", 3)) != surf.p:
            raise ValueError(f"implicit surface {obj['expr']!r} lives in R^{surf.p}")
        return surf
    raise ValueError(f"unknown domain kind {kind!r}")


# module-level conveniences mirroring the method names

def project(domain: Domain, x):
    return domain.project(x)


def dist(domain: Domain, x, y):
    return domain.dist(x, y)


def sample_uniform(domain: Domain, n: int, seed: int | None = None):
    if n < 1:
        raise ValueError("n must be at least 1")
    return domain.sample_uniform(n, seed)


def build_quadrature(domain: Domain, resolution: int) -> Quadrature:
    return domain.build_quadrature(resolution)
