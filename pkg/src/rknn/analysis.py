"""Diagnostics for computed configurations.

Separation and covering radius, histograms against a target density,
extrapolation of rescaled energies in N, and the two combinatorial checks on
k-energies: splitting across distant sets and monotonicity in k.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from .energy import EnergyModel, energy, energy_full
from .geometry import Box, Domain, Quadrature, Sphere, Torus
from .neighbors import build_graph, knn_brute


class _Report:
    def to_dict(self):
        out = {}
        for key, val in asdict(self).items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def separation(config, domain: Domain) -> float:
    """Smallest distance between two entries (0 with duplicates)."""
    x = np.asarray(config, dtype=float)
    if x.shape[0] < 2:
        raise ValueError("separation needs at least two points")
    g = build_graph(x, domain, 1)
    return float(np.min(g.neighbor_dist[:, 0]))


def covering_radius(config, quad: Quadrature, domain: Domain | None = None) -> float:
    """Largest distance from a quadrature node to the configuration.

    A proxy for the true covering radius; it can underestimate by up to about
    ``quad.mesh_size``.
    """
    x = np.asarray(config, dtype=float)
    if x.shape[0] == 0 or quad.nodes.shape[0] == 0:
        raise ValueError("empty configuration or quadrature")
    if isinstance(domain, Torus):
        tree = cKDTree(domain.project(x), boxsize=domain.period)
        d, _ = tree.query(domain.project(quad.nodes))
    else:
        tree = cKDTree(x)
        d, _ = tree.query(quad.nodes)
    return float(np.max(d))


# -- histograms ------------------------------------------------------------

class Partition:
    """Cells of a domain with a point-to-cell map."""

    n_cells: int

    def assign(self, x) -> np.ndarray:
        raise NotImplementedError


class TensorCells(Partition):
    """Equal-width cells of a box or torus, ``bins`` per axis."""

    def __init__(self, domain: Box | Torus, bins):
        if isinstance(domain, Torus):
            lo, hi = np.zeros(domain.d), domain.period
        elif isinstance(domain, Box):
            lo, hi = domain.lower, domain.upper
        else:
            raise TypeError("tensor cells need a box or torus")
        self.lo, self.hi = np.asarray(lo, float), np.asarray(hi, float)
        self.bins = np.broadcast_to(np.asarray(bins, dtype=int), self.lo.shape).copy()
        self.n_cells = int(np.prod(self.bins))

    def assign(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = (x - self.lo) / (self.hi - self.lo)
        inside = np.all((u >= -1e-12) & (u <= 1 + 1e-12), axis=1)
        ij = np.clip(np.floor(u * self.bins).astype(int), 0, self.bins - 1)
        cell = np.ravel_multi_index(tuple(ij.T), tuple(self.bins))
        return np.where(inside, cell, -1)


class LatitudeBands(Partition):
    """Bands of equal polar-angle width on a 2-sphere."""

    def __init__(self, domain: Sphere, bands: int):
        self.domain = domain
        self.n_cells = int(bands)

    def assign(self, x):
        y = (np.atleast_2d(x) - self.domain.center) / self.domain.radius
        theta = np.arccos(np.clip(y[:, -1], -1.0, 1.0))
        return np.clip(np.floor(theta / math.pi * self.n_cells).astype(int), 0, self.n_cells - 1)


@dataclass
class DistributionReport(_Report):
    cell_counts: list
    target_mass: list
    tv_distance: float
    max_rel_dev: float
    N: int

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("cell_index,count,target_mass\n")
            for i, (c, m) in enumerate(zip(self.cell_counts, self.target_mass)):
                fh.write(f"{i},{c},{m!r}\n")


def cell_masses(partition: Partition, target, quad: Quadrature) -> np.ndarray:
    """Target probability of each cell, normalized to sum to one."""
    cells = partition.assign(quad.nodes)
    vals = quad.weights * np.asarray(target(quad.nodes), dtype=float)
    masses = np.bincount(cells[cells >= 0], weights=vals[cells >= 0], minlength=partition.n_cells)
    return masses / masses.sum()


def empirical_density(config, partition: Partition, target, quad: Quadrature) -> DistributionReport:
    """Histogram of the configuration against the masses of ``target``.

    ``tv_distance`` is half the l1 difference between the empirical and target
    cell probabilities. ``max_rel_dev`` ignores cells whose target mass is
    below half the average cell mass.
    """
    x = np.atleast_2d(np.asarray(config, dtype=float))
    n = x.shape[0]
    cells = partition.assign(x)
    if np.any(cells < 0):
        raise ValueError(f"{int(np.sum(cells < 0))} points fall outside the partition")
    counts = np.bincount(cells, minlength=partition.n_cells)
    mass = cell_masses(partition, target, quad)
    freq = counts / n
    tv = 0.5 * math.fsum(np.abs(freq - mass))
    big = mass >= 1.0 / (2 * partition.n_cells)
    rel = np.abs(freq[big] - mass[big]) / mass[big]
    return DistributionReport(
        counts.tolist(), mass.tolist(), float(tv), float(np.max(rel, initial=0.0)), n
    )


# -- asymptotics -----------------------------------------------------------

@dataclass
class AsymptoticsFit(_Report):
    pairs: list
    C_hat: float
    b_hat: float
    residual: float


def asymptotics_fit(pairs, s: float, d: int) -> AsymptoticsFit:
    """Least-squares fit of E / N^(1 + s/d) = C + b N^(-1/d).

    ``residual`` is the largest relative deviation of a data point from the
    fitted line.
    """
    pairs = [(int(n), float(e)) for n, e in pairs]
    if len(pairs) < 3:
        raise ValueError("need at least three (N, energy) pairs")
    ns = np.array([p[0] for p in pairs], dtype=float)
    if np.any(np.diff(ns) <= 0):
        raise ValueError("N must be strictly increasing")
    y = np.array([p[1] for p in pairs]) / ns ** (1.0 + s / d)
    A = np.stack([np.ones_like(ns), ns ** (-1.0 / d)], axis=1)
    if np.linalg.matrix_rank(A) < 2:
        raise ValueError("degenerate design matrix")
    (c, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    fitted = A @ np.array([c, b])
    residual = float(np.max(np.abs(y - fitted) / np.abs(fitted)))
    rescaled = [(int(n), float(v)) for n, v in zip(ns, y)]
    return AsymptoticsFit(rescaled, float(c), float(b), residual)


# -- structural checks -----------------------------------------------------

@dataclass
class ShortRangeReport(_Report):
    whole: float
    part1: float
    part2: float
    bound: float
    slack: float
    lower_ok: bool
    upper_ok: bool

    @property
    def ok(self):
        return self.lower_ok and self.upper_ok


def box_gap(a: Box, b: Box) -> float:
    """Euclidean distance between two boxes."""
    gap = np.maximum(0.0, np.maximum(a.lower - b.upper, b.lower - a.upper))
    return float(np.sqrt(np.sum(gap * gap)))


def _interaction(x, s, k, metric):
    if x.shape[0] < 2:
        return 0.0
    model = EnergyModel(s, k, metric.d)
    return energy(x, model, build_graph(x, metric, k), metric).interaction


def short_range_check(config, A1: Box, A2: Box, s: float, k: int, rtol: float = 1e-12) -> ShortRangeReport:
    """Check parts <= whole <= parts + N k h^-s for points split over A1, A2.

    Unweighted, no field. Both sides use the Euclidean metric.
    """
    x = np.atleast_2d(np.asarray(config, dtype=float))
    h = box_gap(A1, A2)
    if not h > 0:
        raise ValueError("A1 and A2 must be disjoint with positive distance")
    in1, in2 = A1.contains(x), A2.contains(x)
    if np.any(in1 == in2):
        raise ValueError("every point must lie in exactly one of A1, A2")
    metric = A1
    whole = _interaction(x, s, k, metric)
    p1 = _interaction(x[in1], s, k, metric)
    p2 = _interaction(x[in2], s, k, metric)
    parts = p1 + p2
    bound = x.shape[0] * k * h ** (-s)
    slack = whole - parts
    tol = rtol * max(abs(whole), 1.0)
    return ShortRangeReport(
        whole, p1, p2, bound, slack, bool(parts <= whole + tol), bool(whole <= parts + bound + tol)
    )


@dataclass
class MonotonicityReport(_Report):
    interactions: list
    full: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def k_monotonicity_check(config, domain: Domain, s: float, k_max: int, rtol: float = 1e-12) -> MonotonicityReport:
    """Interaction energies for k = 1..k_max and all pairs; they must not decrease."""
    x = np.atleast_2d(np.asarray(config, dtype=float))
    vals = []
    for k in range(1, k_max + 1):
        g = knn_brute(x, domain, k)
        vals.append(energy(x, EnergyModel(s, k, domain.d), g, domain).interaction)
    full = energy_full(x, EnergyModel(s, "full", domain.d), domain).interaction
    seq = vals + [full]
    bad = [i + 1 for i in range(len(seq) - 1) if seq[i] > seq[i + 1] * (1 + rtol)]
    return MonotonicityReport(vals, full, bad)
