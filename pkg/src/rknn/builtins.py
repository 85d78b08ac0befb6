"""Named fields, densities and weights, addressable by string key from run specs.

Densities are normalized on a quadrature of the domain they are resolved for.
Arbitrary expressions are deliberately unsupported; add an entry here instead.
"""
from __future__ import annotations

import numpy as np

from .density import DensityTarget, floor_density, weight_from_density
from .energy import NO_FIELD, ConstantWeight, FieldSpec, WeightSpec
from .geometry import Domain

# quadrature resolution used to normalize named densities
DENSITY_RESOLUTION = {1: 4000, 2: 200, 3: 60}


def _coord(i):
    def value(x):
        return np.atleast_2d(x)[:, i]

    def grad(x):
        x = np.atleast_2d(x)
        g = np.zeros_like(x, dtype=float)
        g[:, i] = 1.0
        return g

    return value, grad


def _sq_norm():
    return (lambda x: np.sum(np.atleast_2d(x) ** 2, axis=1)), (lambda x: 2.0 * np.atleast_2d(x))


FIELDS = {
    "V=x": lambda: FieldSpec(*_coord(0)),
    "V=x2": lambda: FieldSpec(*_coord(1)),
    "V=|x|^2": lambda: FieldSpec(*_sq_norm()),
}


def field(name: str | None) -> FieldSpec:
    if name in (None, "none"):
        return NO_FIELD
    try:
        return FIELDS[name]()
    except KeyError:
        raise KeyError(f"unknown field {name!r}; known: {sorted(FIELDS)}") from None


def _linear_floored(x):
    # (2 x1 + 0.2) / 1.2 integrates to one on [0, 1]
    return (2.0 * np.atleast_2d(x)[:, 0] + 0.2) / 1.2


def _linear_floored_grad(x):
    x = np.atleast_2d(x)
    g = np.zeros_like(x, dtype=float)
    g[:, 0] = 2.0 / 1.2
    return g


def _x3sq(x):
    return np.atleast_2d(x)[:, 2] ** 2


def _x3sq_grad(x):
    x = np.atleast_2d(x)
    g = np.zeros_like(x, dtype=float)
    g[:, 2] = 2.0 * x[:, 2]
    return g


def _uniform(x):
    return np.ones(np.atleast_2d(x).shape[0])


def _uniform_grad(x):
    return np.zeros_like(np.atleast_2d(x), dtype=float)


# name -> (rho, grad_rho, floor); a positive floor is added before normalizing
DENSITIES = {
    "rho=uniform": (_uniform, _uniform_grad, 0.0),
    "rho=2x-floored": (_linear_floored, _linear_floored_grad, 0.0),
    "rho=x3sq": (_x3sq, _x3sq_grad, 0.05),
}
DENSITIES["rho∝x3sq"] = DENSITIES["rho=x3sq"]


def density(name: str, domain: Domain, resolution: int | None = None) -> DensityTarget:
    """Named density, floored if needed and normalized to mass one on ``domain``."""
    try:
        rho, grad, eps = DENSITIES[name]
    except KeyError:
        raise KeyError(f"unknown density {name!r}; known: {sorted(DENSITIES)}") from None
    res = resolution or DENSITY_RESOLUTION.get(domain.d, 40)
    quad = domain.build_quadrature(res)
    target = DensityTarget(rho, grad)
    if eps > 0:
        return floor_density(target, eps, quad)
    return target.normalize(quad)


def weight(obj: dict | None, domain: Domain, s: float) -> WeightSpec:
    """Weight from a spec entry: ``{"kind": "constant", "c": ...}`` or ``{"kind": "density", "density": name}``."""
    if obj is None:
        return ConstantWeight()
    kind = obj.get("kind", "constant")
    if kind == "constant":
        return ConstantWeight(float(obj.get("c", 1.0)))
    if kind == "density":
        target = density(obj["density"], domain)
        return weight_from_density(target, s, domain.d)
    raise ValueError(f"unknown weight kind {kind!r}")
