import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rknn.density import (
    calibrate_Csdk,
    DensityTarget,
    constant_Cs1k,
    constant_full_1d,
    floor_density,
    load_registry,
    lookup_constant,
    registry_key,
    rho_equilibrium,
    solve_L1,
    upsert_registry,
    weight_from_density,
)
from rknn.energy import NO_FIELD, FieldSpec
from rknn.geometry import Box
from rknn.optimize import OptimizerConfig

unit = Box([[0.0, 1.0]])
quad = unit.build_quadrature(4000)
one = lambda x: np.ones(np.atleast_2d(x).shape[0])  # noqa: E731
linear = FieldSpec(lambda x: x[:, 0], lambda x: np.ones_like(x))


def test_constant_examples():
    assert constant_Cs1k(3.7, 1) == 1.0
    assert constant_Cs1k(2.0, 2) == 2.0
    assert constant_Cs1k(2.0, 3) == 2.25
    with pytest.raises(ValueError):
        constant_Cs1k(0.0, 1)
    with pytest.raises(ValueError):
        constant_Cs1k(1.0, 0)


def test_full_constant():
    assert constant_full_1d(2.0) == pytest.approx(math.pi**2 / 3, rel=1e-13)
    assert constant_full_1d(4.0) == pytest.approx(math.pi**4 / 45, rel=1e-13)
    with pytest.raises(ValueError):
        constant_full_1d(1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.2, 6.0), st.integers(2, 400))
def test_truncated_constant_tail_bound(s, k):
    c = constant_Cs1k(s, k)
    full = constant_full_1d(s)
    assert constant_Cs1k(s, k - 1) <= c <= full * (1 + 1e-13)
    assert full - c <= 2 * (k // 2) ** (1 - s) / (s - 1) + 1e-12


def test_solve_L1_linear_field():
    sol = solve_L1(linear, one, 1.0, 1.0, 1, quad)
    assert abs(sol.L1 - 2.5) <= 1e-9
    xs = np.linspace(0, 1, 11)[:, None]
    assert np.allclose(sol.rho(xs), 1.25 - xs[:, 0] / 2, atol=1e-9)
    assert sol.support_fraction == 1.0
    assert quad.integrate(sol.rho(quad.nodes)) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("s,d,C", [(1.0, 1, 1.0), (2.0, 1, 2.0), (3.0, 2, 4.3)])
def test_solve_L1_uniform(s, d, C):
    q = Box([[0, 1]] * d).build_quadrature(40 if d == 2 else 1000)
    sol = solve_L1(NO_FIELD, one, C, s, d, q)
    assert sol.L1 == pytest.approx(C * (1 + s / d), rel=1e-9)
    assert np.allclose(sol.rho(q.nodes), 1.0, atol=1e-9)


def test_solve_L1_shift_invariance():
    shifted = FieldSpec(lambda x: x[:, 0] + 3.0, lambda x: np.ones_like(x))
    a = solve_L1(linear, one, 1.0, 1.0, 1, quad)
    b = solve_L1(shifted, one, 1.0, 1.0, 1, quad)
    assert b.L1 - a.L1 == pytest.approx(3.0, abs=1e-8)
    xs = np.linspace(0, 1, 7)[:, None]
    assert np.allclose(a.rho(xs), b.rho(xs), atol=1e-8)


def test_solve_L1_partial_support():
    steep = FieldSpec(lambda x: 20 * x[:, 0], lambda x: np.full_like(x, 20.0))
    sol = solve_L1(steep, one, 1.0, 1.0, 1, quad)
    assert 0 < sol.support_fraction < 1
    assert np.all(sol.rho(quad.nodes)[20 * quad.nodes[:, 0] >= sol.L1] == 0)
    assert quad.integrate(sol.rho(quad.nodes)) == pytest.approx(1.0, abs=1e-8)


def test_solve_L1_errors():
    bad = FieldSpec(lambda x: np.where(x[:, 0] > 0.5, np.inf, 0.0))
    with pytest.raises(ValueError):
        solve_L1(bad, one, 1.0, 1.0, 1, quad)
    with pytest.raises(ValueError):
        solve_L1(linear, one, 0.0, 1.0, 1, quad)


def test_rho_equilibrium_examples():
    x0 = np.array([[0.0]])
    assert rho_equilibrium(linear, one, 1.0, 2.5, x0, 1.0, 1)[0] == pytest.approx(1.25)
    assert rho_equilibrium(linear, one, 1.0, 0.5, np.array([[0.7]]), 1.0, 1)[0] == 0.0
    two = lambda x: 2 * one(x)  # noqa: E731
    a = rho_equilibrium(linear, one, 1.0, 2.5, x0, 2.0, 2)
    b = rho_equilibrium(linear, two, 1.0, 2.5, x0, 2.0, 2)
    assert b[0] == pytest.approx(a[0] / 2)
    with pytest.raises(ValueError):
        rho_equilibrium(linear, lambda x: 0 * one(x), 1.0, 2.5, x0, 1.0, 1)


def test_weight_from_density():
    uniform = DensityTarget(one, None, True)
    w = weight_from_density(uniform, 2.0, 1, quad)
    r = np.array([0.0, 0.5, 1.0])
    assert np.allclose(w.value(np.zeros((3, 1)), r), (1 + r) ** -2.0)
    vanishing = DensityTarget(lambda x: 2 * x[:, 0])
    # midpoint nodes never touch x = 0, so add it explicitly
    q = Box([[0, 1]]).build_quadrature(4)
    q0 = type(q)(np.vstack([[[0.0]], q.nodes]), np.concatenate([[1e-9], q.weights]), q.mesh_size)
    with pytest.raises(ValueError):
        weight_from_density(vanishing, 2.0, 1, q0)
    floored = floor_density(vanishing, 0.1, quad)
    assert quad.integrate(floored(quad.nodes)) == pytest.approx(1.0, abs=1e-12)
    weight_from_density(floored, 2.0, 1, q0)


@pytest.mark.parametrize("s,d", [(2.0, 1), (1.0, 1), (3.0, 2)])
def test_density_weight_round_trip(s, d):
    # the induced equilibrium density of the matching weight is the target itself
    q = Box([[0, 1]] * d).build_quadrature(2000 if d == 1 else 60)
    target = DensityTarget(lambda x: 0.5 + x[:, 0] ** 2 + 0 * x[:, -1]).normalize(q)
    w = weight_from_density(target, s, d, q)
    sol = solve_L1(NO_FIELD, w.diagonal, 3.7, s, d, q)
    assert np.max(np.abs(sol.rho(q.nodes) - target(q.nodes))) <= 1e-9


def test_registry_round_trip(tmp_path):
    path = tmp_path / "reg.json"
    upsert_registry(str(path), 4.0, 2, 6, {"value": 4.3, "residual": 0.01, "method": "calibrated", "seed": 0})
    upsert_registry(str(path), 4.0, 2, 6, {"value": 4.4, "residual": 0.01, "method": "calibrated", "seed": 1})
    reg = load_registry(str(path))
    assert list(reg) == [registry_key(4.0, 2, 6)]
    assert lookup_constant(4.0, 2, 6, str(path)) == 4.4
    assert lookup_constant(2.0, 1, 2) == 2.0
    with pytest.raises(KeyError):
        lookup_constant(4.0, 2, 7, str(path))
    json.loads(path.read_text())


@pytest.mark.slow
def test_calibration_without_oracle():
    cal = calibrate_Csdk(4.0, 2, 6, [64, 144, 256], opts=OptimizerConfig(max_iters=1500))
    assert cal.oracle is None and cal.oracle_error is None
    assert 0 < cal.value < math.inf and cal.residual < 0.05
