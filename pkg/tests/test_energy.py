import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rknn.energy import (
    ConstantWeight,
    DensityWeight,
    EnergyModel,
    FieldSpec,
    RadialWeight,
    energy,
    energy_full,
    evaluate,
    gradient,
    validate_weight,
)
from rknn.geometry import Box, Torus
from rknn.neighbors import build_graph
from rknn.verify import gradient_fd

unit = Box([[0.0, 1.0]])
wide = Box([[-10.0, 10.0]] * 2)


def E(x, model, dom=unit):
    x = np.asarray(x, dtype=float)
    return energy(x, model, build_graph(x, dom, model.k), dom)


def test_two_points():
    assert E([[0.0], [1.0]], EnergyModel(2.0, 1, 1)).total == 2.0


def test_equally_spaced_torus_closed_form():
    x = (np.arange(10) / 10)[:, None]
    out = E(x, EnergyModel(2.0, 2, 1), Torus([1.0]))
    assert out.total == pytest.approx(2000.0, rel=1e-13)


def test_single_point_is_field_value():
    f = FieldSpec(lambda x: x[:, 0] ** 2, lambda x: 2 * x)
    out = E([[0.5]], EnergyModel(1.0, 3, 1, field=f))
    assert out.total == 0.25 and out.interaction == 0.0


def test_duplicates_give_infinity():
    out = E([[0.2], [0.2]], EnergyModel(1.0, 1, 1))
    assert out.total == math.inf
    assert energy_full(np.array([[0.2], [0.2]]), EnergyModel(1.0, "full", 1), unit).total == math.inf


def test_full_energy_examples():
    m = EnergyModel(2.0, "full", 1)
    assert energy_full(np.array([[0.0], [1.0]]), m, unit).total == 2.0
    x = np.array([[0.0], [1.0], [2.0]])
    assert energy_full(x, EnergyModel(1.0, "full", 1), Box([[0, 2]])).total == 5.0
    with pytest.raises(ValueError):
        energy_full(x[:1], m, unit)


def test_breakdown_consistency():
    x = wide.sample_uniform(50, 2)
    f = FieldSpec(lambda x: np.sum(x * x, axis=1), lambda x: 2 * x)
    out = E(x, EnergyModel(1.5, 4, 2, field=f), wide)
    assert out.total == pytest.approx(out.interaction + out.field, rel=1e-10)
    assert math.fsum(out.per_point) == pytest.approx(out.total, rel=1e-10)
    assert out.per_point.shape == (50,)


def test_size_mismatch():
    x = unit.sample_uniform(5, 0)
    g = build_graph(x, unit, 1)
    with pytest.raises(ValueError):
        energy(x[:4], EnergyModel(1.0, 1, 1), g, unit)


def test_gradient_two_points():
    x = np.array([[0.0], [1.0]])
    m = EnergyModel(2.0, 1, 1)
    g = gradient(x, m, build_graph(x, Box([[-1, 2]]), 1), Box([[-1, 2]]))
    assert np.allclose(g.grad[:, 0], [4.0, -4.0], rtol=1e-15)
    assert not g.tie


def test_gradient_vanishes_on_equally_spaced_torus():
    x = (np.arange(12) / 12)[:, None]
    g = gradient(x, EnergyModel(2.0, 2, 1), build_graph(x, Torus([1.0]), 2), Torus([1.0]))
    assert np.max(np.abs(g.grad)) < 1e-9


def test_gradient_flags_ties():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    dom = Box([[0, 3]])
    assert gradient(x, EnergyModel(1.0, 1, 1), build_graph(x, dom, 1), dom).tie


def test_gradient_finite_differences():
    v = gradient_fd(seed=5, cases=50)
    assert v.passed, v.details


def test_missing_gradients_raise():
    w = RadialWeight(lambda x, r: np.ones_like(r))
    x = wide.sample_uniform(6, 0)
    m = EnergyModel(1.0, 2, 2, weight=w)
    with pytest.raises(ValueError):
        gradient(x, m, build_graph(x, wide, 2), wide)
    f = FieldSpec(lambda x: x[:, 0])
    with pytest.raises(ValueError):
        gradient(x, EnergyModel(1.0, 2, 2, field=f), build_graph(x, wide, 2), wide)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(1, 6), st.floats(0.5, 4.0), st.integers(0, 10**6))
def test_scale_covariance(gamma, k, s, seed):
    x = wide.sample_uniform(30, seed) / 20
    m = EnergyModel(s, k, 2)
    a = E(x, m, wide).interaction
    b = E(gamma * x, m, Box([[-1e3, 1e3]] * 2)).interaction
    assert b == pytest.approx(gamma ** (-s) * a, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10**6))
def test_translation_invariance(tx, ty, seed):
    x = wide.sample_uniform(30, seed) / 4
    m = EnergyModel(2.0, 3, 2)
    a = E(x, m, wide).interaction
    b = E(x + [tx, ty], m, wide).interaction
    assert b == pytest.approx(a, rel=1e-10)


def test_k_versus_full():
    x = wide.sample_uniform(25, 4)
    full = energy_full(x, EnergyModel(2.0, "full", 2), wide).interaction
    vals = [E(x, EnergyModel(2.0, k, 2), wide).interaction for k in range(1, 25)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(full, rel=1e-12)


def test_evaluate_full_and_truncated():
    x = wide.sample_uniform(10, 3)
    assert evaluate(x, EnergyModel(2.0, 9, 2), wide).total == pytest.approx(
        evaluate(x, EnergyModel(2.0, "full", 2), wide).total, rel=1e-12
    )


def test_model_validation():
    with pytest.raises(ValueError):
        EnergyModel(0.0, 1, 1)
    with pytest.raises(ValueError):
        EnergyModel(1.0, 0, 1)
    with pytest.raises(ValueError):
        EnergyModel(1.0, "half", 1)
    with pytest.raises(ValueError):
        ConstantWeight(0.0)


def test_validate_weight():
    assert validate_weight(ConstantWeight(), wide, 500, 0, s=2.0).ok
    dw = DensityWeight(lambda x: 1 + np.sum(x * x, axis=1), lambda x: 2 * x, 2.0, 2)
    assert validate_weight(dw, wide, 500, 0, s=2.0).ok
    bad = RadialWeight(lambda x, r: r**4)
    rep = validate_weight(bad, wide, 500, 0, s=2.0)
    assert rep.violations > 0 and rep.examples


def test_density_weight_diagonal():
    dw = DensityWeight(lambda x: np.full(len(x), 4.0), None, 2.0, 1)
    assert np.allclose(dw.diagonal(np.zeros((3, 1))), 4.0 ** -2)
