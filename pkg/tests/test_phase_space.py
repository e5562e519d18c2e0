from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifikinetic.errors import InvalidState, NonPositiveDensity, NonPositiveTemperature
from bifikinetic.phase_space import (
    MacroField,
    PhaseGrid,
    conservative_maxwellian,
    conserved_to_primitive,
    maxwellian,
    moment_vector,
    moments,
    primitive_to_conserved,
)


def test_grid_geometry():
    g = PhaseGrid(50, 16)
    assert g.dx == pytest.approx(0.02)
    assert np.all(g.v_weights > 0)
    np.testing.assert_array_equal(g.v_nodes, -g.v_nodes[::-1])
    assert np.all(np.abs(g.v_nodes) < g.v_extent)


@pytest.mark.parametrize("bad", [dict(x_count=0, v_count=16), dict(x_count=4, v_count=1), dict(x_count=4, v_count=8, boundary="reflect")])
def test_grid_validation(bad):
    with pytest.raises(ValueError):
        PhaseGrid(**bad)


def test_zero_cell_is_non_positive_density():
    g = PhaseGrid(3, 16)
    f = maxwellian(np.ones(3), np.zeros((3, 2)), np.ones(3), g)
    f[1] = 0.0
    with pytest.raises(NonPositiveDensity) as err:
        moments(f, g)
    assert err.value.cell == 1


def _reference_moments(rho, u, T, n=256, L=8.4):
    # independent fine-lattice quadrature
    h = 2 * L / n
    v = -L + h * (np.arange(n) + 0.5)
    V1, V2 = np.meshgrid(v, v, indexing="ij")
    M = rho / (2 * np.pi * T) * np.exp(-((V1 - u[0]) ** 2 + (V2 - u[1]) ** 2) / (2 * T))
    r = M.sum() * h * h
    m1 = (V1 * M).sum() * h * h / r
    E = 0.5 * ((V1**2 + V2**2) * M).sum() * h * h
    return r, m1, (E - 0.5 * r * m1**2) / r


def test_maxwellian_moments_match_fine_lattice():
    g = PhaseGrid(1, 16)
    W = moments(maxwellian(np.array([1.0]), np.array([[0.2, 0.0]]), np.array([1.0]), g), g)
    ref = _reference_moments(1.0, (0.2, 0.0), 1.0)
    assert abs(W.rho[0] - ref[0]) < 1e-6
    assert abs(W.u1[0] - ref[1]) < 1e-6
    assert abs(W.T[0] - ref[2]) < 1e-6
    assert abs(W.rho[0] - 1) < 1e-6 and abs(W.u1[0] - 0.2) < 1e-6 and abs(W.T[0] - 1) < 1e-6
    assert abs(W.u2[0]) < 1e-14


def test_maxwellian_energy():
    g = PhaseGrid(1, 16)
    W = moments(maxwellian(np.array([1.0]), np.array([[0.2, 0.0]]), np.array([1.0]), g), g)
    assert W.energy[0] == pytest.approx(1.02, abs=1e-6)


def test_maxwellian_formula():
    g = PhaseGrid(1, 16)
    M = maxwellian(np.array(1.0), np.array([0.0, 0.0]), np.array(1.0), g)
    # no lattice node at the origin; compare the formula at the nodes nearest it
    d2 = g.v1**2 + g.v2**2
    np.testing.assert_allclose(M, np.exp(-d2 / 2) / (2 * np.pi), rtol=1e-15)
    assert 1 / (2 * np.pi) == pytest.approx(0.1591549, abs=1e-7)
    g1 = PhaseGrid(1, 17)
    M1 = maxwellian(np.array(1.0), np.array([0.0, 0.0]), np.array(1.0), g1)
    assert M1[8, 8] == pytest.approx(1 / (2 * np.pi), rel=1e-15)


def test_maxwellian_linear_in_density_and_translation():
    g = PhaseGrid(1, 16)
    M1 = maxwellian(np.array(1.0), np.array([0.0, 0.0]), np.array(1.0), g)
    M2 = maxwellian(np.array(2.0), np.array([0.0, 0.0]), np.array(1.0), g)
    np.testing.assert_array_equal(M2, 2 * M1)
    Mu = maxwellian(np.array(1.0), np.array([0.2, 0.0]), np.array(1.0), g)
    shifted = np.exp(-((g.v1 - 0.2) ** 2 + g.v2**2) / 2) / (2 * np.pi)
    np.testing.assert_allclose(Mu, shifted, rtol=1e-14)


@pytest.mark.parametrize("rho,T", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_maxwellian_rejects_bad_state(rho, T):
    with pytest.raises(InvalidState):
        maxwellian(np.array(rho), np.array([0.0, 0.0]), np.array(T), PhaseGrid(1, 8))


def test_conserved_to_primitive_examples():
    rho, u, T = conserved_to_primitive(np.array([1.0, 0.2, 0.0, 1.02]))
    assert rho == 1.0 and u[0] == pytest.approx(0.2) and T == pytest.approx(1.0)
    assert conserved_to_primitive(np.array([1.0, 0.0, 0.0, 1.0]))[2] == 1.0
    with pytest.raises(NonPositiveTemperature):
        conserved_to_primitive(np.array([1.0, 0.0, 0.0, 0.0]))


@given(
    rho=st.floats(0.05, 10), u1=st.floats(-2, 2), u2=st.floats(-2, 2), T=st.floats(0.05, 5)
)
def test_conversion_round_trip(rho, u1, u2, T):
    W = primitive_to_conserved(rho, np.array([u1, u2]), T)
    r, u, t = conserved_to_primitive(W)
    assert r == pytest.approx(rho, rel=1e-13)
    np.testing.assert_allclose(u, [u1, u2], rtol=1e-12, atol=1e-13)
    assert t == pytest.approx(T, rel=1e-10)
    assert W[3] == pytest.approx(0.5 * rho * (u1**2 + u2**2) + rho * T, rel=1e-13)


@pytest.mark.parametrize("nv,t_lo,t_hi,tol", [(16, 0.9, 1.6, 1e-5), (24, 0.5, 1.5, 1e-6), (32, 0.4, 1.5, 1e-6)])
@settings(max_examples=40)
@given(data=st.data())
def test_moments_of_maxwellian_recover_state(nv, t_lo, t_hi, tol, data):
    # midpoint aliasing grows like exp(-2 pi^2 T / dv^2), box truncation with T
    rho = data.draw(st.floats(0.1, 3))
    u1 = data.draw(st.floats(-1, 1))
    T = data.draw(st.floats(t_lo, t_hi))
    g = PhaseGrid(1, nv)
    u = np.array([[u1 * np.cos(0.3), u1 * np.sin(0.3)]])
    W = moments(maxwellian(np.array([rho]), u, np.array([T]), g), g)
    W0 = primitive_to_conserved(np.array([rho]), u, np.array([T]))
    np.testing.assert_allclose(W.conserved, W0, atol=tol * rho * (1 + T))


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_odd_moments_of_even_fields_vanish(seed):
    g = PhaseGrid(1, 16)
    a = np.random.default_rng(seed).random((16, 16))
    even = a + a[::-1, ::-1]
    m = moment_vector(even, g)
    assert abs(m[1]) < 1e-14 * np.abs(even).sum() * g.dv**2 * g.v_extent
    assert abs(m[2]) < 1e-14 * np.abs(even).sum() * g.dv**2 * g.v_extent


@settings(max_examples=30)
@given(u1=st.floats(-1, 1), u2=st.floats(-1, 1), T=st.floats(0.25, 2))
def test_maxwellian_positive_with_peak_at_nearest_node(u1, u2, T):
    g = PhaseGrid(1, 16)
    M = maxwellian(np.array(1.0), np.array([u1, u2]), np.array(T), g)
    assert np.all(M > 0)
    i, j = np.unravel_index(np.argmax(M), M.shape)
    d = (g.v1 - u1) ** 2 + (g.v2 - u2) ** 2
    assert d[i, j] == pytest.approx(d.min())


def test_conservative_maxwellian_matches_moments_exactly():
    g = PhaseGrid(4, 8)
    W = primitive_to_conserved(np.array([1.0, 0.5, 2.0, 0.2]), np.array([[0.1, 0], [0.3, -0.2], [0, 0], [-0.5, 0.1]]), np.array([1.0, 1.5, 0.8, 2.0]))
    M = conservative_maxwellian(W, g)
    np.testing.assert_allclose(moment_vector(M, g), W, rtol=1e-13, atol=1e-14)


def test_macrofield_rejects_non_positive_temperature():
    with pytest.raises(NonPositiveTemperature):
        MacroField(np.array([[1.0, 1.0, 0.0, 0.4]]))
