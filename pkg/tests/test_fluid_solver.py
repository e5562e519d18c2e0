from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifikinetic.errors import NonPositiveDensity, NonPositiveTemperature
from bifikinetic.fluid_solver import FluidState, fluid_step, run_fluid, run_low_fidelity
from bifikinetic.kinetic_solver import KineticState, KineticStepConfig, macro_preupdate
from bifikinetic.phase_space import MacroField, PhaseGrid, maxwellian
from bifikinetic.scenarios import ScenarioConfig, draw_samples, initial_macro


def _double_peak_W(grid_high, z=None):
    return initial_macro("double_peak", np.zeros(15) if z is None else z, grid_high)


def test_uniform_state_unchanged():
    g = PhaseGrid(20, 8)
    W = MacroField.from_primitive(np.ones(20), 0.3, 0.0, 0.8)
    out = fluid_step(FluidState(W, g), 0.002)
    np.testing.assert_array_equal(out.W.conserved, W.conserved)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_totals_conserved_periodic(seed):
    scen = ScenarioConfig("double_peak")
    z = draw_samples(scen, 1, seed=seed)[0]
    W0 = _double_peak_W(scen.high_grid(), z.array)
    g = scen.low_grid()
    out = run_fluid(W0, g, scen.dt, scen.t_final)
    np.testing.assert_allclose(out.W.totals(g.dx), W0.totals(g.dx), rtol=0, atol=1e-12)


def test_step_equals_kinetic_preupdate_of_maxwellian():
    g = PhaseGrid(50, 8)
    W = _double_peak_W(PhaseGrid(50, 16))
    fs = FluidState(W, g)
    M = maxwellian(W.rho, W.velocity, W.T, g)
    ks = KineticState(g, None, W, M)
    from bifikinetic.phase_space import DistributionField

    ks = KineticState(g, DistributionField(M), W, M)
    expected = macro_preupdate(ks, KineticStepConfig(0.0016, 1.0, 0.1))
    np.testing.assert_allclose(fluid_step(fs, 0.0016).W.conserved, expected.conserved, rtol=1e-14, atol=1e-15)


def test_cfl_guard():
    g = PhaseGrid(50, 8)
    with pytest.raises(ValueError):
        fluid_step(FluidState(_double_peak_W(PhaseGrid(50, 16)), g), 0.01)


def test_epsilon_does_not_enter():
    z = np.zeros(15)
    a = run_low_fidelity(z, ScenarioConfig("double_peak", epsilon=1e-2))
    b = run_low_fidelity(z, ScenarioConfig("double_peak", epsilon=1e-4))
    np.testing.assert_array_equal(a.conserved, b.conserved)


def test_coarse_lattice_self_consistency():
    scen = ScenarioConfig("double_peak")
    z = np.zeros(15)
    a = run_low_fidelity(z, scen.replace(nv_low=8))
    b = run_low_fidelity(z, scen.replace(nv_low=16))
    assert np.sqrt(scen.high_grid().dx * np.sum((a.rho - b.rho) ** 2)) <= 5e-2


def test_sod_three_wave_structure():
    scen = ScenarioConfig("sod", nx=100, dt=8e-4, nv_high=24, nv_low=12)
    W = run_low_fidelity(np.zeros(15), scen)
    x = scen.high_grid().x_centers
    rho, u = W.rho, W.u1
    assert abs(rho[0] - 1.0) < 1e-3 and abs(rho[-1] - 0.125) < 5e-3
    assert np.all(rho > 0.1) and np.all(W.T > 0)
    # rarefaction: density falls, velocity rises from the left plateau
    fan = (x > 0.25) & (x < 0.5)
    assert np.all(np.diff(rho[fan]) <= 1e-8)
    assert u[fan].max() > 0.3
    # plateaus between the waves: behind the contact, between contact and
    # shock, and the undisturbed right state
    def plateau(a, b):
        sel = (x > a) & (x < b)
        return rho[sel], u[sel]

    r2, u2 = plateau(0.48, 0.56)
    r3, u3 = plateau(0.64, 0.72)
    r4, u4 = plateau(0.8, 1.0)
    assert np.ptp(r2) < 0.03 and np.ptp(r3) < 0.03 and np.ptp(r4) < 1e-4
    assert r2.mean() > r3.mean() + 0.1 > r4.mean() + 0.2
    # velocity is continuous across the contact and zero ahead of the shock
    assert abs(u2.mean() - u3.mean()) < 0.1 and u3.mean() > 0.5
    assert np.abs(u4).max() < 1e-3


def test_initial_moments_come_from_high_lattice():
    scen = ScenarioConfig("double_peak")
    seen = []
    run_low_fidelity(np.zeros(15), scen.replace(t_final=scen.dt), observer=lambda s: seen.append(s))
    W0 = initial_macro("double_peak", np.zeros(15), scen.high_grid())
    expected = fluid_step(FluidState(W0, scen.low_grid()), scen.dt)
    np.testing.assert_array_equal(seen[-1].W.conserved, expected.W.conserved)


def test_bad_state_rejected():
    with pytest.raises((NonPositiveDensity, NonPositiveTemperature)):
        MacroField(np.array([[0.0, 0.0, 0.0, 1.0]]))
