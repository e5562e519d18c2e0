"""Compressible Euler solver in kinetic form.

The conserved moments are marched with the upwind MUSCL fluxes of the
discrete (uncorrected) Maxwellian on a coarse velocity lattice, so the
model error depends on the number of velocity nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinetic_solver import macro_flux_divergence, step_sizes
from .phase_space import MacroField, PhaseGrid, maxwellian


@dataclass(frozen=True)
class FluidState:
    W: MacroField
    grid: PhaseGrid
    time: float = 0.0

    def maxwellian(self) -> np.ndarray:
        return maxwellian(self.W.rho, self.W.velocity, self.W.T, self.grid)


def fluid_step(state: FluidState, dt: float) -> FluidState:
    grid = state.grid
    if dt * grid.v_extent / grid.dx >= 1.0:
        raise ValueError(f"CFL guard violated: dt * L_v / dx = {dt * grid.v_extent / grid.dx:.3f} >= 1")
    W = state.W.conserved - dt * macro_flux_divergence(state.maxwellian(), grid)
    return FluidState(MacroField(W), grid, state.time + dt)


def run_fluid(W0: MacroField, grid: PhaseGrid, dt: float, t_final: float, observer=None) -> FluidState:
    state = FluidState(W0, grid, 0.0)
    for h in step_sizes(dt, t_final):
        state = fluid_step(state, h)
        if observer is not None:
            observer(state)
    return state


def run_low_fidelity(sample, scenario, observer=None) -> MacroField:
    """Final macroscopic field of the Euler model for one parameter sample.

    The initial moments are those of the high-fidelity initial distribution,
    so both models start from the same W0.
    """
    from .scenarios import initial_macro

    z = getattr(sample, "z", sample)
    W0 = initial_macro(scenario.family, z, scenario.high_grid())
    return run_fluid(W0, scenario.low_grid(), scenario.dt, scenario.t_final, observer).W
