"""Phase-space grids, velocity moments and Maxwellians.

Everything here is fixed to one space dimension and a two-dimensional
velocity lattice (``DV = 2``).  Velocity integrals use the midpoint rule on a
uniform cell-centered lattice over ``[-L_v, L_v]^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidState, NonPositiveDensity, NonPositiveTemperature

DV = 2
BOUNDARIES = ("periodic", "zero-gradient")


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform cells on ``[0, 1]`` times a uniform velocity lattice."""

    x_count: int
    v_count: int
    v_extent: float = 8.4
    boundary: str = "periodic"

    def __post_init__(self):
        if self.x_count < 1:
            raise ValueError("x_count must be positive")
        if self.v_count < 2:
            raise ValueError("v_count must be at least 2")
        if not self.v_extent > 0:
            raise ValueError("v_extent must be positive")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")

    @property
    def dx(self) -> float:
        return 1.0 / self.x_count

    @property
    def dv(self) -> float:
        return 2.0 * self.v_extent / self.v_count

    @cached_property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.x_count) + 0.5) * self.dx

    @cached_property
    def v_nodes(self) -> np.ndarray:
        # cell-centered: symmetric under v -> -v, no node on the box edge
        j = np.arange(self.v_count)
        return (2 * j - (self.v_count - 1)) * (0.5 * self.dv)

    @cached_property
    def v1(self) -> np.ndarray:
        return np.broadcast_to(self.v_nodes[:, None], (self.v_count, self.v_count))

    @cached_property
    def v2(self) -> np.ndarray:
        return np.broadcast_to(self.v_nodes[None, :], (self.v_count, self.v_count))

    @cached_property
    def v_weights(self) -> np.ndarray:
        return np.full((self.v_count, self.v_count), self.dv**2)

    @cached_property
    def collision_invariants(self) -> np.ndarray:
        """m(v) = (1, v1, v2, |v|^2/2) stacked on the first axis, shape (4, Nv, Nv)."""
        v1, v2 = self.v1, self.v2
        return np.stack([np.ones_like(v1), v1, v2, 0.5 * (v1**2 + v2**2)])

    def with_velocity(self, v_count: int) -> "PhaseGrid":
        return PhaseGrid(self.x_count, v_count, self.v_extent, self.boundary)

    def same_lattice(self, other: "PhaseGrid") -> bool:
        return self.v_count == other.v_count and self.v_extent == other.v_extent


@dataclass(frozen=True)
class DistributionField:
    """Values f(x_i, v_j, v_k) with shape (N_x, N_v, N_v)."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ValueError("DistributionField expects a (N_x, N_v, N_v) array")
        if not np.all(np.isfinite(self.values)):
            raise InvalidState("distribution contains non-finite values")

    def total_mass(self, grid: PhaseGrid) -> float:
        return float(np.sum(self.values * grid.v_weights) * grid.dx)


@dataclass(frozen=True)
class MacroField:
    """Conserved variables W = (rho, rho u1, rho u2, E) per cell, shape (N_x, 4).

    Construction validates positivity of density and temperature; the
    primitive view is derived on access.
    """

    conserved: np.ndarray
    _prim: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.conserved, dtype=float)
        if w.ndim != 2 or w.shape[1] != 4:
            raise ValueError("conserved must have shape (N_x, 4)")
        object.__setattr__(self, "conserved", w)
        rho, u, T = conserved_to_primitive(w)
        object.__setattr__(self, "_prim", np.column_stack([rho, u, T]))

    @classmethod
    def from_primitive(cls, rho, u1, u2, T) -> "MacroField":
        return cls(primitive_to_conserved(rho, np.stack(np.broadcast_arrays(u1, u2), -1), T))

    @property
    def rho(self) -> np.ndarray:
        return self._prim[:, 0]

    @property
    def u1(self) -> np.ndarray:
        return self._prim[:, 1]

    @property
    def u2(self) -> np.ndarray:
        return self._prim[:, 2]

    @property
    def velocity(self) -> np.ndarray:
        return self._prim[:, 1:3]

    @property
    def T(self) -> np.ndarray:
        return self._prim[:, 3]

    @property
    def energy(self) -> np.ndarray:
        return self.conserved[:, 3]

    def primitive(self) -> np.ndarray:
        """Columns (rho, u1, u2, T)."""
        return self._prim.copy()

    def totals(self, dx: float) -> np.ndarray:
        return self.conserved.sum(axis=0) * dx


def moment_vector(f: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """<m(v) f> for every leading index; returns shape f.shape[:-2] + (4,)."""
    mw = grid.collision_invariants * grid.v_weights
    return np.einsum("...ij,kij->...k", f, mw)


def conserved_to_primitive(W):
    """Invert E = rho |u|^2 / 2 + rho T (two velocity dimensions).

    ``W`` has trailing axis of length 4.  Returns ``(rho, u, T)`` with ``u``
    carrying a trailing axis of length 2.
    """
    W = np.asarray(W, dtype=float)
    rho = W[..., 0]
    flat_rho = np.atleast_1d(rho).ravel()
    bad = np.flatnonzero(~(flat_rho > 0))
    if bad.size:
        raise NonPositiveDensity(bad[0], flat_rho[bad[0]])
    u = W[..., 1:3] / rho[..., None]
    internal = W[..., 3] - 0.5 * rho * np.sum(u**2, axis=-1)
    T = internal * 2.0 / (DV * rho)
    flat_T = np.atleast_1d(T).ravel()
    bad = np.flatnonzero(~(flat_T > 0))
    if bad.size:
        raise NonPositiveTemperature(bad[0], flat_T[bad[0]])
    return rho, u, T


def primitive_to_conserved(rho, u, T) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    T = np.asarray(T, dtype=float)
    E = 0.5 * rho * np.sum(u**2, axis=-1) + 0.5 * DV * rho * T
    return np.concatenate([rho[..., None], rho[..., None] * u, E[..., None]], axis=-1)


def maxwellian(rho, u, T, grid: PhaseGrid) -> np.ndarray:
    """Discrete Maxwellian rho/(2 pi T) exp(-|v-u|^2 / 2T) on the lattice.

    ``rho`` and ``T`` may be arrays (one value per cell); ``u`` then has a
    trailing axis of length 2.  Output shape is ``rho.shape + (N_v, N_v)``.
    No moment correction is applied.
    """
    rho = np.asarray(rho, dtype=float)
    T = np.asarray(T, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(~(rho > 0)):
        raise InvalidState("maxwellian requires positive density")
    if np.any(~(T > 0)):
        raise InvalidState("maxwellian requires positive temperature")
    r = rho[..., None, None]
    t = T[..., None, None]
    d1 = grid.v1 - u[..., 0, None, None]
    d2 = grid.v2 - u[..., 1, None, None]
    return r / (2.0 * np.pi * t) * np.exp(-(d1**2 + d2**2) / (2.0 * t))


def moments(f, grid: PhaseGrid) -> MacroField:
    """Macroscopic field of a distribution (array or DistributionField)."""
    values = f.values if isinstance(f, DistributionField) else np.asarray(f)
    if values.ndim == 2:
        values = values[None]
    return MacroField(moment_vector(values, grid))


def match_moments(g: np.ndarray, weight: np.ndarray, target: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Minimal weighted correction g - weight * (a + b.v + c|v|^2/2) with <m g> = target.

    The correction lies in span{weight * m(v)} and minimizes the
    1/weight-weighted L2 norm.  Works per leading index (one 4x4 solve per
    cell).
    """
    m = grid.collision_invariants * grid.v_weights  # (4, Nv, Nv)
    gram = np.einsum("...ij,kij,lij->...kl", weight, m, grid.collision_invariants)
    defect = moment_vector(g, grid) - target
    coef = np.linalg.solve(gram, defect[..., None])[..., 0]
    return g - weight * np.einsum("...k,kij->...ij", coef, grid.collision_invariants)


def conservative_maxwellian(W, grid: PhaseGrid) -> np.ndarray:
    """Discrete Maxwellian of W corrected so its lattice moments equal W exactly."""
    W = np.asarray(W, dtype=float)
    rho, u, T = conserved_to_primitive(W)
    M = maxwellian(rho, u, T, grid)
    return match_moments(M, M, W, grid)
