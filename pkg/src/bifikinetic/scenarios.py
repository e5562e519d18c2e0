"""Random initial data, collision amplitudes, Knudsen profiles and sample sets.

Parameter vectors live in [-1, 1]^d.  Block layouts:

* ``double_peak`` / ``mixed_regime``: ``(z_rho[0:d1], z_T[0:d1], z_b[0:1])``
* ``sod``: ``(z_b[0:d1+1], z_T[0:d1])``

so d = 2 d1 + 1 in every family (15 for the default d1 = 7).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import BlockLayoutMismatch, ConfigError
from .phase_space import DistributionField, MacroField, PhaseGrid, maxwellian, moments

FAMILIES = ("double_peak", "sod", "mixed_regime")
STREAMS = {"train": 0, "test": 1}
DOUBLE_PEAK_DRIFT = (0.2, 0.0)

# desk-scale time step keeps the reference ratio dt/dx = 8e-4 / 0.01
DT_OVER_DX = 0.08


@dataclass(frozen=True)
class ParameterSample:
    id: str
    z: tuple

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.z, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.z)


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment family with its grids, times and sample-set sizes.

    ``None`` fields are filled with family defaults at construction.
    """

    family: str = "double_peak"
    d1: int = 7
    nx: int = 50
    nv_high: int = 16
    nv_low: int = 8
    v_extent: float = 8.4
    dt: float | None = None
    t_final: float | None = None
    epsilon: float = 1e-4
    eps_profile: str | None = None
    boundary: str | None = None
    n_train: int = 200
    n_test: int = 100
    seed: int = 0
    n_sigma: int = 32
    block_scaling: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown scenario family {self.family!r}")
        if self.d1 < 1:
            raise ConfigError("d1 must be positive")
        if self.dt is None:
            object.__setattr__(self, "dt", DT_OVER_DX / self.nx)
        if self.t_final is None:
            object.__setattr__(self, "t_final", 0.15 if self.family == "sod" else 0.1)
        if self.eps_profile is None:
            object.__setattr__(self, "eps_profile", "mixed" if self.family == "mixed_regime" else "constant")
        if self.boundary is None:
            object.__setattr__(self, "boundary", "zero-gradient" if self.family == "sod" else "periodic")
        if self.family == "mixed_regime" and self.eps_profile != "mixed":
            raise ConfigError("mixed_regime requires the mixed Knudsen profile")
        if self.eps_profile not in ("constant", "mixed"):
            raise ConfigError(f"unknown eps_profile {self.eps_profile!r}")
        if not (self.dt > 0 and self.t_final > 0 and self.epsilon > 0):
            raise ConfigError("dt, t_final and epsilon must be positive")
        cfl = self.dt * self.v_extent / (1.0 / self.nx)
        if cfl >= 1.0:
            raise ConfigError(f"CFL guard violated: dt * L_v / dx = {cfl:.3f} >= 1")

    @classmethod
    def paper_scale(cls, family: str, **overrides) -> "ScenarioConfig":
        nv = {"double_peak": (16, 8), "sod": (24, 12), "mixed_regime": (16, 8)}[family]
        base = dict(family=family, nx=100, dt=8e-4, nv_high=nv[0], nv_low=nv[1], n_train=1000, n_test=1000)
        base.update(overrides)
        return cls(**base)

    @property
    def dim(self) -> int:
        return 2 * self.d1 + 1

    def layout(self) -> dict:
        d1 = self.d1
        if self.family == "sod":
            return {"b": slice(0, d1 + 1), "T": slice(d1 + 1, 2 * d1 + 1)}
        return {"rho": slice(0, d1), "T": slice(d1, 2 * d1), "b": slice(2 * d1, 2 * d1 + 1)}

    def high_grid(self) -> PhaseGrid:
        return PhaseGrid(self.nx, self.nv_high, self.v_extent, self.boundary)

    def low_grid(self) -> PhaseGrid:
        return PhaseGrid(self.nx, self.nv_low, self.v_extent, self.boundary)

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def _as_vector(z, dim: int | None = None) -> np.ndarray:
    arr = z.array if isinstance(z, ParameterSample) else np.asarray(z, dtype=float)
    if arr.ndim != 1 or arr.size % 2 != 1:
        raise BlockLayoutMismatch(f"parameter vector of length {arr.size} fits no block layout")
    if dim is not None and arr.size != dim:
        raise BlockLayoutMismatch(f"expected {dim} parameters, got {arr.size}")
    if np.any(np.abs(arr) > 1.0):
        raise BlockLayoutMismatch("parameters must lie in [-1, 1]")
    return arr


def split_blocks(family: str, z) -> dict:
    arr = _as_vector(z)
    d1 = (arr.size - 1) // 2
    if family == "sod":
        return {"b": arr[: d1 + 1], "T": arr[d1 + 1:]}
    if family in ("double_peak", "mixed_regime"):
        return {"rho": arr[:d1], "T": arr[d1: 2 * d1], "b": arr[2 * d1:]}
    raise ConfigError(f"unknown scenario family {family!r}")


def double_peak_profiles(x, z_rho, z_T):
    """Initial density and temperature of the double-peak data at points ``x``."""
    x = np.asarray(x, dtype=float)
    k = np.arange(1, len(z_rho) + 1)
    modes = 2.0 * np.pi * np.multiply.outer(x, k + 1)
    rho = (2.0 + np.sin(2 * np.pi * x) + 0.2 * np.sin(modes) @ (np.asarray(z_rho) / (2 * k))) / 3.0
    k = np.arange(1, len(z_T) + 1)
    modes = 2.0 * np.pi * np.multiply.outer(x, k + 1)
    T = (3.0 + np.cos(2 * np.pi * x) + 0.2 * np.cos(modes) @ (np.asarray(z_T) / (2 * k))) / 4.0
    return rho, T


def sod_states(z_T):
    """Left and right (rho, T) of the shock tube."""
    k = np.arange(1, len(z_T) + 1)
    T_left = 1.0 + 0.4 * np.sum(np.asarray(z_T) / (2 * k))
    return (1.0, T_left), (0.125, T_left / 8.0)


def initial_distribution(family: str, z, grid: PhaseGrid) -> DistributionField:
    blocks = split_blocks(family, z)
    x = grid.x_centers
    if family == "sod":
        (rl, tl), (rr, tr) = sod_states(blocks["T"])
        left = x <= 0.5
        rho = np.where(left, rl, rr)
        T = np.where(left, tl, tr)
        f = maxwellian(rho, np.zeros((grid.x_count, 2)), T, grid)
    else:
        rho, T = double_peak_profiles(x, blocks["rho"], blocks["T"])
        u0 = np.broadcast_to(np.asarray(DOUBLE_PEAK_DRIFT), (grid.x_count, 2))
        f = 0.5 * (maxwellian(rho, u0, T, grid) + maxwellian(rho, -u0, T, grid))
    return DistributionField(f, 0.0)


def initial_macro(family: str, z, grid: PhaseGrid) -> MacroField:
    """Moments of the initial distribution on ``grid``; shared by both fidelities."""
    return moments(initial_distribution(family, z, grid), grid)


def kernel_amplitude(family: str, z) -> float:
    zb = split_blocks(family, z)["b"]
    if family == "sod":
        k = np.arange(1, len(zb) + 1)
        return float(1.0 + 0.5 * np.sum(zb / (2 * k)))
    return float(1.0 + 0.5 * zb[0])


def mixed_knudsen(x):
    x = np.asarray(x, dtype=float)
    return 1e-3 + 0.5 * (np.tanh(1.0 - 5.5 * (x - 0.5)) + np.tanh(1.0 + 5.5 * (x - 0.5)))


def epsilon_profile(cfg: ScenarioConfig, grid: PhaseGrid) -> np.ndarray:
    if cfg.eps_profile == "mixed":
        return mixed_knudsen(grid.x_centers)
    return np.full(grid.x_count, float(cfg.epsilon))


def _stream_key(seed: int, stream: str) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(STREAMS[stream],))
    return ss.generate_state(2, dtype=np.uint64)


def sample_z(seed: int, stream: str, index: int, dim: int) -> np.ndarray:
    """i.i.d. uniform point on [-1, 1]^dim addressed by (seed, stream, index).

    Philox is counter based: the sample index selects a counter block, so any
    subset of samples can be generated in any order.
    """
    bitgen = np.random.Philox(key=_stream_key(seed, stream), counter=[0, int(index), 0, 0])
    return np.random.Generator(bitgen).uniform(-1.0, 1.0, size=dim)


def draw_samples(cfg: ScenarioConfig, count: int, seed: int | None = None, stream: str = "train") -> list:
    if count < 1:
        raise ValueError("count must be at least 1")
    if stream not in STREAMS:
        raise ValueError(f"unknown stream {stream!r}")
    seed = cfg.seed if seed is None else seed
    return [
        ParameterSample(f"{stream}-{i:05d}", tuple(float(v) for v in sample_z(seed, stream, i, cfg.dim)))
        for i in range(count)
    ]
