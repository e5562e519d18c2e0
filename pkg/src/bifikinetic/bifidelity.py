"""Greedy point selection and Gramian-projection reconstruction.

Offline: the cheap model is run on every training point, the greedy search
picks the points whose snapshots are farthest from the span of those
already chosen, and the expensive model is run only there.  Online: the
cheap model at a new point gives projection coefficients that are applied
to the stored expensive snapshots.

Vectors concatenate (rho, u1, T) over the cells; inner products are
``dx * sum(a * b)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceedsRank, IdMismatch, SampleMismatch
from .phase_space import MacroField

log = logging.getLogger(__name__)

QUANTITIES = ("rho", "u1", "T")
GRAMIAN_CUTOFF = 1e-12


@dataclass(frozen=True)
class Snapshot:
    id: str
    vector: np.ndarray
    fidelity: str = "low"

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if v.ndim != 1 or v.size % 3:
            raise ValueError("snapshot vector must be 1-D with length 3 * N_x")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"snapshot {self.id} has non-finite entries")
        object.__setattr__(self, "vector", v)

    @classmethod
    def from_macro(cls, id: str, W: MacroField, fidelity: str = "low", scales=None) -> "Snapshot":
        return cls(id, field_vector(W, scales), fidelity)

    @property
    def cells(self) -> int:
        return self.vector.size // 3


def field_vector(W: MacroField, scales=None) -> np.ndarray:
    """Concatenate (rho, u1, T), optionally dividing each block by a scale."""
    blocks = [W.rho, W.u1, W.T]
    if scales is not None:
        blocks = [b / s for b, s in zip(blocks, scales)]
    return np.concatenate(blocks)


def split_vector(v: np.ndarray, scales=None) -> dict:
    parts = np.split(np.asarray(v, dtype=float), 3)
    if scales is not None:
        parts = [p * s for p, s in zip(parts, scales)]
    return dict(zip(QUANTITIES, parts))


@dataclass
class SelectionResult:
    ids: list
    indices: list
    residuals: np.ndarray
    basis: np.ndarray
    early_stop: bool = False

    def prefix(self, r: int) -> "SelectionResult":
        r = min(r, len(self.ids))
        return SelectionResult(self.ids[:r], self.indices[:r], self.residuals[:r], self.basis[:r], self.early_stop)


def greedy_select(snapshots, budget: int, dx: float, require_exact: bool = False, tol: float = 1e-12) -> SelectionResult:
    """Pick up to ``budget`` snapshots by maximal residual against the chosen span.

    Residuals are kept up to date by modified Gram-Schmidt with one extra
    re-orthogonalization pass per new basis vector.  The search stops early
    once the largest residual drops below ``tol`` times the largest
    snapshot norm.
    """
    snapshots = list(snapshots)
    if budget < 1:
        raise ValueError("budget must be at least 1")
    if budget > len(snapshots):
        raise ValueError(f"budget {budget} exceeds the {len(snapshots)} available snapshots")
    A = np.stack([s.vector for s in snapshots]) * np.sqrt(dx)
    R = A.copy()
    norms = np.linalg.norm(R, axis=1)
    floor = tol * norms.max()
    chosen, residuals, basis = [], [], []
    available = np.ones(len(snapshots), dtype=bool)
    last = np.inf
    early = False
    for _ in range(budget):
        dist = np.where(available, norms, -1.0)
        k = int(np.argmax(dist))
        d = min(float(dist[k]), last)
        if d <= floor:
            early = True
            break
        q = R[k] / np.linalg.norm(R[k])
        for b in basis:
            q -= (b @ q) * b
        q /= np.linalg.norm(q)
        basis.append(q)
        chosen.append(k)
        residuals.append(d)
        last = d
        available[k] = False
        R -= np.outer(R @ q, q)
        norms = np.minimum(np.linalg.norm(R, axis=1), norms)
    if early:
        log.info("greedy selection stopped at %d of %d points", len(chosen), budget)
        if require_exact:
            raise BudgetExceedsRank(f"snapshot set has numerical rank {len(chosen)} < budget {budget}")
    return SelectionResult(
        [snapshots[i].id for i in chosen],
        chosen,
        np.asarray(residuals),
        np.asarray(basis).reshape(len(basis), A.shape[1]) / np.sqrt(dx),
        early,
    )


@dataclass
class BiFidelitySurrogate:
    selection: SelectionResult
    low: np.ndarray
    high: np.ndarray
    dx: float
    scales: tuple | None = None
    gramian: np.ndarray = field(init=False)
    eigvals: np.ndarray = field(init=False)
    eigvecs: np.ndarray = field(init=False)
    rank: int = field(init=False)

    def __post_init__(self):
        self.gramian = self.dx * self.low @ self.low.T
        w, V = np.linalg.eigh(self.gramian)
        keep = w > GRAMIAN_CUTOFF * max(w.max(), 0.0)
        self.eigvals = w[keep]
        self.eigvecs = V[:, keep]
        self.rank = int(keep.sum())

    @property
    def ids(self) -> list:
        return self.selection.ids

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def truncation_active(self) -> bool:
        return self.rank < self.size

    @property
    def condition_number(self) -> float:
        w = np.linalg.eigvalsh(self.gramian)
        return float(w.max() / w.min()) if w.min() > 0 else float("inf")

    def factor_error(self) -> float:
        approx = (self.eigvecs * self.eigvals) @ self.eigvecs.T
        return float(np.max(np.abs(approx - self.gramian)))

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return self.eigvecs @ ((self.eigvecs.T @ rhs) / self.eigvals)

    def coefficients(self, low_vector: np.ndarray) -> np.ndarray:
        return self.solve(self.dx * self.low @ np.asarray(low_vector, dtype=float))

    def prefix(self, r: int) -> "BiFidelitySurrogate":
        """Surrogate built from the first ``r`` selected points."""
        return BiFidelitySurrogate(self.selection.prefix(r), self.low[:r], self.high[:r], self.dx, self.scales)

    def high_gramian(self) -> np.ndarray:
        return self.dx * self.high @ self.high.T


def assemble_surrogate(selection: SelectionResult, low_snaps, high_snaps, dx: float, scales=None) -> BiFidelitySurrogate:
    low_snaps, high_snaps = list(low_snaps), list(high_snaps)
    for name, snaps in (("low", low_snaps), ("high", high_snaps)):
        ids = [s.id for s in snaps]
        if ids != list(selection.ids):
            raise IdMismatch(f"{name}-fidelity snapshots {ids} do not match selection {selection.ids}")
    return BiFidelitySurrogate(
        selection,
        np.stack([s.vector for s in low_snaps]),
        np.stack([s.vector for s in high_snaps]),
        dx,
        scales,
    )


@dataclass(frozen=True)
class Reconstruction:
    coefficients: np.ndarray
    vector: np.ndarray
    low_vector: np.ndarray
    low_residual: float
    scales: tuple | None = None

    def fields(self) -> dict:
        return split_vector(self.vector, self.scales)

    def low_fields(self) -> dict:
        return split_vector(self.low_vector, self.scales)


def reconstruct(surrogate: BiFidelitySurrogate, z, low_runner) -> Reconstruction:
    """Bi-fidelity estimate at ``z``; ``low_runner(z)`` returns the cheap MacroField."""
    low = field_vector(low_runner(z), surrogate.scales)
    return reconstruct_from_low(surrogate, low)


def reconstruct_from_low(surrogate: BiFidelitySurrogate, low: np.ndarray) -> Reconstruction:
    c = surrogate.coefficients(low)
    resid = low - c @ surrogate.low
    return Reconstruction(
        c, c @ surrogate.high, low, float(np.sqrt(surrogate.dx * resid @ resid)), surrogate.scales
    )


def l2_norm(a, dx: float) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(dx * np.sum(a * a)))


def mean_l2_error(reference, approx, dx: float) -> dict:
    """Mean over samples of the per-quantity L2(x) error.

    Both arguments map sample id -> dict with keys rho, u1, T (arrays over
    cells).  Ids must match exactly.
    """
    if set(reference) != set(approx):
        missing = sorted(set(reference) ^ set(approx))
        raise SampleMismatch(f"sample sets differ: {missing[:5]}")
    if not reference:
        raise SampleMismatch("empty sample set")
    ids = sorted(reference)
    return {
        q: float(np.mean([l2_norm(np.asarray(reference[i][q]) - np.asarray(approx[i][q]), dx) for i in ids]))
        for q in QUANTITIES
    }
