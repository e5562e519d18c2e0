"""Quadratic collision operator Q(f, f) for the VHS kernel B = b |v - v*|^lambda.

Two evaluators are provided:

* :func:`collide_spectral` -- the Fourier mode-coupled form
  ``Q_k = sum_{l+m=k} beta(l, m) f_l f_m`` with weights precomputed once per
  lattice by :func:`precompute_spectral` (Maxwell molecules only).
* :func:`collide_direct` -- a slow physical-space quadrature over v* and the
  scattering angle, used as a test oracle.

The angular measure on S^1 has total mass 2 pi, so the Maxwell-molecule loss
term is ``2 pi b rho f``.
"""
from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import GridMismatch, GridTooLarge, UnsupportedExponent
from .phase_space import PhaseGrid, conserved_to_primitive, match_moments, maxwellian, moment_vector

DIRECT_MAX_NV = 32
CACHE_MAGIC = b"BFKSPEC"
CACHE_VERSION = 1


@dataclass(frozen=True)
class KernelSpec:
    b: float
    exponent: float = 0.0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("kernel amplitude b must be positive")
        if not (-2.0 < self.exponent <= 1.0):
            raise ValueError("VHS exponent must lie in (-d_v, 1]")


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """Precomputed mode-coupling weights for one lattice.

    ``modes`` lists the retained integer Fourier modes (the Nyquist mode in
    each direction is dropped so that the retained set is symmetric).
    ``weights[i, j]`` is beta(modes[i], modes[j]) for unit amplitude b.
    """

    v_count: int
    v_extent: float
    exponent: float
    n_sigma: int
    n_radial: int
    support_radius: float
    truncation_radius: float
    modes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        # per source mode m: the k-window (k1 >= 0 half only, real input is
        # Hermitian) and the matching weights beta(k - m, m)
        n = 2 * ((self.v_count - 1) // 2) + 1
        h = n // 2
        flat = (self.modes[:, 0] + h) * n + (self.modes[:, 1] + h)
        dense = np.zeros((n * n, n * n))
        dense[np.ix_(flat, flat)] = self.weights
        plan = []
        for j, (m1, m2) in enumerate(self.modes):
            a1, b1 = max(0, m1 - h), min(h, m1 + h)
            a2, b2 = max(-h, m2 - h), min(h, m2 + h)
            if a1 > b1:
                continue
            l1 = np.arange(a1, b1 + 1) - m1
            l2 = np.arange(a2, b2 + 1) - m2
            w = dense[(l1[:, None] + h) * n + (l2[None, :] + h), flat[j]]
            if np.any(w):
                plan.append((
                    flat[j],
                    slice(a1 + h, b1 + h + 1), slice(a2 + h, b2 + h + 1),
                    slice(l1[0] + h, l1[-1] + h + 1), slice(l2[0] + h, l2[-1] + h + 1),
                    w,
                ))
        object.__setattr__(self, "_plan", plan)

    def matches(self, grid: PhaseGrid) -> bool:
        return self.v_count == grid.v_count and self.v_extent == grid.v_extent

    @property
    def key(self) -> tuple:
        return (self.v_count, self.v_extent, self.exponent, self.n_sigma, self.n_radial)


def _angular_j0(arg: np.ndarray, n_sigma: int) -> np.ndarray:
    # (1/pi) int_0^pi cos(a cos psi) dpsi, midpoint rule on the half circle
    psi = np.pi * (np.arange(n_sigma) + 0.5) / n_sigma
    return np.cos(arg[..., None] * np.cos(psi)).mean(axis=-1)


def precompute_spectral(
    grid: PhaseGrid, exponent: float = 0.0, n_sigma: int = 32, n_radial: int | None = None
) -> SpectralKernel:
    """Mode-coupling weights for the periodized, truncated collision operator.

    With support radius ``S = 2 L_v / (3 + sqrt 2)`` and truncation
    ``R = 2 S``, for Maxwell molecules in two dimensions

        B(l, m) = 4 pi^2 int_0^R r J0(c r |l + m|) J0(c r |l - m|) dr,
        beta(l, m) = B(l, m) - B(m, m),       c = pi / (2 L_v).

    The Bessel factors come from the angular integrals (``n_sigma``-point
    midpoint rule on the half circle), the radial integral uses Gauss-Legendre.
    """
    if exponent != 0.0:
        raise UnsupportedExponent(f"spectral weights exist for exponent 0 only, got {exponent}")
    return _precompute_cached(grid.v_count, float(grid.v_extent), n_sigma, n_radial or max(64, 4 * grid.v_count))


@lru_cache(maxsize=16)
def _precompute_cached(v_count, v_extent, n_sigma, n_radial) -> SpectralKernel:
    S = 2.0 * v_extent / (3.0 + np.sqrt(2.0))
    R = 2.0 * S
    c = np.pi / (2.0 * v_extent)
    half = (v_count - 1) // 2
    k1d = np.arange(-half, half + 1)
    modes = np.stack(np.meshgrid(k1d, k1d, indexing="ij"), -1).reshape(-1, 2)

    x, w = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * R * (x + 1.0)
    wr = 0.5 * R * w * r

    lp = np.linalg.norm(modes[:, None, :] + modes[None, :, :], axis=-1)
    lm = np.linalg.norm(modes[:, None, :] - modes[None, :, :], axis=-1)
    # |l +- m|^2 is an integer, so exact keys for the unique radial profiles
    sq_p = np.rint(lp**2).astype(np.int64)
    sq_m = np.rint(lm**2).astype(np.int64)
    up, ip = np.unique(sq_p, return_inverse=True)
    um, im = np.unique(sq_m, return_inverse=True)
    jp = _angular_j0(c * np.sqrt(up)[:, None] * r[None, :], n_sigma)
    jm = _angular_j0(c * np.sqrt(um)[:, None] * r[None, :], n_sigma)
    table = 4.0 * np.pi**2 * np.einsum("q,pq,mq->pm", wr, jp, jm)
    gain = table[ip.reshape(lp.shape), im.reshape(lm.shape)]
    loss = np.diag(gain).copy()
    weights = gain - loss[None, :]
    return SpectralKernel(v_count, v_extent, 0.0, n_sigma, n_radial, S, R, modes, weights)


def _forward_modes(fv: np.ndarray, n_v: int) -> np.ndarray:
    fh = np.fft.fftshift(np.fft.fft2(fv, axes=(-2, -1)), axes=(-2, -1)) / n_v**2
    if n_v % 2 == 0:
        fh = fh[..., 1:, 1:]
    return fh.reshape(fh.shape[:-2] + (-1,))


def _inverse_modes(qh: np.ndarray, n_v: int) -> np.ndarray:
    n = 2 * ((n_v - 1) // 2) + 1
    q = qh.reshape(qh.shape[:-1] + (n, n))
    if n_v % 2 == 0:
        pad = [(0, 0)] * (q.ndim - 2) + [(1, 0), (1, 0)]
        q = np.pad(q, pad)
    return np.fft.ifft2(np.fft.ifftshift(q, axes=(-2, -1)), axes=(-2, -1)) * n_v**2


def collide_spectral_complex(fv: np.ndarray, sk: SpectralKernel, b: float = 1.0) -> np.ndarray:
    """Complex-valued spectral evaluation without conservation repair."""
    fv = np.asarray(fv, dtype=float)
    if fv.shape[-2:] != (sk.v_count, sk.v_count):
        raise GridMismatch(f"array lattice {fv.shape[-2:]} does not match kernel N_v={sk.v_count}")
    lead = fv.shape[:-2]
    fh = _forward_modes(fv.reshape((-1,) + fv.shape[-2:]), sk.v_count)
    n = 2 * ((sk.v_count - 1) // 2) + 1
    h = n // 2
    grid_modes = fh.reshape(-1, n, n)
    qh = np.zeros_like(grid_modes)
    for j, k1, k2, l1, l2, w in sk._plan:
        qh[:, k1, k2] += fh[:, j, None, None] * (w * grid_modes[:, l1, l2])
    qh[:, :h, :] = np.conj(qh[:, :h:-1, ::-1])
    q = _inverse_modes(qh.reshape(len(fh), -1), sk.v_count) * b
    return q.reshape(lead + q.shape[-2:])


def collide_spectral(
    fv: np.ndarray,
    sk: SpectralKernel,
    b: float,
    grid: PhaseGrid | None = None,
    repair: bool = True,
    weight: np.ndarray | None = None,
) -> np.ndarray:
    """Q(f, f) by the spectral method, scaled by amplitude ``b``.

    ``fv`` has shape (..., N_v, N_v); the leading axes are independent cells.
    With ``repair`` the small discrete moment defect is removed by the minimal
    correction ``Q -> Q - weight * (a + b.v + c|v|^2/2)``; ``weight`` defaults
    to the discrete Maxwellian of ``fv`` (or |fv| where that has no valid
    moments).
    """
    q = collide_spectral_complex(fv, sk, b).real
    if not repair:
        return q
    if grid is None:
        grid = PhaseGrid(1, sk.v_count, sk.v_extent)
    elif not sk.matches(grid):
        raise GridMismatch("spectral kernel built for a different lattice")
    if weight is None:
        weight = _repair_weight(np.asarray(fv, dtype=float), grid)
    return match_moments(q, weight, np.zeros(q.shape[:-2] + (4,)), grid)


def _repair_weight(fv: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    try:
        rho, u, T = conserved_to_primitive(moment_vector(fv, grid))
        return maxwellian(rho, u, T, grid)
    except ValueError:
        return np.abs(fv) + 1e-300


def _fourier_interpolant(fv: np.ndarray, grid: PhaseGrid):
    n_v = grid.v_count
    fh = np.fft.fftshift(np.fft.fft2(fv)) / n_v**2
    k = np.arange(n_v) - n_v // 2
    if n_v % 2 == 0:
        fh = fh[1:, 1:]
        k = k[1:]
    origin = grid.v_nodes[0]
    scale = np.pi / grid.v_extent
    L = grid.v_extent

    def evaluate(p1, p2):
        e1 = np.exp(1j * scale * np.multiply.outer(p1 - origin, k))
        e2 = np.exp(1j * scale * np.multiply.outer(p2 - origin, k))
        val = np.sum((e1 @ fh) * e2, axis=-1).real
        return np.where((np.abs(p1) <= L) & (np.abs(p2) <= L), val, 0.0)

    return evaluate


def _bilinear_interpolant(fv: np.ndarray, grid: PhaseGrid):
    from scipy.ndimage import map_coordinates

    h = grid.dv
    L = grid.v_extent

    def evaluate(p1, p2):
        c1 = (p1 + L) / h - 0.5
        c2 = (p2 + L) / h - 0.5
        val = map_coordinates(fv, [c1.ravel(), c2.ravel()], order=1, mode="constant", cval=0.0)
        return val.reshape(p1.shape)

    return evaluate


def collide_direct(
    fv: np.ndarray,
    kernel: KernelSpec,
    grid: PhaseGrid,
    n_sigma: int = 32,
    interpolation: str = "fourier",
) -> np.ndarray:
    """Direct quadrature of Q(f, f) at every lattice node (test oracle).

    For each node v: midpoint sum over lattice v*, ``n_sigma`` uniform
    scattering directions on S^1, post-collision values interpolated from the
    lattice (zero outside the box).  ``interpolation`` is ``"fourier"``
    (band-limited trigonometric interpolant) or ``"bilinear"``.
    Cost is O(N_v^4 n_sigma).
    """
    fv = np.asarray(fv, dtype=float)
    if grid.v_count > DIRECT_MAX_NV:
        raise GridTooLarge(f"direct quadrature limited to N_v <= {DIRECT_MAX_NV}")
    if n_sigma < 8:
        raise ValueError("n_sigma must be at least 8")
    if fv.shape != (grid.v_count, grid.v_count):
        raise GridMismatch("collide_direct evaluates a single velocity array")
    if interpolation == "fourier":
        interp = _fourier_interpolant(fv, grid)
    elif interpolation == "bilinear":
        interp = _bilinear_interpolant(fv, grid)
    else:
        raise ValueError(f"unknown interpolation {interpolation!r}")

    w = grid.dv**2
    v = np.stack([grid.v1.ravel(), grid.v2.ravel()], -1)
    f_flat = fv.ravel()
    psi = 2.0 * np.pi * np.arange(n_sigma) / n_sigma
    sig = np.stack([np.cos(psi), np.sin(psi)], -1)

    out = np.empty(len(v))
    for start in range(0, len(v), 64):
        vv = v[start:start + 64, None, :]
        centre = 0.5 * (vv + v[None, :, :])
        g = np.linalg.norm(vv - v[None, :, :], axis=-1)
        kern = kernel.b * np.where(g > 0, g, 1.0) ** kernel.exponent if kernel.exponent else kernel.b
        # v*'(sigma) = v'(-sigma); with even n_sigma, -sigma_j = sigma_{j + n/2}
        post = [interp(centre[..., 0] + 0.5 * g * s[0], centre[..., 1] + 0.5 * g * s[1]) for s in sig]
        if n_sigma % 2 == 0:
            gain = sum(post[j] * post[(j + n_sigma // 2) % n_sigma] for j in range(n_sigma))
        else:
            gain = sum(
                p * interp(centre[..., 0] - 0.5 * g * s[0], centre[..., 1] - 0.5 * g * s[1])
                for p, s in zip(post, sig)
            )
        gain = gain / n_sigma
        loss = f_flat[start:start + 64, None] * f_flat[None, :]
        out[start:start + 64] = 2.0 * np.pi * w * np.sum(kern * (gain - loss), axis=1)
    return out.reshape(fv.shape)


def penalty_beta(fv, Mv, Qv, fallback, floor: float = 1e-8) -> np.ndarray:
    """Per-cell penalty coefficient max |Q / (f - M)| over non-degenerate nodes.

    Nodes count only where ``|f - M| > floor * max|f|`` in that cell; a cell
    with no such node gets ``fallback``.  ``floor`` may be a scalar or one
    value per cell.
    """
    fv = np.asarray(fv, dtype=float)
    diff = fv - np.asarray(Mv, dtype=float)
    scale = np.max(np.abs(fv), axis=(-2, -1), keepdims=True)
    floor = np.asarray(floor, dtype=float)
    if floor.ndim:
        floor = floor[..., None, None]
    mask = np.abs(diff) > floor * scale
    ratio = np.where(mask, np.abs(np.asarray(Qv)) / np.where(mask, np.abs(diff), 1.0), 0.0)
    beta = np.max(ratio, axis=(-2, -1))
    has = np.any(mask, axis=(-2, -1))
    return np.where(has, beta, np.broadcast_to(np.asarray(fallback, dtype=float), beta.shape))


# ---- binary cache -------------------------------------------------------


def _cache_header(sk: SpectralKernel) -> dict:
    return {
        "version": CACHE_VERSION,
        "v_count": sk.v_count,
        "v_extent": sk.v_extent,
        "exponent": sk.exponent,
        "n_sigma": sk.n_sigma,
        "n_radial": sk.n_radial,
        "support_radius": sk.support_radius,
        "truncation_radius": sk.truncation_radius,
        "n_modes": int(len(sk.modes)),
    }


def cache_filename(v_count: int, v_extent: float, exponent: float, n_sigma: int) -> str:
    key = f"{v_count}-{v_extent!r}-{exponent!r}-{n_sigma}"
    return f"spectral-{hashlib.sha1(key.encode()).hexdigest()[:12]}.bin"


def save_spectral_kernel(sk: SpectralKernel, path) -> Path:
    path = Path(path)
    header = json.dumps(_cache_header(sk), sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(CACHE_MAGIC)
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    buf.write(np.ascontiguousarray(sk.modes, dtype="<i8").tobytes())
    buf.write(np.ascontiguousarray(sk.weights, dtype="<f8").tobytes())
    path.write_bytes(buf.getvalue())
    return path


def load_spectral_kernel(path) -> SpectralKernel:
    raw = Path(path).read_bytes()
    if not raw.startswith(CACHE_MAGIC):
        raise ValueError(f"{path}: not a spectral kernel cache file")
    pos = len(CACHE_MAGIC)
    (hlen,) = struct.unpack("<I", raw[pos:pos + 4])
    pos += 4
    header = json.loads(raw[pos:pos + hlen])
    pos += hlen
    if header["version"] != CACHE_VERSION:
        raise ValueError(f"{path}: cache version {header['version']} != {CACHE_VERSION}")
    n = header["n_modes"]
    modes = np.frombuffer(raw, dtype="<i8", count=2 * n, offset=pos).reshape(n, 2).astype(np.int64)
    pos += 16 * n
    weights = np.frombuffer(raw, dtype="<f8", count=n * n, offset=pos).reshape(n, n).copy()
    return SpectralKernel(
        header["v_count"], header["v_extent"], header["exponent"], header["n_sigma"],
        header["n_radial"], header["support_radius"], header["truncation_radius"], modes, weights,
    )


def cached_spectral_kernel(grid: PhaseGrid, cache_dir, n_sigma: int = 32) -> SpectralKernel:
    """Load the kernel for ``grid`` from ``cache_dir`` or compute and store it."""
    path = Path(cache_dir) / cache_filename(grid.v_count, grid.v_extent, 0.0, n_sigma)
    if path.exists():
        sk = load_spectral_kernel(path)
        if sk.matches(grid) and sk.n_sigma == n_sigma:
            return sk
    sk = precompute_spectral(grid, 0.0, n_sigma)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_spectral_kernel(sk, path)
    return sk
