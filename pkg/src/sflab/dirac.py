"""Finite-difference realization of ``D_A = d/dt + A(t)`` on ``[-T, T]``.

``d_matrix = D_t (x) I_n + blockdiag(A(t_k))``. For the index, the trace
formula and ``xi(.; H_2, H_1)`` the operators

    H_1 = D_1^T D_1,   D_1 = D_A on grid functions vanishing at both ends,
    H_2 = D_2 D_2^T,   D_2^T = D_A^* on grid functions vanishing at both ends,

are used. ``d_matrix`` itself is square, so its Gram pair ``D^T D``, ``D D^T``
is isospectral and carries no index; the Dirichlet realizations remove the
boundary-localized mode that pairs up with each genuine kernel mode.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .matlin import SymOp
from .oppath import OperatorPath, a_of, asymptote_plus
from .ssf import StepFunction, _counting_difference, gz_trace_diff

log = logging.getLogger(__name__)

MAX_SIZE = 6000
UPWIND, SPECTRAL = "upwind", "spectral-periodic"
DIRICHLET, PERIODIC = "dirichlet", "periodic"


class IndexResolutionError(RuntimeError):
    def __init__(self, gap_ratio: float):
        self.gap_ratio = gap_ratio
        super().__init__(f"index not resolved at this resolution (gap ratio {gap_ratio:.3g} < 100)")


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int

    def __post_init__(self):
        if self.N < 8:
            raise ValueError("TimeGrid needs N >= 8")
        if not self.T > 0:
            raise ValueError("TimeGrid needs T > 0")

    @property
    def h(self) -> float:
        return 2.0 * self.T / (self.N - 1)

    @property
    def nodes(self) -> np.ndarray:
        return -self.T + self.h * np.arange(self.N)


def difference_matrix(grid: TimeGrid, scheme: str = UPWIND, boundary: str = DIRICHLET) -> np.ndarray:
    n, h = grid.N, grid.h
    if scheme == UPWIND:
        d = (np.eye(n) - np.eye(n, k=-1)) / h
        if boundary == PERIODIC:
            d[0, -1] = -1.0 / h
        elif boundary != DIRICHLET:
            raise ValueError(f"unknown boundary {boundary!r}")
        return d
    if scheme == SPECTRAL:
        if boundary != PERIODIC:
            raise ValueError("the spectral scheme is periodic only")
        # Fourier differentiation on the period N*h; Nyquist mode differentiates to 0
        k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        if n % 2 == 0:
            k[n // 2] = 0.0
        return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0))
    raise ValueError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True, eq=False)
class DiracDiscretization:
    grid: TimeGrid
    n: int
    d_matrix: np.ndarray
    scheme: str = UPWIND
    boundary: str = DIRICHLET
    a_nodes: tuple = field(default=(), repr=False)

    @property
    def size(self) -> int:
        return self.grid.N * self.n

    @cached_property
    def gram(self) -> tuple[np.ndarray, np.ndarray]:
        """``(D^T D, D D^T)`` for ``D = d_matrix``."""
        d = self.d_matrix
        return d.T @ d, d @ d.T

    @cached_property
    def h_pair(self) -> tuple[np.ndarray, np.ndarray]:
        """``(H_1, H_2)`` used for index, traces and ``xi_H``."""
        if self.boundary == PERIODIC:
            return self.gram
        d, n = self.d_matrix, self.n
        d1 = d[:, :-n]
        d2 = d[n:, :]
        return d1.T @ d1, d2 @ d2.T

    @cached_property
    def h_spectra(self) -> tuple[np.ndarray, np.ndarray]:
        h1, h2 = self.h_pair
        return np.linalg.eigvalsh(h1), np.linalg.eigvalsh(h2)


def build_dirac(path: OperatorPath, grid: TimeGrid, scheme: str = UPWIND,
                boundary: str = DIRICHLET) -> DiracDiscretization:
    n = path.dim
    size = grid.N * n
    if size > MAX_SIZE:
        raise MemoryError(f"discretization of size {size} = {grid.N} x {n} exceeds {MAX_SIZE}")
    if grid.T < path.support_hint:
        log.warning("T=%g is below the path support hint %g", grid.T, path.support_hint)
    dt = difference_matrix(grid, scheme, boundary)
    a_nodes = tuple(a_of(path, float(t)).entries for t in grid.nodes)
    d = np.kron(dt, np.eye(n))
    for k, a in enumerate(a_nodes):
        d[k * n:(k + 1) * n, k * n:(k + 1) * n] += a
    return DiracDiscretization(grid, n, d, scheme, boundary, a_nodes)


def _kernel_count(eigs: np.ndarray, tol_factor: float) -> tuple[int, float, float]:
    """Near-zero count, threshold and gap ratio for one nonnegative spectrum."""
    scale = max(float(np.max(np.abs(eigs))), 1.0)
    floor = 1e3 * np.finfo(float).eps * scale
    pos = eigs[eigs > floor]
    tau2 = tol_factor * float(np.median(pos)) if pos.size else floor
    accepted = eigs[eigs < tau2]
    rest = eigs[eigs >= tau2]
    if rest.size == 0:
        return accepted.size, tau2, math.inf
    top = max(float(np.max(accepted)), floor) if accepted.size else tau2
    return accepted.size, tau2, float(rest[0]) / top


def index_report(dd: DiracDiscretization, tol_factor: float = 1e-6) -> dict:
    e1, e2 = dd.h_spectra
    k1, tau1, r1 = _kernel_count(e1, tol_factor)
    k2, tau2, r2 = _kernel_count(e2, tol_factor)
    return {"index": k1 - k2, "kernel_h1": k1, "kernel_h2": k2,
            "tau2_h1": tau1, "tau2_h2": tau2, "gap_ratio": min(r1, r2)}


def numeric_index(dd: DiracDiscretization, tol_factor: float = 1e-6) -> int:
    """``dim ker H_1 - dim ker H_2`` counted below ``tau^2 = tol_factor * median``.

    Raises :class:`IndexResolutionError` unless the accepted kernel modes sit
    a factor 100 below the rest of the spectrum.
    """
    rep = index_report(dd, tol_factor)
    if rep["gap_ratio"] < 100:
        raise IndexResolutionError(rep["gap_ratio"])
    return rep["index"]


def resolvent_trace_diff(dd: DiracDiscretization, z: complex) -> complex:
    """``tr((H_2 - z)^{-1} - (H_1 - z)^{-1})`` from the cached spectra."""
    z = complex(z)
    e1, e2 = dd.h_spectra
    dist = min(np.min(np.abs(e1 - z)), np.min(np.abs(e2 - z)))
    if dist <= 1e-12 * (1.0 + abs(z)):
        raise ValueError(f"z={z} lies on the spectrum of H_1 or H_2")
    return complex(np.sum(1.0 / (e2 - z)) - np.sum(1.0 / (e1 - z)))


def trace_formula_rhs(path: OperatorPath, z: complex) -> complex:
    z = complex(z)
    return gz_trace_diff(asymptote_plus(path), path.a_minus, z) / (2 * z)


def trace_formula_residual(path: OperatorPath, grid: TimeGrid, z: complex,
                           dd: DiracDiscretization | None = None) -> float:
    if dd is None:
        dd = build_dirac(path, grid)
    return abs(resolvent_trace_diff(dd, z) - trace_formula_rhs(path, z))


def xi_H_counting(dd: DiracDiscretization) -> StepFunction:
    """``N_{H_1}(lam) - N_{H_2}(lam)``; zero for ``lam < 0``."""
    e1, e2 = dd.h_spectra
    return _counting_difference(np.clip(e1, 0.0, None), np.clip(e2, 0.0, None))


def xi_H_median(dd: DiracDiscretization, gap: float, samples: int = 201) -> float:
    """Median of ``xi_H`` over ``(0.1 gap^2, 0.9 gap^2)``."""
    lam = np.linspace(0.1 * gap**2, 0.9 * gap**2, samples)
    return float(np.median(xi_H_counting(dd)(lam)))


def _second_difference(grid: TimeGrid) -> np.ndarray:
    n, h = grid.N, grid.h
    return (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2


def r0_kernel_residual(a_minus: SymOp, grid: TimeGrid, z: complex, collar: float | None = None,
                       relative: bool = False) -> float:
    """Max-norm gap between ``(H_0 - z)^{-1}`` and ``h * R_0`` at node pairs.

    ``H_0 = -d^2/dt^2 + A_-^2`` with central differences and Dirichlet ends.
    Nodes within ``collar`` (default ``2 / kappa_min``) of either end are
    excluded. ``relative=True`` compares ``(H_0 - z)^{-1} / h`` with ``R_0``.
    """
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise ValueError("z must lie off [0, inf)")
    n = a_minus.dim
    h = grid.h
    kappa = np.sqrt(a_minus.spectrum.astype(complex) ** 2 - z)
    if collar is None:
        collar = 2.0 / float(np.min(kappa.real))
    h0 = np.kron(_second_difference(grid), np.eye(n)) + np.kron(np.eye(grid.N), a_minus.entries @ a_minus.entries)
    inv = np.linalg.inv(h0 - z * np.eye(grid.N * n))
    t = grid.nodes
    keep = np.flatnonzero(np.abs(t) <= grid.T - collar)
    if keep.size == 0:
        raise ValueError("collar removes every node")
    dist = np.abs(t[keep][:, None] - t[keep][None, :])
    v = a_minus.basis
    kern = sum(
        np.kron(0.5 * np.exp(-kc * dist) / kc, np.outer(v[:, c], v[:, c]))
        for c, kc in enumerate(kappa)
    )
    idx = (keep[:, None] * n + np.arange(n)[None, :]).ravel()
    blk = inv[np.ix_(idx, idx)]
    diff = blk / h - kern if relative else blk - h * kern
    return float(np.max(np.abs(diff)))


def spectrum_line_check(a_minus: SymOp, grid: TimeGrid) -> float:
    """Distance of the real parts of ``sigma(D_{A_-})`` from ``sigma(A_-)``.

    The constant-coefficient periodic operator is block circulant; the
    discrete Fourier transform of its first block column gives the ``n x n``
    symbols whose eigenvalues make up the spectrum.
    """
    from .oppath import constant_path

    dd = build_dirac(constant_path(a_minus.entries, support_hint=0.0), grid, SPECTRAL, PERIODIC)
    n, N = dd.n, grid.N
    col = dd.d_matrix[:, :n].reshape(N, n, n)
    symbols = np.fft.fft(col, axis=0)
    eig = np.concatenate([np.linalg.eigvals(s) for s in symbols])
    dist = np.min(np.abs(eig.real[:, None] - a_minus.spectrum[None, :]), axis=1)
    return float(np.max(dist))


# -- diagnostic dumps --------------------------------------------------------

_MAGIC = b"DIRM"


def write_dirm(path, matrix) -> None:
    """Dense little-endian float64 dump with a 16-byte header."""
    m = np.ascontiguousarray(matrix, dtype="<f8")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", rows, cols) + b"\0" * 4)
        fh.write(m.tobytes(order="C"))


def read_dirm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError("not a DIRM file")
    rows, cols = struct.unpack("<II", raw[4:12])
    return np.frombuffer(raw[16:], dtype="<f8", count=rows * cols).reshape(rows, cols).copy()
