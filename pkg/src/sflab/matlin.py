"""Dense symmetric linear algebra: spectral decompositions, matrix functions,
log-determinants and eigenvalue counting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import warnings

import numpy as np
import scipy.linalg

SYM_RTOL = 1e-12


class SymmetryError(ValueError):
    """Input matrix is not symmetric within tolerance."""

    def __init__(self, asymmetry: float, scale: float):
        self.asymmetry = asymmetry
        super().__init__(
            f"matrix is not symmetric: max|M - M^T| = {asymmetry:.3e} "
            f"(scale {scale:.3e})"
        )


class SpectralDomainError(ValueError):
    """Scalar function is undefined at an eigenvalue."""

    def __init__(self, eigenvalue: float, message: str = ""):
        self.eigenvalue = eigenvalue
        super().__init__(message or f"function undefined at eigenvalue {eigenvalue!r}")


class SingularMatrixError(ValueError):
    def __init__(self, pivot: float):
        self.pivot = pivot
        super().__init__(f"matrix is singular: smallest pivot magnitude {pivot:.3e}")


@dataclass(frozen=True, eq=False)
class SymOp:
    """Real symmetric matrix together with its orthonormal eigenbasis.

    ``basis[:, j]`` is the eigenvector for ``spectrum[j]``; the spectrum is
    ascending.
    """

    entries: np.ndarray
    spectrum: np.ndarray
    basis: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.entries.shape[0])
        for arr in (self.entries, self.spectrum, self.basis):
            arr.setflags(write=False)

    def __repr__(self):
        return f"SymOp(dim={self.dim}, spectrum={np.array2string(self.spectrum, precision=4)})"

    @property
    def norm(self) -> float:
        """Operator norm."""
        return float(np.max(np.abs(self.spectrum))) if self.dim else 0.0

    def projection(self, predicate: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Spectral projection onto eigenvalues where ``predicate`` is true."""
        keep = predicate(self.spectrum)
        v = self.basis[:, keep]
        return v @ v.T


def asymmetry(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.T))) if m.size else 0.0


def check_symmetric(m: np.ndarray, rtol: float = SYM_RTOL) -> None:
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    defect = asymmetry(m)
    if defect > rtol * scale:
        raise SymmetryError(defect, scale)


def eig_sym(m, rtol: float = SYM_RTOL) -> SymOp:
    """Spectral decomposition of a real symmetric matrix.

    Raises :class:`SymmetryError` if ``m`` is not symmetric to relative
    tolerance ``rtol`` and ``numpy.linalg.LinAlgError`` if LAPACK fails to
    converge.
    """
    m = np.array(m, dtype=float, copy=True)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    check_symmetric(m, rtol)
    # symmetrize so the decomposition reproduces the stored entries
    m = 0.5 * (m + m.T)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigh failed to converge (n={m.shape[0]}): {exc}") from exc
    return SymOp(m, w, v)


def apply_fn(a: SymOp, f: Callable) -> np.ndarray:
    """Return ``V f(Lambda) V^T``.

    ``f`` is applied to the eigenvalue array; it may return real or complex
    values. A non-finite value raises :class:`SpectralDomainError` naming the
    first offending eigenvalue.
    """
    with np.errstate(all="ignore"):
        fv = np.asarray(f(a.spectrum))
    if fv.shape == ():
        fv = np.full(a.dim, fv.item())
    bad = ~np.isfinite(fv)
    if np.any(bad):
        raise SpectralDomainError(float(a.spectrum[np.argmax(bad)]))
    v = a.basis
    out = (v * fv) @ v.T
    if not np.iscomplexobj(out):
        out = 0.5 * (out + out.T)
    return out


def counting(a: SymOp, lam: float) -> int:
    """Number of eigenvalues ``<= lam``."""
    return int(np.searchsorted(a.spectrum, lam, side="right"))


def log_det(m) -> complex:
    """Principal logarithm of ``det(m)`` from a pivoted LU factorization.

    The real part is the sum of log pivot magnitudes; the imaginary part is
    the accumulated phase reduced to (-pi, pi].
    """
    m = np.asarray(m)
    if m.shape[0] == 0:
        return 0j
    with warnings.catch_warnings():
        # singularity is reported below with the pivot size
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=True)
    d = np.diag(lu)
    mags = np.abs(d)
    smallest = float(np.min(mags))
    scale = float(np.max(mags))
    if smallest == 0.0 or smallest < 1e-14 * scale:
        raise SingularMatrixError(smallest)
    swaps = int(np.count_nonzero(piv != np.arange(len(piv))))
    phase = float(np.sum(np.angle(d))) + np.pi * (swaps % 2)
    phase = -np.remainder(-phase + np.pi, 2 * np.pi) + np.pi
    return complex(float(np.sum(np.log(mags))), phase)


def trace_norm(m) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(m), compute_uv=False)))


def op_norm(m) -> float:
    m = np.asarray(m)
    return float(np.linalg.norm(m, 2)) if m.size else 0.0


def pairwise_sum(terms):
    """Deterministic pairwise reduction of a sequence of arrays."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty sum")
    while len(terms) > 1:
        nxt = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]
