"""Double operator integrals for ``g(x) = x (x^2 + 1)^{-1/2}``.

The divided difference of ``g`` weighted by ``(x^2 + 1)^{1/4}`` on both sides
splits into a kernel ``psi`` that is a function of
``log sqrt(lam^2 + 1) - log sqrt(mu^2 + 1)`` only, so ``T_psi`` is an
integral of conjugations by imaginary powers of ``A^2 + I`` against the
Fourier transform of ``zeta(x) = 1 / (2 cosh(x/2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matlin import SymOp, apply_fn, pairwise_sum, trace_norm


def zeta(x):
    return 1.0 / (np.exp(0.5 * x) + np.exp(-0.5 * x))


def zeta_hat(s):
    """Fourier transform ``int zeta(x) exp(-i s x) dx = pi sech(pi s)``."""
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore"):
        return np.pi / np.cosh(np.pi * s)


def psi_eval(lam, mu):
    a = np.sqrt(np.asarray(lam, dtype=float) ** 2 + 1.0)
    b = np.sqrt(np.asarray(mu, dtype=float) ** 2 + 1.0)
    return np.sqrt(a * b) / (a + b)


def _g(x):
    return x / np.sqrt(x * x + 1.0)


def _gprime(x):
    return (x * x + 1.0) ** -1.5


def phi_eval(lam, mu, diag_tol: float = 1e-6):
    """Weighted divided difference ``(g(l) - g(m)) / (a(l) (l - m) a(m))``, ``a = (x^2+1)^{-1/4}``.

    Near the diagonal the split form through ``psi`` is used, which has no
    cancellation.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    near = np.abs(lam - mu) < diag_tol
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (_g(lam) - _g(mu)) * ((lam**2 + 1) * (mu**2 + 1)) ** 0.25 / (lam - mu)
    return np.where(near, phi_split(lam, mu), direct)


def phi_split(lam, mu):
    """``psi + psi / (s(l) s(m)) - l psi m / (s(l) s(m))`` with ``s(x) = sqrt(x^2 + 1)``."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    p = psi_eval(lam, mu)
    w = 1.0 / np.sqrt((lam**2 + 1.0) * (mu**2 + 1.0))
    return p + p * w - lam * p * mu * w


@dataclass(frozen=True)
class DOIQuadrature:
    """Composite Gauss-Legendre rule on ``[-s_max, s_max]`` weighted by ``zeta_hat``."""

    s_max: float
    nodes: np.ndarray
    weights: np.ndarray
    zeta_hat_values: np.ndarray

    @classmethod
    def build(cls, s_max: float = 8.0, n_nodes: int = 400, panel_size: int = 20,
              tol: float = 1e-9) -> DOIQuadrature:
        if n_nodes % panel_size:
            raise ValueError("n_nodes must be a multiple of panel_size")
        if tail_bound(s_max) >= tol:
            raise ValueError(f"s_max={s_max} leaves a tail of {tail_bound(s_max):.2e} >= {tol:.1e}")
        x, w = np.polynomial.legendre.leggauss(panel_size)
        edges = np.linspace(-s_max, s_max, n_nodes // panel_size + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * np.diff(edges)
        nodes = (mids[:, None] + half[:, None] * x).ravel()
        weights = (half[:, None] * w).ravel()
        return cls(s_max, nodes, weights, zeta_hat(nodes))

    @classmethod
    def for_tolerance(cls, tol: float, n_nodes: int = 400) -> DOIQuadrature:
        # 2 pi sech(pi s) ~ 4 pi exp(-pi s)
        s_max = max(1.0, math.log(8 * math.pi / tol) / math.pi)
        return cls.build(float(math.ceil(s_max)), n_nodes, tol=tol)


def tail_bound(s_max: float) -> float:
    return 2.0 * float(zeta_hat(s_max))


def k_operator(a_plus: SymOp, a_minus: SymOp) -> np.ndarray:
    """``(A_+^2 + I)^{-1/4} (A_+ - A_-) (A_-^2 + I)^{-1/4}``."""
    if a_plus.dim != a_minus.dim:
        raise ValueError("dimension mismatch")
    qp = apply_fn(a_plus, lambda x: (x * x + 1.0) ** -0.25)
    qm = apply_fn(a_minus, lambda x: (x * x + 1.0) ** -0.25)
    return qp @ (a_plus.entries - a_minus.entries) @ qm


def _imag_power(a: SymOp, s: float) -> np.ndarray:
    """``(A^2 + I)^{i s / 2}``."""
    return apply_fn(a, lambda x: np.exp(0.5j * s * np.log(x * x + 1.0)))


def t_psi(a_plus: SymOp, a_minus: SymOp, k, quad: DOIQuadrature) -> np.ndarray:
    """``(1/2pi) int (A_+^2+I)^{is/2} K (A_-^2+I)^{-is/2} zeta_hat(s) ds``."""
    k = np.asarray(k)
    lp = 0.5 * np.log(a_plus.spectrum**2 + 1.0)
    lm = 0.5 * np.log(a_minus.spectrum**2 + 1.0)
    vp, vm = a_plus.basis, a_minus.basis
    kt = vp.T @ k @ vm
    terms = [
        (w * zh / (2 * np.pi)) * (np.exp(1j * s * lp)[:, None] * kt * np.exp(-1j * s * lm)[None, :])
        for s, w, zh in zip(quad.nodes, quad.weights, quad.zeta_hat_values)
    ]
    out = vp @ pairwise_sum(terms) @ vm.T
    if not np.iscomplexobj(k):
        out = out.real
    return out


def t_phi(a_plus: SymOp, a_minus: SymOp, k, quad: DOIQuadrature) -> np.ndarray:
    """``T_psi(K) + s_+^{-1} T_psi(K) s_-^{-1} - g(A_+) T_psi(K) g(A_-)``."""
    tp = t_psi(a_plus, a_minus, k, quad)
    ip = apply_fn(a_plus, lambda x: (x * x + 1.0) ** -0.5)
    im = apply_fn(a_minus, lambda x: (x * x + 1.0) ** -0.5)
    gp = apply_fn(a_plus, _g)
    gm = apply_fn(a_minus, _g)
    return tp + ip @ tp @ im - gp @ tp @ gm


def g_diff_via_doi(a_plus: SymOp, a_minus: SymOp, tol: float = 1e-9,
                   quad: DOIQuadrature | None = None) -> tuple[np.ndarray, float]:
    """``T_phi(K)`` and its trace-norm distance to ``g(A_+) - g(A_-)``."""
    if tol < 1e-10:
        raise ValueError("tol must be >= 1e-10")
    if quad is None:
        quad = DOIQuadrature.build(tol=max(tol, 1e-10))
    tk = t_phi(a_plus, a_minus, k_operator(a_plus, a_minus), quad)
    direct = apply_fn(a_plus, _g) - apply_fn(a_minus, _g)
    return tk, trace_norm(tk - direct)


def schur_psi(a_plus: SymOp, a_minus: SymOp, k) -> np.ndarray:
    """Exact ``T_psi(K)`` as an entrywise multiplier in the two eigenbases."""
    vp, vm = a_plus.basis, a_minus.basis
    kt = vp.T @ np.asarray(k) @ vm
    return vp @ (psi_eval(a_plus.spectrum[:, None], a_minus.spectrum[None, :]) * kt) @ vm.T
