"""Abel-type transform of spectral shift functions, eta invariants, and the
special functions they need (K_0, Whittaker W)."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import integrate, special

from .ssf import StepFunction

_QUAD = dict(epsabs=1e-14, epsrel=1e-12, limit=400)


# -- special functions -------------------------------------------------------


def gamma(x: float) -> float:
    return math.gamma(x)


def bessel_k0(x: float) -> float:
    """Modified Bessel function of the second kind, order zero."""
    if not x > 0:
        raise ValueError(f"K0 requires x > 0, got {x!r}")
    return float(special.k0(x))


def whittaker_w(kappa: float, mu: float, z: float) -> float:
    """``W_{kappa,mu}(z)`` from its Laplace-type integral, ``mu - kappa + 1/2 > 0``.

    ``W = e^{-z/2} z^{mu+1/2} / Gamma(mu-kappa+1/2) int_0^inf e^{-zt} t^{mu-kappa-1/2} (1+t)^{mu+kappa-1/2} dt``.
    With ``mu - kappa = 0`` the substitution ``t = u^2`` removes the endpoint
    singularity.
    """
    if not z > 0:
        raise ValueError(f"W requires z > 0, got {z!r}")
    a = mu - kappa + 0.5
    if a <= 0:
        raise ValueError("integral representation needs mu - kappa + 1/2 > 0")
    b = mu + kappa - 0.5
    if mu == kappa:
        val, _ = integrate.quad(lambda u: 2.0 * math.exp(-z * u * u) * (1.0 + u * u) ** b, 0.0, np.inf, **_QUAD)
    else:
        val, _ = integrate.quad(
            lambda t: math.exp(-z * t) * t ** (a - 1.0) * (1.0 + t) ** b, 0.0, np.inf, **_QUAD
        )
    return math.exp(-0.5 * z) * z ** (mu + 0.5) / gamma(a) * val


def whittaker_w_half(z: float) -> float:
    """``W_{-1/2,-1/2}(z)``."""
    return whittaker_w(-0.5, -0.5, z)


# -- Abel transform ----------------------------------------------------------


def abel_forward(xi: StepFunction, lam: float) -> float:
    """``(1/pi) int_{-sqrt(lam)}^{sqrt(lam)} xi(nu) (lam - nu^2)^{-1/2} dnu`` in closed form."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    r = math.sqrt(lam)
    b = xi.breakpoints
    edges = np.concatenate([[-r], np.clip(b, -r, r), [r]])
    ang = np.arcsin(np.clip(edges / r, -1.0, 1.0))
    return float(np.dot(xi.values, np.diff(ang)) / math.pi)


def abel_forward_quad(samples: Sequence, lam: float, nodes: int = 256) -> float:
    """Gauss-Chebyshev version of :func:`abel_forward` for sampled data.

    ``samples`` is a sequence of ``(nu, value)`` pairs, linearly
    interpolated; they must cover ``[-sqrt(lam), sqrt(lam)]``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    arr = np.asarray(samples, dtype=float)
    order = np.argsort(arr[:, 0])
    nu, val = arr[order, 0], arr[order, 1]
    r = math.sqrt(lam)
    if nu[0] > -r or nu[-1] < r:
        raise ValueError(f"samples cover [{nu[0]}, {nu[-1]}], need [-{r}, {r}]")
    theta = (2 * np.arange(1, nodes + 1) - 1) * math.pi / (2 * nodes)
    return float(np.mean(np.interp(r * np.cos(theta), nu, val)))


# -- eta invariants ----------------------------------------------------------


def eta_closed(xi: StepFunction, m: float) -> float:
    """``-(m/pi) int xi(nu) / (nu^2 + m^2) dnu``."""
    if m == 0:
        raise ValueError("m must be nonzero")
    return float(-xi.integrate(lambda x: math.atan(x / m)).real / math.pi)


def _piece_quad(xi: StepFunction, kernel) -> float:
    return sum(v * integrate.quad(kernel, a, b, **_QUAD)[0] for a, b, v in xi.pieces())


def eta_zeta(xi: StepFunction, m: float, s: float) -> float:
    """Zeta-regularized asymmetry continued to ``s > -1/2``."""
    if m == 0:
        raise ValueError("m must be nonzero")
    if not s > -0.5:
        raise ValueError("s must exceed -1/2")
    pref = -m * (s + 1) / (2 * math.sqrt(math.pi)) * gamma((s + 2) / 2) / gamma((s + 3) / 2)
    m2 = m * m
    return pref * _piece_quad(xi, lambda nu: (nu * nu + m2) ** (-(s + 2) / 2))


def eta_zeta_from_xi_h(xi: StepFunction, m: float, s: float) -> float:
    """Same quantity written over ``xi_H = abel_forward(xi)`` on ``[0, inf)``."""
    m2 = m * m
    pts = sorted({float(b * b) for b in xi.breakpoints if b * b > 0})

    def f(lam):
        return abel_forward(xi, lam) * (lam + m2) ** (-(s + 3) / 2) if lam > 0 else 0.0

    edges = [0.0] + pts
    total = sum(integrate.quad(f, lo, hi, **_QUAD)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    total += integrate.quad(f, edges[-1], np.inf, **_QUAD)[0]
    return -m * (s + 1) / 2 * total


def eta_heat(xi: StepFunction, m: float, t: float) -> float:
    """Heat-kernel regularized asymmetry at time ``t`` via W_{-1/2,-1/2} and K_0."""
    if m == 0:
        raise ValueError("m must be nonzero")
    if not t > 0:
        raise ValueError("t must be positive")
    m2 = m * m

    def first(nu):
        c = nu * nu + m2
        e = math.exp(-0.5 * t * c)
        return 0.0 if e == 0.0 else whittaker_w_half(t * c) * e / c

    def second(nu):
        c = nu * nu + m2
        e = math.exp(-0.5 * t * c)
        return 0.0 if e == 0.0 else bessel_k0(0.5 * t * c) * e

    return (-m / (2 * math.sqrt(math.pi)) * _piece_quad(xi, first)
            - m / math.pi * t * _piece_quad(xi, second))


def eta_heat_from_xi_h(xi: StepFunction, m: float, t: float) -> float:
    """``m int xi_H(lam) d/dlam[(lam + m^2)^{-1/2} e^{-t(lam + m^2)}] dlam``."""
    m2 = m * m

    def f(lam):
        if lam <= 0:
            return 0.0
        c = lam + m2
        deriv = -(0.5 * c**-1.5 + t * c**-0.5) * math.exp(-t * c)
        return abel_forward(xi, lam) * deriv

    pts = sorted({float(b * b) for b in xi.breakpoints if b * b > 0})
    edges = [0.0] + pts
    total = sum(integrate.quad(f, lo, hi, **_QUAD)[0] for lo, hi in zip(edges[:-1], edges[1:]))
    total += integrate.quad(f, edges[-1], np.inf, **_QUAD)[0]
    return m * total
