"""Spectral shift functions of matrix pairs.

``xi(lam; A_+, A_-)`` is stored as a right-open step function equal to the
difference of eigenvalue counting functions ``N_{A_-}(lam) - N_{A_+}(lam)``.
The perturbation-determinant route recovers the same function from the
boundary values of a continuously tracked ``log D(z)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .matlin import SymOp, apply_fn, log_det, trace_norm


class ResolventSetError(ValueError):
    """Spectral parameter lies on (or numerically at) an eigenvalue."""


class BranchTrackingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-open piecewise constant function.

    ``values[k]`` holds on ``[breakpoints[k-1], breakpoints[k])``, with
    ``values[0]`` left of the first breakpoint and ``values[-1]`` right of the
    last one.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.shape != (b.size + 1,):
            raise ValueError("need exactly one more value than breakpoints")
        if b.size and np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        # merge pieces with equal values
        keep = np.flatnonzero(v[1:] != v[:-1])
        object.__setattr__(self, "breakpoints", b[keep])
        object.__setattr__(self, "values", np.concatenate([v[:1], v[keep + 1]]))

    @classmethod
    def zero(cls) -> StepFunction:
        return cls(np.empty(0), np.zeros(1))

    def __call__(self, x):
        idx = np.searchsorted(self.breakpoints, x, side="right")
        return self.values[idx]

    def __neg__(self) -> StepFunction:
        return StepFunction(self.breakpoints, -self.values)

    def pieces(self):
        """Yield ``(a, b, value)`` for the bounded pieces with nonzero value."""
        b = self.breakpoints
        for k in range(1, b.size):
            if self.values[k] != 0:
                yield float(b[k - 1]), float(b[k]), float(self.values[k])

    @property
    def compact(self) -> bool:
        return self.values[0] == 0 and self.values[-1] == 0

    def same_as(self, other: StepFunction, rtol: float = 1e-12) -> bool:
        if self.breakpoints.shape != other.breakpoints.shape:
            return False
        scale = 1.0 + np.abs(self.breakpoints)
        return bool(
            np.array_equal(self.values, other.values)
            and np.all(np.abs(self.breakpoints - other.breakpoints) <= rtol * scale)
        )

    def integrate(self, kernel_primitive: Callable[[float], complex]) -> complex:
        """``sum v * (F(b) - F(a))`` over the bounded pieces, for a primitive F."""
        return sum(v * (kernel_primitive(b) - kernel_primitive(a)) for a, b, v in self.pieces())

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["breakpoint", "value"])
        w.writerow(["-inf", repr(float(self.values[0]))])
        for b, v in zip(self.breakpoints, self.values[1:]):
            w.writerow([repr(float(b)), repr(float(v))])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> StepFunction:
        rows = list(csv.reader(io.StringIO(text)))[1:]
        return cls(np.array([float(r[0]) for r in rows[1:]]), np.array([float(r[1]) for r in rows]))

    def to_json(self) -> str:
        return json.dumps({
            "left_value": float(self.values[0]),
            "rows": [[float(b), float(v)] for b, v in zip(self.breakpoints, self.values[1:])],
        })

    @classmethod
    def from_json(cls, text: str) -> StepFunction:
        doc = json.loads(text)
        rows = doc["rows"]
        return cls(np.array([r[0] for r in rows], dtype=float),
                   np.array([doc["left_value"]] + [r[1] for r in rows], dtype=float))


def _counting_difference(lo_spec: np.ndarray, hi_spec: np.ndarray) -> StepFunction:
    """``N_lo(x) - N_hi(x)`` for two ascending spectra."""
    b = np.unique(np.concatenate([lo_spec, hi_spec]))
    left = np.zeros(1)
    right = (np.searchsorted(lo_spec, b, side="right") - np.searchsorted(hi_spec, b, side="right"))
    return StepFunction(b, np.concatenate([left, right.astype(float)]))


def xi_counting(a_plus: SymOp, a_minus: SymOp) -> StepFunction:
    if a_plus.dim != a_minus.dim:
        raise ValueError("dimension mismatch")
    return _counting_difference(a_minus.spectrum, a_plus.spectrum)


def _g(x):
    return x / np.sqrt(x * x + 1.0)


def _g_inv(w):
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) >= 1.0):
        raise ValueError(f"breakpoint image outside (-1, 1): {w[np.abs(w) >= 1][0]!r}")
    return w / np.sqrt(1.0 - w * w)


def xi_invariance(a_plus: SymOp, a_minus: SymOp) -> StepFunction:
    """Spectral shift function via the bounded pair ``(g(A_+), g(A_-))``.

    Counting is done in the ``omega = g(nu)`` variable and the breakpoints
    are mapped back through ``g^{-1}``.
    """
    if a_plus.dim != a_minus.dim:
        raise ValueError("dimension mismatch")
    # spectra of g(A) by spectral calculus on the existing eigenbasis
    in_omega = _counting_difference(_g(a_minus.spectrum), _g(a_plus.spectrum))
    return StepFunction(_g_inv(in_omega.breakpoints), in_omega.values)


def _resolvent_check(a: SymOp, z: complex, what: str) -> None:
    dist = float(np.min(np.abs(a.spectrum - z))) if a.dim else np.inf
    if dist <= 1e-13 * (1.0 + a.norm + abs(z)):
        raise ResolventSetError(f"z={z} lies on the spectrum of {what} (distance {dist:.2e})")


def _logdet_ratio(a_plus: SymOp, a_minus: SymOp, z: complex) -> complex:
    _resolvent_check(a_plus, z, "A_+")
    _resolvent_check(a_minus, z, "A_-")
    eye = np.eye(a_plus.dim)
    return log_det(a_plus.entries - z * eye) - log_det(a_minus.entries - z * eye)


def pert_det(a_plus: SymOp, a_minus: SymOp, z: complex, check: bool = False) -> complex:
    """Perturbation determinant ``det((A_+ - z)(A_- - z)^{-1})``.

    With ``check=True`` the ratio form is compared against
    ``det(I + (A_+ - A_-)(A_- - z)^{-1})``.
    """
    z = complex(z)
    value = complex(np.exp(_logdet_ratio(a_plus, a_minus, z)))
    if check:
        eye = np.eye(a_plus.dim)
        res = np.linalg.solve((a_minus.entries - z * eye).T, (a_plus.entries - a_minus.entries).T).T
        other = complex(np.linalg.det(eye + res))
        if abs(other - value) > 1e-8 * max(abs(value), abs(other), 1e-300):
            raise AssertionError(f"determinant forms disagree: {value} vs {other}")
    return value


@dataclass
class BranchTrace:
    target: complex
    waypoints: list = field(default_factory=list)
    total_arg: float = 0.0

    @property
    def logdet(self) -> complex:
        return self.waypoints[-1][1]

    @property
    def steps(self) -> int:
        return len(self.waypoints) - 1


def normalization_height(a_plus: SymOp, a_minus: SymOp) -> float:
    """Height on the imaginary axis where ``|log D| < 1e-6`` is guaranteed.

    ``|log D(iY)| <= sum_j |lam_j^+ - lam_j^-| / (Y - |A|) `` and the sum is
    bounded by the trace norm of ``A_+ - A_-``.
    """
    norms = a_plus.norm + a_minus.norm + 1.0
    return max(10.0 * norms, 1e7 * (trace_norm(a_plus.entries - a_minus.entries) + norms))


def logdet_branch(
    a_plus: SymOp, a_minus: SymOp, target: complex, max_steps: int = 10**6,
) -> BranchTrace:
    """Continue ``log D(z)`` from the normalization point down to ``target``.

    The walk follows the segment from ``i*Y0`` to ``target``; each step is at
    most half the current imaginary part and is halved until the phase
    increment of ``D`` is below ``pi/2``.
    """
    target = complex(target)
    if target.imag <= 0:
        raise ValueError("target must lie in the open upper half-plane")
    y0 = normalization_height(a_plus, a_minus)
    start = complex(0.0, y0)
    trace = BranchTrace(target)
    z = start
    ld_prev = _logdet_ratio(a_plus, a_minus, z)
    cur = complex(ld_prev.real, math.remainder(ld_prev.imag, 2 * math.pi))
    trace.waypoints.append((z, cur))
    trace.total_arg = cur.imag
    span = target - start
    length = abs(span)
    u = 0.0
    steps = 0
    while u < 1.0 and length > 0:
        du = min(1.0 - u, 0.5 * z.imag / length)
        while True:
            steps += 1
            if steps > max_steps:
                raise BranchTrackingError(f"branch tracking exceeded {max_steps} steps near z={z}")
            z_new = start + (u + du) * span if u + du < 1.0 else target
            ld_new = _logdet_ratio(a_plus, a_minus, z_new)
            d = ld_new - ld_prev
            # principal log of D(z_new)/D(z)
            dphase = math.remainder(d.imag, 2 * math.pi)
            if abs(dphase) < 0.5 * math.pi:
                break
            du *= 0.5
        cur = cur + complex(d.real, dphase)
        trace.total_arg += dphase
        trace.waypoints.append((z_new, cur))
        ld_prev, z = ld_new, z_new
        u = u + du if z_new != target else 1.0
    return trace


def xi_from_det(a_plus: SymOp, a_minus: SymOp, lam: float, eps: float) -> float:
    if eps <= 0:
        raise ValueError("eps must be positive")
    return logdet_branch(a_plus, a_minus, complex(lam, eps)).logdet.imag / math.pi


# -- trace-formula validators ------------------------------------------------


def _quad_complex(fn, a, b, nodes: Optional[int] = None) -> complex:
    if nodes:
        x, w = np.polynomial.legendre.leggauss(nodes)
        xm, xr = 0.5 * (a + b), 0.5 * (b - a)
        return complex(xr * np.sum(w * fn(xm + xr * x)))
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
    with warnings.catch_warnings():
        # the requested accuracy sits at round-off level
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re = integrate.quad(lambda x: np.real(fn(x)), a, b, **opts)[0]
        im = integrate.quad(lambda x: np.imag(fn(x)), a, b, **opts)[0]
    return complex(re, im)


def krein_residual(a_plus: SymOp, a_minus: SymOp, f, fprime, quad_grid: Optional[int] = None) -> float:
    """``|tr(f(A_+) - f(A_-)) - int f'(nu) xi(nu) dnu|``.

    ``quad_grid`` selects a fixed Gauss-Legendre rule per step piece; by
    default each piece is integrated adaptively.
    """
    lhs = complex(np.trace(apply_fn(a_plus, f) - apply_fn(a_minus, f)))
    xi = xi_counting(a_plus, a_minus)
    rhs = sum((v * _quad_complex(fprime, a, b, quad_grid) for a, b, v in xi.pieces()), 0j)
    return abs(lhs - rhs)


def resolvent_identity_residual(a_plus: SymOp, a_minus: SymOp, z: complex) -> float:
    """``|-tr((A_+ - z)^{-1} - (A_- - z)^{-1}) - int xi(nu) (nu - z)^{-2} dnu|``."""
    z = complex(z)
    _resolvent_check(a_plus, z, "A_+")
    _resolvent_check(a_minus, z, "A_-")
    lhs = -complex(np.sum(1.0 / (a_plus.spectrum - z)) - np.sum(1.0 / (a_minus.spectrum - z)))
    rhs = xi_counting(a_plus, a_minus).integrate(lambda x: -1.0 / (x - z))
    return abs(lhs - rhs)


def g_z(z: complex):
    """``x -> x (x^2 - z)^{-1/2}`` with the principal square root."""
    z = complex(z)
    return lambda x: np.asarray(x) / np.sqrt(np.asarray(x, dtype=complex) ** 2 - z)


def _check_gz_domain(z: complex, *ops: SymOp) -> None:
    if z.imag == 0 and z.real >= 0:
        raise ValueError(f"z={z} lies on [0, inf), where the square root branch is ambiguous")
    for a in ops:
        if np.min(np.abs(a.spectrum**2 - z)) == 0:
            raise ResolventSetError(f"z={z} is an eigenvalue of A^2")


def gz_trace_diff(a_plus: SymOp, a_minus: SymOp, z: complex) -> complex:
    z = complex(z)
    _check_gz_domain(z, a_plus, a_minus)
    f = g_z(z)
    return complex(np.trace(apply_fn(a_plus, f) - apply_fn(a_minus, f)))


def gz_trace_residual(a_plus: SymOp, a_minus: SymOp, z: complex) -> float:
    """Residual of ``tr(g_z(A_+) - g_z(A_-)) = -z int xi(nu) (nu^2 - z)^{-3/2} dnu``."""
    z = complex(z)
    lhs = gz_trace_diff(a_plus, a_minus, z)
    kernel = lambda nu: (np.asarray(nu, dtype=complex) ** 2 - z) ** -1.5  # noqa: E731
    integral = sum((v * _quad_complex(kernel, a, b) for a, b, v in xi_counting(a_plus, a_minus).pieces()), 0j)
    return abs(lhs + z * integral)


def dz_trace_residual(a_plus: SymOp, a_minus: SymOp, z: complex, h: float) -> float:
    """Central difference in ``z`` of the g_z trace against its closed-form derivative."""
    z = complex(z)
    for w in (z - h, z + h):
        _check_gz_domain(w, a_plus, a_minus)
    fd = (gz_trace_diff(a_plus, a_minus, z + h) - gz_trace_diff(a_plus, a_minus, z - h)) / (2 * h)

    def dg(x):
        x = np.asarray(x, dtype=complex)
        return 0.5 * x * (x**2 - z) ** -1.5

    exact = complex(np.trace(apply_fn(a_plus, dg) - apply_fn(a_minus, dg)))
    return abs(fd - exact)


def morse_trace(a_plus: SymOp, a_minus: SymOp) -> float:
    """``tr(E_{A_-}((-inf, 0)) - E_{A_+}((-inf, 0)))``."""
    neg = lambda w: w < 0  # noqa: E731
    return float(np.trace(a_minus.projection(neg) - a_plus.projection(neg)))
