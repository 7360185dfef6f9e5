"""Operator paths ``A(t) = A_- + B(t)`` with ``B(-inf) = 0``.

A path is given by ``A_-`` and evaluators for ``B(t)`` and ``B'(t)``. The
asymptote ``A_+`` comes either from a supplied ``B(+inf)`` or from
quadrature of ``B'`` over the real line.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .matlin import SymOp, apply_fn, asymmetry, eig_sym, trace_norm

Evaluator = Callable[[float], np.ndarray]

ASYMPTOTE_ATOL = 1e-10


class DivergentTailError(ValueError):
    def __init__(self, tail: float):
        self.tail = tail
        super().__init__(f"B'(t) tail beyond support_hint is not negligible: {tail:.3e}")


@dataclass(frozen=True)
class OperatorPath:
    a_minus: SymOp
    b_at: Evaluator
    bprime_at: Evaluator
    b_plus: Optional[np.ndarray] = None
    support_hint: float = 10.0
    name: str = "custom"

    @property
    def dim(self) -> int:
        return self.a_minus.dim


@dataclass(frozen=True)
class HypothesisReport:
    sym_defect_B: float
    sym_defect_Bprime: float
    trace_integral: float
    consistency_defect: float
    asymptote_gap: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _checked(path: OperatorPath, m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    n = path.dim
    if m.shape != (n, n):
        raise ValueError(f"{what} has shape {m.shape}, expected {(n, n)}")
    return m


def a_of(path: OperatorPath, t: float) -> SymOp:
    """Spectral decomposition of ``A(t) = A_- + B(t)``."""
    if not math.isfinite(t):
        raise ValueError("t must be finite; use asymptote_plus for t = +inf")
    b = _checked(path, path.b_at(t), "B(t)")
    return eig_sym(path.a_minus.entries + b)


def _integrate_bprime(path: OperatorPath, a: float, b: float) -> np.ndarray:
    val, _ = integrate.quad_vec(
        lambda s: _checked(path, path.bprime_at(s), "B'(t)"),
        a,
        b,
        epsabs=ASYMPTOTE_ATOL,
        epsrel=1e-12,
        limit=400,
    )
    return val


def bprime_integral(path: OperatorPath) -> tuple[np.ndarray, float]:
    """``int B'(s) ds`` over ``[-3T, 3T]`` with T the support hint.

    Also returns the norm of the contribution from ``T <= |s| <= 3T``, which
    serves as the tail estimate.
    """
    T = path.support_hint
    core = _integrate_bprime(path, -T, T)
    right = _integrate_bprime(path, T, 3 * T)
    left = _integrate_bprime(path, -3 * T, -T)
    tail = np.linalg.norm(right) + np.linalg.norm(left)
    return core + right + left, float(tail)


def asymptote_plus(path: OperatorPath, tail_tol: float = 1e-6) -> SymOp:
    """``A_+ = A_- + B(+inf)``."""
    if path.b_plus is not None:
        return eig_sym(path.a_minus.entries + _checked(path, path.b_plus, "B(+inf)"))
    total, tail = bprime_integral(path)
    if tail > tail_tol * (1.0 + np.linalg.norm(total)):
        raise DivergentTailError(tail)
    return eig_sym(path.a_minus.entries + 0.5 * (total + total.T))


def truncate(path: OperatorPath, n_level: float) -> OperatorPath:
    """Compress the path by ``P = E_{A_-}((-n, n))``, embedded in the full space."""
    inside = np.abs(path.a_minus.spectrum) < n_level
    if np.all(inside):
        return replace(path, name=f"{path.name}|P<{n_level:g}")
    p = path.a_minus.projection(lambda w: np.abs(w) < n_level)

    def conj(m):
        return p @ m @ p

    b_at, bprime_at = path.b_at, path.bprime_at
    return replace(
        path,
        a_minus=eig_sym(conj(path.a_minus.entries)),
        b_at=lambda t: conj(b_at(t)),
        bprime_at=lambda t: conj(bprime_at(t)),
        b_plus=None if path.b_plus is None else conj(path.b_plus),
        name=f"{path.name}|P<{n_level:g}",
    )


def reparameterize(
    path: OperatorPath, r: Callable[[float], float], rprime: Callable[[float], float],
    support_hint: float,
) -> OperatorPath:
    """The path ``t -> A(r(t))`` for strictly increasing ``r`` onto the real line."""
    b_at, bprime_at = path.b_at, path.bprime_at
    return replace(
        path,
        b_at=lambda t: b_at(r(t)),
        bprime_at=lambda t: bprime_at(r(t)) * rprime(t),
        support_hint=support_hint,
        name=f"{path.name}|reparam",
    )


def hypothesis_report(path: OperatorPath, sample_grid: Sequence[float]) -> HypothesisReport:
    """Sampled diagnostics for the path assumptions.

    Never raises on bad data: defects are reported as numbers. The weak
    measurability assumption has no finite-dimensional content and is not
    checked.
    """
    grid = np.sort(np.asarray(sample_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("sample grid is empty")
    bs = [np.asarray(path.b_at(t), dtype=float) for t in grid]
    bps = [np.asarray(path.bprime_at(t), dtype=float) for t in grid]
    sym_b = max(asymmetry(b) for b in bs)
    sym_bp = max(asymmetry(b) for b in bps)

    weight = apply_fn(path.a_minus, lambda w: 1.0 / (np.abs(w) + 1.0))
    norms = np.array([trace_norm(bp @ weight) for bp in bps])
    trace_integral = float(integrate.simpson(norms, x=grid)) if grid.size > 1 else 0.0

    # B(t) against the running integral of B' started where B is normalized to 0
    start = min(grid[0], -path.support_hint)
    acc = np.zeros((path.dim, path.dim))
    left = start
    consistency = 0.0
    for t, b in zip(grid, bs):
        if t > left:
            acc = acc + _integrate_bprime(path, left, t)
            left = t
        consistency = max(consistency, float(np.linalg.norm(b - acc)))

    if path.b_plus is not None:
        total, _ = bprime_integral(path)
        gap = float(np.linalg.norm(np.asarray(path.b_plus) - total))
    else:
        gap = 0.0
    return HypothesisReport(sym_b, sym_bp, max(trace_integral, 0.0), consistency, gap)


# -- scenario gallery -------------------------------------------------------


def _sech2(t: float) -> float:
    return 1.0 / math.cosh(t) ** 2 if abs(t) < 350 else 0.0


def constant_path(a_minus, support_hint: float = 5.0, name: str = "constant") -> OperatorPath:
    a = eig_sym(a_minus)
    z = np.zeros_like(a.entries)
    return OperatorPath(a, lambda t: z, lambda t: z, z, support_hint, name)


def diag_tanh_path(signs: Sequence[float], support_hint: float = 10.0, name: str = "tanh") -> OperatorPath:
    """``A(t) = tanh(t) * diag(signs)``."""
    s = np.diag(np.asarray(signs, dtype=float))
    return OperatorPath(
        eig_sym(-s),
        lambda t: (1.0 + math.tanh(t)) * s,
        lambda t: _sech2(t) * s,
        2.0 * s,
        support_hint,
        name,
    )


def tanh2(support_hint: float = 10.0) -> OperatorPath:
    return diag_tanh_path([1.0, 1.0], support_hint, "tanh2")


def tanh_mixed(support_hint: float = 10.0) -> OperatorPath:
    return diag_tanh_path([1.0, -1.0], support_hint, "tanh-mixed")


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rot2(lo: float = -1.0, hi: float = 2.0, support_hint: float = 10.0) -> OperatorPath:
    """Fixed spectrum ``{lo, hi}``, eigenvectors rotated by a quarter turn."""
    d = np.diag([lo, hi])
    drot = np.array([[0.0, -1.0], [1.0, 0.0]])

    def theta(t):
        return 0.25 * math.pi * (1.0 + math.tanh(t))

    def b_at(t):
        r = _rot(theta(t))
        return r @ d @ r.T - d

    def bprime_at(t):
        r = _rot(theta(t))
        rd = drot @ r
        return 0.25 * math.pi * _sech2(t) * (rd @ d @ r.T + r @ d @ rd.T)

    quarter = _rot(0.5 * math.pi)
    return OperatorPath(eig_sym(d), b_at, bprime_at, quarter @ d @ quarter.T - d, support_hint, "rot2")


def lattice1d(
    sites: int = 32,
    p: int = 1,
    eps: float = 0.3,
    v_minus: float = 0.5,
    v_width: float = 4.0,
    amplitude: float = 3.0,
    width: float = 3.0,
    support_hint: float = 10.0,
) -> OperatorPath:
    """Chain analog of a relatively trace-class Schrodinger path.

    ``A_- = (L^T L)^p + V_- + eps`` with ``L`` the forward difference on a
    ``sites``-site chain; the path switches on a negative Gaussian well of
    depth ``amplitude``.
    """
    j = np.arange(sites)
    centre = 0.5 * (sites - 1)
    fd = (np.eye(sites) - np.eye(sites, k=1))[:-1]
    lap = np.linalg.matrix_power(fd.T @ fd, p)
    a_minus = lap + np.diag(v_minus * np.exp(-(((j - centre) / v_width) ** 2))) + eps * np.eye(sites)
    well = -amplitude * np.diag(np.exp(-(((j - centre) / width) ** 2)))
    return OperatorPath(
        eig_sym(a_minus),
        lambda t: 0.5 * (1.0 + math.tanh(t)) * well,
        lambda t: 0.5 * _sech2(t) * well,
        well.copy(),
        support_hint,
        "lattice1d",
    )


def tanh_polynomial_path(a_minus, coeffs: Sequence, support_hint: float = 10.0,
                         name: str = "custom") -> OperatorPath:
    """``B(t) = sum_j C_j (tanh(t)^j - (-1)^j)`` so that ``B(-inf) = 0``."""
    a = eig_sym(a_minus)
    cs = [np.asarray(c, dtype=float) for c in coeffs]
    for c in cs:
        if c.shape != (a.dim, a.dim):
            raise ValueError(f"coefficient shape {c.shape} does not match dim {a.dim}")

    def b_at(t):
        x = math.tanh(t)
        return sum(((x**k - (-1.0) ** k) * c for k, c in enumerate(cs)), np.zeros((a.dim, a.dim)))

    def bprime_at(t):
        x, s = math.tanh(t), _sech2(t)
        return sum((k * x ** (k - 1) * s * c for k, c in enumerate(cs) if k), np.zeros((a.dim, a.dim)))

    b_plus = sum(((1.0 - (-1.0) ** k) * c for k, c in enumerate(cs)), np.zeros((a.dim, a.dim)))
    return OperatorPath(a, b_at, bprime_at, b_plus, support_hint, name)


SCENARIOS: dict[str, Callable[..., OperatorPath]] = {
    "tanh2": tanh2,
    "tanh-mixed": tanh_mixed,
    "rot2": rot2,
    "lattice1d": lattice1d,
}


def reversed_path(path: OperatorPath) -> OperatorPath:
    """``t -> -A(t)``; flips the sign of the flow."""
    b_at, bprime_at = path.b_at, path.bprime_at
    return replace(
        path,
        a_minus=eig_sym(-path.a_minus.entries),
        b_at=lambda t: -np.asarray(b_at(t)),
        bprime_at=lambda t: -np.asarray(bprime_at(t)),
        b_plus=None if path.b_plus is None else -path.b_plus,
        name=f"-{path.name}",
    )


def load_scenario(config) -> OperatorPath:
    """Build a path from a scenario document.

    ``{"scenario": name, "params": {...}, "dim": n, "support_hint": T}``;
    ``name == "custom"`` takes ``params.a_minus`` and ``params.b_coeffs``
    (coefficient matrices of ``B`` as a polynomial in ``tanh t``), and
    ``name == "constant"`` takes ``params.a_minus``.
    """
    if isinstance(config, (str, Path)):
        config = json.loads(Path(config).read_text())
    name = config.get("scenario")
    params = dict(config.get("params") or {})
    if "support_hint" in config:
        params["support_hint"] = float(config["support_hint"])
    if name == "custom":
        path = tanh_polynomial_path(params["a_minus"], params.get("b_coeffs", []),
                                    params.get("support_hint", 10.0))
    elif name == "constant":
        path = constant_path(params["a_minus"], params.get("support_hint", 5.0))
    elif name in SCENARIOS:
        path = SCENARIOS[name](**params)
    else:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS) + ['constant', 'custom']}")
    if "dim" in config and int(config["dim"]) != path.dim:
        raise ValueError(f"scenario {name!r} has dim {path.dim}, config says {config['dim']}")
    return path
