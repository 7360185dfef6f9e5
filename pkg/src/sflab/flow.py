"""Spectral flow by certified subdivision, Fredholm-pair index of projections,
and the chain of equal integers attached to a path.

Orientation: an eigenvalue moving upward through zero contributes ``+1``,
so the flow is ``sum_j (rank E_{A(t_j)}([0, eps_j)) - rank E_{A(t_{j-1})}([0, eps_j)))``
and equals ``dim ran E_{A_-}((-inf, 0)) - dim ran E_{A_+}((-inf, 0))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .matlin import SymOp, asymmetry
from .oppath import OperatorPath, a_of, asymptote_plus
from .ssf import morse_trace, xi_counting, xi_from_det

RANK_RTOL = 1e-8


class FlowPreconditionError(ValueError):
    """Zero lies in the spectrum of an asymptote."""


class FlowCertificationError(RuntimeError):
    def __init__(self, interval: tuple[float, float], reason: str):
        self.interval = interval
        super().__init__(f"cannot certify [{interval[0]:.6g}, {interval[1]:.6g}]: {reason}")


class PairConsistencyError(RuntimeError):
    """Rank-based index and trace of ``P - Q`` disagree."""


@dataclass
class FlowCertificate:
    t_levels: list
    epsilons: list
    left_counts: list
    right_counts: list
    margin: float
    T0: float

    def __post_init__(self):
        q = len(self.epsilons)
        if not (len(self.t_levels) == q + 1 == len(self.left_counts) + 1 == len(self.right_counts) + 1):
            raise ValueError("certificate arrays have inconsistent lengths")
        if not self.margin > 0:
            raise ValueError("certificate margin must be positive")

    @property
    def flow(self) -> int:
        return int(sum(self.right_counts) - sum(self.left_counts))

    def to_json(self) -> str:
        doc = asdict(self)
        doc["flow"] = self.flow
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> FlowCertificate:
        doc = json.loads(text)
        doc.pop("flow", None)
        return cls(**doc)


@dataclass(frozen=True)
class FlowConfig:
    t0_scan_step: float = 0.5
    sample_density: int = 9
    max_refine: int = 40
    t0_max: float = 1e3


def _spectrum(path: OperatorPath, t: float) -> np.ndarray:
    return a_of(path, t).spectrum


def _asymptote_gap(a_plus: SymOp, a_minus: SymOp) -> float:
    gap = min(float(np.min(np.abs(a_plus.spectrum))), float(np.min(np.abs(a_minus.spectrum))))
    scale = 1e-12 * (1.0 + max(a_plus.norm, a_minus.norm))
    if gap <= scale:
        raise FlowPreconditionError(f"0 lies in the spectrum of an asymptote (gap {gap:.2e})")
    return gap


def find_t0(path: OperatorPath, gap: float, step: float = 0.5, t_max: float = 1e3,
            lookahead: int = 8) -> float:
    """Smallest ``T0`` on the scan grid with ``min |sigma(A(t))| > gap/2`` for ``|t| >= T0``.

    ``|t| >= T0`` is probed at ``lookahead`` further scan points on each side.
    """
    t0 = max(float(path.support_hint), step)
    while t0 <= t_max:
        probes = t0 + step * np.arange(lookahead + 1)
        if all(np.min(np.abs(_spectrum(path, s * float(p)))) > 0.5 * gap
               for p in probes for s in (-1.0, 1.0)):
            return t0
        t0 += step
    raise FlowCertificationError((-t_max, t_max), "no T0 with the asymptotic gap found")


def _choose_eps(abs_eigs: np.ndarray) -> Optional[tuple[float, float]]:
    """Level ``eps`` in a gap of the sampled ``|lambda|`` values, and its relative room.

    A gap ``(u, w)`` admits ``eps = (u + w) / 2`` when ``u <= 3 eps / 4`` and
    ``w >= 5 eps / 4``. The gap leaving the most absolute room wins, since
    the room has to absorb eigenvalue drift between samples.
    """
    vals = np.unique(abs_eigs)
    lows = np.concatenate([[0.0], vals])
    highs = np.concatenate([vals, [np.inf]])
    best = None
    for u, w in zip(lows, highs):
        if w <= u:
            continue
        eps = 2.0 * u if math.isinf(w) else 0.5 * (u + w)
        if eps == 0.0:
            eps = 1.0 if math.isinf(w) else 0.5 * w
        if u > 0.75 * eps or w < 1.25 * eps:
            continue
        room = min(eps - u, w - eps)
        if best is None or room > best[1]:
            best = (eps, room)
    return best


def _certify(path: OperatorPath, a: float, b: float, density: int):
    """Try to certify ``[a, b]``; returns ``(eps, margin, left, right)`` or a failure reason."""
    ts = np.linspace(a, b, density)
    specs = [_spectrum(path, float(t)) for t in ts]
    choice = _choose_eps(np.abs(np.concatenate(specs)))
    if choice is None:
        return "no admissible level"
    eps, _ = choice
    margin = min(float(np.min(np.abs(np.abs(s) - eps))) for s in specs)
    lip = max(np.linalg.norm(np.asarray(path.bprime_at(float(t)), dtype=float), 2) for t in ts)
    drift = 0.5 * lip * (ts[1] - ts[0])
    if margin < 0.25 * eps or margin <= drift:
        return f"margin {margin:.3g} too small (eps {eps:.3g}, drift {drift:.3g})"
    inside = {int(np.sum(np.abs(s) < eps)) for s in specs}
    if len(inside) != 1:
        return "eigenvalue count in [-eps, eps] varies"
    left = int(np.sum((specs[0] >= 0) & (specs[0] < eps)))
    right = int(np.sum((specs[-1] >= 0) & (specs[-1] < eps)))
    return eps, margin, left, right


def spectral_flow(path: OperatorPath, config: FlowConfig | None = None,
                  extra_points: Sequence[float] = (), **overrides) -> tuple[int, FlowCertificate]:
    """Spectral flow of ``A(t)`` over the real line with an audit certificate."""
    cfg = config or FlowConfig()
    if overrides:
        cfg = FlowConfig(**{**asdict(cfg), **overrides})
    if cfg.sample_density < 3:
        raise ValueError("sample_density must be at least 3")
    a_plus = asymptote_plus(path)
    gap = _asymptote_gap(a_plus, path.a_minus)
    t0 = find_t0(path, gap, cfg.t0_scan_step, cfg.t0_max)

    cuts = sorted({-t0, t0, *(float(p) for p in extra_points if -t0 < p < t0)})
    stack = [(lo, hi, 0) for lo, hi in zip(cuts[:-1], cuts[1:])][::-1]
    levels, eps_list, lefts, rights = [cuts[0]], [], [], []
    margin = math.inf
    while stack:
        lo, hi, depth = stack.pop()
        res = _certify(path, lo, hi, cfg.sample_density)
        if isinstance(res, str):
            if depth >= cfg.max_refine:
                raise FlowCertificationError((lo, hi), res)
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
            continue
        eps, m, left, right = res
        levels.append(hi)
        eps_list.append(eps)
        lefts.append(left)
        rights.append(right)
        margin = min(margin, m)
    cert = FlowCertificate(levels, eps_list, lefts, rights, margin, t0)
    return cert.flow, cert


# -- pairs of projections -----------------------------------------------------


@dataclass(frozen=True)
class ProjectionPair:
    p: np.ndarray
    q: np.ndarray
    tol: float = 1e-10

    def __post_init__(self):
        for name in ("p", "q"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square")
            if asymmetry(m) > self.tol:
                raise ValueError(f"{name} is not symmetric")
            if np.linalg.norm(m @ m - m) > self.tol:
                raise ValueError(f"{name} is not idempotent")
            object.__setattr__(self, name, m)
        if self.p.shape != self.q.shape:
            raise ValueError("p and q differ in shape")


def _range_basis(p: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(p)
    return v[:, w > 0.5]


def _intersection_dim(u: np.ndarray, w: np.ndarray) -> int:
    if u.shape[1] == 0 or w.shape[1] == 0:
        return 0
    stacked = np.hstack([u, w])
    sv = np.linalg.svd(stacked, compute_uv=False)
    rank = int(np.sum(sv >= RANK_RTOL * (1.0 + sv[0])))
    return u.shape[1] + w.shape[1] - rank


def fredholm_pair_index(pair: ProjectionPair) -> int:
    """``dim(ran P n ran Q^perp) - dim(ran P^perp n ran Q)``, cross-checked against ``tr(P - Q)``."""
    eye = np.eye(pair.p.shape[0])
    rp, rq = _range_basis(pair.p), _range_basis(pair.q)
    rp_perp, rq_perp = _range_basis(eye - pair.p), _range_basis(eye - pair.q)
    index = _intersection_dim(rp, rq_perp) - _intersection_dim(rp_perp, rq)
    by_trace = int(round(float(np.trace(pair.p - pair.q))))
    if index != by_trace:
        raise PairConsistencyError(f"rank index {index} differs from round(tr(P - Q)) = {by_trace}")
    return index


def morse_pair(a_plus: SymOp, a_minus: SymOp) -> ProjectionPair:
    """``(E_{A_-}((-inf, 0)), E_{A_+}((-inf, 0)))``."""
    return ProjectionPair(a_minus.projection(lambda w: w < 0), a_plus.projection(lambda w: w < 0))


# -- the chain of equal integers ---------------------------------------------


@dataclass
class ChainReport:
    spectral_flow: int
    pair_index: int
    morse_trace: int
    xi0: int
    xi0_H_median: float
    det_xi0: float
    det_tol: float = 1e-3
    certificate: Optional[FlowCertificate] = field(default=None, repr=False)

    @property
    def values(self) -> tuple:
        return (self.spectral_flow, self.pair_index, self.morse_trace, self.xi0,
                self.xi0_H_median, self.det_xi0)

    @property
    def all_equal(self) -> bool:
        ref = self.spectral_flow
        ints = (self.pair_index, self.morse_trace, self.xi0, self.xi0_H_median)
        return all(v == ref for v in ints) and abs(self.det_xi0 - ref) < self.det_tol

    def as_row(self) -> dict:
        return {
            "spectral_flow": self.spectral_flow,
            "pair_index": self.pair_index,
            "morse_trace": self.morse_trace,
            "xi0": self.xi0,
            "xi0_H_median": self.xi0_H_median,
            "det_xi0": self.det_xi0,
            "pass": self.all_equal,
        }


def morse_chain_report(path: OperatorPath, T: float = 12.0, N: int = 400, eps: float = 1e-4,
                       flow_config: FlowConfig | None = None, max_size: int = 2000) -> ChainReport:
    """Spectral flow, pair index, Morse trace, ``xi(0)``, ``xi_H`` median and determinant value.

    The time grid is coarsened so that ``N * dim <= max_size``.
    """
    from .dirac import TimeGrid, build_dirac, xi_H_median

    a_plus = asymptote_plus(path)
    a_minus = path.a_minus
    gap = _asymptote_gap(a_plus, a_minus)
    flow, cert = spectral_flow(path, flow_config)
    pair = fredholm_pair_index(morse_pair(a_plus, a_minus))
    trace = int(round(morse_trace(a_plus, a_minus)))
    xi0 = int(round(float(xi_counting(a_plus, a_minus)(0.0))))
    n_grid = min(N, max_size // path.dim)
    dd = build_dirac(path, TimeGrid(T, n_grid))
    xi_h = xi_H_median(dd, gap)
    det = xi_from_det(a_plus, a_minus, 0.0, eps)
    return ChainReport(flow, pair, trace, xi0, xi_h, det, certificate=cert)

