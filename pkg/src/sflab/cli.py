"""Scenario runner: ``sflab --experiment chain --config run.json --out report.csv``.

Config document (all keys optional)::

    {
      "scenario": "tanh2" | {"scenario": "...", "params": {...}, "dim": n, "support_hint": T},
      "experiment": "chain",
      "grid": {"T": 12, "N": 400},
      "params": {"m": 1.0, "z": -1.0, "z_a": "1j", ...},
      "tolerances": {"trace": 0.05, ...},
      "output": {"path": "report.csv", "format": "csv"}
    }

Command-line flags override the document. Exit status: 0 when every check
passes, 1 when a numerical check fails, 2 on configuration or usage errors.

CSV columns per experiment
--------------------------
flow         scenario, flow, intervals, margin, T0
ssf          breakpoint, value, invariance_ok
index        index, kernel_h1, kernel_h2, gap_ratio, T, N
trace-check  z, lhs, rhs, residual, resolvent_identity_residual
pushnitski   lam, abel_xi, xi_H
doi-check    case, n, residual
eta          m, eta_closed, eta_zeta, eta_heat, eta_zeta_xi_H, eta_heat_xi_H
chain        spectral_flow, pair_index, morse_trace, xi0, xi0_H_median, det_xi0, pass
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import dirac, doi, flow, oppath, ssf, transforms
from .matlin import SpectralDomainError, eig_sym

log = logging.getLogger("sflab")

EXPERIMENTS = ("flow", "ssf", "index", "trace-check", "pushnitski", "doi-check", "eta", "chain")

DEFAULT_TOL = {
    "trace": 0.05,
    "resolvent": 1e-9,
    "doi": 1e-6,
    "eta_zeta": 1e-3,
    "eta_heat": 5e-2,
    "xi_equal": 1e-12,
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: dict
    experiment: str
    T: float = 12.0
    N: int = 400
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    out: str | None = None
    fmt: str = "csv"
    seed: int = 0

    def tol(self, key: str) -> float:
        return float(self.tolerances.get(key, DEFAULT_TOL[key]))


@dataclass
class Report:
    columns: list
    rows: list
    failures: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def _scenario_doc(value) -> dict:
    if value is None:
        return {"scenario": "tanh2"}
    if isinstance(value, str):
        return {"scenario": value}
    if isinstance(value, dict):
        return value
    raise ConfigError(f"scenario must be a name or an object, got {type(value).__name__}")


def build_config(args: argparse.Namespace) -> RunConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    experiment = args.experiment or doc.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    grid = doc.get("grid") or {}
    output = doc.get("output") or {}
    fmt = args.format or output.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    tolerances = doc.get("tolerances") or {}
    unknown = set(tolerances) - set(DEFAULT_TOL)
    if unknown:
        raise ConfigError(f"unknown tolerance keys {sorted(unknown)}")
    cfg = RunConfig(
        scenario=_scenario_doc(args.scenario or doc.get("scenario")),
        experiment=experiment,
        T=float(grid.get("T", 12.0)),
        N=int(grid.get("N", 400)),
        params=dict(doc.get("params") or {}),
        tolerances=tolerances,
        out=args.out or output.get("path"),
        fmt=fmt,
        seed=int(args.seed if args.seed is not None else doc.get("seed", 0)),
    )
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


# -- experiments ---------------------------------------------------------------


def _asymptotes(path):
    return oppath.asymptote_plus(path), path.a_minus


def _exp_flow(cfg: RunConfig, path) -> Report:
    value, cert = flow.spectral_flow(path)
    row = [path.name, value, len(cert.epsilons), cert.margin, cert.T0]
    return Report(["scenario", "flow", "intervals", "margin", "T0"], [row],
                  extra={"certificate": json.loads(cert.to_json())})


def _exp_ssf(cfg: RunConfig, path) -> Report:
    a_plus, a_minus = _asymptotes(path)
    xi = ssf.xi_counting(a_plus, a_minus)
    same = xi.same_as(ssf.xi_invariance(a_plus, a_minus), rtol=cfg.tol("xi_equal"))
    rows = [[float(b), float(v), same] for b, v in zip(xi.breakpoints, xi.values[1:])]
    failures = [] if same else ["xi_invariance differs from xi_counting"]
    return Report(["breakpoint", "value", "invariance_ok"], rows, failures)


def _exp_index(cfg: RunConfig, path) -> Report:
    dd = dirac.build_dirac(path, dirac.TimeGrid(cfg.T, cfg.N))
    rep = dirac.index_report(dd, float(cfg.params.get("tol_factor", 1e-6)))
    failures = [] if rep["gap_ratio"] >= 100 else [f"gap ratio {rep['gap_ratio']:.3g} < 100"]
    expected = cfg.params.get("expected_index")
    if expected is not None and rep["index"] != int(expected):
        failures.append(f"index {rep['index']} != expected {expected}")
    row = [rep["index"], rep["kernel_h1"], rep["kernel_h2"], rep["gap_ratio"], cfg.T, cfg.N]
    return Report(["index", "kernel_h1", "kernel_h2", "gap_ratio", "T", "N"], [row], failures)


def _exp_trace(cfg: RunConfig, path) -> Report:
    z = complex(cfg.params.get("z", -1.0))
    dd = dirac.build_dirac(path, dirac.TimeGrid(cfg.T, cfg.N))
    lhs = dirac.resolvent_trace_diff(dd, z)
    rhs = dirac.trace_formula_rhs(path, z)
    a_plus, a_minus = _asymptotes(path)
    rid = ssf.resolvent_identity_residual(a_plus, a_minus, complex(cfg.params.get("z_a", 1j)))
    res = abs(lhs - rhs)
    failures = []
    if res >= cfg.tol("trace"):
        failures.append(f"trace formula residual {res:.3e}")
    if rid >= cfg.tol("resolvent"):
        failures.append(f"resolvent identity residual {rid:.3e}")
    return Report(["z", "lhs", "rhs", "residual", "resolvent_identity_residual"],
                  [[str(z), lhs.real, rhs.real, res, rid]], failures)


def _exp_pushnitski(cfg: RunConfig, path) -> Report:
    a_plus, a_minus = _asymptotes(path)
    xi = ssf.xi_counting(a_plus, a_minus)
    dd = dirac.build_dirac(path, dirac.TimeGrid(cfg.T, cfg.N))
    xi_h = dirac.xi_H_counting(dd)
    lam = np.asarray(cfg.params.get("lams", np.linspace(0.05, 4.0, 80)), dtype=float)
    rows = [[float(x), transforms.abel_forward(xi, float(x)), float(xi_h(x))] for x in lam]
    gap = flow._asymptote_gap(a_plus, a_minus)
    med = dirac.xi_H_median(dd, gap)
    # below gap^2 the transform sees only xi(0)
    failures = [] if med == float(xi(0.0)) else [f"xi_H median {med} differs from xi(0) = {xi(0.0)}"]
    return Report(["lam", "abel_xi", "xi_H"], rows, failures, extra={"xi_H_median": med})


def _random_pair(rng: np.random.Generator, n: int):
    a = rng.standard_normal((n, n))
    a = 0.5 * (a + a.T)
    v = rng.standard_normal((n, n))
    v = 0.5 * (v + v.T)
    v *= rng.uniform(0.1, 1.0) / np.linalg.norm(v, 2)
    return eig_sym(a + v), eig_sym(a)


def _exp_doi(cfg: RunConfig, path) -> Report:
    rng = np.random.default_rng(cfg.seed)
    quad = doi.DOIQuadrature.build(float(cfg.params.get("s_max", 8.0)), int(cfg.params.get("nodes", 400)))
    a_plus, a_minus = _asymptotes(path)
    cases = [(path.name, a_plus, a_minus)]
    for k in range(int(cfg.params.get("random_pairs", 5))):
        ap, am = _random_pair(rng, int(rng.integers(1, 9)))
        cases.append((f"random{k}", ap, am))
    rows, failures = [], []
    for name, ap, am in cases:
        _, res = doi.g_diff_via_doi(ap, am, quad=quad)
        rows.append([name, ap.dim, res])
        if res >= cfg.tol("doi"):
            failures.append(f"DOI residual {res:.3e} for {name}")
    return Report(["case", "n", "residual"], rows, failures)


def _exp_eta(cfg: RunConfig, path) -> Report:
    a_plus, a_minus = _asymptotes(path)
    xi = ssf.xi_counting(a_plus, a_minus)
    ms = cfg.params.get("m", 1.0)
    ms = ms if isinstance(ms, list) else [ms]
    s = float(cfg.params.get("s", 1e-3))
    t = float(cfg.params.get("t", 1e-3))
    rows, failures = [], []
    for m in map(float, ms):
        closed = transforms.eta_closed(xi, m)
        zeta = transforms.eta_zeta(xi, m, s)
        heat = transforms.eta_heat(xi, m, t)
        zeta_h = transforms.eta_zeta_from_xi_h(xi, m, s)
        heat_h = transforms.eta_heat_from_xi_h(xi, m, t)
        rows.append([m, closed, zeta, heat, zeta_h, heat_h])
        if abs(zeta - closed) >= cfg.tol("eta_zeta"):
            failures.append(f"eta_zeta off by {abs(zeta - closed):.3e} at m={m}")
        if abs(heat - closed) >= cfg.tol("eta_heat"):
            failures.append(f"eta_heat off by {abs(heat - closed):.3e} at m={m}")
    return Report(["m", "eta_closed", "eta_zeta", "eta_heat", "eta_zeta_xi_H", "eta_heat_xi_H"],
                  rows, failures)


def _exp_chain(cfg: RunConfig, path) -> Report:
    rep = flow.morse_chain_report(path, T=cfg.T, N=cfg.N, eps=float(cfg.params.get("eps", 1e-4)))
    row = rep.as_row()
    failures = [] if rep.all_equal else [f"chain values differ: {rep.values}"]
    return Report(list(row), [list(row.values())], failures)


RUNNERS: dict[str, Callable[[RunConfig, oppath.OperatorPath], Report]] = {
    "flow": _exp_flow,
    "ssf": _exp_ssf,
    "index": _exp_index,
    "trace-check": _exp_trace,
    "pushnitski": _exp_pushnitski,
    "doi-check": _exp_doi,
    "eta": _exp_eta,
    "chain": _exp_chain,
}


# -- output --------------------------------------------------------------------


def _plain(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def render(report: Report, cfg: RunConfig) -> str:
    rows = [[_plain(v) for v in r] for r in report.rows]
    if cfg.fmt == "json":
        doc = {
            "experiment": cfg.experiment,
            "scenario": cfg.scenario,
            "columns": report.columns,
            "rows": rows,
            "pass": report.ok,
            "failures": report.failures,
            **report.extra,
        }
        return json.dumps(doc, indent=2) + "\n"
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(report.columns)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return out.getvalue()


def _thread_limit():
    n = os.environ.get("SFL_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(n)))


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sflab", description="Spectral flow and spectral shift experiments.")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    p.add_argument("--scenario", help="gallery scenario name (overrides the config)")
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", type=int, help="seed for randomized sweeps (unsigned 64-bit)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


NUMERICAL_ERRORS = (
    ArithmeticError,
    np.linalg.LinAlgError,
    flow.FlowCertificationError,
    flow.FlowPreconditionError,
    flow.PairConsistencyError,
    ssf.BranchTrackingError,
    ssf.ResolventSetError,
    SpectralDomainError,
    dirac.IndexResolutionError,
)


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        path = oppath.load_scenario(cfg.scenario)
        if cfg.N * path.dim > dirac.MAX_SIZE and cfg.experiment in ("index", "trace-check", "pushnitski"):
            raise ConfigError(f"grid N={cfg.N} times dim {path.dim} exceeds {dirac.MAX_SIZE}")
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"sflab: error: {exc}", file=sys.stderr)
        return 2
    try:
        with _thread_limit():
            report = RUNNERS[cfg.experiment](cfg, path)
    except NUMERICAL_ERRORS as exc:
        print(f"sflab: numerical failure in {cfg.experiment}: {exc}", file=sys.stderr)
        return 1
    text = render(report, cfg)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    for msg in report.failures:
        print(f"sflab: check failed: {msg}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
