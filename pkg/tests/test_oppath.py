import json
import math

import numpy as np
import pytest

from sflab import oppath as op
from sflab.matlin import SymmetryError, apply_fn, eig_sym, trace_norm


def _g(x):
    return x / np.sqrt(x * x + 1)


def test_tanh_path_values():
    p = op.tanh2()
    np.testing.assert_allclose(op.a_of(p, 0.0).entries, np.zeros((2, 2)), atol=1e-15)
    np.testing.assert_allclose(op.a_of(p, 40.0).entries, np.eye(2), atol=1e-15)
    with pytest.raises(ValueError):
        op.a_of(p, math.inf)


def test_constant_path():
    a = np.diag([5.0, -1.0])
    p = op.constant_path(a)
    np.testing.assert_array_equal(op.a_of(p, 3.7).entries, a)
    np.testing.assert_array_equal(op.asymptote_plus(p).entries, a)


def test_asymptote_of_tanh2_is_identity():
    np.testing.assert_allclose(op.asymptote_plus(op.tanh2()).entries, np.eye(2), atol=1e-14)


def test_asymptote_by_quadrature():
    e11 = np.diag([1.0, 0.0])
    base = np.diag([-1.0, 2.0])
    sech2 = lambda t: 1 / math.cosh(t) ** 2  # noqa: E731
    p = op.OperatorPath(eig_sym(base), lambda t: (1 + math.tanh(t)) * e11,
                        lambda t: sech2(t) * e11, None, 20.0)
    np.testing.assert_allclose(op.asymptote_plus(p).entries, base + 2 * e11, atol=1e-9)


def test_divergent_tail_reports_magnitude():
    e = np.eye(1)
    p = op.OperatorPath(eig_sym(e), lambda t: t * e, lambda t: e, None, 5.0)
    with pytest.raises(op.DivergentTailError) as err:
        op.asymptote_plus(p)
    assert err.value.tail > 1


def test_asymmetric_evaluator_rejected():
    p = op.OperatorPath(eig_sym(np.eye(2)), lambda t: np.array([[0.0, 1.0], [0.0, 0.0]]),
                        lambda t: np.zeros((2, 2)))
    with pytest.raises(SymmetryError):
        op.a_of(p, 0.0)


def test_truncate_examples():
    a = np.diag([-2.0, 0.5])
    p = op.constant_path(a)
    t = op.truncate(p, 1.0)
    np.testing.assert_allclose(t.a_minus.entries, np.diag([0.0, 0.5]), atol=1e-15)
    assert op.truncate(p, 3.0).a_minus is p.a_minus
    np.testing.assert_array_equal(op.truncate(p, 0.1).a_minus.entries, np.zeros((2, 2)))


def test_truncate_commutes_with_asymptote():
    p = op.lattice1d()
    level = 2.0
    proj = p.a_minus.projection(lambda w: np.abs(w) < level)
    got = op.asymptote_plus(op.truncate(p, level)).entries
    np.testing.assert_allclose(got, proj @ op.asymptote_plus(p).entries @ proj, atol=1e-12)
    # through quadrature rather than the stored asymptote
    t = op.truncate(p, level)
    from dataclasses import replace
    quad = op.asymptote_plus(replace(t, b_plus=None)).entries
    np.testing.assert_allclose(quad, got, atol=1e-8)


def test_truncation_sweep_decreases_to_zero():
    p = op.lattice1d()
    ap = op.asymptote_plus(p)
    full = apply_fn(ap, _g) - apply_fn(p.a_minus, _g)
    levels = np.linspace(0.5, p.a_minus.norm + 0.1, 10)
    errs = []
    for lv in levels:
        t = op.truncate(p, lv)
        errs.append(trace_norm(full - (apply_fn(op.asymptote_plus(t), _g) - apply_fn(t.a_minus, _g))))
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    assert errs[-1] == 0.0


def test_reparameterize_keeps_values():
    p = op.rot2()
    r = op.reparameterize(p, lambda t: t**3 + t, lambda t: 3 * t * t + 1, support_hint=3.0)
    np.testing.assert_allclose(r.b_at(0.7), p.b_at(0.7**3 + 0.7))
    np.testing.assert_allclose(r.bprime_at(0.7), p.bprime_at(0.7**3 + 0.7) * (3 * 0.49 + 1))


def test_hypothesis_report_constant():
    rep = op.hypothesis_report(op.constant_path(np.diag([1.0, 2.0])), np.linspace(-5, 5, 11))
    assert rep.as_dict() == {"sym_defect_B": 0.0, "sym_defect_Bprime": 0.0, "trace_integral": 0.0,
                             "consistency_defect": 0.0, "asymptote_gap": 0.0}


def test_hypothesis_report_tanh_trace_integral():
    rep = op.hypothesis_report(op.tanh2(), np.linspace(-20, 20, 4001))
    # ||sech^2 I_2 (|A_-| + 1)^{-1}||_tr = sech^2, integral 2
    assert rep.trace_integral == pytest.approx(2.0, abs=1e-6)
    assert rep.consistency_defect < 1e-8
    assert rep.asymptote_gap < 1e-8


def test_hypothesis_report_flags_asymmetry():
    bad = np.array([[0.0, 1.0], [0.0, 0.0]])
    p = op.OperatorPath(eig_sym(np.eye(2)), lambda t: bad * math.exp(-t * t),
                        lambda t: bad * -2 * t * math.exp(-t * t))
    rep = op.hypothesis_report(p, np.linspace(-3, 3, 31))
    assert rep.sym_defect_B > 0 and rep.sym_defect_Bprime > 0


def test_rot2_keeps_spectrum_and_rotates():
    p = op.rot2()
    for t in (-3.0, 0.0, 2.5):
        np.testing.assert_allclose(op.a_of(p, t).spectrum, [-1.0, 2.0], atol=1e-13)
    np.testing.assert_allclose(op.asymptote_plus(p).entries, np.diag([2.0, -1.0]), atol=1e-13)
    # stored asymptote agrees with the integral of B'
    total, _ = op.bprime_integral(p)
    np.testing.assert_allclose(total, p.b_plus, atol=1e-8)


def test_load_scenario_variants(tmp_path):
    assert op.load_scenario({"scenario": "tanh2"}).name == "tanh2"
    doc = {"scenario": "lattice1d", "params": {"sites": 8}, "dim": 8}
    f = tmp_path / "s.json"
    f.write_text(json.dumps(doc))
    assert op.load_scenario(f).dim == 8
    custom = op.load_scenario({"scenario": "custom", "params": {
        "a_minus": [[-1.0, 0.0], [0.0, -1.0]], "b_coeffs": [[[1.0, 0], [0, 1.0]], [[1.0, 0], [0, 1.0]]]}})
    np.testing.assert_allclose(op.asymptote_plus(custom).entries, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(custom.b_at(-50.0), np.zeros((2, 2)), atol=1e-14)
    with pytest.raises(KeyError):
        op.load_scenario({"scenario": "nope"})
    with pytest.raises(ValueError):
        op.load_scenario({"scenario": "tanh2", "dim": 3})
