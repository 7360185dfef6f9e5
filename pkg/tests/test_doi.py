import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sflab import doi
from sflab.matlin import apply_fn, eig_sym, trace_norm

from conftest import random_sym, sym_pairs

QUAD = doi.DOIQuadrature.build()


def test_zeta_hat_values():
    assert doi.zeta_hat(0.0) == pytest.approx(math.pi)
    assert doi.zeta_hat(1.0) == pytest.approx(math.pi / math.cosh(math.pi), rel=1e-15)
    assert doi.zeta_hat(1.0) == pytest.approx(0.2710150, abs=1e-7)
    s = np.linspace(-5, 5, 11)
    np.testing.assert_array_equal(doi.zeta_hat(s), doi.zeta_hat(-s))


def test_zeta_hat_against_quadrature_of_zeta():
    x = np.linspace(-80, 80, 160001)
    dx = x[1] - x[0]
    for s in (0.0, 0.5, 1.0):
        num = np.sum(doi.zeta(x) * np.cos(s * x)) * dx
        assert num == pytest.approx(float(doi.zeta_hat(s)), abs=1e-6)


def test_psi_values():
    assert doi.psi_eval(0.0, 0.0) == 0.5
    exact = (10 ** 0.25 * 2 ** 0.25) / (10 ** 0.5 + 2 ** 0.5)
    assert doi.psi_eval(3.0, 1.0) == pytest.approx(exact, rel=1e-15)
    assert exact == pytest.approx(0.4620882, abs=1e-7)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_psi_symmetric_and_bounded(x, y):
    assert doi.psi_eval(x, y) == doi.psi_eval(y, x)
    assert 0 < doi.psi_eval(x, y) <= 0.5


def test_phi_values():
    assert doi.phi_eval(0.0, 0.0) == pytest.approx(1.0)
    g = lambda x: x / math.sqrt(x * x + 1)  # noqa: E731
    exact = (g(3) - g(1)) * (10 * 2) ** 0.25 / 2
    assert doi.phi_eval(3.0, 1.0) == pytest.approx(exact, rel=1e-14)
    assert exact == pytest.approx(0.2554361, abs=1e-7)


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_phi_split_identity(x, y):
    if abs(x - y) < 1e-3:
        return
    assert doi.phi_split(x, y) == pytest.approx(float(doi.phi_eval(x, y)), abs=1e-12)


def test_phi_near_diagonal_continuous():
    x = 0.7
    assert doi.phi_eval(x, x + 1e-9) == pytest.approx(float(doi.phi_eval(x, x + 1e-3)), abs=2e-3)
    # g'(x) (x^2 + 1)^{1/2} on the diagonal
    assert doi.phi_eval(x, x) == pytest.approx((x * x + 1) ** -1.0, rel=1e-12)


def test_quadrature_rule():
    assert QUAD.nodes.size == 400 and QUAD.s_max == 8
    assert np.sum(QUAD.weights) == pytest.approx(16.0)
    assert doi.tail_bound(8.0) < 1e-9
    with pytest.raises(ValueError):
        doi.DOIQuadrature.build(s_max=3.0)
    with pytest.raises(ValueError):
        doi.DOIQuadrature.build(n_nodes=410)
    assert doi.DOIQuadrature.for_tolerance(1e-6).s_max >= 5


def test_k_operator():
    a = eig_sym([[0.4, 0.2], [0.2, -1.0]])
    assert np.all(doi.k_operator(a, a) == 0)
    assert doi.k_operator(eig_sym([[3.0]]), eig_sym([[1.0]]))[0, 0] == pytest.approx(2 * 20 ** -0.25)
    assert 2 * 20 ** -0.25 == pytest.approx(0.94574, abs=1e-5)


@given(sym_pairs(max_n=8))
def test_k_operator_bound(pair):
    ap, am = map(eig_sym, pair)
    k = doi.k_operator(ap, am)
    inv_half = apply_fn(am, lambda x: (x * x + 1) ** -0.5)
    left = np.linalg.norm((ap.entries - am.entries) @ inv_half, 2)
    right = np.linalg.norm(apply_fn(ap, lambda x: (x * x + 1) ** -0.25) @ apply_fn(am, lambda x: (x * x + 1) ** 0.25), 2)
    assert np.linalg.norm(k, 2) <= left * right * (1 + 1e-12)


def test_t_psi_scalar():
    ap, am = eig_sym([[3.0]]), eig_sym([[1.0]])
    assert doi.t_psi(ap, am, np.array([[1.7]]), QUAD)[0, 0] == pytest.approx(1.7 * doi.psi_eval(3.0, 1.0), abs=1e-10)
    assert np.all(doi.t_psi(ap, am, np.zeros((1, 1)), QUAD) == 0)


@given(sym_pairs(max_n=7))
def test_t_psi_matches_schur_multiplier(pair):
    ap, am = map(eig_sym, pair)
    k = np.random.default_rng(0).standard_normal((ap.dim, ap.dim))
    np.testing.assert_allclose(doi.t_psi(ap, am, k, QUAD), doi.schur_psi(ap, am, k), atol=1e-9)


def test_t_psi_commuting_diagonal():
    a = eig_sym(np.diag([-2.0, 0.5, 3.0]))
    k = np.arange(9.0).reshape(3, 3)
    lam = a.spectrum
    np.testing.assert_allclose(doi.t_psi(a, a, k, QUAD), doi.psi_eval(lam[:, None], lam[None, :]) * k, atol=1e-9)


def test_g_diff_scalar():
    ap, am = eig_sym([[3.0]]), eig_sym([[1.0]])
    tk, res = doi.g_diff_via_doi(ap, am, quad=QUAD)
    assert tk[0, 0] == pytest.approx(3 / math.sqrt(10) - 1 / math.sqrt(2), abs=1e-8)
    assert res < 1e-8
    assert doi.g_diff_via_doi(am, am, quad=QUAD)[1] == 0
    with pytest.raises(ValueError):
        doi.g_diff_via_doi(ap, am, tol=1e-12)


def test_g_diff_random_6x6(rng):
    a = random_sym(rng, 6, 2.0)
    v = random_sym(rng, 6)
    v /= np.linalg.norm(v, 2)
    assert doi.g_diff_via_doi(eig_sym(a + v), eig_sym(a), quad=QUAD)[1] < 1e-6


@given(sym_pairs(max_n=8), st.integers(0, 2**32 - 1))
def test_t_phi_trace_norm_bound(pair, seed):
    ap, am = map(eig_sym, pair)
    k = np.random.default_rng(seed).standard_normal((ap.dim, ap.dim))
    assert trace_norm(doi.t_phi(ap, am, k, QUAD)) <= 1.5 * trace_norm(k)


def test_residual_converges_with_quadrature(rng):
    a = random_sym(rng, 5, 2.0)
    v = random_sym(rng, 5)
    ap, am = eig_sym(a + 0.5 * v / np.linalg.norm(v, 2)), eig_sym(a)
    res = [doi.g_diff_via_doi(ap, am, quad=doi.DOIQuadrature.build(s, n, tol=1.0))[1]
           for s, n in ((2.0, 40), (4.0, 100), (8.0, 400))]
    assert res[0] > res[1] > res[2]
