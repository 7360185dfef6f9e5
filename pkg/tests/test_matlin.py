import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sflab.matlin import (SingularMatrixError, SpectralDomainError, SymmetryError, apply_fn,
                          counting, eig_sym, log_det, op_norm, pairwise_sum, trace_norm)

from conftest import random_sym, sym_matrices


def test_eig_diagonal_gives_permutation_basis():
    a = eig_sym(np.diag([3.0, 1.0]))
    np.testing.assert_array_equal(a.spectrum, [1.0, 3.0])
    np.testing.assert_allclose(np.abs(a.basis), [[0, 1], [1, 0]])


def test_eig_identity_and_swap():
    np.testing.assert_array_equal(eig_sym(np.eye(2)).spectrum, [1.0, 1.0])
    # characteristic polynomial x^2 - 1
    np.testing.assert_allclose(eig_sym([[0.0, 1.0], [1.0, 0.0]]).spectrum, [-1.0, 1.0], atol=1e-15)


def test_eig_rejects_asymmetric_with_report():
    with pytest.raises(SymmetryError) as err:
        eig_sym([[0.0, 1.0], [0.5, 0.0]])
    assert err.value.asymmetry == pytest.approx(0.5)


def test_eig_rejects_non_square():
    with pytest.raises(ValueError):
        eig_sym(np.zeros((2, 3)))


def test_apply_fn_examples():
    g = lambda x: x / np.sqrt(x * x + 1)  # noqa: E731
    np.testing.assert_allclose(apply_fn(eig_sym([[1.0]]), g), [[1 / np.sqrt(2)]], rtol=1e-15)
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(apply_fn(eig_sym(swap), lambda x: x**2), swap @ swap, atol=1e-14)


def test_apply_fn_domain_error_names_eigenvalue():
    a = eig_sym(np.diag([-1.0, 0.0, 2.0]))
    with pytest.raises(SpectralDomainError) as err:
        apply_fn(a, lambda x: 1.0 / x)
    assert err.value.eigenvalue == 0.0


def test_log_det_examples():
    assert log_det(np.eye(3)) == 0
    assert log_det(np.diag([np.e, np.e])) == pytest.approx(2.0, abs=1e-15)
    assert log_det(np.array([[-1.0 + 0j]])) == pytest.approx(1j * np.pi, abs=1e-15)


def test_log_det_singular_reports_pivot():
    with pytest.raises(SingularMatrixError) as err:
        log_det(np.array([[1.0, 2.0], [2.0, 4.0]]))
    assert err.value.pivot < 1e-14


def test_counting_examples():
    a = eig_sym(np.diag([-2.0, 1.0]))
    assert counting(a, 0.0) == 1
    assert counting(a, 2.0) == 2
    assert counting(a, -5.0) == 0
    assert counting(a, 1.0) == 2  # right-continuous


def test_norms():
    m = np.diag([3.0, -4.0])
    assert trace_norm(m) == pytest.approx(7.0)
    assert op_norm(m) == pytest.approx(4.0)


def test_pairwise_sum_matches_sum():
    terms = [np.full(2, float(k)) for k in range(11)]
    np.testing.assert_array_equal(pairwise_sum(terms), np.full(2, 55.0))
    with pytest.raises(ValueError):
        pairwise_sum([])


@given(sym_matrices(max_n=40))
def test_identity_and_constant_functions(m):
    a = eig_sym(m)
    np.testing.assert_allclose(apply_fn(a, lambda x: x), m, atol=1e-12 * (1 + np.abs(m).max()))
    np.testing.assert_allclose(apply_fn(a, lambda x: np.ones_like(x)), np.eye(a.dim), atol=1e-12)


@given(sym_matrices(max_n=20))
def test_trace_of_function_is_sum_over_spectrum(m):
    a = eig_sym(m)
    f = np.exp
    assert np.trace(apply_fn(a, f)) == pytest.approx(np.sum(f(a.spectrum)), rel=1e-10)


@given(sym_matrices(max_n=15), st.lists(st.floats(-8, 8), min_size=2, max_size=10))
def test_counting_monotone_and_right_continuous(m, lams):
    a = eig_sym(m)
    lams = sorted(lams)
    counts = [counting(a, x) for x in lams]
    assert counts == sorted(counts)
    for j, w in enumerate(a.spectrum):
        assert counting(a, w) >= j + 1


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_log_det_multiplicative(n, seed):
    rng = np.random.default_rng(seed)
    m1 = rng.standard_normal((n, n)) + 3 * np.eye(n)
    m2 = rng.standard_normal((n, n)) + 3 * np.eye(n)
    lhs = np.exp(log_det(m1 @ m2))
    rhs = np.exp(log_det(m1)) * np.exp(log_det(m2))
    assert abs(lhs - rhs) <= 1e-8 * abs(rhs)


def test_log_det_matches_slogdet(rng):
    m = random_sym(rng, 7) + 0.5 * np.eye(7)
    sign, ld = np.linalg.slogdet(m)
    got = log_det(m)
    assert got.real == pytest.approx(ld, rel=1e-12)
    assert np.exp(1j * got.imag) == pytest.approx(sign, abs=1e-12)
