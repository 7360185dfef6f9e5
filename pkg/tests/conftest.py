import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "sflab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("sflab")


def random_sym(rng, n, scale=1.0):
    a = rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.T)


@st.composite
def sym_matrices(draw, max_n=12, min_n=1):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_sym(np.random.default_rng(seed), n, 2.0)


@st.composite
def sym_pairs(draw, max_n=12, max_pert=None):
    """``(A_+, A_-)`` as arrays; ``max_pert`` bounds ``||A_+ - A_-||``."""
    n = draw(st.integers(1, max_n))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    a = random_sym(rng, n, 2.0)
    v = random_sym(rng, n, 2.0)
    if max_pert is not None:
        v *= rng.uniform(0.05, 1.0) * max_pert / max(np.linalg.norm(v, 2), 1e-12)
    return a + v, a


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
