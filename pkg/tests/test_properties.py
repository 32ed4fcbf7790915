import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qjump.environment import RngStream
from qjump.errors import PreconditionError
from qjump.operators import GridSpec
from qjump.properties import CHECKS, GaussianSymbol, appendix_property_suite, random_symbol


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symbol_transform_matches_quadrature(seed):
    sym = random_symbol(np.random.default_rng(seed))
    for k in (-2.0, 0.3, 1.7):
        re = integrate.quad(lambda y: (sym(y) * np.exp(-1j * k * y)).real, -np.inf, np.inf)[0]
        im = integrate.quad(lambda y: (sym(y) * np.exp(-1j * k * y)).imag, -np.inf, np.inf)[0]
        assert complex(sym.fourier(k)) == pytest.approx((re + 1j * im) / np.sqrt(2 * np.pi), abs=1e-9)


def test_symbol_derivatives_by_finite_differences():
    sym = GaussianSymbol((0.6 + 0.2j, -0.3j), (0.7, -1.1), (0.5, 1.3))
    h = 1e-4
    f = lambda y: complex(sym(y))
    d0, d1, d2 = sym.derivatives_at_zero()
    assert d0 == pytest.approx(f(0.0), abs=1e-15)
    assert d1 == pytest.approx((f(h) - f(-h)) / (2 * h), abs=1e-7)
    assert d2 == pytest.approx((f(h) - 2 * f(0.0) + f(-h)) / h**2, abs=1e-5)
    # one term: the transform is a positive Gaussian, so its L1 norm is closed form
    one = GaussianSymbol((1.0,), (0.4,), (0.8,))
    assert one.fourier_l1() == pytest.approx(1.0, rel=1e-10)


def test_suite_finds_no_violations():
    rep = appendix_property_suite(100, RngStream(2024, 0), GridSpec(10.0, 128))
    assert rep.ok, rep.summary_lines()
    assert set(rep.counts) == set(CHECKS)
    assert all(rep.counts[c] >= 100 for c in CHECKS)
    assert len(rep.summary_lines()) == len(CHECKS)


def test_suite_preconditions():
    with pytest.raises(PreconditionError, match="trials"):
        appendix_property_suite(10, RngStream(0, 0))
    with pytest.raises(PreconditionError, match="too coarse"):
        appendix_property_suite(100, RngStream(0, 0), GridSpec(10.0, 64))
