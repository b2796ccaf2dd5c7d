import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mkd.errors import DomainError
from mkd.special import chi2_cdf, chi2_quantile, gammainc_lower

# reference values from 30-digit arbitrary-precision root finding
QUANTILES = [
    (5, 0.9, 9.23635689978111905406),
    (1, 0.99, 6.63489660102121355625),
    (10, 0.5, 9.34181776559196744063),
    (3, 0.95, 7.81472790325117797351),
    (1, 0.95, 3.84145882069412447),
]


@pytest.mark.parametrize("p,gamma,expected", QUANTILES)
def test_reference_quantiles(p, gamma, expected):
    assert chi2_quantile(p, gamma) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("gamma", [0.05, 0.5, 0.95, 0.999])
def test_two_degrees_closed_form(gamma):
    assert chi2_quantile(2, gamma) == pytest.approx(-2 * math.log1p(-gamma), abs=1e-8)


@pytest.mark.parametrize("a,x,expected", [
    (2.5, 1.7, 0.361430076896204909881),
    (3.0, 10.0, 0.997230604284488424056),
    (1.0, 2.0, 1 - math.exp(-2.0)),
])
def test_incomplete_gamma(a, x, expected):
    assert gammainc_lower(a, x) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("p", range(1, 21))
@pytest.mark.parametrize("gamma", [0.5, 0.9, 0.95, 0.99])
def test_roundtrip(p, gamma):
    assert chi2_cdf(chi2_quantile(p, gamma), p) == pytest.approx(gamma, abs=1e-8)


@settings(max_examples=100)
@given(st.floats(0.1, 50.0), st.floats(0.0, 120.0))
def test_cdf_against_scipy(a, x):
    assert gammainc_lower(a, x) == pytest.approx(stats.gamma.cdf(x, a), abs=1e-12)


@pytest.mark.parametrize("p,gamma", [(0, 0.5), (1.5, 0.5), (2, 0.0), (2, 1.0), (2, -0.1)])
def test_domain_errors(p, gamma):
    with pytest.raises(DomainError):
        chi2_quantile(p, gamma)


def test_monotone_in_level():
    levels = np.linspace(0.05, 0.95, 10)
    qs = [chi2_quantile(4, g) for g in levels]
    assert all(a < b for a, b in zip(qs, qs[1:]))
