"""Ring and calculus identities for the truncated power series layer.

Exact (Fraction) series make the ring identities strict equalities;
the complex path is then checked against the exact one, which also
exercises whichever convolution backend is active.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_forge.series import PowerSeries

ORDER = 5


def exact_series(nvars):
    """Strategy: a random exact series in nvars variables at ORDER."""
    shape = (ORDER + 1,) * nvars
    n_entries = (ORDER + 1) ** nvars
    return st.lists(
        st.integers(min_value=-4, max_value=4), min_size=n_entries, max_size=n_entries
    ).map(lambda vals: _build(vals, nvars))


def _build(vals, nvars):
    out = PowerSeries.zero(nvars, ORDER, exact=True)
    it = iter(vals)
    for expo in np.ndindex(*out.coeffs.shape):
        if sum(expo) <= ORDER:
            out.coeffs[expo] = Fraction(next(it))
        else:
            next(it)
    return out


@given(exact_series(2), exact_series(2), exact_series(2))
@settings(max_examples=25, deadline=None)
def test_ring_axioms_exact(a, b, c):
    assert (a + b) * c == a * c + b * c
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a + (-a) == PowerSeries.zero(2, ORDER, exact=True)


@given(exact_series(2), exact_series(2))
@settings(max_examples=25, deadline=None)
def test_leibniz_rule(a, b):
    # the product rule is exact one order below the truncation cap
    lhs = (a * b).diff(0).truncate(ORDER - 1)
    rhs = (a.diff(0) * b + a * b.diff(0)).truncate(ORDER - 1)
    assert lhs == rhs


@given(exact_series(1), exact_series(1))
@settings(max_examples=25, deadline=None)
def test_complex_path_matches_exact(a, b):
    prod = (a * b).to_complex()
    prod_c = a.to_complex() * b.to_complex()
    assert np.max(np.abs(prod.coeffs - prod_c.coeffs)) < 1e-9


def test_mixed_exactness_rejected():
    a = PowerSeries.constant(1, 1, 3, exact=True)
    b = PowerSeries.constant(1, 1, 3, exact=False)
    with pytest.raises(ValueError):
        a * b


def test_evaluate_matches_monomial_sum():
    rng = np.random.default_rng(7)
    coeffs = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    s = PowerSeries.zero(2, 3)
    for (i, j), val in np.ndenumerate(coeffs):
        if i + j <= 3:
            s.coeffs[i, j] = val
    x, y = 0.3 - 0.2j, -0.1 + 0.5j
    direct = sum(
        s.coeffs[i, j] * x**i * y**j for i in range(4) for j in range(4)
    )
    assert abs(s(x, y) - direct) < 1e-13


def test_substitute_matches_pointwise():
    # f(u, v) at (u, v) = (g(x), h(x)) agrees with evaluation
    f = PowerSeries.from_terms({(0, 0): 2, (1, 0): 1, (1, 1): 3, (0, 2): -1}, 2, 6)
    g = PowerSeries.from_terms({(1,): 1, (2,): 0.5}, 1, 6)
    h = PowerSeries.from_terms({(1,): -1, (3,): 2}, 1, 6)
    comp = f.substitute([g, h])
    for x in (0.05, -0.08, 0.02 + 0.03j):
        expected = f(g(x), h(x))
        # composition truncated at degree 6; arguments are tiny so the tail is small
        assert abs(comp(x) - expected) < 1e-7


def test_substitute_requires_zero_constant_term():
    f = PowerSeries.variable(0, 1, 3)
    g = PowerSeries.constant(1, 1, 3)
    with pytest.raises(ValueError):
        f.substitute([g])


def test_chain_rule():
    f = PowerSeries.from_terms({(1,): 1, (2,): -2, (4,): 1}, 1, 8, exact=True)
    g = PowerSeries.from_terms({(1,): 3, (2,): 1, (3,): -1}, 1, 8, exact=True)
    comp = f.substitute([g])
    lhs = comp.diff(0).truncate(7)
    rhs = (f.diff(0).substitute([g]) * g.diff(0)).truncate(7)
    assert lhs == rhs


def test_exp_log_roundtrip_exact():
    s = PowerSeries.from_terms({(1, 0): 1, (0, 1): -2, (1, 1): 3}, 2, 6, exact=True)
    assert s.exp().log() == s
    # exp turns sums into products
    t = PowerSeries.from_terms({(0, 1): 1, (2, 0): 1}, 2, 6, exact=True)
    assert (s + t).exp() == s.exp() * t.exp()


def test_log_series_coefficients():
    x = PowerSeries.variable(0, 1, 6, exact=True)
    lg = (1 + x).log()
    for k in range(1, 7):
        assert lg.coeffs[k] == Fraction((-1) ** (k + 1), k)
    assert lg.coeffs[0] == 0


def test_exp_coefficients():
    x = PowerSeries.variable(0, 1, 7, exact=True)
    e = x.exp()
    for k in range(8):
        assert e.coeffs[k] == Fraction(1, math.factorial(k))


def test_reciprocal():
    x = PowerSeries.variable(0, 1, 9, exact=True)
    geom = (1 - x).reciprocal()
    assert all(geom.coeffs[k] == 1 for k in range(10))
    s = PowerSeries.from_terms({(0,): 2, (1,): 1, (3,): -5}, 1, 9, exact=True)
    assert s * s.reciprocal() == PowerSeries.constant(1, 1, 9, exact=True)
    with pytest.raises(ValueError):
        x.reciprocal()


def test_truncate_and_homogeneous():
    s = PowerSeries.from_terms({(0, 0): 1, (1, 1): 2, (2, 1): 3}, 2, 4, exact=True)
    t = s.truncate(2)
    assert t.order == 2 and t.coeffs[1, 1] == 2
    h = s.homogeneous(2)
    assert h.coeffs[1, 1] == 2 and h.coeffs[0, 0] == 0 and h.coeffs[2, 1] == 0


def test_power_matches_repeated_multiplication():
    s = PowerSeries.from_terms({(1,): 1, (0,): 1}, 1, 6, exact=True)
    assert s**4 == s * s * s * s
    assert s**0 == PowerSeries.constant(1, 1, 6, exact=True)


def test_diff_of_powers():
    x = PowerSeries.variable(0, 1, 5, exact=True)
    p = x**4
    assert p.diff(0) == 4 * x**3


def test_four_variable_multiply_falls_back():
    # nvars = 4 exercises the generic slice-add path for complex dtype
    a = PowerSeries.from_terms({(1, 0, 0, 0): 1, (0, 1, 0, 0): 2}, 4, 3)
    b = PowerSeries.from_terms({(0, 0, 1, 0): 1, (0, 0, 0, 1): -1}, 4, 3)
    p = a * b
    assert p.coeffs[1, 0, 1, 0] == 1
    assert p.coeffs[0, 1, 0, 1] == -2
