import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgcalc import expr as ex
from sgcalc import series
from sgcalc.calculus import (DiffSymbol, FormalSum, GevreyCutoff, adjoint, compose, default_theta_c,
                             exact_composition, gevrey_cutoff, parametrix, remainder_order, require_fit,
                             subtract_identity)
from sgcalc.errors import DegenerateFit, NotElliptic, TruncationCap
from sgcalc.seminorm import GevreyIndices, PhaseGrid, SGOrder, radial_grid, sg_seminorm_estimate

XI = ex.xi(1)
X = ex.x(1)


def _vals(fs, x, xi):
    return [complex(ex.evaluate(t, [x], [xi])) for t in fs.terms]


def test_compose_examples():
    # xi # x = x xi - i ; xi^2 # x^2 = x^2 xi^2 - 4 i x xi - 2
    c = compose(FormalSum([XI], SGOrder(1, 0)), FormalSum([X], SGOrder(0, 1)), 2)
    assert _vals(c, 1.5, 2.0) == pytest.approx([3.0, -1j])
    c = compose(FormalSum([ex.power(XI, 2)], SGOrder(2, 0)), FormalSum([ex.power(X, 2)], SGOrder(0, 2)), 3)
    assert _vals(c, 1.5, 2.0) == pytest.approx([9.0, -12j, -2.0])


def test_adjoint_example():
    a = adjoint(FormalSum([ex.mul(X, XI)], SGOrder(1, 1)), 2)
    assert _vals(a, 0.7, -1.1) == pytest.approx([0.7 * -1.1, -1j])


def test_truncation_cap():
    a = FormalSum([XI], SGOrder(1, 0))
    with pytest.raises(TruncationCap):
        compose(a, a, 7)
    assert compose(a, a, 7, cap=10).N == 7


def test_formal_sum_json_round_trip():
    w = ex.power(ex.bracket(ex.X, 1), 2)
    a = DiffSymbol({(0,): w, (2,): w}, 1, SGOrder(2, 2))
    b = parametrix(a, 3, B=1.0)
    again = FormalSum.from_json(json.loads(b.dumps()))
    assert again.terms == b.terms
    assert again.cutoff.B == b.cutoff.B and again.cutoff.theta_c == b.cutoff.theta_c
    assert again.dumps() == b.dumps()


def test_cutoff_regions_and_derivatives():
    chi = gevrey_cutoff(2.0, 2.0)
    assert chi([0.5], [1.0]) == 0.0
    assert chi([3.0], [3.0]) == 1.0
    mid = chi([2.2], [1.0])
    assert 0 < mid < 1
    # exact derivative against central differences
    h = 1e-5
    for alpha, beta in [((1,), (0,)), ((0,), (1,)), ((1,), (1,))]:
        got = chi.derivative(alpha, beta, [np.array(2.0)], [np.array(1.3)])
        if alpha == (1,) and beta == (0,):
            fd = (chi([2.0], [1.3 + h]) - chi([2.0], [1.3 - h])) / (2 * h)
        elif beta == (1,) and alpha == (0,):
            fd = (chi([2.0 + h], [1.3]) - chi([2.0 - h], [1.3])) / (2 * h)
        else:
            fd = (chi([2.0 + h], [1.3 + h]) - chi([2.0 + h], [1.3 - h])
                  - chi([2.0 - h], [1.3 + h]) + chi([2.0 - h], [1.3 - h])) / (4 * h * h)
        assert float(got) == pytest.approx(float(fd), rel=1e-4, abs=1e-8)


def test_cutoff_arguments():
    with pytest.raises(ValueError):
        GevreyCutoff(0.0)
    with pytest.raises(ValueError):
        GevreyCutoff(1.0, 1.0)
    assert default_theta_c(GevreyIndices(1.0, 1.0)) == 2.0
    assert default_theta_c(GevreyIndices(1.5, 3.0)) == 1.5


def test_parametrix_leading_terms():
    a = DiffSymbol({(0,): 1, (2,): 1}, 1, SGOrder(2, 0))
    b = parametrix(a, 3, B=1.0)
    assert complex(ex.evaluate(b.terms[0], [0.3], [2.0])) == pytest.approx(1 / 5)
    # x-independent symbol: all corrections vanish identically
    assert b.terms[1] == ex.ZERO and b.terms[2] == ex.ZERO
    fit = remainder_order(subtract_identity(exact_composition(b, a)), n=1)
    assert fit.degenerate
    with pytest.raises(DegenerateFit):
        require_fit(fit)


def test_parametrix_rejects_non_elliptic():
    bad = DiffSymbol({(0,): ex.add(1, ex.power(X, 2)), (2,): 1}, 1, SGOrder(2, 2))
    with pytest.raises(NotElliptic):
        parametrix(bad, 2, B=1.0)


def test_parametrix_remainder_slopes_sg():
    w = ex.power(ex.bracket(ex.X, 1), 2)
    a = DiffSymbol({(0,): w, (2,): w}, 1, SGOrder(2, 2))
    for N, bound in [(2, -1.8), (3, -2.8)]:
        fit = remainder_order(subtract_identity(exact_composition(parametrix(a, N, 1.0), a)), n=1)
        assert fit.slope_x <= bound and fit.slope_xi <= bound


def test_seminorm_estimate_bounded_for_symbol_of_its_order():
    e = ex.mul(ex.power(ex.bracket(ex.X, 1), 2), ex.power(ex.bracket(ex.XI, 1), 2))
    g1 = radial_grid(1, 1.0, 1e2, 8, 4, 0)
    g2 = radial_grid(1, 1.0, 1e4, 8, 4, 0)
    s1 = sg_seminorm_estimate(e, SGOrder(2, 2), g1, max_total=3)
    s2 = sg_seminorm_estimate(e, SGOrder(2, 2), g2, max_total=3)
    for key in s1:
        assert s2[key] <= 1.5 * s1[key] + 1e-8
    # a symbol of higher order than declared grows with the grid
    t1 = sg_seminorm_estimate(e, SGOrder(1, 2), g1)
    t2 = sg_seminorm_estimate(e, SGOrder(1, 2), g2)
    assert t2[((0,), (0,))] > 10 * t1[((0,), (0,))]
    with pytest.raises(TruncationCap):
        sg_seminorm_estimate(e, SGOrder(2, 2), g1, max_total=7)
    assert isinstance(g1, PhaseGrid)


# -- properties ---------------------------------------------------------------

polys = st.lists(st.integers(-3, 3), min_size=1, max_size=4)


def _sym(coeffs_by_k):
    return DiffSymbol({(k,): ex.add(*[ex.mul(c, ex.power(X, i)) for i, c in enumerate(cs)])
                       for k, cs in enumerate(coeffs_by_k)}, 1, SGOrder(len(coeffs_by_k) - 1, 3))


@settings(max_examples=25, deadline=None)
@given(st.lists(polys, min_size=1, max_size=3), st.lists(polys, min_size=1, max_size=3),
       st.lists(polys, min_size=1, max_size=3))
def test_composition_associative(pa, pb, pc):
    a, b, c = _sym(pa), _sym(pb), _sym(pc)
    N = 6
    lhs = compose(compose(a, b, N, cap=10), c, N, cap=10).total()
    rhs = compose(a, compose(b, c, N, cap=10), N, cap=10).total()
    x, xi = [np.array([0.4, -1.3])], [np.array([1.7, 0.2])]
    l, r = ex.evaluate(lhs, x, xi), ex.evaluate(rhs, x, xi)
    assert np.allclose(l, r, rtol=1e-11, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(polys, min_size=1, max_size=3))
def test_adjoint_involution(pa):
    a = _sym(pa)
    twice = adjoint(adjoint(a, 4), 4).total()
    x, xi = [np.array([0.9, -0.2])], [np.array([-0.8, 2.5])]
    assert np.allclose(ex.evaluate(twice, x, xi), ex.evaluate(a.symbol(), x, xi), rtol=1e-12, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(polys, min_size=1, max_size=3))
def test_identity_is_neutral(pa):
    a = _sym(pa)
    one = FormalSum([ex.ONE], SGOrder(0, 0))
    x, xi = [np.array([0.3])], [np.array([1.1])]
    want = ex.evaluate(a.symbol(), x, xi)
    assert np.allclose(ex.evaluate(compose(one, a, 4).total(), x, xi), want)
    assert np.allclose(ex.evaluate(compose(a, one, 4).total(), x, xi), want)


# -- series helpers -----------------------------------------------------------

def test_series_arithmetic():
    a = np.array([2.0, 1.0, 0.0, 0.0])  # 2 + h
    inv = series.reciprocal(a)
    assert np.allclose(series.mul(a, inv), [1, 0, 0, 0])
    e = series.exp(np.array([0.0, 1.0, 0.0, 0.0]))
    assert np.allclose(series.derivatives(e), [1, 1, 1, 1])
    p = series.power(a, -0.5)
    assert p[0] == pytest.approx(2 ** -0.5)
    assert p[1] == pytest.approx(-0.5 * 2 ** -1.5)
    # (z0 + h)^2 = z0^2 + 2 z0 h + h^2
    assert np.allclose(series.polynomial_shift(np.array([0, 0, 1.0]), 3.0, 2), [9, 6, 1])
