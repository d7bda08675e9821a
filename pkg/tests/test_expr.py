import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sgcalc import expr as ex
from sgcalc.errors import PoleHit

X1, X2, XI1, XI2 = sp.symbols("x1 x2 xi1 xi2", real=True)
_SYM = {("x", 1): X1, ("x", 2): X2, ("xi", 1): XI1, ("xi", 2): XI2}


def to_sympy(e):
    """Independent translation used as the differentiation oracle."""
    if isinstance(e, ex.Const):
        v = e.value
        return sp.Float(v.real) + sp.I * sp.Float(v.imag) if v.imag else sp.nsimplify(v.real)
    if isinstance(e, ex.Var):
        return _SYM[(e.kind, e.index)]
    if isinstance(e, ex.Bracket):
        return sp.sqrt(1 + sum(_SYM[(e.kind, i)] ** 2 for i in range(1, e.dim + 1)))
    if isinstance(e, ex.Add):
        return sp.Add(*[to_sympy(t) for t in e.terms])
    if isinstance(e, ex.Mul):
        return sp.Mul(*[to_sympy(t) for t in e.factors])
    if isinstance(e, ex.Pow):
        base = to_sympy(e.base)
        p = e.exponent
        return base ** (sp.Integer(p) if isinstance(p, int) else sp.nsimplify(p))
    if isinstance(e, ex.Func):
        fn = {"exp": sp.exp, "sin": sp.sin, "cos": sp.cos, "sinh": sp.sinh, "cosh": sp.cosh,
              "tanh": sp.tanh, "sech": sp.sech}[e.name]
        return fn(to_sympy(e.arg))
    raise TypeError(type(e))


def test_diff_examples():
    # d/dxi1 of xi1^2 <xi>^{-2}
    e = ex.mul(ex.power(ex.xi(1), 2), ex.power(ex.bracket(ex.XI, 1), -2))
    d = ex.diff(e, ex.xi(1))
    for v in (0.0, 0.5, -3.0):
        want = 2 * v / (1 + v * v) ** 2
        assert ex.evaluate(d, [], [v]) == pytest.approx(want, abs=1e-15)
    # d/dx1 <x>^m = m x1 <x>^{m-2}
    e = ex.power(ex.bracket(ex.X, 2), 1.5)
    d = ex.diff(e, ex.x(1))
    assert ex.evaluate(d, [2.0, 1.0], []) == pytest.approx(1.5 * 2.0 * 6.0 ** (-0.25))
    assert ex.diff(ex.x(1), ex.xi(1)) == ex.ZERO


def test_bracket_exact_square():
    assert ex.evaluate(ex.power(ex.bracket(ex.XI, 2), 2), [], [3.0, 4.0]) == 26.0
    assert ex.evaluate(ex.bracket(ex.XI, 2), [], [0.0, 0.0]) == 1.0


def test_pole_hit():
    e = ex.power(ex.add(ex.power(ex.xi(2), 2), ex.power(ex.bracket(ex.XI, 1), 2)), -1)
    with pytest.raises(PoleHit):
        ex.evaluate(e, [0.0, 0.0], [0.0, 1j], allow_complex_xi_n=True)
    with pytest.raises(ValueError):
        ex.evaluate(e, [0.0, 0.0], [1j, 0.0], allow_complex_xi_n=True)


def test_evaluate_broadcasts_constants():
    out = ex.evaluate(ex.Const(2.0), [np.zeros(5)], [])
    assert out.shape == (5,)


def test_subs_bracket_last_component():
    e = ex.bracket(ex.X, 2)
    assert ex.subs(e, ex.x(2), 0) == ex.bracket(ex.X, 1)
    with pytest.raises(ValueError):
        ex.subs(e, ex.x(1), 0)


def test_conj_and_parse_helpers():
    e = ex.mul(ex.I, ex.xi(1))
    assert ex.evaluate(ex.conj(e), [], [2.0]) == -2j
    assert ex.parse("(sub (var x 1) 1)") == ex.sub(ex.x(1), 1)
    assert ex.parse("(div 1 (var x 1))") == ex.div(1, ex.x(1))
    with pytest.raises(ValueError):
        ex.parse("(add 1")


# -- random expression trees --------------------------------------------------

_leaves = st.one_of(
    st.integers(-3, 3).map(ex.Const),
    st.sampled_from([ex.x(1), ex.x(2), ex.xi(1), ex.xi(2)]),
    st.sampled_from([ex.bracket(ex.X, 1), ex.bracket(ex.XI, 2), ex.bracket(ex.X, 2)]),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: ex.add(*t)),
        st.tuples(children, children).map(lambda t: ex.mul(*t)),
        st.tuples(children, st.integers(0, 3)).map(lambda t: ex.power(t[0], t[1])),
        st.tuples(st.sampled_from([ex.bracket(ex.X, 2), ex.bracket(ex.XI, 2)]),
                  st.sampled_from([-2, -1, 0.5, -1.5])).map(lambda t: ex.power(*t)),
        children.map(lambda c: ex.func("sin", c)),
    )


exprs = st.recursive(_leaves, _extend, max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(exprs)
def test_prefix_round_trip(e):
    assert ex.parse(ex.to_prefix(e)) == e


@settings(max_examples=40, deadline=None)
@given(exprs, st.sampled_from([ex.x(1), ex.x(2), ex.xi(1), ex.xi(2)]))
def test_diff_matches_sympy(e, v):
    d = ex.diff(e, v)
    ref = sp.diff(to_sympy(e), _SYM[(v.kind, v.index)])
    f = sp.lambdify((X1, X2, XI1, XI2), ref, "numpy")
    pt = (0.3, -1.2, 0.7, 2.1)
    want = complex(f(*pt))
    got = complex(ex.evaluate(d, pt[:2], pt[2:]))
    assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


@settings(max_examples=40, deadline=None)
@given(exprs)
def test_evaluate_matches_sympy(e):
    f = sp.lambdify((X1, X2, XI1, XI2), to_sympy(e), "numpy")
    pt = (1.1, -0.4, -2.0, 0.25)
    want = complex(f(*pt))
    assert abs(complex(ex.evaluate(e, pt[:2], pt[2:])) - want) <= 1e-10 * max(1.0, abs(want))


@settings(max_examples=40, deadline=None)
@given(exprs, exprs)
def test_linearity_and_product_rule(a, b):
    v = ex.xi(1)
    lhs = ex.diff(ex.mul(a, b), v)
    rhs = ex.add(ex.mul(ex.diff(a, v), b), ex.mul(a, ex.diff(b, v)))
    pt = ([0.2, 0.9], [-0.6, 1.3])
    l, r = complex(ex.evaluate(lhs, *pt)), complex(ex.evaluate(rhs, *pt))
    assert abs(l - r) <= 1e-9 * max(1.0, abs(l))


def test_derivatives_commute():
    e = ex.mul(ex.power(ex.bracket(ex.X, 1), 3), ex.power(ex.bracket(ex.XI, 1), -1), ex.func("exp", ex.x(1)))
    a = ex.diff(ex.diff(e, ex.x(1)), ex.xi(1))
    b = ex.diff(ex.diff(e, ex.xi(1)), ex.x(1))
    assert ex.evaluate(a, [0.4], [1.5]) == pytest.approx(complex(ex.evaluate(b, [0.4], [1.5])))
    assert math.isfinite(ex.node_count(e))
