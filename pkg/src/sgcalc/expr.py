"""Exact-differentiation expression trees over the phase-space variables.

Every symbol in the package is an :class:`Expr` built from complex constants,
the coordinates ``x_i`` and covariables ``xi_i`` (1-based indices), sums,
products, integer powers, the Japanese brackets ``<x> = sqrt(1 + |x|^2)``
restricted to the first ``dim`` components, real powers of brackets, and a
handful of elementary functions used for problem data.

Nodes are immutable and hashable.  The public constructors :func:`add`,
:func:`mul` and :func:`power` apply a best-effort canonical simplification
(flattening, constant folding, collecting like terms and like bases); semantic
identity is always settled by evaluation.

The text form is a parenthesized prefix notation, e.g.::

    (add (pow (var xi 1) 2) (bracket x 2))
"""

from __future__ import annotations

import math
import numbers
import re
from functools import lru_cache

import numpy as np

from .errors import PoleHit

POLE_TOL = 1e-14

X = "x"
XI = "xi"
_KINDS = (X, XI)

FUNCTIONS = ("exp", "sin", "cos", "sinh", "cosh", "tanh", "sech")


class Expr:
    __slots__ = ("_hash", "_key")

    def _args(self):
        raise NotImplementedError

    def __eq__(self, other):
        if self is other:
            return True
        return type(self) is type(other) and hash(self) == hash(other) and self._args() == other._args()

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._args())
            object.__setattr__(self, "_hash", h)
            return h

    def __setattr__(self, name, value):
        raise AttributeError("Expr nodes are immutable")

    @property
    def key(self):
        """Canonical prefix string, used for deterministic ordering."""
        try:
            return self._key
        except AttributeError:
            k = to_prefix(self)
            object.__setattr__(self, "_key", k)
            return k

    def __repr__(self):
        return self.key

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, mul(Const(-1), as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), mul(Const(-1), self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, -1))

    def __neg__(self):
        return mul(Const(-1), self)

    def __pow__(self, exponent):
        return power(self, exponent)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        v = complex(value)
        # adding 0.0 maps -0.0 to 0.0 so equal constants print identically
        object.__setattr__(self, "value", complex(v.real + 0.0, v.imag + 0.0))

    def _args(self):
        return (self.value,)


class Var(Expr):
    __slots__ = ("kind", "index")

    def __init__(self, kind, index):
        if kind not in _KINDS:
            raise ValueError(f"unknown variable kind {kind!r}")
        if int(index) < 1:
            raise ValueError("variable indices are 1-based")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "index", int(index))

    def _args(self):
        return (self.kind, self.index)


class Bracket(Expr):
    """``sqrt(1 + v_1^2 + ... + v_dim^2)`` for ``v`` = x or xi."""

    __slots__ = ("kind", "dim")

    def __init__(self, kind, dim):
        if kind not in _KINDS:
            raise ValueError(f"unknown variable kind {kind!r}")
        if int(dim) < 1:
            raise ValueError("bracket dimension must be >= 1")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "dim", int(dim))

    def _args(self):
        return (self.kind, self.dim)


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms):
        object.__setattr__(self, "terms", tuple(terms))

    def _args(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors):
        object.__setattr__(self, "factors", tuple(factors))

    def _args(self):
        return self.factors


class Pow(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base, exponent):
        exponent = _normalize_exponent(exponent)
        if not isinstance(exponent, int) and not isinstance(base, Bracket):
            raise ValueError("non-integer powers are only defined for bracket nodes")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "exponent", exponent)

    def _args(self):
        return (self.base, self.exponent)


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name, arg):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "arg", arg)

    def _args(self):
        return (self.name, self.arg)


ZERO = Const(0)
ONE = Const(1)
I = Const(1j)


def _normalize_exponent(e):
    if isinstance(e, numbers.Integral):
        return int(e)
    e = float(e)
    if not math.isfinite(e):
        raise ValueError("exponent must be finite")
    if e.is_integer():
        return int(e)
    return e


def as_expr(value):
    if isinstance(value, Expr):
        return value
    if isinstance(value, numbers.Number):
        return Const(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def x(i):
    return Var(X, i)


def xi(i):
    return Var(XI, i)


def bracket(kind, dim):
    return Bracket(kind, dim)


def func(name, arg):
    arg = as_expr(arg)
    if isinstance(arg, Const):
        return Const(_FUNC_IMPL[name](arg.value))
    return Func(name, arg)


# -- canonical constructors -------------------------------------------------

def _split_coeff(e):
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        return e.factors[0].value, (rest[0] if len(rest) == 1 else Mul(rest))
    return 1 + 0j, e


def _with_coeff(c, rest):
    if c == 1:
        return rest
    if isinstance(rest, Mul):
        return Mul((Const(c),) + rest.factors)
    return Mul((Const(c), rest))


def add(*args):
    const = 0j
    coeffs = {}
    stack = list(args)
    flat = []
    while stack:
        a = as_expr(stack.pop(0))
        if isinstance(a, Add):
            stack[:0] = a.terms
        else:
            flat.append(a)
    for a in flat:
        if isinstance(a, Const):
            const += a.value
            continue
        c, rest = _split_coeff(a)
        coeffs[rest] = coeffs.get(rest, 0j) + c
    terms = [_with_coeff(c, rest) for rest, c in coeffs.items() if c != 0]
    terms.sort(key=lambda t: t.key)
    if const != 0:
        terms.insert(0, Const(const))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(terms)


def mul(*args):
    coeff = 1 + 0j
    exps = {}
    stack = [as_expr(a) for a in args]
    while stack:
        a = stack.pop()
        if isinstance(a, Mul):
            stack.extend(a.factors)
        elif isinstance(a, Const):
            coeff *= a.value
        elif isinstance(a, Pow):
            exps[a.base] = exps.get(a.base, 0) + a.exponent
        else:
            exps[a] = exps.get(a, 0) + 1
    if coeff == 0:
        return ZERO
    factors = []
    for base, e in exps.items():
        e = _normalize_exponent(e)
        if e == 0:
            continue
        f = power(base, e)
        if isinstance(f, Const):
            coeff *= f.value
        elif isinstance(f, Mul):
            for g in f.factors:
                if isinstance(g, Const):
                    coeff *= g.value
                else:
                    factors.append(g)
        else:
            factors.append(f)
    factors.sort(key=lambda t: t.key)
    if coeff != 1 or not factors:
        factors.insert(0, Const(coeff))
    if len(factors) == 1:
        return factors[0]
    return Mul(factors)


def power(base, exponent):
    base = as_expr(base)
    exponent = _normalize_exponent(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        if not isinstance(exponent, int):
            raise ValueError("non-integer powers are only defined for bracket nodes")
        if base.value == 0 and exponent < 0:
            raise PoleHit("constant zero raised to a negative power")
        return Const(base.value ** exponent)
    if isinstance(base, Pow):
        if isinstance(exponent, int) or isinstance(base.base, Bracket):
            return power(base.base, _normalize_exponent(base.exponent * exponent))
    if isinstance(base, Mul) and isinstance(exponent, int):
        return mul(*[power(f, exponent) for f in base.factors])
    return Pow(base, exponent)


def sub(a, b):
    return add(a, mul(Const(-1), b))


def div(a, b):
    return mul(a, power(b, -1))


# -- structure queries -------------------------------------------------------

@lru_cache(maxsize=None)
def free_vars(e):
    """Set of ``(kind, index)`` pairs the expression depends on."""
    if isinstance(e, Const):
        return frozenset()
    if isinstance(e, Var):
        return frozenset({(e.kind, e.index)})
    if isinstance(e, Bracket):
        return frozenset((e.kind, i) for i in range(1, e.dim + 1))
    if isinstance(e, Add):
        return frozenset().union(*(free_vars(t) for t in e.terms))
    if isinstance(e, Mul):
        return frozenset().union(*(free_vars(t) for t in e.factors))
    if isinstance(e, Pow):
        return free_vars(e.base)
    if isinstance(e, Func):
        return free_vars(e.arg)
    raise TypeError(type(e))


def dimension(e):
    """Smallest n such that every variable index of ``e`` is <= n."""
    return max((i for _, i in free_vars(e)), default=0)


def node_count(e):
    if isinstance(e, Add):
        return 1 + sum(node_count(t) for t in e.terms)
    if isinstance(e, Mul):
        return 1 + sum(node_count(t) for t in e.factors)
    if isinstance(e, Pow):
        return 1 + node_count(e.base)
    if isinstance(e, Func):
        return 1 + node_count(e.arg)
    return 1


# -- differentiation ---------------------------------------------------------

def _var_key(var):
    if isinstance(var, Var):
        return (var.kind, var.index)
    kind, index = var
    if kind not in _KINDS:
        raise ValueError(f"unknown variable kind {kind!r}")
    return (kind, int(index))


def diff(e, var):
    """Exact partial derivative of ``e`` with respect to ``var``.

    ``var`` is a :class:`Var` or a ``(kind, index)`` pair.
    """
    return _diff(e, _var_key(var))


@lru_cache(maxsize=200_000)
def _diff(e, v):
    if v not in free_vars(e):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Bracket):
        return mul(Var(*v), power(e, -1))
    if isinstance(e, Add):
        return add(*[_diff(t, v) for t in e.terms])
    if isinstance(e, Mul):
        parts = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = _diff(f, v)
            if df == ZERO:
                continue
            parts.append(mul(*(fs[:i] + (df,) + fs[i + 1:])))
        return add(*parts)
    if isinstance(e, Pow):
        b, p = e.base, e.exponent
        return mul(Const(p), power(b, p - 1), _diff(b, v))
    if isinstance(e, Func):
        return mul(_func_derivative(e.name, e.arg), _diff(e.arg, v))
    raise TypeError(type(e))


def _func_derivative(name, arg):
    if name == "exp":
        return Func("exp", arg)
    if name == "sin":
        return Func("cos", arg)
    if name == "cos":
        return mul(Const(-1), Func("sin", arg))
    if name == "sinh":
        return Func("cosh", arg)
    if name == "cosh":
        return Func("sinh", arg)
    if name == "tanh":
        return power(Func("sech", arg), 2)
    if name == "sech":
        return mul(Const(-1), Func("sech", arg), Func("tanh", arg))
    raise ValueError(name)


def derivative(e, alpha=(), beta=()):
    """``d_xi^alpha d_x^beta e`` for multi-indices ``alpha`` (xi) and ``beta`` (x)."""
    for i, k in enumerate(alpha):
        for _ in range(k):
            e = _diff(e, (XI, i + 1))
    for i, k in enumerate(beta):
        for _ in range(k):
            e = _diff(e, (X, i + 1))
    return e


# -- transformations ---------------------------------------------------------

@lru_cache(maxsize=50_000)
def conj(e):
    """Complex conjugate, treating every variable as real."""
    if isinstance(e, Const):
        return Const(e.value.conjugate())
    if isinstance(e, (Var, Bracket)):
        return e
    if isinstance(e, Add):
        return add(*[conj(t) for t in e.terms])
    if isinstance(e, Mul):
        return mul(*[conj(t) for t in e.factors])
    if isinstance(e, Pow):
        return power(conj(e.base), e.exponent)
    if isinstance(e, Func):
        return func(e.name, conj(e.arg))
    raise TypeError(type(e))


def subs(e, var, value):
    """Substitute a constant for a variable.

    Inside brackets only the last bracket component may be substituted, and
    only by zero (``<(x', x_n)>`` at ``x_n = 0`` is ``<x'>``).
    """
    return _subs(e, _var_key(var), complex(value))


def _subs(e, v, value):
    if v not in free_vars(e):
        return e
    if isinstance(e, Var):
        return Const(value)
    if isinstance(e, Bracket):
        if v[1] != e.dim or value != 0:
            raise ValueError("brackets only support substituting zero for their last component")
        return ONE if e.dim == 1 else Bracket(e.kind, e.dim - 1)
    if isinstance(e, Add):
        return add(*[_subs(t, v, value) for t in e.terms])
    if isinstance(e, Mul):
        return mul(*[_subs(t, v, value) for t in e.factors])
    if isinstance(e, Pow):
        return power(_subs(e.base, v, value), e.exponent)
    if isinstance(e, Func):
        return func(e.name, _subs(e.arg, v, value))
    raise TypeError(type(e))


# -- evaluation --------------------------------------------------------------

def _sech(z):
    return 1.0 / np.cosh(z)


_FUNC_IMPL = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sech": _sech,
}


def _coords(values, name):
    if values is None:
        return []
    if np.isscalar(values):
        values = [values]
    return [np.asarray(v) for v in values]


def evaluate(e, x=(), xi=(), allow_complex_xi_n=False):
    """Evaluate ``e`` at the point(s) ``(x, xi)``.

    ``x`` and ``xi`` are sequences of scalars or broadcastable arrays, one per
    coordinate.  With ``allow_complex_xi_n`` the last covariable may be
    complex; every other coordinate must be real.  Raises :class:`PoleHit`
    when a denominator has magnitude below ``POLE_TOL``.
    """
    xs = _coords(x, "x")
    xis = _coords(xi, "xi")
    for i, v in enumerate(xs):
        if np.iscomplexobj(v) and np.any(v.imag != 0):
            raise ValueError(f"x_{i + 1} must be real")
    for i, v in enumerate(xis):
        if np.iscomplexobj(v) and np.any(v.imag != 0):
            if i != len(xis) - 1 or not allow_complex_xi_n:
                raise ValueError(f"xi_{i + 1} must be real")
    env = {X: xs, XI: xis}
    out = np.asarray(_eval(e, env, {}), dtype=complex)
    shape = np.broadcast_shapes(*[v.shape for v in xs + xis]) if xs or xis else ()
    if out.shape != shape:
        out = np.broadcast_to(out, np.broadcast_shapes(out.shape, shape)).copy()
    return out


def _coord(env, kind, index):
    vals = env[kind]
    if index > len(vals):
        raise IndexError(f"expression uses {kind}_{index} but only {len(vals)} coordinates were given")
    return vals[index - 1]


def _eval(e, env, memo):
    k = id(e)
    if k in memo:
        return memo[k]
    if isinstance(e, Const):
        v = e.value if e.value.imag else e.value.real
    elif isinstance(e, Var):
        v = _coord(env, e.kind, e.index)
    elif isinstance(e, Bracket):
        v = np.sqrt(_bracket_sq(e, env, memo))
    elif isinstance(e, Add):
        v = _eval(e.terms[0], env, memo)
        for t in e.terms[1:]:
            v = v + _eval(t, env, memo)
    elif isinstance(e, Mul):
        v = _eval(e.factors[0], env, memo)
        for t in e.factors[1:]:
            v = v * _eval(t, env, memo)
    elif isinstance(e, Pow) and isinstance(e.base, Bracket):
        # <v>^p = (1 + |v|^2)^(p/2); avoids a sqrt round trip for even p
        s = _bracket_sq(e.base, env, memo)
        p = e.exponent
        if p < 0 and np.any(np.abs(s) < POLE_TOL ** 2):
            raise PoleHit(f"denominator {e.base!r} vanishes at an evaluation point")
        if isinstance(p, int) and p % 2 == 0:
            v = s ** (p // 2) if p > 0 else 1.0 / s ** (-p // 2)
        else:
            v = np.power(s, p / 2)
    elif isinstance(e, Pow):
        b = _eval(e.base, env, memo)
        p = e.exponent
        if p < 0 and np.any(np.abs(b) < POLE_TOL):
            raise PoleHit(f"denominator {e.base!r} vanishes at an evaluation point")
        if isinstance(p, int):
            if p < 0:
                v = 1.0 / (b ** (-p))
            else:
                v = b ** p
        else:
            v = np.power(b.astype(complex) if np.iscomplexobj(b) else b, p)
    elif isinstance(e, Func):
        v = _FUNC_IMPL[e.name](_eval(e.arg, env, memo))
    else:
        raise TypeError(type(e))
    memo[k] = v
    return v


def _bracket_sq(e, env, memo):
    k = ("sq", e.kind, e.dim)
    if k not in memo:
        s = 1.0
        for i in range(1, e.dim + 1):
            c = _coord(env, e.kind, i)
            s = s + c * c
        memo[k] = s
    return memo[k]


def lambdify(e, allow_complex_xi_n=False):
    """Return ``f(x, xi)`` evaluating ``e``; convenient for quadrature callbacks."""

    def f(x=(), xi=()):
        return evaluate(e, x, xi, allow_complex_xi_n=allow_complex_xi_n)

    return f


# -- text form ---------------------------------------------------------------

def _fmt_real(v):
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_prefix(e):
    """Serialize ``e`` in the parenthesized prefix form."""
    if isinstance(e, Const):
        v = e.value
        if v.imag == 0:
            return _fmt_real(v.real)
        return f"(complex {repr(v.real)} {repr(v.imag)})"
    if isinstance(e, Var):
        return f"(var {e.kind} {e.index})"
    if isinstance(e, Bracket):
        return f"(bracket {e.kind} {e.dim})"
    if isinstance(e, Add):
        return "(add " + " ".join(t.key for t in e.terms) + ")"
    if isinstance(e, Mul):
        return "(mul " + " ".join(t.key for t in e.factors) + ")"
    if isinstance(e, Pow):
        p = e.exponent
        ps = str(p) if isinstance(p, int) else repr(p)
        return f"(pow {e.base.key} {ps})"
    if isinstance(e, Func):
        return f"({e.name} {e.arg.key})"
    raise TypeError(type(e))


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse(text):
    """Parse the prefix form produced by :func:`to_prefix`.

    Nodes written as ``add``/``mul``/``pow`` are rebuilt verbatim so that
    ``parse(to_prefix(e)) == e``.  The convenience heads ``sub``, ``div``,
    ``neg`` and the elementary functions go through the simplifying
    constructors.
    """
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise ValueError("empty expression")
    pos, node = _parse(tokens, 0)
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in expression: {' '.join(tokens[pos:])}")
    return node


def _number(tok):
    try:
        return float(tok) if any(c in tok for c in ".eEn") else int(tok)
    except ValueError:
        raise ValueError(f"expected a number, got {tok!r}") from None


def _parse(tokens, pos):
    tok = tokens[pos]
    if tok == ")":
        raise ValueError("unexpected ')'")
    if tok != "(":
        return pos + 1, Const(_number(tok))
    if pos + 1 >= len(tokens):
        raise ValueError("unterminated expression")
    head = tokens[pos + 1]
    pos += 2
    if head in ("var", "bracket"):
        kind, idx = tokens[pos], int(tokens[pos + 1])
        if tokens[pos + 2] != ")":
            raise ValueError(f"malformed ({head} ...)")
        node = Var(kind, idx) if head == "var" else Bracket(kind, idx)
        return pos + 3, node
    if head == "complex":
        re_, im_ = float(tokens[pos]), float(tokens[pos + 1])
        if tokens[pos + 2] != ")":
            raise ValueError("malformed (complex ...)")
        return pos + 3, Const(complex(re_, im_))
    if head == "pow":
        pos, base = _parse(tokens, pos)
        exponent = _number(tokens[pos])
        if tokens[pos + 1] != ")":
            raise ValueError("malformed (pow ...)")
        return pos + 2, Pow(base, exponent)
    args = []
    while True:
        if pos >= len(tokens):
            raise ValueError("unterminated expression")
        if tokens[pos] == ")":
            pos += 1
            break
        pos, a = _parse(tokens, pos)
        args.append(a)
    if head == "add":
        return pos, (Add(args) if len(args) > 1 else _single(args, head))
    if head == "mul":
        return pos, (Mul(args) if len(args) > 1 else _single(args, head))
    if head == "sub":
        if len(args) != 2:
            raise ValueError("sub takes two arguments")
        return pos, sub(*args)
    if head == "div":
        if len(args) != 2:
            raise ValueError("div takes two arguments")
        return pos, div(*args)
    if head == "neg":
        if len(args) != 1:
            raise ValueError("neg takes one argument")
        return pos, -args[0]
    if head in FUNCTIONS:
        if len(args) != 1:
            raise ValueError(f"{head} takes one argument")
        return pos, func(head, args[0])
    raise ValueError(f"unknown head {head!r}")


def _single(args, head):
    if len(args) != 1:
        raise ValueError(f"({head}) needs at least one argument")
    return args[0]
