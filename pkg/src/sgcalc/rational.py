"""Pointwise rational structure of symbols in the normal covariable.

At a fixed boundary point ``(x', xi')`` a symbol built from polynomials,
integer powers and even powers of ``<xi>`` is a rational function of
``z = xi_n``.  :func:`rational_at` extracts it as a numerator polynomial over a
product of polynomial factors with multiplicities; poles and residues
(including at multiple poles) follow from Taylor arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from . import series
from .ellipticity import companion_roots, trim
from .errors import NotRational, RealPoleOnPath

POLE_MERGE_TOL = 1e-8
REAL_POLE_TOL = 1e-10


@dataclass
class Rational:
    """``num(z) / prod_k factor_k(z)^mult_k`` with numeric coefficients."""

    num: np.ndarray
    den: dict  # key -> (coefficients, multiplicity)

    @property
    def degree(self):
        num = trim(self.num, 1e-12 * max(1.0, float(np.max(np.abs(self.num)))))
        if len(num) == 1 and num[0] == 0:
            return -math.inf
        d = len(num) - 1
        for c, m in self.den.values():
            d -= (len(trim(c)) - 1) * m
        return d

    def poles(self):
        """Merged list of ``(pole, multiplicity)`` and the denominator's leading coefficient."""
        found = []
        lead = 1.0 + 0j
        for c, m in self.den.values():
            c = trim(c)
            lead *= c[-1] ** m
            for p in companion_roots(c):
                for item in found:
                    if abs(item[0] - p) <= POLE_MERGE_TOL * max(1.0, abs(p)):
                        item[1] += m
                        break
                else:
                    found.append([p, m])
        # keep a deterministic order: upper half first, then by real part
        found.sort(key=lambda t: (-np.sign(round(t[0].imag, 12)), t[0].real, t[0].imag))
        return [(complex(p), int(m)) for p, m in found], lead

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        val = np.polynomial.polynomial.polyval(z, self.num)
        for c, m in self.den.values():
            val = val / np.polynomial.polynomial.polyval(z, c) ** m
        return val


def _poly_mul(a, b):
    return np.convolve(a, b)


def _poly_pow(a, k):
    out = np.array([1.0 + 0j])
    for _ in range(k):
        out = np.convolve(out, a)
    return out


def _poly_add(a, b):
    n = max(len(a), len(b))
    out = np.zeros(n, dtype=complex)
    out[: len(a)] += a
    out[: len(b)] += b
    return out


def _r_const(v):
    return Rational(np.array([complex(v)]), {})


def _r_mul(a, b):
    den = dict(a.den)
    for k, (c, m) in b.den.items():
        den[k] = (c, den[k][1] + m) if k in den else (c, m)
    return Rational(_poly_mul(a.num, b.num), den)


def _r_add(terms):
    den = {}
    for t in terms:
        for k, (c, m) in t.den.items():
            if k not in den or den[k][1] < m:
                den[k] = (c, m)
    num = np.zeros(1, dtype=complex)
    for t in terms:
        part = t.num
        for k, (c, m) in den.items():
            extra = m - (t.den[k][1] if k in t.den else 0)
            if extra:
                part = _poly_mul(part, _poly_pow(c, extra))
        num = _poly_add(num, part)
    return Rational(num, den)


class _Builder:
    def __init__(self, n, x_prime, xi_prime, x_n=0.0):
        self.n = n
        self.z = (ex.XI, n)
        self.xs = [float(v) for v in np.atleast_1d(x_prime)] + [float(x_n)]
        self.xis = [float(v) for v in np.atleast_1d(xi_prime)] + [0.0]
        self.c2 = 1.0 + sum(v * v for v in self.xis[:-1])
        self.memo = {}

    def value(self, e):
        return complex(ex.evaluate(e, self.xs[: self.n], self.xis[: self.n]))

    def build(self, e):
        if e in self.memo:
            return self.memo[e]
        out = self._build(e)
        self.memo[e] = out
        return out

    def _build(self, e):
        if self.z not in ex.free_vars(e):
            return _r_const(self.value(e))
        if isinstance(e, ex.Var):
            return Rational(np.array([0, 1], dtype=complex), {})
        if isinstance(e, ex.Bracket):
            raise NotRational("odd power of a bracket containing xi_n")
        if isinstance(e, ex.Add):
            return _r_add([self.build(t) for t in e.terms])
        if isinstance(e, ex.Mul):
            out = _r_const(1.0)
            for f in e.factors:
                out = _r_mul(out, self.build(f))
            return out
        if isinstance(e, ex.Pow):
            p = e.exponent
            if isinstance(e.base, ex.Bracket):
                if not isinstance(p, int) or p % 2:
                    raise NotRational("only even powers of <xi> are rational in xi_n")
                quad = np.array([self.c2, 0, 1], dtype=complex)
                if p > 0:
                    return Rational(_poly_pow(quad, p // 2), {})
                return Rational(np.array([1.0 + 0j]), {("bracket", e.base.dim): (quad, -p // 2)})
            if not isinstance(p, int):
                raise NotRational("non-integer power")
            base = self.build(e.base)
            if p > 0:
                out = _r_const(1.0)
                for _ in range(p):
                    out = _r_mul(out, base)
                return out
            if base.den:
                raise NotRational("negative power of a base that is itself a quotient")
            return Rational(np.array([1.0 + 0j]), {e.base.key: (trim(base.num), -p)})
        raise NotRational(f"{type(e).__name__} node depending on xi_n")


def rational_at(e, n, x_prime=(), xi_prime=(), x_n=0.0):
    """Rational form in ``z = xi_n`` of ``e(x', x_n, xi', z)`` at one point."""
    return _Builder(n, x_prime, xi_prime, x_n).build(e)


def residue(rf, pole, mult, poles, lead, x_n=None, weight=None):
    """Residue of ``rf(z) exp(i x_n z) w(z)`` at ``pole`` of multiplicity ``mult``.

    ``weight``, if given, is a callable ``weight(pole, K)`` returning the
    Taylor coefficients (shape (K+1, ...)) of an analytic factor ``w`` at the
    pole.  ``x_n`` may be an array.
    """
    K = mult - 1
    g = series.polynomial_shift(rf.num, pole, K)
    for q, m in poles:
        if q == pole:
            continue
        # (pole + h - q)^(-m)
        lin = np.zeros(K + 1, dtype=complex)
        lin[0] = pole - q
        if K >= 1:
            lin[1] = 1.0
        g = series.mul(g, series.power(lin, -m))
    if x_n is not None:
        x_n = np.asarray(x_n, dtype=float)
        g = series.mul(g, np.exp(1j * x_n * pole) * series.linear_exp(1j * x_n, K).astype(complex))
    if weight is not None:
        g = series.mul(g, np.asarray(weight(pole, K), dtype=complex))
    out = g[K] / lead
    return out if np.ndim(out) else complex(out)


def upper_residue_sum(rf, x_n=None, real_tol=REAL_POLE_TOL, weight=None):
    """``i * sum of residues in the upper half-plane``, i.e. the limit of
    ``(1/2pi) int rf(t) exp(i x_n t) dt`` from x_n > 0.

    Raises :class:`RealPoleOnPath` when a pole lies on the real axis.
    """
    poles, lead = rf.poles()
    total = 0j
    for p, m in poles:
        if abs(p.imag) <= real_tol * max(1.0, abs(p)):
            raise RealPoleOnPath(f"pole {p} on the real axis")
        if p.imag > 0:
            total = total + residue(rf, p, m, poles, lead, x_n, weight)
    return 1j * total
