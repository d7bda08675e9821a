"""Formal sums of SG symbols: composition, adjoint, parametrix, remainders.

Composition and adjoint follow the Leibniz-type expansions

    a # b ~ sum_alpha (1/alpha!) d_xi^alpha a  D_x^alpha b,
    a^*   ~ sum_alpha (1/alpha!) d_xi^alpha D_x^alpha conj(a),

with ``D = -i d``.  Formal sums whose terms are multiplied by a Gevrey cutoff
are composed modulo compactly supported symbols, i.e. derivatives falling on
the cutoff are dropped; the result carries the cutoff with the larger radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import expr as ex
from . import series
from .errors import DegenerateFit, NotElliptic, TruncationCap
from .seminorm import GevreyIndices, SGOrder, multi_indices, sphere_directions

TERM_CAP = 6


# -- Gevrey cutoff -----------------------------------------------------------

class GevreyCutoff:
    """Radial cutoff in phase space: 0 on |(x, xi)| <= B, 1 on |(x, xi)| >= 2B.

    The transition is ``Phi((|v|^2 - B^2) / (3 B^2))`` where ``Phi`` is the
    normalized primitive of ``omega(t) = exp(-(t (1 - t))^(-1/(theta_c - 1)))``,
    a Gevrey function of order ``theta_c``.  Derivatives are exact up to
    rounding, computed by Taylor arithmetic and the chain rule.
    """

    _nodes, _weights = np.polynomial.legendre.leggauss(80)

    def __init__(self, B, theta_c=2.0):
        if B <= 0:
            raise ValueError("cutoff radius B must be positive")
        if theta_c <= 1:
            raise ValueError("theta_c must exceed 1")
        self.B = float(B)
        self.theta_c = float(theta_c)
        self._kappa = 1.0 / (self.theta_c - 1.0)
        self._Z = self._primitive(np.array(1.0))

    def _omega(self, t):
        t = np.asarray(t, dtype=float)
        g = t * (1 - t)
        out = np.zeros_like(t)
        m = g > 0
        out[m] = np.exp(-g[m] ** (-self._kappa))
        return out

    def _primitive(self, t):
        # fixed Gauss-Legendre rule on [0, t]; omega is flat at both ends
        t = np.asarray(t, dtype=float)
        pts = 0.5 * t[..., None] * (1 + self._nodes)
        return 0.5 * t * np.sum(self._weights * self._omega(pts), axis=-1)

    def profile(self, t):
        """``Phi(t)`` on [0, 1], extended by 0 and 1."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        return np.clip(self._primitive(t) / self._Z, 0.0, 1.0)

    def profile_derivatives(self, t, K):
        """``Phi^(m)(t)`` for m = 0..K, shape (K+1, ...)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros((K + 1,) + t.shape)
        out[0] = self.profile(t)
        if K == 0:
            return out
        g0 = t * (1 - t)
        # where exp(-g^-kappa) underflows every derivative is zero as well
        inside = (g0 > 0) & (np.where(g0 > 0, g0, 1.0) ** (-self._kappa) < 700)
        if np.any(inside):
            ti = t[inside]
            g = np.zeros((K,) + ti.shape)
            g[0] = ti * (1 - ti)
            if K > 1:
                g[1] = 1 - 2 * ti
            if K > 2:
                g[2] = -1.0
            w = series.exp(-series.power(g, -self._kappa))
            w = series.derivatives(w)
            out[1:, inside] = w / self._Z
        return out

    def _s_derivatives(self, s, K):
        # d^m/ds^m of chi as a function of s = |(x, xi)|^2
        scale = 3 * self.B ** 2
        t = (s - self.B ** 2) / scale
        d = self.profile_derivatives(t, K)
        return d / scale ** np.arange(K + 1).reshape((-1,) + (1,) * t.ndim)

    def __call__(self, x=(), xi=()):
        s = _radius_sq(x, xi)
        return self.profile((s - self.B ** 2) / (3 * self.B ** 2))

    def derivative(self, alpha, beta, x=(), xi=()):
        """``d_xi^alpha d_x^beta chi`` at the given points."""
        coords = [np.asarray(v, dtype=float) for v in x] + [np.asarray(v, dtype=float) for v in xi]
        gamma = list(beta) + [0] * (len(x) - len(beta)) + list(alpha) + [0] * (len(xi) - len(alpha))
        total = sum(gamma)
        s = _radius_sq(x, xi)
        ds = self._s_derivatives(s, total)
        # d^gamma f(sum v_i^2) = sum_j prod_i [g_i!/(j_i!(g_i-2j_i)!) (2 v_i)^(g_i-2j_i)] f^(|g|-|j|)
        ranges = [range(g // 2 + 1) for g in gamma]
        out = 0.0
        for js in _product(ranges):
            c = 1.0
            for g, j, v in zip(gamma, js, coords):
                c = c * (math.factorial(g) / (math.factorial(j) * math.factorial(g - 2 * j))) * (2 * v) ** (g - 2 * j)
            out = out + c * ds[total - sum(js)]
        return out

    def as_dict(self):
        return {"B": self.B, "theta_c": self.theta_c}


def _product(ranges):
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for tail in _product(ranges[1:]):
            yield (head,) + tail


def _radius_sq(x, xi):
    s = 0.0
    for v in list(x) + list(xi):
        v = np.asarray(v, dtype=float)
        s = s + v * v
    return np.asarray(s, dtype=float)


def gevrey_cutoff(B, theta_c=2.0):
    return GevreyCutoff(B, theta_c)


def default_theta_c(indices):
    """Gevrey order of the cutoff: min(mu, nu), or 2 when that equals 1."""
    t = min(indices.mu, indices.nu)
    return t if t > 1 else 2.0


# -- differential symbols ----------------------------------------------------

@dataclass
class DiffSymbol:
    """``sum_{|alpha| <= m1} c_alpha(x) xi^alpha`` with x-only coefficients."""

    coeffs: dict
    n: int
    order: SGOrder
    nu: float = 1.0

    def __post_init__(self):
        clean = {}
        for alpha, c in self.coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise ValueError(f"multi-index {alpha} does not match n={self.n}")
            c = ex.as_expr(c)
            if any(kind == ex.XI for kind, _ in ex.free_vars(c)):
                raise ValueError("coefficients of a differential symbol may depend on x only")
            if sum(alpha) > self.order.m1:
                raise ValueError(f"multi-index {alpha} exceeds the declared order m1={self.order.m1}")
            if c != ex.ZERO:
                clean[alpha] = c
        self.coeffs = dict(sorted(clean.items()))

    @property
    def degree(self):
        return max((sum(a) for a in self.coeffs), default=0)

    def symbol(self):
        terms = []
        for alpha, c in self.coeffs.items():
            mono = [ex.power(ex.xi(i + 1), k) for i, k in enumerate(alpha) if k]
            terms.append(ex.mul(c, *mono))
        return ex.add(*terms)

    def x_degree(self):
        """Polynomial degree in x of the coefficients, or None if not polynomial."""
        top = 0
        for c in self.coeffs.values():
            d = _poly_degree_x(c, self.n)
            if d is None:
                return None
            top = max(top, d)
        return top

    def normal_parts(self):
        """Regroup as ``sum_j P_j(x, xi') xi_n^j``; returns ``{j: P_j}``."""
        parts = {}
        for alpha, c in self.coeffs.items():
            j = alpha[-1]
            mono = [ex.power(ex.xi(i + 1), k) for i, k in enumerate(alpha[:-1]) if k]
            parts.setdefault(j, []).append(ex.mul(c, *mono))
        return {j: ex.add(*ts) for j, ts in sorted(parts.items())}

    def to_formal_sum(self, indices=None):
        indices = indices or GevreyIndices(1.0, max(1.0, self.nu))
        return FormalSum([self.symbol()], self.order, indices, n=self.n)

    @classmethod
    def from_symbol(cls, e, n, order, nu=1.0, check_points=20, seed=0):
        """Read the coefficients of a symbol polynomial in xi by Taylor expansion at xi = 0."""
        m1 = int(round(order.m1))
        coeffs = {}
        for alpha in multi_indices(n, m1):
            d = ex.derivative(e, alpha, ())
            for i in range(n, 0, -1):
                d = ex.subs(d, ex.xi(i), 0)
            fact = math.prod(math.factorial(a) for a in alpha)
            if d != ex.ZERO:
                coeffs[alpha] = ex.mul(ex.Const(1 / fact), d)
        out = cls(coeffs, n, order, nu)
        rng = np.random.default_rng(seed)
        xs = list(rng.uniform(-3, 3, (n, check_points)))
        xis = list(rng.uniform(-3, 3, (n, check_points)))
        lhs = ex.evaluate(e, xs, xis)
        rhs = ex.evaluate(out.symbol(), xs, xis)
        if not np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10):
            raise ValueError("symbol is not a polynomial of degree <= m1 in xi")
        return out


def _poly_degree_x(c, n, limit=12):
    d = 0
    current = [c]
    while d <= limit:
        nxt = []
        for e in current:
            for i in range(1, n + 1):
                de = ex.diff(e, ex.x(i))
                if de != ex.ZERO:
                    nxt.append(de)
        if not nxt:
            return d
        current = nxt
        d += 1
    return None


# -- formal sums -------------------------------------------------------------

@dataclass
class FormalSum:
    """Truncated asymptotic sum; term j has nominal order (m1 - j, m2 - j).

    When ``cutoff`` is set the represented symbol is ``chi * sum(terms)``.
    """

    terms: list
    order: SGOrder
    indices: GevreyIndices = field(default_factory=GevreyIndices)
    cutoff: GevreyCutoff | None = None
    n: int | None = None

    def __post_init__(self):
        self.terms = [ex.as_expr(t) for t in self.terms]
        if not self.terms:
            raise ValueError("a formal sum needs at least one term")
        dim = max(ex.dimension(t) for t in self.terms)
        if self.n is None:
            self.n = max(dim, 1)
        elif dim > self.n:
            raise ValueError(f"terms use {dim} dimensions but n={self.n}")

    @property
    def N(self):
        return len(self.terms)

    @property
    def B(self):
        return self.cutoff.B if self.cutoff is not None else 0.0

    def term_order(self, j):
        return self.order.shifted(j)

    def total(self, upto=None):
        return ex.add(*self.terms[:upto])

    def evaluate(self, x=(), xi=(), upto=None, allow_complex_xi_n=False):
        """Value of ``chi * sum(terms[:upto])``; points with chi == 0 are not evaluated."""
        x = [np.asarray(v) for v in x]
        xi = [np.asarray(v) for v in xi]
        shape = np.broadcast_shapes(*[v.shape for v in x + xi]) if x or xi else ()
        x = [np.broadcast_to(v, shape) for v in x]
        xi = [np.broadcast_to(v, shape) for v in xi]
        terms = self.terms[:upto]
        if self.cutoff is None:
            out = sum(ex.evaluate(t, x, xi, allow_complex_xi_n) for t in terms)
            return np.broadcast_to(out, shape).astype(complex)
        chi = self.cutoff(x, [v.real for v in xi])
        out = np.zeros(shape, dtype=complex)
        m = chi != 0
        if np.any(m):
            xm = [v[m] for v in x]
            xim = [v[m] for v in xi]
            val = sum(ex.evaluate(t, xm, xim, allow_complex_xi_n) for t in terms)
            out[m] = chi[m] * val
        return out

    def to_json(self):
        return {
            "base_order": self.order.as_list(),
            "indices": self.indices.as_dict(),
            "N": self.N,
            "n": self.n,
            "cutoff": self.cutoff.as_dict() if self.cutoff is not None else None,
            "terms": [ex.to_prefix(t) for t in self.terms],
        }

    def dumps(self):
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, doc):
        if isinstance(doc, str):
            doc = json.loads(doc)
        ind = doc.get("indices", {})
        cut = doc.get("cutoff")
        return cls(
            [ex.parse(t) for t in doc["terms"]],
            SGOrder(*doc["base_order"]),
            GevreyIndices(ind.get("mu", 1.0), ind.get("nu", 1.0), ind.get("theta")),
            GevreyCutoff(cut["B"], cut["theta_c"]) if cut else None,
            doc.get("n"),
        )


def as_formal_sum(a, n=None):
    if isinstance(a, FormalSum):
        return a
    if isinstance(a, DiffSymbol):
        return a.to_formal_sum()
    e = ex.as_expr(a)
    return FormalSum([e], SGOrder(0, 0), n=n or max(ex.dimension(e), 1))


def _merge_cutoff(a, b):
    if a.cutoff is None:
        return b.cutoff
    if b.cutoff is None:
        return a.cutoff
    return a.cutoff if a.cutoff.B >= b.cutoff.B else b.cutoff


def _check_cap(N, cap):
    if N < 1:
        raise ValueError("truncation N must be >= 1")
    if N > cap:
        raise TruncationCap(f"truncation N={N} exceeds the cap {cap}")


def _d_x(e, alpha):
    """``D_x^alpha e`` with ``D = -i d``."""
    d = ex.derivative(e, (), alpha)
    k = sum(alpha)
    return d if k == 0 else ex.mul(ex.Const((-1j) ** k), d)


def _alpha_fact(alpha):
    return math.prod(math.factorial(a) for a in alpha)


def _indices_exact(n, total):
    return [a for a in multi_indices(n, total) if sum(a) == total]


def compose(a, b, N, cap=TERM_CAP):
    """Asymptotic composition ``a # b`` truncated to N terms.

    Term l is ``sum_{j+k+|alpha|=l} (1/alpha!) d_xi^alpha a_j D_x^alpha b_k``.
    """
    _check_cap(N, cap)
    a, b = as_formal_sum(a), as_formal_sum(b)
    n = max(a.n, b.n)
    terms = []
    for l in range(N):
        parts = []
        for j in range(min(l + 1, a.N)):
            for k in range(min(l - j + 1, b.N)):
                for alpha in _indices_exact(n, l - j - k):
                    da = ex.derivative(a.terms[j], alpha, ())
                    if da == ex.ZERO:
                        continue
                    db = _d_x(b.terms[k], alpha)
                    if db == ex.ZERO:
                        continue
                    parts.append(ex.mul(ex.Const(1 / _alpha_fact(alpha)), da, db))
        terms.append(ex.add(*parts))
    indices = GevreyIndices(max(a.indices.mu, b.indices.mu), max(a.indices.nu, b.indices.nu))
    return FormalSum(terms, a.order + b.order, indices, _merge_cutoff(a, b), n)


def adjoint(a, N, cap=TERM_CAP):
    """Formal adjoint; term l is ``sum_{j+|alpha|=l} (1/alpha!) d_xi^alpha D_x^alpha conj(a_j)``."""
    _check_cap(N, cap)
    a = as_formal_sum(a)
    terms = []
    for l in range(N):
        parts = []
        for j in range(min(l + 1, a.N)):
            cj = ex.conj(a.terms[j])
            for alpha in _indices_exact(a.n, l - j):
                d = _d_x(ex.derivative(cj, alpha, ()), alpha)
                if d != ex.ZERO:
                    parts.append(ex.mul(ex.Const(1 / _alpha_fact(alpha)), d))
        terms.append(ex.add(*parts))
    return FormalSum(terms, a.order, a.indices, a.cutoff, a.n)


def subtract_identity(c):
    """Callable ``(x, xi) -> c(x, xi) - 1`` for a formal sum ``c``."""

    def value(x=(), xi=()):
        return c.evaluate(x, xi) - 1.0

    return value


# -- parametrix --------------------------------------------------------------

def parametrix(a, N, B, theta_c=None, check=True, ellipticity_kwargs=None, cap=TERM_CAP):
    """Left parametrix of a differential symbol as a formal sum of N terms.

    ``b_0 = 1/a`` and ``b_j = -b_0 sum_{k<j, k+|alpha|=j} (1/alpha!) d_xi^alpha b_k D_x^alpha a``,
    so that every term of order below zero in ``b # a`` cancels.  All terms
    share the cutoff ``chi`` of radius ``B``.
    """
    _check_cap(N, cap)
    if not isinstance(a, DiffSymbol):
        raise TypeError("parametrix expects a DiffSymbol")
    if check:
        from .ellipticity import sg_elliptic_check

        report = sg_elliptic_check(a, R=B, **(ellipticity_kwargs or {}))
        if not report.passed:
            raise NotElliptic(
                f"ellipticity margin {report.margin:.3e} below {report.C_min:.1e} "
                f"at x={report.witness['x']}, xi={report.witness['xi']}"
            )
    sym = a.symbol()
    b0 = ex.power(sym, -1)
    b = [b0]
    for j in range(1, N):
        parts = []
        for k in range(j):
            for alpha in _indices_exact(a.n, j - k):
                db = ex.derivative(b[k], alpha, ())
                if db == ex.ZERO:
                    continue
                da = _d_x(sym, alpha)
                if da == ex.ZERO:
                    continue
                parts.append(ex.mul(ex.Const(1 / _alpha_fact(alpha)), db, da))
        b.append(ex.mul(ex.Const(-1), b0, ex.add(*parts)))
    indices = GevreyIndices(1.0, max(1.0, a.nu))
    theta_c = theta_c if theta_c is not None else default_theta_c(indices)
    order = SGOrder(-a.order.m1, -a.order.m2)
    return FormalSum(b, order, indices, GevreyCutoff(B, theta_c), a.n)


def exact_composition(b, a):
    """Full symbol of ``op(b) op(a)`` for a DiffSymbol ``a`` polynomial in x.

    The Leibniz expansion terminates once ``D_x^alpha a`` vanishes, so this
    is ``compose(b, a, N)`` with ``N = b.N + deg_x(a)``, not subject to the cap.
    """
    d = a.x_degree()
    if d is None:
        raise ValueError("exact composition needs polynomial coefficients in x")
    return compose(b, a.to_formal_sum(), b.N + d, cap=10 ** 6)


def parametrix_remainder(a, N, B, **kwargs):
    """``b # a - 1`` as a callable, for ``b = parametrix(a, N, B)``."""
    b = parametrix(a, N, B, **kwargs)
    return subtract_identity(exact_composition(b, a))


# -- remainder decay fits ----------------------------------------------------

@dataclass
class RemainderFit:
    slope_x: float
    slope_xi: float
    ci_x: float
    ci_xi: float
    residual_x: float
    residual_xi: float
    rays: list
    degenerate: bool

    def passes(self, probe):
        """True when both slopes are at most the probe orders (-inf always passes)."""
        return self.slope_x <= probe.m2 and self.slope_xi <= probe.m1

    def as_dict(self):
        def f(v):
            return None if not np.isfinite(v) else float(v)

        return {
            "slope_x": f(self.slope_x), "slope_xi": f(self.slope_xi),
            "ci95_x": f(self.ci_x), "ci95_xi": f(self.ci_xi),
            "residual_x": f(self.residual_x), "residual_xi": f(self.residual_xi),
            "degenerate": self.degenerate,
        }


_TINY = 1e-280


def _fit_ray(log_w, vals):
    mag = np.abs(vals)
    keep = mag > _TINY
    if keep.sum() < 3:
        return -np.inf, 0.0, 0.0
    res = stats.linregress(log_w[keep], np.log(mag[keep]))
    dof = keep.sum() - 2
    tq = stats.t.ppf(0.975, dof) if dof > 0 else np.inf
    pred = res.intercept + res.slope * log_w[keep]
    rms = float(np.sqrt(np.mean((np.log(mag[keep]) - pred) ** 2)))
    return float(res.slope), float(tq * res.stderr), rms


def remainder_order(c, n=1, radii=(10.0, 1e3), n_radii=25, base_values=(0.0, 1.0, -2.5), n_dirs=4, seed=0):
    """Fit the decay exponents of a remainder along x-rays and xi-rays.

    Along an x-ray the covariable is frozen at a base point and ``log|c|`` is
    regressed on ``log <x>``; xi-rays are the mirror image.  The reported
    slope in each axis is the worst (largest) over all rays, with the
    half-width of its 95% confidence interval.

    ``c`` is an Expr, a FormalSum, or a callable ``c(x, xi)``.
    """
    lo, hi = radii
    if hi / lo < 100 * (1 - 1e-12):
        raise ValueError("radii must span at least two decades")
    if isinstance(c, FormalSum):
        fn = c.evaluate
    elif isinstance(c, ex.Expr):
        def fn(x=(), xi=(), _e=c):
            return ex.evaluate(_e, x, xi)
    else:
        fn = c
    t = np.geomspace(lo, hi, n_radii)
    dirs = sphere_directions(n, n_dirs, seed) if n > 1 else np.array([[1.0], [-1.0]])
    rng = np.random.default_rng(seed)
    bases = [np.full(n, v) for v in base_values]
    if n > 1:
        bases.append(2 * rng.standard_normal(n))
    log_w = 0.5 * np.log1p(t * t)
    rays = []
    worst = {"x": (-np.inf, 0.0, 0.0), "xi": (-np.inf, 0.0, 0.0)}
    for moving in ("x", "xi"):
        for d in dirs:
            for base in bases:
                ray_pts = [d_i * t for d_i in d]
                fixed = [np.full_like(t, b) for b in base]
                if moving == "x":
                    vals = fn(ray_pts, fixed)
                else:
                    vals = fn(fixed, ray_pts)
                fit = _fit_ray(log_w, np.asarray(vals))
                rays.append({"moving": moving, "direction": d.tolist(), "base": base.tolist(), "slope": fit[0]})
                if fit[0] > worst[moving][0]:
                    worst[moving] = fit
    degenerate = all(not np.isfinite(r["slope"]) for r in rays)
    return RemainderFit(
        worst["x"][0], worst["xi"][0], worst["x"][1], worst["xi"][1],
        worst["x"][2], worst["xi"][2], rays, degenerate,
    )


def require_fit(fit):
    """Raise :class:`DegenerateFit` for a fit without any finite slope."""
    if fit.degenerate:
        raise DegenerateFit("remainder underflows on every ray")
    return fit
