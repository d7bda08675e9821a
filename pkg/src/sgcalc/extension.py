"""Explicit extension of functions from the half-space x_n > 0.

The extension to ``x_n <= 0`` is

    h(x) = sum_k (1/k!) a_k(x_n) (d_{x_n}^k f)(x', 0) x_n^k,

where ``a_k`` are smooth steps built from the bumps

    b_k(t) = exp(-k s_k^{4r} / (|t|^{2r} (s_k + t)^{2r}))  on (-s_k, 0),
    s_k = D^{-1} k^{-(mu - 1)},

normalized so that ``a_k(0) = 1`` with every derivative of ``a_k`` vanishing
at 0, and ``a_0 = a_1``.  Derivatives of ``h`` are computed exactly (Leibniz
rule plus Taylor arithmetic on ``b_k``), so jet matching and seminorm growth
can be measured without finite differences.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from . import expr as ex
from . import series
from .errors import AllZeroWindow, IllConditionedFit, JetGrowthViolation, QuadratureFailure
from .gridfunc import GridFunction

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_PANEL = 1.0 / 64


@dataclass(frozen=True)
class ExtensionParams:
    """Parameters of the cutoffs.

    ``r_exp`` defaults to ``1.1 / (2 (mu - 1))`` so that ``1/(2r) < mu - 1``
    holds with a fixed ten percent margin.  ``D`` defaults to
    ``max(1, 2 B e^{a+1})`` when the seminorm constant ``B`` is given, else 1.
    """

    mu: float = 2.0
    nu: float = 1.0
    D: float | None = None
    r_exp: float | None = None
    K: int = 12
    quad_tol: float = 1e-12
    B: float | None = None

    def __post_init__(self):
        if self.mu <= 1:
            raise ValueError("mu must exceed 1")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        if self.r_exp is None:
            object.__setattr__(self, "r_exp", 1.1 / (2 * (self.mu - 1)))
        if not 1 / (2 * self.r_exp) < self.mu - 1:
            raise ValueError("need 1/(2 r) < mu - 1")
        rule = self.D_rule
        if self.D is None:
            object.__setattr__(self, "D", rule)
        elif self.D < 1:
            raise ValueError("D must be >= 1")
        elif self.B is not None and self.D < rule * (1 - 1e-12):
            raise ValueError(f"D={self.D} is below max(1, 2 B e^(a+1)) = {rule}")
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @property
    def a(self):
        return (16.0 / 3.0) ** (2 * self.r_exp)

    @property
    def D_rule(self):
        if self.B is None:
            return 1.0
        return max(1.0, 2 * self.B * math.exp(self.a + 1))

    def sigma(self, k):
        k = max(int(k), 1)
        return 1.0 / (self.D * k ** (self.mu - 1))

    def tail_bound(self):
        """Geometric tail ``2^{-K}`` of the series under the D rule."""
        return 2.0 ** (-self.K)

    def as_dict(self):
        return {"mu": self.mu, "nu": self.nu, "D": self.D, "r_exp": self.r_exp, "a": self.a,
                "K": self.K, "quad_tol": self.quad_tol, "B": self.B}


@dataclass
class BoundaryJet:
    """Normal derivatives ``d_{x_n}^k f(x', 0)`` for ``k = 0..K``.

    ``values`` has shape (K+1,) for n = 1 or (K+1, npts) for sampled x'.
    """

    values: np.ndarray
    B: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)

    @property
    def K(self):
        return self.values.shape[0] - 1

    def check_growth(self, mu):
        """Raise :class:`JetGrowthViolation` unless ``|jet_k| <= B^{k+1} (k!)^mu``."""
        if self.B is None:
            return
        for k in range(self.K + 1):
            bound = self.B ** (k + 1) * math.factorial(k) ** mu
            worst = float(np.max(np.abs(self.values[k])))
            if worst > bound * (1 + 1e-12):
                raise JetGrowthViolation(f"|d^{k} f| = {worst:.3e} exceeds B^(k+1) (k!)^mu = {bound:.3e}")

    @classmethod
    def from_expr(cls, e, K, n=1, x_prime=None, B=None):
        """Jet of an expression in x by exact differentiation in x_n."""
        vals = []
        d = ex.as_expr(e)
        for _ in range(K + 1):
            if n == 1:
                vals.append(complex(ex.evaluate(d, [0.0], [])))
            else:
                xp = np.asarray(x_prime, dtype=float).reshape(-1, n - 1)
                xs = [xp[:, i] for i in range(n - 1)] + [np.zeros(len(xp))]
                vals.append(ex.evaluate(d, xs, []))
            d = ex.diff(d, ex.x(n))
        return cls(np.array(vals), B)


# -- cutoffs -----------------------------------------------------------------

def dzanasija_b(k, t, p):
    """``b_k(t)``; zero outside ``(-sigma_k, 0)``."""
    if k < 1:
        raise ValueError("b_k is defined for k >= 1")
    t = np.asarray(t, dtype=float)
    s = p.sigma(k)
    out = np.zeros_like(t)
    m = (t > -s) & (t < 0)
    tm = t[m]
    g = (-tm) * (s + tm)
    with np.errstate(over="ignore", under="ignore"):
        out[m] = np.exp(-k * s ** (4 * p.r_exp) / g ** (2 * p.r_exp))
    return out if out.ndim else float(out)


def _omega(k, r, u):
    # b_k(-sigma u) = exp(-k (u (1 - u))^(-2r)) for 0 < u < 1
    u = np.asarray(u, dtype=float)
    g = u * (1 - u)
    out = np.zeros_like(u)
    m = g > 0
    with np.errstate(over="ignore", under="ignore"):
        out[m] = np.exp(-k * g[m] ** (-2 * r))
    return out


_norm_cache = {}
_norm_lock = threading.Lock()


def _unit_integral(k, r, tol):
    """``int_0^1 exp(-k (u(1-u))^(-2r)) du``, cached per (k, r)."""
    key = (int(k), float(r), float(tol))
    with _norm_lock:
        if key in _norm_cache:
            return _norm_cache[key]
        val, _err = integrate.quad(lambda u: float(_omega(k, r, u)), 0.0, 1.0,
                                   points=[0.5], epsabs=0.0, epsrel=tol, limit=400)
        _norm_cache[key] = val
    return val


def normalization(k, p):
    """``int b_k = sigma_k * int_0^1 exp(-k (u(1-u))^(-2r)) du``."""
    k = max(int(k), 1)
    J = _unit_integral(k, p.r_exp, p.quad_tol)
    Z = p.sigma(k) * J
    if not Z > 1e-300:
        raise QuadratureFailure(f"normalization integral of b_{k} underflows ({Z:.3e})")
    return Z


def _partial_integral(k, r, u):
    """``int_0^u omega`` for u in [0, 1] by composite Gauss-Legendre on sorted breakpoints."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    flat = u.ravel()
    brk = np.union1d(np.union1d(flat, np.linspace(0.0, 1.0, int(round(1 / _PANEL)) + 1)), [0.0])
    lo, hi = brk[:-1], brk[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    panel = half * np.sum(_GL_WEIGHTS[None, :] * _omega(k, r, pts), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(panel)])
    idx = np.searchsorted(brk, flat)
    return cum[idx].reshape(u.shape)


def dzanasija_a(k, t, p):
    """``a_k(t)``: 0 for ``t <= -sigma_k``, 1 at 0, even in t, ``a_0 = a_1``."""
    k = max(int(k), 1)
    t = np.asarray(t, dtype=float)
    s = p.sigma(k)
    u = np.abs(t) / s
    J = _unit_integral(k, p.r_exp, p.quad_tol)
    # int_{-s}^{t} b_k / int b_k = 1 - int_0^{u} omega / J  with u = |t| / s
    val = 1.0 - _partial_integral(k, p.r_exp, np.minimum(u, 1.0)) / J
    val = np.where(u >= 1.0, 0.0, np.clip(val, 0.0, 1.0))
    return val if val.ndim else float(val)


def b_derivatives(k, t, p, order):
    """``b_k^(m)(t)`` for m = 0..order at points t, shape (order+1, ...)."""
    t = np.asarray(t, dtype=float)
    s = p.sigma(k)
    out = np.zeros((order + 1,) + t.shape)
    g0 = (-t) * (s + t)
    r2 = 2 * p.r_exp
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        expo = -k * s ** (2 * r2) * np.where(g0 > 0, g0, 1.0) ** (-r2)
    live = (g0 > 0) & (expo > -700)
    if not np.any(live):
        return out
    tl = t[live]
    g = np.zeros((order + 1,) + tl.shape)
    g[0] = (-tl) * (s + tl)
    if order >= 1:
        g[1] = -s - 2 * tl
    if order >= 2:
        g[2] = -1.0
    arg = -k * s ** (2 * r2) * series.power(g, -r2)
    out[:, live] = series.derivatives(series.exp(arg))
    return out


def a_derivatives(k, t, p, order):
    """``a_k^(m)(t)`` for m = 0..order, shape (order+1, ...)."""
    k = max(int(k), 1)
    t = np.asarray(t, dtype=float)
    out = np.zeros((order + 1,) + t.shape)
    out[0] = dzanasija_a(k, t, p)
    if order == 0:
        return out
    Z = normalization(k, p)
    # a_k(t) = a_k(-|t|): the m-th derivative picks up (-1)^m for t > 0
    tn = -np.abs(t)
    bd = b_derivatives(k, tn, p, order - 1) / Z
    sign = np.where(t > 0, -1.0, 1.0)
    for m in range(1, order + 1):
        out[m] = bd[m - 1] * sign ** m
    return out


# -- the extension -----------------------------------------------------------

def extend_half_space(jet, p, t, derivatives=None, check=True, as_grid=False):
    """Evaluate ``h`` (and optionally its derivatives) at ``t <= 0``.

    Returns ``h(t)`` with shape ``t.shape + jet.values.shape[1:]``; with
    ``derivatives = m`` returns an array of shape (m+1, ...) holding
    ``h^(0..m)``.  ``as_grid`` wraps ``h`` on a 1-D grid as a GridFunction.
    """
    if check:
        jet.check_growth(p.mu)
    t = np.asarray(t, dtype=float)
    if np.any(t > 0):
        raise ValueError("the extension is evaluated on x_n <= 0")
    K = min(p.K, jet.K)
    order = 0 if derivatives is None else int(derivatives)
    extra = jet.values.shape[1:]
    out = np.zeros((order + 1,) + t.shape + extra, dtype=complex)
    tt = t.reshape(t.shape + (1,) * len(extra))
    for k in range(K + 1):
        ad = a_derivatives(k, t, p, order).reshape((order + 1,) + tt.shape)
        fk = jet.values[k] / math.factorial(k)
        for beta in range(order + 1):
            acc = 0.0
            for i in range(beta + 1):
                m = beta - i
                if m > k:
                    continue
                mono = math.factorial(k) / math.factorial(k - m) * tt ** (k - m)
                acc = acc + math.comb(beta, i) * ad[i] * mono
            out[beta] = out[beta] + fk * acc
    # exact support: nothing survives at or beyond -1
    out[:, t <= -1.0] = 0.0
    if as_grid:
        if derivatives is not None or t.ndim != 1 or extra:
            raise ValueError("as_grid needs a 1-D grid, a scalar jet and no derivatives")
        return GridFunction([t], out[0], {"op": "extension", "params": p.as_dict()})
    return out[0] if derivatives is None else out


def glued(jet, p, f, x):
    """GridFunction of ``f`` on x > 0 and of the extension on x <= 0 (n = 1)."""
    x = np.asarray(x, dtype=float)
    vals = np.zeros(x.shape, dtype=complex)
    neg = x <= 0
    vals[neg] = extend_half_space(jet, p, x[neg])
    vals[~neg] = f(x[~neg])
    return GridFunction([x], vals, {"op": "extension", "params": p.as_dict()})


def jet_match_errors(jet, p, max_order=8, eps=None):
    """``|h^(beta)(0-) - jet_beta|`` for beta = 0..max_order.

    The one-sided limit is sampled at ``t = -eps`` with ``eps`` far inside the
    flat zone of every ``a_k`` (default ``eps = 1e-3 sigma_K``) and compared
    with the Taylor polynomial of the jet at the same point, so the result
    measures the cutoffs rather than the O(eps) drift of the jet itself.
    """
    if eps is None:
        eps = 1e-3 * p.sigma(p.K)
    K = min(p.K, jet.K)
    d = extend_half_space(jet, p, np.array([-eps]), derivatives=max_order)
    errs = []
    for beta in range(min(max_order, K) + 1):
        taylor = sum(jet.values[k] * (-eps) ** (k - beta) / math.factorial(k - beta) for k in range(beta, K + 1))
        errs.append(float(np.max(np.abs(d[beta, 0] - taylor))))
    return errs


def hat_series(jet, p, tol=1e-12, panels=4096):
    """Taylor coefficients of ``h^(z) = int_{-1}^0 e^{-i t z} h(t) dt`` at a point.

    Returns a callable ``w(z0, K)`` of shape (K+1,) with
    ``w[m] = int (-i t)^m / m! e^{-i t z0} h(t) dt``; the quadrature is a
    composite Gauss-Legendre rule refined near every ``-sigma_k``.
    """
    brk = [-1.0, 0.0] + [-p.sigma(k) for k in range(1, p.K + 1)]
    brk = np.unique(np.concatenate([brk, np.linspace(-1.0, 0.0, panels + 1)]))
    lo, hi = brk[:-1], brk[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    hv = extend_half_space(jet, p, nodes)
    if hv.ndim > 1:
        raise ValueError("hat_series handles n = 1 jets only")

    def w(z0, K):
        base = np.exp(-1j * nodes * z0) * hv * weights
        return np.array([np.sum(base * (-1j * nodes) ** m) / math.factorial(m) for m in range(K + 1)])

    return w


def empirical_T(p, k_max=12, alpha_max=6, samples=400):
    """Smallest T making the cutoff derivative bounds hold on the tested range.

    For each ``k <= k_max`` and ``1 <= alpha <= alpha_max`` the supremum of
    ``|d^alpha (a_k(t) t^k)|`` over the support is divided by the bound
    without the factor ``T^alpha``; T is the largest alpha-th root.
    """
    T = 0.0
    for k in range(0, k_max + 1):
        s = p.sigma(k)
        t = -np.linspace(0.0, s, samples)[1:-1]
        ad = a_derivatives(k, t, p, alpha_max)
        for alpha in range(1, alpha_max + 1):
            deriv = 0.0
            for i in range(alpha + 1):
                m = alpha - i
                if m > k:
                    continue
                deriv = deriv + math.comb(alpha, i) * ad[i] * math.factorial(k) / math.factorial(k - m) * t ** (k - m)
            sup = float(np.max(np.abs(deriv)))
            kk = max(k, 1)
            if k <= alpha:
                bound = 2 ** (alpha + 1) * math.exp(p.a * k) * p.D ** (-k) * kk ** (-k * (p.mu - 1)) \
                    * p.D ** alpha * alpha ** (p.mu * alpha)
            else:
                bound = 2 ** (alpha + 1) * math.exp(p.a * (k + 1)) * p.D ** (-k) * kk ** (-k * (p.mu - 1)) \
                    * p.D ** alpha * kk ** (p.mu * alpha)
            if sup > 0:
                T = max(T, (sup / bound) ** (1.0 / alpha))
    return T


# -- growth and decay diagnostics --------------------------------------------

@dataclass
class SeminormFit:
    """Regression estimates for ``sup |x^alpha d^beta u| <= C D^{alpha+beta} (alpha!)^nu (beta!)^mu``.

    The geometric factor is fitted separately in alpha and beta (``D_x``,
    ``D_xi``); ``D_est`` is the larger of the two.
    """

    C_est: float
    D_x: float
    D_xi: float
    mu_est: float
    nu_est: float
    residual: float
    table: dict

    @property
    def D_est(self):
        return max(self.D_x, self.D_xi)

    def as_dict(self):
        return {"C_est": self.C_est, "D_est": self.D_est, "D_x": self.D_x, "D_xi": self.D_xi,
                "mu_est": self.mu_est, "nu_est": self.nu_est, "residual": self.residual}


def spectral_derivatives(u, beta_max):
    """Derivatives 0..beta_max of a 1-D GridFunction that decays at both ends of its grid."""
    x = u.axes[0]
    k = 2 * np.pi * np.fft.fftfreq(len(x), d=u.spacing(0))
    uh = np.fft.fft(u.values)
    # drop round-off modes: (i k)^b would lift them above the signal
    uh[np.abs(uh) < 1e-15 * np.max(np.abs(uh), initial=0.0)] = 0.0
    out = np.array([np.fft.ifft((1j * k) ** b * uh) for b in range(beta_max + 1)])
    # and the round-off floor of each inverse transform, which x^alpha would amplify
    for b in range(beta_max + 1):
        floor = 1e-13 * np.max(np.abs(out[b]), initial=0.0)
        out[b][np.abs(out[b]) < floor] = 0.0
    return out


def seminorm_table(x, derivs, alpha_max):
    """``S(alpha, beta) = sup_x |x^alpha d^beta u|`` from derivative samples (beta rows)."""
    x = np.asarray(x, dtype=float)
    table = {}
    for beta in range(derivs.shape[0]):
        mag = np.abs(derivs[beta])
        for alpha in range(alpha_max + 1):
            table[(alpha, beta)] = float(np.max(np.abs(x) ** alpha * mag))
    return table


def seminorm_fit(u, alpha_max=8, beta_max=8, derivs=None):
    """Least-squares fit of
    ``log S = log C + alpha log D_x + beta log D_xi + nu log alpha! + mu log beta!``.

    ``u`` is a 1-D GridFunction (derivatives taken spectrally unless
    ``derivs`` supplies them, shape (beta_max+1, npts)) or a pair ``(x, derivs)``.
    """
    if beta_max < 3:
        raise IllConditionedFit("need derivatives up to order >= 3 to separate D from mu")
    if isinstance(u, GridFunction):
        x = u.axes[0]
        if derivs is None:
            derivs = spectral_derivatives(u, beta_max)
    else:
        x, derivs = u
    derivs = np.asarray(derivs)
    if derivs.shape[0] <= beta_max:
        raise ValueError(f"need {beta_max + 1} derivative rows, got {derivs.shape[0]}")
    table = seminorm_table(x, derivs[: beta_max + 1], alpha_max)
    if all(v == 0 for v in table.values()):
        return SeminormFit(0.0, 0.0, 0.0, float("nan"), float("nan"), 0.0, table)
    rows, rhs = [], []
    for (alpha, beta), v in sorted(table.items()):
        if v <= 0:
            continue
        rows.append([1.0, alpha, beta, math.lgamma(alpha + 1), math.lgamma(beta + 1)])
        rhs.append(math.log(v))
    A, y = np.array(rows), np.array(rhs)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise IllConditionedFit("seminorm table does not determine all five parameters")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return SeminormFit(float(math.exp(coef[0])), float(math.exp(coef[1])), float(math.exp(coef[2])),
                       float(coef[4]), float(coef[3]), resid, table)


@dataclass
class DecayFit:
    epsilon: float
    residual: float
    exponent: float
    window: tuple
    exponential: bool

    def as_dict(self):
        return {"epsilon": self.epsilon, "residual": self.residual, "exponent": self.exponent,
                "window": list(self.window), "exponential": self.exponential}


def decay_fit(u, window, p=1.0, axis=0, residual_threshold=0.1, floor=1e-300):
    """Fit ``log|u| = c - eps |x|^p`` on the window; RMS residual flags non-exponential decay.

    ``u`` is a GridFunction (1-D, or multi-D reduced by the sup over other axes)
    or a pair ``(x, values)``.
    """
    if isinstance(u, GridFunction):
        x = u.axes[axis]
        vals = np.abs(u.values)
        if u.ndim > 1:
            vals = np.max(np.moveaxis(vals, axis, 0).reshape(len(x), -1), axis=1)
    else:
        x, vals = np.asarray(u[0], dtype=float), np.abs(np.asarray(u[1]))
    lo, hi = window
    m = (x >= lo) & (x <= hi)
    if not np.any(m):
        raise ValueError("window lies outside the sampled domain")
    mag = vals[m]
    keep = mag > floor
    if keep.sum() < 3:
        raise AllZeroWindow(f"fewer than 3 nonzero samples on [{lo}, {hi}]")
    X = np.abs(x[m][keep]) ** p
    Y = np.log(mag[keep])
    res = stats.linregress(X, Y)
    pred = res.intercept + res.slope * X
    rms = float(np.sqrt(np.mean((Y - pred) ** 2)))
    return DecayFit(float(-res.slope), rms, float(p), (float(lo), float(hi)), bool(rms <= residual_threshold))
