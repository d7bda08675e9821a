"""Half-space reduction: contour paths, boundary symbols, Poisson and
transmission operators, and the normalized boundary system.

Conventions: ``D = -i d``, the trace ``gamma_k u = (D_{x_n}^k u)(x', 0+)`` and
the layer ``u (x) delta^(j) = u(x') D_{x_n}^j delta(x_n)``, whose partial
Fourier transform in ``x_n`` is ``u(x') xi_n^j``.  With these the jump formula
reads ``P(e+ u) = e+ P u + (1/i) sum P_{j+l+1}(x', 0, D') gamma_l(u) (x) delta^(j)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import expr as ex
from .calculus import FormalSum, compose
from .ellipticity import boundary_grid, _boundary_eval
from .errors import DegreeTooHigh, QuadratureFailure, RealPoleOnPath
from .gridfunc import GridFunction
from .rational import REAL_POLE_TOL, rational_at, upper_residue_sum


# -- contour paths -----------------------------------------------------------

@dataclass
class ContourPath:
    """Piecewise path in the xi_n plane.

    Segments are ``("line", z0, z1)`` or ``("arc", radius, theta0, theta1)``.
    """

    kind: str
    segments: list
    params: dict = field(default_factory=dict)

    def integrate(self, f, tol=1e-10, limit=200):
        """``int f(z) dz`` along the path; ``f`` maps a complex scalar to a complex scalar."""
        total = 0j
        for seg in self.segments:
            if seg[0] == "line":
                z0, z1 = complex(seg[1]), complex(seg[2])
                if z0 == z1:
                    continue
                dz = z1 - z0

                def g(s, z0=z0, dz=dz):
                    return complex(f(z0 + s * dz)) * dz
            else:
                rad, t0, t1 = seg[1], seg[2], seg[3]

                def g(s, rad=rad, t0=t0, t1=t1):
                    th = t0 + s * (t1 - t0)
                    z = rad * np.exp(1j * th)
                    return complex(f(z)) * 1j * z * (t1 - t0)

            val, err = integrate.quad(g, 0.0, 1.0, complex_func=True, epsabs=tol, epsrel=tol, limit=limit)
            err = abs(err)
            if not np.isfinite(val) or err > 1e3 * max(tol, tol * abs(val)):
                raise QuadratureFailure(f"contour segment {seg[0]} did not converge (error estimate {err:.2e})")
            total += val
        return total


def _bracket(v):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return float(np.sqrt(1.0 + np.sum(v * v)))


def semicircle(B, xi_prime):
    """``{B <xi'> e^{i theta}: 0 <= theta <= pi}``."""
    rho = B * _bracket(xi_prime)
    return ContourPath("semicircle", [("arc", rho, 0.0, math.pi)], {"B": B, "rho": rho})


def closed_semicircle(B, xi_prime):
    """Real segment ``[-rho, rho]`` followed by the upper semicircle of radius rho."""
    rho = B * _bracket(xi_prime)
    return ContourPath("closed", [("line", -rho, rho), ("arc", rho, 0.0, math.pi)], {"B": B, "rho": rho})


def bridged(B, xi_prime, M, theta):
    """Semicircle joined to the real axis at ``+-B M^theta``.

    Runs from ``B M^theta`` to ``B <xi'>`` on the real axis, around the arc,
    then from ``-B <xi'>`` to ``-B M^theta``.  For decaying integrands with
    every pole inside the arc the integral equals ``int_{|t| >= B M^theta} f``.
    """
    rho = B * _bracket(xi_prime)
    far = B * M ** theta
    segs = [("line", far, rho), ("arc", rho, 0.0, math.pi), ("line", -rho, -far)]
    return ContourPath("bridged", segs, {"B": B, "rho": rho, "far": far, "M": M, "theta": theta})


def clipped(B, xi_prime, M, theta):
    """Bridged path whose real endpoints are ``sqrt(B^2 M^(2 theta) - <xi'>^2)`` (or 0)."""
    rho = B * _bracket(xi_prime)
    d = (B * M ** theta) ** 2 - _bracket(xi_prime) ** 2
    far = math.sqrt(d) if d > 0 else 0.0
    segs = [("line", far, rho), ("arc", rho, 0.0, math.pi), ("line", -rho, -far)]
    return ContourPath("clipped", segs, {"B": B, "rho": rho, "far": far, "M": M, "theta": theta})


def default_M(m1, n):
    return max(1, int(m1) + n + 1)


# -- assumption (A) audit ----------------------------------------------------

@dataclass
class AssumptionAProfile:
    """Pole audit of rational terms over a boundary grid.

    ``r`` is the largest ``|pole| / <xi'>`` seen; ``B`` the contour constant
    (``B > r``); ``real_poles`` lists points where a pole met the real axis.
    """

    B: float
    r: float
    poles: list
    real_poles: list
    M: int
    theta: float

    @property
    def passed(self):
        return not self.real_poles and self.B > self.r

    def as_dict(self):
        return {"B": self.B, "r": self.r, "M": self.M, "theta": self.theta,
                "real_poles": self.real_poles, "pass": self.passed, "points": len(self.poles)}


def assumption_a_profile(terms, n, grid=None, margin=2.0, m1=0, theta=1.0):
    grid = grid if grid is not None else boundary_grid(n, R=1.0, R_max=1e3, n_radii=6, count=8)
    terms = [terms] if isinstance(terms, ex.Expr) else list(terms)
    r = 0.0
    poles = []
    real = []
    for i in range(len(grid)):
        xp, xip = grid.point(i)
        w = _bracket(xip)
        here = []
        for t in terms:
            ps, _ = rational_at(t, n, xp, xip).poles()
            for p, m in ps:
                here.append([p.real, p.imag, m])
                r = max(r, abs(p) / w)
                if abs(p.imag) <= REAL_POLE_TOL * max(1.0, abs(p)):
                    real.append({"x_prime": xp.tolist(), "xi_prime": xip.tolist(), "pole": [p.real, p.imag]})
        poles.append(here)
    B = max(1.0, margin * r)
    return AssumptionAProfile(B, r, poles, real, default_M(m1, n), theta)


# -- boundary symbols --------------------------------------------------------

def trace_symbol(term, k, n):
    """Symbol of ``D_{x_n}^k op(term)``, i.e. ``xi_n^k # term`` (exact)."""
    if k == 0:
        return term
    zk = ex.power(ex.xi(n), k)
    return compose(FormalSum([zk], _zero_order(), n=n), FormalSum([term], _zero_order(), n=n), k + 1, cap=10 ** 6).total()


def _zero_order():
    from .seminorm import SGOrder

    return SGOrder(0, 0)


def boundary_integrand(term, k, j, n):
    """``(xi_n^k # term) * xi_n^j`` with x_n = 0."""
    c = trace_symbol(ex.as_expr(term), k, n)
    c = ex.mul(c, ex.power(ex.xi(n), j)) if j else c
    if (ex.X, n) in ex.free_vars(c):
        c = ex.subs(c, (ex.X, n), 0)
    return c


def _points(v, n):
    v = np.asarray(v, dtype=float)
    if n == 1:
        return v if v.ndim == 2 else np.zeros((1, 0))
    return v.reshape(-1, n - 1)


def boundary_symbol(term, k, j, n, x_prime, xi_prime, method="residue", allow_polynomial_part=False,
                    B=None, tol=1e-10):
    """Values of the boundary symbol ``q^{kj}(x', xi')`` at the given points.

    ``q^{kj}`` is the limit ``x_n -> 0+`` of ``(1/2pi) int e^{i x_n t} c(x', 0, xi', t) t^j dt``
    with ``c = xi_n^k # term``.  The residue method sums ``i Res`` over the
    upper half-plane; the quadrature method integrates the integrand directly
    over the real segment ``[-rho, rho]`` closed by the upper semicircle of
    radius ``rho = B <xi'>`` enclosing every pole.

    ``x_prime``, ``xi_prime`` have shape (npts, n-1).  A polynomial part in
    ``t`` (degree >= 0) is a layer supported on x_n = 0 and vanishes in the
    limit; it is discarded only when ``allow_polynomial_part`` is set,
    otherwise :class:`DegreeTooHigh` is raised.
    """
    integrand = boundary_integrand(term, k, j, n)
    xp = _points(x_prime, n)
    xip = _points(xi_prime, n)
    out = np.zeros(len(xp), dtype=complex)
    for i in range(len(xp)):
        rf = rational_at(integrand, n, xp[i], xip[i])
        if rf.degree >= 0 and not allow_polynomial_part:
            raise DegreeTooHigh(f"integrand has degree {rf.degree} in xi_n; contour closure is invalid")
        if method == "residue":
            out[i] = upper_residue_sum(rf)
        elif method == "quadrature":
            out[i] = _quadrature_value(integrand, rf, n, xp[i], xip[i], B, tol)
        else:
            raise ValueError(f"unknown method {method!r}")
    return out


def _quadrature_value(integrand, rf, n, xp, xip, B, tol):
    poles, _ = rf.poles()
    for p, _m in poles:
        if abs(p.imag) <= REAL_POLE_TOL * max(1.0, abs(p)):
            raise RealPoleOnPath(f"pole {p} on the real axis")
    w = _bracket(xip)
    rmax = max((abs(p) for p, _ in poles), default=0.0) / w
    if B is None:
        B = max(1.0, 2.0 * rmax)
    elif B <= rmax:
        raise ValueError(f"contour constant B={B} does not enclose a pole at radius {rmax * w}")
    xs = [np.array([v]) for v in xp] + [np.zeros(1)]
    xis0 = [np.array([v]) for v in xip]

    def f(z):
        return ex.evaluate(integrand, xs, xis0 + [np.array([z])], allow_complex_xi_n=True)[0]

    return closed_semicircle(B, xip).integrate(f, tol) / (2 * math.pi)


def boundary_symbol_table(terms, n, m1, x_prime, xi_prime, method="residue"):
    """``q^{kj}`` for ``0 <= k, j <= m1 - 1`` summed over the given terms."""
    terms = [terms] if isinstance(terms, ex.Expr) else list(terms)
    npts = _points(x_prime, n).shape[0]
    table = {}
    for k in range(m1):
        for j in range(m1):
            vals = np.zeros(npts, dtype=complex)
            for t in terms:
                vals = vals + boundary_symbol(t, k, j, n, x_prime, xi_prime, method, allow_polynomial_part=True)
            table[(k, j)] = vals
    return table


# -- jump operator and boundary system ---------------------------------------

def assemble_Ptilde(P):
    """``{(l, j): (1/i) P_{j+l+1}(x', 0, xi')}`` for ``j + l + 1 <= m1``; zero entries dropped."""
    parts = P.normal_parts()
    n = P.n
    m1 = int(P.order.m1)
    table = {}
    for l in range(m1):
        for j in range(m1 - l):
            pj = parts.get(j + l + 1)
            if pj is None:
                continue
            if (ex.X, n) in ex.free_vars(pj):
                pj = ex.subs(pj, (ex.X, n), 0)
            entry = ex.mul(ex.Const(-1j), pj)
            if entry != ex.ZERO:
                table[(l, j)] = entry
    return table


@dataclass
class BoundarySystem:
    """Values of the normalized system ``(I - Qbar; Bbar)`` on a boundary grid.

    ``matrices`` has shape (npts, m1 + r, m1).
    """

    grid: object
    matrices: np.ndarray
    m1: int
    r: int

    @property
    def Qbar(self):
        return np.eye(self.m1)[None] - self.matrices[:, : self.m1]

    @property
    def Bbar(self):
        return self.matrices[:, self.m1:]


def assemble_system(problem, b, grid=None, method="residue", **grid_kwargs):
    """Assemble ``(I - Qbar; Bbar)`` from a parametrix ``b`` of the interior symbol.

    ``Q_{kl} = (1/i) sum_j q^{kj} P_{j+l+1}``, normalized to
    ``<xi'>^{-k} Q_{kl} <xi'>^{l}``; ``Bbar_{jl} = <x'>^{-m2j} <xi'>^{-m1j} B_{j,l} <xi'>^{l}``.
    Products of boundary symbols are taken pointwise (principal part of the
    boundary composition, exact for x'-independent entries).
    """
    n, m1, r = problem.n, problem.m1, problem.r
    grid = grid if grid is not None else boundary_grid(n, **grid_kwargs)
    xp, xip = grid.x, grid.xi
    npts = len(grid)
    table = boundary_symbol_table(b.terms, n, m1, xp, xip, method)
    ptilde = assemble_Ptilde(problem.P)
    pvals = {key: _boundary_eval(e, xp, xip, n) for key, e in ptilde.items()}
    wxi = np.sqrt(1.0 + np.sum(xip * xip, axis=1))
    wx = np.sqrt(1.0 + np.sum(xp * xp, axis=1))
    mats = np.zeros((npts, m1 + r, m1), dtype=complex)
    for k in range(m1):
        for l in range(m1):
            q = np.zeros(npts, dtype=complex)
            for j in range(m1 - l):
                if (l, j) in pvals:
                    # pvals already carry the factor 1/i
                    q = q + table[(k, j)] * pvals[(l, j)]
            mats[:, k, l] = (1.0 if k == l else 0.0) - wxi ** (-k) * q * wxi ** l
    for jrow, row in enumerate(problem.rows):
        for l, Bl in row.B.items():
            val = _boundary_eval(Bl, xp, xip, n)
            mats[:, m1 + jrow, l] = wx ** (-row.m2j) * wxi ** (-row.m1j) * val * wxi ** l
    return BoundarySystem(grid, mats, m1, r)


@dataclass
class LeftEllipticReport:
    min_singular: float
    threshold: float
    passed: bool
    witness: dict

    def as_dict(self):
        return {"min_singular_value": self.min_singular, "threshold": self.threshold,
                "pass": self.passed, "witness": self.witness}


def left_elliptic_check(system, threshold=1e-4):
    """Smallest singular value of the (m1 + r) x m1 system over the grid."""
    if isinstance(system, BoundarySystem):
        mats = system.matrices
    else:
        mats = np.asarray(system, dtype=complex)
        if mats.ndim == 2:
            mats = mats[None]
    sv = np.linalg.svd(mats, compute_uv=False)
    smin = sv[:, -1]
    i = int(np.argmin(smin))
    witness = {"index": i, "sigma_min": float(smin[i])}
    if isinstance(system, BoundarySystem):
        witness["x_prime"] = system.grid.x[i].tolist()
        witness["xi_prime"] = system.grid.xi[i].tolist()
    return LeftEllipticReport(float(smin[i]), threshold, bool(smin[i] >= threshold), witness)


# -- Poisson operator --------------------------------------------------------

def _terms(a):
    if isinstance(a, FormalSum):
        return a.terms
    return [ex.as_expr(a)]


def poisson_profile(a, n, xi_prime, x_n, x_prime=()):
    """``r+ op(a)(e^{i x' xi'} (x) delta)(x', x_n) e^{-i x' xi'}`` for x_n > 0.

    Evaluated as ``i sum Res_{Im z > 0} a(x', x_n, xi', z) e^{i x_n z}``.
    """
    x_n = np.asarray(x_n, dtype=float)
    total = np.zeros(x_n.shape, dtype=complex)
    for t in _terms(a):
        if (ex.X, n) in ex.free_vars(t):
            flat = np.ravel(x_n)
            vals = np.array([upper_residue_sum(rational_at(t, n, x_prime, xi_prime, x_n=v), x_n=v) for v in flat])
            total = total + vals.reshape(x_n.shape)
        else:
            rf = rational_at(t, n, x_prime, xi_prime)
            if rf.degree >= 0:
                raise DegreeTooHigh("Poisson symbol must decay in xi_n")
            total = total + upper_residue_sum(rf, x_n=x_n)
    return total


def poisson_apply(a, v, x_n):
    """Apply ``r+ op(a)(v (x) delta)`` to boundary data ``v``.

    For n = 2 the data is a GridFunction on a uniform periodic x1-grid and the
    symbol must not depend on x1; each discrete mode is propagated by
    residues.  For n = 1 ``v`` is a 0-d GridFunction (or a scalar).
    """
    x_n = np.asarray(x_n, dtype=float)
    if np.any(x_n <= 0):
        raise ValueError("Poisson evaluation requires x_n > 0")
    if not isinstance(v, GridFunction):
        v = GridFunction([], np.asarray(v, dtype=complex))
    if v.ndim == 0:
        prof = poisson_profile(a, 1, (), x_n)
        return GridFunction([x_n], complex(v.values) * prof, {"op": "poisson", "n": 1})
    if v.ndim != 1:
        raise ValueError("boundary data must be 0-d (n=1) or 1-d (n=2)")
    for t in _terms(a):
        if (ex.X, 1) in ex.free_vars(t):
            raise ValueError("the modal Poisson solver needs a symbol independent of x1")
    x1 = v.axes[0]
    N = len(x1)
    L = N * v.spacing(0)
    vhat = np.fft.fft(v.values)
    freqs = 2 * np.pi * np.fft.fftfreq(N, d=L / N)
    out_hat = np.zeros((N, len(x_n)), dtype=complex)
    cache = {}
    for i, f in enumerate(freqs):
        if vhat[i] == 0:
            continue
        key = abs(f) if _even_in_xi1(a) else f
        if key not in cache:
            cache[key] = poisson_profile(a, 2, (f,), x_n)
        out_hat[i] = vhat[i] * cache[key]
    u = np.fft.ifft(out_hat, axis=0)
    return GridFunction([x1, x_n], u, {"op": "poisson", "n": 2})


def _even_in_xi1(a):
    for t in _terms(a):
        ev = ex.evaluate(t, [0.3, 0.0], [0.7, 0.2]) if ex.dimension(t) else None
        od = ex.evaluate(t, [0.3, 0.0], [-0.7, 0.2]) if ex.dimension(t) else None
        if ev is not None and not np.allclose(ev, od, rtol=1e-13, atol=0):
            return False
    return True


# -- transmission ------------------------------------------------------------

def transmission_apply(a, f, jet=None, params=None, left=32.0, points=2 ** 16, tol=1e-12):
    """``r+ op(a) e+ f`` on the half-line for an x-independent symbol ``a``.

    ``f`` is a GridFunction on ``x >= 0`` (uniform grid starting at 0) or a
    callable; the extension ``f~ = f on x > 0, h on x <= 0`` is built from
    the boundary jet, ``op(a) f~`` is applied spectrally on a periodic box,
    and ``r+ op(a) e- h`` is subtracted by residues,
    ``i sum Res a(z) h^(z) e^{i x z}`` with ``h^(z) = int_{-1}^0 e^{-i t z} h(t) dt``.
    """
    from .extension import BoundaryJet, ExtensionParams, extend_half_space, hat_series

    terms = _terms(a)
    for t in terms:
        if any(kind == ex.X for kind, _ in ex.free_vars(t)):
            raise ValueError("transmission_apply needs an x-independent symbol")
    if params is None:
        params = ExtensionParams(mu=2.0, D=1.0)
    if jet is None:
        raise ValueError("a boundary jet is required")
    if not isinstance(jet, BoundaryJet):
        jet = BoundaryJet(np.asarray(jet, dtype=complex))
    if isinstance(f, GridFunction):
        xs = f.axes[0]
        step = f.spacing(0)
        if abs(xs[0]) > 1e-12 * step or not np.allclose(np.diff(xs), step, rtol=1e-9, atol=0):
            raise ValueError("f must be sampled on a uniform grid starting at x = 0")
        fpos = f.values
    else:
        step = 64.0 / points
        xs = step * np.arange(points // 2)
        fpos = np.asarray(f(xs), dtype=complex)
    nleft = int(math.ceil(left / step))
    tneg = -step * np.arange(nleft, 0, -1)
    ftil = np.concatenate([extend_half_space(jet, params, tneg), fpos])
    # the periodic box [-nleft*step, xs[-1] + step) carries the glued function;
    # multipliers commute with translations so no phase correction is needed
    freqs = 2 * np.pi * np.fft.fftfreq(len(ftil), d=step)
    sym = np.zeros(len(ftil), dtype=complex)
    for t in terms:
        sym = sym + ex.evaluate(t, [], [freqs])
    applied = np.fft.ifft(np.fft.fft(ftil) * sym)
    full = applied[nleft:]
    out_x = xs
    # e- correction by residues
    weight = hat_series(jet, params, tol)
    corr = np.zeros(len(out_x), dtype=complex)
    for t in terms:
        rf = rational_at(t, 1, (), ())
        if rf.degree >= 0:
            if not rf.den and len(rf.num) == 1:
                # constant symbol: op(a) is local, e- h does not reach x > 0
                continue
            raise DegreeTooHigh("transmission correction needs a decaying symbol")
        corr = corr + upper_residue_sum(rf, x_n=out_x, weight=weight)
    vals = full - corr
    return GridFunction([out_x], vals, {"op": "transmission", "n": 1})
