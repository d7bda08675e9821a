"""SG-ellipticity margins, normal-covariable roots and Lopatinski-Shapiro tests.

Polynomials in the normal covariable are stored with coefficients in
increasing degree, ``p(z) = sum_k c[k] z^k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .calculus import DiffSymbol
from .errors import LeadingCoeffVanishes, RealRootDetected
from .seminorm import PhaseGrid, radial_grid, sphere_directions

REAL_BAND = 1e-9


# -- polynomial helpers ------------------------------------------------------

def trim(c, tol=0.0):
    c = np.asarray(c, dtype=complex)
    k = len(c)
    while k > 1 and abs(c[k - 1]) <= tol:
        k -= 1
    return c[:k]


def companion_roots(c):
    """Roots of ``sum c[k] z^k`` as eigenvalues of the companion matrix."""
    c = trim(c)
    N = len(c) - 1
    if N < 1:
        return np.zeros(0, dtype=complex)
    if c[-1] == 0:
        raise LeadingCoeffVanishes("leading coefficient is zero")
    M = np.zeros((N, N), dtype=complex)
    M[1:, :-1] = np.eye(N - 1)
    M[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(M)


def root_radius(c):
    """``max_j (N |c_j / c_N|)^(1/(N-j))``: every root lies in this closed disc."""
    c = np.asarray(c, dtype=complex)
    N = len(c) - 1
    if N < 1:
        return 0.0
    if c[N] == 0:
        raise LeadingCoeffVanishes("leading coefficient is zero")
    lead = abs(c[N])
    rad = 0.0
    for j in range(N):
        if c[j] != 0:
            rad = max(rad, (N * abs(c[j]) / lead) ** (1.0 / (N - j)))
    # round outward: for N = 1 the bound is attained, and both the radius and
    # the computed roots carry a few ulps of rounding
    return rad * (1.0 + 16 * np.finfo(float).eps)


def poly_mod(p, d):
    """Remainder of ``p`` divided by the monic polynomial ``d``."""
    p = np.array(p, dtype=complex)
    d = np.asarray(d, dtype=complex)
    r = len(d) - 1
    if d[-1] != 1:
        raise ValueError("divisor must be monic")
    for k in range(len(p) - 1, r - 1, -1):
        q = p[k]
        if q != 0:
            p[k - r:k + 1] -= q * d
    out = np.zeros(r, dtype=complex)
    m = min(r, len(p))
    out[:m] = p[:m]
    return out


def monic_from_roots(roots):
    """Increasing-degree coefficients of ``prod (z - t)``."""
    c = np.array([1.0 + 0j])
    for t in roots:
        c = np.concatenate([[0], c]) - t * np.concatenate([c, [0]])
    return c


# -- boundary problems -------------------------------------------------------

@dataclass
class BoundaryRow:
    """One boundary operator ``sum_k B_k(x', D') D_{x_n}^k`` of order (m1j, m2j)."""

    m1j: int
    m2j: float
    B: dict

    def __post_init__(self):
        self.B = {int(k): ex.as_expr(v) for k, v in self.B.items()}
        self.B = {k: v for k, v in sorted(self.B.items()) if v != ex.ZERO}
        if any(k > self.m1j for k in self.B):
            raise ValueError("boundary coefficients B_k must vanish for k > m1j")


@dataclass
class BVProblem:
    P: DiffSymbol
    rows: list
    name: str = "problem"

    def __post_init__(self):
        m1 = self.P.order.m1
        if int(m1) != m1 or int(m1) % 2:
            raise ValueError("the interior order m1 must be an even integer")
        if len(self.rows) != self.r:
            raise ValueError(f"expected r = m1/2 = {self.r} boundary rows, got {len(self.rows)}")
        for row in self.rows:
            if not 0 <= row.m1j <= m1 - 1:
                raise ValueError("boundary orders must satisfy 0 <= m1j <= m1 - 1")

    @property
    def n(self):
        return self.P.n

    @property
    def m1(self):
        return int(self.P.order.m1)

    @property
    def m2(self):
        return self.P.order.m2

    @property
    def r(self):
        return self.m1 // 2


def dirichlet_rows(r, n, m2=0.0):
    """Rows ``<x'>^{m2j} gamma_{j-1}`` with m1j = j - 1."""
    rows = []
    for j in range(r):
        coeff = ex.ONE if m2 == 0 or n == 1 else ex.power(ex.bracket(ex.X, n - 1), m2)
        rows.append(BoundaryRow(j, m2, {j: coeff}))
    return rows


# -- grids ------------------------------------------------------------------

@dataclass
class BoundaryGrid:
    """Sample points ``(x', xi')`` of the boundary phase space, shape (npts, n-1)."""

    x: np.ndarray
    xi: np.ndarray
    spec: dict = field(default_factory=dict)

    def __len__(self):
        return self.x.shape[0]

    def point(self, i):
        return self.x[i], self.xi[i]


def boundary_grid(n, R=1.0, R_max=1e4, n_radii=12, count=16, seed=0):
    """Log-radial grid on ``R <= |(x', xi')| <= R_max``; one empty point when n = 1."""
    spec = {"n": n, "R": R, "R_max": R_max, "n_radii": n_radii, "rays": count, "seed": seed}
    if n == 1:
        return BoundaryGrid(np.zeros((1, 0)), np.zeros((1, 0)), spec)
    g = radial_grid(n - 1, R, R_max, n_radii, count, seed)
    return BoundaryGrid(g.x, g.xi, spec)


def _boundary_eval(e, xp, xip, n):
    """Evaluate an Expr in (x', xi') with x_n = 0 appended."""
    xs = [np.asarray(v) for v in np.asarray(xp).T] + [np.zeros(np.shape(xp)[:-1])]
    xis = [np.asarray(v) for v in np.asarray(xip).T] + [np.zeros(np.shape(xip)[:-1])]
    return ex.evaluate(e, xs[:n], xis[:n])


def _bracket(v):
    v = np.asarray(v, dtype=float)
    return np.sqrt(1.0 + np.sum(v * v, axis=-1))


# -- SG ellipticity ----------------------------------------------------------

@dataclass
class MarginReport:
    margin: float
    C_min: float
    passed: bool
    witness: dict
    grid: dict

    def as_dict(self):
        return {"margin": self.margin, "C_min": self.C_min, "pass": self.passed,
                "witness": self.witness, "grid": self.grid}


def sg_elliptic_check(a, R=1.0, R_max=1e4, n_radii=12, count=16, seed=0, C_min=1e-6, grid=None):
    """Infimum of ``|a| <x>^{-m2} <xi>^{-m1}`` over a log-radial phase-space grid."""
    if grid is None:
        grid = radial_grid(a.n, R, R_max, n_radii, count, seed)
        spec = {"R": R, "R_max": R_max, "n_radii": n_radii, "rays": count, "seed": seed}
    else:
        spec = {"points": len(grid)}
    sym = a.symbol() if isinstance(a, DiffSymbol) else a
    vals = np.abs(grid.evaluate(sym))
    wx = (1.0 + np.sum(grid.x ** 2, axis=1)) ** (a.order.m2 / 2)
    wxi = (1.0 + np.sum(grid.xi ** 2, axis=1)) ** (a.order.m1 / 2)
    ratio = vals / (wx * wxi)
    i = int(np.argmin(ratio))
    margin = float(ratio[i])
    witness = {"x": grid.x[i].tolist(), "xi": grid.xi[i].tolist(), "ratio": margin}
    return MarginReport(margin, C_min, bool(margin >= C_min), witness, spec)


# -- roots in the normal covariable -----------------------------------------

@dataclass
class RootProfile:
    point: tuple
    roots: np.ndarray
    upper: np.ndarray
    a_plus_coeffs: np.ndarray
    leading_coeff: complex

    @property
    def min_gap(self):
        return float(np.min(np.abs(self.roots.imag))) if len(self.roots) else math.inf


def root_bound(a, x, xi_prime):
    """Radius of a disc containing every root of ``z -> a(x, xi', z)``."""
    return root_radius(normal_coefficients(a, x, xi_prime))


def normal_coefficients(a, x, xi_prime):
    """Coefficients in z of ``a(x, xi', z)`` at one point."""
    parts = a.normal_parts()
    x = list(np.atleast_1d(np.asarray(x, dtype=float)))
    xis = list(np.atleast_1d(np.asarray(xi_prime, dtype=float))) + [0.0]
    c = np.zeros(a.degree + 1, dtype=complex)
    for j, pj in parts.items():
        c[j] = complex(ex.evaluate(pj, x, xis))
    return c


def normalized_coefficients(a, x_prime, xi_prime):
    """Coefficients of ``<x'>^{-m2} <xi'>^{-m1} a(x', 0, xi', <xi'> z)``."""
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    xi_prime = np.atleast_1d(np.asarray(xi_prime, dtype=float))
    m1 = int(a.order.m1)
    c = normal_coefficients(a, np.concatenate([x_prime, [0.0]]), xi_prime)
    c = np.concatenate([c, np.zeros(max(0, m1 + 1 - len(c)))])
    bx, bxi = _bracket(x_prime), _bracket(xi_prime)
    scale = bxi ** np.arange(len(c)) * bx ** (-a.order.m2) * bxi ** (-a.order.m1)
    return c * scale


def roots_in_normal(a, x_prime, xi_prime, band=REAL_BAND):
    """Roots of the normalized normal polynomial, split by half-plane."""
    c = normalized_coefficients(a, x_prime, xi_prime)
    m1 = int(a.order.m1)
    lead = c[m1]
    if abs(lead) <= 1e-14 * max(1.0, float(np.max(np.abs(c)))):
        raise LeadingCoeffVanishes(f"leading coefficient vanishes at x'={list(x_prime)}, xi'={list(xi_prime)}")
    roots = companion_roots(c[: m1 + 1])
    roots = roots[np.lexsort((roots.real, -roots.imag))]
    point = (tuple(np.atleast_1d(x_prime).tolist()), tuple(np.atleast_1d(xi_prime).tolist()))
    near = np.abs(roots.imag) < band
    if np.any(near):
        raise RealRootDetected(f"root(s) on the real axis at x'={point[0]}, xi'={point[1]}",
                               roots=roots, point=point)
    upper = roots[roots.imag > 0]
    return RootProfile(point, roots, upper, monic_from_roots(upper), complex(lead))


@dataclass
class ProperReport:
    passed: bool
    points: int
    min_gap: float
    witness: dict | None
    grid: dict

    def as_dict(self):
        return {"pass": self.passed, "points": self.points, "min_root_gap": self.min_gap,
                "witness": self.witness, "grid": self.grid}


def properly_elliptic_check(P, R=1.0, grid=None, **grid_kwargs):
    """Exactly r = m1/2 normalized roots in the upper half-plane at every grid point."""
    grid = grid if grid is not None else boundary_grid(P.n, R, **grid_kwargs)
    r = int(P.order.m1) // 2
    gap = math.inf
    for i in range(len(grid)):
        xp, xip = grid.point(i)
        try:
            prof = roots_in_normal(P, xp, xip)
        except (RealRootDetected, LeadingCoeffVanishes) as err:
            roots = getattr(err, "roots", None)
            witness = {"x_prime": xp.tolist(), "xi_prime": xip.tolist(), "error": type(err).__name__,
                       "roots": _complex_list(roots) if roots is not None else None}
            return ProperReport(False, i + 1, 0.0, witness, grid.spec)
        gap = min(gap, prof.min_gap)
        if len(prof.upper) != r:
            witness = {"x_prime": xp.tolist(), "xi_prime": xip.tolist(), "error": "UpperRootCount",
                       "upper": len(prof.upper), "roots": _complex_list(prof.roots)}
            return ProperReport(False, i + 1, gap, witness, grid.spec)
    return ProperReport(True, len(grid), gap, None, grid.spec)


def _complex_list(z):
    return [[float(v.real), float(v.imag)] for v in np.asarray(z)]


# -- Lopatinski-Shapiro ------------------------------------------------------

def boundary_row_polynomial(row, x_prime, xi_prime, n):
    """``b^j(z) = sum_k B_k(x', xi') <x'>^{-m2j} <xi'>^{k - m1j} z^k``."""
    x_prime = np.atleast_1d(np.asarray(x_prime, dtype=float))
    xi_prime = np.atleast_1d(np.asarray(xi_prime, dtype=float))
    bx, bxi = _bracket(x_prime), _bracket(xi_prime)
    c = np.zeros(row.m1j + 1, dtype=complex)
    for k, Bk in row.B.items():
        val = complex(_boundary_eval(Bk, x_prime[None, :], xi_prime[None, :], n)[0])
        c[k] = val * bx ** (-row.m2j) * bxi ** (k - row.m1j)
    return c


def ls_matrix(problem, x_prime, xi_prime, profile=None):
    """The r x r matrix of boundary polynomials reduced modulo ``a^+``."""
    if profile is None:
        profile = roots_in_normal(problem.P, x_prime, xi_prime)
    r = problem.r
    if len(profile.upper) != r:
        raise RealRootDetected(f"expected {r} upper roots, found {len(profile.upper)}",
                               roots=profile.roots, point=profile.point)
    M = np.zeros((r, r), dtype=complex)
    for j, row in enumerate(problem.rows):
        b = boundary_row_polynomial(row, x_prime, xi_prime, problem.n)
        M[j] = poly_mod(b, profile.a_plus_coeffs)
    return M


@dataclass
class LSReport:
    grid: dict
    dets: list
    min_det: float
    C_min: float
    passed: bool
    witness: dict | None

    def as_dict(self):
        return {"grid": self.grid, "min_det": self.min_det, "C_min": self.C_min, "pass": self.passed,
                "witness": self.witness, "points": len(self.dets)}


def ls_check(problem, R=1.0, grid=None, C_min=1e-4, **grid_kwargs):
    """Uniform Lopatinski-Shapiro test: min over the grid of ``|det b~|``."""
    grid = grid if grid is not None else boundary_grid(problem.n, R, **grid_kwargs)
    dets = []
    witness = None
    worst = math.inf
    for i in range(len(grid)):
        xp, xip = grid.point(i)
        try:
            d = abs(np.linalg.det(ls_matrix(problem, xp, xip)))
        except (RealRootDetected, LeadingCoeffVanishes) as err:
            witness = {"x_prime": xp.tolist(), "xi_prime": xip.tolist(), "error": type(err).__name__}
            return LSReport(grid.spec, dets, 0.0, C_min, False, witness)
        dets.append(float(d))
        if d < worst:
            worst = float(d)
            witness = {"x_prime": xp.tolist(), "xi_prime": xip.tolist(), "det": float(d)}
    return LSReport(grid.spec, dets, worst, C_min, bool(worst >= C_min), witness)


# -- classical (homogeneous principal symbol) variant ------------------------

def homogeneous_part(e, kind, indices, degree):
    """Degree-``degree`` homogeneous part of a polynomial in the given variables.

    Computed exactly from Taylor coefficients at the origin of those variables.
    """
    from .seminorm import multi_indices

    terms = []
    k = len(indices)
    for beta in multi_indices(k, degree):
        if sum(beta) != degree:
            continue
        d = e
        for i, b in zip(indices, beta):
            for _ in range(b):
                d = ex.diff(d, (kind, i))
        for i in sorted(indices, reverse=True):
            d = ex.subs(d, (kind, i), 0)
        if d == ex.ZERO:
            continue
        fact = math.prod(math.factorial(b) for b in beta)
        mono = [ex.power(ex.Var(kind, i), b) for i, b in zip(indices, beta) if b]
        terms.append(ex.mul(ex.Const(1 / fact), d, *mono))
    return ex.add(*terms)


def principal_symbol(P):
    """Top-degree part in xi of a differential symbol, as a DiffSymbol."""
    m1 = int(P.order.m1)
    coeffs = {a: c for a, c in P.coeffs.items() if sum(a) == m1}
    return DiffSymbol(coeffs, P.n, P.order, P.nu)


def classical_ls_check(problem, x_points, n_dirs=16, C_min=1e-4, seed=0):
    """Lopatinski-Shapiro test with principal symbols on a flat boundary chart.

    Roots of ``p_m1(x', 0, xi', z)`` are taken for unit ``xi'`` and boundary
    symbols are replaced by their principal parts of degree m1j; no
    normalization by brackets is applied.
    """
    n = problem.n
    if n < 2:
        raise ValueError("the classical condition needs a tangential covariable (n >= 2)")
    p0 = principal_symbol(problem.P)
    parts = p0.normal_parts()
    tangential = list(range(1, n))
    rows0 = []
    for row in problem.rows:
        B0 = {k: homogeneous_part(Bk, ex.XI, tangential, row.m1j - k) for k, Bk in row.B.items()}
        rows0.append(BoundaryRow(row.m1j, 0.0, B0))
    dirs = sphere_directions(n - 1, n_dirs, seed)
    worst = math.inf
    witness = None
    dets = []
    x_points = np.atleast_2d(np.asarray(x_points, dtype=float))
    for xp in x_points:
        for d in dirs:
            c = np.zeros(problem.m1 + 1, dtype=complex)
            for j, pj in parts.items():
                c[j] = complex(ex.evaluate(pj, list(xp) + [0.0], list(d) + [0.0]))
            try:
                roots = companion_roots(c)
            except LeadingCoeffVanishes:
                return LSReport({"x_points": len(x_points)}, dets, 0.0, C_min, False,
                                {"x_prime": xp.tolist(), "xi_prime": d.tolist(), "error": "LeadingCoeffVanishes"})
            if np.any(np.abs(roots.imag) < REAL_BAND) or np.sum(roots.imag > 0) != problem.r:
                return LSReport({"x_points": len(x_points)}, dets, 0.0, C_min, False,
                                {"x_prime": xp.tolist(), "xi_prime": d.tolist(), "error": "RealRootDetected"})
            aplus = monic_from_roots(roots[roots.imag > 0])
            M = np.zeros((problem.r, problem.r), dtype=complex)
            for j, row in enumerate(rows0):
                b = np.zeros(row.m1j + 1, dtype=complex)
                for k, Bk in row.B.items():
                    b[k] = complex(_boundary_eval(Bk, xp[None, :], d[None, :], n)[0])
                M[j] = poly_mod(b, aplus)
            det = float(abs(np.linalg.det(M)))
            dets.append(det)
            if det < worst:
                worst = det
                witness = {"x_prime": xp.tolist(), "xi_prime": d.tolist(), "det": det}
    return LSReport({"x_points": len(x_points), "directions": int(len(dirs))}, dets, worst, C_min,
                    bool(worst >= C_min), witness)
