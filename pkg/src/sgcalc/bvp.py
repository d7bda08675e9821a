"""Model boundary value problems, direct solvers and the regularity harness.

``solve_halfline`` discretizes ``P u = f`` on ``[0, L]`` with fourth-order
finite differences, one boundary row at 0 and the clamp ``u(L) = 0``.
``solve_halfplane_ct`` handles constant-coefficient problems on the
half-plane mode by mode.  ``verify_regularity`` runs the symbolic checks and
the decay/growth surrogates and collects them in a :class:`RegularityReport`.
"""

from __future__ import annotations

import json
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import expr as ex
from .boundary import assemble_system, left_elliptic_check
from .calculus import DiffSymbol, parametrix
from .ellipticity import (BoundaryRow, BVProblem, boundary_grid, ls_check, properly_elliptic_check,
                          roots_in_normal, sg_elliptic_check)
from .errors import ProblemFormatError, SGCalcError, SingularDiscretization
from .extension import decay_fit, seminorm_fit
from .gridfunc import GridFunction
from .seminorm import SGOrder

__version__ = "0.1.0"

DEFAULT_CONFIG = {
    "seed": 0,
    # phase-space grids
    "R": 1.0,
    "R_max": 1e4,
    "n_radii": 12,
    "rays": 16,
    # thresholds
    "C_min_elliptic": 1e-6,
    "C_min_ls": 1e-4,
    "sigma_min": 1e-4,
    "decay_eps_min": 0.0,
    "decay_residual_max": 0.1,
    "seminorm_slack": 0.5,
    "clamp_tol": 1e-10,
    "gate_clamp": False,
    # parametrix used for the boundary system
    "parametrix_N": 2,
    "parametrix_B": 1.0,
    "remainder_slack": 0.2,
    # solvers
    "L": 20.0,
    "points": 4001,
    "x1_period": 8 * math.pi,
    "x1_points": 256,
    "xn_max": 10.0,
    "xn_points": 401,
    # surrogates
    "decay_window": [2.0, 8.0],
    "decay_exponent": None,  # None -> 1 / nu
    "mu": 1.0,
    "theta": None,  # None -> mu + nu - 1
    "seminorm_alpha_max": 8,
    "seminorm_beta_max": 6,
    "seminorm_x0": 0.0,
}


def threads():
    """Worker count from SGCALC_THREADS (default: min(4, cpu count))."""
    env = os.environ.get("SGCALC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


@dataclass
class ModelProblem:
    """A boundary value problem ``P u = f``, ``B^j u = g_j`` with closed-form data.

    ``f``, ``g`` and ``exact`` are Exprs in x (``g_j`` in x'); ``exact`` is
    optional and audited against the equations when the problem is loaded.
    """

    name: str
    n: int
    P: DiffSymbol
    rows: list
    f: ex.Expr = ex.ZERO
    g: list = field(default_factory=list)
    exact: ex.Expr | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ProblemFormatError("model problems live in dimension 1 or 2")
        if self.P.n != self.n:
            raise ProblemFormatError(f"P has n={self.P.n}, problem has n={self.n}")
        if len(self.g) != len(self.rows):
            raise ProblemFormatError("one boundary datum per boundary row is required")
        cfg = dict(DEFAULT_CONFIG)
        unknown = set(self.config) - set(cfg)
        if unknown:
            raise ProblemFormatError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(self.config)
        self.config = cfg

    @property
    def bvp(self):
        return BVProblem(self.P, self.rows, self.name)

    @property
    def x_independent(self):
        return all((ex.X, i) not in ex.free_vars(c) for c in self.P.coeffs.values() for i in range(1, self.n + 1))

    @property
    def theta(self):
        if self.config["theta"] is not None:
            return float(self.config["theta"])
        return float(self.config["mu"]) + float(self.P.nu) - 1.0

    @property
    def decay_exponent(self):
        p = self.config["decay_exponent"]
        return float(p) if p is not None else 1.0 / float(self.P.nu)


def apply_operator(P, u):
    """``P(x, D) u = sum c_alpha(x) D^alpha u`` as an Expr (exact differentiation)."""
    out = ex.ZERO
    for alpha, c in P.coeffs.items():
        d = ex.derivative(u, (), alpha)
        out = ex.add(out, ex.mul(c, ex.Const((-1j) ** sum(alpha)), d))
    return out


def apply_row(row, u, n):
    """Boundary row applied to an Expr, restricted to x_n = 0."""
    out = ex.ZERO
    for k, b in row.B.items():
        d = ex.derivative(u, (), tuple([0] * (n - 1) + [k]))
        out = ex.add(out, ex.mul(b, ex.Const((-1j) ** k), d))
    return ex.subs(out, (ex.X, n), 0) if (ex.X, n) in ex.free_vars(out) else out


def audit_exact(problem, samples=50, tol=1e-8, seed=0):
    """Largest relative residual of the exact solution in the equation and boundary rows."""
    if problem.exact is None:
        return None
    rng = np.random.default_rng(seed)
    n = problem.n
    xs = [rng.uniform(-5, 5, samples) for _ in range(n - 1)] + [rng.uniform(0, 5, samples)]
    res = ex.sub(apply_operator(problem.P, problem.exact), problem.f)
    scale = max(1.0, float(np.max(np.abs(ex.evaluate(problem.f, xs, [])))))
    worst = float(np.max(np.abs(ex.evaluate(res, xs, [])))) / scale
    for row, g in zip(problem.rows, problem.g):
        bres = ex.sub(apply_row(row, problem.exact, n), g)
        xb = xs[:-1] + [np.zeros(samples)]
        worst = max(worst, float(np.max(np.abs(ex.evaluate(bres, xb, [])))))
    if worst > tol:
        raise ProblemFormatError(f"exact solution violates the problem (relative residual {worst:.2e})")
    return worst


# -- problem files -----------------------------------------------------------

def _parse_expr(text, what):
    try:
        return ex.parse(text) if isinstance(text, str) else ex.as_expr(text)
    except Exception as err:  # parse errors carry their own message
        raise ProblemFormatError(f"cannot parse {what}: {err}") from err


def _multi_index(key, n):
    try:
        alpha = tuple(int(v) for v in str(key).split(","))
    except ValueError as err:
        raise ProblemFormatError(f"bad multi-index {key!r}") from err
    if len(alpha) != n:
        raise ProblemFormatError(f"multi-index {key!r} does not have {n} entries")
    return alpha


def problem_from_dict(doc):
    """Build a :class:`ModelProblem` from the JSON layout used by the CLI."""
    try:
        n = int(doc["n"])
        pd = doc["P"]
        m1, m2 = pd["order"]
        coeffs = {_multi_index(k, n): _parse_expr(v, f"P coefficient {k}") for k, v in pd["coeffs"].items()}
        P = DiffSymbol(coeffs, n, SGOrder(m1, m2), float(pd.get("nu", 1.0)))
        rows = []
        for i, rd in enumerate(doc.get("boundary", [])):
            B = {int(k): _parse_expr(v, f"boundary row {i} coefficient {k}") for k, v in rd["B"].items()}
            rows.append(BoundaryRow(int(rd["m1"]), float(rd.get("m2", 0.0)), B))
        data = doc.get("data", {})
        f = _parse_expr(data.get("f", "0"), "f")
        g = [_parse_expr(v, f"g[{i}]") for i, v in enumerate(data.get("g", []))]
        exact = _parse_expr(data["exact"], "exact") if data.get("exact") is not None else None
        prob = ModelProblem(doc.get("name", "problem"), n, P, rows, f, g, exact, dict(doc.get("config", {})))
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, ProblemFormatError):
            raise
        raise ProblemFormatError(f"malformed problem: {err}") from err
    audit_exact(prob)
    return prob


def load_problem(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ProblemFormatError(f"{path}: {err}") from err
    return problem_from_dict(doc)


# -- half-line solver --------------------------------------------------------

# fourth-order stencils on a uniform grid (offsets relative to the point)
_D1_C = np.array([1, -8, 0, 8, -1]) / 12.0
_D2_C = np.array([-1, 16, -30, 16, -1]) / 12.0
# near-boundary: point 1 with offsets -1..4
_D1_L = np.array([-3, -10, 18, -6, 1, 0]) / 12.0
_D2_L = np.array([10, -15, -4, 14, -6, 1]) / 12.0
# one-sided first derivative at the endpoint (offsets 0..4)
_D1_0 = np.array([-25, 48, -36, 16, -3]) / 12.0


def _coefficients_1d(P):
    """``(c0, c1, c2)`` with ``P = c2 xi^2 + c1 xi + c0``."""
    if P.n != 1 or P.degree != 2:
        raise ValueError("solve_halfline needs n = 1 and normal order 2")
    return [P.coeffs.get((k,), ex.ZERO) for k in range(3)]


def solve_halfline(problem, L=None, points=None, residual_tol=1e-8):
    """Fourth-order finite-difference solution of ``P u = f`` on ``[0, L]``.

    ``P = c2 D^2 + c1 D + c0`` becomes ``-c2 u'' - i c1 u' + c0 u = f``;
    the boundary row at 0 is imposed on the first unknown and ``u(L) = 0``
    clamps the far end.
    """
    L = float(problem.config["L"] if L is None else L)
    N = int(problem.config["points"] if points is None else points) - 1
    if N < 8:
        raise ValueError("need at least 9 grid points")
    if problem.n != 1 or len(problem.rows) != 1:
        raise ValueError("solve_halfline handles n = 1 with one boundary row")
    row = problem.rows[0]
    if max(row.B, default=0) > 1:
        raise ValueError("boundary rows of order <= 1 only")
    x = np.linspace(0.0, L, N + 1)
    h = L / N
    c0, c1, c2 = (np.broadcast_to(ex.evaluate(c, [x], []), x.shape).astype(complex) for c in _coefficients_1d(problem.P))
    f = np.broadcast_to(ex.evaluate(problem.f, [x], []), x.shape).astype(complex)
    g = complex(ex.evaluate(problem.g[0], [], []))
    rows_, cols_, vals_ = [], [], []

    def put(i, j, v):
        rows_.append(i)
        cols_.append(j)
        vals_.append(v)

    # boundary row: sum_k B_k D^k u(0) = g
    for k, b in row.B.items():
        bv = complex(ex.evaluate(b, [], []))
        if k == 0:
            put(0, 0, bv)
        else:
            for s, w in enumerate(_D1_0):
                put(0, s, bv * (-1j) * w / h)
    rhs = f.copy()
    rhs[0] = g
    for i in range(1, N):
        if i == 1:
            offs, w1, w2 = range(-1, 5), _D1_L, _D2_L
        elif i == N - 1:
            offs, w1, w2 = range(1, -5, -1), -_D1_L, _D2_L
        else:
            offs, w1, w2 = range(-2, 3), _D1_C, _D2_C
        for o, a1, a2 in zip(offs, w1, w2):
            put(i, i + o, -c2[i] * a2 / h ** 2 - 1j * c1[i] * a1 / h + (c0[i] if o == 0 else 0.0))
    put(N, N, 1.0)
    rhs[N] = 0.0
    A = sparse.csr_matrix((vals_, (rows_, cols_)), shape=(N + 1, N + 1), dtype=complex)
    try:
        u = splinalg.spsolve(A.tocsc(), rhs)
    except RuntimeError as err:
        raise SingularDiscretization(str(err)) from err
    if not np.all(np.isfinite(u)):
        raise SingularDiscretization("discrete system is singular")
    resid = np.linalg.norm(A @ u - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if np.linalg.norm(rhs) > 0 and resid > residual_tol:
        raise SingularDiscretization(f"relative residual {resid:.2e} exceeds {residual_tol:.0e}")
    return GridFunction([x], u, {"op": "solve_halfline", "L": L, "points": N + 1, "residual": float(resid)})


def halfline_derivatives(problem, u, beta_max):
    """Derivatives ``u^(0..beta_max)`` of a half-line solution.

    ``u'`` comes from fourth-order differences; higher derivatives follow
    from the equation ``c2 u'' = c0 u - i c1 u' - f`` differentiated with the
    Leibniz rule, so no high-order stencils are needed.
    """
    x = u.axes[0]
    c = _coefficients_1d(problem.P)
    cd = [[np.broadcast_to(ex.evaluate(_dx(ci, m), [x], []), x.shape) for m in range(beta_max + 1)] for ci in c]
    fd = [np.broadcast_to(ex.evaluate(_dx(problem.f, m), [x], []), x.shape) for m in range(beta_max + 1)]
    d = np.zeros((beta_max + 1, len(x)), dtype=complex)
    d[0] = u.values
    d[1] = np.gradient(u.values, x, edge_order=2)
    h = u.spacing(0)
    v = u.values
    inner = slice(2, len(x) - 2)
    d[1][inner] = (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
    for k in range(beta_max - 1):
        # (c2 u'')^(k) = (c0 u - i c1 u' - f)^(k)
        r = -fd[k].astype(complex)
        for i in range(k + 1):
            w = math.comb(k, i)
            r = r + w * (cd[0][i] * d[k - i] - 1j * cd[1][i] * d[k + 1 - i])
        for i in range(1, k + 1):
            r = r - math.comb(k, i) * cd[2][i] * d[k + 2 - i]
        d[k + 2] = r / cd[2][0]
    return d


def _dx(e, m):
    for _ in range(m):
        e = ex.diff(e, ex.x(1))
    return e


# -- half-plane solver -------------------------------------------------------

def _upper_modes(P, xi1):
    """Upper roots ``tau_j(xi1)`` of ``P(xi1, tau) = 0`` (not normalized)."""
    prof = roots_in_normal(P, np.zeros(1), np.array([xi1]))
    scale = math.sqrt(1.0 + xi1 * xi1)
    return np.asarray(prof.upper) * scale


def solve_halfplane_ct(problem, x1=None, x_n=None):
    """Mode-wise solution of a constant-coefficient problem on the half-plane, f = 0.

    Each Fourier mode ``xi1`` of the boundary data is continued by
    ``sum_j c_j exp(i tau_j x_n)`` over the upper roots ``tau_j`` of
    ``P(xi1, .)``, with ``c`` fixed by the boundary rows.
    """
    cfg = problem.config
    if problem.n != 2:
        raise ValueError("solve_halfplane_ct needs n = 2")
    if not problem.x_independent:
        raise ValueError("solve_halfplane_ct needs x-independent coefficients")
    if problem.f != ex.ZERO:
        raise ValueError("solve_halfplane_ct handles the homogeneous equation (f = 0)")
    for row in problem.rows:
        for b in row.B.values():
            if any(kind == ex.X for kind, _ in ex.free_vars(b)):
                raise ValueError("boundary rows must be x'-independent")
    if x1 is None:
        Lp, M = float(cfg["x1_period"]), int(cfg["x1_points"])
        x1 = -Lp / 2 + Lp / M * np.arange(M)
    if x_n is None:
        x_n = np.linspace(0.0, float(cfg["xn_max"]), int(cfg["xn_points"]))
    x1 = np.asarray(x1, dtype=float)
    x_n = np.asarray(x_n, dtype=float)
    M = len(x1)
    step = float(x1[1] - x1[0])
    freqs = 2 * np.pi * np.fft.fftfreq(M, d=step)
    ghat = [np.fft.fft(np.broadcast_to(ex.evaluate(g, [x1], []), x1.shape).astype(complex)) for g in problem.g]
    r = problem.bvp.r
    uhat = np.zeros((M, len(x_n)), dtype=complex)
    cache = {}
    for i, k in enumerate(freqs):
        data = np.array([gh[i] for gh in ghat])
        if not np.any(data):
            continue
        if k not in cache:
            tau = _upper_modes(problem.P, k)
            if len(tau) != r:
                raise ValueError(f"expected {r} upper roots at xi1={k}, found {len(tau)}")
            Bm = np.zeros((r, r), dtype=complex)
            for j, row in enumerate(problem.rows):
                for l, b in row.B.items():
                    bv = complex(np.ravel(ex.evaluate(b, [0.0, 0.0], [k, 0.0]))[0])
                    Bm[j] += bv * tau ** l
            cache[k] = (tau, Bm)
        tau, Bm = cache[k]
        c = np.linalg.solve(Bm, data)
        uhat[i] = np.exp(1j * np.outer(x_n, tau)) @ c
    u = np.fft.ifft(uhat, axis=0)
    return GridFunction([x1, x_n], u, {"op": "solve_halfplane_ct", "modes": M})


def radial_exterior_demo(L=20.0, points=4001):
    """Demo: ``-Delta u + u = 0`` outside the unit ball in R^3, ``u = 1`` on the sphere.

    For radial u, ``v = r u`` solves ``-v'' + v = 0`` on ``r > 1``; the
    half-line solver gives v and the exact answer is ``exp(1 - r) / r``.
    """
    P = DiffSymbol({(0,): 1, (2,): 1}, 1, SGOrder(2, 0))
    prob = ModelProblem("radial-demo", 1, P, [BoundaryRow(0, 0.0, {0: 1})], ex.ZERO, [ex.ONE])
    v = solve_halfline(prob, L, points)
    s = v.axes[0]
    u = v.values / (1.0 + s)
    exact = np.exp(-s) / (1.0 + s)
    return {"label": "demo", "max_error": float(np.max(np.abs(u - exact))), "r_max": 1.0 + L}


# -- regularity report -------------------------------------------------------

@dataclass
class RegularityReport:
    problem: str
    checks: dict
    config: dict
    versions: dict

    @property
    def passes(self):
        return {name: bool(c.get("pass", False)) for name, c in self.checks.items() if c.get("gating", True)}

    @property
    def passed(self):
        return all(self.passes.values())

    def as_dict(self):
        return {"problem": self.problem, "checks": self.checks, "passes": self.passes, "pass": self.passed,
                "config": self.config, "versions": self.versions}

    def dumps(self):
        return json.dumps(_jsonable(self.as_dict()), sort_keys=True, indent=2)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(w) for k, w in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    return v


def recompute_passes(doc):
    """Pass flags re-derived from the numbers stored in a report dict."""
    out = {}
    for name, c in doc["checks"].items():
        if "error" in c:
            out[name] = False
        elif name == "sg_elliptic":
            out[name] = c["margin"] >= c["C_min"]
        elif name == "proper":
            out[name] = c["witness"] is None
        elif name == "ls":
            out[name] = c["min_det"] >= c["C_min"]
        elif name == "system":
            out[name] = c["min_singular_value"] >= c["threshold"]
        elif name == "decay":
            out[name] = c["epsilon"] > c["eps_min"] and c["residual"] <= c["residual_max"]
        elif name == "seminorm":
            out[name] = c["mu_est"] <= c["theta"] + c["slack"] and c["nu_est"] <= c["theta"] + c["slack"]
        elif name == "clamp":
            out[name] = c["relative_value"] <= c["tol"]
        else:
            out[name] = bool(c.get("pass", False))
    return {k: v for k, v in out.items() if doc["checks"][k].get("gating", True)}


def versions():
    return {"sgcalc": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def solve(problem):
    """Dispatch to the solver matching the problem's dimension."""
    if problem.n == 1:
        return solve_halfline(problem)
    return solve_halfplane_ct(problem)


def _check_elliptic(problem):
    cfg = problem.config
    rep = sg_elliptic_check(problem.P, cfg["R"], cfg["R_max"], cfg["n_radii"], cfg["rays"], cfg["seed"],
                            cfg["C_min_elliptic"])
    return rep.as_dict()


def _grid(problem):
    cfg = problem.config
    return boundary_grid(problem.n, cfg["R"], cfg["R_max"], cfg["n_radii"], cfg["rays"], cfg["seed"])


def _check_proper(problem):
    return properly_elliptic_check(problem.P, grid=_grid(problem)).as_dict()


def _check_ls(problem):
    return ls_check(problem.bvp, grid=_grid(problem), C_min=problem.config["C_min_ls"]).as_dict()


def _check_system(problem):
    cfg = problem.config
    b = parametrix(problem.P, int(cfg["parametrix_N"]), float(cfg["parametrix_B"]),
                   ellipticity_kwargs={"seed": cfg["seed"]})
    grid = boundary_grid(problem.n, cfg["R"], min(cfg["R_max"], 1e3), min(cfg["n_radii"], 6),
                         min(cfg["rays"], 8), cfg["seed"])
    return left_elliptic_check(assemble_system(problem.bvp, b, grid), cfg["sigma_min"]).as_dict()


def _decay_profile(problem, u):
    if problem.n == 1:
        return u
    # sup over x1 as a function of x_n
    prof = np.max(np.abs(u.values), axis=0)
    return GridFunction([u.axes[1]], prof.astype(complex), {"op": "sup_x1"})


def _check_decay(problem, u):
    cfg = problem.config
    fit = decay_fit(_decay_profile(problem, u), tuple(cfg["decay_window"]), problem.decay_exponent,
                    residual_threshold=cfg["decay_residual_max"])
    d = fit.as_dict()
    d.update({"eps_min": cfg["decay_eps_min"], "residual_max": cfg["decay_residual_max"]})
    d["pass"] = bool(fit.epsilon > cfg["decay_eps_min"] and fit.residual <= cfg["decay_residual_max"])
    return d


def _check_seminorm(problem, u):
    cfg = problem.config
    am, bm = int(cfg["seminorm_alpha_max"]), int(cfg["seminorm_beta_max"])
    if problem.n == 1:
        fit = seminorm_fit((u.axes[0], halfline_derivatives(problem, u, bm)), am, bm)
    else:
        j = int(np.argmin(np.abs(u.axes[1] - cfg["seminorm_x0"])))
        fit = seminorm_fit(GridFunction([u.axes[0]], u.values[:, j]), am, bm)
    d = fit.as_dict()
    theta, slack = problem.theta, cfg["seminorm_slack"]
    d.update({"theta": theta, "slack": slack})
    d["pass"] = bool(fit.mu_est <= theta + slack and fit.nu_est <= theta + slack)
    return d


def _check_clamp(problem, u):
    cfg = problem.config
    if problem.n == 1:
        x, vals = u.axes[0], np.abs(u.values)
    else:
        x, vals = u.axes[1], np.max(np.abs(u.values), axis=0)
    mid = int(np.argmin(np.abs(x - x[-1] / 2)))
    rel = float(vals[mid] / max(np.max(vals), 1e-300))
    return {"relative_value": rel, "at": float(x[mid]), "tol": cfg["clamp_tol"],
            "pass": rel <= cfg["clamp_tol"], "gating": bool(cfg["gate_clamp"])}


def _guard(fn, *args):
    try:
        return fn(*args)
    except (SGCalcError, ValueError, ZeroDivisionError, np.linalg.LinAlgError) as err:
        return {"pass": False, "error": type(err).__name__, "message": str(err)}


def verify_regularity(problem, config=None):
    """Run every check and surrogate; failures are recorded, not raised."""
    if config:
        problem = ModelProblem(problem.name, problem.n, problem.P, problem.rows, problem.f, problem.g,
                               problem.exact, {**{k: v for k, v in problem.config.items()
                                                  if v != DEFAULT_CONFIG.get(k)}, **config})
    symbolic = {"sg_elliptic": _check_elliptic, "proper": _check_proper, "ls": _check_ls,
                "system": _check_system}
    with ThreadPoolExecutor(max_workers=threads()) as pool:
        futures = {name: pool.submit(_guard, fn, problem) for name, fn in symbolic.items()}
        sol = pool.submit(_guard, lambda p: {"solution": solve(p)}, problem)
        checks = {name: fut.result() for name, fut in futures.items()}
        sres = sol.result()
    if "solution" in sres:
        u = sres["solution"]
        checks["decay"] = _guard(_check_decay, problem, u)
        checks["seminorm"] = _guard(_check_seminorm, problem, u)
        checks["clamp"] = _guard(_check_clamp, problem, u)
    else:
        checks["solve"] = sres
    report = RegularityReport(problem.name, checks, dict(sorted(problem.config.items())), versions())
    return report, (sres.get("solution") if "solution" in sres else None)
