import math

import numpy as np
import pytest
from scipy import integrate

from sgcalc import expr as ex
from sgcalc.boundary import (assemble_Ptilde, assemble_system, assumption_a_profile, boundary_symbol,
                             boundary_symbol_table, bridged, closed_semicircle, clipped, left_elliptic_check,
                             poisson_apply, poisson_profile, semicircle, transmission_apply)
from sgcalc.calculus import DiffSymbol, parametrix
from sgcalc.ellipticity import BoundaryRow, BVProblem, boundary_grid, dirichlet_rows
from sgcalc.errors import DegreeTooHigh, RealPoleOnPath
from sgcalc.extension import BoundaryJet
from sgcalc.gridfunc import GridFunction
from sgcalc.rational import rational_at, upper_residue_sum
from sgcalc.seminorm import SGOrder

LAPLACE = DiffSymbol({(0, 0): 1, (2, 0): 1, (0, 2): 1}, 2, SGOrder(2, 0))
QUAD = ex.add(ex.power(ex.xi(2), 2), ex.power(ex.bracket(ex.XI, 1), 2))


def test_contour_closed_semicircle_residue_theorem():
    f = lambda z: 1 / (z * z + 1)
    assert closed_semicircle(2.0, [0.0]).integrate(f) == pytest.approx(math.pi, abs=1e-10)
    # an arc with no interior singularities of an entire function: closed integral vanishes
    assert closed_semicircle(3.0, [1.0]).integrate(lambda z: z ** 2) == pytest.approx(0, abs=1e-10)
    assert semicircle(1.0, [0.0]).params["rho"] == 1.0


def test_bridged_path_identity():
    f = lambda z: 1 / (z * z + 1) ** 2
    for M, theta in [(3, 1.0), (8, 0.5)]:
        path = bridged(2.0, [0.0], M, theta)
        far = 2.0 * M ** theta
        tail = 2 * integrate.quad(lambda t: f(t), far, np.inf, epsabs=1e-14)[0]
        assert path.integrate(f) == pytest.approx(tail, abs=1e-10)
    c = clipped(1.0, [2.0], 4, 1.0)
    assert c.params["far"] == pytest.approx(math.sqrt(16 - 5))


def test_boundary_symbol_values():
    xip = np.array([[0.0], [3.0], [-7.5]])
    xp = np.zeros_like(xip)
    w = np.sqrt(1 + xip[:, 0] ** 2)
    inv2 = ex.power(QUAD, -2)
    for method in ("residue", "quadrature"):
        # double pole: (1/2pi) int (t^2 + w^2)^{-2} dt = 1/(4 w^3)
        assert boundary_symbol(inv2, 0, 0, 2, xp, xip, method) == pytest.approx(1 / (4 * w ** 3), abs=1e-10)
        # xi_n # 1/q: limit of (1/2pi) int e^{ixt} t/(t^2+w^2) dt = i/2
        assert boundary_symbol(ex.power(QUAD, -1), 1, 0, 2, xp, xip, method) == pytest.approx(0.5j + 0 * w)
        # t/(t^2+w^2) times t^0, k=0 j=1: same value
        assert boundary_symbol(ex.power(QUAD, -1), 0, 1, 2, xp, xip, method) == pytest.approx(0.5j + 0 * w)


def test_boundary_symbol_errors():
    with pytest.raises(DegreeTooHigh):
        boundary_symbol(ex.ONE, 0, 0, 1, np.zeros((1, 0)), np.zeros((1, 0)))
    assert boundary_symbol(ex.ONE, 0, 0, 1, (), (), allow_polynomial_part=True)[0] == 0
    real = ex.power(ex.sub(ex.power(ex.xi(1), 2), 4), -1)
    with pytest.raises(RealPoleOnPath):
        upper_residue_sum(rational_at(real, 1))
    with pytest.raises(RealPoleOnPath):
        boundary_symbol(real, 0, 0, 1, (), (), method="quadrature")


def test_symbol_table_and_ptilde():
    table = assemble_Ptilde(LAPLACE)
    assert set(table) == {(0, 1), (1, 0)}
    assert complex(ex.evaluate(table[(0, 1)], [0.0, 0.0], [1.0, 0.0])) == -1j
    xp, xip = np.zeros((2, 1)), np.array([[0.0], [2.0]])
    tab = boundary_symbol_table([ex.power(QUAD, -1)], 2, 2, xp, xip)
    w = np.sqrt(1 + xip[:, 0] ** 2)
    assert tab[(0, 0)] == pytest.approx(1 / (2 * w))
    assert tab[(1, 1)] == pytest.approx(-w / 2)


def test_dirichlet_system():
    prob = BVProblem(LAPLACE, dirichlet_rows(1, 2))
    b = parametrix(LAPLACE, 2, B=1.0)
    grid = boundary_grid(2, 1.0, 1e3, 4, 4, 0)
    system = assemble_system(prob, b, grid)
    want = np.array([[0.5, 0.5j], [-0.5j, 0.5], [1.0, 0.0]])
    assert np.allclose(system.matrices, want[None], atol=1e-12)
    rep = left_elliptic_check(system)
    assert rep.passed
    assert rep.min_singular == pytest.approx(math.sqrt(1 - 1 / math.sqrt(2)), abs=1e-12)
    assert system.Qbar.shape == (len(grid), 2, 2)
    # without boundary rows the jump system alone is rank deficient: I - Qbar is a projector
    assert left_elliptic_check(system.matrices[:, :2]).min_singular == pytest.approx(0.0, abs=1e-12)


def test_neumann_system_is_left_elliptic():
    prob = BVProblem(LAPLACE, [BoundaryRow(1, 0.0, {1: 1})])
    b = parametrix(LAPLACE, 2, B=1.0)
    rep = left_elliptic_check(assemble_system(prob, b, boundary_grid(2, 1.0, 1e3, 4, 4, 1)))
    assert rep.passed


def test_assumption_a():
    b = parametrix(LAPLACE, 2, B=1.0)
    prof = assumption_a_profile(b.terms, 2, boundary_grid(2, 1.0, 1e2, 3, 4, 0))
    assert prof.passed and prof.r == pytest.approx(1.0)
    assert prof.B > prof.r


def test_poisson_profile_and_apply():
    a = ex.power(ex.add(1, ex.power(ex.xi(1), 2), ex.power(ex.xi(2), 2)), -1)
    xn = np.linspace(0.1, 4, 9)
    for k in (0.0, 3.0):
        w = math.sqrt(1 + k * k)
        assert poisson_profile(a, 2, (k,), xn) == pytest.approx(np.exp(-w * xn) / (2 * w), abs=1e-15)
    a1 = ex.power(ex.add(1, ex.power(ex.xi(1), 2)), -1)
    out = poisson_apply(a1, 2.0, xn)
    assert out.values == pytest.approx(np.exp(-xn), abs=1e-15)
    with pytest.raises(ValueError):
        poisson_apply(a1, 1.0, np.array([0.0, 1.0]))


def test_transmission_constant_and_resolvent():
    x = np.linspace(0, 40, 4001)
    f = GridFunction([x], np.exp(-x * x))
    jet = BoundaryJet.from_expr(ex.func("exp", ex.mul(-1, ex.power(ex.x(1), 2))), 12)
    same = transmission_apply(ex.Const(2.0), f, jet)
    assert np.max(np.abs(same.values - 2 * f.values)) < 1e-10
    with pytest.raises(ValueError):
        transmission_apply(ex.mul(ex.x(1), ex.power(ex.add(1, ex.power(ex.xi(1), 2)), -1)), f, jet)
    res = transmission_apply(ex.power(ex.add(1, ex.power(ex.xi(1), 2)), -1), f, jet)
    ref = np.array([integrate.quad(lambda y, c=c: 0.5 * np.exp(-abs(c - y) - y * y), 0, 12, points=[c],
                                   epsabs=1e-14)[0] for c in x[:300:30]])
    assert np.max(np.abs(res.values[:300:30] - ref)) < 1e-9
