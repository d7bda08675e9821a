import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgcalc import expr as ex
from sgcalc.errors import AllZeroWindow, IllConditionedFit, JetGrowthViolation
from sgcalc.extension import (BoundaryJet, ExtensionParams, a_derivatives, b_derivatives, decay_fit,
                              dzanasija_a, dzanasija_b, empirical_T, extend_half_space, glued, hat_series,
                              jet_match_errors, seminorm_fit)
from sgcalc.gridfunc import GridFunction

P = ExtensionParams(mu=2.0, D=1.0, K=8)
EXP = ex.func("exp", ex.mul(-1, ex.x(1)))


def test_params_rules():
    assert P.r_exp == pytest.approx(0.55)
    assert [P.sigma(k) for k in (1, 2, 4)] == pytest.approx([1.0, 0.5, 0.25])
    q = ExtensionParams(mu=2.0, B=1.0)
    assert q.D == pytest.approx(2 * math.exp(q.a + 1))
    assert q.tail_bound() == 2.0 ** -12
    for bad in ({"mu": 1.0}, {"D": 0.5}, {"B": 1.0, "D": 2.0}, {"r_exp": 0.1}, {"K": 0}):
        with pytest.raises(ValueError):
            ExtensionParams(**bad)


def test_b_support_and_positivity():
    # sigma_4 = 1/4, so -0.3 is outside the support
    assert dzanasija_b(4, -0.3, P) == 0.0
    for k in range(1, 9):
        s = P.sigma(k)
        assert dzanasija_b(k, -s / 2, P) > 0
        assert dzanasija_b(k, 0.0, P) == 0.0 and dzanasija_b(k, -s, P) == 0.0
    with pytest.raises(ValueError):
        dzanasija_b(0, -0.1, P)
    assert np.all(np.diff([P.sigma(k) for k in range(1, 20)]) < 0)


def test_a_cutoffs():
    for k in range(0, 6):
        assert dzanasija_a(k, 0.0, P) == pytest.approx(1.0)
        assert dzanasija_a(k, -2.0, P) == 0.0
    t = np.linspace(-1.2, 0, 57)
    assert np.array_equal(dzanasija_a(0, t, P), dzanasija_a(1, t, P))
    vals = dzanasija_a(3, t, P)
    assert np.all(np.diff(vals) >= -1e-14)


def test_cutoff_derivatives_match_differences():
    t = np.linspace(-0.95, -0.05, 13)
    h = 1e-5
    for k in (1, 2, 3):
        bd = b_derivatives(k, t, P, 2)
        ad = a_derivatives(k, t, P, 2)
        fd_b = (dzanasija_b(k, t + h, P) - dzanasija_b(k, t - h, P)) / (2 * h)
        fd_a = (dzanasija_a(k, t + h, P) - dzanasija_a(k, t - h, P)) / (2 * h)
        assert bd[1] == pytest.approx(fd_b, abs=1e-6)
        assert ad[1] == pytest.approx(fd_a, abs=1e-6)
        assert ad[0] == pytest.approx(dzanasija_a(k, t, P), abs=1e-14)


def test_extension_exp_jet():
    jet = BoundaryJet.from_expr(EXP, 8, B=1.0)
    p = ExtensionParams(mu=2.0, K=8, B=1.0)
    assert extend_half_space(jet, p, 0.0) == pytest.approx(1.0)
    assert extend_half_space(jet, p, -2.0) == 0.0
    d = 1e-6
    v = extend_half_space(jet, p, np.array([-2 * d, -d, 0.0]))
    fd = (3 * v[2] - 4 * v[1] + v[0]) / (2 * d)
    assert abs(fd - (-1.0)) < 1e-6
    assert max(jet_match_errors(jet, p)) < 1e-10
    g = glued(jet, p, lambda x: np.exp(-x), np.linspace(-1.5, 3, 91))
    assert g.values[-1] == pytest.approx(math.exp(-3))
    assert extend_half_space(jet, p, np.linspace(-1, 0, 5), as_grid=True).ndim == 1
    with pytest.raises(ValueError):
        extend_half_space(jet, p, 0.5)


def test_exact_derivatives_match_fd():
    jet = BoundaryJet.from_expr(ex.func("cos", ex.x(1)), 8)
    t = np.linspace(-0.9, -0.1, 9)
    d = extend_half_space(jet, P, t, derivatives=2)
    h = 1e-5
    fd = (extend_half_space(jet, P, t + h) - extend_half_space(jet, P, t - h)) / (2 * h)
    assert np.max(np.abs(d[1] - fd)) < 1e-5


def test_jet_growth_violation():
    jet = BoundaryJet(np.array([1.0, 10.0, 0.0]), B=1.0)
    with pytest.raises(JetGrowthViolation):
        extend_half_space(jet, P, -0.5)
    assert extend_half_space(jet, P, -0.5, check=False) is not None


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-3, 3), min_size=4, max_size=4),
       st.floats(-2, 2))
def test_extension_linear_in_jet(f, g, c):
    t = np.linspace(-1.1, 0, 23)
    a, b = np.array(f), np.array(g)
    lhs = extend_half_space(BoundaryJet(a + c * b), P, t)
    rhs = extend_half_space(BoundaryJet(a), P, t) + c * extend_half_space(BoundaryJet(b), P, t)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_hat_series_and_T():
    jet = BoundaryJet.from_expr(EXP, 6)
    w = hat_series(jet, ExtensionParams(mu=2.0, K=6))
    assert np.isfinite(w(0.5, 2)).all()
    T = empirical_T(P)
    assert np.isfinite(T) and T > 0


def test_seminorm_fit_gaussian():
    x = np.linspace(-20, 20, 1024, endpoint=False)
    fit = seminorm_fit(GridFunction([x], np.exp(-x * x / 2)), 8, 8)
    # the Gaussian has x-decay of Gevrey order 1/2
    assert fit.nu_est == pytest.approx(0.5, abs=0.15)
    assert fit.D_est == max(fit.D_x, fit.D_xi)


def test_seminorm_fit_extension_order():
    p = ExtensionParams(mu=2.0, K=12, B=1.0)
    jet = BoundaryJet.from_expr(EXP, 12, B=1.0)
    ts = -np.linspace(0.0, 1.2 * p.sigma(1), 20001)
    fit = seminorm_fit((ts, extend_half_space(jet, p, ts, derivatives=8)), 8, 8)
    assert fit.mu_est <= 2.5


def test_seminorm_fit_degenerate():
    x = np.linspace(-5, 5, 256, endpoint=False)
    zero = seminorm_fit(GridFunction([x], np.zeros_like(x)), 4, 4)
    assert zero.C_est == 0
    with pytest.raises(IllConditionedFit):
        seminorm_fit(GridFunction([x], np.exp(-x * x)), 4, 2)


def test_decay_fit():
    x = np.linspace(0, 12, 1201)
    assert decay_fit((x, np.exp(-x)), (2, 8)).epsilon == pytest.approx(1.0, abs=1e-10)
    gauss = decay_fit((x, np.exp(-x * x)), (2, 8), p=2.0)
    assert gauss.epsilon == pytest.approx(1.0, abs=1e-10) and gauss.exponential
    alg = decay_fit((x, 1 / (1 + x * x)), (2, 10))
    assert not alg.exponential and alg.residual > 0.1
    with pytest.raises(AllZeroWindow):
        decay_fit((x, np.zeros_like(x)), (2, 8))
    with pytest.raises(ValueError):
        decay_fit((x, np.exp(-x)), (20, 30))
