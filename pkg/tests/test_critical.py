"""Fixed-point solver, rate functions, and the threshold table."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from andloc import critical

E = math.e

# raw roots from table_one at the built-in mu bounds, pinned for regression
RAW_LAMBDA_AND = {
    2: 22.768300091435126,
    3: 50.258570183693784,
    4: 81.4505167207096,
    5: 114.08429668509805,
    6: 147.90989534866813,
}
ROUNDED_LAMBDA_AND = {2: 22.8, 3: 50.3, 4: 81.5, 5: 114.1, 6: 148.0}
ROUNDED_LAMBDA_AG = {2: 100.2, 3: 167.0, 4: 238.1, 5: 312.3, 6: 389.1}


def test_solver_matches_brentq():
    # independent root finder on the same bracket
    for a in np.linspace(2.8, 40.0, 25):
        lam = critical.solve_fixed_point(a)
        ref = brentq(lambda t: t - a * math.log(t), a, a**3, xtol=1e-13)
        assert lam == pytest.approx(ref, rel=1e-10)


def test_solver_residual_certificate():
    for a in (2.75, 3.0, 7.29, 26.6, 120.0):
        lam = critical.solve_fixed_point(a)
        assert abs(lam - a * math.log(lam)) < 1e-12
        assert lam > a  # larger root sits above the coefficient


def test_solver_no_root():
    with pytest.raises(critical.NoRootError):
        critical.solve_fixed_point(E)
    with pytest.raises(critical.NoRootError):
        critical.solve_fixed_point(1.5)


def test_larger_root_selected():
    # at a = e^2/2 the two roots are well separated; the larger exceeds a ln a
    a = E**2 / 2
    lam = critical.solve_fixed_point(a)
    assert lam > a * math.log(a)


def test_report_values_pinned():
    for d, mu in critical.DEFAULT_MU_UPPER.items():
        rep = critical.criterion_report(d, mu)
        assert rep.lambda_and == pytest.approx(RAW_LAMBDA_AND[d], rel=1e-12)
        assert rep.rounded("lambda_and") == ROUNDED_LAMBDA_AND[d]
        assert rep.rounded("lambda_ag") == ROUNDED_LAMBDA_AG[d]


def test_report_residuals_small():
    rep = critical.criterion_report(3, 4.7114)
    for name, res in rep.residuals.items():
        assert res < 1e-10, name


def test_criteria_strictly_ordered():
    for d, mu in critical.DEFAULT_MU_UPPER.items():
        rep = critical.criterion_report(d, mu)
        assert (rep.lambda_and < rep.lambda_two_step
                < rep.lambda_intermediate < rep.lambda_ag)


def test_coefficients():
    # the four criteria use coefficients mu*e, sqrt(2d(2d-1))*e, 2d*e, 4d*e
    d, mu = 3, 4.7114
    rep = critical.criterion_report(d, mu)
    for lam, a in (
        (rep.lambda_and, mu * E),
        (rep.lambda_two_step, math.sqrt(2 * d * (2 * d - 1)) * E),
        (rep.lambda_intermediate, 2 * d * E),
        (rep.lambda_ag, 4 * d * E),
    ):
        assert lam == pytest.approx(a * math.log(lam), abs=1e-10)


def test_report_rejects_bad_mu():
    with pytest.raises(critical.NoRootError):
        critical.criterion_report(2, 1.0)


def test_round_up_last_digit():
    assert critical.round_up_last_digit(22.768300091435126) == 22.8
    assert critical.round_up_last_digit(81.4505167207096) == 81.5
    assert critical.round_up_last_digit(147.90989534866813) == 148.0
    # already-exact one-decimal values stay put
    assert critical.round_up_last_digit(22.8) == 22.8
    assert critical.round_up_last_digit(100.2) == 100.2
    assert critical.round_up_last_digit(1.23456, decimals=3) == 1.235


def test_gamma_fn():
    assert critical.gamma_fn(E) == pytest.approx(1.0, abs=1e-15)
    assert critical.gamma_fn(30.0) == pytest.approx(E * math.log(30.0) / 30.0,
                                                    rel=1e-15)
    # strictly decreasing past e
    vals = [critical.gamma_fn(x) for x in (3.0, 5.0, 10.0, 100.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        critical.gamma_fn(2.0)


def test_gamma_fn_fixed_point_is_inverse_mu():
    # at lambda solving lambda = mu e ln(lambda), gamma(lambda) = 1/mu
    mu = 4.7114
    lam = critical.solve_fixed_point(mu * E)
    assert critical.gamma_fn(lam) == pytest.approx(1.0 / mu, rel=1e-12)


def test_gamma_big_and_zero():
    lam, s, d = 30.0, 0.5, 3
    g = critical.gamma_big(s, lam)
    assert g == pytest.approx(1.0 / ((1 - s) * lam**s), rel=1e-15)
    assert critical.gamma_zero(s, lam, d) == pytest.approx(2 * d * g, rel=1e-15)


def test_s_crit_minimizes_gamma_big():
    rng = np.random.default_rng(7)
    s_grid = np.linspace(1e-6, 1 - 1e-6, 200_001)
    for lam in np.exp(rng.uniform(np.log(E + 1e-3), np.log(1e3), 20)):
        grid_vals = 1.0 / ((1.0 - s_grid) * lam**s_grid)
        k = int(np.argmin(grid_vals))
        s_star = critical.s_crit(lam)
        gm = critical.gamma_min(lam)
        assert s_star == pytest.approx(1.0 - 1.0 / math.log(lam), rel=1e-14)
        assert abs(s_star - s_grid[k]) < 2e-5  # grid resolution
        assert gm.s_crit == s_star
        assert gm.value <= grid_vals[k] + 1e-12
        assert gm.value == pytest.approx(grid_vals[k], abs=1e-8)
        # the minimum equals gamma(lambda)
        assert gm.value == pytest.approx(critical.gamma_fn(lam), rel=1e-12)


def test_gamma_min_below_e():
    gm = critical.gamma_min(2.0)
    assert gm.monotone_increasing
    assert gm.s_crit == 0.0
    assert gm.value == 1.0
    # and the map really is increasing on (0, 1) there
    vals = [critical.gamma_big(s, 2.0) for s in (0.1, 0.3, 0.6, 0.9)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_mass_zero_at_fixed_point():
    mu = 2.68
    lam_star = critical.solve_fixed_point(mu * E)
    m = critical.mass(lam_star, mu, 0.0)
    assert m.value == pytest.approx(0.0, abs=1e-12)
    above = critical.mass(lam_star * 1.05, mu, 0.0)
    below = critical.mass(lam_star * 0.95, mu, 0.0)
    assert above.positive and above.value > 0
    assert not below.positive and below.value < 0


def test_mass_epsilon_monotone():
    m0 = critical.mass(30.0, 2.68, 0.0)
    m1 = critical.mass(30.0, 2.68, 0.01)
    m2 = critical.mass(30.0, 2.68, 0.1)
    assert m0.value > m1.value > m2.value


def test_gamma_doubling_identity():
    # gamma(lambda^2) = 2 gamma(lambda) / lambda
    for lam in (3.0, 10.0, 30.0):
        assert critical.gamma_fn(lam**2) == pytest.approx(
            2.0 * critical.gamma_fn(lam) / lam, rel=1e-14)


def test_rate_params_bundle():
    rp = critical.rate_params(30.0)
    assert rp.lam == 30.0
    assert rp.gamma == critical.gamma_fn(30.0)
    assert rp.s_crit == critical.s_crit(30.0)
    # Gamma at s_crit equals gamma(lambda)
    assert critical.gamma_big(rp.s_crit, 30.0) == pytest.approx(rp.gamma,
                                                                rel=1e-12)
    m = rp.mass(2.68, 0.01)
    assert m.value == critical.mass(30.0, 2.68, 0.01).value


def test_table_csv_layout():
    reports = critical.table_one()
    text = critical.table_to_csv(reports)
    lines = text.strip().split("\n")
    assert lines[0] == "quantity,2,3,4,5,6"
    names = [ln.split(",")[0] for ln in lines[1:]]
    assert names == ["mu_upper", "lambda_and", "lambda_two_step",
                     "lambda_intermediate", "lambda_ag"]
    and_row = lines[2].split(",")[1:]
    assert [float(v) for v in and_row] == [ROUNDED_LAMBDA_AND[d]
                                           for d in (2, 3, 4, 5, 6)]


def test_report_json_dict():
    rep = critical.criterion_report(2, 2.68)
    doc = rep.to_json_dict()
    assert doc["dimension"] == 2
    assert doc["mu_upper"] == 2.68
    assert doc["lambda_and_rounded"] == 22.8
    assert set(doc["residuals"]) == {"lambda_and", "lambda_two_step",
                                     "lambda_intermediate", "lambda_ag"}
