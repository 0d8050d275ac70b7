"""Tests for stochastic liquidation paths and bankruptcy probabilities."""

import math

import numpy as np
import pytest

from impactval.impact import ImpactParams
from impactval.montecarlo import (
    BankruptcyMode,
    LiquidationSchedule,
    MonteCarloConfig,
    bankruptcy_probability,
    fit_transition,
    simulate_price_path,
    transition_csv_rows,
    transition_curve,
    trial_rng,
)
from impactval.valuation import Position, liquidation_value_discrete


def make_config(lambda0, calI, n_days, *, sigma=0.02, V=1e6, p0=1.0, **kwargs):
    """Config with given leverage and total impact, liquidated over n_days."""
    Q = V * (calI / sigma) ** 2
    pos = Position(Q=Q, p0=p0, L=Q * p0 * (1.0 - 1.0 / lambda0))
    return MonteCarloConfig(
        position=pos,
        params=ImpactParams(Y=1.0, sigma=sigma, V=V),
        schedule=LiquidationSchedule(Q=Q, delta_q=Q / n_days, V=V),
        master_seed=kwargs.pop("master_seed", 99),
        n_trials=kwargs.pop("n_trials", 100),
        **kwargs,
    )


def test_schedule_identities():
    sched = LiquidationSchedule(Q=1e6, delta_q=2e4, V=4e5)
    assert sched.T == 50.0
    assert sched.eta == pytest.approx(0.05)
    assert sched.eta == pytest.approx(sched.Q / (sched.V * sched.T), rel=1e-15)


def test_schedule_from_participation():
    sched = LiquidationSchedule.from_participation(Q=1e6, V=4e5, eta=0.05)
    assert sched.delta_q == pytest.approx(2e4)
    assert sched.T == pytest.approx(50.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        LiquidationSchedule(Q=0.0, delta_q=1.0, V=1.0)
    with pytest.raises(ValueError):
        LiquidationSchedule(Q=1.0, delta_q=0.0, V=1.0)
    with pytest.raises(ValueError):
        LiquidationSchedule(Q=1.0, delta_q=1.0, V=0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        make_config(9.0, 0.15, 10, n_trials=0)


def test_fractional_day_schedule_rejected():
    config = make_config(9.0, 0.15, 10)
    bad = MonteCarloConfig(
        position=config.position,
        params=config.params,
        schedule=LiquidationSchedule(Q=config.schedule.Q, delta_q=config.schedule.Q / 10.5, V=1e6),
        n_trials=1,
        master_seed=0,
    )
    with pytest.raises(ValueError):
        simulate_price_path(bad, 0)


def test_zero_noise_final_price_exact():
    config = make_config(9.0, 0.15, 25, noise_sigma=0.0)
    path = simulate_price_path(config, 0)
    assert path.prices[0] == 1.0
    assert path.prices[-1] == pytest.approx(1.0 - 0.15, rel=1e-14)
    assert path.negative_steps == 0


def test_zero_noise_proceeds_match_discrete_valuation():
    config = make_config(9.0, 0.15, 40, noise_sigma=0.0)
    path = simulate_price_path(config, 0)
    oracle = liquidation_value_discrete(config.position, config.params, 40)
    assert path.total_proceeds == pytest.approx(oracle, rel=1e-12)


def test_no_impact_no_noise_constant_price():
    V = 1e6
    Q = 2e5
    pos = Position(Q=Q, p0=1.0, L=Q * (1.0 - 1.0 / 9.0))
    config = MonteCarloConfig(
        position=pos,
        params=ImpactParams(Y=0.0, sigma=0.02, V=V),
        schedule=LiquidationSchedule(Q=Q, delta_q=Q / 20, V=V),
        n_trials=10,
        master_seed=7,
        noise_sigma=0.0,
    )
    path = simulate_price_path(config, 0)
    assert np.all(path.prices == 1.0)
    assert bankruptcy_probability(config).p_bankrupt == 0.0


def test_paths_bit_identical_per_seed_and_index():
    config = make_config(9.0, 0.15, 30, master_seed=123)
    a = simulate_price_path(config, 5)
    b = simulate_price_path(config, 5)
    assert np.array_equal(a.prices, b.prices)
    c = simulate_price_path(config, 6)
    assert not np.array_equal(a.prices, c.prices)


def test_trial_streams_are_order_insensitive():
    draws = {i: trial_rng(42, i).standard_normal(4) for i in (3, 0, 7)}
    again = {i: trial_rng(42, i).standard_normal(4) for i in (7, 3, 0)}
    for i, values in draws.items():
        assert np.array_equal(values, again[i])


def test_bankruptcy_probability_reproducible():
    config = make_config(9.0, 0.17, 20, n_trials=500, master_seed=2024)
    first = bankruptcy_probability(config)
    second = bankruptcy_probability(config)
    assert first == second
    assert first.std_error == pytest.approx(
        math.sqrt(first.p_bankrupt * (1 - first.p_bankrupt) / 500)
    )


def test_deterministic_step_at_critical_impact():
    # Noise off: bankruptcy flips from 0 to 1 across calI = 3/(2*lambda0).
    below = make_config(9.0, 0.15, 100, noise_sigma=0.0, n_trials=1)
    above = make_config(9.0, 0.18, 100, noise_sigma=0.0, n_trials=1)
    assert bankruptcy_probability(below).p_bankrupt == 0.0
    assert bankruptcy_probability(above).p_bankrupt == 1.0


def test_half_probability_at_transition_center():
    # At calI = I_c the expected proceeds equal the debt, so noise makes
    # bankruptcy a near coin flip (discreteness biases it slightly up).
    n_days = 28
    eta = 10.0
    cal_i = 1.0 / 6.0
    sigma = cal_i / math.sqrt(n_days * eta)
    config = make_config(
        9.0, cal_i, n_days, sigma=sigma, n_trials=10_000, master_seed=5150
    )
    assert config.schedule.eta == pytest.approx(eta, rel=1e-12)
    result = bankruptcy_probability(config)
    assert result.p_bankrupt == pytest.approx(0.5, abs=0.05)


def test_anywhere_on_path_at_least_at_end():
    for cal_i in (0.12, 0.15, 0.1667):
        at_end = bankruptcy_probability(
            make_config(9.0, cal_i, 25, n_trials=400, master_seed=88)
        )
        anywhere = bankruptcy_probability(
            make_config(
                9.0, cal_i, 25, n_trials=400, master_seed=88,
                bankruptcy_mode=BankruptcyMode.ANYWHERE_ON_PATH,
            )
        )
        assert anywhere.p_bankrupt >= at_end.p_bankrupt


def test_negative_price_warning():
    config = make_config(9.0, 0.15, 50, noise_sigma=0.5, n_trials=50, master_seed=3)
    with pytest.warns(UserWarning, match="negative"):
        bankruptcy_probability(config)


def test_transition_curve_zero_point_and_monotonicity():
    grid = [0.0, 0.08, 0.12, 0.15, 0.1667, 0.19, 0.22, 0.26]
    points = transition_curve(9.0, 10.0, grid, n_trials=2000, master_seed=7, sigma=0.01)
    assert points[0].p_bankrupt == 0.0
    probs = [pt.p_bankrupt for pt in points]
    errs = [pt.std_error for pt in points]
    for i in range(1, len(probs)):
        assert probs[i] >= probs[i - 1] - 3.0 * (errs[i] + errs[i - 1]) - 1e-12
    # No-impact companion stays near zero at this noise level.
    assert max(pt.p_bankrupt_noimpact for pt in points) < 0.01


def test_transition_curve_marks_infeasible_points():
    # calI = 0.02 with sigma = 0.02 gives Q = V, i.e. a tenth of a day at eta = 10.
    points = transition_curve(9.0, 10.0, [0.02, 0.2], n_trials=50, master_seed=1)
    assert not points[0].feasible
    assert math.isnan(points[0].p_bankrupt)
    assert points[1].feasible


def test_transition_curve_deterministic_given_seed():
    grid = [0.1, 0.1667, 0.24]
    a = transition_curve(9.0, 10.0, grid, n_trials=300, master_seed=11)
    b = transition_curve(9.0, 10.0, grid, n_trials=300, master_seed=11)
    assert a == b


def test_transition_curve_single_trial_reproducible():
    points = transition_curve(9.0, 1.0, [0.15], n_trials=1, master_seed=4)
    again = transition_curve(9.0, 1.0, [0.15], n_trials=1, master_seed=4)
    assert points == again
    assert points[0].p_bankrupt in (0.0, 1.0)


def test_transition_curve_validation():
    with pytest.raises(ValueError):
        transition_curve(9.0, 10.0, [], n_trials=10, master_seed=0)
    with pytest.raises(ValueError):
        transition_curve(1.0, 10.0, [0.1], n_trials=10, master_seed=0)
    with pytest.raises(ValueError):
        transition_curve(9.0, 10.0, [-0.1], n_trials=10, master_seed=0)


def test_fit_transition_recovers_synthetic_probit():
    from scipy.special import erf as _erf

    slope, center = 20.0, 0.16
    xs = np.linspace(0.05, 0.3, 15)
    ps = 0.5 * (1.0 + _erf(slope * (xs - center) / math.sqrt(2.0)))
    fitted = fit_transition(xs, ps)
    assert fitted.center == pytest.approx(center, abs=1e-8)
    assert fitted.slope == pytest.approx(slope, rel=1e-6)
    assert fitted.width == pytest.approx(2.5631031310892007 / slope, rel=1e-6)


def test_fit_transition_skips_nan_points():
    xs = np.array([0.05, 0.1, 0.15, 0.2, 0.25])
    ps = np.array([np.nan, 0.02, 0.5, 0.98, 1.0])
    fitted = fit_transition(xs, ps)
    assert 0.1 < fitted.center < 0.2


def test_fit_transition_needs_three_points():
    with pytest.raises(ValueError):
        fit_transition(np.array([0.1, 0.2]), np.array([0.0, 1.0]))


def test_transition_csv_rows():
    points = transition_curve(9.0, 10.0, [0.0, 0.2], n_trials=20, master_seed=2)
    rows = transition_csv_rows(points)
    assert rows[0] == ["calI", "p_bankrupt", "std_error", "p_bankrupt_noimpact"]
    assert len(rows) == 3
    assert float(rows[1][0]) == 0.0
