import numpy as np
import pytest

from cdxlevy.calibration import swaption_tenor
from cdxlevy.montecarlo import (
    common_uniforms,
    model_implied_statistic,
    price_cdxo_mc,
    price_cdxo_strip,
    price_forward_mc,
    sample_defaults,
    simulate_inverse,
    simulate_paths,
    spread_at_inception,
)
from cdxlevy.ou import conditional_moments
from cdxlevy.pricing import (
    cdx_spread,
    cdxo_terminal_payoff,
    forward_cdx_value,
    survival_discount,
    zcb_price,
)

from conftest import mean_se, within_sigma


@pytest.fixture(scope="module")
def year_paths(params_with_intensity):
    return simulate_paths(params_with_intensity, 1.0, 252, 40_000, np.random.default_rng(5))


def test_paths_shape_and_sign(year_paths):
    assert year_paths.r.shape == (40_000, 253)
    assert np.all(year_paths.r >= 0) and np.all(year_paths.lam >= 0)
    assert np.all(np.diff(year_paths.int_lambda, axis=1) >= 0)


def test_terminal_moments(year_paths, params_with_intensity):
    m = conditional_moments(1.0, params_with_intensity)
    for key, arr in (("r", year_paths.r[:, -1]), ("lambda", year_paths.lam[:, -1])):
        mu, se = mean_se(arr)
        assert within_sigma(mu, se, m[f"mean_{key}"])
        v, se_v = mean_se((arr - m[f"mean_{key}"]) ** 2)
        assert within_sigma(v, se_v, m[f"var_{key}"])


def test_zcb_and_survival_by_simulation(year_paths, params_with_intensity):
    p = params_with_intensity
    mu, se = mean_se(year_paths.discount())
    assert within_sigma(mu, se, float(zcb_price(0.0, 1.0, p.r0, p)))
    mu, se = mean_se(np.exp(-year_paths.int_r[:, -1] - year_paths.int_lambda[:, -1]))
    assert within_sigma(mu, se, float(survival_discount(0.0, 1.0, p.r0, p.lambda0, p)))


def test_dellacherie_identities(year_paths, params_with_intensity):
    """P(tau > t | path) = exp(-Lambda_t); discounted survival matches the affine formula."""
    rng = np.random.default_rng(9)
    n = 2000
    alive = np.empty(n)
    disc_alive = np.empty(n)
    for j in range(n):
        d = sample_defaults(year_paths.times, year_paths.int_lambda[j], 1, rng)
        alive[j] = float(d.default_times[0] > 1.0)
        disc_alive[j] = alive[j] * year_paths.discount()[j]
    target = np.exp(-year_paths.int_lambda[:n, -1])
    mu, se = mean_se(alive - target)
    assert within_sigma(mu, se, 0.0)
    mu, se = mean_se(disc_alive)
    p = params_with_intensity
    assert within_sigma(mu, se, float(survival_discount(0.0, 1.0, p.r0, p.lambda0, p)))


def test_default_time_distribution_on_fixed_path():
    # Lambda_t = 2t: default times are exponential with rate 2, capped at the horizon
    times = np.linspace(0.0, 1.0, 101)
    d = sample_defaults(times, 2 * times, 100_000, np.random.default_rng(3))
    hit = np.isfinite(d.default_times)
    assert hit.mean() == pytest.approx(1 - np.exp(-2.0), abs=5 * np.sqrt(0.13 / 1e5))
    assert np.allclose(d.default_times[hit], d.thresholds[hit] / 2, atol=1e-12)


def test_forward_value_by_simulation(params):
    ten = swaption_tenor(0.13).with_strike(50e-4)
    est = price_forward_mc(params, ten, 100_000, np.random.default_rng(1))
    assert within_sigma(est.price, est.std_error,
                        float(forward_cdx_value(0.0, params.r0, params.lambda0, ten, params)))


def test_annuity_measure_expectation_of_spread_is_forward_spread(term13):
    p, ten = term13
    est = model_implied_statistic(p, ten, lambda c: c, 50_000, np.random.default_rng(2))
    assert within_sigma(est.price, est.std_error, float(cdx_spread(0.0, p.r0, p.lambda0, ten, p)))
    one = model_implied_statistic(p, ten, np.ones_like, 1000, np.random.default_rng(2))
    assert one.price == pytest.approx(1.0, abs=1e-14)


def test_strip_matches_single_option_pricer(params):
    ten = swaption_tenor(15 / 252)
    from cdxlevy.montecarlo import simulate_to_inception

    paths = simulate_to_inception(params, ten, 5000, np.random.default_rng(4))
    strikes = np.array([50e-4, 60e-4, 70e-4])
    strip = price_cdxo_strip(params, ten, strikes, ["receiver", "payer", "payer"], paths)
    for k, side, v in zip(strikes, ["receiver", "payer", "payer"], strip):
        direct = np.mean(paths.discount() * cdxo_terminal_payoff(
            paths.r[:, -1], paths.lam[:, -1], ten.with_strike(k), params, side))
        assert v == pytest.approx(direct, rel=1e-12)
    same = price_cdxo_mc(params, ten.with_strike(60e-4), "receiver", 5000, np.random.default_rng(4))
    assert same.price == pytest.approx(
        price_cdxo_strip(params, ten, [60e-4], ["receiver"], paths)[0], rel=1e-12)


def test_inverse_sampler_distribution(params_with_intensity):
    p = params_with_intensity
    u = common_uniforms(100_000, 50, np.random.default_rng(8))
    paths = simulate_inverse(p, 1.0, u)
    m = conditional_moments(1.0, p)
    mu, se = mean_se(paths.r[:, -1])
    assert within_sigma(mu, se, m["mean_r"])
    mu, se = mean_se(paths.lam[:, -1])
    assert within_sigma(mu, se, m["mean_lambda"])
    mu, se = mean_se(paths.discount())
    assert within_sigma(mu, se, float(zcb_price(0.0, 1.0, p.r0, p)))


def test_inverse_sampler_is_smooth_in_parameters(params):
    u = common_uniforms(2000, 10, np.random.default_rng(0))
    ten = swaption_tenor(0.13)
    spreads = []
    for rho in (0.15, 0.15 + 1e-6, 0.15 + 2e-6):
        spreads.append(spread_at_inception(params.replace(rho=rho), ten,
                                           simulate_inverse(params.replace(rho=rho), 0.13, u)))
    d1, d2 = spreads[1] - spreads[0], spreads[2] - spreads[1]
    assert np.all(d1 > 0)
    assert np.allclose(d1, d2, rtol=1e-3)


def test_invalid_inputs(params):
    with pytest.raises(ValueError):
        simulate_paths(params, 1.0, 0, 10, np.random.default_rng(0))
    ten = swaption_tenor(0.1)
    paths = simulate_paths(params, 0.1, 2, 10, np.random.default_rng(0), keep_paths=False)
    with pytest.raises(ValueError):
        price_cdxo_strip(params, ten, [0.005], ["call"], paths)
