import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdxlevy.calibration import swaption_tenor
from cdxlevy.pricing import (
    TenorStructure,
    cdx_spread,
    cdxo_terminal_payoff,
    forward_cdx_value,
    front_end_protection,
    g_leg,
    h_leg,
    implied_lambda,
    leg_values,
    survival_discount,
    zcb_price,
)

# Independent mpmath quadrature of the jump integrals (30 digits), 2-month set.
ZCB_ORACLE = {1.0: 0.98474861283250285, 5.0: 0.91950100114778777, 10.0: 0.84106897965760911}
SURVIVAL_1Y_ORACLE = 0.97632736149726494  # lambda0 = 0.01
H_LEG_ORACLE = 0.95087204110272119  # T0 = 0.13, T_l = 2.13, lambda0 = 0.01


@pytest.mark.parametrize("T", sorted(ZCB_ORACLE))
def test_zcb_oracle(params, T):
    assert float(zcb_price(0.0, T, params.r0, params)) == pytest.approx(ZCB_ORACLE[T], rel=1e-13)


def test_survival_discount_oracle(params):
    assert float(survival_discount(0.0, 1.0, params.r0, 0.01, params)) == pytest.approx(
        SURVIVAL_1Y_ORACLE, rel=1e-13)


def test_h_leg_oracle(params):
    assert float(h_leg(0.0, params.r0, 0.01, 0.13, 2.13, params)) == pytest.approx(
        H_LEG_ORACLE, rel=1e-13)


def test_leg_degenerate_identities(params):
    r, lam = params.r0, 0.02
    # no survival period: h is a bond to T0, g a bond to T_l
    assert float(h_leg(0.0, r, lam, 0.5, 0.5, params)) == pytest.approx(
        float(zcb_price(0.0, 0.5, r, params)), rel=1e-13)
    assert float(g_leg(0.0, r, lam, 0.5, 0.5, 1.0, params)) == pytest.approx(
        float(zcb_price(0.0, 1.0, r, params)), rel=1e-13)
    # at t = T0 h reduces to the survival discount
    assert float(h_leg(0.5, r, lam, 0.5, 1.5, params)) == pytest.approx(
        float(survival_discount(0.5, 1.5, r, lam, params)), rel=1e-13)


def test_leg_values_match_single_legs(params):
    ten = TenorStructure.regular(0.25, 1.0, 4)
    legs = leg_values(0.0, params.r0, 0.01, ten, params)
    for l, (start, end) in enumerate(zip(ten.starts, ten.payments)):
        assert legs.h[l] == pytest.approx(float(h_leg(0.0, params.r0, 0.01, ten.t0, end, params)))
        assert legs.g[l] == pytest.approx(
            float(g_leg(0.0, params.r0, 0.01, ten.t0, start, end, params)))


def test_g_exceeds_h(params):
    # g_l discounts one period less of default risk than h_l
    legs = leg_values(0.0, params.r0, 0.01, swaption_tenor(0.13), params)
    assert np.all(legs.g > legs.h)


def test_forward_value_zero_at_par_spread(params):
    ten = swaption_tenor(0.13)
    s = float(cdx_spread(0.0, params.r0, 0.01, ten, params))
    assert 0 < s < 0.05
    assert float(forward_cdx_value(0.0, params.r0, 0.01, ten.with_strike(s), params)) == \
        pytest.approx(0.0, abs=1e-15)


def test_forward_value_linear_in_strike(params):
    ten = swaption_tenor(0.13)
    v = [float(forward_cdx_value(0.0, params.r0, 0.0, ten.with_strike(k * 1e-4), params))
         for k in (40, 60, 80)]
    assert v[0] > v[1] > v[2]
    assert v[0] - 2 * v[1] + v[2] == pytest.approx(0.0, abs=1e-15)


def test_implied_lambda_round_trip(params):
    ten = swaption_tenor(0.21)
    lam = implied_lambda(60e-4, 0.0, params.r0, ten, params)
    assert float(cdx_spread(0.0, params.r0, lam, ten, params)) == pytest.approx(60e-4, rel=1e-10)
    with pytest.raises(ValueError):
        implied_lambda(1e-6, 0.0, params.r0, ten, params)


def test_front_end_protection(params):
    ten = swaption_tenor(0.5)
    fep = float(front_end_protection(0.0, params.r0, 0.02, ten, params))
    assert fep > 0
    near = float(front_end_protection(ten.t0 - 1e-6, params.r0, 0.02, ten, params))
    assert abs(near) < 1e-7
    # the default-adjusted forward is still lower than a claim on every pre-inception default
    assert fep < 0.6 * (1 - float(survival_discount(0.0, 0.5, params.r0, 0.02, params)))


def test_payoff_parity(params):
    ten = swaption_tenor(0.13).with_strike(55e-4)
    r = np.linspace(0.0, 0.1, 7)[:, None]
    lam = np.linspace(0.0, 0.05, 5)[None, :]
    rec = cdxo_terminal_payoff(r, lam, ten, params, "receiver")
    pay = cdxo_terminal_payoff(r, lam, ten, params, "payer")
    legs = leg_values(ten.t0, r, lam, ten, params)
    assert np.allclose(rec - pay, ten.strike * legs.annuity - legs.protection, atol=1e-16)
    assert rec.shape == (7, 5) and np.all(rec >= 0) and np.all(pay >= 0)
    with pytest.raises(ValueError):
        cdxo_terminal_payoff(r, lam, ten, params, "straddle")


def test_tenor_validation():
    with pytest.raises(ValueError):
        TenorStructure(1.0, (0.5, 1.5))
    with pytest.raises(ValueError):
        TenorStructure(0.0, ())
    with pytest.raises(ValueError):
        TenorStructure(0.0, (1.0,), delta=1.5)
    t = TenorStructure.regular(0.13, 5.0, 2)
    assert len(t.payments) == 10 and t.accruals.sum() == pytest.approx(5.0)
    assert t.with_strike(0.01).strike == 0.01


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.2), st.floats(0.0, 0.3), st.floats(0.01, 3.0))
def test_discounts_monotone_in_state(params, r, lam, T):
    assert 0 < float(zcb_price(0.0, T, r, params)) <= 1
    s1 = float(survival_discount(0.0, T, r, lam, params))
    s2 = float(survival_discount(0.0, T, r, lam + 0.01, params))
    assert 0 < s2 < s1 <= float(zcb_price(0.0, T, r, params))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 0.1), st.floats(0.0, 0.2))
def test_spread_increases_with_intensity(params, r, lam):
    ten = swaption_tenor(0.13)
    assert float(cdx_spread(0.0, r, lam + 0.005, ten, params)) > float(
        cdx_spread(0.0, r, lam, ten, params))
