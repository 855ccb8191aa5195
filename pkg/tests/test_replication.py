import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdxlevy.replication import (
    CarrMadan,
    ExtractionError,
    PriceCurve,
    annuity_estimate,
    annuity_measure_moments,
    carr_madan_weights,
    forward_spread,
    implied_moments,
    model_price_curve,
    payer_at_zero,
    write_moments_csv,
)


def discrete_curve(values, probs, annuity, strikes):
    """Receiver/payer prices when the inception spread takes ``values`` with ``probs``
    under the annuity measure."""
    v, p, k = (np.asarray(a, dtype=float) for a in (values, probs, strikes))
    rec = annuity * (p * np.maximum(k[:, None] - v, 0)).sum(axis=1)
    pay = annuity * (p * np.maximum(v - k[:, None], 0)).sum(axis=1)
    return PriceCurve(k, rec, pay)


def exact_moments(values, probs):
    v, p = np.asarray(values, float), np.asarray(probs, float)
    m = (p * v).sum()
    mu2 = (p * (v - m) ** 2).sum()
    return m, mu2, (p * (v - m) ** 3).sum() / mu2**1.5, (p * (v - m) ** 4).sum() / mu2**2


VALS = [30.0, 38.5, 44.0, 52.0, 61.0, 90.0]
PROBS = [0.1, 0.2, 0.3, 0.2, 0.15, 0.05]
STRIKES = np.arange(5.0, 140.01, 0.25)


@pytest.fixture(scope="module")
def toy():
    return discrete_curve(VALS, PROBS, 4.5, STRIKES)


def test_forward_and_annuity_exact(toy):
    m = exact_moments(VALS, PROBS)[0]
    assert forward_spread(toy) == pytest.approx(m, rel=1e-12)
    assert payer_at_zero(toy) == pytest.approx(4.5 * m, rel=1e-12)
    assert annuity_estimate(toy, m) == pytest.approx(4.5, rel=1e-12)


def test_moments_of_discrete_law(toy):
    _, mu2, mu3, mu4 = exact_moments(VALS, PROBS)
    rep = implied_moments(toy)
    assert rep.mu2 == pytest.approx(mu2, rel=1e-4)
    assert rep.mu3 == pytest.approx(mu3, rel=1e-3)
    assert rep.mu4 == pytest.approx(mu4, rel=1e-3)
    assert abs(rep.truncation["mu2"]) < 1e-6


def test_literal_kurtosis_display(toy):
    """Printed display: mu2^4 in the denominator and a factor 12 on the receiver side."""
    m, mu2, _, _ = exact_moments(VALS, PROBS)
    x = np.asarray(VALS) - m
    p = np.asarray(PROBS)
    up, down = (p * x**4 * (x > 0)).sum(), (p * x**4 * (x < 0)).sum()
    rep = implied_moments(toy)
    assert rep.mu4_literal == pytest.approx((up + 12 * down) / mu2**4, rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 50.0))
def test_moments_invariant_to_price_scale(k):
    curve = discrete_curve(VALS, PROBS, 4.5, STRIKES)
    a, b = implied_moments(curve), implied_moments(curve.scaled(k))
    assert b.annuity == pytest.approx(k * a.annuity, rel=1e-10)
    for name in ("c_f", "mu2", "mu3", "mu4"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(10, 120), min_size=2, max_size=6, unique=True),
       st.floats(1.0, 8.0))
def test_forward_spread_is_weighted_mean(vals, annuity):
    probs = np.full(len(vals), 1 / len(vals))
    curve = discrete_curve(vals, probs, annuity, np.arange(1.0, 130.0, 1.0))
    assert forward_spread(curve) == pytest.approx(np.mean(vals), rel=1e-9)


def test_carr_madan_cubic_exact():
    H = lambda c: 2.0 - 0.5 * c + 0.3 * c**2 - 0.01 * c**3  # noqa: E731
    dH = lambda c: -0.5 + 0.6 * c - 0.03 * c**2  # noqa: E731
    d2H = lambda c: 0.6 - 0.06 * c  # noqa: E731
    cm = carr_madan_weights(H, 45.0, dH, d2H)
    for c in (0.0, 12.0, 45.0, 77.7, 300.0):
        assert cm.reconstruct(c) == pytest.approx(H(c), abs=1e-8 * max(1, abs(H(c))))
    # central differences: slope error h^2/6 |H'''|, curvature exact for a cubic
    h = 1e-2
    num = carr_madan_weights(H, 45.0, step=h)
    assert abs(num.reconstruct(80.0) - H(80.0)) <= 1.01 * h**2 / 6 * 0.06 * 35.0
    assert cm.receiver_density(50.0) == 0.0 and cm.payer_density(40.0) == 0.0
    with pytest.raises(ValueError):
        carr_madan_weights(H, -1.0)


def test_carr_madan_weights_are_option_portfolio():
    cm = CarrMadan(40.0, 1.0, 0.0, lambda k: np.full_like(np.asarray(k, float), 2.0))
    # H'' = 2 around 40: H(c) = 1 + (c - 40)^2
    assert cm.reconstruct(55.0) == pytest.approx(1 + 15.0**2)
    assert cm.reconstruct(31.0) == pytest.approx(1 + 9.0**2)


def test_price_curve_validation():
    with pytest.raises(ValueError):
        PriceCurve([1, 1, 2], [0, 1, 2], [2, 1, 0])
    with pytest.raises(ValueError):
        PriceCurve([1, 2, 3], [2, 1, 0], [2, 1, 0])
    with pytest.raises(ValueError):
        PriceCurve([1], [0], [1])


def test_extraction_errors():
    curve = discrete_curve([50.0], [1.0], 4.0, [60.0, 70.0, 80.0])
    with pytest.raises(ExtractionError):
        forward_spread(curve)
    toy = discrete_curve(VALS, PROBS, 4.5, STRIKES)
    with pytest.raises(ExtractionError):
        implied_moments(toy, c_f=200.0)
    with pytest.raises(ExtractionError):
        annuity_estimate(toy, 0.0)


def test_payer_at_zero_respects_parity_floor():
    # a curve whose two lowest payers are nearly flat would extrapolate too low
    k = np.array([40.0, 42.5, 45.0, 47.5])
    rec = np.array([0.0, 0.5, 3.0, 10.0])
    pay = np.array([25.0, 24.9, 16.0, 12.0])
    up0 = payer_at_zero(PriceCurve(k, rec, pay))
    parity = (pay - rec)[0] - ((pay - rec)[1] - (pay - rec)[0]) / 2.5 * 40.0
    assert up0 == pytest.approx(parity)


def test_model_curve_agrees_with_direct_moments(term13):
    p, ten = term13
    k = np.arange(42.5, 120.01, 0.5)
    curve = model_price_curve(p, ten, k, 20_000, np.random.default_rng(3))
    rep = implied_moments(curve)
    mc = annuity_measure_moments(p, ten, 20_000, np.random.default_rng(3), window=(k[0], k[-1]))
    assert rep.c_f == pytest.approx(mc["c_f"], rel=1e-6)
    for name in ("mu2", "mu3", "mu4"):
        assert getattr(rep, name) == pytest.approx(mc[name], rel=0.02)


def test_write_moments_csv(tmp_path, toy):
    rep = implied_moments(toy)
    out = tmp_path / "m.csv"
    write_moments_csv([("0.13", rep, None), ("0.21", None, rep)], out)
    rows = list(csv.DictReader(open(out)))
    assert rows[0]["model_mu2"] == "" and float(rows[1]["model_mu2"]) == pytest.approx(rep.mu2, rel=1e-6)
