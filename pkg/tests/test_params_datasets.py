import numpy as np
import pytest

from cdxlevy import datasets
from cdxlevy.calibration import swaption_tenor
from cdxlevy.params import (
    INTENSITY_2020_01_02,
    ParamFileError,
    calibrated_2020_01_02,
    format_params,
    parse_params,
    read_params,
    reference_params,
    write_params,
)
from cdxlevy.pricing import cdx_spread
from cdxlevy.replication import implied_moments


def test_reference_set_column_order():
    p = reference_params()
    assert p.intensity.subordinator.c == 190.0001 and p.intensity.subordinator.gamma == 3.5298
    assert p.intensity.inner.c == 4.3178 and p.lambda0 == 0.0
    with pytest.raises(KeyError):
        calibrated_2020_01_02(0.5)


def test_param_file_round_trip(tmp_path, params):
    path = tmp_path / "p.txt"
    write_params(params, path)
    assert read_params(path) == params
    assert parse_params("# comment\n" + format_params(params)) == params


@pytest.mark.parametrize("text, match", [
    ("r0 0.1", "key=value"),
    ("sigma = 1", "unknown"),
    ("r0 = abc", "not a number"),
    ("r0 = 0.1", "missing"),
])
def test_param_file_errors(text, match):
    with pytest.raises(ParamFileError, match=match):
        parse_params(text)


def test_param_file_rejects_invalid_values(params):
    text = format_params(params).replace("theta_r = 0.55", "theta_r = -1")
    with pytest.raises(ParamFileError):
        parse_params(text)


def test_bundled_files_load():
    curve = datasets.load_curve()
    quotes = datasets.load_quotes()
    multi = datasets.load_multiday()
    assert len(curve) == 10
    assert sorted({q.term for q in quotes}) == sorted(INTENSITY_2020_01_02)
    assert len(quotes) == 2 * len(datasets.STRIKES_BPS) * len(INTENSITY_2020_01_02)
    assert sorted({q.date for q in multi}) == list(datasets.MULTIDAY_DATES)


def test_bundled_curve_matches_reference_rates(params):
    from cdxlevy.calibration import model_yields

    curve = datasets.load_curve()
    y = model_yields(params, [c.tenor for c in curve])
    assert np.allclose(y, [c.yld for c in curve], atol=1e-10)


def test_snapshot_parity_intensity():
    p = datasets.snapshot_params(0.13)
    s = float(cdx_spread(0.0, p.r0, p.lambda0, swaption_tenor(0.13), p)) * 1e4
    assert s == pytest.approx(datasets.SPOT_BPS, abs=1e-6) or p.lambda0 == 0.0


def test_bundled_snapshot_replicates():
    quotes = datasets.load_quotes()
    from cdxlevy.cli import _curve_from_quotes

    for term in (0.13, 0.21):
        rep = implied_moments(_curve_from_quotes([q for q in quotes if q.term == term]))
        assert 4.0 < rep.annuity < 5.0
        assert 40.0 < rep.c_f < 60.0
        assert rep.mu2 > 0


def test_snapshot_regeneration_is_reproducible():
    from cdxlevy.calibration import synthetic_quotes

    fresh = synthetic_quotes(datasets.snapshot_params(0.13), 0.13, datasets.STRIKES_BPS,
                             datasets._pricer(11), 1.0, "2020-01-02")
    stored = [q for q in datasets.load_quotes() if q.term == 0.13]
    assert len(fresh) == len(stored)
    for x, y in zip(fresh, stored):
        assert (x.strike_bps, x.side) == (y.strike_bps, y.side)
        assert x.mid == pytest.approx(y.mid, abs=1e-5)
