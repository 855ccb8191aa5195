import csv
import math

import numpy as np
import pytest

from cdxlevy.density import (
    DensityGridError,
    FFTGrid,
    _invert,
    desk_grid,
    stationary_density,
    transition_density,
)
from cdxlevy.ou import conditional_moments

SMALL = (2**7, 2**12)


@pytest.fixture(scope="module")
def field_1y(params_with_intensity):
    p = params_with_intensity
    return transition_density(1.0, p, desk_grid(p, SMALL))


def test_grid_geometry():
    g = FFTGrid((64, 128), (50.0, 80.0), (0.0, -1.0))
    assert np.allclose(g.eta * g.space_step * np.array(g.n), 2 * math.pi)
    r, lam = g.axes()
    assert r[0] == 0.0 and lam[0] == -1.0 and len(lam) == 128
    u_r, _ = g.frequencies()
    assert u_r[0] == -50.0 and u_r[32] == pytest.approx(0.0)
    sym = FFTGrid(16, 4.0)
    assert sym.origin == tuple(-b for b in sym.b_space)
    with pytest.raises(ValueError):
        FFTGrid(48, 1.0)
    with pytest.raises(ValueError):
        FFTGrid(64, 0.0)
    with pytest.raises(ValueError):
        FFTGrid.covering((1.0, 1.0), (0.0, 1.0))


def test_covering_grid_spans_requested_ranges():
    g = FFTGrid.covering((-0.1, 0.5), (-0.2, 1.8), (256, 512))
    r, lam = g.axes()
    assert r[0] == pytest.approx(-0.1) and r[-1] + g.space_step[0] == pytest.approx(0.5)
    assert lam[0] == pytest.approx(-0.2) and lam[-1] + g.space_step[1] == pytest.approx(1.8)


def test_inversion_of_gaussian_cf():
    g = FFTGrid.covering((-10.0, 11.0), (-12.0, 18.0), (128, 256))
    u_r, u_l = g.frequencies()
    m, s = (0.5, 3.0), (1.0, 1.5)
    cf = np.exp(1j * (m[0] * u_r[:, None] + m[1] * u_l[None, :])
                - 0.5 * (s[0] ** 2 * u_r[:, None] ** 2 + s[1] ** 2 * u_l[None, :] ** 2))
    d = _invert(cf, g, None, 1e-6, 0.0)
    r, lam = g.axes()
    exact = (np.exp(-0.5 * ((r[:, None] - m[0]) / s[0]) ** 2 - 0.5 * ((lam[None, :] - m[1]) / s[1]) ** 2)
             / (2 * math.pi * s[0] * s[1]))
    assert np.max(np.abs(d.values - exact)) < 1e-10
    mo = d.moments()
    assert mo["mean_r"] == pytest.approx(0.5) and mo["var_lambda"] == pytest.approx(2.25)


def test_transition_mass_and_moments(field_1y, params_with_intensity):
    assert field_1y.mass == pytest.approx(1.0, abs=1e-10)
    assert field_1y.negative_mass > -1e-6
    m, c = field_1y.moments(), conditional_moments(1.0, params_with_intensity)
    for k in c:
        assert m[k] == pytest.approx(c[k], rel=1e-5)


def test_smoothing_kernel_variance_is_removed(field_1y):
    raw = field_1y.moments(deconvolve=False)
    fixed = field_1y.moments()
    h = field_1y.grid.space_step * field_1y.smoothing
    assert raw["var_lambda"] - fixed["var_lambda"] == pytest.approx(h[1] ** 2)
    assert raw["mean_lambda"] == fixed["mean_lambda"]


def test_marginals_and_helpers(field_1y, tmp_path):
    h = field_1y.grid.space_step
    assert field_1y.marginal("r").sum() * h[0] == pytest.approx(1.0)
    assert field_1y.marginal("lambda").sum() * h[1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        field_1y.marginal("x")
    assert np.all(field_1y.clipped() >= 0)
    assert field_1y.l1_distance(field_1y) == 0.0
    assert 0 <= field_1y.leakage < 0.25
    out = tmp_path / "d.csv"
    field_1y.to_csv(out, stride=64)
    rows = list(csv.DictReader(open(out)))
    assert set(rows[0]) == {"r", "lambda", "value", "mass"}
    assert len(rows) == (SMALL[0] // 64) * (SMALL[1] // 64)


def test_density_spreads_out_with_horizon(params_with_intensity):
    p = params_with_intensity
    g = desk_grid(p, SMALL)
    a = transition_density(0.25, p, g).moments()
    b = transition_density(2.0, p, g).moments()
    assert b["var_r"] > a["var_r"]


def test_stationary_moments(params):
    from cdxlevy.ou import stationary_moments

    d = stationary_density(params, desk_grid(params, SMALL))
    m, s = d.moments(), stationary_moments(params)
    assert d.mass == pytest.approx(1.0, abs=1e-9)
    for k in s:
        assert m[k] == pytest.approx(s[k], rel=1e-4)


def test_unsmoothed_inversion_on_coarse_grid_is_rejected(params_with_intensity):
    p = params_with_intensity
    with pytest.raises(DensityGridError):
        transition_density(1.0, p, desk_grid(p, SMALL), smoothing=0.0)


def test_bad_horizon(params):
    with pytest.raises(ValueError):
        transition_density(0.0, params)


def test_full_preset_shape():
    g = FFTGrid.full_preset()
    assert g.n == (8192, 8192) and g.b_freq == (1e6, 1e6)
