"""Bundled synthetic market data and the code that regenerates it.

The real quotes behind the reference calibration are proprietary. The files
shipped here are generated from the reference parameters so every pipeline
can run end to end:

* ``synthetic_curve.csv``: zero yields implied by the reference rate block.
* ``synthetic_quotes.csv``: one day of receiver/payer quotes for every term
  of the calibrated parameter set, strikes 42.5 to 120 bps. ``lambda0`` is set per
  term so the forward CDX struck at 44 bps is worth zero, or left at 0 when
  the par spread already exceeds 44 bps there.
* ``synthetic_multiday.csv``: several days of term-0.13 quotes from slowly
  drifting parameters and spot spread.

Run ``python -m cdxlevy.datasets DIR`` to rebuild them.
"""
from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .calibration import (
    MCPricer,
    read_curve,
    read_quotes,
    synthetic_curve,
    swaption_tenor,
    synthetic_quotes,
    write_curve,
    write_quotes,
)
from .params import INTENSITY_2020_01_02, calibrated_2020_01_02, reference_params
from .pricing import cdx_spread, implied_lambda

STRIKES_BPS = tuple(np.arange(42.5, 120.01, 2.5))
MULTIDAY_DATES = tuple(f"2020-01-{d:02d}" for d in (2, 3, 6, 7, 8, 9, 10, 13))


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("cdxlevy") / "data" / name))


def load_curve():
    return read_curve(bundled_path("synthetic_curve.csv"))


def load_quotes():
    return read_quotes(bundled_path("synthetic_quotes.csv"))


def load_multiday():
    return read_quotes(bundled_path("synthetic_multiday.csv"))


def _pricer(seed: int) -> MCPricer:
    return MCPricer(n_paths=20000, step=1.0 / 252, seed=seed)


SPOT_BPS = 44.0


def snapshot_params(term: float, spot_bps: float = SPOT_BPS):
    p = calibrated_2020_01_02(term)
    tenor = swaption_tenor(term)
    if float(cdx_spread(0.0, p.r0, 0.0, tenor, p)) * 1e4 < spot_bps:
        p = p.replace(lambda0=implied_lambda(spot_bps * 1e-4, 0.0, p.r0, tenor, p))
    return p


def make_snapshot(date: str = "2020-01-02", half_spread: float = 1.0, seed: int = 11):
    quotes = []
    for term in sorted(INTENSITY_2020_01_02):
        quotes += synthetic_quotes(snapshot_params(term), term, STRIKES_BPS,
                                   _pricer(seed), half_spread, date)
    return quotes


def make_multiday(term: float = 0.13, half_spread: float = 1.0, seed: int = 23):
    """Daily quotes from drifting ``r0``, ``rho``, ``gamma_tau`` and spot spread;
    ``lambda0`` is re-anchored to the spot by parity each day."""
    rng = np.random.default_rng(seed)
    base = calibrated_2020_01_02(term)
    tenor = swaption_tenor(term)
    d = base.as_dict()
    spot = SPOT_BPS
    quotes = []
    for date in MULTIDAY_DATES:
        p = base.replace(r0=d["r0"], rho=d["rho"], gamma_tau=d["gamma_tau"])
        if float(cdx_spread(0.0, p.r0, 0.0, tenor, p)) * 1e4 < spot:
            p = p.replace(lambda0=implied_lambda(spot * 1e-4, 0.0, p.r0, tenor, p))
        quotes += synthetic_quotes(p, term, STRIKES_BPS, _pricer(seed), half_spread, date)
        d["r0"] = max(d["r0"] + rng.normal(0, 5e-4), 1e-4)
        d["rho"] = max(d["rho"] * np.exp(rng.normal(0, 0.1)), 1e-3)
        d["gamma_tau"] = d["gamma_tau"] * np.exp(rng.normal(0, 0.1))
        spot = float(np.clip(spot * np.exp(rng.normal(0, 0.04)), 45.0, 60.0))
    return quotes


def rebuild(directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_curve(synthetic_curve(reference_params()), directory / "synthetic_curve.csv")
    write_quotes(make_snapshot(), directory / "synthetic_quotes.csv")
    write_quotes(make_multiday(), directory / "synthetic_multiday.csv")


if __name__ == "__main__":
    rebuild(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "data")
