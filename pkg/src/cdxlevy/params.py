"""Reference parameter sets and the flat ``key=value`` parameter file format."""
from __future__ import annotations

from pathlib import Path

from .ou import ModelParams

# Short-rate parameters calibrated to the Treasury curve of 2 January 2020.
RATE_2020_01_02 = {"r0": 0.0146, "theta_r": 0.55, "c_r": 400.0005, "gamma_r": 3.9475}

# Intensity parameters per option term (years) fitted to CDX IG swaptions on
# 2 January 2020. Columns: theta_lambda, rho, c_lambda, gamma_lambda, c_tau, gamma_tau.
INTENSITY_2020_01_02 = {
    0.04: (0.1562, 0.7869, 20.3292, 4.1223, 604.0000, 3.3192),
    0.13: (3.3533, 0.1548, 4.3178, 6.0617, 190.0001, 3.5298),
    0.21: (2.6789, 0.1115, 6.1313, 2.6983, 101.2590, 3.6123),
    0.29: (0.0026, 0.1280, 18.7756, 5.1836, 312.5091, 2.5903),
    0.39: (0.0010, 0.1000, 10.0981, 4.4205, 818.1465, 4.9855),
    0.46: (0.0010, 0.1000, 82.2892, 1.0241, 45.8397, 8.4584),
}

_INTENSITY_KEYS = ("theta_lambda", "rho", "c_lambda", "gamma_lambda", "c_tau", "gamma_tau")

PARAM_KEYS = ("r0", "theta_r", "c_r", "gamma_r", "rho", "lambda0", "theta_lambda",
              "c_lambda", "gamma_lambda", "c_tau", "gamma_tau")


def calibrated_2020_01_02(term: float = 0.13, lambda0: float = 0.0) -> ModelParams:
    """Model parameters for one option term of the 2 January 2020 surface."""
    try:
        row = INTENSITY_2020_01_02[term]
    except KeyError:
        raise KeyError(f"no calibrated row for term {term}; have {sorted(INTENSITY_2020_01_02)}")
    return ModelParams.from_values(**RATE_2020_01_02, lambda0=lambda0,
                                   **dict(zip(_INTENSITY_KEYS, row)))


def reference_params() -> ModelParams:
    """The 2-month set used for the engine comparisons (``lambda0 = 0``)."""
    return calibrated_2020_01_02(0.13)


class ParamFileError(ValueError):
    pass


def parse_params(text: str, source: str = "<string>") -> ModelParams:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamFileError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_KEYS:
            raise ParamFileError(f"{source}:{lineno}: unknown parameter {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise ParamFileError(f"{source}:{lineno}: {key} is not a number: {val!r}")
    missing = [k for k in PARAM_KEYS if k not in values]
    if missing:
        raise ParamFileError(f"{source}: missing parameters {missing}")
    try:
        return ModelParams.from_values(**values)
    except ValueError as exc:
        raise ParamFileError(f"{source}: {exc}") from exc


def read_params(path) -> ModelParams:
    path = Path(path)
    return parse_params(path.read_text(), str(path))


def format_params(params: ModelParams) -> str:
    d = params.as_dict()
    return "".join(f"{k} = {d[k]!r}\n" for k in PARAM_KEYS)


def write_params(params: ModelParams, path) -> None:
    Path(path).write_text(format_params(params))
