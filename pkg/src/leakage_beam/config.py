"""Experiment description files (TOML-style ``key = value`` or JSON)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .channel import SystemDims
from .precoders import Scheme
from .sim import SimConfig

__all__ = [
    "ConfigError",
    "ParseError",
    "ValidationError",
    "ExperimentSpec",
    "DEFAULTS",
    "OUTPUT_FORMATS",
    "load_document",
    "parse_config",
    "dump_config",
    "build_spec",
]

OUTPUT_FORMATS = ("csv", "json")

DEFAULTS = {
    "N": 8,
    "M": 3,
    "K": 2,
    "L": 2,
    "snr_start": 0.0,
    "snr_stop": 24.0,
    "snr_step": 2.0,
    "snr_grid": None,
    "schemes": "both",
    "max_trials": 100_000,
    "min_bit_errors": 200,
    "block_trials": 1000,
    "ber_floor": 0.0,
    "seed": 1,
    "output_path": "results.csv",
    "output_format": "csv",
    "report_margins": False,
}


class ConfigError(ValueError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    sim: SimConfig
    output_path: str = DEFAULTS["output_path"]
    output_format: str = DEFAULTS["output_format"]
    report_margins: bool = False


def _int(doc, key):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{key}: expected an integer, got {value!r}")
    return value


def _float(doc, key):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(f"{key}: must be finite")
    return float(value)


def _schemes(value):
    if isinstance(value, str):
        if value == "both":
            return (Scheme.ORIGINAL, Scheme.PROPOSED)
        value = [value]
    if not isinstance(value, (list, tuple)):
        raise ValidationError(f"schemes: expected 'both', a scheme name or a list, got {value!r}")
    try:
        return tuple(Scheme(v) for v in value)
    except ValueError as exc:
        raise ValidationError(f"schemes: {exc}") from None


def snr_range(start, stop, step):
    """Inclusive grid ``start, start + step, ..., <= stop``."""
    if not step > 0:
        raise ValidationError("snr_step: must be positive")
    if stop < start:
        raise ValidationError("snr_stop: must not be below snr_start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(start + i * step for i in range(count))


def build_spec(doc):
    """Validate a flat mapping of settings (missing keys take defaults)."""
    unknown = sorted(set(doc) - set(DEFAULTS))
    if unknown:
        raise ParseError(f"unknown field(s): {', '.join(unknown)}")
    merged = {**DEFAULTS, **doc}

    N, M, K, L = (_int(merged, k) for k in ("N", "M", "K", "L"))
    if L > M:
        raise ValidationError(f"L <= M violated (L={L}, M={M})")
    try:
        dims = SystemDims(N, M, K, L)
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from None

    if merged["snr_grid"] is not None:
        grid = merged["snr_grid"]
        if not isinstance(grid, (list, tuple)) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in grid
        ):
            raise ValidationError("snr_grid: expected a list of numbers")
        grid = tuple(float(v) for v in grid)
    else:
        grid = snr_range(
            _float(merged, "snr_start"), _float(merged, "snr_stop"), _float(merged, "snr_step")
        )

    seed = _int(merged, "seed")
    try:
        sim = SimConfig(
            dims=dims,
            snr_grid_db=grid,
            schemes=_schemes(merged["schemes"]),
            max_trials=_int(merged, "max_trials"),
            min_bit_errors=_int(merged, "min_bit_errors"),
            master_seed=seed,
            block_trials=_int(merged, "block_trials"),
            ber_floor=_float(merged, "ber_floor"),
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from None

    fmt = merged["output_format"]
    if fmt not in OUTPUT_FORMATS:
        raise ValidationError(f"output_format: must be one of {OUTPUT_FORMATS}, got {fmt!r}")
    path = merged["output_path"]
    if not isinstance(path, str) or not path:
        raise ValidationError("output_path: expected a non-empty string")
    margins = merged["report_margins"]
    if not isinstance(margins, bool):
        raise ValidationError("report_margins: expected true or false")
    return ExperimentSpec(sim, path, fmt, margins)


def load_document(text):
    """Raw mapping from a config document; ``{``-prefixed text is JSON, else TOML."""
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ParseError("top level must be an object")
    else:
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ParseError(str(exc)) from None
        tables = sorted(k for k, v in doc.items() if isinstance(v, dict))
        if tables:
            raise ParseError(f"sections are not supported: [{', '.join(tables)}]")
    return doc


def parse_config(text):
    """Parse and validate a config document; an empty document gives the defaults."""
    return build_spec(load_document(text))


def dump_config(spec):
    """JSON text that :func:`parse_config` maps back to ``spec``."""
    sim = spec.sim
    doc = {
        "N": sim.dims.N,
        "M": sim.dims.M,
        "K": sim.dims.K,
        "L": sim.dims.L,
        "snr_grid": list(sim.snr_grid_db),
        "schemes": [s.value for s in sim.schemes],
        "max_trials": sim.max_trials,
        "min_bit_errors": sim.min_bit_errors,
        "block_trials": sim.block_trials,
        "ber_floor": sim.ber_floor,
        "seed": sim.master_seed,
        "output_path": spec.output_path,
        "output_format": spec.output_format,
        "report_margins": spec.report_margins,
    }
    return json.dumps(doc, indent=2)
