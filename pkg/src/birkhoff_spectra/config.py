"""Flat ``section.key = value`` experiment configuration.

Every key is declared in :data:`SCHEMA` with a parser and a default; unknown
keys and unparsable values are rejected before any computation.  A report
embeds its resolved configuration as ``# config: key = value`` comment lines,
and :func:`load_config` accepts such a report in place of a config file.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np

from .map_model import (
    MapModel,
    ModelValidationError,
    Potential,
    XiClass,
    build_model,
    constant_potential,
    digit_expression,
    digit_power,
    digit_table,
    log_derivative,
    log_digit,
)
from .transfer import Truncation

EMBED_PREFIX = "# config:"
PLACEMENT_KEYS = ("output.path", "run.workers")


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value or inconsistent settings."""


# --------------------------------------------------------------------------
# value parsers
# --------------------------------------------------------------------------


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        value = text.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return value

    return parse


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise ValueError(f"must be positive, got {text!r}")
    return value


def _count(text: str) -> int:
    value = int(float(text))
    if value < 0 or value != float(text):
        raise ValueError(f"not a non-negative integer: {text!r}")
    return value


def parse_floats(text: str) -> tuple[float, ...]:
    """Comma list of numbers or ``start:stop:count`` ranges (inclusive)."""
    values: list[float] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        if ":" in part:
            lo, hi, count = part.split(":")
            n = int(count)
            if n < 1:
                raise ValueError(f"range count must be positive in {part!r}")
            lo_f, hi_f = float(lo), float(hi)
            values.extend(lo_f + (hi_f - lo_f) * k / (n - 1) if n > 1 else lo_f for k in range(n))
        else:
            values.append(float(part))
    return tuple(values)


def parse_points(text: str) -> tuple[Fraction | float, ...]:
    """Comma list of points; ``p/q`` entries are kept as exact fractions."""
    out: list[Fraction | float] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        out.append(Fraction(part) if "/" in part else float(part))
    return tuple(out)


def parse_digit_set(text: str) -> Optional[tuple[int, ...]]:
    """``all`` or a comma list of digits and ``a-b`` ranges."""
    text = text.strip()
    if text.lower() in ("", "all"):
        return None
    digits: set[int] = set()
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "-" in part:
            lo, hi = (int(v) for v in part.split("-"))
            if hi < lo:
                raise ValueError(f"empty digit range {part!r}")
            digits.update(range(lo, hi + 1))
        else:
            digits.add(int(part))
    if not digits or min(digits) < 1:
        raise ValueError(f"digits must be positive integers: {text!r}")
    return tuple(sorted(digits))


def parse_subsystems(text: str) -> tuple[Optional[tuple[int, ...]], ...]:
    """Semicolon-separated digit sets."""
    return tuple(parse_digit_set(part) for part in text.split(";") if part.strip())


def _floats(text: str) -> tuple[float, ...]:
    return parse_floats(text)


def _seeds(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace(",", " ").split())


# key -> (parser, default text)
SCHEMA: dict[str, tuple[Callable[[str], object], str]] = {
    "model.kind": (_choice("renyi", "gauss", "custom"), "renyi"),
    "model.spec": (str, ""),
    "potential.name": (_choice("log_b1", "b1_pow", "log_deriv", "digit_table", "digit_expr", "constant"), "log_b1"),
    "potential.r": (_positive_float, "1"),
    "potential.table": (str, ""),
    "potential.expr": (str, ""),
    "potential.value": (float, "1"),
    "potential.class": (_choice("zero", "infinite", "finite"), "zero"),
    "potential.theta": (float, "0"),
    "potential.eta": (float, "0"),
    "potential.xi": (float, "0"),
    "potential.h1": (_bool, "true"),
    "truncation.j_max": (_count, "400"),
    "truncation.n_max": (_count, "400"),
    "truncation.depth": (_count, "1"),
    "truncation.nodes": (_count, "24"),
    "truncation.tails": (_bool, "true"),
    "tol.pressure": (_positive_float, "1e-10"),
    "tol.stationarity": (_positive_float, "1e-6"),
    "digits": (parse_digit_set, "all"),
    "check.i_max": (_count, "1000"),
    "check.n_max": (_count, "1000"),
    "pressure.b": (_floats, "0.6:1.0:5"),
    "pressure.q": (_floats, "-0.2:0.4:4"),
    "dimension.subsystems": (parse_subsystems, "all"),
    "spectrum.alphas": (_floats, "0.8, 1.0, 1.5, 2.0"),
    "spectrum.q_policy": (_choice("auto", "positive", "negative"), "auto"),
    "bcf.x": (parse_points, "0.1, 0.25"),
    "bcf.n": (_count, "40"),
    "bcf.psi": (_choice("log", "identity", "power"), "log"),
    "bcf.r": (_positive_float, "1"),
    "sample.alpha": (float, "nan"),
    "sample.b": (float, "nan"),
    "sample.q": (float, "nan"),
    "sample.length": (_count, "100000"),
    "sample.seeds": (_seeds, "0"),
    "run.workers": (_count, "0"),
    "output.path": (str, ""),
    "output.format": (_choice("csv", "json"), "csv"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration: raw text per key and the parsed values."""

    raw: dict[str, str]
    values: dict[str, object]

    def __getitem__(self, key: str):
        return self.values[key]

    def with_overrides(self, overrides: Mapping[str, str]) -> "ExperimentConfig":
        merged = dict(self.raw)
        merged.update({k: str(v) for k, v in overrides.items()})
        return resolve(merged)

    def lines(self) -> list[str]:
        """Keys that determine the report body (output location and worker count excluded)."""
        return [f"{key} = {self.raw[key]}" for key in SCHEMA if key not in PLACEMENT_KEYS]

    @property
    def truncation(self) -> Truncation:
        return Truncation(
            j_max=self["truncation.j_max"],
            n_max=self["truncation.n_max"],
            depth=self["truncation.depth"],
            nodes=self["truncation.nodes"],
            tails=self["truncation.tails"],
        )


def resolve(entries: Mapping[str, str]) -> ExperimentConfig:
    """Validate ``entries`` against :data:`SCHEMA` and fill in defaults."""
    unknown = sorted(set(entries) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    raw = {key: str(entries.get(key, default)).strip() for key, (_, default) in SCHEMA.items()}
    values = {}
    for key, (parse, _) in SCHEMA.items():
        try:
            values[key] = parse(raw[key])
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{key}: {exc}") from None
    cfg = ExperimentConfig(raw, values)
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg: ExperimentConfig) -> None:
    if cfg["model.kind"] == "custom" and not cfg["model.spec"]:
        raise ConfigError("model.spec is required for a custom model")
    name = cfg["potential.name"]
    if name == "digit_table" and not cfg["potential.table"]:
        raise ConfigError("potential.table is required for digit_table")
    if name == "digit_expr" and not cfg["potential.expr"]:
        raise ConfigError("potential.expr is required for digit_expr")
    if cfg["truncation.j_max"] < 2 or cfg["truncation.n_max"] < 2:
        raise ConfigError("truncation.j_max and truncation.n_max must be at least 2")
    if cfg["truncation.depth"] not in (1, 2):
        raise ConfigError("truncation.depth must be 1 or 2")
    if cfg["truncation.nodes"] < 8:
        raise ConfigError("truncation.nodes must be at least 8")
    if cfg["check.i_max"] < 1000:
        raise ConfigError("check.i_max must be at least 1000")


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    When the text carries embedded ``# config:`` lines (a report), only those
    are read.
    """
    lines = text.splitlines()
    embedded = [ln[len(EMBED_PREFIX) :] for ln in lines if ln.startswith(EMBED_PREFIX)]
    if embedded:
        lines = embedded
    entries: dict[str, str] = {}
    for number, line in enumerate(lines, 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{number}: expected 'key = value'")
        key, value = (part.strip() for part in body.split("=", 1))
        if key in entries:
            raise ConfigError(f"{source}:{number}: duplicate key {key!r}")
        entries[key] = value
    return entries


def load_config(path: Optional[str | Path], overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    entries: dict[str, str] = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        entries = parse_key_values(text, str(path))
    entries.update({k: str(v) for k, v in (overrides or {}).items()})
    return resolve(entries)


# --------------------------------------------------------------------------
# building library objects
# --------------------------------------------------------------------------


def _read_text(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None


def make_model(cfg: ExperimentConfig) -> MapModel:
    spec = None
    if cfg["model.kind"] == "custom":
        spec = parse_key_values(_read_text(cfg["model.spec"], "model spec"), cfg["model.spec"])
    try:
        return build_model(cfg["model.kind"], spec)
    except ModelValidationError as exc:
        raise ConfigError(str(exc)) from None


def _declared_class(cfg: ExperimentConfig) -> XiClass:
    kind = cfg["potential.class"]
    if kind == "finite":
        return XiClass.finite(cfg["potential.theta"], cfg["potential.eta"], cfg["potential.xi"])
    return XiClass.zero() if kind == "zero" else XiClass.infinite()


def make_potential(cfg: ExperimentConfig, model: MapModel) -> Potential:
    name = cfg["potential.name"]
    try:
        if name == "log_b1":
            return log_digit(model)
        if name == "b1_pow":
            return digit_power(model, cfg["potential.r"])
        if name == "log_deriv":
            return log_derivative(model)
        if name == "constant":
            return constant_potential(model, cfg["potential.value"])
        if name == "digit_table":
            text = _read_text(cfg["potential.table"], "digit table")
            values = [float(v) for v in text.replace(",", " ").split()]
            return digit_table(model, values)
        return digit_expression(model, cfg["potential.expr"], _declared_class(cfg), cfg["potential.h1"])
    except ValueError as exc:
        raise ConfigError(f"potential {name}: {exc}") from None


def psi_function(cfg: ExperimentConfig) -> Callable:
    kind, r = cfg["bcf.psi"], cfg["bcf.r"]
    if kind == "log":
        return np.log
    if kind == "identity":
        return lambda d: d
    return lambda d: d**r


def describe_psi(cfg: ExperimentConfig) -> str:
    kind = cfg["bcf.psi"]
    return f"power({cfg['bcf.r']:g})" if kind == "power" else kind


def finite_or_none(value: float) -> Optional[float]:
    return None if math.isnan(value) else value
