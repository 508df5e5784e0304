"""Command-line front end: ``birkhoff-spectra COMMAND [--config PATH] ...``.

Exit status 0 on success, 2 on invalid input and 3 on numerical failure; the
reason is printed as one line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .bcf import bcf_expand, birkhoff_average, cf_expand, sample_gibbs_orbit
from .config import (
    EMBED_PREFIX,
    ConfigError,
    ExperimentConfig,
    describe_psi,
    load_config,
    make_model,
    make_potential,
    psi_function,
    resolve,
)
from .expressions import ExpressionError
from .gibbs import gibbs_chain
from .induced import check_inducing_condition
from .map_model import (
    ModelValidationError,
    check_distortion,
    check_growth_condition,
    check_l_condition,
    check_parabolic_structure,
    check_partition,
    check_positivity,
    classify_potential,
)
from .pressure import bowen_dimension, pressure
from .spectrum import CSV_COLUMNS as SPECTRUM_COLUMNS
from .spectrum import SpectrumConfig, solve_spectrum_point

log = logging.getLogger("birkhoff_spectra")

PROG = "birkhoff-spectra"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3

COLUMNS: dict[str, tuple[str, ...]] = {
    "check": ("condition", "value", "limit", "passed", "detail"),
    "pressure": ("b", "q", "p", "method", "residual", "in_N"),
    "dimension": ("subsystem", "dimension", "method"),
    "spectrum": SPECTRUM_COLUMNS,
    "bcf": ("x", "n", "psi", "average", "last_quarter", "terminated", "precision_loss", "digits_head"),
    "sample": ("seed", "length", "potential", "average", "alpha", "b", "q", "mean_return", "digits_head"),
}

HEAD_DIGITS = 20


class NumericalFailure(ArithmeticError):
    """A computation did not produce a value (non-bracketing root, divergence)."""


@dataclass
class Report:
    """Rows of one command; ``failures`` lists rows that carry no converged value."""

    command: str
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else format_value(v)
    return value


def render(report: Report, cfg: ExperimentConfig, fmt: str, stamp: str) -> str:
    if fmt == "json":
        doc = {
            "command": report.command,
            "generated": stamp,
            "config": dict(cfg.raw),
            "columns": list(report.columns),
            "rows": [{c: _json_value(row.get(c)) for c in report.columns} for row in report.rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    out = io.StringIO()
    out.write(f"# {PROG} {report.command} generated {stamp}\n")
    for line in cfg.lines():
        out.write(f"{EMBED_PREFIX} {line}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([format_value(row.get(c)) for c in report.columns])
    return out.getvalue()


def csv_body(text: str) -> str:
    """The part of a CSV report that must be reproducible (all but the timestamp line)."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith(f"# {PROG} "))


# --------------------------------------------------------------------------
# worker plumbing
# --------------------------------------------------------------------------


@lru_cache(maxsize=4)
def _objects(raw_items: tuple[tuple[str, str], ...]):
    cfg = resolve(dict(raw_items))
    model = make_model(cfg)
    return cfg, model, make_potential(cfg, model)


def _context(cfg: ExperimentConfig):
    return _objects(tuple(sorted(cfg.raw.items())))


def _parallel_map(fn: Callable, cfg: ExperimentConfig, tasks: Sequence, workers: int) -> list:
    """Apply ``fn(raw_items, task)`` to every task; output order follows ``tasks``."""
    items = tuple(sorted(cfg.raw.items()))
    if workers <= 1 or len(tasks) <= 1:
        return [fn(items, t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, [items] * len(tasks), tasks))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _digits_label(digits: Optional[Sequence[int]]) -> str:
    if digits is None:
        return "all"
    ds = sorted(digits)
    if ds == list(range(ds[0], ds[-1] + 1)) and len(ds) > 2:
        return f"{ds[0]}-{ds[-1]}"
    return ",".join(str(d) for d in ds)


def cmd_check(cfg: ExperimentConfig, workers: int) -> Report:
    _, model, phi = _context(cfg)
    trunc = cfg.truncation
    rep = Report("check", COLUMNS["check"])

    def add(name, value, limit, passed, detail):
        rep.rows.append({"condition": name, "value": value, "limit": limit, "passed": bool(passed), "detail": detail})

    g = check_growth_condition(model, cfg["check.i_max"])
    add(g.name, g.value, g.limit, g.passed, g.detail)
    f = check_inducing_condition(model, trunc.j_max, cfg["check.n_max"])
    add("F", f.empirical_constant, 16.0, f.passed, f"gamma={model.inducing_exponent:g}, drift={f.drift:.4g}" + (", vacuous" if f.vacuous else ""))
    for r in (check_partition(model), check_parabolic_structure(model), check_distortion(model)):
        add(r.name, r.value, r.limit, r.passed, r.detail)
    p = check_positivity(phi)
    add(p.name, p.value, p.limit, p.passed, p.detail)
    cls = classify_potential(model, phi, cfg["check.i_max"])
    add("R", cls.estimated_limit, math.nan, cls.consistent, f"declared {phi.xi_class.describe()}, observed {cls.observed_class}")
    lc = check_l_condition(phi)
    add(lc.name, lc.value, lc.limit, lc.passed, lc.detail)
    add("H1", math.nan, math.nan, phi.h1_flag, "declared")
    for row in rep.rows:
        if not row["passed"]:
            log.warning("condition %s fails: %s", row["condition"], row["detail"])
    return rep


def _pressure_task(items, task):
    cfg, model, phi = _objects(items)
    b, q = task
    res = pressure(model, phi, b, q, cfg.truncation, cfg["digits"], tol=cfg["tol.pressure"])
    value = math.inf if res.infinite else res.value
    return {"b": b, "q": q, "p": value, "method": res.method, "residual": res.residual, "in_N": res.in_N}


def cmd_pressure(cfg: ExperimentConfig, workers: int) -> Report:
    tasks = [(b, q) for b in cfg["pressure.b"] for q in cfg["pressure.q"]]
    return Report("pressure", COLUMNS["pressure"], _parallel_map(_pressure_task, cfg, tasks, workers))


def _dimension_task(items, digits):
    cfg, model, _ = _objects(items)
    value = bowen_dimension(model, digits, cfg.truncation)
    used = model.parabolic_set if digits is None else [d for d in digits if model.is_parabolic(d)]
    return {"subsystem": _digits_label(digits), "dimension": value, "method": "induced-root" if used else "spectral"}


def cmd_dimension(cfg: ExperimentConfig, workers: int) -> Report:
    tasks = list(cfg["dimension.subsystems"])
    return Report("dimension", COLUMNS["dimension"], _parallel_map(_dimension_task, cfg, tasks, workers))


def _spectrum_config(cfg: ExperimentConfig) -> SpectrumConfig:
    return SpectrumConfig(
        truncation=cfg.truncation,
        digits=cfg["digits"],
        pressure_tol=max(cfg["tol.pressure"], 1e-14),
        stationarity_tol=cfg["tol.stationarity"],
        q_policy=cfg["spectrum.q_policy"],
        alphas=tuple(cfg["spectrum.alphas"]),
    )


def _spectrum_task(items, alpha):
    cfg, model, phi = _objects(items)
    return solve_spectrum_point(model, phi, alpha, _spectrum_config(cfg)).row()


def cmd_spectrum(cfg: ExperimentConfig, workers: int) -> Report:
    # every point starts cold so the report does not depend on scheduling
    rows = _parallel_map(_spectrum_task, cfg, list(cfg["spectrum.alphas"]), workers)
    failures = [f"alpha={format_value(r['alpha'])}" for r in rows if r["case"] == "BOUNDARY"]
    if failures:
        failures = [f"stationarity not bracketed at {', '.join(failures)}"]
    return Report("spectrum", COLUMNS["spectrum"], rows, failures)


def _head(digits: Sequence[int]) -> str:
    return " ".join(str(d) for d in list(digits)[:HEAD_DIGITS])


def cmd_bcf(cfg: ExperimentConfig, workers: int) -> Report:
    _, model, _ = _context(cfg)
    psi = psi_function(cfg)
    rep = Report("bcf", COLUMNS["bcf"])
    expand = cf_expand if model.name == "gauss" else bcf_expand
    for x in cfg["bcf.x"]:
        avg = birkhoff_average(model, psi, x, cfg["bcf.n"])
        digits = expand(x, min(cfg["bcf.n"], HEAD_DIGITS)).digits
        rep.rows.append(
            {
                "x": str(x),
                "n": avg.n,
                "psi": describe_psi(cfg),
                "average": avg.value,
                "last_quarter": avg.last_quarter,
                "terminated": avg.terminated,
                "precision_loss": avg.precision_loss,
                "digits_head": _head(digits),
            }
        )
    return rep


def _sample_chain(cfg: ExperimentConfig):
    _, model, phi = _context(cfg)
    alpha = cfg["sample.alpha"]
    trunc, digits = cfg.truncation, cfg["digits"]
    if not math.isnan(alpha):
        pt = solve_spectrum_point(model, phi, alpha, _spectrum_config(cfg))
        if pt.q is None:
            raise NumericalFailure(f"alpha = {alpha:g} lies on the flat part; no equilibrium chain to sample")
        return gibbs_chain(model, phi, pt.b, pt.q, -pt.q * alpha, trunc, digits), alpha, pt.b, pt.q
    b, q = cfg["sample.b"], cfg["sample.q"]
    if math.isnan(b) or math.isnan(q):
        raise ConfigError("sample needs sample.alpha or both sample.b and sample.q")
    res = pressure(model, phi, b, q, trunc, digits, tol=cfg["tol.pressure"])
    if res.infinite or not res.in_N:
        raise NumericalFailure(f"no equilibrium chain at (b, q) = ({b:g}, {q:g}): pressure is infinite or at the parabolic floor")
    return gibbs_chain(model, phi, b, q, res.value, trunc, digits), math.nan, b, q


def cmd_sample(cfg: ExperimentConfig, workers: int) -> Report:
    chain, alpha, b, q = _sample_chain(cfg)
    rep = Report("sample", COLUMNS["sample"])
    for seed in cfg["sample.seeds"]:
        orbit = sample_gibbs_orbit(chain, cfg["sample.length"], seed)
        rep.rows.append(
            {
                "seed": seed,
                "length": len(orbit.digits),
                "potential": chain.phi.name,
                "average": orbit.average,
                "alpha": alpha,
                "b": b,
                "q": q,
                "mean_return": chain.mean_return,
                "digits_head": _head(orbit.digits.digits),
            }
        )
    return rep


COMMANDS: dict[str, Callable[[ExperimentConfig, int], Report]] = {
    "check": cmd_check,
    "pressure": cmd_pressure,
    "dimension": cmd_dimension,
    "spectrum": cmd_spectrum,
    "bcf": cmd_bcf,
    "sample": cmd_sample,
}


def run(command: str, cfg: ExperimentConfig, workers: Optional[int] = None) -> Report:
    """Run one command on a validated configuration."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if workers is None:
        workers = cfg["run.workers"] or (os.cpu_count() or 1)
    return COMMANDS[command](cfg, max(1, workers))


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _epilog() -> str:
    lines = ["CSV columns per command:"]
    lines += [f"  {name:10s} {', '.join(cols)}" for name, cols in COLUMNS.items()]
    lines += [
        "",
        "Config files hold 'section.key = value' lines; a CSV report can be",
        "passed back as --config to reproduce it.  Exit status: 0 success,",
        "2 invalid input, 3 numerical failure.",
    ]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Pressure, dimension and Birkhoff-spectrum computations for parabolic interval maps.",
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", metavar="PATH", help="config file or an earlier CSV report")
    parser.add_argument("--out", metavar="PATH", help="report path (default: output.path, else stdout)")
    parser.add_argument("--format", choices=("csv", "json"), help="report format (default: output.format)")
    parser.add_argument("--workers", type=int, metavar="N", help="worker processes (default: available CPUs)")
    parser.add_argument("--seed", type=int, metavar="N", help="sampling seed (overrides sample.seeds)")
    parser.add_argument("--tol", type=float, metavar="X", help="pressure tolerance (overrides tol.pressure)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    text = " ".join(str(message).split())
    print(f"{PROG}: error[{kind}]: {text}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value.strip()
        if args.format is not None:
            overrides["output.format"] = args.format
        if args.seed is not None:
            overrides["sample.seeds"] = str(args.seed)
        if args.tol is not None:
            overrides["tol.pressure"] = repr(args.tol)
        if args.out is not None:
            overrides["output.path"] = args.out
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        cfg = load_config(args.config, overrides)
        report = run(args.command, cfg, args.workers)
    except (ConfigError, ModelValidationError, ExpressionError) as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)
    except (ArithmeticError, FloatingPointError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", f"{type(exc).__name__}: {exc}")
    stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    text = render(report, cfg, cfg["output.format"], stamp)
    path = cfg["output.path"]
    if path:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            return _fail(EXIT_VALIDATION, "validation", f"cannot write {path}: {exc.strerror}")
    else:
        sys.stdout.write(text)
    if report.failures:
        # the report is still written so boundary rows can be inspected
        return _fail(EXIT_NUMERICAL, "numerical", "; ".join(report.failures))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
