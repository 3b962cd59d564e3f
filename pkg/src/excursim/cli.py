"""Command-line front end: reproduce the reference tables and run custom models.

Subcommands
-----------
table <preset|config-path>   one CSV row per (level, target); presets
                             table1..table4 mirror the reference experiments
pickands                     prefactor estimates H_alpha across levels
estimate                     custom model given kernel/domain/mean specs

Configs are flat ``key = value`` text files; command-line flags override file
or preset values.  Output is CSV (or a gnuplot-friendly variant) written to
--out and echoed to stdout.  Runs are byte-reproducible for a fixed seed and
any worker count; wall-clock timings are only written under --timing since
they would break byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import sys
from dataclasses import dataclass

from .design import DesignDensity
from .engine import (
    EstimateReport,
    estimate_pickands,
    estimate_tail,
    estimate_tail_and_excursion,
)
from .errors import ConfigurationError, ExcursimError, InvalidLevelError
from .field import (
    BoxDomain,
    CosineProcess,
    Exponential,
    FieldModel,
    LinearMean,
    PowerExponential,
    SquaredExponential,
)
from .oracles import cosine_truth, expected_excursion_measure
from .presets import PRESETS, preset_model

__all__ = ["ExperimentConfig", "run_table", "run_pickands", "main"]

SCHEMA_VERSION = 1
TABLE_COLUMNS = ("b", "target", "true_value", "est", "std_err", "n", "m", "seed",
                 "wall_time_ms", "errored_replicates", "config_digest", "schema_version")
PICKANDS_COLUMNS = ("alpha", "b", "est", "std_err", "n", "m", "seed",
                    "wall_time_ms", "errored_replicates", "config_digest", "schema_version")
WORKERS_ENV = "EXCURSIM_WORKERS"

_CONFIG_KEYS = {"experiment", "kernel", "domain", "mean", "b", "n", "m", "eps",
                "seed", "dof", "scale", "alpha", "targets", "out", "workers",
                "format", "timing"}


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    experiment: str | None = None
    kernel: str | None = None
    domain: str | None = None
    mean: str = "0"
    b: tuple = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    n: int = 1000
    m: int | None = None
    eps: float | None = None
    seed: int = 0
    dof: int | None = None
    scale: float | None = None
    alpha: float | None = None
    targets: tuple = ("sup_tail",)
    oracle: str | None = None
    out: str | None = None
    workers: int | None = None
    format: str = "csv"
    timing: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ConfigurationError("n must be at least 2")
        if self.m is not None and self.m < 1:
            raise ConfigurationError("m must be positive")
        if self.eps is not None and not 0.0 < self.eps <= 1.0:
            raise ConfigurationError("eps must lie in (0, 1]")
        if self.seed < 0:
            raise ConfigurationError("seed must be non-negative")
        if not self.b or any(v <= 1.0 for v in self.b):
            raise ConfigurationError("levels b must all exceed 1")
        if self.workers is not None and self.workers < 1:
            raise ConfigurationError("workers must be positive")
        if self.format not in ("csv", "gnuplot"):
            raise ConfigurationError(f"unknown output format {self.format!r}")
        if self.alpha is not None and not 0.0 < self.alpha <= 2.0:
            raise ConfigurationError("alpha must lie in (0, 2]")

    @property
    def digest(self) -> str:
        semantic = {
            "experiment": self.experiment, "kernel": self.kernel,
            "domain": self.domain, "mean": self.mean, "alpha": self.alpha,
            "b": list(self.b), "n": self.n, "m": self.m, "eps": self.eps,
            "seed": self.seed, "dof": self.dof, "scale": self.scale,
            "targets": list(self.targets),
        }
        canonical = ";".join(f"{k}={semantic[k]!r}" for k in sorted(semantic))
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _parse_levels(text: str) -> tuple:
    try:
        return tuple(float(part) for part in str(text).split(",") if part.strip())
    except ValueError as exc:
        raise ConfigurationError(f"could not parse levels {text!r}") from exc


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` file; '#' starts a comment; unknown keys rejected."""
    values: dict = {}
    try:
        with open(path, encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


_INT_KEYS = {"n", "m", "seed", "dof", "workers"}
_FLOAT_KEYS = {"eps", "scale", "alpha"}


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    if key == "b":
        return _parse_levels(value)
    if key == "targets":
        return tuple(part.strip() for part in value.split(",") if part.strip())
    if key == "timing":
        return value.lower() in ("1", "true", "yes", "on")
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError as exc:
        raise ConfigurationError(f"invalid value for {key}: {value!r}") from exc
    return value


def build_config(base: dict, overrides: dict) -> ExperimentConfig:
    merged = dict(base)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    merged = {k: _coerce(k, v) for k, v in merged.items()}
    model = merged.pop("model", None)
    try:
        config = ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    if model is not None:
        config._preset_model = model  # builder kept off the dataclass fields
    return config


def table_config(source: str, overrides: dict) -> ExperimentConfig:
    """Config from a preset name or a flat config file, plus CLI overrides.

    A config file that names a preset through its ``experiment`` key inherits
    that preset's defaults; file values override them, CLI flags override both.
    """
    if source in PRESETS:
        base = dict(PRESETS[source])
        base["experiment"] = source
        return build_config(base, overrides)
    if os.path.exists(source):
        values = parse_config_file(source)
        preset = values.get("experiment")
        if preset is not None and preset not in PRESETS:
            raise ConfigurationError(f"unknown experiment {preset!r} in {source}")
        base = dict(PRESETS[preset]) if preset is not None else {}
        if preset is not None:
            base["experiment"] = preset
        base.update(values)
        return build_config(base, overrides)
    raise ConfigurationError(
        f"{source!r} is neither a preset ({', '.join(sorted(PRESETS))}) nor a config file")


# ---------------------------------------------------------------------------
# Model construction from specs
# ---------------------------------------------------------------------------

def _parse_kv(text: str) -> dict:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigurationError(f"expected name=value in kernel spec, got {part!r}")
        key, _, value = part.partition("=")
        try:
            out[key.strip()] = float(value)
        except ValueError as exc:
            raise ConfigurationError(f"invalid kernel parameter {part!r}") from exc
    return out


def parse_kernel(spec: str):
    name, _, params = spec.partition(":")
    name = name.strip().lower()
    kv = _parse_kv(params) if params else {}
    try:
        if name == "cosine":
            return CosineProcess()
        if name == "sqexp":
            return SquaredExponential(kv.pop("ell", 1.0))
        if name == "exponential":
            return Exponential(kv.pop("ell", 1.0))
        if name == "powerexp":
            return PowerExponential(kv.pop("alpha"), kv.pop("ell", 1.0))
    except (KeyError, ValueError) as exc:
        raise ConfigurationError(f"bad kernel spec {spec!r}: {exc}") from exc
    raise ConfigurationError(f"unknown kernel {name!r} (cosine, sqexp, exponential, powerexp)")


def parse_domain(spec: str) -> BoxDomain:
    lower, upper = [], []
    for axis in spec.split(";"):
        parts = [p for p in axis.split(",") if p.strip()]
        if len(parts) != 2:
            raise ConfigurationError(f"each domain axis needs 'lo,hi', got {axis!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ConfigurationError(f"bad domain spec {spec!r}") from exc
        lower.append(lo)
        upper.append(hi)
    try:
        return BoxDomain(lower, upper)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc


def parse_mean(spec: str):
    spec = spec.strip()
    if spec.startswith("linear:"):
        try:
            coeffs = [float(p) for p in spec[len("linear:"):].split(",") if p.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"bad mean spec {spec!r}") from exc
        if not coeffs:
            raise ConfigurationError("linear mean needs at least one coefficient")
        return LinearMean(coeffs)
    try:
        return float(spec)
    except ValueError as exc:
        raise ConfigurationError(
            f"mean must be a constant or 'linear:c1,c2,...', got {spec!r}") from exc


def config_model(config: ExperimentConfig) -> FieldModel:
    builder = getattr(config, "_preset_model", None)
    if builder is not None:
        return builder()
    if config.experiment is not None:
        return preset_model(config.experiment)
    if config.kernel is None or config.domain is None:
        raise ConfigurationError("custom runs need both kernel and domain")
    return FieldModel(parse_domain(config.domain), parse_kernel(config.kernel),
                      mean=parse_mean(config.mean))


def config_density(config: ExperimentConfig, model: FieldModel) -> DesignDensity:
    return DesignDensity(model.dimension, config.dof, config.scale)


# ---------------------------------------------------------------------------
# Running experiments
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10e}"
    return str(value)


def _row(config: ExperimentConfig, report: EstimateReport, true_value: float | None,
         extra: dict | None = None) -> dict:
    row = {
        "b": f"{report.b:g}",
        "target": report.target,
        "true_value": _fmt(true_value),
        "est": _fmt(report.estimate),
        "std_err": _fmt(report.std_err),
        "n": str(report.n + report.errored),
        "m": str(report.m),
        "seed": str(config.seed),
        "wall_time_ms": f"{report.wall_time_s * 1e3:.3f}" if config.timing else "",
        "errored_replicates": str(report.errored),
        "config_digest": config.digest,
        "schema_version": str(SCHEMA_VERSION),
    }
    if extra:
        row.update(extra)
    return row


def _true_value(config: ExperimentConfig, model: FieldModel, target: str,
                b: float) -> float | None:
    oracle = config.oracle
    if oracle is None and config.experiment in PRESETS:
        oracle = PRESETS[config.experiment].get("oracle")
    if target == "sup_tail" and oracle == "cosine_closed_form":
        return cosine_truth(b)
    if target == "excursion_integral" and oracle in ("excursion_quadrature",
                                                     "cosine_closed_form"):
        return expected_excursion_measure(model, b)
    return None


def run_table(config: ExperimentConfig) -> list[dict]:
    """One row per (level, target), in level order."""
    model = config_model(config)
    density = config_density(config, model)
    workers = config.workers or default_workers()
    rows = []
    for idx, b in enumerate(config.b):
        seed_key = (config.seed, idx)
        if "excursion_integral" in config.targets:
            tail, integral = estimate_tail_and_excursion(
                model, b, config.n, config.m, eps=config.eps, density=density,
                seed=seed_key, workers=workers)
            reports = [rep for rep in (tail, integral) if rep.target in config.targets]
        else:
            reports = [estimate_tail(model, b, config.n, config.m, eps=config.eps,
                                     density=density, seed=seed_key, workers=workers)]
        for report in reports:
            rows.append(_row(config, report, _true_value(config, model, report.target, b)))
    return rows


def run_pickands(config: ExperimentConfig) -> list[dict]:
    """Rows of (alpha, b, H estimate, std err) across the requested levels."""
    if config.alpha is None:
        raise ConfigurationError("pickands runs need alpha in (0, 2]")
    m = config.m if config.m is not None else 20
    workers = config.workers or default_workers()
    density = DesignDensity(1, config.dof, config.scale)
    rows = []
    for idx, b in enumerate(config.b):
        report = estimate_pickands(config.alpha, b, config.n, m, density=density,
                                   seed=(config.seed, idx), workers=workers)
        rows.append(_row(config, report, None, extra={"alpha": f"{config.alpha:g}"}))
    return rows


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {env!r}")
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Output rendering
# ---------------------------------------------------------------------------

def render_rows(rows: list[dict], columns: tuple, fmt: str) -> str:
    if fmt == "gnuplot":
        lines = ["# " + " ".join(columns)]
        for row in rows:
            lines.append(" ".join(row.get(c, "") or "NA" for c in columns))
        return "\n".join(lines) + "\n"
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row.get(c, "") for c in columns])
    return buffer.getvalue()


def emit(text: str, out_path: str | None):
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--seed", type=int, help="base seed for replicate streams")
    parser.add_argument("--n", type=int, help="replicates per level")
    parser.add_argument("--m", type=int, help="design points per replicate")
    parser.add_argument("--eps", type=float,
                        help="target relative bias; sets m when --m is absent")
    parser.add_argument("--out", help="CSV output path (also echoed to stdout)")
    parser.add_argument("--workers", type=int,
                        help=f"worker threads (default: ${WORKERS_ENV} or CPU count)")
    parser.add_argument("--format", choices=("csv", "gnuplot"), dest="fmt",
                        help="output format (default csv)")
    parser.add_argument("--dof", type=int, help="design density degrees of freedom")
    parser.add_argument("--scale", type=float, help="design density scale")
    parser.add_argument("--timing", action="store_true", default=None,
                        help="fill wall_time_ms (makes output non-reproducible)")


def _overrides(args: argparse.Namespace) -> dict:
    keys = ("seed", "n", "m", "eps", "out", "workers", "dof", "scale", "timing")
    out = {k: getattr(args, k, None) for k in keys}
    out["format"] = getattr(args, "fmt", None)
    for key in ("b", "alpha", "kernel", "domain", "mean", "targets"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excursim",
        description="Rare-event estimation for suprema of Gaussian random fields.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_table = sub.add_parser("table", help="run a preset or config-file experiment")
    p_table.add_argument("source", help=f"preset ({', '.join(sorted(PRESETS))}) or config path")
    p_table.add_argument("--b", help="comma-separated levels, e.g. 3,4,5")
    _add_common(p_table)

    p_pick = sub.add_parser("pickands", help="estimate the tail prefactor H_alpha")
    p_pick.add_argument("--alpha", type=float, required=True,
                        help="correlation exponent in (0, 2]")
    p_pick.add_argument("--b", help="comma-separated levels (default 6,7,8)")
    _add_common(p_pick)

    p_est = sub.add_parser("estimate", help="run a custom model")
    p_est.add_argument("--kernel", required=True,
                       help="cosine | sqexp[:ell=..] | exponential[:ell=..] | powerexp:alpha=..[,ell=..]")
    p_est.add_argument("--domain", required=True, help="per-axis 'lo,hi' joined by ';'")
    p_est.add_argument("--mean", help="constant or 'linear:c1,c2,...' (default 0)")
    p_est.add_argument("--b", help="comma-separated levels")
    p_est.add_argument("--with-excursion", action="store_true",
                       help="also estimate the expected excursion volume (integrand 1)")
    _add_common(p_est)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "table":
            config = table_config(args.source, _overrides(args))
            rows = run_table(config)
            emit(render_rows(rows, TABLE_COLUMNS, config.format), config.out)
        elif args.command == "pickands":
            base = {"b": (6.0, 7.0, 8.0), "n": 1000}
            config = build_config(base, _overrides(args))
            rows = run_pickands(config)
            emit(render_rows(rows, PICKANDS_COLUMNS, config.format), config.out)
        else:
            with_exc = args.with_excursion
            base = {"targets": ("sup_tail", "excursion_integral") if with_exc
                    else ("sup_tail",),
                    "oracle": "excursion_quadrature" if with_exc else None}
            config = build_config(base, _overrides(args))
            rows = run_table(config)
            emit(render_rows(rows, TABLE_COLUMNS, config.format), config.out)
    except (ConfigurationError, InvalidLevelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExcursimError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
