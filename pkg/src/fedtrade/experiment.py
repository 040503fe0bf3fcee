"""Experiment orchestration: config ingestion, the personalized-versus-symmetric
sweep, and CSV/SVG persistence.

The flagship experiment samples client accuracy weights from a lognormal
law, finds the largest-total-informativeness protocol inside the symmetric
and the personalized allocation families, and tracks the achieved fraction
of the noiseless optimum across the lognormal location parameter.  Runs are
deterministic under their seed: repetition streams are derived by
counter-based spawning from ``(seed, sweep index, repetition)`` and
aggregation uses exact compensated summation.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from . import bayesmean, dpmean
from .bayesmean import BayesSetting
from .dpmean import DpMeanSetting

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = ("dpmean", "bayesmean")
FAMILIES = ("symmetric", "personalized")


class ConfigError(ValueError):
    """The configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class LambdaModel:
    """Accuracy-weight model: a fixed vector or lognormal draws of unit log-scale."""

    kind: str
    location: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("fixed", "lognormal"):
            raise ConfigError(f"lambda_model.kind must be 'fixed' or 'lognormal', got {self.kind!r}")
        if self.kind == "fixed":
            if not self.values:
                raise ConfigError("fixed lambda_model needs a 'values' vector")
            if any((not math.isfinite(v)) or v < 0 for v in self.values):
                raise ConfigError("fixed lambda values must be finite and >= 0")

    def sample(self, location: float, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "fixed":
            if len(self.values) != n:
                raise ConfigError(f"fixed lambda vector has {len(self.values)} entries, need {n}")
            return np.asarray(self.values, dtype=float)
        return np.exp(rng.normal(location, 1.0, size=n))


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one personalized-versus-symmetric sweep."""

    kind: str
    setting: object
    lambda_model: LambdaModel
    m_grid: tuple
    repetitions: int
    grid_points: int
    seed: int
    out_dir: Path

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"experiment kind must be one of {EXPERIMENT_KINDS}, got {self.kind!r}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be >= 2")
        if not self.m_grid:
            raise ConfigError("m_grid must be nonempty")

    def digest(self) -> str:
        payload = {
            "kind": self.kind,
            "setting": _setting_dict(self.setting),
            "lambda_model": {
                "kind": self.lambda_model.kind,
                "location": self.lambda_model.location,
                "values": list(self.lambda_model.values),
            },
            "m_grid": list(self.m_grid),
            "repetitions": self.repetitions,
            "grid_points": self.grid_points,
            "seed": self.seed,
        }
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


@dataclass
class RepetitionRow:
    m: float
    family: str
    b_star: float
    gamma: float
    ratio: float


@dataclass
class AggregateRow:
    m: float
    family: str
    mean_ratio: float
    std_ratio: float
    reps: int


@dataclass
class ExperimentRecord:
    """Per-repetition rows plus their order-independent aggregates."""

    config_digest: str
    kind: str
    seed: int
    grid_points: int
    rows: list
    aggregates: list


def _setting_dict(setting) -> dict:
    if isinstance(setting, DpMeanSetting):
        return {
            "type": "dpmean",
            "n_clients": setting.n_clients,
            "n_samples": setting.n_samples,
            "sigma": setting.sigma,
            "support_width": setting.support_width,
        }
    if isinstance(setting, BayesSetting):
        return {
            "type": "bayesmean",
            "n_clients": setting.n_clients,
            "n_samples": setting.n_samples,
            "sigma": setting.sigma,
            "prior_precision": setting.prior_precision,
        }
    raise ConfigError(f"unsupported setting type {type(setting).__name__}")


def _rep_rng(seed: int, sweep_index: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed), spawn_key=(sweep_index, rep))
    )


def run_experiment(config: ExperimentConfig) -> ExperimentRecord:
    """Run the sweep and aggregate the achieved informativeness ratios.

    For every location value and repetition, fresh accuracy weights are
    drawn, both allocation families are scanned for their largest feasible
    scale, and the achieved fraction of the noiseless total informativeness
    is recorded.  A fixed lambda model collapses the sweep to one location.
    """
    setting = config.setting
    if config.lambda_model.kind == "fixed":
        m_values = [0.0]
    else:
        m_values = [float(m) for m in config.m_grid]

    if config.kind == "dpmean":
        derived = dpmean.derive(setting)

        def search(weights, family):
            return dpmean.maximize_gamma(setting, derived, weights, family, config.grid_points)

    else:

        def search(weights, family):
            return bayesmean.maximize_gamma(setting, weights, family, config.grid_points)

    rows = []
    aggregates = []
    for mi, m in enumerate(m_values):
        ratios = {fam: [] for fam in FAMILIES}
        for rep in range(config.repetitions):
            rng = _rep_rng(config.seed, mi, rep)
            weights = config.lambda_model.sample(m, setting.n_clients, rng)
            for fam in FAMILIES:
                found = search(weights, fam)
                rows.append(RepetitionRow(m=m, family=fam, b_star=found.b_star, gamma=found.gamma, ratio=found.ratio))
                ratios[fam].append(found.ratio)
        for fam in FAMILIES:
            vals = ratios[fam]
            n = len(vals)
            mean = math.fsum(vals) / n
            # Two-pass variance: exact zero for identical repetitions.
            var = math.fsum((v - mean) ** 2 for v in vals) / max(n - 1, 1)
            aggregates.append(
                AggregateRow(m=m, family=fam, mean_ratio=mean, std_ratio=math.sqrt(var / n), reps=n)
            )
    return ExperimentRecord(
        config_digest=config.digest(),
        kind=config.kind,
        seed=config.seed,
        grid_points=config.grid_points,
        rows=rows,
        aggregates=aggregates,
    )


def write_csv(record: ExperimentRecord, path: Path) -> Path:
    """Aggregate table as UTF-8, LF-terminated CSV with full float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["m,family,mean_ratio,std_ratio,reps,seed"]
    for row in record.aggregates:
        lines.append(
            f"{_fmt(row.m)},{row.family},{_fmt(row.mean_ratio)},{_fmt(row.std_ratio)},{row.reps},{record.seed}"
        )
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path


def read_csv(path: Path) -> list:
    """Parse an emitted aggregate CSV back into rows (round-trip checks)."""
    rows = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        m, family, mean_ratio, std_ratio, reps, _seed = line.split(",")
        rows.append(
            AggregateRow(
                m=float(m), family=family, mean_ratio=float(mean_ratio),
                std_ratio=float(std_ratio), reps=int(reps),
            )
        )
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


_SVG_STYLE = (
    "text{font-family:Helvetica,Arial,sans-serif;font-size:12px;fill:#222}"
    ".axis{stroke:#222;stroke-width:1}"
    ".grid{stroke:#ddd;stroke-width:0.5}"
)
_SERIES_COLORS = {"symmetric": "#1f77b4", "personalized": "#d62728"}


def write_svg(record: ExperimentRecord, path: Path, title: Optional[str] = None) -> Path:
    """Standalone SVG 1.1 line plot of mean ratio versus location, with error bars.

    The plotted numbers are embedded as XML comments so the figure carries
    its own data.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    width, height = 640, 420
    left, right, top, bottom = 70, 20, 30, 50
    plot_w = width - left - right
    plot_h = height - top - bottom

    ms = sorted({row.m for row in record.aggregates})
    x_lo, x_hi = (min(ms), max(ms)) if len(ms) > 1 else (ms[0] - 0.5, ms[0] + 0.5)
    y_lo, y_hi = 0.0, 1.0

    def sx(m):
        return left + (m - x_lo) / (x_hi - x_lo) * plot_w

    def sy(r):
        return top + (y_hi - min(max(r, y_lo), y_hi)) / (y_hi - y_lo) * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<style>{_SVG_STYLE}</style>",
        f"<!-- config: {record.config_digest} seed: {record.seed} -->",
    ]
    for row in record.aggregates:
        parts.append(
            f"<!-- data: m={_fmt(row.m)} family={row.family} mean_ratio={_fmt(row.mean_ratio)} "
            f"std_ratio={_fmt(row.std_ratio)} reps={row.reps} -->"
        )
    parts.append(
        f'<text x="{width/2:.1f}" y="18" text-anchor="middle">'
        f"{title or record.kind + ': personalized vs symmetric'}</text>"
    )
    # Axes, gridlines, ticks.
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = sy(frac)
        parts.append(f'<line class="grid" x1="{left}" y1="{y:.1f}" x2="{left+plot_w}" y2="{y:.1f}"/>')
        parts.append(f'<text x="{left-8}" y="{y+4:.1f}" text-anchor="end">{frac:g}</text>')
    for m in ms:
        x = sx(m)
        parts.append(f'<text x="{x:.1f}" y="{top+plot_h+18}" text-anchor="middle">{m:g}</text>')
    parts.append(f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{top+plot_h}"/>')
    parts.append(f'<line class="axis" x1="{left}" y1="{top+plot_h}" x2="{left+plot_w}" y2="{top+plot_h}"/>')
    parts.append(
        f'<text x="{left+plot_w/2:.1f}" y="{height-12}" text-anchor="middle">lognormal location of accuracy weights</text>'
    )
    parts.append(
        f'<text x="16" y="{top+plot_h/2:.1f}" transform="rotate(-90 16 {top+plot_h/2:.1f})" '
        f'text-anchor="middle">achieved / optimal informativeness</text>'
    )
    # Series.
    for fam in FAMILIES:
        pts = [(row.m, row.mean_ratio, row.std_ratio) for row in record.aggregates if row.family == fam]
        pts.sort()
        if not pts:
            continue
        color = _SERIES_COLORS[fam]
        poly = " ".join(f"{sx(m):.2f},{sy(r):.2f}" for m, r, _ in pts)
        parts.append(f'<polyline points="{poly}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        for m, r, s in pts:
            x, y0v, y1v = sx(m), sy(r - s), sy(r + s)
            parts.append(f'<line x1="{x:.2f}" y1="{y0v:.2f}" x2="{x:.2f}" y2="{y1v:.2f}" stroke="{color}" stroke-width="1"/>')
            for yv in (y0v, y1v):
                parts.append(f'<line x1="{x-3:.2f}" y1="{yv:.2f}" x2="{x+3:.2f}" y2="{yv:.2f}" stroke="{color}" stroke-width="1"/>')
            parts.append(f'<circle cx="{x:.2f}" cy="{sy(r):.2f}" r="2.5" fill="{color}"/>')
    # Legend.
    for k, fam in enumerate(FAMILIES):
        y = top + 14 + 16 * k
        color = _SERIES_COLORS[fam]
        parts.append(f'<line x1="{left+plot_w-130}" y1="{y}" x2="{left+plot_w-106}" y2="{y}" stroke="{color}" stroke-width="1.8"/>')
        parts.append(f'<text x="{left+plot_w-100}" y="{y+4}">{fam}</text>')
    parts.append("</svg>")
    path.write_bytes(("\n".join(parts) + "\n").encode("utf-8"))
    return path


def emit_outputs(record: ExperimentRecord, out_dir: Path, formats: Sequence[str] = ("csv", "svg")) -> list:
    """Write the requested artifacts into ``out_dir`` and return their paths."""
    out_dir = Path(out_dir)
    written = []
    for fmt in formats:
        if fmt == "csv":
            written.append(write_csv(record, out_dir / f"{record.kind}_ratios.csv"))
        elif fmt == "svg":
            written.append(write_svg(record, out_dir / f"{record.kind}_ratios.svg"))
        else:
            raise ConfigError(f"unknown output format {fmt!r}")
    return written


def load_raw_config(path) -> dict:
    """Parse and minimally validate a TOML experiment/config file."""
    path = Path(path)
    try:
        raw = _toml.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "kind" not in raw:
        raise ConfigError("config needs a top-level 'kind'")
    return raw


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing '{key}' in [{where}]")
    return table[key]


def build_setting(raw: dict):
    """Construct the typed setting named by the config's kind."""
    kind = raw["kind"]
    s = raw.get("setting")
    if not isinstance(s, dict):
        raise ConfigError("config needs a [setting] table")
    try:
        if kind in ("dpmean", "altmean"):
            return DpMeanSetting(
                n_clients=int(_require(s, "n_clients", "setting")),
                n_samples=int(_require(s, "n_samples", "setting")),
                sigma=float(_require(s, "sigma", "setting")),
                support_width=float(_require(s, "support_width", "setting")),
            )
        if kind == "bayesmean":
            return BayesSetting(
                n_clients=int(_require(s, "n_clients", "setting")),
                n_samples=int(_require(s, "n_samples", "setting")),
                sigma=float(_require(s, "sigma", "setting")),
                prior_precision=float(_require(s, "prior_precision", "setting")),
            )
        if kind in ("dpsgd", "altsgd"):
            from .altutility import AltSgdSetting
            from .dpsgd import SgdSetting

            base = SgdSetting(
                n_clients=int(_require(s, "n_clients", "setting")),
                n_samples=int(_require(s, "n_samples", "setting")),
                dim=int(_require(s, "dim", "setting")),
                smoothness=float(_require(s, "smoothness", "setting")),
                strong_convexity=float(_require(s, "strong_convexity", "setting")),
                diameter=float(_require(s, "diameter", "setting")),
                sigma=float(_require(s, "sigma", "setting")),
                grad_support=float(_require(s, "grad_support", "setting")),
            )
            if kind == "dpsgd":
                return base
            return AltSgdSetting(
                base=base,
                var_const=float(_require(s, "var_const", "setting")),
                var_slope=float(s.get("var_slope", 0.0)),
                tail_const=float(_require(s, "tail_const", "setting")),
            )
        if kind == "chung":
            return None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [setting]: {exc}") from exc
    raise ConfigError(f"unknown kind {kind!r}")


def build_lambda_model(raw: dict) -> LambdaModel:
    t = raw.get("lambda_model")
    if not isinstance(t, dict):
        raise ConfigError("config needs a [lambda_model] table")
    try:
        return LambdaModel(
            kind=str(_require(t, "kind", "lambda_model")),
            location=float(t.get("location", 0.0)),
            values=tuple(float(v) for v in t.get("values", ())),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [lambda_model]: {exc}") from exc


def build_experiment_config(raw: dict, seed_override=None, out_override=None) -> ExperimentConfig:
    kind = raw["kind"]
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"the sweep experiment supports kinds {EXPERIMENT_KINDS}, got {kind!r}")
    exp = raw.get("experiment")
    if not isinstance(exp, dict):
        raise ConfigError("config needs an [experiment] table")
    try:
        m_grid = tuple(float(v) for v in exp.get("m_grid", (-2.0, -1.0, 0.0, 1.0, 2.0, 3.0)))
        repetitions = int(_require(exp, "repetitions", "experiment"))
        grid_points = int(exp.get("grid_points", 512))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [experiment]: {exc}") from exc
    seed = int(raw.get("seed", 0)) if seed_override is None else int(seed_override)
    out_dir = Path(raw.get("out", "results") if out_override is None else out_override)
    return ExperimentConfig(
        kind=kind,
        setting=build_setting(raw),
        lambda_model=build_lambda_model(raw),
        m_grid=m_grid,
        repetitions=repetitions,
        grid_points=grid_points,
        seed=seed,
        out_dir=out_dir,
    )
