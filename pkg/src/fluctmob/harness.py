"""Experiment configuration, replica orchestration, persistence, and reports.

Configuration is a flat ``key = value`` text format (CLI flags override file
values). A run executes a grid of (eps, h) experiments with R replicas each
and writes one CSV row per estimate plus a manifest; identical configuration
and seed produce byte-identical CSVs regardless of worker count.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .estimate import BrownianParams, EstimateRecord, rate_fit, run_qv_experiment
from .fhd import NoiseSpec, SigmaReg, SpdeParams, default_grid
from .lattice import (
    JUMP_WEIGHT_TAGS,
    Torus,
    TrigExpr,
    format_trig,
    parse_trig,
    require_profile_in_unit_interval,
)
from .brownian import BM_VARIANCE_TAGS
from .ssep import SsepParams

MODELS = ("ssep", "brownian", "spde", "dk")

CSV_COLUMNS = [
    "model",
    "d",
    "n",
    "grid_m",
    "t",
    "h",
    "eps",
    "delta",
    "reg_n",
    "replicas",
    "q_hat",
    "q_se",
    "mobility_ref",
    "abs_error",
    "seed",
    "status",
]

_CONFIG_KEYS = {
    "model",
    "d",
    "n",
    "grid_m",
    "t",
    "h",
    "eps",
    "delta",
    "reg_n",
    "jump_weight",
    "bm_variance",
    "rho0",
    "phi",
    "replicas",
    "seed",
    "workers",
    "out",
    "manifest",
}


class ConfigError(ValueError):
    """Configuration rejection carrying the offending key and position."""

    def __init__(self, key: str, message: str, position: str = "") -> None:
        where = f" ({position})" if position else ""
        super().__init__(f"config key {key!r}{where}: {message}")
        self.key = key
        self.position = position


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    d: int
    t: float
    h_grid: tuple[float, ...]
    rho0: TrigExpr
    phi: TrigExpr
    replicas: int
    seed: int
    n: int | None = None
    grid_m: int | None = None
    eps_grid: tuple[float, ...] = ()
    delta: float | None = None
    reg_n: int | None = None
    jump_weight: str = "half"
    bm_variance: str = "dt"
    workers: int = 1
    out: str = "experiments.csv"
    manifest: str | None = None

    def manifest_path(self) -> str:
        return self.manifest if self.manifest else self.out + ".manifest"


def parse_config_text(text: str) -> dict[str, tuple[str, str]]:
    """Parse flat ``key = value`` lines into {key: (value, position)}."""
    mapping: dict[str, tuple[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], "expected 'key = value'", f"line {lineno}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(key, "unknown key", f"line {lineno}")
        mapping[key] = (value, f"line {lineno}")
    return mapping


def _get(raw: dict[str, tuple[str, str]], key: str, default: str | None = None) -> tuple[str | None, str]:
    if key in raw:
        return raw[key]
    return default, "default"


def _parse_float_list(value: str, key: str, position: str) -> tuple[float, ...]:
    try:
        items = tuple(float(v.strip()) for v in value.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(key, str(exc), position) from None
    if not items:
        raise ConfigError(key, "grid is empty", position)
    return items


def build_config(raw: dict[str, tuple[str, str]], overrides: dict[str, str] | None = None) -> ExperimentConfig:
    """Validate raw key/value pairs (flags in `overrides` win) into a config."""
    merged = dict(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _CONFIG_KEYS:
            raise ConfigError(key, "unknown key", "flag")
        merged[key] = (str(value), "flag")

    def need(key: str) -> tuple[str, str]:
        if key not in merged:
            raise ConfigError(key, "required key is missing")
        return merged[key]

    model, pos = need("model")
    if model not in MODELS:
        raise ConfigError("model", f"{model!r} is not one of {MODELS}", pos)

    def as_int(key: str, default: int | None = None, minimum: int | None = None) -> int | None:
        value, p = _get(merged, key, None if default is None else str(default))
        if value is None:
            return None
        try:
            out = int(value)
        except ValueError:
            raise ConfigError(key, f"not an integer: {value!r}", p) from None
        if minimum is not None and out < minimum:
            raise ConfigError(key, f"must be >= {minimum}", p)
        return out

    def as_float(key: str, default: float | None = None) -> float | None:
        value, p = _get(merged, key, None if default is None else str(default))
        if value is None:
            return None
        try:
            return float(value)
        except ValueError:
            raise ConfigError(key, f"not a number: {value!r}", p) from None

    d = as_int("d", 1, minimum=1)
    t_val, t_pos = need("t")
    try:
        t = float(t_val)
    except ValueError:
        raise ConfigError("t", f"not a number: {t_val!r}", t_pos) from None
    h_val, h_pos = need("h")
    h_grid = _parse_float_list(h_val, "h", h_pos)
    for h in h_grid:
        if not 0 < h < t:
            raise ConfigError("h", f"grid point {h:g} violates 0 < h < t = {t:g}", h_pos)

    rho0_val, rho0_pos = need("rho0")
    phi_val, phi_pos = need("phi")
    try:
        rho0 = parse_trig(rho0_val, d)
    except ValueError as exc:
        raise ConfigError("rho0", str(exc), rho0_pos) from None
    try:
        phi = parse_trig(phi_val, d)
    except ValueError as exc:
        raise ConfigError("phi", str(exc), phi_pos) from None

    if "seed" not in merged:
        raise ConfigError("seed", "required (reproducibility is mandatory; there is no entropy default)")
    seed = as_int("seed", minimum=0)
    replicas = as_int("replicas", 100, minimum=2)
    workers = as_int("workers", 1, minimum=1)

    jump_weight, jw_pos = _get(merged, "jump_weight", "half")
    if jump_weight not in JUMP_WEIGHT_TAGS:
        raise ConfigError("jump_weight", f"{jump_weight!r} not in {JUMP_WEIGHT_TAGS}", jw_pos)
    bm_variance, bv_pos = _get(merged, "bm_variance", "dt")
    if bm_variance not in BM_VARIANCE_TAGS:
        raise ConfigError("bm_variance", f"{bm_variance!r} not in {BM_VARIANCE_TAGS}", bv_pos)

    n = as_int("n", minimum=2) if model in ("ssep", "brownian") else None
    grid_m = None
    eps_grid: tuple[float, ...] = ()
    delta = None
    reg_n = None
    if model == "ssep":
        if n is None:
            raise ConfigError("n", "required for the exclusion model")
        try:
            require_profile_in_unit_interval(rho0)
        except ValueError as exc:
            raise ConfigError("rho0", str(exc), rho0_pos) from None
    elif model == "brownian":
        if n is None:
            raise ConfigError("n", "required for the particle model (particle count)")
    else:
        eps_val, eps_pos = need("eps")
        eps_grid = _parse_float_list(eps_val, "eps", eps_pos)
        for eps in eps_grid:
            if eps <= 0:
                raise ConfigError("eps", "noise amplitudes must be positive", eps_pos)
        delta = as_float("delta")
        if delta is None or delta <= 0:
            raise ConfigError("delta", "positive correlation length required")
        reg_n = as_int("reg_n", 16, minimum=2)
        grid_m = as_int("grid_m")
        if grid_m is None:
            grid_m = default_grid(NoiseSpec(delta), d)

    out, _ = _get(merged, "out", "experiments.csv")
    manifest, _ = _get(merged, "manifest", None)
    return ExperimentConfig(
        model=model,
        d=d,
        t=t,
        h_grid=h_grid,
        rho0=rho0,
        phi=phi,
        replicas=replicas,
        seed=seed,
        n=n,
        grid_m=grid_m,
        eps_grid=eps_grid,
        delta=delta,
        reg_n=reg_n,
        jump_weight=jump_weight,
        bm_variance=bm_variance,
        workers=workers,
        out=out,
        manifest=manifest,
    )


def parse_config(text: str, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    return build_config(parse_config_text(text), overrides)


def model_params(config: ExperimentConfig, eps: float | None):
    if config.model == "ssep":
        return SsepParams(Torus(config.d, config.n), config.rho0, config.jump_weight)
    if config.model == "brownian":
        return BrownianParams(config.n, config.rho0, config.bm_variance)
    kind = "dk" if config.model == "dk" else "ssep"
    return SpdeParams(
        d=config.d,
        grid_m=config.grid_m,
        eps=eps,
        rho0=config.rho0,
        noise=NoiseSpec(config.delta),
        sigma=SigmaReg(kind, config.reg_n),
    )


def experiment_grid(config: ExperimentConfig) -> list[tuple[float | None, float]]:
    """Deterministic experiment ordering: eps ascending (outer), h ascending."""
    eps_axis: tuple[float | None, ...] = config.eps_grid or (None,)
    return [(eps, h) for eps in sorted(eps_axis, key=lambda e: (e is not None, e)) for h in sorted(config.h_grid)]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)  # shortest round-trip form: byte-stable and exact
    return str(value)


def record_row(record: EstimateRecord) -> str:
    return ",".join(
        _fmt(getattr(record, col)) for col in CSV_COLUMNS
    )


def render_csv(records: list[EstimateRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(record_row(r) for r in records)
    return "\n".join(lines) + "\n"


def render_manifest(entries: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in entries.items())


def parse_manifest(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        key, value = line.split(" = ", 1)
        out[key] = value
    return out


def run(config: ExperimentConfig, write_files: bool = True) -> tuple[list[EstimateRecord], str, str]:
    """Execute the experiment grid and render CSV plus manifest."""
    t0 = time.monotonic()
    records: list[EstimateRecord] = []
    for index, (eps, h) in enumerate(experiment_grid(config)):
        params = model_params(config, eps)
        records.append(
            run_qv_experiment(
                params,
                config.t,
                h,
                config.phi,
                config.replicas,
                config.seed,
                experiment_index=index,
                workers=config.workers,
            )
        )
    csv_text = render_csv(records)
    entries: dict[str, str] = {
        "tool_version": __version__,
        "model": config.model,
        "d": str(config.d),
        "n": _fmt(config.n),
        "grid_m": _fmt(config.grid_m),
        "t": _fmt(config.t),
        "h": ",".join(_fmt(h) for h in config.h_grid),
        "eps": ",".join(_fmt(e) for e in config.eps_grid),
        "delta": _fmt(config.delta),
        "reg_n": _fmt(config.reg_n),
        "jump_weight": config.jump_weight,
        "bm_variance": config.bm_variance,
        "rho0": format_trig(config.rho0),
        "phi": format_trig(config.phi),
        "replicas": str(config.replicas),
        "seed": str(config.seed),
        "workers": str(config.workers),
        "records": str(len(records)),
        "wall_clock_s": f"{time.monotonic() - t0:.3f}",
    }
    for i, record in enumerate(records):
        digest = hashlib.sha256(record_row(record).encode()).hexdigest()
        entries[f"record_{i}_sha256"] = digest
        entries[f"record_{i}_replicas_ok"] = str(record.replicas_ok)
        entries[f"record_{i}_replicas_aborted"] = str(record.replicas_aborted)
    manifest_text = render_manifest(entries)
    if write_files:
        Path(config.out).write_text(csv_text)
        Path(config.manifest_path()).write_text(manifest_text)
    return records, csv_text, manifest_text


# -- reporting ------------------------------------------------------------------------


def _load_rows(path: str) -> list[dict[str, str]]:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    header = lines[0].split(",")
    for col in CSV_COLUMNS:
        if col not in header:
            raise ValueError(f"{path}: missing column {col!r}")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        rows.append(dict(zip(header, line.split(","))))
    return rows


def report(csv_paths, out_dir: str | None = None) -> str:
    """Group records, fit convergence rates, and emit plain-text plot data.

    Groups share (model, d, n, grid_m, eps, delta, reg_n); within a group the
    error is fitted against h, and across matching groups against n. Two-column
    (scale, error) files are written next to the summary for offline plotting.
    """
    rows: list[dict[str, str]] = []
    for path in csv_paths:
        rows.extend(_load_rows(path))
    lines: list[str] = []
    outputs: dict[str, str] = {}
    groups: dict[tuple, list[dict[str, str]]] = {}
    for row in rows:
        if row["status"] != "ok":
            lines.append(f"note: skipping invalid record (model={row['model']}, h={row['h']})")
            continue
        key = tuple(row[c] for c in ("model", "d", "n", "grid_m", "eps", "delta", "reg_n"))
        groups.setdefault(key, []).append(row)
    for key in sorted(groups):
        model, d, n, grid_m, eps, delta, reg_n = key
        tag_bits = [model, f"d{d}"]
        if n:
            tag_bits.append(f"n{n}")
        if grid_m:
            tag_bits.append(f"m{grid_m}")
        if eps:
            tag_bits.append(f"eps{eps}")
        tag = "_".join(tag_bits).replace(".", "p").replace("-", "m")
        rows_h = sorted(groups[key], key=lambda r: float(r["h"]))
        pts = [(float(r["h"]), float(r["abs_error"])) for r in rows_h]
        lines.append(f"group {tag}: {len(pts)} records (delta={delta or '-'}, reg_n={reg_n or '-'})")
        for h, err in pts:
            lines.append(f"  h={h:g} abs_error={err:g}")
        data = "".join(f"{h:.17g} {e:.17g}\n" for h, e in pts)
        outputs[f"{tag}_vs_h.dat"] = data
        positive = [(h, e) for h, e in pts if e > 0]
        if len(positive) >= 3:
            slope, _, r2 = rate_fit(positive)
            lines.append(f"  fit vs h: slope={slope:.3f} r2={r2:.3f}")
        else:
            lines.append("  fit vs h: skipped (needs >= 3 positive points)")
    # cross-group fits against lattice size at fixed h
    by_scale: dict[tuple, list[tuple[float, float]]] = {}
    for key, grp in groups.items():
        model, d, n, grid_m, eps, delta, reg_n = key
        scale = n or grid_m
        if not scale:
            continue
        for row in grp:
            k2 = (model, d, eps, delta, reg_n, row["h"])
            by_scale.setdefault(k2, []).append((float(scale), float(row["abs_error"])))
    for k2 in sorted(by_scale):
        pts = sorted(by_scale[k2])
        if len(pts) < 3 or any(e <= 0 for _, e in pts):
            continue
        slope, _, r2 = rate_fit(pts)
        model, d, eps, delta, reg_n, h = k2
        lines.append(f"group {model}_d{d}_h{h}: fit vs n: slope={slope:.3f} r2={r2:.3f}")
        outputs[f"{model}_d{d}_h{h.replace('.', 'p')}_vs_n.dat"] = "".join(
            f"{s:.17g} {e:.17g}\n" for s, e in pts
        )
    summary = "\n".join(lines) + "\n"
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.txt").write_text(summary)
        for name, data in outputs.items():
            (out / name).write_text(data)
    return summary
