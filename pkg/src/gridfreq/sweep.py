"""Parameter sweeps: full-factorial grids of scenario overrides."""

from __future__ import annotations

import itertools
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from typing import List, Tuple

from .config_io import ConfigError, METRIC_COLUMNS, metrics_row
from .engine import simulate
from .metrics import DEFAULT_SETTLE_WINDOW_S, metrics_from_trace
from .model import ScenarioConfig, build_fleet, validate_scenario
from .tactics import TacticSpec, apply_tactic, parse_tactic_token

_TOKEN_RE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?$")


def set_config_value(config, path: str, value):
    """Return a copy of ``config`` with the dotted ``path`` replaced.

    Paths address dataclass fields, with ``[i]`` indexing into sequences,
    e.g. ``storage[0].max_mw`` or ``fleet_template[2].droop``.
    """
    tokens = []
    for part in path.split("."):
        m = _TOKEN_RE.match(part)
        if not m:
            raise ValueError(f"malformed path segment '{part}' in '{path}'")
        tokens.append((m.group(1), None if m.group(2) is None else int(m.group(2))))

    def _set(obj, toks):
        name, idx = toks[0]
        if not hasattr(obj, name):
            raise ValueError(f"'{path}': {type(obj).__name__} has no field '{name}'")
        attr = getattr(obj, name)
        if idx is not None:
            seq = list(attr)
            if idx >= len(seq):
                raise ValueError(f"'{path}': index {idx} out of range "
                                 f"({len(seq)} elements)")
            seq[idx] = value if len(toks) == 1 else _set(seq[idx], toks[1:])
            return replace(obj, **{name: tuple(seq)})
        if len(toks) == 1:
            return replace(obj, **{name: value})
        return replace(obj, **{name: _set(attr, toks[1:])})

    return _set(config, tokens)


@dataclass(frozen=True)
class SweepAxis:
    path: str
    values: Tuple


@dataclass(frozen=True)
class SweepSpec:
    """A grid of overrides on one base scenario.

    Tactics apply to the base once, before sweeping; each cell then applies
    its axis values and re-validates, so every simulated config satisfies the
    model invariants.
    """

    base: ScenarioConfig
    axes: Tuple[SweepAxis, ...]
    metrics: Tuple[str, ...] = tuple(METRIC_COLUMNS)
    tactics: Tuple[TacticSpec, ...] = ()


@dataclass
class SweepResult:
    columns: List[str]
    rows: List[dict]


def _eval_cell(base: ScenarioConfig, paths, metric_names, settle_window, values):
    row = dict(zip(paths, values))
    try:
        cfg = base
        for p, v in zip(paths, values):
            cfg = set_config_value(cfg, p, v)
        validate_scenario(cfg)
        if cfg.storage:
            # convenience columns for discharge-duration studies
            row["energy_mws"] = cfg.storage[0].energy_mws
            row["duration_s"] = cfg.storage[0].energy_mws / cfg.storage[0].max_mw
        trace = simulate(build_fleet(cfg), cfg)
        m = metrics_from_trace(trace, settle_window_s=settle_window)
        row.update({k: v for k, v in metrics_row(m).items() if k in metric_names})
        row["error"] = None
    except Exception as exc:
        for name in metric_names:
            row.setdefault(name, None)
        row["error"] = str(exc)
    return row


def run_sweep(spec: SweepSpec, jobs: int = 1,
              settle_window_s=DEFAULT_SETTLE_WINDOW_S) -> SweepResult:
    """Evaluate the full-factorial grid; cells are independent.

    Per-cell failures land in the ``error`` column without disturbing the
    rest of the grid.  Row order is the product order of the axes and does
    not depend on ``jobs``.
    """
    base = spec.base
    for tactic in spec.tactics:
        base = apply_tactic(base, tactic)
    validate_scenario(base)

    paths = [a.path for a in spec.axes]
    has_storage = bool(base.storage) or any("storage" in p for p in paths)
    extras = ["energy_mws", "duration_s"] if has_storage else []
    metric_names = [m for m in spec.metrics if m in METRIC_COLUMNS]
    columns = paths + extras + metric_names + ["error"]

    cells = list(itertools.product(*[a.values for a in spec.axes]))
    worker = partial(_eval_cell, base, paths, metric_names, settle_window_s)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(worker, cells))
    else:
        rows = [worker(cell) for cell in cells]
    return SweepResult(columns=columns, rows=rows)


def parse_sweep_spec(text: str, scenario_loader, source: str = "<string>") -> Tuple[SweepSpec, int]:
    """Parse a sweep file; returns (spec, default jobs).

    ``scenario_loader`` resolves a base given by name/path; an inline object
    is parsed as a scenario config.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([(source, f"syntax error at line {exc.lineno}, "
                            f"column {exc.colno}: {exc.msg}")]) from None
    if not isinstance(raw, dict):
        raise ConfigError([(source, "top level must be an object")])
    errors = []

    base_raw = raw.pop("base", None)
    base = None
    if base_raw is None:
        errors.append(("base", "missing required key"))
    elif isinstance(base_raw, str):
        base = scenario_loader(base_raw)
    elif isinstance(base_raw, dict):
        from .config_io import parse_config
        base = parse_config(json.dumps(base_raw), source=f"{source}:base")
    else:
        errors.append(("base", "expected a scenario name or object"))

    tactics = []
    for i, token in enumerate(raw.pop("tactics", [])):
        if not isinstance(token, str):
            errors.append((f"tactics[{i}]", "expected a tactic name"))
        else:
            tactics.append(parse_tactic_token(token))

    axes = []
    axes_raw = raw.pop("axes", None)
    if not isinstance(axes_raw, list) or not axes_raw:
        errors.append(("axes", "expected a non-empty array"))
    else:
        if len(axes_raw) > 2:
            errors.append(("axes", "at most two axes are supported"))
        for i, ax in enumerate(axes_raw or []):
            if not isinstance(ax, dict) or "path" not in ax or "values" not in ax:
                errors.append((f"axes[{i}]", "expected {path, values}"))
                continue
            vals = ax["values"]
            if not isinstance(vals, list) or not vals:
                errors.append((f"axes[{i}].values", "expected a non-empty array"))
                continue
            unknown = set(ax) - {"path", "values"}
            for key in sorted(unknown):
                errors.append((f"axes[{i}].{key}", "unknown key"))
            axes.append(SweepAxis(path=str(ax["path"]), values=tuple(vals)))

    metrics = raw.pop("metrics", list(METRIC_COLUMNS))
    if not isinstance(metrics, list):
        errors.append(("metrics", "expected an array"))
        metrics = list(METRIC_COLUMNS)
    for m in metrics:
        if m not in METRIC_COLUMNS:
            errors.append(("metrics", f"unknown metric '{m}' "
                           f"(expected one of {', '.join(METRIC_COLUMNS)})"))
    jobs = raw.pop("jobs", 1)
    if not isinstance(jobs, int) or jobs < 1:
        errors.append(("jobs", "expected a positive integer"))
        jobs = 1
    for key in raw:
        errors.append((key, "unknown key"))
    if errors:
        raise ConfigError(errors)
    return SweepSpec(base=base, axes=tuple(axes), metrics=tuple(metrics),
                     tactics=tuple(tactics)), jobs
