"""Scenario engine: single solves, parameter sweeps and result emission.

Reported energy adds the UAV propulsion term (weighted by the UAV weight) on
top of the optimization objective unless the scenario disables it; the
propulsion term does not depend on the decision variables, so the optimum is
unchanged either way.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from . import optimizer
from .protocol import (
    baseline_allocation,
    check_feasible,
    energy_breakdown,
    tccd,
    time_breakdown,
    wtec,
)
from .scenario import ScenarioConfig, build_instance, echo_config, validate

COLUMNS = (
    "sweep_value",
    "mode",
    "wtec_J",
    "tccd_s",
    "feasible",
    "iterations",
    "e_local_J",
    "e_offload_J",
    "e_relay_J",
    "e_uav_compute_J",
    "e_down_uav_J",
    "e_down_rsu_J",
    "e_flight_J",
    "t_offload_s",
    "t_relay_s",
    "t_uav_compute_s",
    "t_down_uav_s",
    "t_down_rsu_s",
    "t_local_compute_s",
)

# Sweep axes that fan out to several config fields.
_AXIS_ALIASES = {
    "antennas": ("antennas_vehicle", "antennas_uav", "antennas_rsu"),
    "task_bits": ("task_bits", "min_bits"),
}

_INT_FIELDS = {"vehicles", "antennas_vehicle", "antennas_uav", "antennas_rsu",
               "max_iterations", "seed"}


@dataclass
class SweepResult:
    """Rows of one parameter sweep, ordered by sweep value."""

    axis: str
    values: list
    rows: list = field(default_factory=list)
    config: ScenarioConfig | None = None


def _row(sweep_value, mode, alloc, inst, cfg, iterations, feasible, extra_energy) -> dict:
    row = {
        "sweep_value": float(sweep_value),
        "mode": mode,
        "wtec_J": wtec(alloc, inst) + extra_energy,
        "tccd_s": tccd(alloc, inst, include_local=cfg.tccd_include_local),
        "feasible": bool(feasible),
        "iterations": int(iterations),
    }
    row.update(energy_breakdown(alloc, inst))
    row["e_flight_J"] = inst.flight_energy_total()
    row.update(time_breakdown(alloc, inst))
    return row


def solve_scenario(cfg: ScenarioConfig, sweep_value: float = 0.0) -> dict:
    """Run one scenario in its configured mode and return a result row."""
    inst = build_instance(cfg)
    extra = cfg.weight_uav * inst.flight_energy_total() if cfg.include_propulsion else 0.0
    if cfg.mode == "baseline":
        alloc = baseline_allocation(inst)
        verdict = check_feasible(alloc, inst)
        return _row(sweep_value, "baseline", alloc, inst, cfg, 0, verdict.feasible, extra)
    report = optimizer.algorithm1(
        inst, eps=cfg.epsilon, max_iterations=cfg.max_iterations
    )
    return _row(sweep_value, cfg.mode, report.allocation, inst, cfg,
                report.iterations, report.feasible, extra)


def solve_report(cfg: ScenarioConfig):
    """Full optimizer report plus the built instance (for verification)."""
    inst = build_instance(cfg)
    report = optimizer.algorithm1(inst, eps=cfg.epsilon, max_iterations=cfg.max_iterations)
    return report, inst


def set_axis(cfg: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """Fresh config with one sweep axis changed and revalidated."""
    out = copy.deepcopy(cfg)
    names = _AXIS_ALIASES.get(axis, (axis,))
    for name in names:
        if not hasattr(out, name):
            raise ValueError(f"unknown sweep axis {axis!r}")
        current = getattr(out, name)
        if isinstance(current, np.ndarray):
            setattr(out, name, np.full_like(current, float(value)))
        elif name in _INT_FIELDS:
            setattr(out, name, int(value))
        else:
            setattr(out, name, float(value))
    return validate(out)


def run_sweep(cfg: ScenarioConfig, axis: str, values, include_baseline: bool = False) -> SweepResult:
    """Solve the scenario at each axis value; solver failures at a point are
    recorded as infeasible rows instead of aborting the sweep."""
    result = SweepResult(axis=axis, values=[float(v) for v in values], config=cfg)
    for value in sorted(float(v) for v in values):
        point_cfg = set_axis(cfg, axis, value)
        inst = None
        try:
            row = solve_scenario(point_cfg, sweep_value=value)
        except (optimizer.InfeasibleAllocation, optimizer.IterationCapExceeded) as exc:
            inst = build_instance(point_cfg)
            row = {c: float("nan") for c in COLUMNS}
            row.update(
                sweep_value=value,
                mode=point_cfg.mode,
                feasible=False,
                iterations=getattr(getattr(exc, "report", None), "iterations", 0) or 0,
            )
        result.rows.append(row)
        if include_baseline and point_cfg.mode != "baseline":
            base_cfg = copy.deepcopy(point_cfg)
            base_cfg.mode = "baseline"
            result.rows.append(solve_scenario(base_cfg, sweep_value=value))
    return result


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def emit_results(result: SweepResult, fmt: str, path) -> None:
    """Write a sweep as CSV or JSON with the resolved config echoed in.

    Floats carry 9 significant digits; JSON numbers are quantized the same
    way so a reload compares equal to the file.
    """
    if fmt == "csv":
        lines = []
        if result.config is not None:
            for cfg_line in echo_config(result.config).strip().splitlines():
                lines.append(f"# {cfg_line}" if cfg_line else "#")
        lines.append(",".join(COLUMNS))
        for row in result.rows:
            lines.append(",".join(_fmt(row.get(c, float("nan"))) for c in COLUMNS))
        text = "\n".join(lines) + "\n"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    elif fmt == "json":
        def q(v):
            if isinstance(v, bool) or not isinstance(v, float):
                return v
            return float(f"{v:.9g}")

        payload = {
            "config": result.config.as_dict() if result.config else None,
            "axis": result.axis,
            "values": [q(v) for v in result.values],
            "columns": list(COLUMNS),
            "rows": [{c: q(row.get(c, float("nan"))) for c in COLUMNS} for row in result.rows],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, allow_nan=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown output format {fmt!r}")


def load_results(path) -> dict:
    """Reload a JSON result file."""
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
