"""Scenario runner: config files, flows to disk, sweep orchestration.

A scenario is one of ``relax`` (constant field), ``switch`` (field sign flips
once at ``switch_time``), ``q_sweep`` (independent relaxations per wave
number) or ``rho_sweep`` (independent relaxations per regularization weight,
compared at the final step).  Config files are plain ``key = value`` lines
with ``#`` comments; every parameter and flow field is addressable by name.
All outputs are plain CSV, JSON, and SVG.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import (
    DEFAULT_MELT_THRESHOLD,
    DiagnosticsRecord,
    diagnose,
    ratio_sweep,
    rho_cauchy_check,
)
from .energy import EnergyBreakdown, energy_breakdown
from .errors import ChevronError, MissingArtifact, ParamsError, ParseError, ValidationError
from .fields import State, make_grid
from .flow import DissipationLedger, FlowResult, run_flow
from .initialdata import (
    build_initial_state,
    grid_for_wave_number,
    initial_energy_sweep,
    load_initial_state,
    loglog_slope,
)
from .params import FlowConfig, PhysicalParams, validate, validate_flow_config
from .svg import write_line_plot

KINDS = ("relax", "switch", "q_sweep", "rho_sweep")

_PARAM_FIELDS = {f.name: f.type for f in dataclasses.fields(PhysicalParams)}
_FLOW_FIELDS = {f.name: f.type for f in dataclasses.fields(FlowConfig)}
_INT_KEYS = {"n_steps", "inner_max_iters", "n_nodes", "snapshot_every", "seed"}
_BOOL_KEYS = {"precondition"}
_SCENARIO_KEYS = {
    "kind",
    "switch_time",
    "sweep_values",
    "output_dir",
    "snapshot_every",
    "melt_threshold",
    "seed",
    "initial_state",
}


@dataclass(frozen=True)
class Scenario:
    kind: str
    params: PhysicalParams
    flow: FlowConfig
    switch_time: Optional[float] = None
    sweep_values: tuple[float, ...] = ()
    output_dir: str = "out"
    snapshot_every: int = 10
    melt_threshold: float = DEFAULT_MELT_THRESHOLD
    seed: int = 0
    initial_state: Optional[str] = None


@dataclass
class ScenarioResult:
    ok: bool
    ledger_ok: bool
    output_dir: str
    error: Optional[str] = None
    details: dict = field(default_factory=dict)


def _convert(key: str, value: str, lineno: int):
    try:
        if key in _BOOL_KEYS:
            low = value.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(value)
        if key in _INT_KEYS:
            return int(value)
        if key == "sweep_values":
            return tuple(float(v) for v in value.replace(";", ",").split(",") if v.strip())
        if key in ("kind", "output_dir", "initial_state"):
            return value
        return float(value)
    except ValueError:
        raise ParseError(lineno, f"invalid value {value!r} for key {key!r}") from None


def _validate_scenario(kind, param_kwargs, flow_kwargs, scen_kwargs) -> Scenario:
    kind = kind.replace("-", "_")
    if kind not in KINDS:
        raise ValidationError("kind", f"kind must be one of {KINDS}, got {kind!r}")
    try:
        params = validate(PhysicalParams(**param_kwargs))
    except ParamsError as err:
        raise ValidationError(getattr(err, "field", "params"), str(err)) from err
    try:
        flow = validate_flow_config(FlowConfig(**flow_kwargs))
    except ParamsError as err:
        raise ValidationError(getattr(err, "field", "flow"), str(err)) from err
    sc = Scenario(kind=kind, params=params, flow=flow, **scen_kwargs)
    if sc.kind == "switch":
        if sc.switch_time is None:
            raise ValidationError("switch_time", "switch scenarios need switch_time")
        if not (0 < sc.switch_time < flow.T):
            raise ValidationError(
                "switch_time", f"switch_time must lie in (0, T), got {sc.switch_time}"
            )
    if sc.kind in ("q_sweep", "rho_sweep") and not sc.sweep_values:
        raise ValidationError("sweep_values", f"{sc.kind} needs non-empty sweep_values")
    if not (0 < sc.melt_threshold < 1):
        raise ValidationError(
            "melt_threshold", f"melt_threshold must lie in (0, 1), got {sc.melt_threshold}"
        )
    if sc.snapshot_every < 1:
        raise ValidationError("snapshot_every", "snapshot_every must be >= 1")
    return sc


def load_config(path) -> Scenario:
    """Parse and validate a scenario config file."""
    param_kwargs: dict = {}
    flow_kwargs: dict = {}
    scen_kwargs: dict = {}
    kind = "relax"
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(lineno, f"expected key = value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not value:
                raise ParseError(lineno, f"empty value for key {key!r}")
            if key in _PARAM_FIELDS:
                param_kwargs[key] = _convert(key, value, lineno)
            elif key in _FLOW_FIELDS:
                flow_kwargs[key] = _convert(key, value, lineno)
            elif key in _SCENARIO_KEYS:
                if key == "kind":
                    kind = value
                else:
                    scen_kwargs[key] = _convert(key, value, lineno)
            else:
                raise ParseError(lineno, f"unknown key {key!r}")
    return _validate_scenario(kind, param_kwargs, flow_kwargs, scen_kwargs)


def serialize_config(sc: Scenario) -> str:
    """Config text that :func:`load_config` parses back to the same scenario."""
    lines = [f"kind = {sc.kind}"]
    for name in _PARAM_FIELDS:
        lines.append(f"{name} = {getattr(sc.params, name):.17g}")
    for name in _FLOW_FIELDS:
        val = getattr(sc.flow, name)
        if isinstance(val, bool):
            lines.append(f"{name} = {str(val).lower()}")
        elif isinstance(val, int):
            lines.append(f"{name} = {val}")
        else:
            lines.append(f"{name} = {val:.17g}")
    if sc.switch_time is not None:
        lines.append(f"switch_time = {sc.switch_time:.17g}")
    if sc.sweep_values:
        lines.append("sweep_values = " + ",".join(f"{v:.17g}" for v in sc.sweep_values))
    lines.append(f"output_dir = {sc.output_dir}")
    lines.append(f"snapshot_every = {sc.snapshot_every}")
    lines.append(f"melt_threshold = {sc.melt_threshold:.17g}")
    lines.append(f"seed = {sc.seed}")
    if sc.initial_state:
        lines.append(f"initial_state = {sc.initial_state}")
    return "\n".join(lines) + "\n"


def write_state_csv(path, state: State) -> None:
    p = state.psi.values
    n = state.director.values
    lines = ["x,n1,n2,n3,re_psi,im_psi,abs_psi"]
    for j in range(state.grid.n_nodes):
        lines.append(
            ",".join(
                f"{v:.17g}"
                for v in (
                    state.grid.nodes[j],
                    n[j, 0], n[j, 1], n[j, 2],
                    p[j].real, p[j].imag, abs(p[j]),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def _segment_flow_cfg(base: FlowConfig, steps: int) -> FlowConfig:
    return dataclasses.replace(base, n_steps=steps, T=steps * base.tau * (1.0 - 1e-12))


@dataclass
class RunArtifacts:
    ledgers: list[DissipationLedger]
    snapshots: list[tuple[int, State]]
    energy_rows: list[tuple[float, EnergyBreakdown]]
    diag_rows: list[tuple[float, DiagnosticsRecord]]
    ledger_ok: bool
    violations: list[str]


def _execute_segments(
    initial: State,
    params: PhysicalParams,
    flow_cfg: FlowConfig,
    segments: list[tuple[int, float]],
    snapshot_every: int,
    melt_threshold: float,
) -> RunArtifacts:
    state = initial
    ledgers: list[DissipationLedger] = []
    snapshots: list[tuple[int, State]] = [(0, initial)]
    offset = 0
    for steps, e_field in segments:
        seg_params = dataclasses.replace(params, E_field=e_field)
        seg_cfg = _segment_flow_cfg(flow_cfg, steps)
        result: FlowResult = run_flow(
            state, seg_params, seg_cfg, snapshot_every=snapshot_every
        )
        ledgers.append(result.ledger)
        for m, snap in result.snapshots:
            if m > 0:
                snapshots.append((offset + m, snap))
        state = result.final_state
        offset += steps
    violations: list[str] = []
    for i, led in enumerate(ledgers, start=1):
        for msg in led.check():
            violations.append(f"segment {i}: {msg}")
    energy_rows = []
    diag_rows = []
    for m, snap in snapshots:
        seg_e = params.E_field
        if len(segments) > 1 and m > segments[0][0]:
            seg_e = segments[1][1]
        p_at = dataclasses.replace(params, E_field=seg_e)
        energy_rows.append((snap.t, energy_breakdown(snap, p_at)))
        diag_rows.append((snap.t, diagnose(snap, p_at, melt_threshold)))
    return RunArtifacts(
        ledgers=ledgers,
        snapshots=snapshots,
        energy_rows=energy_rows,
        diag_rows=diag_rows,
        ledger_ok=not violations,
        violations=violations,
    )


def emit_plots(out_dir, artifacts: RunArtifacts) -> list[str]:
    """Write the SVG plots for one run; returns the file names."""
    if not artifacts.snapshots or not artifacts.energy_rows:
        raise MissingArtifact("no snapshots to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ts = [t for t, _ in artifacts.energy_rows]
    totals = [bd.total for _, bd in artifacts.energy_rows]
    write_line_plot(
        out / "energy.svg", [("total", ts, totals)],
        "free energy", "t", "energy",
    )
    written.append("energy.svg")
    mins = [rec.min_modulus for _, rec in artifacts.diag_rows]
    write_line_plot(
        out / "min_modulus.svg", [("min |psi|", ts, mins)],
        "layering strength minimum", "t", "min |psi|",
    )
    written.append("min_modulus.svg")
    picks = _pick_profiles(artifacts.snapshots)
    tilt_series = []
    n3_series = []
    for m, snap in picks:
        rec = dict(artifacts.diag_rows).get(snap.t)
        tilt = rec.tilt_profile if rec is not None else None
        if tilt is None:
            continue
        label = f"t={snap.t:.4g}"
        tilt_series.append((label, list(snap.grid.nodes), list(tilt)))
        n3_series.append((label, list(snap.grid.nodes), list(snap.director.values[:, 2])))
    write_line_plot(out / "tilt_profiles.svg", tilt_series, "layer tilt", "x", "tilt")
    written.append("tilt_profiles.svg")
    write_line_plot(out / "n3_profiles.svg", n3_series, "out-of-plane director", "x", "n3")
    written.append("n3_profiles.svg")
    return written


def _pick_profiles(snapshots, k: int = 4):
    if len(snapshots) <= k:
        return snapshots
    idx = np.linspace(0, len(snapshots) - 1, k).round().astype(int)
    return [snapshots[i] for i in sorted(set(idx))]


def _write_run_outputs(out: Path, artifacts: RunArtifacts) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if len(artifacts.ledgers) == 1:
        artifacts.ledgers[0].write_csv(out / "ledger.csv")
    else:
        for i, led in enumerate(artifacts.ledgers, start=1):
            led.write_csv(out / f"ledger_segment{i}.csv")
    lines = [EnergyBreakdown.CSV_HEADER]
    lines += [bd.csv_row(t) for t, bd in artifacts.energy_rows]
    (out / "energy.csv").write_text("\n".join(lines) + "\n")
    lines = [DiagnosticsRecord.CSV_HEADER]
    lines += [rec.csv_row(t) for t, rec in artifacts.diag_rows]
    (out / "diagnostics.csv").write_text("\n".join(lines) + "\n")
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for m, snap in artifacts.snapshots:
        write_state_csv(snap_dir / f"state_{m:06d}.csv", snap)
    emit_plots(out / "plots", artifacts)


def _melt_report(artifacts: RunArtifacts, threshold: float) -> dict:
    min_over_time = min(rec.min_modulus for _, rec in artifacts.diag_rows)
    melted = [
        (t, rec.melt_interval)
        for t, rec in artifacts.diag_rows
        if rec.melt_interval is not None
    ]
    return {
        "melt_threshold": threshold,
        "min_modulus_over_time": min_over_time,
        "max_melt_depth": 1.0 - min_over_time,
        "melted_snapshots": [
            {"t": t, "interval": list(iv)} for t, iv in melted
        ],
    }


def _single_run(sc: Scenario, out: Path, segments) -> ScenarioResult:
    t0 = time.perf_counter()
    if sc.initial_state:
        initial = load_initial_state(sc.initial_state, sc.params)
        if initial.grid.n_nodes != sc.flow.n_nodes:
            sc = dataclasses.replace(
                sc, flow=dataclasses.replace(sc.flow, n_nodes=initial.grid.n_nodes)
            )
    else:
        grid = make_grid(sc.params.L, sc.flow.n_nodes)
        initial = build_initial_state(sc.params, grid)
    artifacts = _execute_segments(
        initial, sc.params, sc.flow, segments, sc.snapshot_every, sc.melt_threshold
    )
    _write_run_outputs(out, artifacts)
    labels = [rec.state_label for _, rec in artifacts.diag_rows]
    details = {
        "kind": sc.kind,
        "runtime_seconds": time.perf_counter() - t0,
        "ledger_ok": artifacts.ledger_ok,
        "violations": artifacts.violations,
        "state_labels": labels,
        "label_transitions": [
            f"{a}->{b}" for a, b in zip(labels, labels[1:]) if a != b
        ],
        "final_energy": artifacts.energy_rows[-1][1].total,
        "melt_report": _melt_report(artifacts, sc.melt_threshold),
        "seed": sc.seed,
    }
    (out / "summary.json").write_text(json.dumps(details, indent=2) + "\n")
    return ScenarioResult(
        ok=True, ledger_ok=artifacts.ledger_ok, output_dir=str(out), details=details
    )


def _run_relax(sc: Scenario, out: Path) -> ScenarioResult:
    return _single_run(sc, out, [(sc.flow.n_steps, sc.params.E_field)])


def _run_switch(sc: Scenario, out: Path) -> ScenarioResult:
    m_switch = max(1, int(round(sc.switch_time / sc.flow.tau)))
    if m_switch >= sc.flow.n_steps:
        raise ValidationError(
            "switch_time", "switch_time leaves no steps after the flip"
        )
    segments = [
        (m_switch, sc.params.E_field),
        (sc.flow.n_steps - m_switch, -sc.params.E_field),
    ]
    return _single_run(sc, out, segments)


def _sweep_subdir(out: Path, prefix: str, value: float) -> Path:
    return out / f"{prefix}_{value:g}"


def _run_q_sweep(sc: Scenario, out: Path) -> ScenarioResult:
    t0 = time.perf_counter()
    init_table = initial_energy_sweep(sc.params, sc.sweep_values)

    def one_q(q: float):
        p = validate(dataclasses.replace(sc.params, q=q))
        grid = grid_for_wave_number(p, min_nodes=sc.flow.n_nodes)
        sub = dataclasses.replace(
            sc,
            kind="relax",
            params=p,
            flow=dataclasses.replace(sc.flow, n_nodes=grid.n_nodes),
            output_dir=str(_sweep_subdir(out, "q", q)),
            sweep_values=(),
        )
        result = _run_relax(sub, Path(sub.output_dir))
        diag_path = Path(sub.output_dir) / "diagnostics.csv"
        ratios = [
            float(line.split(",")[1])
            for line in diag_path.read_text().splitlines()[1:]
        ]
        return q, result, ratios

    results = {}
    errors = {}
    with ThreadPoolExecutor(max_workers=min(4, len(sc.sweep_values))) as pool:
        futures = {q: pool.submit(one_q, q) for q in sc.sweep_values}
        for q, fut in futures.items():
            try:
                results[q] = fut.result()
            except ChevronError as err:
                errors[q] = str(err)

    lines = ["q,initial_energy"]
    lines += [f"{q:.17g},{e:.17g}" for q, e in init_table]
    (out / "initial_energy_vs_q.csv").write_text("\n".join(lines) + "\n")
    ratio_table, ratio_slope = ratio_sweep(
        {q: ratios for q, (_, _, ratios) in results.items()}
    ) if results else ([], None)
    lines = ["q,max_sup_ratio"]
    lines += [f"{q:.17g},{r:.17g}" for q, r in ratio_table]
    (out / "sup_ratio_vs_q.csv").write_text("\n".join(lines) + "\n")
    details = {
        "kind": "q_sweep",
        "runtime_seconds": time.perf_counter() - t0,
        "initial_energy_table": init_table,
        "initial_energy_slope": loglog_slope(init_table),
        "sup_ratio_table": ratio_table,
        "sup_ratio_slope": ratio_slope,
        "errors": errors,
        "seed": sc.seed,
    }
    (out / "summary.json").write_text(json.dumps(details, indent=2) + "\n")
    ledger_ok = all(r.ledger_ok for _, r, _ in results.values()) and not errors
    return ScenarioResult(
        ok=not errors, ledger_ok=ledger_ok, output_dir=str(out), details=details
    )


def _run_rho_sweep(sc: Scenario, out: Path) -> ScenarioResult:
    t0 = time.perf_counter()

    def one_rho(rho: float):
        p = validate(dataclasses.replace(sc.params, rho=rho))
        sub = dataclasses.replace(
            sc,
            kind="relax",
            params=p,
            output_dir=str(_sweep_subdir(out, "rho", rho)),
            sweep_values=(),
        )
        result = _run_relax(sub, Path(sub.output_dir))
        final = max(
            (Path(sub.output_dir) / "snapshots").glob("state_*.csv"),
            key=lambda pth: pth.name,
        )
        return result, load_initial_state(final, p)

    results = {}
    errors = {}
    with ThreadPoolExecutor(max_workers=min(4, len(sc.sweep_values))) as pool:
        futures = {r: pool.submit(one_rho, r) for r in sc.sweep_values}
        for r, fut in futures.items():
            try:
                results[r] = fut.result()
            except ChevronError as err:
                errors[r] = str(err)

    rows = []
    if len(results) >= 2:
        ordered = [(r, results[r][1]) for r in sc.sweep_values if r in results]
        rows = rho_cauchy_check(ordered)
    lines = ["rho_a,rho_b,distance"]
    lines += [f"{a:.17g},{b:.17g},{d:.17g}" for a, b, d in rows]
    (out / "rho_cauchy.csv").write_text("\n".join(lines) + "\n")
    details = {
        "kind": "rho_sweep",
        "runtime_seconds": time.perf_counter() - t0,
        "cauchy_table": rows,
        "strictly_decreasing": all(
            rows[i][2] > rows[i + 1][2] for i in range(len(rows) - 1)
        ) if len(rows) >= 2 else None,
        "errors": errors,
        "seed": sc.seed,
    }
    (out / "summary.json").write_text(json.dumps(details, indent=2) + "\n")
    ledger_ok = all(r.ledger_ok for r, _ in results.values()) and not errors
    return ScenarioResult(
        ok=not errors, ledger_ok=ledger_ok, output_dir=str(out), details=details
    )


def run_scenario(sc: Scenario) -> ScenarioResult:
    """Run a scenario, writing all artifacts under its output directory."""
    out = Path(sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(serialize_config(sc))
    runners = {
        "relax": _run_relax,
        "switch": _run_switch,
        "q_sweep": _run_q_sweep,
        "rho_sweep": _run_rho_sweep,
    }
    return runners[sc.kind](sc, out)
