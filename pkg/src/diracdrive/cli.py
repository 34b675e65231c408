"""Command-line entry point.

Subcommands: evolve, plan, eigen, convergence, experiment, validate.
Configs and schedules are JSON; all numeric series are CSV written with
17 significant digits in a fixed column order, so identical configs
produce byte-identical outputs.  Environment variables are never
consulted.  Exit codes: 0 ok, 1 runtime failure, 2 config validation,
3 planner infeasibility.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from diracdrive import diagnostics, presets
from diracdrive.hamiltonian import DiracConfig, assemble, eigendecompose, write_eigen_report
from diracdrive.integrator import convergence_study, evolve, write_trajectory
from diracdrive.planner import PlanInfeasibleError, PlannerParams, plan_permutation
from diracdrive.schedule import (
    ControlSchedule,
    load_schedule,
    move_segment,
    save_schedule,
    schedule_from_dict,
    schedule_to_dict,
    validate,
)
from diracdrive.spectral import BasisSpec, SpectralState, read_snapshot, state_from_modes, write_snapshot

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


@dataclass
class RunConfig:
    """Resolved evolve configuration; JSON keys mirror the field names."""

    n_modes: int
    dt: float
    schedule: ControlSchedule
    initial: SpectralState
    out: str | None = None
    record_every: int = 100
    eigen_series: bool = False
    n_eigen: int = 8
    n_mode_columns: int = 8
    eigen_out: str | None = None
    snapshots: dict[str, float] = field(default_factory=dict)   # path -> time

    def manifest(self) -> dict:
        return {
            "n_modes": self.n_modes,
            "dt": self.dt,
            "record_every": self.record_every,
            "eigen_series": self.eigen_series,
            "n_eigen": self.n_eigen,
            "n_mode_columns": self.n_mode_columns,
            "initial": [[c.real, c.imag] for c in self.initial.coefficients],
            "schedule": schedule_to_dict(self.schedule),
        }


def _parse_initial(raw, basis: BasisSpec) -> SpectralState:
    if isinstance(raw, str):
        if raw in ("1", "2", "experiment1", "experiment2"):
            preset = presets.experiment_preset(raw)
            return state_from_modes(basis, preset.initial_amplitudes)
        return read_snapshot(raw, basis)
    if isinstance(raw, (list, tuple)):
        amplitudes = []
        for item in raw:
            if isinstance(item, (list, tuple)):
                amplitudes.append(complex(float(item[0]), float(item[1])))
            else:
                amplitudes.append(complex(item))
        return state_from_modes(basis, amplitudes)
    raise ValueError("initial must be an amplitude list, a preset name, or a snapshot CSV path")


def _load_run_config(path) -> RunConfig:
    with open(path) as fh:
        raw = json.load(fh)
    for key in ("n_modes", "dt", "schedule", "initial"):
        if key not in raw:
            raise ValueError(f"config is missing required key {key!r}")
    n_modes = int(raw["n_modes"])
    dt = float(raw["dt"])
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    basis = BasisSpec(n_modes)
    sched = raw["schedule"]
    schedule = load_schedule(sched) if isinstance(sched, str) else schedule_from_dict(sched)
    config = RunConfig(
        n_modes=n_modes,
        dt=dt,
        schedule=schedule,
        initial=_parse_initial(raw["initial"], basis),
        out=raw.get("out"),
        record_every=int(raw.get("record_every", 100)),
        eigen_series=bool(raw.get("eigen_series", False)),
        n_eigen=int(raw.get("n_eigen", 8)),
        n_mode_columns=int(raw.get("n_mode_columns", 8)),
        eigen_out=raw.get("eigen_out"),
        snapshots={str(k): float(v) for k, v in raw.get("snapshots", {}).items()},
    )
    return config


def _warn_small_basis(n_modes: int, n_permuted: int) -> None:
    if n_modes < 10 * n_permuted:
        print(
            f"warning: basis N={n_modes} is below 10x the permuted block "
            f"({n_permuted}); expect visible truncation error",
            file=sys.stderr,
        )


def _write_manifest(directory: Path, payload: dict) -> None:
    with open(directory / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_evolve(args) -> int:
    if args.config:
        config = _load_run_config(args.config)
        if args.out:
            config.out = args.out
    else:
        if not (args.schedule and args.n_modes and args.dt):
            raise ValueError("evolve needs --config, or --schedule with --n-modes and --dt")
        if args.dt <= 0.0:
            raise ValueError("dt must be positive")
        basis = BasisSpec(args.n_modes)
        initial = (
            read_snapshot(args.initial, basis)
            if args.initial
            else state_from_modes(basis, [1.0])
        )
        config = RunConfig(
            n_modes=args.n_modes,
            dt=args.dt,
            schedule=load_schedule(args.schedule),
            initial=initial,
            out=args.out,
        )
    if config.out is None:
        raise ValueError("no trajectory output path given (config key 'out' or --out)")
    _warn_small_basis(config.n_modes, config.schedule.n_diracs + 1)

    record = evolve(
        config.initial,
        config.schedule,
        dt=config.dt,
        record_every=config.record_every,
        eigen_series=config.eigen_series,
        n_eigen=config.n_eigen,
    )
    out_path = Path(config.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_trajectory(record, out_path, n_mode_columns=config.n_mode_columns)
    for snap_path, snap_time in config.snapshots.items():
        write_snapshot(record.state_at(record.index_near(snap_time)), snap_path)
    if config.eigen_series and config.eigen_out:
        decomps = []
        for i in range(record.n_samples):
            cfg = DiracConfig(max(float(record.eta_values[i]), 0.0), tuple(record.positions[i]))
            decomps.append(eigendecompose(assemble(cfg, record.basis)))
        write_eigen_report(config.eigen_out, record.sample_times, decomps,
                           n_values=config.n_eigen)
    _write_manifest(out_path.parent, config.manifest())
    drift = abs(record.norm_sq[-1] - record.norm_sq[0])
    print(f"evolved {record.sample_times[-1] - record.sample_times[0]:g} time units, "
          f"{record.n_samples} samples, norm drift {drift:.3g}")
    return EXIT_OK


def _planner_params_from_args(args) -> PlannerParams:
    params = PlannerParams()
    overrides = {}
    for name, attr in (
        ("eta_max", "eta_max"),
        ("total_time", "T"),
        ("adiabatic_slope", "adiabatic_slope"),
        ("transition_slope", "transition_slope"),
        ("transition_width", "transition_width"),
        ("margin", "margin"),
        ("min_dwell", "min_dwell"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "start_positions", None):
        overrides["start_positions"] = tuple(float(x) for x in args.start_positions.split(","))
    if getattr(args, "final_positions", None):
        overrides["final_positions"] = tuple(float(x) for x in args.final_positions.split(","))
    from dataclasses import replace

    return replace(params, **overrides)


def _plan_summary(plan) -> dict:
    return {
        "sigma": list(plan.sigma),
        "start_positions": list(plan.start_positions),
        "final_positions": list(plan.final_positions),
        "move_order": [[d, x] for d, x in plan.move_order],
        "n_transition_sites": plan.n_transition_sites,
        "events": [
            {
                "dirac": e.dirac,
                "position": e.position,
                "intervals": list(e.intervals),
                "time": e.time,
            }
            for e in plan.events
        ],
        "pairing": [[a, b] for a, b in plan.pairing],
        "max_drift_slope": plan.max_drift_slope,
        "min_feasible_time": plan.min_feasible_time,
    }


def _cmd_plan(args) -> int:
    sigma = tuple(int(s) for s in args.sigma.split(","))
    params = _planner_params_from_args(args)
    plan, schedule = plan_permutation(sigma, params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_schedule(schedule, out)
    summary = _plan_summary(plan)
    if args.summary:
        with open(args.summary, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    print(f"plan sigma={plan.sigma}: {plan.n_transition_sites} transition sites, "
          f"max drift slope {plan.max_drift_slope:.3g}, schedule -> {out}")
    for event in plan.events:
        print(f"  point {event.dirac} crosses x={event.position:.6g} at t={event.time:.6g} "
              f"(intervals {event.intervals[0]} and {event.intervals[1]})")
    return EXIT_OK


def _cmd_eigen(args) -> int:
    positions = tuple(float(x) for x in args.positions.split(",")) if args.positions else ()
    config = DiracConfig(args.eta, positions)
    decomposition = eigendecompose(assemble(config, BasisSpec(args.n_modes)))
    write_eigen_report(args.out, [0.0], [decomposition], n_values=args.count)
    values = ", ".join(f"{v:.6g}" for v in decomposition.eigenvalues[: args.count])
    print(f"lowest eigenvalues: {values}")
    return EXIT_OK


def _cmd_convergence(args) -> int:
    defaults = presets.convergence_defaults()
    schedule = ControlSchedule(
        (
            move_segment(
                0.0, defaults["horizon"], defaults["eta"],
                (defaults["x_start"],), (defaults["x_end"],), "adiabatic_move",
            ),
        ),
        1,
    )
    n_ref = args.n_ref or defaults["n_ref"]
    weights = np.asarray(defaults["initial_eigenmode_weights"])
    start = DiracConfig(defaults["eta"], (defaults["x_start"],))

    def eigenmix(n_modes: int) -> np.ndarray:
        decomposition = eigendecompose(assemble(start, BasisSpec(n_modes)))
        return (decomposition.eigenvectors[:, : weights.size] @ weights).astype(complex)

    # The initial recipe (two lowest start eigenmodes) is realized in each
    # sweep's reference basis: the spatial sweep projects one N_ref-basis
    # function down, the temporal sweep works in its own fixed basis.
    n_list = defaults["n_list"] if args.n_list is None else tuple(args.n_list)
    dt_list = defaults["dt_list"] if args.dt_list is None else tuple(args.dt_list)
    spatial = convergence_study(
        schedule,
        eigenmix(n_ref),
        n_list=n_list,
        n_ref=n_ref,
        spatial_dt=defaults["spatial_dt"],
    )
    initial = eigenmix(defaults["temporal_n"]) if dt_list else np.zeros(0, dtype=complex)
    temporal = convergence_study(
        schedule,
        initial,
        dt_list=dt_list,
        dt_ref=args.dt_ref or defaults["dt_ref"],
        temporal_n=defaults["temporal_n"],
    )
    from diracdrive.integrator import ConvergenceResult

    result = ConvergenceResult(spatial.spatial, temporal.temporal, temporal.temporal_orders)
    rows = [("N", n, err) for n, err in result.spatial]
    rows += [("dt", dt, err) for dt, err in result.temporal]
    with open(args.out, "w") as fh:
        fh.write("sweep,value,error\n")
        for kind, value, err in rows:
            fh.write(f"{kind},{value:.17g},{err:.17g}\n")
    for kind, value, err in rows:
        print(f"{kind} = {value:g}: final-time error {err:.3e}")
    if result.temporal_orders:
        orders = ", ".join(f"{o:.2f}" for o in result.temporal_orders)
        print(f"measured time orders (smooth drift): {orders}")
        # The same fit across a schedule corner (drift -> fast window ->
        # drift) is reported for information only; slope discontinuities
        # are snapped to grid nodes but carry no order guarantee.
        cornered = ControlSchedule(
            (
                move_segment(0.0, 0.2, defaults["eta"], (0.55,), (0.505,), "adiabatic_move"),
                move_segment(0.2, 0.21, defaults["eta"], (0.505,), (0.495,), "transition_move"),
                move_segment(0.21, 0.4, defaults["eta"], (0.495,), (0.45,), "adiabatic_move"),
            ),
            1,
        )
        corner_result = convergence_study(
            cornered, initial,
            dt_list=dt_list,
            dt_ref=args.dt_ref or defaults["dt_ref"],
            temporal_n=defaults["temporal_n"],
        )
        orders = ", ".join(f"{o:.2f}" for o in corner_result.temporal_orders)
        print(f"measured time orders (across fast-window corners): {orders}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.id == "sweep":
        return _run_sweep_experiment(args, outdir)

    overrides = {}
    if args.n_modes:
        overrides["n_modes"] = args.n_modes
    if args.dt:
        overrides["dt"] = args.dt
    if args.T:
        overrides["total_time"] = args.T
    preset = presets.experiment_preset(args.id, **overrides)
    _warn_small_basis(preset.n_modes, len(preset.sigma))

    plan, schedule = plan_permutation(preset.sigma, preset.planner)
    save_schedule(schedule, outdir / "schedule.json")
    with open(outdir / "plan.json", "w") as fh:
        json.dump(_plan_summary(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")

    basis = BasisSpec(preset.n_modes)
    initial = state_from_modes(basis, preset.initial_amplitudes)
    record = evolve(initial, schedule, dt=preset.dt, record_every=100)
    write_trajectory(record, outdir / "trajectory.csv")
    report = diagnostics.permutation_report(
        record, preset.sigma, len(preset.sigma), pairing=plan.pairing
    )
    diagnostics.write_permutation_csv(report, outdir / "report.csv")
    summary = diagnostics.format_permutation_summary(
        report,
        reference_residual=preset.reference_residual,
        reference_errors=preset.reference_errors,
    )
    (outdir / "summary.txt").write_text(summary + "\n")
    if args.svg:
        diagnostics.save_energy_chart(record, outdir / "mode_energies.svg",
                                      n_modes=len(preset.sigma))
    _write_manifest(outdir, {
        "experiment": preset.name,
        "sigma": list(preset.sigma),
        "n_modes": preset.n_modes,
        "dt": preset.dt,
        "initial": [[c.real, c.imag] for c in np.asarray(preset.initial_amplitudes, complex)],
        "planner": {k: getattr(preset.planner, k) for k in PlannerParams.__dataclass_fields__
                    if not k.endswith("positions")},
        "schedule": schedule_to_dict(schedule),
    })
    print(summary)
    drift = abs(record.norm_sq[-1] - record.norm_sq[0])
    print(f"norm drift over the run: {drift:.3g}")
    return EXIT_OK


def _run_sweep_experiment(args, outdir: Path) -> int:
    n_modes = args.n_modes or 200
    basis = BasisSpec(n_modes)
    geometry = diagnostics.CrossingGeometry(dt=args.dt or 1e-3)
    a_start = geometry.center + geometry.width / 2.0
    initials = {
        "double_ground": diagnostics.ground_state_at(basis, geometry.eta, (a_start,), 1, 2.0),
        "double_ground_plus_second": SpectralState(
            diagnostics.ground_state_at(basis, geometry.eta, (a_start,), 1, 2.0).coefficients
            + diagnostics.ground_state_at(basis, geometry.eta, (a_start,), 2, 1.0).coefficients,
            basis,
        ),
    }
    lines = ["initial,slope,duration,E_mode_1,E_mode_2,E_mode_3"]
    for label, initial in initials.items():
        rows = diagnostics.slope_sweep(presets.SWEEP_SLOPES, initial, geometry)
        for row in rows:
            energies = ",".join(f"{e:.17g}" for e in row.energies)
            lines.append(f"{label},{row.slope:.17g},{row.duration:.17g},{energies}")
            print(f"{label}: slope {row.slope:g} -> mode energies "
                  + ", ".join(f"{e:.4g}" for e in row.energies))
    (outdir / "slope_sweep.csv").write_text("\n".join(lines) + "\n")
    _write_manifest(outdir, {
        "experiment": "sweep",
        "n_modes": n_modes,
        "dt": geometry.dt,
        "slopes": list(presets.SWEEP_SLOPES),
        "eta": geometry.eta,
        "center": geometry.center,
        "width": geometry.width,
    })
    return EXIT_OK


def _cmd_validate(args) -> int:
    schedule = load_schedule(args.schedule)
    violations = validate(
        schedule,
        min_gap=args.min_gap,
        adiabatic_slope_max=args.adiabatic_slope_max,
    )
    if not violations:
        print("schedule is valid")
        return EXIT_OK
    for violation in violations:
        print(f"violation [{violation.kind}] segment {violation.segment}: {violation.message}")
    return EXIT_CONFIG


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diracdrive",
        description="Simulate and plan 1-D Schrodinger dynamics driven by moving point potentials",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="propagate a state through a schedule")
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--schedule", help="schedule JSON path")
    p.add_argument("--n-modes", dest="n_modes", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--initial", help="snapshot CSV for the initial state")
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("plan", help="synthesize a permutation schedule")
    p.add_argument("--sigma", required=True, help="comma-separated permutation, e.g. 2,3,1")
    p.add_argument("--out", default="schedule.json")
    p.add_argument("--summary", help="plan summary JSON path")
    p.add_argument("--T", type=float)
    p.add_argument("--eta-max", dest="eta_max", type=float)
    p.add_argument("--adiabatic-slope", dest="adiabatic_slope", type=float)
    p.add_argument("--transition-slope", dest="transition_slope", type=float)
    p.add_argument("--transition-width", dest="transition_width", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--min-dwell", dest="min_dwell", type=float)
    p.add_argument("--start-positions", dest="start_positions")
    p.add_argument("--final-positions", dest="final_positions")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("eigen", help="dump the spectrum of a static configuration")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--positions", help="comma-separated point positions")
    p.add_argument("--n-modes", dest="n_modes", type=int, default=200)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--out", default="eigen.csv")
    p.set_defaults(func=_cmd_eigen)

    p = sub.add_parser("convergence", help="run the self-convergence study")
    p.add_argument("--out", default="convergence.csv")
    p.add_argument("--n-list", dest="n_list", type=int, nargs="*")
    p.add_argument("--dt-list", dest="dt_list", type=float, nargs="*")
    p.add_argument("--n-ref", dest="n_ref", type=int)
    p.add_argument("--dt-ref", dest="dt_ref", type=float)
    p.set_defaults(func=_cmd_convergence)

    p = sub.add_parser("experiment", help="run a bundled preset end to end")
    p.add_argument("--id", required=True, choices=["1", "2", "sweep"])
    p.add_argument("--outdir", default="run")
    p.add_argument("--n-modes", dest="n_modes", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--svg", action="store_true", help="also draw SVG energy charts")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("validate", help="lint a schedule file")
    p.add_argument("--schedule", required=True)
    p.add_argument("--min-gap", dest="min_gap", type=float, default=0.02)
    p.add_argument("--adiabatic-slope-max", dest="adiabatic_slope_max", type=float)
    p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PlanInfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
