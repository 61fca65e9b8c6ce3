"""Run orchestration: config files, the command-line verbs, and run output
directories (config copy, time-series CSV, snapshots, JSON manifest)."""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from dataclasses import dataclass, field as dataclass_field, replace
from pathlib import Path

import numpy as np

from zk2d import io
from zk2d.blowup import extract_residual, fit_power_law, window_sweep
from zk2d.diagnostics import TimeSeries
from zk2d.errors import (
    ConfigError,
    ContractViolationError,
    FitDomainError,
    InnerSolverError,
    IterationFailureError,
    NoBlowupError,
    ResolutionError,
    Zk2dError,
)
from zk2d.evolution import EvolutionResult, Frame, RunPlan, evolve
from zk2d.grid import Field, GridSpec, forward, inverse, refine, tail_indicator
from zk2d.scenarios import SCENARIO_KINDS, ScenarioSpec, build
from zk2d.soliton import NewtonOptions, solve_ground_state

_ENV_OUTPUT_ROOT = "ZK2D_OUTPUT_ROOT"


# ----------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Everything needed to reproduce one run segment."""

    p: int
    nx: int
    ny: int
    lx: float
    ly: float
    horizon: float
    n_steps: int = 0
    step: float = 0.0
    frame: str = "lab"
    frame_velocity: float = 0.0
    track_x0: float = 0.0
    scenario: ScenarioSpec | None = None
    snapshot: str = ""
    record_every: int = 0
    snapshot_times: tuple[float, ...] = ()
    tail_threshold: float = 1e-2
    energy_threshold: float = 1e-4
    dealias: bool = False
    output_dir: str = "run"
    run_id: str = ""
    restart_refine: int = 2
    restart_n_steps: int = 0
    restart_span: float = 0.0

    def validate(self) -> None:
        if self.p not in (2, 3, 4):
            raise ConfigError(f"p must be 2, 3 or 4, got {self.p}")
        for name in ("nx", "ny"):
            v = getattr(self, name)
            if v < 4 or v % 2:
                raise ConfigError(f"{name} must be even and >= 4, got {v}")
        for name in ("lx", "ly", "horizon", "tail_threshold", "energy_threshold"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive and finite, got {v}")
        if (self.n_steps > 0) == (self.step > 0.0):
            raise ConfigError("specify exactly one of n_steps / step")
        if self.frame not in ("lab", "constant", "tracking"):
            raise ConfigError(f"unknown frame {self.frame!r}")
        if (self.scenario is None) == (not self.snapshot):
            raise ConfigError("specify exactly one of scenario / snapshot")

    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.lx, self.ly)

    def frame_obj(self) -> Frame:
        if self.frame == "constant":
            return Frame.constant(self.frame_velocity)
        if self.frame == "tracking":
            return Frame.tracking(self.track_x0)
        return Frame.lab()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_ini(cfg: RunConfig) -> str:
    lines = [
        "[run]",
        f"p = {cfg.p}",
        f"frame = {cfg.frame}",
        f"frame_velocity = {_fmt(cfg.frame_velocity)}",
        f"track_x0 = {_fmt(cfg.track_x0)}",
        f"output_dir = {cfg.output_dir}",
        f"run_id = {cfg.run_id}",
        "",
        "[grid]",
        f"nx = {cfg.nx}",
        f"ny = {cfg.ny}",
        f"lx = {_fmt(cfg.lx)}",
        f"ly = {_fmt(cfg.ly)}",
        "",
        "[time]",
        f"horizon = {_fmt(cfg.horizon)}",
        f"n_steps = {cfg.n_steps}",
        f"step = {_fmt(cfg.step)}",
        "",
        "[scenario]",
    ]
    if cfg.scenario is not None:
        lines.append(f"kind = {cfg.scenario.kind}")
        for k, v in sorted(cfg.scenario.params.items()):
            lines.append(f"{k} = {_fmt(v)}")
        if cfg.scenario.well_separated:
            lines.append("well_separated = true")
    else:
        lines.append(f"snapshot = {cfg.snapshot}")
    lines += [
        "",
        "[recording]",
        f"record_every = {cfg.record_every}",
        "snapshot_times = " + ", ".join(_fmt(t) for t in cfg.snapshot_times),
        "",
        "[breakdown]",
        f"tail_threshold = {_fmt(cfg.tail_threshold)}",
        f"energy_threshold = {_fmt(cfg.energy_threshold)}",
        f"dealias = {_fmt(cfg.dealias)}",
        "",
        "[restart]",
        f"refine_factor = {cfg.restart_refine}",
        f"n_steps = {cfg.restart_n_steps}",
        f"span = {_fmt(cfg.restart_span)}",
        "",
    ]
    return "\n".join(lines)


def config_from_ini(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
        run = parser["run"]
        grid = parser["grid"]
        tsec = parser["time"]
        scen = parser["scenario"]
        rec = parser["recording"]
        brk = parser["breakdown"]

        scenario = None
        snapshot = scen.get("snapshot", "")
        if not snapshot:
            kind = scen.get("kind")
            if kind is None:
                raise ConfigError("scenario section needs a kind or snapshot")
            params = {
                k: float(v)
                for k, v in scen.items()
                if k not in ("kind", "snapshot", "well_separated")
            }
            scenario = ScenarioSpec(
                kind, params, well_separated=scen.getboolean("well_separated", False)
            )

        times = tuple(
            float(x) for x in rec.get("snapshot_times", "").split(",") if x.strip()
        )
        cfg = RunConfig(
            p=run.getint("p"),
            nx=grid.getint("nx"),
            ny=grid.getint("ny"),
            lx=grid.getfloat("lx"),
            ly=grid.getfloat("ly"),
            horizon=tsec.getfloat("horizon"),
            n_steps=tsec.getint("n_steps", 0),
            step=tsec.getfloat("step", 0.0),
            frame=run.get("frame", "lab"),
            frame_velocity=run.getfloat("frame_velocity", 0.0),
            track_x0=run.getfloat("track_x0", 0.0),
            scenario=scenario,
            snapshot=snapshot,
            record_every=rec.getint("record_every", 0),
            snapshot_times=times,
            tail_threshold=brk.getfloat("tail_threshold", 1e-2),
            energy_threshold=brk.getfloat("energy_threshold", 1e-4),
            dealias=brk.getboolean("dealias", False),
            output_dir=run.get("output_dir", "run"),
            run_id=run.get("run_id", ""),
        )
        if parser.has_section("restart"):
            rst = parser["restart"]
            cfg.restart_refine = rst.getint("refine_factor", 2)
            cfg.restart_n_steps = rst.getint("n_steps", 0)
            cfg.restart_span = rst.getfloat("span", 0.0)
        return cfg
    except (configparser.Error, ValueError, KeyError) as exc:
        raise ConfigError(f"bad config: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_ini(text)


def resolve_output_dir(output_dir: str) -> Path:
    root = os.environ.get(_ENV_OUTPUT_ROOT, "")
    p = Path(output_dir)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


# ----------------------------------------------------------------------
# run execution shared by evolve and restart


def run_segment(
    cfg: RunConfig,
    initial: Field,
    t0: float = 0.0,
    xm0: float = 0.0,
    ym0: float = 0.0,
    horizon: float | None = None,
    n_steps: int | None = None,
) -> tuple[EvolutionResult, Path]:
    """Integrate one segment and write the full output directory."""
    plan = RunPlan(
        p=cfg.p,
        horizon=cfg.horizon if horizon is None else horizon,
        n_steps=cfg.n_steps if n_steps is None else n_steps,
        step=cfg.step if n_steps is None else 0.0,
        frame=cfg.frame_obj(),
        record_every=cfg.record_every,
        snapshot_times=cfg.snapshot_times,
        tail_threshold=cfg.tail_threshold,
        energy_threshold=cfg.energy_threshold,
        dealias=cfg.dealias,
        t0=t0,
        xm0=xm0,
        ym0=ym0,
        run_id=cfg.run_id,
    )
    outdir = resolve_output_dir(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    started = time.perf_counter()
    result = evolve(initial, plan)
    wall = time.perf_counter() - started

    (outdir / "config.cfg").write_text(config_to_ini(cfg))
    result.series.write_csv(outdir / "series.csv")
    outputs = ["config.cfg", "series.csv"]
    for idx, snap in enumerate(result.snapshots):
        is_final = idx == len(result.snapshots) - 1
        name = "final.zks" if is_final else f"snap_{idx:03d}.zks"
        io.write_state_snapshot(
            outdir / name,
            inverse(snap.spec),
            cfg.p,
            snap.t,
            cfg.frame_velocity if cfg.frame == "constant" else snap.v_x,
            snap.x_m,
            snap.y_m,
        )
        outputs.append(name)

    manifest = {
        "run_id": cfg.run_id,
        "config": config_to_ini(cfg),
        "wall_clock_s": wall,
        "breakdown": (
            None
            if result.breakdown is None
            else {"time": result.breakdown.time, "cause": result.breakdown.cause}
        ),
        "final_tail_indicator": tail_indicator(result.final_state.spec),
        "max_delta_E": float(np.max(result.series.column("delta_E"))),
        "max_mass_drift": float(
            np.max(
                np.abs(
                    result.series.column("mass") / result.series.column("mass")[0] - 1.0
                )
            )
        )
        if result.series.column("mass")[0] != 0.0
        else 0.0,
        "samples": len(result.series),
        "outputs": outputs + ["manifest.json"],
    }
    io.write_manifest(outdir / "manifest.json", manifest)
    return result, outdir


def initial_from_config(cfg: RunConfig) -> tuple[Field, float, float, float]:
    """Initial field plus (t0, xm0, ym0) from a scenario or a snapshot."""
    if cfg.scenario is not None:
        return build(cfg.scenario, cfg.grid(), cfg.p), 0.0, 0.0, 0.0
    header, field = io.read_snapshot(cfg.snapshot)
    if header.kind == io.KIND_PROFILE:
        return field, 0.0, 0.0, 0.0
    return field, header.t, header.x_m, header.y_m


# ----------------------------------------------------------------------
# commands


def cmd_soliton(args) -> int:
    grid = GridSpec(args.nx, args.ny, args.lx, args.ly)
    opts = NewtonOptions(tol=args.tol)
    profile = solve_ground_state(args.p, args.c, grid, opts)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_profile_snapshot(out, profile)
    tail = tail_indicator(forward(profile.field))
    report = "\n".join(
        [
            f"p = {profile.p}",
            f"c = {profile.c!r}",
            f"grid = {grid.nx} x {grid.ny}, lx = {grid.lx!r}, ly = {grid.ly!r}",
            f"peak = {profile.peak()!r}",
            f"residual_sup = {profile.residual_sup!r}",
            f"tail_indicator = {tail!r}",
            f"newton_iterations = {len(profile.residual_history) - 1}",
            "",
        ]
    )
    report_path = Path(args.report) if args.report else out.with_suffix(".txt")
    report_path.write_text(report)
    print(report, end="")
    return 0


def cmd_evolve(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.run_id:
        cfg.run_id = args.run_id
    cfg.validate()
    initial, t0, xm0, ym0 = initial_from_config(cfg)
    result, outdir = run_segment(cfg, initial, t0=t0, xm0=xm0, ym0=ym0)
    if result.breakdown is not None:
        print(
            f"breakdown at t = {result.breakdown.time:.6g} "
            f"({result.breakdown.cause}); outputs in {outdir}"
        )
    else:
        print(f"completed t = {result.final_state.t:.6g}; outputs in {outdir}")
    return 0


def cmd_restart(args) -> int:
    run_dir = resolve_output_dir(args.run_dir)
    cfg = load_config(run_dir / "config.cfg")
    snapshot_path = Path(args.snapshot) if args.snapshot else run_dir / "final.zks"
    header, field = io.read_snapshot(snapshot_path)

    factor = args.refine if args.refine is not None else cfg.restart_refine
    n_steps = args.n_steps if args.n_steps is not None else cfg.restart_n_steps
    span = args.span if args.span is not None else cfg.restart_span
    if factor < 1 or n_steps <= 0 or span <= 0:
        raise ConfigError("restart needs refine_factor >= 1, n_steps > 0, span > 0")

    refined = inverse(refine(forward(field), factor)) if factor > 1 else field
    cfg = replace(
        cfg,
        nx=refined.grid.nx,
        ny=refined.grid.ny,
        horizon=header.t + span,
        n_steps=n_steps,
        step=0.0,
        scenario=None,
        snapshot=str(snapshot_path),
        output_dir=args.output_dir or (str(args.run_dir).rstrip("/\\") + "-restart"),
        run_id=(cfg.run_id + "-restart") if cfg.run_id else "",
    )
    cfg.validate()
    result, outdir = run_segment(
        cfg, refined, t0=header.t, xm0=header.x_m, ym0=header.y_m
    )
    if result.breakdown is not None:
        print(
            f"breakdown at t = {result.breakdown.time:.6g} "
            f"({result.breakdown.cause}); outputs in {outdir}"
        )
    else:
        print(f"completed t = {result.final_state.t:.6g}; outputs in {outdir}")
    return 0


def cmd_fit(args) -> int:
    series = TimeSeries.read_csv(args.series)
    t = series.column("t")
    g = series.column(args.column)
    windows = [int(w) for w in args.sweep.split(",")] if args.sweep else [args.window]
    fits = window_sweep(t, g, windows=windows, method=args.method,
                        series_name=args.column)
    for fit in fits:
        print(
            f"{fit.series_name} [{fit.method}, {fit.sample_count} samples]: "
            f"a = {fit.a:.6g}, b = {fit.b:.6g}, t* = {fit.t_star:.6g}, "
            f"rms = {fit.rms_residual:.3g}"
        )
    if args.report:
        io.write_fit_report(args.report, fits)
    if args.model_csv:
        fit = fits[0]
        lo = fit.window[0]
        io.write_fit_model_csv(args.model_csv, fit, t[lo:], g[lo:])
    return 0


def cmd_residual(args) -> int:
    header, field = io.read_snapshot(args.snapshot)
    profile = io.read_profile(args.soliton)
    residual, c_fit, center = extract_residual(field, profile)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    io.write_state_snapshot(
        out, residual, profile.p, header.t, header.v, header.x_m, header.y_m
    )
    report = "\n".join(
        [
            f"c_fit = {c_fit!r}",
            f"center_x = {center[0]!r}",
            f"center_y = {center[1]!r}",
            f"residual_sup = {float(np.abs(residual.values).max())!r}",
            "",
        ]
    )
    if args.report:
        Path(args.report).write_text(report)
    print(report, end="")
    return 0


def cmd_scenarios(args) -> int:
    for kind, params in SCENARIO_KINDS.items():
        spec = ", ".join(
            f"{k}" + (f" (default {v})" if v is not None else " (required)")
            for k, v in params.items()
        )
        print(f"{kind}: {spec}")
    return 0


# ----------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zk2d",
        description="Pseudospectral runs and blow-up analysis for the 2D "
        "generalized Zakharov-Kuznetsov equation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sol = sub.add_parser("soliton", help="solve a ground-state profile")
    p_sol.add_argument("--p", type=int, required=True, choices=(2, 3, 4))
    p_sol.add_argument("--c", type=float, default=1.0)
    p_sol.add_argument("--nx", type=int, default=512)
    p_sol.add_argument("--ny", type=int, default=512)
    p_sol.add_argument("--lx", type=float, default=10.0)
    p_sol.add_argument("--ly", type=float, default=10.0)
    p_sol.add_argument("--tol", type=float, default=1e-10)
    p_sol.add_argument("--out", required=True, help="profile snapshot path (.zks)")
    p_sol.add_argument("--report", default="", help="text report path")
    p_sol.set_defaults(func=cmd_soliton)

    p_evo = sub.add_parser("evolve", help="run a configured time evolution")
    p_evo.add_argument("--config", required=True)
    p_evo.add_argument("--output-dir", default="")
    p_evo.add_argument("--run-id", default="")
    p_evo.set_defaults(func=cmd_evolve)

    p_rst = sub.add_parser("restart", help="refine a snapshot and continue")
    p_rst.add_argument("--run-dir", required=True)
    p_rst.add_argument("--snapshot", default="")
    p_rst.add_argument("--refine", type=int, default=None)
    p_rst.add_argument("--n-steps", type=int, default=None)
    p_rst.add_argument("--span", type=float, default=None,
                       help="additional integration time")
    p_rst.add_argument("--output-dir", default="")
    p_rst.set_defaults(func=cmd_restart)

    p_fit = sub.add_parser("fit", help="power-law fit of a diverging column")
    p_fit.add_argument("--series", required=True, help="series CSV path")
    p_fit.add_argument("--column", default="sup_u")
    p_fit.add_argument("--window", type=int, default=500)
    p_fit.add_argument("--method", choices=("profiled", "simplex"), default="profiled")
    p_fit.add_argument("--sweep", default="", help="comma-separated window list")
    p_fit.add_argument("--report", default="")
    p_fit.add_argument("--model-csv", default="")
    p_fit.set_defaults(func=cmd_fit)

    p_res = sub.add_parser("residual", help="subtract a fitted rescaled soliton")
    p_res.add_argument("--snapshot", required=True)
    p_res.add_argument("--soliton", required=True)
    p_res.add_argument("--out", required=True)
    p_res.add_argument("--report", default="")
    p_res.set_defaults(func=cmd_residual)

    p_lst = sub.add_parser("scenarios", help="list initial-data families")
    p_lst.set_defaults(func=cmd_scenarios)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ContractViolationError, FitDomainError, NoBlowupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (IterationFailureError, InnerSolverError, ResolutionError, Zk2dError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
