"""Command line front end.

Subcommands: drive, velocity-space, stiffness-sweep, simulate-coupling,
metrics, calibrate, serve. Exit codes: 0 success, 2 validation error,
3 aborted/incomplete run.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .calibration import CalibrationProfile, calibrate_recording
from .coupling import CouplingParams, ForceProfile, simulate
from .errors import (CalibrationError, ConfigurationError, InputError,
                     InsufficientDataError, PendulumFell)
from .harness import (DriverParams, NoiseParams, ScenarioConfig,
                      run_closed_loop, stiffness_study, velocity_space_sweep)
from .mapping import MappingParams
from .sensing import load_frames_jsonl
from .service import ServiceConfig, serve
from .vehicle import PathSpec, RunTrace, avg_accel, build_figure8, completion_time, cross_error

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ABORTED = 3


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise ConfigurationError("config file must hold a JSON object")
    return cfg


def _mapping_from(cfg: dict, args) -> MappingParams:
    params = MappingParams.from_dict(cfg.get("mapping", {})) if cfg.get("mapping") \
        else MappingParams()
    if getattr(args, "literal_eq12", False):
        params.literal_eq12 = True
    return params


def _profile_from(cfg: dict) -> CalibrationProfile:
    if cfg.get("calibration"):
        return CalibrationProfile.from_json_dict(cfg["calibration"])
    return CalibrationProfile.default()


def _scenario_from(cfg: dict, args) -> ScenarioConfig:
    course = cfg.get("course", {})
    scen = cfg.get("scenario", {})
    seed = args.seed if args.seed is not None else scen.get("seed", 0)
    return ScenarioConfig(
        scenario_id=scen.get("id", "figure8-default"),
        straight_len=course.get("straight_len", 4.0),
        radius=course.get("radius", 1.0),
        dt=scen.get("dt", 0.02),
        duration_cap_s=scen.get("duration_cap_s", 240.0),
        seed=int(seed),
        driver=DriverParams(**cfg.get("driver", {})),
        mapping=_mapping_from(cfg, args),
        profile=_profile_from(cfg),
        noise=NoiseParams(**cfg.get("noise", {})),
    )


def _coupling_from(cfg: dict) -> CouplingParams:
    return CouplingParams(**cfg.get("coupling", {}))


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_metrics_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scenario", "CT", "A_a", "A_e"])
        for r in rows:
            ct = "" if r.get("CT") is None else f"{r['CT']:.6f}"
            writer.writerow([r["scenario"], ct, f"{r['A_a']:.6f}", f"{r['A_e']:.6f}"])


def cmd_drive(args) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from(cfg, args)
    out = _out_dir(args)
    trace, metrics, status = run_closed_loop(scenario)
    trace.save_jsonl(out / "trace.jsonl")
    build_figure8(scenario.straight_len, scenario.radius).save(out / "path.json")
    _write_metrics_csv(out / "metrics.csv", [metrics])
    print(f"status={status} CT={metrics['CT']} A_a={metrics['A_a']:.4f} "
          f"A_e={metrics['A_e']:.4f} safety_stops={metrics['safety_stops']}")
    return EXIT_OK if status == "completed" else EXIT_ABORTED


def cmd_velocity_space(args) -> int:
    cfg = _load_config(args.config)
    pts = velocity_space_sweep(_profile_from(cfg), _mapping_from(cfg, args),
                               n_delta=args.resolution, n_theta=args.resolution)
    out = _out_dir(args)
    with open(out / "velocity_space.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["v_norm", "w_norm"])
        writer.writerows((f"{v:.6f}", f"{w:.6f}") for v, w in pts)
    print(f"wrote {len(pts)} points to {out / 'velocity_space.csv'}")
    return EXIT_OK


def cmd_stiffness_sweep(args) -> int:
    cfg = _load_config(args.config)
    kappas = [float(k) for k in args.kappas.split(",") if k.strip()]
    if not kappas:
        raise ConfigurationError("no stiffness values given")
    rows = stiffness_study(kappas, _coupling_from(cfg), dt=args.dt)
    out = _out_dir(args)
    with open(out / "stiffness.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["kappa", "A_aa", "rise_time", "overshoot", "status"])
        for r in rows:
            writer.writerow([f"{r['kappa']:.1f}", f"{r['A_aa']:.6f}",
                             f"{r['rise_time']:.4f}", f"{r['overshoot']:.4f}",
                             r["status"]])
    for r in rows:
        print(f"kappa={r['kappa']:.0f} A_aa={r['A_aa']:.4f} status={r['status']}")
    return EXIT_OK


def cmd_simulate_coupling(args) -> int:
    cfg = _load_config(args.config)
    params = _coupling_from(cfg)
    params.kappa = args.kappa
    trace = simulate(ForceProfile.staged_default(params), params, dt=args.dt)
    out = _out_dir(args)
    trace.save_jsonl(out / "coupling_trace.jsonl")
    print(f"wrote {len(trace)} steps to {out / 'coupling_trace.jsonl'}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    trace = RunTrace.load_jsonl(args.trace)
    path = PathSpec.load(args.path)
    ct = completion_time(trace, path)
    row = {"scenario": args.scenario, "CT": ct, "A_a": avg_accel(trace),
           "A_e": cross_error(trace, path)}
    out = _out_dir(args)
    _write_metrics_csv(out / "metrics.csv", [row])
    ct_text = "incomplete" if ct is None else f"{ct:.2f}"
    print(f"CT={ct_text} A_a={row['A_a']:.4f} A_e={row['A_e']:.4f}")
    return EXIT_OK if ct is not None else EXIT_ABORTED


def cmd_calibrate(args) -> int:
    frames = load_frames_jsonl(args.recording)
    profile = calibrate_recording(frames, sample_rate=args.sample_rate)
    out = _out_dir(args)
    profile.save(out / "profile.json")
    print(f"alpha={[round(a, 4) for a in profile.alpha]}")
    print(f"delta_ref={[round(d, 4) for d in profile.delta_ref]}")
    print(f"beta={[round(b, 4) for b in profile.beta]}")
    print(f"wrote {out / 'profile.json'}")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _load_config(args.config)
    svc = cfg.get("service", {})
    config = ServiceConfig(host=args.host or svc.get("host", "127.0.0.1"),
                           port=args.port or svc.get("port", 8642),
                           profile=_profile_from(cfg),
                           mapping=_mapping_from(cfg, args))
    serve(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torsodrive",
        description="Torso-posture drive interface: simulation, sweeps and live service")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override scenario seed")
    parser.add_argument("--literal-eq12", action="store_true", dest="literal_eq12",
                        help="use the discontinuous right-turn angular weight branch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("drive", help="closed-loop figure-8 run with the virtual rider")
    p.set_defaults(func=cmd_drive)

    p = sub.add_parser("velocity-space", help="sweep the attainable (v, w) set")
    p.add_argument("--resolution", type=int, default=60)
    p.set_defaults(func=cmd_velocity_space)

    p = sub.add_parser("stiffness-sweep", help="vibration metrics per spring stiffness")
    p.add_argument("--kappas", default="2000,2500,3000",
                   help="comma-separated stiffness values in N/m")
    p.add_argument("--dt", type=float, default=1e-3)
    p.set_defaults(func=cmd_stiffness_sweep)

    p = sub.add_parser("simulate-coupling", help="staged-force coupling simulation")
    p.add_argument("--kappa", type=float, default=2000.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.set_defaults(func=cmd_simulate_coupling)

    p = sub.add_parser("metrics", help="score a recorded trace against a course")
    p.add_argument("trace", help="run trace (JSON lines)")
    p.add_argument("path", help="course file (JSON)")
    p.add_argument("--scenario", default="replay")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("calibrate", help="build a profile from a labeled recording")
    p.add_argument("recording", help="sensor stream (JSON lines with labels)")
    p.add_argument("--sample-rate", type=float, default=50.0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("serve", help="run the live telemetry service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InputError, InsufficientDataError,
            CalibrationError, PendulumFell, ValueError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
