"""Command-line experiment harness.

Subcommands:

* ``sweep``  -- Monte-Carlo RRMSE-versus-SNR sweep; writes sweep.csv,
  sweep_trials.json and rrmse_vs_snr.png into the output directory.
* ``timing`` -- stage wall times versus target count; writes timing.csv
  and time_vs_k.png.
* ``single`` -- one trial with a printed truth/estimate table; writes
  single.json and delay_doppler_map.png.

Exits 0 on success; fatal failures print a JSON error record to stderr
and exit nonzero.
"""

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import report
from .config import ExperimentConfig, default_config, load_config
from .experiment import (
    SceneInfeasibleError,
    _stream_rng,
    _SCENE_STREAM,
    _NOISE_STREAM,
    build_measurement,
    random_scene,
    run_sweep,
    run_timing,
    run_trial,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snradar",
        description="Sub-Nyquist pulse-Doppler delay/Doppler estimation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("sweep", "Monte-Carlo RRMSE sweep over SNR points"),
        ("timing", "stage wall times versus target count"),
        ("single", "one end-to-end trial with a result table"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, help="JSON config file")
        cmd.add_argument("--seed", type=int, help="master seed override")
        cmd.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        cmd.add_argument(
            "--profile", choices=("desk", "paper"), default="desk",
            help="base parameter profile",
        )
        cmd.add_argument(
            "--method", choices=("esprit", "esprit-fb", "dft"),
            help="Doppler estimator override",
        )
        cmd.add_argument(
            "--no-figures", action="store_true", help="skip figure rendering"
        )
    sub.choices["timing"].add_argument(
        "--k-list", default="2,4,8,16", help="comma-separated target counts"
    )
    sub.choices["timing"].add_argument(
        "--trials", type=int, default=5, help="timed trials per count"
    )
    sub.choices["single"].add_argument(
        "--snr", type=float, help="SNR in dB (default: first sweep point)"
    )
    sub.choices["single"].add_argument(
        "--noiseless", action="store_true", help="run without noise"
    )
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = default_config(args.profile)
    if args.config is not None:
        cfg = load_config(args.config, base=cfg)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.method is not None:
        cfg = replace(cfg, estimator=replace(cfg.estimator, method=args.method))
    return cfg


def _cmd_sweep(args, cfg: ExperimentConfig, out: Path) -> int:
    result = run_sweep(cfg)
    csv_path = report.write_sweep_csv(out / "sweep.csv", result)
    json_path = report.write_trials_json(out / "sweep_trials.json", cfg, result)
    print(f"wrote {csv_path} and {json_path}")
    for row in result.rows():
        label = "inf" if row["snr_db"] is None else f"{row['snr_db']:g}"
        print(
            f"  snr={label} dB  rrmse_tau={row['rrmse_tau']}  "
            f"rrmse_nu={row['rrmse_nu']}  trials_ok={row['trials_ok']}"
        )
    if not args.no_figures:
        fig = report.plot_sweep(out / "rrmse_vs_snr.png", result)
        if fig is not None:
            print(f"wrote {fig}")
    return 0


def _cmd_timing(args, cfg: ExperimentConfig, out: Path) -> int:
    k_list = [int(k) for k in args.k_list.split(",") if k]
    rows = run_timing(cfg, k_list, trials=args.trials)
    csv_path = report.write_timing_csv(out / "timing.csv", rows)
    print(f"wrote {csv_path}")
    for row in rows:
        print(
            f"  k={row['k']:3d}  stage1={row['stage1_s']:.4f}s  "
            f"stage2={row['stage2_s']:.4f}s  total={row['total_s']:.4f}s"
        )
    if not args.no_figures:
        print(f"wrote {report.plot_timing(out / 'time_vs_k.png', rows)}")
    return 0


def _cmd_single(args, cfg: ExperimentConfig, out: Path) -> int:
    snr_db = None if args.noiseless else (
        args.snr if args.snr is not None else cfg.sweep.snr_db[-1]
    )
    mm = build_measurement(cfg)
    scene = random_scene(cfg, _stream_rng(cfg.seed, _SCENE_STREAM))
    record = run_trial(
        cfg, mm, scene, snr_db, _stream_rng(cfg.seed, _NOISE_STREAM, 0, 0)
    )
    top = record.estimates or []
    print(f"{'truth delay (us)':>18} {'truth doppler (kHz)':>20}")
    for t in scene.targets:
        print(f"{t.delay_s * 1e6:18.4f} {t.doppler_hz / 1e3:20.4f}")
    print(f"{'est delay (us)':>18} {'est doppler (kHz)':>20} {'|gain|':>8}")
    for tau, nu, g in top:
        print(f"{tau * 1e6:18.4f} {nu / 1e3:20.4f} {abs(g):8.3f}")
    print(f"rrmse_tau={record.rrmse_tau}  rrmse_nu={record.rrmse_nu}")
    json_path = report.write_single_json(out / "single.json", cfg, scene, record, top)
    print(f"wrote {json_path}")
    if not args.no_figures:
        fig = report.plot_scene_map(out / "delay_doppler_map.png", cfg.radar, scene, top)
        print(f"wrote {fig}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        out = args.out
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "sweep":
            return _cmd_sweep(args, cfg, out)
        if args.command == "timing":
            return _cmd_timing(args, cfg, out)
        return _cmd_single(args, cfg, out)
    except (ValueError, OSError, SceneInfeasibleError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
