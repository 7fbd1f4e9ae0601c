"""Result export: delimited files, JSON records, and rendered figures.

CSV and JSON outputs are fully deterministic for a given config and seed
(floats are written with shortest round-trip repr, wall times are never
serialised); figures are rendered next to them with the Agg backend.
"""

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .config import ExperimentConfig, config_to_dict
from .experiment import SweepResult

SWEEP_COLUMNS = ("snr_db", "rrmse_tau", "rrmse_nu", "crb_tau", "crb_nu", "trials_ok")
TIMING_COLUMNS = ("k", "stage1_s", "stage2_s", "total_s", "trials")


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return "inf" if value == float("inf") else repr(value)
    return str(value)


def write_sweep_csv(path, result: SweepResult):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in result.rows():
            values = dict(row)
            if values["snr_db"] is None:  # noiseless point
                values["snr_db"] = float("inf")
            writer.writerow([_fmt(values[col]) for col in SWEEP_COLUMNS])
    return path


def write_trials_json(path, cfg: ExperimentConfig, result: SweepResult):
    path = Path(path)
    payload = {
        "config": config_to_dict(cfg),
        "points": [
            {
                "snr_db": point.snr_db,
                "records": [r.to_record() for r in point.records],
            }
            for point in result.points
        ],
    }
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def write_timing_csv(path, rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TIMING_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[col]) for col in TIMING_COLUMNS])
    return path


def write_single_json(path, cfg: ExperimentConfig, scene, record, estimates):
    path = Path(path)
    payload = {
        "config": config_to_dict(cfg),
        "truth": [
            {
                "delay_s": t.delay_s,
                "doppler_hz": t.doppler_hz,
                "gain": [t.gain.real, t.gain.imag],
            }
            for t in scene.targets
        ],
        "estimates": [
            {"delay_s": tau, "doppler_hz": nu, "gain": [g.real, g.imag]}
            for tau, nu, g in estimates
        ],
        "metrics": record.to_record(),
    }
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def plot_sweep(path, result: SweepResult):
    """RRMSE-versus-SNR curves (delay and Doppler panels) with CRB overlays."""
    rows = [r for r in result.rows() if r["snr_db"] is not None]
    if not rows:
        return None
    snr = [r["snr_db"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.6), sharex=True)
    for ax, key, crb_key, label in (
        (axes[0], "rrmse_tau", "crb_tau", "delay RRMSE (cells)"),
        (axes[1], "rrmse_nu", "crb_nu", "Doppler RRMSE (cells)"),
    ):
        ax.semilogy(snr, [r[key] for r in rows], "o-", label="pipeline")
        if any(r[crb_key] is not None for r in rows):
            ax.semilogy(
                snr,
                [r[crb_key] if r[crb_key] is not None else float("nan") for r in rows],
                "k--",
                label="CRB",
            )
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_timing(path, rows):
    """Stage times versus target count."""
    k = [r["k"] for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    ax.plot(k, [r["stage1_s"] for r in rows], "s-", label="stage 1 (Doppler)")
    ax.plot(k, [r["stage2_s"] for r in rows], "o-", label="stage 2 (delays)")
    ax.plot(k, [r["total_s"] for r in rows], "k--", label="total")
    ax.set_xlabel("number of targets")
    ax.set_ylabel("median wall time (s)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_scene_map(path, params, scene, estimates):
    """Truth versus estimates in the delay-Doppler plane, in cell units."""
    tau0 = params.delay_cell_s
    nu0 = params.doppler_cell_hz
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ax.scatter(
        [t.delay_s / tau0 for t in scene.targets],
        [t.doppler_hz / nu0 for t in scene.targets],
        s=120,
        facecolors="none",
        edgecolors="tab:blue",
        label="truth",
    )
    if estimates:
        ax.scatter(
            [e[0] / tau0 for e in estimates],
            [e[1] / nu0 for e in estimates],
            marker="x",
            color="tab:red",
            label="estimate",
        )
    ax.set_xlabel("delay (cells)")
    ax.set_ylabel("Doppler (cells)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
