"""Monte-Carlo experiment runner: scene generation, SNR sweeps, timing.

Every random draw descends from the master seed through named
sub-streams (measurement matrix, scene, noise), so identical configs
reproduce identical outputs and trials are order-independent.
"""

import time
from dataclasses import dataclass, replace

import numpy as np

from . import doppler as doppler_mod
from . import metrics
from .config import ExperimentConfig
from .decompose import build_doppler_matrix, pinv_decompose
from .measurement import (
    DataMatrix,
    MeasurementMatrix,
    NoiseSpec,
    assemble_data,
    make_fourier_selector,
    snr_to_psd,
)
from .pursuit import DelayDictionary, PursuitConfig, build_dictionary, pursue_group
from .scene import Scene, Target, group_by_doppler

_MATRIX_STREAM = 0xA1C
_SCENE_STREAM = 0x5CE
_NOISE_STREAM = 0x401

_REJECTION_CAP = 100_000


class SceneInfeasibleError(RuntimeError):
    """Separation constraints could not be met within the rejection cap."""


def _stream_rng(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


@dataclass
class TrialRecord:
    """Per-trial metrics; wall times stay in memory and are never serialised."""

    trial: int
    snr_db: float | None
    rrmse_tau: float | None
    rrmse_nu: float | None
    matched: int
    unmatched_truth: int
    unmatched_estimates: int
    shortfall: bool
    snr_gains: list
    crb_tau_cells: float | None
    crb_nu_cells: float | None
    failure: str | None
    stage_times_s: dict
    estimates: list | None = None  # selected (delay, doppler, gain) triples

    def to_record(self) -> dict:
        return {
            "trial": self.trial,
            "snr_db": self.snr_db,
            "rrmse_tau": self.rrmse_tau,
            "rrmse_nu": self.rrmse_nu,
            "matched": self.matched,
            "unmatched_truth": self.unmatched_truth,
            "unmatched_estimates": self.unmatched_estimates,
            "shortfall": self.shortfall,
            "snr_gains": self.snr_gains,
            "crb_tau_cells": self.crb_tau_cells,
            "crb_nu_cells": self.crb_nu_cells,
            "failure": self.failure,
        }


@dataclass
class SweepPoint:
    snr_db: float | None
    records: list

    def ok_records(self):
        return [r for r in self.records if r.failure is None and r.rrmse_tau is not None]

    def aggregate(self) -> dict:
        ok = self.ok_records()
        row = {
            "snr_db": self.snr_db,
            "rrmse_tau": _rms([r.rrmse_tau for r in ok]),
            "rrmse_nu": _rms([r.rrmse_nu for r in ok]),
            "crb_tau": _rms([r.crb_tau_cells for r in ok if r.crb_tau_cells is not None]),
            "crb_nu": _rms([r.crb_nu_cells for r in ok if r.crb_nu_cells is not None]),
            "trials_ok": len(ok),
        }
        return row

    def median_rrmse(self):
        ok = self.ok_records()
        if not ok:
            return None, None
        return (
            float(np.median([r.rrmse_tau for r in ok])),
            float(np.median([r.rrmse_nu for r in ok])),
        )


@dataclass
class SweepResult:
    points: list

    def rows(self) -> list:
        return [p.aggregate() for p in self.points]


def _rms(values) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return float(np.sqrt(np.mean(np.square(values))))


def random_scene(cfg: ExperimentConfig, rng) -> Scene:
    """Draw a scene satisfying the pairwise separation constraints.

    Delays, Dopplers, gain amplitudes and phases are uniform on their
    configured ranges; whole scenes are rejected until every pair is
    separated by the configured number of delay and Doppler cells.
    """
    spec = cfg.scene
    p = cfg.radar
    if spec.targets is not None:
        targets = [Target(row[0], row[1], complex(row[2], row[3])) for row in spec.targets]
        return group_by_doppler(p, targets)
    k = spec.num_targets
    min_dtau = spec.min_delay_sep_cells * p.delay_cell_s
    min_dnu = spec.min_doppler_sep_cells * p.doppler_cell_hz
    for _ in range(_REJECTION_CAP):
        taus = rng.uniform(*spec.delay_range_s, size=k)
        nus = rng.uniform(*spec.doppler_range_hz, size=k)
        if k > 1:
            dt = np.abs(taus[:, None] - taus[None, :])
            dn = np.abs(nus[:, None] - nus[None, :])
            off = ~np.eye(k, dtype=bool)
            if dt[off].min() < min_dtau or dn[off].min() < min_dnu:
                continue
        amps = rng.uniform(*spec.gain_range, size=k)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
        gains = amps * np.exp(1j * phases)
        targets = [Target(float(t), float(f), complex(g)) for t, f, g in zip(taus, nus, gains)]
        return group_by_doppler(p, targets)
    raise SceneInfeasibleError(
        f"no scene with {k} targets met the separation constraints "
        f"within {_REJECTION_CAP} attempts"
    )


def build_measurement(cfg: ExperimentConfig) -> MeasurementMatrix:
    seed = np.random.SeedSequence([cfg.seed, _MATRIX_STREAM]).generate_state(1)[0]
    return make_fourier_selector(cfg.radar, cfg.measurement_rows, int(seed))


def resolve_max_atoms(total_targets: int, num_groups: int) -> int:
    """Per-group atom cap: the largest group size consistent with the counts."""
    return max(1, total_targets - num_groups + 1)


def _total_targets(cfg: ExperimentConfig) -> int:
    if cfg.scene.targets is not None:
        return len(cfg.scene.targets)
    return cfg.scene.num_targets


def _pursuit_config(cfg: ExperimentConfig, num_groups: int) -> PursuitConfig:
    ps = cfg.estimator.pursuit
    max_atoms = ps.max_atoms
    if max_atoms is None:
        max_atoms = resolve_max_atoms(_total_targets(cfg), max(num_groups, 1))
    return PursuitConfig(
        max_atoms=max_atoms,
        residual_stop_ratio=ps.residual_stop_ratio,
        refine_max_iter=ps.refine_max_iter,
        refine_step_tol_cells=ps.refine_step_tol_cells,
        grid_step_cells=ps.grid_step_cells,
    )


def run_pipeline(
    data: DataMatrix,
    mm: MeasurementMatrix,
    cfg: ExperimentConfig,
    model_order: int | None = None,
    dictionary: DelayDictionary | None = None,
):
    """Full two-stage estimate from one data matrix.

    Returns (estimates, diagnostics, stage_times): estimates are (delay,
    doppler, gain) triples pooled over groups; stage 1 is Doppler
    estimation, stage 2 the pseudo-inverse decomposition plus the
    per-group pursuits.
    """
    est = cfg.estimator
    params = data.params
    order = model_order if model_order is not None else est.model_order
    t0 = time.perf_counter()
    if order is None:
        order = doppler_mod.estimate_model_order(data)
    if est.method == "esprit":
        stage1 = doppler_mod.esprit_doppler(data, order)
    elif est.method == "esprit-fb":
        stage1 = doppler_mod.esprit_fb_doppler(data, order, est.subarray_len)
    elif est.method == "dft":
        stage1 = doppler_mod.dft_doppler(data, order)
    else:
        raise ValueError(f"unknown estimation method {est.method!r}")
    dopplers = doppler_mod.merge_close(
        stage1.dopplers_hz, est.merge_tol_cells * params.doppler_cell_hz
    )
    t1 = time.perf_counter()
    pursuit_cfg = _pursuit_config(cfg, dopplers.size)
    if dictionary is None:
        dictionary = build_dictionary(
            mm, params, pursuit_cfg.grid_step_cells * params.delay_cell_s
        )
    dm = build_doppler_matrix(dopplers, params.num_pulses, params.pri_s)
    channels = pinv_decompose(data, dm)
    groups = [pursue_group(c, dictionary, pursuit_cfg) for c in channels]
    t2 = time.perf_counter()
    estimates = [
        (float(tau), g.doppler_hz, complex(gain))
        for g in groups
        for tau, gain in zip(g.delays_s, g.gains)
    ]
    diagnostics = {
        "doppler": stage1,
        "groups": groups,
        "snr_gains": [c.predicted_snr_gain for c in channels],
    }
    times = {"stage1_s": t1 - t0, "stage2_s": t2 - t1}
    return estimates, diagnostics, times


def run_trial(
    cfg: ExperimentConfig,
    mm: MeasurementMatrix,
    scene: Scene,
    snr_db: float | None,
    noise_rng,
    dictionary: DelayDictionary | None = None,
    trial_index: int = 0,
) -> TrialRecord:
    """One synthesis + estimate + score pass; failures become tagged records."""
    params = cfg.radar
    cells = metrics.CellSizes.from_params(params)
    psd = 0.0 if snr_db is None else snr_to_psd(scene, mm, snr_db)
    noise = NoiseSpec(psd=psd, bandwidth_hz=params.bandwidth_hz)
    data, _ = assemble_data(scene, mm, noise, noise_rng)
    model_order = cfg.estimator.model_order or scene.num_groups
    crb_tau = crb_nu = None
    try:
        estimates, diagnostics, times = run_pipeline(
            data, mm, cfg, model_order=model_order, dictionary=dictionary
        )
        top, shortfall = metrics.select_top_k(estimates, scene.num_targets)
        match = metrics.match_targets(scene.targets, top, cells)
        rrmse_tau, rrmse_nu = metrics.rrmse(match, cells)
        if cfg.sweep.compute_crb and psd > 0:
            variance = noise.compressed_variance(mm.rows, mm.cols)
            report = metrics.crb(scene, mm, variance)
            if report.conditioning_ok:
                crb_tau = float(
                    np.sqrt(np.mean(report.delay_var_s2)) / cells.delay_cell_s
                )
                crb_nu = float(
                    np.sqrt(np.mean(report.doppler_var_hz2)) / cells.doppler_cell_hz
                )
        return TrialRecord(
            trial=trial_index,
            snr_db=snr_db,
            rrmse_tau=rrmse_tau,
            rrmse_nu=rrmse_nu,
            matched=len(match.pairs),
            unmatched_truth=len(match.unmatched_truth),
            unmatched_estimates=len(match.unmatched_estimates),
            shortfall=shortfall,
            snr_gains=[float(g) for g in diagnostics["snr_gains"]],
            crb_tau_cells=crb_tau,
            crb_nu_cells=crb_nu,
            failure=None,
            stage_times_s=times,
            estimates=top,
        )
    except (doppler_mod.DegenerateSubspaceError, metrics.UndefinedMetricError, np.linalg.LinAlgError) as exc:
        return TrialRecord(
            trial=trial_index,
            snr_db=snr_db,
            rrmse_tau=None,
            rrmse_nu=None,
            matched=0,
            unmatched_truth=scene.num_targets,
            unmatched_estimates=0,
            shortfall=True,
            snr_gains=[],
            crb_tau_cells=None,
            crb_nu_cells=None,
            failure=type(exc).__name__,
            stage_times_s={},
        )


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Monte-Carlo sweep over the configured SNR points."""
    if cfg.sweep.trials < 1:
        raise ValueError("sweeps need at least one trial per point")
    snr_points = [None] if cfg.sweep.noiseless else sorted(cfg.sweep.snr_db)
    if not snr_points:
        raise ValueError("empty SNR list")
    mm = build_measurement(cfg)
    dictionary = build_dictionary(
        mm,
        cfg.radar,
        cfg.estimator.pursuit.grid_step_cells * cfg.radar.delay_cell_s,
    )
    fixed = (
        random_scene(cfg, _stream_rng(cfg.seed, _SCENE_STREAM))
        if cfg.sweep.fixed_scene or cfg.scene.targets is not None
        else None
    )
    points = []
    for pi, snr_db in enumerate(snr_points):
        records = []
        for trial in range(cfg.sweep.trials):
            scene = (
                fixed
                if fixed is not None
                else random_scene(cfg, _stream_rng(cfg.seed, _SCENE_STREAM, pi, trial))
            )
            noise_rng = _stream_rng(cfg.seed, _NOISE_STREAM, pi, trial)
            records.append(
                run_trial(cfg, mm, scene, snr_db, noise_rng, dictionary, trial)
            )
        points.append(SweepPoint(snr_db=snr_db, records=records))
    return SweepResult(points=points)


def run_timing(
    cfg: ExperimentConfig, k_list, trials: int = 5, snr_db: float = 20.0
) -> list:
    """Median per-stage wall times for each target count in ``k_list``.

    One warm-up trial per target count is discarded; the dictionary is
    built once and excluded (it is a per-measurement-matrix constant).
    """
    if list(k_list) != sorted(k_list):
        raise ValueError("k_list must be ascending")
    mm = build_measurement(cfg)
    dictionary = build_dictionary(
        mm,
        cfg.radar,
        cfg.estimator.pursuit.grid_step_cells * cfg.radar.delay_cell_s,
    )
    rows = []
    for k in k_list:
        k_cfg = replace(cfg, scene=replace(cfg.scene, num_targets=int(k)))
        stage1, stage2 = [], []
        for trial in range(trials + 1):
            scene = random_scene(k_cfg, _stream_rng(cfg.seed, _SCENE_STREAM, k, trial))
            noise_rng = _stream_rng(cfg.seed, _NOISE_STREAM, k, trial)
            record = run_trial(
                k_cfg, mm, scene, snr_db, noise_rng, dictionary, trial
            )
            if trial == 0 or record.failure is not None:  # warm-up / failure
                continue
            stage1.append(record.stage_times_s["stage1_s"])
            stage2.append(record.stage_times_s["stage2_s"])
        rows.append(
            {
                "k": int(k),
                "stage1_s": float(np.median(stage1)),
                "stage2_s": float(np.median(stage2)),
                "total_s": float(np.median(np.array(stage1) + np.array(stage2))),
                "trials": len(stage1),
            }
        )
    return rows
