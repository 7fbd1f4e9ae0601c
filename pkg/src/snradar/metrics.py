"""Estimate-to-truth matching, RRMSE metrics, CRB, and empirical SNR.

Errors are reported in resolution-cell units: one delay cell is 1/B and
one Doppler cell is 1/(L*T).  Truth/estimate pairing uses an optimal
one-to-one assignment on the normalised squared distance, so the metrics
are invariant to labelling order.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .measurement import MeasurementMatrix, NoiseSpec, _noise_block, compressed_signal
from .scene import (
    _EDGE_STEP_FRACTION,
    RadarParams,
    Scene,
    atom_derivative,
    atom_samples,
)


class UndefinedMetricError(ValueError):
    """Raised when a metric is requested over an empty match."""


@dataclass(frozen=True)
class CellSizes:
    delay_cell_s: float
    doppler_cell_hz: float

    def __post_init__(self):
        if self.delay_cell_s <= 0 or self.doppler_cell_hz <= 0:
            raise ValueError("cell sizes must be positive")

    @classmethod
    def from_params(cls, params: RadarParams) -> "CellSizes":
        return cls(params.delay_cell_s, params.doppler_cell_hz)


@dataclass(frozen=True)
class MatchResult:
    """One-to-one truth/estimate pairing with per-pair errors."""

    pairs: tuple  # (truth_index, estimate_index) pairs
    unmatched_truth: tuple
    unmatched_estimates: tuple
    delay_errors_s: np.ndarray
    doppler_errors_hz: np.ndarray
    distances: np.ndarray  # normalised distance per pair


@dataclass(frozen=True)
class CrbReport:
    """Per-target delay/Doppler CRB diagonal entries (s^2 and Hz^2)."""

    delay_var_s2: np.ndarray
    doppler_var_hz2: np.ndarray
    noise_variance: float
    conditioning_ok: bool


def select_top_k(estimates, k: int):
    """The k estimates of largest gain magnitude, plus a shortfall flag.

    Estimates are (delay, doppler, gain) triples; ties break on smaller
    delay, then smaller Doppler.  Returns everything (flagged) when fewer
    than k estimates exist.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    ranked = sorted(estimates, key=lambda e: (-abs(e[2]), e[0], e[1]))
    return ranked[:k], len(ranked) < k


def _coords(item):
    if hasattr(item, "delay_s"):
        return float(item.delay_s), float(item.doppler_hz)
    return float(item[0]), float(item[1])


def match_targets(truth, estimates, cells: CellSizes) -> MatchResult:
    """Minimum-cost one-to-one assignment in normalised cell units."""
    truth_xy = [_coords(t) for t in truth]
    est_xy = [_coords(e) for e in estimates]
    if not truth_xy or not est_xy:
        return MatchResult(
            pairs=(),
            unmatched_truth=tuple(range(len(truth_xy))),
            unmatched_estimates=tuple(range(len(est_xy))),
            delay_errors_s=np.empty(0),
            doppler_errors_hz=np.empty(0),
            distances=np.empty(0),
        )
    cost = np.empty((len(truth_xy), len(est_xy)))
    for i, (tau, nu) in enumerate(truth_xy):
        for j, (tau_e, nu_e) in enumerate(est_xy):
            cost[i, j] = ((tau_e - tau) / cells.delay_cell_s) ** 2 + (
                (nu_e - nu) / cells.doppler_cell_hz
            ) ** 2
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(zip(rows.tolist(), cols.tolist()))
    d_tau = np.array([est_xy[j][0] - truth_xy[i][0] for i, j in pairs])
    d_nu = np.array([est_xy[j][1] - truth_xy[i][1] for i, j in pairs])
    return MatchResult(
        pairs=pairs,
        unmatched_truth=tuple(i for i in range(len(truth_xy)) if i not in set(rows)),
        unmatched_estimates=tuple(j for j in range(len(est_xy)) if j not in set(cols)),
        delay_errors_s=d_tau,
        doppler_errors_hz=d_nu,
        distances=np.sqrt(cost[rows, cols]),
    )


def rrmse(match: MatchResult, cells: CellSizes):
    """Cell-normalised root-mean-square errors (delay, Doppler) over matched pairs."""
    if len(match.pairs) == 0:
        raise UndefinedMetricError("no matched pairs; RRMSE is undefined")
    tau = math.sqrt(np.mean((match.delay_errors_s / cells.delay_cell_s) ** 2))
    nu = math.sqrt(np.mean((match.doppler_errors_hz / cells.doppler_cell_hz) ** 2))
    return tau, nu


def _flat_targets(scene: Scene):
    return [
        (gi, ti)
        for gi, (_, members) in enumerate(scene.doppler_groups)
        for ti in members
    ]


def _model_jacobian(scene: Scene, mm: MeasurementMatrix):
    """Jacobian of the vectorised noise-free data w.r.t. the real parameters.

    Parameter order: every delay (group-major), every group Doppler, the
    real part of every gain, then the imaginary part of every gain.
    """
    p = scene.params
    pulses = np.arange(p.num_pulses)
    flat = _flat_targets(scene)
    k_total = len(flat)
    k_groups = scene.num_groups
    num_rows = mm.rows * p.num_pulses
    jac = np.empty((num_rows, 3 * k_total + k_groups), dtype=complex)

    c_atom = {ti: mm.entries @ atom_samples(p, scene.targets[ti].delay_s) for _, ti in flat}
    c_deriv = {ti: mm.entries @ atom_derivative(p, scene.targets[ti].delay_s) for _, ti in flat}
    phases = [
        np.exp(2j * np.pi * nu * pulses * p.pri_s) for nu, _ in scene.doppler_groups
    ]
    ramp = 2j * np.pi * pulses * p.pri_s

    def vec(matrix):  # (M, L) -> column-wise vectorisation
        return matrix.ravel(order="F")

    for col, (gi, ti) in enumerate(flat):
        gain = scene.targets[ti].gain
        jac[:, col] = vec(np.outer(gain * c_deriv[ti], phases[gi]))
    for gi, (_, members) in enumerate(scene.doppler_groups):
        group_sum = sum(scene.targets[ti].gain * c_atom[ti] for ti in members)
        jac[:, k_total + gi] = vec(np.outer(group_sum, ramp * phases[gi]))
    for col, (gi, ti) in enumerate(flat):
        base = vec(np.outer(c_atom[ti], phases[gi]))
        jac[:, k_total + k_groups + col] = base  # d/d Re(gain)
        jac[:, 2 * k_total + k_groups + col] = 1j * base  # d/d Im(gain)
    return jac, flat


def check_delay_jacobian(params: RadarParams, delay_s: float, tol: float = 1e-4):
    """Central-difference check of the atom delay derivative.

    Samples within the difference window of a pulse-support boundary are
    excluded: the sampled atom jumps there and has no classical
    derivative (the stored derivative uses a one-sided estimate on them).
    Raises on mismatch beyond ``tol`` (relative, over the kept samples).
    """
    h = 1e-3 * params.nyq_interval_s
    fd = (atom_samples(params, delay_s + h) - atom_samples(params, delay_s - h)) / (2 * h)
    analytic = atom_derivative(params, delay_s)
    offsets = np.arange(params.nyq_count) * params.nyq_interval_s - delay_s
    guard = h + 2 * _EDGE_STEP_FRACTION * params.nyq_interval_s
    keep = (np.abs(offsets) > guard) & (np.abs(offsets - params.pulse_width_s) > guard)
    scale = np.linalg.norm(analytic[keep])
    err = np.linalg.norm((fd - analytic)[keep]) / max(scale, 1e-300)
    if err > tol:
        raise ValueError(f"delay derivative off by {err:.2e} (tol {tol})")
    return err


def _check_doppler_jacobian(scene: Scene, mm: MeasurementMatrix, jac, tol):
    """Full central-difference check of the Doppler columns (smooth everywhere)."""
    p = scene.params
    h = 1e-3 * p.doppler_cell_hz
    k_total = scene.num_targets

    def model_vec(groups):
        shifted = Scene(params=p, targets=scene.targets, doppler_groups=groups)
        return compressed_signal(shifted, mm).ravel(order="F")

    for gi in range(scene.num_groups):
        plus = tuple(
            (nu + (h if g == gi else 0.0), mem)
            for g, (nu, mem) in enumerate(scene.doppler_groups)
        )
        minus = tuple(
            (nu - (h if g == gi else 0.0), mem)
            for g, (nu, mem) in enumerate(scene.doppler_groups)
        )
        fd = (model_vec(plus) - model_vec(minus)) / (2 * h)
        analytic = jac[:, k_total + gi]
        err = np.linalg.norm(fd - analytic) / max(np.linalg.norm(analytic), 1e-300)
        if err > tol:
            raise ValueError(f"Doppler Jacobian column {gi} off by {err:.2e} (tol {tol})")


def crb(
    scene: Scene,
    mm: MeasurementMatrix,
    noise_variance: float,
    check_jacobian: bool = False,
    jacobian_tol: float = 1e-4,
) -> CrbReport:
    """Cramer-Rao bound from the vectorised data model.

    ``noise_variance`` is the per-entry variance of the compressed noise.
    Gains are treated as jointly estimated nuisance parameters (full
    information-matrix inversion).  A singular information matrix sets the
    conditioning flag and reports infinite bounds.
    """
    if scene.num_targets == 0:
        raise ValueError("CRB of an empty scene is undefined")
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    jac, flat = _model_jacobian(scene, mm)
    if check_jacobian:
        for _, ti in flat:
            check_delay_jacobian(scene.params, scene.targets[ti].delay_s, jacobian_tol)
        _check_doppler_jacobian(scene, mm, jac, jacobian_tol)
    fim = (2.0 / noise_variance) * np.real(jac.conj().T @ jac)
    k_total = len(flat)
    k_groups = scene.num_groups
    delay_var = np.full(scene.num_targets, np.inf)
    doppler_var = np.full(scene.num_targets, np.inf)
    # equilibrate before inverting: the raw FIM mixes seconds, hertz and
    # unit gains, whose scale disparity alone would look singular
    scale = np.sqrt(np.diag(fim))
    ok = bool(np.all(scale > 0))
    if ok:
        balanced = fim / np.outer(scale, scale)
        ok = bool(np.linalg.cond(balanced) < 1e12)
    if ok:
        diag = np.diag(np.linalg.inv(balanced)) / scale**2
        for col, (gi, ti) in enumerate(flat):
            delay_var[ti] = diag[col]
            doppler_var[ti] = diag[k_total + gi]
    return CrbReport(
        delay_var_s2=delay_var,
        doppler_var_hz2=doppler_var,
        noise_variance=noise_variance,
        conditioning_ok=ok,
    )


def empirical_snr(
    scene: Scene, mm: MeasurementMatrix, noise: NoiseSpec, trials: int, rng
) -> float:
    """Measured compressed-domain SNR in dB, averaged over pulses and noise draws."""
    if trials < 1:
        raise ValueError("need at least one trial")
    signal = compressed_signal(scene, mm)
    signal_energy = np.sum(np.abs(signal) ** 2, axis=0)
    if not np.any(signal_energy > 0):
        return float("-inf")
    if noise.nyquist_variance == 0:
        return float("inf")
    ratios = []
    for _ in range(trials):
        noise_cs = mm.entries @ _noise_block(scene.params, noise, rng)
        noise_energy = np.sum(np.abs(noise_cs) ** 2, axis=0)
        ratios.append(np.mean(signal_energy / noise_energy))
    return 10.0 * math.log10(float(np.mean(ratios)))
