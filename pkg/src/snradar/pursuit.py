"""Greedy delay/gain recovery with continuous refinement, per Doppler group.

Each per-Doppler measurement vector is decomposed on a grid of compressed
delay atoms by orthogonal matching pursuit; after every atom selection all
active delays are refined jointly off the grid by a damped Gauss-Newton
descent on the variable-projection objective (gains eliminated by least
squares), so sub-cell accuracy comes from the refinement and the grid only
needs one atom per delay cell.  Everything here operates on M-length
compressed vectors; the full M*L data matrix never appears.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import decompose
from .measurement import DataMatrix, MeasurementMatrix, compress_span
from .scene import RadarParams, atom_derivative_span, atom_span

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PursuitConfig:
    """Stop rules and refinement settings for one group pursuit."""

    max_atoms: int = 8
    residual_stop_ratio: float = 1e-3
    refine_max_iter: int = 50
    refine_step_tol_cells: float = 1e-6
    grid_step_cells: float = 1.0
    condition_cap: float = 1e10
    max_step_halvings: int = 20

    def __post_init__(self):
        if self.max_atoms < 1:
            raise ValueError("max_atoms must be at least 1")
        if self.refine_max_iter < 1:
            raise ValueError("refinement needs at least one iteration")
        if not 0.0 < self.grid_step_cells <= 1.0:
            raise ValueError("grid step must lie in (0, 1] delay cells")
        if self.residual_stop_ratio < 0.0:
            raise ValueError("residual stop ratio must be nonnegative")


@dataclass(frozen=True)
class DelayDictionary:
    """Compressed delay atoms on a uniform grid over [0, T - T_p)."""

    delays_s: np.ndarray
    atoms: np.ndarray  # M x G
    norms: np.ndarray
    params: RadarParams
    mm: MeasurementMatrix
    grid_step_s: float


@dataclass(frozen=True)
class GroupEstimate:
    """Delays and gains recovered for one Doppler group."""

    doppler_hz: float
    delays_s: np.ndarray
    gains: np.ndarray
    residual_norms: np.ndarray  # ||r|| before pursuit and after each atom
    iterations: int


def compressed_atoms(mm: MeasurementMatrix, params: RadarParams, delays_s) -> np.ndarray:
    """M x q matrix of compressed atoms at the given delays."""
    delays_s = np.atleast_1d(delays_s)
    out = np.empty((mm.rows, delays_s.size), dtype=complex)
    for j, tau in enumerate(delays_s):
        start, vals = atom_span(params, float(tau))
        out[:, j] = compress_span(mm, vals, start)
    return out


def _compressed_atom_derivs(mm, params, delays_s) -> np.ndarray:
    delays_s = np.atleast_1d(delays_s)
    out = np.empty((mm.rows, delays_s.size), dtype=complex)
    for j, tau in enumerate(delays_s):
        start, vals = atom_derivative_span(params, float(tau))
        out[:, j] = compress_span(mm, vals, start)
    return out


def build_dictionary(
    mm: MeasurementMatrix, params: RadarParams, grid_step_s: float
) -> DelayDictionary:
    """Grid the unambiguous delay interval and compress one atom per point."""
    if grid_step_s <= 0.0:
        raise ValueError("grid step must be positive")
    count = int(np.ceil(params.max_delay_s / grid_step_s))
    if count < 1:
        raise ValueError("delay grid is empty")
    delays = np.arange(count) * grid_step_s
    atoms = compressed_atoms(mm, params, delays)
    norms = np.linalg.norm(atoms, axis=0)
    return DelayDictionary(
        delays_s=delays,
        atoms=atoms,
        norms=norms,
        params=params,
        mm=mm,
        grid_step_s=grid_step_s,
    )


def _least_squares(atoms: np.ndarray, y: np.ndarray):
    gains, *_ = np.linalg.lstsq(atoms, y, rcond=None)
    residual = y - atoms @ gains
    return gains, residual


def _refine_delays(
    y: np.ndarray, delays: np.ndarray, dictionary: DelayDictionary, cfg: PursuitConfig
) -> np.ndarray:
    """Damped Gauss-Newton descent on ||y - D(tau) D(tau)^+ y||^2.

    Gains are eliminated by least squares at every evaluation (variable
    projection); a step is accepted only if the objective decreases, and a
    fully rejected step ends the refinement with the delays unchanged.
    """
    params, mm = dictionary.params, dictionary.mm
    step_tol = cfg.refine_step_tol_cells * params.delay_cell_s
    upper = params.max_delay_s * (1.0 - 1e-12)
    delays = np.array(delays, dtype=float)
    atoms = compressed_atoms(mm, params, delays)
    gains, residual = _least_squares(atoms, y)
    objective = float(np.real(np.vdot(residual, residual)))
    for _ in range(cfg.refine_max_iter):
        derivs = _compressed_atom_derivs(mm, params, delays)
        # Variable-projection Jacobian (Kaufman form): -P_perp * d_dot_j * gain_j
        coeffs, *_ = np.linalg.lstsq(atoms, derivs, rcond=None)
        jac = -(derivs - atoms @ coeffs) * gains[None, :]
        jac_real = np.vstack([jac.real, jac.imag])
        res_real = np.concatenate([residual.real, residual.imag])
        step, *_ = np.linalg.lstsq(jac_real, -res_real, rcond=None)
        accepted = False
        scale = 1.0
        for _ in range(cfg.max_step_halvings):
            candidate = np.clip(delays + scale * step, 0.0, upper)
            cand_atoms = compressed_atoms(mm, params, candidate)
            cand_gains, cand_residual = _least_squares(cand_atoms, y)
            cand_objective = float(np.real(np.vdot(cand_residual, cand_residual)))
            if cand_objective < objective:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            logger.debug("refinement step rejected; keeping delays %s", delays)
            break
        moved = float(np.max(np.abs(candidate - delays)))
        delays = candidate
        atoms, gains, residual = cand_atoms, cand_gains, cand_residual
        objective = cand_objective
        if moved < step_tol:
            break
    return delays


def pursue_group(
    channel: decompose.PerDopplerVector,
    dictionary: DelayDictionary,
    cfg: PursuitConfig,
) -> GroupEstimate:
    """Recover the delays and gains of one Doppler group.

    Outer loop: pick the grid atom most correlated with the residual, add
    it, refine all active delays jointly, re-fit gains, update the
    residual.  Stops on the residual ratio, the atom cap, or an
    ill-conditioned active set (newest atom dropped).  The residual norm
    never increases across outer iterations.
    """
    y = channel.values
    params, mm = dictionary.params, dictionary.mm
    y_norm = float(np.linalg.norm(y))
    history = [y_norm]
    delays = np.empty(0, dtype=float)
    gains = np.empty(0, dtype=complex)
    residual = y.copy()
    iterations = 0
    while delays.size < cfg.max_atoms and np.linalg.norm(residual) > cfg.residual_stop_ratio * y_norm:
        scores = np.abs(dictionary.atoms.conj().T @ residual) / dictionary.norms
        pick = float(dictionary.delays_s[int(np.argmax(scores))])
        trial = np.append(delays, pick)
        atoms = compressed_atoms(mm, params, trial)
        if trial.size > 1 and np.linalg.cond(atoms) > cfg.condition_cap:
            logger.debug("atom at %.3e left out: active set ill-conditioned", pick)
            break
        trial = _refine_delays(y, trial, dictionary, cfg)
        atoms = compressed_atoms(mm, params, trial)
        gains, residual = _least_squares(atoms, y)
        delays = trial
        iterations += 1
        history.append(float(np.linalg.norm(residual)))
    return GroupEstimate(
        doppler_hz=channel.doppler_hz,
        delays_s=delays,
        gains=gains,
        residual_norms=np.array(history),
        iterations=iterations,
    )


def estimate_all(
    data: DataMatrix,
    mm: MeasurementMatrix,
    dopplers_hz,
    cfg: PursuitConfig,
    dictionary: DelayDictionary | None = None,
) -> list[GroupEstimate]:
    """Decompose the data per Doppler shift and pursue each group independently."""
    dopplers = np.atleast_1d(np.asarray(dopplers_hz, dtype=float))
    if dopplers.size == 0:
        return []
    params = data.params
    if dictionary is None:
        dictionary = build_dictionary(
            mm, params, cfg.grid_step_cells * params.delay_cell_s
        )
    dm = decompose.build_doppler_matrix(dopplers, params.num_pulses, params.pri_s)
    channels = decompose.pinv_decompose(data, dm)
    return [pursue_group(channel, dictionary, cfg) for channel in channels]
