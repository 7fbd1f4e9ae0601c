"""Doppler estimation from the compressed data matrix.

Transposing the data matrix turns the pulse dimension into a uniform
"array" of L elements with M snapshots: each distinct Doppler shift is a
source with spatial frequency f = nu * T.  Estimators:

* :func:`esprit_doppler` -- total-least-squares rotational-invariance
  estimator on the principal eigenvectors of the snapshot covariance.
* :func:`esprit_fb_doppler` -- same, after forward-backward spatial
  smoothing along the pulse dimension; use it when groups are coherent
  (identical delay content up to a common scale).
* :func:`dft_doppler` -- on-grid baseline: pick the largest bins of the
  per-snapshot DFT magnitude sum.  Quantises off-grid Dopplers to the
  nearest 1/(L*T) bin.
"""

import math
from dataclasses import dataclass

import numpy as np

from .measurement import DataMatrix

ESPRIT = "esprit"
ESPRIT_FB = "esprit-fb"
DFT = "dft"


class DegenerateSubspaceError(np.linalg.LinAlgError):
    """Snapshot covariance is rank-deficient below the requested model order."""


@dataclass(frozen=True)
class DopplerEstimate:
    """Sorted Doppler estimates plus the spectrum they were read from."""

    dopplers_hz: np.ndarray
    spatial_freqs: np.ndarray
    method: str
    spectrum: np.ndarray  # covariance eigenvalues, or DFT magnitudes for "dft"

    def __post_init__(self):
        if np.any(np.diff(self.dopplers_hz) <= 0) and len(self.dopplers_hz) > 1:
            raise ValueError("doppler estimates must be strictly increasing")


def steering_vector(doppler_hz: float, num_pulses: int, pri_s: float) -> np.ndarray:
    """Pulse-to-pulse phase progression [1, e^{j2\\pi\\nu T}, ...] of one Doppler shift."""
    return np.exp(2j * np.pi * doppler_hz * pri_s * np.arange(num_pulses))


def _snapshot_covariance(data: DataMatrix) -> np.ndarray:
    x = data.entries.T  # L x M: rows are pulses (array elements)
    return x @ x.conj().T / x.shape[1]


def _principal_subspace(cov: np.ndarray, order: int, rank_tol: float):
    """Eigendecompose a Hermitian covariance; return the top-order eigenvectors.

    Raises DegenerateSubspaceError if the spectrum is rank-deficient below
    ``order`` (coherent sources); forward-backward smoothing restores rank.
    """
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    if eigvals[0] <= 0.0 or eigvals[order - 1] <= rank_tol * eigvals[0]:
        raise DegenerateSubspaceError(
            f"covariance rank is below the model order {order}; the source "
            "groups are coherent -- use esprit_fb_doppler"
        )
    return eigvecs[:, :order], eigvals


def _rotational_freqs(subspace: np.ndarray) -> np.ndarray:
    """Spatial frequencies from the shift invariance of the signal subspace (TLS)."""
    order = subspace.shape[1]
    stacked = np.hstack([subspace[:-1], subspace[1:]])
    _, vecs = np.linalg.eigh(stacked.conj().T @ stacked)
    weak = vecs[:, :order]  # eigenvectors of the smallest eigenvalues
    rotation = -weak[:order] @ np.linalg.inv(weak[order:])
    return np.angle(np.linalg.eigvals(rotation)) / (2.0 * np.pi)


def _estimate(data: DataMatrix, freqs: np.ndarray, method: str, spectrum: np.ndarray):
    order = np.argsort(freqs, kind="stable")
    freqs = freqs[order]
    return DopplerEstimate(
        dopplers_hz=freqs / data.params.pri_s,
        spatial_freqs=freqs,
        method=method,
        spectrum=spectrum,
    )


def _check_order(data: DataMatrix, model_order: int):
    num_pulses = data.params.num_pulses
    if model_order < 1:
        raise ValueError("model order must be at least 1")
    if model_order >= num_pulses:
        raise ValueError(
            f"model order {model_order} must be below the pulse count {num_pulses}"
        )


def esprit_doppler(
    data: DataMatrix, model_order: int, rank_tol: float = 1e-10
) -> DopplerEstimate:
    """TLS rotational-invariance Doppler estimator.

    Exact (to numerical precision) on noiseless data when the groups are
    non-coherent; independent of the target delays and gains.
    """
    _check_order(data, model_order)
    cov = _snapshot_covariance(data)
    subspace, eigvals = _principal_subspace(cov, model_order, rank_tol)
    freqs = _rotational_freqs(subspace)
    return _estimate(data, freqs, ESPRIT, eigvals)


def esprit_fb_doppler(
    data: DataMatrix,
    model_order: int,
    subarray_len: int | None = None,
    rank_tol: float = 1e-10,
) -> DopplerEstimate:
    """Rotational-invariance estimator on a forward-backward smoothed covariance.

    Smoothing averages the covariances of ``num_pulses - subarray_len + 1``
    maximally overlapping pulse subarrays with their exchanged conjugates,
    restoring the rank lost to coherent groups.
    """
    _check_order(data, model_order)
    num_pulses = data.params.num_pulses
    if subarray_len is None:
        subarray_len = num_pulses - math.ceil(num_pulses / 4)
    if subarray_len > num_pulses:
        raise ValueError("subarray length exceeds the pulse count")
    if subarray_len <= model_order:
        raise ValueError("subarray length must exceed the model order")
    num_sub = num_pulses - subarray_len + 1
    if 2 * num_sub < model_order:
        raise ValueError(
            f"{num_sub} subarrays (x2 forward-backward) cannot support "
            f"model order {model_order}"
        )
    cov = _snapshot_covariance(data)
    acc = np.zeros((subarray_len, subarray_len), dtype=complex)
    for k in range(num_sub):
        acc += cov[k : k + subarray_len, k : k + subarray_len]
    acc /= num_sub
    smoothed = 0.5 * (acc + np.flip(acc).conj())
    subspace, eigvals = _principal_subspace(smoothed, model_order, rank_tol)
    freqs = _rotational_freqs(subspace)
    return _estimate(data, freqs, ESPRIT_FB, eigvals)


def dft_doppler(data: DataMatrix, model_order: int) -> DopplerEstimate:
    """On-grid Doppler baseline: largest peaks of the noncoherent DFT magnitude sum.

    Peaks are circular local maxima of the integrated magnitude spectrum;
    if fewer than ``model_order`` exist, the largest remaining bins fill in.
    """
    _check_order(data, model_order)
    params = data.params
    transform = np.fft.fft(data.entries, axis=1)  # DFT along the pulse dimension
    magnitude = np.abs(transform).sum(axis=0)
    is_peak = (magnitude >= np.roll(magnitude, 1)) & (magnitude >= np.roll(magnitude, -1))
    ranked = np.argsort(-magnitude, kind="stable")
    bins = [b for b in ranked if is_peak[b]][:model_order]
    if len(bins) < model_order:
        taken = set(bins)
        bins.extend(b for b in ranked if b not in taken)
        bins = bins[:model_order]
    freqs = np.fft.fftfreq(params.num_pulses)[np.array(bins)]
    return _estimate(data, np.sort(freqs), DFT, magnitude)


def estimate_model_order(data: DataMatrix) -> int:
    """Minimum-description-length estimate of the number of Doppler groups.

    Heuristic convenience only; the pipeline normally receives the model
    order from the caller.
    """
    num_pulses = data.params.num_pulses
    if num_pulses < 3:
        raise ValueError("need at least three pulses to estimate the model order")
    eigvals = np.linalg.eigvalsh(_snapshot_covariance(data))[::-1]
    snapshots = data.num_measurements
    # numerically-zero eigenvalues are clamped to a common floor so that a
    # rank-deficient (noiseless) spectrum scores a flat tail
    floor = max(eigvals[0], np.finfo(float).tiny) * 1e-12
    eigvals = np.maximum(eigvals, floor)
    best_order, best_score = 0, np.inf
    for k in range(num_pulses - 1):
        tail = eigvals[k:]
        log_ratio = np.mean(np.log(tail)) - np.log(np.mean(tail))
        score = -snapshots * tail.size * log_ratio
        score += 0.5 * k * (2 * num_pulses - k) * np.log(snapshots)
        if score < best_score:
            best_order, best_score = k, score
    return best_order


def merge_close(dopplers_hz, tol_hz: float) -> np.ndarray:
    """Collapse estimates closer than ``tol_hz`` to their cluster mean, sorted."""
    values = np.sort(np.asarray(dopplers_hz, dtype=float))
    if values.size == 0:
        return values
    clusters = [[values[0]]]
    for v in values[1:]:
        if v - clusters[-1][-1] <= tol_hz:
            clusters[-1].append(v)
        else:
            clusters.append([v])
    return np.array([np.mean(c) for c in clusters])
