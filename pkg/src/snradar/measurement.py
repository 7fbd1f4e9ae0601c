"""Compressive measurement model: matrix construction, noise, data assembly.

The measurement operator is an abstract M x N matrix applied to the
Nyquist-rate signal-plus-noise vector of each pulse; no particular
analog-to-information hardware is modelled.  Rows are scaled by 1/sqrt(M)
so that compression preserves the total in-band noise energy in
expectation: each compressed sample then carries the noise-folded
per-entry variance (N/M) * N0 * B, strictly larger than the Nyquist
per-sample variance N0 * B whenever M < N.
"""

from dataclasses import dataclass

import numpy as np

from .scene import RadarParams, Scene, group_waveforms

FOURIER_SELECT = "fourier-select"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class MeasurementMatrix:
    """M x N compression operator applied per pulse."""

    kind: str
    entries: np.ndarray
    selected_bins: np.ndarray | None = None
    seed: int | None = None

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Lowpass circular complex Gaussian receiver noise."""

    psd: float  # one-sided power spectral density N0, W/Hz
    bandwidth_hz: float

    def __post_init__(self):
        if self.psd < 0:
            raise ValueError("noise PSD must be nonnegative")

    @property
    def nyquist_variance(self) -> float:
        """Per-sample variance N0 * B at the Nyquist rate."""
        return self.psd * self.bandwidth_hz

    def compressed_variance(self, num_rows: int, num_cols: int) -> float:
        """Per-entry variance (N/M) * N0 * B after compression."""
        return self.nyquist_variance * num_cols / num_rows


@dataclass(frozen=True)
class DataMatrix:
    """M x L matrix of compressed measurements, one column per pulse."""

    entries: np.ndarray
    params: RadarParams

    @property
    def num_measurements(self) -> int:
        return self.entries.shape[0]

    @property
    def num_pulses(self) -> int:
        return self.entries.shape[1]

    @property
    def compression_ratio(self) -> float:
        return self.params.nyq_count / self.entries.shape[0]


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _check_rows(params: RadarParams, num_rows: int):
    n = params.nyq_count
    if not 2 <= num_rows < n:
        raise ValueError(f"need 2 <= M < N, got M={num_rows}, N={n}")


def make_fourier_selector(params: RadarParams, num_rows: int, rng) -> MeasurementMatrix:
    """Randomly selected DFT rows, scaled by 1/sqrt(M).

    Bin indices are drawn uniformly without replacement from 0..N-1, so the
    rows are mutually orthogonal with squared norm N/M.  Passing an integer
    seed makes the matrix persistable via :func:`matrix_spec`.
    """
    _check_rows(params, num_rows)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = _as_rng(rng)
    n = params.nyq_count
    bins = np.sort(gen.choice(n, size=num_rows, replace=False))
    cols = np.arange(n)
    entries = np.exp(-2j * np.pi * np.outer(bins, cols) / n) / np.sqrt(num_rows)
    return MeasurementMatrix(
        kind=FOURIER_SELECT, entries=entries, selected_bins=bins, seed=seed
    )


def make_gaussian(params: RadarParams, num_rows: int, rng) -> MeasurementMatrix:
    """I.i.d. circular Gaussian matrix with entry variance 1/M.

    Matches the Fourier-select energy convention in expectation, so the
    compressed-noise variance identity holds on average for this kind too.
    """
    _check_rows(params, num_rows)
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = _as_rng(rng)
    n = params.nyq_count
    scale = np.sqrt(0.5 / num_rows)
    entries = scale * (
        gen.standard_normal((num_rows, n)) + 1j * gen.standard_normal((num_rows, n))
    )
    return MeasurementMatrix(kind=GAUSSIAN, entries=entries, seed=seed)


def matrix_spec(mm: MeasurementMatrix) -> dict:
    """Compact persistable description (seed, kind, M, N); never the dense entries."""
    if mm.seed is None:
        raise ValueError("matrix was not built from an integer seed; cannot persist")
    return {"kind": mm.kind, "rows": mm.rows, "cols": mm.cols, "seed": int(mm.seed)}


def matrix_from_spec(params: RadarParams, spec: dict) -> MeasurementMatrix:
    """Regenerate a measurement matrix from :func:`matrix_spec` output."""
    if spec["cols"] != params.nyq_count:
        raise ValueError("matrix spec column count does not match the radar params")
    makers = {FOURIER_SELECT: make_fourier_selector, GAUSSIAN: make_gaussian}
    try:
        maker = makers[spec["kind"]]
    except KeyError:
        raise ValueError(f"unknown measurement matrix kind {spec['kind']!r}") from None
    return maker(params, spec["rows"], int(spec["seed"]))


def compress(mm: MeasurementMatrix, x: np.ndarray) -> np.ndarray:
    """Exact matrix-vector product of the measurement matrix with x."""
    x = np.asarray(x)
    if x.shape != (mm.cols,):
        raise ValueError(f"expected length-{mm.cols} vector, got shape {x.shape}")
    return mm.entries @ x


def compress_span(mm: MeasurementMatrix, values: np.ndarray, start: int) -> np.ndarray:
    """Compress a vector given by its nonzero span (equals compress on the padded vector)."""
    stop = start + len(values)
    if start < 0 or stop > mm.cols:
        raise ValueError("span exceeds the measurement matrix width")
    return mm.entries[:, start:stop] @ values


def nyquist_noise(params: RadarParams, noise: NoiseSpec, rng) -> np.ndarray:
    """One pulse of i.i.d. circular complex Gaussian noise, per-sample variance N0*B."""
    gen = _as_rng(rng)
    n = params.nyq_count
    scale = np.sqrt(noise.nyquist_variance / 2.0)
    return scale * (gen.standard_normal(n) + 1j * gen.standard_normal(n))


def _noise_block(params: RadarParams, noise: NoiseSpec, rng) -> np.ndarray:
    """N x L block of pulse noise columns (i.i.d. across pulses)."""
    gen = _as_rng(rng)
    shape = (params.nyq_count, params.num_pulses)
    scale = np.sqrt(noise.nyquist_variance / 2.0)
    return scale * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))


def pulse_phases(scene: Scene) -> np.ndarray:
    """K_v x L matrix of per-group pulse phase factors exp(j*2*pi*nu*l*T)."""
    p = scene.params
    pulses = np.arange(p.num_pulses)
    return np.exp(2j * np.pi * np.outer(scene.group_dopplers, pulses) * p.pri_s)


def compressed_signal(scene: Scene, mm: MeasurementMatrix) -> np.ndarray:
    """Noise-free M x L data matrix (compressed group waveforms times phases)."""
    if scene.num_groups == 0:
        return np.zeros((mm.rows, scene.params.num_pulses), dtype=complex)
    return (mm.entries @ group_waveforms(scene)) @ pulse_phases(scene)


def assemble_data(scene: Scene, mm: MeasurementMatrix, noise: NoiseSpec, rng):
    """Compressed data matrix and its noise-only companion.

    Column l of the first matrix equals compress(echo(l) + noise(l)); the
    second holds the compressed noise columns alone, for diagnostics.
    """
    if mm.cols != scene.params.nyq_count:
        raise ValueError("measurement matrix width does not match the radar params")
    signal = compressed_signal(scene, mm)
    noise_cs = mm.entries @ _noise_block(scene.params, noise, rng)
    return (
        DataMatrix(entries=signal + noise_cs, params=scene.params),
        DataMatrix(entries=noise_cs, params=scene.params),
    )


def snr_to_psd(scene: Scene, mm: MeasurementMatrix, target_snr_db) -> float:
    """Noise PSD that realises a requested per-pulse compressed-domain SNR.

    SNR is the ratio of the pulse-averaged compressed signal energy to the
    expected compressed noise energy per pulse, which is N * N0 * B
    regardless of M under the energy-preserving row scaling.  Pass
    ``None`` or ``inf`` for a noiseless (N0 = 0) setup.
    """
    if target_snr_db is None or np.isinf(target_snr_db):
        return 0.0
    signal = compressed_signal(scene, mm)
    energy = float(np.mean(np.sum(np.abs(signal) ** 2, axis=0)))
    if energy <= 0.0:
        raise ValueError("scene has zero compressed energy; SNR is undefined")
    n = scene.params.nyq_count
    snr_lin = 10.0 ** (target_snr_db / 10.0)
    return energy / (n * scene.params.bandwidth_hz * snr_lin)
