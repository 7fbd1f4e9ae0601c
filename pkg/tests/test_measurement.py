import numpy as np
import pytest

from snradar.measurement import (
    DataMatrix,
    NoiseSpec,
    assemble_data,
    compress,
    compress_span,
    compressed_signal,
    make_fourier_selector,
    make_gaussian,
    matrix_from_spec,
    matrix_spec,
    nyquist_noise,
    snr_to_psd,
)
from snradar.scene import RadarParams, Target, atom_samples, echo_nyquist, group_by_doppler

SMALL = RadarParams(bandwidth_hz=6.4e6, pulse_width_s=1e-6, pri_s=10e-6, num_pulses=20)
DESK = RadarParams(bandwidth_hz=10e6, pulse_width_s=10e-6, pri_s=100e-6, num_pulses=50)


def small_scene():
    targets = [
        Target(1.1e-6, 12e3, 0.9 + 0.2j),
        Target(4.3e-6, -21e3, 0.4 - 0.7j),
    ]
    return group_by_doppler(SMALL, targets)


class TestFourierSelector:
    def test_row_count_validation(self):
        with pytest.raises(ValueError):
            make_fourier_selector(SMALL, SMALL.nyq_count, 0)
        with pytest.raises(ValueError):
            make_fourier_selector(SMALL, 1, 0)

    def test_distinct_bins(self):
        mm = make_fourier_selector(SMALL, 16, 0)
        assert len(np.unique(mm.selected_bins)) == 16

    def test_seed_determinism(self):
        a = make_fourier_selector(SMALL, 16, 123)
        b = make_fourier_selector(SMALL, 16, 123)
        np.testing.assert_array_equal(a.entries, b.entries)
        np.testing.assert_array_equal(a.selected_bins, b.selected_bins)

    def test_row_gram_is_scaled_identity(self):
        # rows carry the 1/sqrt(M) energy normalisation, so the Gram matrix
        # is (N/M) I rather than N I
        mm = make_fourier_selector(SMALL, 16, 7)
        gram = mm.entries @ mm.entries.conj().T
        expected = (SMALL.nyq_count / 16) * np.eye(16)
        np.testing.assert_allclose(gram, expected, atol=1e-10)

    def test_dc_row_sums_all_ones(self):
        for seed in range(50):
            mm = make_fourier_selector(SMALL, 4, seed)
            if 0 in mm.selected_bins:
                break
        else:
            pytest.fail("no seed produced a DC bin")
        row = int(np.nonzero(mm.selected_bins == 0)[0][0])
        out = compress(mm, np.ones(SMALL.nyq_count, dtype=complex))
        assert out[row] == pytest.approx(SMALL.nyq_count / np.sqrt(4))

    def test_spec_roundtrip(self):
        mm = make_fourier_selector(SMALL, 16, 99)
        spec = matrix_spec(mm)
        assert spec == {"kind": "fourier-select", "rows": 16, "cols": 64, "seed": 99}
        again = matrix_from_spec(SMALL, spec)
        np.testing.assert_array_equal(again.entries, mm.entries)

    def test_spec_requires_seed(self):
        mm = make_fourier_selector(SMALL, 16, np.random.default_rng(0))
        with pytest.raises(ValueError):
            matrix_spec(mm)


class TestGaussianMatrix:
    def test_shape_and_energy(self):
        mm = make_gaussian(SMALL, 16, 3)
        assert mm.entries.shape == (16, SMALL.nyq_count)
        # entry variance 1/M: total squared norm ~ N in expectation
        total = np.sum(np.abs(mm.entries) ** 2)
        assert total == pytest.approx(SMALL.nyq_count, rel=0.15)

    def test_compressed_variance_in_expectation(self):
        mm = make_gaussian(SMALL, 16, 4)
        noise = NoiseSpec(psd=2e-9, bandwidth_hz=SMALL.bandwidth_hz)
        rng = np.random.default_rng(5)
        samples = []
        for _ in range(400):
            samples.append(compress(mm, nyquist_noise(SMALL, noise, rng)))
        variance = np.mean(np.abs(np.concatenate(samples)) ** 2)
        expected = noise.compressed_variance(16, SMALL.nyq_count)
        assert variance == pytest.approx(expected, rel=0.15)


class TestCompress:
    def test_zero_vector(self):
        mm = make_fourier_selector(SMALL, 16, 0)
        assert np.all(compress(mm, np.zeros(SMALL.nyq_count)) == 0.0)

    def test_dimension_mismatch(self):
        mm = make_fourier_selector(SMALL, 16, 0)
        with pytest.raises(ValueError):
            compress(mm, np.zeros(SMALL.nyq_count - 1))

    def test_matches_naive_double_loop(self):
        mm = make_fourier_selector(SMALL, 8, 11)
        rng = np.random.default_rng(6)
        x = rng.normal(size=SMALL.nyq_count) + 1j * rng.normal(size=SMALL.nyq_count)
        naive = np.zeros(8, dtype=complex)
        for m in range(8):
            for n in range(SMALL.nyq_count):
                naive[m] += mm.entries[m, n] * x[n]
        fast = compress(mm, x)
        assert np.max(np.abs(fast - naive)) / np.max(np.abs(naive)) < 1e-12

    def test_linearity(self):
        mm = make_fourier_selector(SMALL, 8, 12)
        rng = np.random.default_rng(7)
        x = rng.normal(size=SMALL.nyq_count) * (1 + 1j)
        y = rng.normal(size=SMALL.nyq_count) * (1 - 2j)
        np.testing.assert_allclose(
            compress(mm, x + y), compress(mm, x) + compress(mm, y), atol=1e-10
        )

    def test_span_form_equals_dense(self):
        mm = make_fourier_selector(SMALL, 8, 13)
        start, vals = 40, np.arange(5) * (1 + 1j)
        padded = np.zeros(SMALL.nyq_count, dtype=complex)
        padded[start : start + 5] = vals
        np.testing.assert_allclose(
            compress_span(mm, vals, start), compress(mm, padded), atol=1e-12
        )


class TestNyquistNoise:
    def test_zero_psd(self):
        noise = NoiseSpec(psd=0.0, bandwidth_hz=SMALL.bandwidth_hz)
        out = nyquist_noise(SMALL, noise, np.random.default_rng(0))
        assert np.all(out == 0.0)

    def test_negative_psd_rejected(self):
        with pytest.raises(ValueError):
            NoiseSpec(psd=-1.0, bandwidth_hz=SMALL.bandwidth_hz)

    def test_sample_variance(self):
        noise = NoiseSpec(psd=3e-9, bandwidth_hz=SMALL.bandwidth_hz)
        rng = np.random.default_rng(8)
        draws = np.concatenate(
            [nyquist_noise(SMALL, noise, rng) for _ in range(1600)]
        )  # ~1e5 samples
        assert draws.size >= 100_000
        variance = np.mean(np.abs(draws) ** 2)
        assert variance == pytest.approx(noise.nyquist_variance, rel=0.03)

    def test_cross_pulse_independence(self):
        noise = NoiseSpec(psd=1e-9, bandwidth_hz=SMALL.bandwidth_hz)
        rng = np.random.default_rng(9)
        acc = 0.0
        trials = 4000
        for _ in range(trials):
            first = nyquist_noise(SMALL, noise, rng)
            second = nyquist_noise(SMALL, noise, rng)
            acc += np.mean(first * second.conj())
        cross = abs(acc) / trials
        assert cross < 0.02 * noise.nyquist_variance


class TestAssembleData:
    def test_noiseless_empty_scene(self):
        scene = group_by_doppler(SMALL, [])
        mm = make_fourier_selector(SMALL, 16, 0)
        data, noise_only = assemble_data(
            scene, mm, NoiseSpec(0.0, SMALL.bandwidth_hz), np.random.default_rng(0)
        )
        assert np.all(data.entries == 0.0)
        assert np.all(noise_only.entries == 0.0)
        assert data.compression_ratio == pytest.approx(4.0)

    def test_noiseless_matches_per_pulse_compression(self):
        scene = small_scene()
        mm = make_fourier_selector(SMALL, 16, 1)
        data, _ = assemble_data(
            scene, mm, NoiseSpec(0.0, SMALL.bandwidth_hz), np.random.default_rng(0)
        )
        for pulse in range(SMALL.num_pulses):
            expected = compress(mm, echo_nyquist(scene, pulse))
            np.testing.assert_allclose(data.entries[:, pulse], expected, atol=1e-10)

    def test_single_group_column_ratio(self):
        nu = 7.3e3
        scene = group_by_doppler(SMALL, [Target(2e-6, nu, 0.7 + 0.1j)])
        mm = make_fourier_selector(SMALL, 16, 2)
        data, _ = assemble_data(
            scene, mm, NoiseSpec(0.0, SMALL.bandwidth_hz), np.random.default_rng(0)
        )
        base = data.entries[:, 0]
        for pulse in (1, 4, 9):
            ratio = np.exp(2j * np.pi * nu * pulse * SMALL.pri_s)
            np.testing.assert_allclose(data.entries[:, pulse], ratio * base, atol=1e-12)

    def test_compressed_noise_variance(self):
        # per-entry variance of the compressed noise is (N/M) * N0 * B
        scene = group_by_doppler(SMALL, [])
        mm = make_fourier_selector(SMALL, 16, 3)
        noise = NoiseSpec(psd=2.5e-9, bandwidth_hz=SMALL.bandwidth_hz)
        rng = np.random.default_rng(10)
        chunks = []
        for _ in range(100):  # 100 CPIs x 20 pulses = 2000 noise columns
            _, noise_only = assemble_data(scene, mm, noise, rng)
            chunks.append(noise_only.entries)
        variance = np.mean(np.abs(np.concatenate(chunks, axis=1)) ** 2)
        expected = noise.compressed_variance(16, SMALL.nyq_count)
        assert expected == pytest.approx(noise.nyquist_variance * 4.0)
        assert variance == pytest.approx(expected, rel=0.05)


class TestSnrToPsd:
    def test_infinite_snr_flag(self):
        scene = small_scene()
        mm = make_fourier_selector(SMALL, 16, 4)
        assert snr_to_psd(scene, mm, None) == 0.0
        assert snr_to_psd(scene, mm, float("inf")) == 0.0

    def test_zero_energy_scene_rejected(self):
        scene = group_by_doppler(SMALL, [])
        mm = make_fourier_selector(SMALL, 16, 4)
        with pytest.raises(ValueError):
            snr_to_psd(scene, mm, 10.0)

    def test_gain_scaling_quadruples_psd(self):
        scene = small_scene()
        doubled = group_by_doppler(
            SMALL,
            [Target(t.delay_s, t.doppler_hz, 2 * t.gain) for t in scene.targets],
        )
        mm = make_fourier_selector(SMALL, 16, 5)
        ratio = snr_to_psd(doubled, mm, 10.0) / snr_to_psd(scene, mm, 10.0)
        assert ratio == pytest.approx(4.0, rel=1e-9)

    def test_noiseless_reproduces_factored_model(self):
        # column l of the noise-free data equals the compressed group
        # waveforms times the pulse phase vector
        scene = small_scene()
        mm = make_fourier_selector(SMALL, 16, 6)
        direct = compressed_signal(scene, mm)
        for pulse in range(SMALL.num_pulses):
            expected = compress(mm, echo_nyquist(scene, pulse))
            np.testing.assert_allclose(direct[:, pulse], expected, atol=1e-10)
