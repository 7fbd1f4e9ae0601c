import numpy as np
import pytest

from snradar.doppler import (
    DegenerateSubspaceError,
    dft_doppler,
    esprit_doppler,
    esprit_fb_doppler,
    estimate_model_order,
    merge_close,
    steering_vector,
)
from snradar.measurement import (
    DataMatrix,
    NoiseSpec,
    assemble_data,
    make_fourier_selector,
)
from snradar.scene import RadarParams, Target, group_by_doppler

# small array: L = 32 pulses, M = 16 snapshots, N = 50
ARRAY = RadarParams(bandwidth_hz=1e6, pulse_width_s=5e-6, pri_s=50e-6, num_pulses=32)
DESK = RadarParams(bandwidth_hz=10e6, pulse_width_s=10e-6, pri_s=100e-6, num_pulses=50)

NOISELESS = NoiseSpec(0.0, ARRAY.bandwidth_hz)


def noiseless_data(params, targets, rows=16, seed=0):
    scene = group_by_doppler(params, targets)
    mm = make_fourier_selector(params, rows, seed)
    data, _ = assemble_data(
        scene, mm, NoiseSpec(0.0, params.bandwidth_hz), np.random.default_rng(0)
    )
    return scene, data


class TestSteeringVector:
    def test_zero_doppler_all_ones(self):
        np.testing.assert_array_equal(steering_vector(0.0, 8, 1e-4), np.ones(8))

    def test_unit_magnitude(self):
        vec = steering_vector(1234.5, 64, 1e-4)
        np.testing.assert_allclose(np.abs(vec), 1.0, atol=1e-12)


class TestEsprit:
    def test_single_offgrid_source_exact(self):
        nu = 2.5 * ARRAY.doppler_cell_hz
        scene, data = noiseless_data(ARRAY, [Target(3e-6, nu, 1.0 + 0j)])
        est = esprit_doppler(data, 1)
        assert abs(est.dopplers_hz[0] - nu) < 1e-9 * ARRAY.doppler_cell_hz

    def test_three_sources_exact(self):
        nus = np.array([-7.3, 1.21, 9.87]) * ARRAY.doppler_cell_hz
        targets = [
            Target(1e-6, nus[0], 0.9 + 0.1j),
            Target(6e-6, nus[1], 0.4 - 0.6j),
            Target(11e-6, nus[2], 0.8 + 0j),
        ]
        _, data = noiseless_data(ARRAY, targets)
        est = esprit_doppler(data, 3)
        np.testing.assert_allclose(
            est.dopplers_hz, nus, atol=1e-8 * ARRAY.doppler_cell_hz
        )

    def test_zero_doppler_scene(self):
        _, data = noiseless_data(ARRAY, [Target(2e-6, 0.0, 1.0 + 0j)])
        est = esprit_doppler(data, 1)
        assert abs(est.dopplers_hz[0]) < 1e-9 * ARRAY.doppler_cell_hz

    def test_model_order_size_error(self):
        _, data = noiseless_data(ARRAY, [Target(2e-6, 0.0, 1.0 + 0j)])
        with pytest.raises(ValueError):
            esprit_doppler(data, ARRAY.num_pulses)

    def test_coherent_groups_flagged(self):
        # same delay in two groups -> rank-one source matrix
        targets = [Target(2e-6, 5e3, 0.8 + 0j), Target(2e-6, -3e3, 0.5 + 0.5j)]
        _, data = noiseless_data(ARRAY, targets)
        with pytest.raises(DegenerateSubspaceError):
            esprit_doppler(data, 2)

    def test_delay_independence(self):
        nus = np.array([-4.4, 6.6]) * ARRAY.doppler_cell_hz
        first = [Target(1e-6, nus[0], 1.0 + 0j), Target(9e-6, nus[1], 0.6 + 0.2j)]
        second = [Target(4e-6, nus[0], 0.1 - 0.9j), Target(14e-6, nus[1], 1.2 + 0j)]
        _, data_a = noiseless_data(ARRAY, first)
        _, data_b = noiseless_data(ARRAY, second)
        est_a = esprit_doppler(data_a, 2)
        est_b = esprit_doppler(data_b, 2)
        np.testing.assert_allclose(
            est_a.dopplers_hz,
            est_b.dopplers_hz,
            atol=1e-6 * ARRAY.doppler_cell_hz,
        )

    def test_conjugation_negates_frequencies(self):
        nus = np.array([-3.3, 2.2, 8.1]) * ARRAY.doppler_cell_hz
        targets = [Target((2 + 5 * i) * 1e-6, nu, 1.0 + 0.3j) for i, nu in enumerate(nus)]
        _, data = noiseless_data(ARRAY, targets)
        est = esprit_doppler(data, 3)
        conj = DataMatrix(entries=data.entries.conj(), params=data.params)
        est_conj = esprit_doppler(conj, 3)
        np.testing.assert_allclose(
            np.sort(est_conj.spatial_freqs),
            np.sort(-est.spatial_freqs),
            atol=1e-9,
        )


class TestEspritForwardBackward:
    def test_coherent_case_recovered(self):
        nus = np.array([5e3, -3e3])
        targets = [Target(2e-6, nus[0], 0.8 + 0j), Target(2e-6, nus[1], 0.5 + 0.5j)]
        _, data = noiseless_data(ARRAY, targets)
        est = esprit_fb_doppler(data, 2)
        np.testing.assert_allclose(
            est.dopplers_hz, np.sort(nus), atol=1e-6 * ARRAY.doppler_cell_hz
        )

    def test_agrees_with_plain_esprit_when_noncoherent(self):
        nus = np.array([-6.1, 3.7]) * ARRAY.doppler_cell_hz
        targets = [Target(1e-6, nus[0], 1.0 + 0j), Target(8e-6, nus[1], 0.7 - 0.1j)]
        _, data = noiseless_data(ARRAY, targets)
        plain = esprit_doppler(data, 2)
        smoothed = esprit_fb_doppler(data, 2)
        np.testing.assert_allclose(
            plain.dopplers_hz,
            smoothed.dopplers_hz,
            atol=1e-6 * ARRAY.doppler_cell_hz,
        )

    def test_single_target_matches_plain(self):
        nu = 4.25 * ARRAY.doppler_cell_hz
        _, data = noiseless_data(ARRAY, [Target(3e-6, nu, 1.0 + 0j)])
        plain = esprit_doppler(data, 1)
        smoothed = esprit_fb_doppler(data, 1)
        assert abs(plain.dopplers_hz[0] - smoothed.dopplers_hz[0]) < 1e-6 * ARRAY.doppler_cell_hz

    def test_subarray_validation(self):
        _, data = noiseless_data(ARRAY, [Target(3e-6, 1e3, 1.0 + 0j)])
        with pytest.raises(ValueError):
            esprit_fb_doppler(data, 1, subarray_len=ARRAY.num_pulses + 1)
        with pytest.raises(ValueError):
            esprit_fb_doppler(data, 2, subarray_len=2)


class TestDftDoppler:
    def test_on_grid_exact(self):
        nu = 7 * ARRAY.doppler_cell_hz
        _, data = noiseless_data(ARRAY, [Target(3e-6, nu, 1.0 + 0j)])
        est = dft_doppler(data, 1)
        assert est.dopplers_hz[0] == pytest.approx(nu, abs=1e-9)

    def test_off_grid_quantised_to_neighbour(self):
        nu = 7.5 * ARRAY.doppler_cell_hz
        _, data = noiseless_data(ARRAY, [Target(3e-6, nu, 1.0 + 0j)])
        est = dft_doppler(data, 1)
        err_cells = abs(est.dopplers_hz[0] - nu) / ARRAY.doppler_cell_hz
        assert err_cells <= 0.5 + 1e-9
        grid_offset = est.dopplers_hz[0] / ARRAY.doppler_cell_hz
        assert grid_offset == pytest.approx(round(grid_offset), abs=1e-9)

    def test_two_on_grid_sources_found(self):
        nus = np.array([3, 9]) * ARRAY.doppler_cell_hz
        targets = [Target(1e-6, nus[0], 1.0 + 0j), Target(7e-6, nus[1], 0.8 + 0j)]
        scene, data = noiseless_data(ARRAY, targets)
        # direct DFT oracle: compute the integrated magnitudes by hand
        transform = np.fft.fft(data.entries, axis=1)
        magnitude = np.abs(transform).sum(axis=0)
        expected_bins = set(np.argsort(-magnitude)[:2])
        assert expected_bins == {3, 9}
        est = dft_doppler(data, 2)
        np.testing.assert_allclose(est.dopplers_hz, nus, atol=1e-9)

    def test_matches_esprit_on_grid(self):
        nus = np.array([-5, 2, 11]) * ARRAY.doppler_cell_hz
        targets = [Target((1 + 4 * i) * 1e-6, nu, 1.0 + 0j) for i, nu in enumerate(nus)]
        _, data = noiseless_data(ARRAY, targets)
        subspace = esprit_doppler(data, 3)
        grid = dft_doppler(data, 3)
        assert np.max(np.abs(subspace.dopplers_hz - grid.dopplers_hz)) < (
            0.5 * ARRAY.doppler_cell_hz
        )


class TestModelOrder:
    def test_noiseless_two_groups(self):
        nus = np.array([-4.8, 6.2]) * ARRAY.doppler_cell_hz
        targets = [Target(1e-6, nus[0], 1.0 + 0j), Target(8e-6, nus[1], 0.7 + 0j)]
        _, data = noiseless_data(ARRAY, targets)
        assert estimate_model_order(data) == 2

    def test_noiseless_many_groups(self):
        # K_v = L - 2 with a short CPI
        short = RadarParams(bandwidth_hz=1e6, pulse_width_s=5e-6, pri_s=50e-6, num_pulses=8)
        nus = (np.arange(6) * 1.2 - 3.3) * short.doppler_cell_hz
        targets = [Target((1 + 3 * i) * 1e-6, float(nu), 1.0 + 0j) for i, nu in enumerate(nus)]
        scene = group_by_doppler(short, targets)
        mm = make_fourier_selector(short, 25, 0)
        data, _ = assemble_data(
            scene, mm, NoiseSpec(0.0, short.bandwidth_hz), np.random.default_rng(0)
        )
        assert estimate_model_order(data) == 6

    def test_pure_noise_prefers_zero(self):
        # needs more snapshots than pulses for the eigenvalue statistics
        scene = group_by_doppler(ARRAY, [])
        mm = make_fourier_selector(ARRAY, 48, 1)
        noise = NoiseSpec(psd=1e-9, bandwidth_hz=ARRAY.bandwidth_hz)
        rng = np.random.default_rng(2)
        hits = sum(
            estimate_model_order(assemble_data(scene, mm, noise, rng)[0]) == 0
            for _ in range(50)
        )
        assert hits >= 45  # zero order in at least 90% of draws


class TestMergeClose:
    def test_merges_within_tolerance(self):
        merged = merge_close([100.0, 100.4, 250.0], tol_hz=1.0)
        np.testing.assert_allclose(merged, [100.2, 250.0])

    def test_empty(self):
        assert merge_close([], 1.0).size == 0
