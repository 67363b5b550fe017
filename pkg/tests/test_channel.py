"""Channel generation: steering vectors, taps, DFT, perturbations, datasets."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csiforge.channel import (
    ClusterSpec,
    ConfigurationError,
    PathSet,
    ScenarioConfig,
    SPEED_OF_LIGHT,
    TAG_FOLIAGE,
    TwinPerturbation,
    apply_twin_perturbation,
    array_response,
    build_user_channel,
    delay_domain_channel,
    desk_scale_scenario,
    estimate_channel,
    freq_channel,
    generate_dataset,
    sample_paths,
)
from _utils import tiny_scenario


def make_paths(gains, delays, azimuths, elevations=None, tags=None):
    n = len(gains)
    return PathSet(
        gain=np.asarray(gains, dtype=np.complex128),
        delay=np.asarray(delays, dtype=np.float64),
        azimuth=np.asarray(azimuths, dtype=np.float64),
        elevation=np.zeros(n) if elevations is None else np.asarray(elevations),
        tag=np.zeros(n, dtype=np.int64) if tags is None else np.asarray(tags),
    )


class TestArrayResponse:
    def test_broadside_is_all_ones(self):
        np.testing.assert_array_equal(array_response(0.0, 0.0, 4), np.ones(4))

    def test_endfire_alternates_sign(self):
        v = array_response(np.pi / 2, 0.0, 2)
        np.testing.assert_allclose(v, [1.0, -1.0], atol=1e-12)

    def test_matches_elementwise_formula(self):
        az, el, n_tx = 0.3, 0.2, 8
        expected = np.array(
            [np.exp(1j * np.pi * n * math.cos(el) * math.sin(az)) for n in range(n_tx)]
        )
        np.testing.assert_allclose(array_response(az, el, n_tx), expected, rtol=1e-14)

    @given(
        az=st.floats(-np.pi, np.pi - 1e-9),
        el=st.floats(-np.pi / 2, np.pi / 2),
    )
    @settings(max_examples=50, deadline=None)
    def test_unit_magnitude(self, az, el):
        v = array_response(az, el, 16)
        np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-12)


class TestDelayDomain:
    def test_integer_delay_hits_single_tap(self):
        sc = tiny_scenario()
        ts = sc.sample_duration
        paths = make_paths([1.0], [3 * ts], [0.0])
        taps = delay_domain_channel(paths, sc)
        np.testing.assert_allclose(taps[3], np.ones(sc.n_tx), atol=1e-12)
        others = np.delete(taps, 3, axis=0)
        np.testing.assert_allclose(others, 0.0, atol=1e-12)

    def test_zero_paths_gives_zero_taps(self):
        sc = tiny_scenario()
        paths = make_paths([], [], [])
        np.testing.assert_array_equal(
            delay_domain_channel(paths, sc), np.zeros((sc.n_taps, sc.n_tx))
        )

    def test_matches_double_loop_oracle(self):
        sc = tiny_scenario()
        ts = sc.sample_duration
        rng = np.random.default_rng(7)
        paths = make_paths(
            rng.standard_normal(2) + 1j * rng.standard_normal(2),
            [1.3 * ts, 4.7 * ts],
            [0.4, -0.9],
            elevations=[0.1, -0.2],
        )
        taps = delay_domain_channel(paths, sc)
        expected = np.zeros_like(taps)
        for d in range(sc.n_taps):
            for l in range(len(paths)):
                t = d * ts - paths.delay[l]
                pulse = np.sinc(t / ts)
                a = array_response(paths.azimuth[l], paths.elevation[l], sc.n_tx)
                expected[d] += paths.gain[l] * pulse * a
        np.testing.assert_allclose(taps, expected, rtol=1e-12, atol=1e-15)

    def test_linearity_in_gains(self):
        sc = tiny_scenario()
        rng = np.random.default_rng(3)
        paths = sample_paths(sc, 0, rng)
        taps = delay_domain_channel(paths, sc)
        scaled = dataclasses.replace(paths, gain=paths.gain * (2.0 - 1.0j))
        np.testing.assert_allclose(
            delay_domain_channel(scaled, sc), (2.0 - 1.0j) * taps, rtol=1e-12
        )
        h = freq_channel(taps, sc.n_subcarriers)
        h2 = freq_channel(delay_domain_channel(scaled, sc), sc.n_subcarriers)
        assert np.linalg.norm(h2) == pytest.approx(
            abs(2.0 - 1.0j) * np.linalg.norm(h), rel=1e-12
        )


class TestFreqChannel:
    def test_single_leading_tap_is_flat(self):
        v = np.arange(1, 5) + 1j
        taps = np.zeros((6, 4), dtype=complex)
        taps[0] = v
        h = freq_channel(taps, 8)
        for k in range(8):
            np.testing.assert_allclose(h[:, k], v, atol=1e-12)

    def test_unit_delay_phase_ramp(self):
        taps = np.zeros((4, 1), dtype=complex)
        taps[1, 0] = 1.0
        h = freq_channel(taps, 4)
        expected = np.exp(-2j * np.pi * np.arange(4) / 4)
        np.testing.assert_allclose(h[0], expected, atol=1e-12)

    def test_matches_naive_dft_sum(self):
        rng = np.random.default_rng(11)
        d, n_tx, k = 4, 3, 16
        taps = rng.standard_normal((d, n_tx)) + 1j * rng.standard_normal((d, n_tx))
        h = freq_channel(taps, k)
        naive = np.zeros((n_tx, k), dtype=complex)
        for kk in range(k):
            for dd in range(d):
                naive[:, kk] += taps[dd] * np.exp(-2j * np.pi * kk * dd / k)
        err = np.linalg.norm(h - naive) / np.linalg.norm(naive)
        assert err <= 1e-12


class TestSamplePaths:
    def test_degenerate_spread_hits_cluster_mean(self):
        sc = tiny_scenario(
            cluster_layout=(ClusterSpec(0.5, 0.1, 0.2e-6, 0.0, 0.0, -90.0),),
            paths_per_cluster=1,
        )
        paths = sample_paths(sc, 0, np.random.default_rng(0))
        assert paths.azimuth[0] == pytest.approx(0.5)
        assert paths.elevation[0] == pytest.approx(0.1)
        assert paths.delay[0] == pytest.approx(0.2e-6)

    def test_deterministic_under_fixed_seed(self):
        sc = tiny_scenario()
        a = sample_paths(sc, 0, np.random.default_rng(42))
        b = sample_paths(sc, 0, np.random.default_rng(42))
        np.testing.assert_array_equal(a.gain, b.gain)
        np.testing.assert_array_equal(a.delay, b.delay)
        np.testing.assert_array_equal(a.azimuth, b.azimuth)

    def test_gain_power_monte_carlo(self):
        sc = tiny_scenario(
            cluster_layout=(ClusterSpec(0.0, 0.0, 0.2e-6, 0.05, 0.02e-6, 0.0),),
            paths_per_cluster=4,
        )
        rng = np.random.default_rng(123)
        gains = np.concatenate(
            [sample_paths(sc, 0, rng).gain for _ in range(2500)]
        )
        assert gains.size == 10_000
        assert np.mean(np.abs(gains) ** 2) == pytest.approx(1.0, rel=0.05)

    def test_delays_inside_tap_window(self):
        sc = tiny_scenario()
        limit = sc.n_taps * sc.sample_duration
        rng = np.random.default_rng(5)
        for _ in range(50):
            assert np.all(sample_paths(sc, 0, rng).delay < limit)

    def test_empty_cluster_layout_rejected(self):
        with pytest.raises(ConfigurationError):
            sample_paths(
                tiny_scenario(cluster_layout=()), 0, np.random.default_rng(0)
            )


class TestTwinPerturbation:
    def test_identity_is_noop(self):
        sc = tiny_scenario()
        paths = sample_paths(sc, 0, np.random.default_rng(1))
        out = apply_twin_perturbation(
            paths, TwinPerturbation(), np.random.default_rng(2)
        )
        assert out is paths

    def test_drop_foliage_zeroes_tagged_paths(self):
        paths = make_paths([1.0, 2.0], [0.0, 0.0], [0.0, 0.0], tags=[0, TAG_FOLIAGE])
        out = apply_twin_perturbation(
            paths, TwinPerturbation(drop_foliage=True), np.random.default_rng(0)
        )
        assert out.gain[0] == 1.0
        assert out.gain[1] == 0.0

    def test_all_foliage_gives_zero_channel(self):
        paths = make_paths([1.0, 2.0], [0.0, 0.0], [0.0, 0.0],
                           tags=[TAG_FOLIAGE, TAG_FOLIAGE])
        out = apply_twin_perturbation(
            paths, TwinPerturbation(drop_foliage=True), np.random.default_rng(0)
        )
        assert np.all(out.gain == 0.0)
        taps = delay_domain_channel(out, tiny_scenario())
        np.testing.assert_array_equal(taps, 0.0)

    def test_position_error_delay_std_monte_carlo(self):
        n = 10_000
        paths = make_paths(
            np.ones(n), np.full(n, 1.0e-6), np.zeros(n)
        )
        out = apply_twin_perturbation(
            paths,
            TwinPerturbation(position_error_std=5.0),
            np.random.default_rng(9),
        )
        shifts = out.delay - paths.delay
        assert np.std(shifts) == pytest.approx(5.0 / SPEED_OF_LIGHT, rel=0.10)

    def test_position_error_is_coherent_per_object(self):
        # All paths bouncing off one misplaced object shift together; paths
        # of different objects shift independently.
        sc = tiny_scenario()
        paths = sample_paths(sc, 0, np.random.default_rng(3))
        out = apply_twin_perturbation(
            paths,
            TwinPerturbation(position_error_std=5.0),
            np.random.default_rng(4),
        )
        shifts = out.delay - paths.delay
        n = sc.paths_per_cluster
        for c in range(len(sc.cluster_layout)):
            block = shifts[c * n : (c + 1) * n]
            np.testing.assert_allclose(block, block[0], rtol=1e-12)
        assert shifts[0] != shifts[n]


class TestEstimateChannel:
    def test_perfect_mode_exact(self):
        rng = np.random.default_rng(0)
        h = rng.standard_normal((4, 8)) + 1j * rng.standard_normal((4, 8))
        assert estimate_channel(h, None, rng) is h
        assert estimate_channel(h, -math.inf, rng) is h

    def test_zero_channel_perfect(self):
        h = np.zeros((4, 8), dtype=complex)
        np.testing.assert_array_equal(estimate_channel(h, None, np.random.default_rng(0)), 0)

    def test_nmse_monte_carlo(self):
        rng = np.random.default_rng(21)
        h = rng.standard_normal((4, 16)) + 1j * rng.standard_normal((4, 16))
        nmse = []
        for _ in range(1000):
            e = estimate_channel(h, -10.0, rng) - h
            nmse.append(np.sum(np.abs(e) ** 2) / np.sum(np.abs(h) ** 2))
        db = 10 * np.log10(np.mean(nmse))
        assert -10.5 <= db <= -9.5

    def test_positive_nmse_rejected(self):
        with pytest.raises(ValueError):
            estimate_channel(np.ones((2, 2)), 1.0, np.random.default_rng(0))


class TestDatasets:
    def test_shapes(self):
        sc = tiny_scenario()
        ds = generate_dataset(sc, 2, 1, seed=0)
        rec = ds.records[0]
        assert len(rec.user_channels) == 2
        for uc in rec.user_channels:
            assert uc.taps.shape == (sc.n_taps, sc.n_tx)
            assert uc.freq.shape == (sc.n_tx, sc.n_subcarriers)
        assert ds.true_channels().shape == (1, 2, sc.n_tx, sc.n_subcarriers)

    def test_same_seed_identical(self):
        sc = tiny_scenario()
        a = generate_dataset(sc, 2, 3, seed=4)
        b = generate_dataset(sc, 2, 3, seed=4)
        np.testing.assert_array_equal(a.true_channels(), b.true_channels())
        np.testing.assert_array_equal(a.estimated(), b.estimated())

    def test_identity_twin_equals_target(self):
        sc = tiny_scenario()
        a = generate_dataset(sc, 1, 3, seed=4)
        b = generate_dataset(sc, 1, 3, pert=TwinPerturbation(), seed=4)
        np.testing.assert_array_equal(a.true_channels(), b.true_channels())

    def test_twin_scene_fixed_across_samples(self):
        # The perturbation is one degraded scene, not per-sample noise: the
        # same scatterer offsets apply to every sample in the twin dataset.
        from csiforge.channel import _child_rng

        sc = tiny_scenario()
        pert = TwinPerturbation(
            drop_foliage=True, position_error_std=5.0, rng_seed=7
        )
        twin = generate_dataset(sc, 1, 2, pert=pert, seed=4)
        max_delay = sc.n_taps * sc.sample_duration
        for i in range(2):
            paths = sample_paths(sc, 0, _child_rng(4, i, 0, 0))
            manual = apply_twin_perturbation(
                paths, pert, _child_rng(7, 0, 0, 1), max_delay
            )
            np.testing.assert_array_equal(
                build_user_channel(manual, sc).freq,
                twin.true_channels()[i, 0],
            )

    def test_twin_shares_path_draws_with_target(self):
        # A twin dataset is the target's own path draws run through the
        # perturbation, not an independent resample.
        from csiforge.channel import _child_rng

        sc = tiny_scenario()
        pert = TwinPerturbation(drop_foliage=True)
        target = generate_dataset(sc, 1, 2, seed=4)
        twin = generate_dataset(sc, 1, 2, pert=pert, seed=4)
        assert not np.array_equal(target.true_channels(), twin.true_channels())
        paths = sample_paths(sc, 0, _child_rng(4, 0, 0, 0))
        manual = apply_twin_perturbation(
            paths, pert, _child_rng(pert.rng_seed, 0, 0, 1)
        )
        expected = build_user_channel(manual, sc).freq
        np.testing.assert_array_equal(
            twin.records[0].user_channels[0].freq, expected
        )

    def test_freq_matches_taps_invariant(self):
        sc = desk_scale_scenario()
        ds = generate_dataset(sc, 2, 2, seed=0)
        for rec in ds.records:
            for uc in rec.user_channels:
                ref = freq_channel(uc.taps, sc.n_subcarriers)
                err = np.linalg.norm(uc.freq - ref) / np.linalg.norm(ref)
                assert err <= 1e-10

    def test_estimates_differ_from_truth_when_noisy(self):
        sc = tiny_scenario()
        ds = generate_dataset(sc, 1, 2, seed=0, nmse_db=-10.0)
        assert not np.array_equal(ds.estimated(), ds.true_channels())


class TestScenarioConfig:
    def test_noise_power_from_bandwidth(self):
        sc = ScenarioConfig(cluster_layout=(ClusterSpec(0, 0, 0, 0, 0, 0),))
        bw = sc.n_subcarriers * sc.subcarrier_spacing
        expected_dbm = -174.0 + 10 * math.log10(bw) + 7.0
        assert 10 * math.log10(sc.noise_power) + 30 == pytest.approx(expected_dbm)

    def test_tx_power_from_eirp(self):
        sc = tiny_scenario(eirp_dbm=30.0)
        assert sc.tx_power == pytest.approx(1.0)

    def test_dict_round_trip(self):
        sc = desk_scale_scenario(3)
        assert ScenarioConfig.from_dict(sc.to_dict()) == sc
        assert ScenarioConfig.from_dict(sc.to_dict()).hash_bytes() == sc.hash_bytes()

    def test_invalid_taps_rejected(self):
        with pytest.raises(ConfigurationError):
            tiny_scenario(n_taps=100, n_subcarriers=12)
