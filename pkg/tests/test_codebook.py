"""Codebook compression: beams, quantization, bit packing, overheads."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csiforge import codebook as cb


def random_channel(rng, n_tx=16, k=48, scale=1.0):
    return scale * (
        rng.standard_normal((n_tx, k)) + 1j * rng.standard_normal((n_tx, k))
    )


class TestDftBeam:
    def test_beam_zero_is_flat(self):
        np.testing.assert_allclose(
            cb.dft_beam(0, 0, 1, 8), np.ones(8) / math.sqrt(8), atol=1e-12
        )

    def test_same_rotation_beams_orthogonal(self):
        b0 = cb.dft_beam(0, 0, 4, 16)
        b1 = cb.dft_beam(1, 0, 4, 16)
        assert abs(np.vdot(b0, b1)) <= 1e-12

    def test_matches_elementwise_formula(self):
        beam, rot, o, n_tx = 3, 2, 4, 8
        expected = np.array(
            [
                np.exp(2j * np.pi * n * (beam + rot / o) / n_tx) / math.sqrt(n_tx)
                for n in range(n_tx)
            ]
        )
        np.testing.assert_allclose(cb.dft_beam(beam, rot, o, n_tx), expected, rtol=1e-13)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            cb.dft_beam(8, 0, 1, 8)
        with pytest.raises(ValueError):
            cb.dft_beam(0, 2, 2, 8)

    def test_beam_matrix_columns_match(self):
        m = cb.beam_matrix(2, 4, 8)
        for b in range(8):
            np.testing.assert_allclose(m[:, b], cb.dft_beam(b, 2, 4, 8), rtol=1e-13)


class TestSubbandMap:
    def test_contiguous_monotone_covering(self):
        m = cb.build_subband_map(48, 4)
        assert m.shape == (48,)
        assert np.all(np.diff(m) >= 0)
        assert set(m) == set(range(4))
        sizes = np.bincount(m)
        assert sizes.max() - sizes.min() <= 1

    def test_uneven_split(self):
        m = cb.build_subband_map(10, 3)
        sizes = np.bincount(m)
        assert sizes.sum() == 10 and sizes.max() - sizes.min() <= 1

    def test_too_many_subbands_rejected(self):
        with pytest.raises(ValueError):
            cb.build_subband_map(2, 3)


class TestTypeI:
    def test_exact_codeword_recovered(self):
        target = cb.dft_beam(5, 0, 1, 16)
        h = np.tile(target[:, None], (1, 8))
        report = cb.typeI_encode(h, cb.CodebookConfigTypeI(1))
        assert report.beam_index == 5

    def test_zero_channel_falls_back_to_beam_zero(self):
        report = cb.typeI_encode(np.zeros((8, 4)), cb.CodebookConfigTypeI(2))
        assert report.beam_index == 0

    def test_selected_beam_is_exhaustive_argmax(self):
        rng = np.random.default_rng(3)
        config = cb.CodebookConfigTypeI(4)
        for _ in range(20):
            h = random_channel(rng, n_tx=8, k=6)
            report = cb.typeI_encode(h, config)
            scores = []
            for flat in range(4 * 8):
                beam, rot = divmod(flat, 4)
                b = cb.dft_beam(beam, rot, 4, 8)
                scores.append(np.sum(np.abs(b.conj() @ h) ** 2))
            assert report.beam_index == int(np.argmax(scores))

    def test_decode_unit_norm_columns(self):
        w = cb.typeI_decode(cb.CsiReportTypeI(13), cb.CodebookConfigTypeI(4), 16, 3)
        assert w.shape == (16, 3)
        np.testing.assert_allclose(np.linalg.norm(w, axis=0), 1.0, atol=1e-12)

    def test_encode_decode_round_trip_on_codeword(self):
        config = cb.CodebookConfigTypeI(2)
        target = cb.dft_beam(3, 1, 2, 8)
        h = np.tile(target[:, None], (1, 4))
        w = cb.typeI_decode(cb.typeI_encode(h, config), config, 8, 2)
        for col in w.T:
            np.testing.assert_allclose(col, target, atol=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        h = random_channel(rng, 8, 6)
        config = cb.CodebookConfigTypeI(2)
        base = cb.typeI_encode(h, config)
        for c in (2.0, -1.0, 0.3j, 1e-6 * (1 + 1j)):
            assert cb.typeI_encode(c * h, config) == base


class TestTypeII:
    def test_single_beam_channel(self):
        n_tx, k = 16, 48
        config = cb.CodebookConfigTypeII(4, 2, 2)
        sb_map = cb.build_subband_map(k, 2)
        h = np.tile(cb.dft_beam(2, 0, 4, n_tx)[:, None], (1, k))
        report = cb.typeII_encode(h, config, sb_map)
        assert report.rotation_index == 0
        assert 2 in report.beams
        assert report.beams[report.strongest_beam] == 2
        # The companion carries only numerical leakage: lowest amplitude.
        assert report.wideband_amp_levels[0] == 0

    def test_beam_selection_is_exhaustive_argmax(self):
        n_tx, k = 8, 12
        config = cb.CodebookConfigTypeII(4, 2, 2)
        sb_map = cb.build_subband_map(k, 2)
        rng = np.random.default_rng(17)
        for _ in range(10):
            h = random_channel(rng, n_tx, k)
            report = cb.typeII_encode(h, config, sb_map)
            g = np.stack(
                [h[:, sb_map == s].mean(axis=1) for s in range(2)], axis=1
            )
            best = max(
                (
                    (
                        sum(
                            np.sum(
                                np.abs(cb.dft_beam(b, r, 4, n_tx).conj() @ g) ** 2
                            )
                            for b in beams
                        ),
                        r,
                        beams,
                    )
                    for r in range(4)
                    for beams in itertools.combinations(range(n_tx), 2)
                ),
                key=lambda t: t[0],
            )
            captured = sum(
                np.sum(np.abs(cb.dft_beam(b, report.rotation_index, 4, n_tx).conj() @ g) ** 2)
                for b in report.beams
            )
            assert captured == pytest.approx(best[0], rel=1e-12)

    def test_decode_matches_hand_computed_product(self):
        n_tx = 8
        config = cb.CodebookConfigTypeII(4, 2, 2)
        report = cb.CsiReportTypeII(
            rotation_index=1,
            beams=(2, 5),
            strongest_beam=0,
            wideband_amp_levels=(4,),
            subband_amp_levels=((1,), (0,)),
            subband_phase_levels=((3,), (6,)),
        )
        w = cb.typeII_decode(report, config, n_tx)
        b_strong = cb.dft_beam(2, 1, 4, n_tx)
        b_weak = cb.dft_beam(5, 1, 4, n_tx)
        amp = cb.WIDEBAND_AMP_LEVELS[4]
        for s, (sb_a, sb_p) in enumerate(((1, 3), (0, 6))):
            c = cb.SUBBAND_AMP_LEVELS[sb_a] * np.exp(2j * np.pi * sb_p / 8)
            col = b_strong + amp * c * b_weak
            col = col / np.linalg.norm(col)
            np.testing.assert_allclose(w[:, s], col, atol=1e-12)

    def test_decode_unit_norm_columns(self):
        rng = np.random.default_rng(23)
        config = cb.CodebookConfigTypeII(4, 4, 4)
        sb_map = cb.build_subband_map(48, 4)
        for _ in range(10):
            report = cb.typeII_encode(random_channel(rng), config, sb_map)
            w = cb.typeII_decode(report, config, 16)
            np.testing.assert_allclose(np.linalg.norm(w, axis=0), 1.0, atol=1e-12)

    def test_l1_degenerate_config(self):
        config = cb.CodebookConfigTypeII(4, 1, 2)
        report = cb.typeII_encode(
            random_channel(np.random.default_rng(0), 8, 8),
            config,
            cb.build_subband_map(8, 2),
        )
        w = cb.typeII_decode(report, config, 8)
        b = cb.dft_beam(report.beams[0], report.rotation_index, 4, 8)
        for col in w.T:
            np.testing.assert_allclose(col, b, atol=1e-12)

    def test_zero_channel_default_report(self):
        config = cb.CodebookConfigTypeII(4, 2, 2)
        report = cb.typeII_encode(
            np.zeros((8, 8)), config, cb.build_subband_map(8, 2)
        )
        assert report.beams == (0, 1)
        assert report.wideband_amp_levels == (0,)

    def test_scale_invariance(self):
        rng = np.random.default_rng(31)
        config = cb.CodebookConfigTypeII(4, 3, 3)
        sb_map = cb.build_subband_map(24, 3)
        h = random_channel(rng, 8, 24)
        base = cb.typeII_encode(h, config, sb_map)
        for c in (3.0, -0.5j, 1e5 * (2 - 1j)):
            assert cb.typeII_encode(c * h, config, sb_map) == base

    def test_fidelity_monotone_in_beam_count(self):
        rng = np.random.default_rng(41)
        sb_count = 2
        sb_map = cb.build_subband_map(24, sb_count)
        means = []
        channels = [random_channel(rng, 8, 24) for _ in range(100)]
        for l in (1, 2, 4):
            config = cb.CodebookConfigTypeII(4, l, sb_count)
            scores = []
            for h in channels:
                report = cb.typeII_encode(h, config, sb_map)
                w = cb.typeII_decode(report, config, 8)
                g = np.stack(
                    [h[:, sb_map == s].mean(axis=1) for s in range(sb_count)], axis=1
                )
                align = np.abs(np.sum(w.conj() * g, axis=0)) / np.linalg.norm(g, axis=0)
                scores.append(align.mean())
            means.append(np.mean(scores))
        assert means[0] <= means[1] <= means[2]


class TestOverhead:
    def test_type1_reference_points(self):
        for o, bits in ((1, 5), (2, 6), (4, 7)):
            assert cb.overhead_bits(cb.CodebookConfigTypeI(o), 32) == bits

    def test_type1_small_array(self):
        assert cb.overhead_bits(cb.CodebookConfigTypeI(1), 16) == 4

    def test_type2_documented_formula(self):
        # rotation + C(N_t, L) combination + strongest position
        # + 3-bit wideband amps + per-subband (1 amp + 3 phase) bits.
        config = cb.CodebookConfigTypeII(4, 2, 2)
        assert cb.overhead_bits(config, 16) == 2 + 7 + 1 + 3 + 2 * 1 * (1 + 3)

    def test_type2_reference_points(self):
        # Large-array budgets for (L, N_SB) = (2,2), (3,3), (4,4).
        for l, bits in ((2, 23), (3, 47), (4, 77)):
            config = cb.CodebookConfigTypeII(4, l, l)
            assert cb.overhead_bits(config, 32) == bits


def _random_report(rng, config, n_tx):
    if isinstance(config, cb.CodebookConfigTypeI):
        return cb.CsiReportTypeI(int(rng.integers(config.oversampling * n_tx)))
    l, n_sb = config.n_beams, config.n_subbands
    beams = tuple(sorted(rng.choice(n_tx, size=l, replace=False).tolist()))
    return cb.CsiReportTypeII(
        rotation_index=int(rng.integers(config.oversampling)),
        beams=beams,
        strongest_beam=int(rng.integers(l)),
        wideband_amp_levels=tuple(rng.integers(8, size=l - 1).tolist()),
        subband_amp_levels=tuple(
            tuple(rng.integers(2, size=l - 1).tolist()) for _ in range(n_sb)
        ),
        subband_phase_levels=tuple(
            tuple(rng.integers(8, size=l - 1).tolist()) for _ in range(n_sb)
        ),
    )


class TestBitPacking:
    def test_type1_five_bits(self):
        config = cb.CodebookConfigTypeI(1)
        packed = cb.pack_bits(cb.CsiReportTypeI(19), config, 32)
        assert cb.overhead_bits(config, 32) == 5
        assert len(packed) == 1  # byte-aligned with zero padding

    def test_combo_index_first_is_zero(self):
        assert cb._combo_rank((0, 1), 16) == 0
        assert cb._combo_unrank(0, 16, 2) == (0, 1)

    def test_combo_rank_bijection(self):
        n, k = 10, 3
        seen = set()
        for beams in itertools.combinations(range(n), k):
            r = cb._combo_rank(beams, n)
            assert cb._combo_unrank(r, n, k) == beams
            seen.add(r)
        assert seen == set(range(math.comb(n, k)))

    def test_round_trip_1000_random_reports(self):
        rng = np.random.default_rng(99)
        configs = [
            (cb.CodebookConfigTypeI(1), 32),
            (cb.CodebookConfigTypeI(4), 16),
            (cb.CodebookConfigTypeII(4, 2, 2), 16),
            (cb.CodebookConfigTypeII(4, 4, 4), 32),
            (cb.CodebookConfigTypeII(4, 3, 3), 16),
        ]
        failures = 0
        for i in range(1000):
            config, n_tx = configs[i % len(configs)]
            report = _random_report(rng, config, n_tx)
            unpacked = cb.unpack_bits(cb.pack_bits(report, config, n_tx), config, n_tx)
            failures += unpacked != report
        assert failures == 0

    def test_packed_length_matches_overhead(self):
        rng = np.random.default_rng(7)
        config = cb.CodebookConfigTypeII(4, 3, 4)
        report = _random_report(rng, config, 16)
        packed = cb.pack_bits(report, config, 16)
        assert len(packed) == (cb.overhead_bits(config, 16) + 7) // 8

    def test_length_mismatch_rejected(self):
        config = cb.CodebookConfigTypeI(1)
        with pytest.raises(cb.ReportDecodeError):
            cb.unpack_bits(b"\x00\x00\x00", config, 32)

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, seed):
        rng = np.random.default_rng(seed)
        config = cb.CodebookConfigTypeII(
            4, int(rng.integers(1, 5)), int(rng.integers(1, 5))
        )
        report = _random_report(rng, config, 16)
        assert cb.unpack_bits(cb.pack_bits(report, config, 16), config, 16) == report


class TestSubbandExpansion:
    def test_single_subband_broadcasts(self):
        w = np.arange(8, dtype=complex).reshape(8, 1)
        out = cb.subband_to_subcarrier(w, np.zeros(5, dtype=int))
        assert out.shape == (8, 5)
        for col in out.T:
            np.testing.assert_array_equal(col, w[:, 0])

    def test_even_split(self):
        w = np.array([[1.0, 2.0]], dtype=complex)
        out = cb.subband_to_subcarrier(w, np.array([0, 0, 1, 1]))
        np.testing.assert_array_equal(out[0], [1, 1, 2, 2])

    def test_piecewise_constant_fixpoint(self):
        rng = np.random.default_rng(13)
        sb_map = cb.build_subband_map(12, 3)
        w = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        expanded = cb.subband_to_subcarrier(w, sb_map)
        averaged = np.stack(
            [expanded[:, sb_map == s].mean(axis=1) for s in range(3)], axis=1
        )
        np.testing.assert_allclose(averaged, w, rtol=1e-15)
