"""Embedding, classical decoding and PSNR tests."""

import math

import numpy as np
import pytest

from bluelink import pixelcodec as pc
from bluelink.harness import content


def uniform_frame(value, w=200, h=120):
    return np.full((h, w, 3), value, dtype=np.uint8)


class TestGridGeometry:
    def test_integer_partition_with_remainder(self):
        geom = pc.GridGeometry(rows=10, cols=10, width=299, height=299)
        assert geom.cell_width == 29 and geom.cell_height == 29
        # remainder pixels belong to the last row/column of cells
        assert geom.row_of()[-1] == 9 and geom.row_of()[289] == 9
        assert geom.col_of()[260] == 8

    def test_too_small_image(self):
        with pytest.raises(ValueError):
            pc.GridGeometry(rows=10, cols=10, width=8, height=50)

    def test_cell_means_uniform(self):
        geom = pc.GridGeometry(4, 4, 96, 96)
        chan = np.full((96, 96), 77.0)
        assert np.allclose(pc.cell_means(chan, geom), 77.0)


class TestEmbedPair:
    def test_uniform_midgray_fixed_delta(self):
        img = uniform_frame(128)
        geom = pc.GridGeometry.for_frame(4, 4, img)
        fp_, fm = pc.embed_pair(img, np.ones(16), geom, pc.fixed_plan(2))
        assert np.all(fp_[:, :, pc.BLUE] == 130)
        assert np.all(fm[:, :, pc.BLUE] == 126)
        assert np.array_equal(fp_[:, :, 0], img[:, :, 0])
        assert np.array_equal(fp_[:, :, 1], img[:, :, 1])

    def test_bit_zero_flips_signs(self):
        img = uniform_frame(128)
        geom = pc.GridGeometry.for_frame(4, 4, img)
        fp_, fm = pc.embed_pair(img, np.zeros(16), geom, pc.fixed_plan(2))
        assert np.all(fp_[:, :, pc.BLUE] == 126)
        assert np.all(fm[:, :, pc.BLUE] == 130)

    def test_clamp_at_255(self):
        img = uniform_frame(255)
        geom = pc.GridGeometry.for_frame(4, 4, img)
        fp_, fm = pc.embed_pair(img, np.ones(16), geom, pc.fixed_plan(2))
        assert np.all(fp_[:, :, pc.BLUE] == 255)
        assert np.all(fm[:, :, pc.BLUE] == 253)

    def test_mix_delta_threshold(self):
        # dark cell mean 20 -> step 3; bright cell mean 40 -> step 2
        img = uniform_frame(20, w=80, h=80)
        img[:, 40:, pc.BLUE] = 40
        geom = pc.GridGeometry.for_frame(2, 2, img)
        fp_, _ = pc.embed_pair(img, np.ones(4), geom, pc.MIX_PLAN)
        assert np.all(fp_[:10, :10, pc.BLUE] == 23)
        assert np.all(fp_[:10, 70:, pc.BLUE] == 42)

    def test_row_major_cell_order(self):
        img = uniform_frame(100, w=40, h=20)
        geom = pc.GridGeometry.for_frame(2, 4, img)
        bits = np.zeros(8)
        bits[1] = 1  # row 0, col 1
        fp_, _ = pc.embed_pair(img, bits, geom, pc.fixed_plan(2))
        assert fp_[0, 15, pc.BLUE] == 102  # cell (0, 1) raised
        assert fp_[0, 5, pc.BLUE] == 98
        assert fp_[15, 15, pc.BLUE] == 98  # cell (1, 1) is bit 0

    def test_bit_length_mismatch(self):
        img = uniform_frame(100)
        geom = pc.GridGeometry.for_frame(4, 4, img)
        with pytest.raises(ValueError):
            pc.embed_pair(img, np.ones(15), geom)

    def test_red_green_never_touched(self, corpus):
        rng = np.random.default_rng(0)
        for img in corpus[:5]:
            geom = pc.GridGeometry.for_frame(10, 10, img)
            bits = rng.integers(0, 2, 100)
            fp_, fm = pc.embed_pair(img, bits, geom, pc.MIX_PLAN)
            for f in (fp_, fm):
                assert np.array_equal(f[:, :, 0], img[:, :, 0])
                assert np.array_equal(f[:, :, 1], img[:, :, 1])

    def test_blue_difference_is_twice_delta_without_clamp(self, corpus):
        rng = np.random.default_rng(1)
        img = corpus[0]
        geom = pc.GridGeometry.for_frame(4, 4, img)
        bits = rng.integers(0, 2, 16)
        fp_, fm = pc.embed_pair(img, bits, geom, pc.fixed_plan(2))
        blue = img[:, :, pc.BLUE].astype(int)
        unclamped = (blue + 2 <= 255) & (blue - 2 >= 0)
        diff = np.abs(fp_[:, :, pc.BLUE].astype(int) - fm[:, :, pc.BLUE].astype(int))
        assert np.all(diff[unclamped] == 4)

    def test_temporal_average_within_one_unit(self, corpus):
        # the flicker-cancellation premise: displayed average ~= original
        rng = np.random.default_rng(2)
        for img in corpus[:8]:
            geom = pc.GridGeometry.for_frame(10, 10, img)
            bits = rng.integers(0, 2, 100)
            fp_, fm = pc.embed_pair(img, bits, geom, pc.MIX_PLAN)
            avg = (fp_[:, :, pc.BLUE].astype(int) + fm[:, :, pc.BLUE].astype(int)) // 2
            assert np.abs(avg - img[:, :, pc.BLUE].astype(int)).max() <= 1


class TestClassicalDecode:
    def test_noiseless_roundtrip(self, corpus):
        rng = np.random.default_rng(3)
        for img in corpus[:10]:
            geom = pc.GridGeometry.for_frame(10, 10, img)
            bits = rng.integers(0, 2, 100).astype(np.uint8)
            fp_, fm = pc.embed_pair(img, bits, geom, pc.MIX_PLAN)
            assert np.array_equal(pc.classical_decode(fp_, fm, geom), bits)

    def test_swapped_frames_give_complement(self, corpus):
        rng = np.random.default_rng(4)
        img = uniform_frame(128, w=320, h=180)
        geom = pc.GridGeometry.for_frame(10, 10, img)
        bits = rng.integers(0, 2, 100).astype(np.uint8)
        fp_, fm = pc.embed_pair(img, bits, geom, pc.fixed_plan(2))
        assert np.array_equal(pc.classical_decode(fm, fp_, geom), 1 - bits)

    def test_tie_resolves_to_zero(self):
        img = uniform_frame(50)
        geom = pc.GridGeometry.for_frame(2, 2, img)
        assert np.array_equal(pc.classical_decode(img, img, geom), np.zeros(4))

    def test_noise_floor_under_gaussian(self):
        # 10x10 grid, >= 50x50-pixel cells, sigma 1, step 2: BER < 1%
        rng = np.random.default_rng(5)
        errors = 0
        total = 0
        for trial in range(100):
            img = rng.integers(30, 220, (500, 500, 3)).astype(np.uint8)
            geom = pc.GridGeometry.for_frame(10, 10, img)
            bits = rng.integers(0, 2, 100).astype(np.uint8)
            fp_, fm = pc.embed_pair(img, bits, geom, pc.fixed_plan(2))
            noisy_p = np.clip(fp_.astype(np.float64) + rng.normal(0, 1, fp_.shape), 0, 255)
            noisy_m = np.clip(fm.astype(np.float64) + rng.normal(0, 1, fm.shape), 0, 255)
            decoded = pc.classical_decode(
                np.rint(noisy_p).astype(np.uint8), np.rint(noisy_m).astype(np.uint8), geom
            )
            errors += int((decoded != bits).sum())
            total += 100
        assert errors / total < 0.01


class TestPsnr:
    def test_identical_frames_infinite(self):
        img = uniform_frame(90)
        assert math.isinf(pc.psnr(img, img))

    def test_uniform_delta3_closed_form(self):
        # Blue-only +/-3 without clamping: MSE = 9/3, PSNR = 43.36 dB
        img = uniform_frame(128)
        mod = img.copy()
        mod[:, :, pc.BLUE] = 131
        assert pc.psnr(img, mod) == pytest.approx(10 * math.log10(255**2 / 3.0), abs=1e-9)
        assert pc.psnr(img, mod) == pytest.approx(43.36, abs=0.01)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            pc.psnr(uniform_frame(1, w=10), uniform_frame(1, w=12))

    def test_mix_plan_on_corpus_in_reported_band(self, corpus):
        rng = np.random.default_rng(6)
        values = []
        for img in corpus:
            geom = pc.GridGeometry.for_frame(10, 10, img)
            bits = rng.integers(0, 2, 100)
            fp_, fm = pc.embed_pair(img, bits, geom, pc.MIX_PLAN)
            values.append(pc.psnr(img, fp_))
            values.append(pc.psnr(img, fm))
        mean = float(np.mean(values))
        assert 40.5 <= mean <= 43.5
