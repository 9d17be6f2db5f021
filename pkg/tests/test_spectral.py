import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssal.errors import ShapeError
from ssal.spectral import (
    Spectrum,
    center_dc,
    combine_filters,
    fft2d,
    highpass_apply,
    hpf_weight_map,
    hpf_weight_map_stack,
    ifft2d,
    ifft2d_complex,
    write_pgm,
)

from oracles import dft2d_direct, highpass_direct


class TestTransform:
    def test_constant_field_energy_at_dc_only(self):
        spec = fft2d(np.full((8, 8), 3.0)).data
        mag = np.abs(spec)
        assert mag[0, 0] > 1.0
        mag[0, 0] = 0.0
        assert mag.max() < 1e-12

    def test_impulse_flat_spectrum(self):
        field = np.zeros((8, 8))
        field[0, 0] = 1.0
        mag = np.abs(fft2d(field).data)
        assert np.allclose(mag, mag[0, 0], atol=1e-12)

    def test_matches_direct_dft_oracle_8x8(self):
        rng = np.random.default_rng(0)
        field = rng.standard_normal((8, 8))
        np.testing.assert_allclose(fft2d(field).data, dft2d_direct(field), atol=1e-9)

    @pytest.mark.parametrize("shape", [(4, 4), (8, 16), (6, 10), (5, 8), (7, 7)])
    def test_roundtrip_any_size(self, shape):
        rng = np.random.default_rng(1)
        field = rng.standard_normal(shape)
        np.testing.assert_allclose(ifft2d(fft2d(field)), field, atol=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_parseval(self, seed):
        rng = np.random.default_rng(seed)
        field = rng.standard_normal((16, 16))
        spec = fft2d(field).data
        assert abs((np.abs(spec) ** 2).sum() - (field**2).sum()) < 1e-9

    def test_non_finite_rejected(self):
        with pytest.raises(FloatingPointError):
            fft2d(np.array([[np.nan, 0.0], [0.0, 0.0]]))

    def test_non_2d_rejected(self):
        with pytest.raises(ShapeError):
            fft2d(np.zeros(8))


class TestHighpass:
    def test_radius_zero_removes_only_dc(self):
        rng = np.random.default_rng(2)
        field = rng.standard_normal((8, 8))
        spec = center_dc(fft2d(field))
        out = highpass_apply(spec, 0.0)
        assert out.data[4, 4] == 0.0
        mask = np.ones((8, 8), dtype=bool)
        mask[4, 4] = False
        np.testing.assert_array_equal(out.data[mask], spec.data[mask])

    def test_radius_one_zeroes_inscribed_circle(self):
        field = np.full((8, 8), 2.0)
        out = highpass_apply(center_dc(fft2d(field)), 1.0)
        rec = ifft2d(out)
        assert np.abs(rec).max() < 1e-9  # constant field fully removed

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            highpass_apply(fft2d(np.zeros((4, 4))), -0.1)

    def test_zero_dc_property(self):
        rng = np.random.default_rng(3)
        for r in (0.0, 0.1, 0.5):
            field = rng.random((16, 16))
            rec = ifft2d(highpass_apply(center_dc(fft2d(field)), r))
            assert abs(rec.mean()) <= 1e-9

    def test_step_edge_matches_direct_oracle(self):
        # 20x20 with r=0.2 so the cutoff disc actually removes bins
        field = np.zeros((20, 20))
        field[:, 10:] = 1.0
        rec = np.abs(highpass_direct(field, 0.2))
        got = np.abs(ifft2d_complex(highpass_apply(center_dc(fft2d(field)), 0.2)))
        np.testing.assert_allclose(got, rec, atol=1e-9)

    def test_step_edge_energy_near_edge(self):
        field = np.zeros((32, 32))
        field[:, 16:] = 1.0
        got = np.abs(ifft2d_complex(highpass_apply(center_dc(fft2d(field)), 0.1)))
        # the transform sees a periodic field: discontinuities at the step
        # (cols 15|16) and at the wrap (cols 31|0)
        peak_cols = set(np.argsort(got.max(axis=0))[-4:])
        assert peak_cols <= {15, 16, 31, 0}


class TestWeightMap:
    def test_constant_gives_uniform_fallback(self):
        w = hpf_weight_map(np.full((16, 16), 0.7), 0.1)
        assert np.array_equal(w, np.ones((16, 16)))

    def test_range_and_peak(self):
        rng = np.random.default_rng(4)
        w = hpf_weight_map(rng.random((16, 16)), 0.1)
        assert w.min() >= 0.0 and w.max() <= 1.0
        assert abs(w.max() - 1.0) < 1e-9

    def test_plateau_top_decile_near_boundary(self):
        field = np.full((32, 32), 0.1)
        field[12:20, 12:20] = 0.9
        w = hpf_weight_map(field, 0.1)
        thresh = np.quantile(w, 0.9)
        ys, xs = np.where(w >= thresh)
        inner = np.zeros((32, 32), dtype=bool)
        inner[12:20, 12:20] = True
        boundary = []
        for y in range(32):
            for x in range(32):
                if inner[y, x] and (
                    y in (12, 19) or x in (12, 19)
                ):
                    boundary.append((y, x))
        boundary = np.array(boundary)
        d = np.sqrt(
            ((ys[:, None] - boundary[None, :, 0]) ** 2 + (xs[:, None] - boundary[None, :, 1]) ** 2)
        ).min(axis=1)
        assert (d <= 2.0).mean() >= 0.9

    def test_matches_direct_filter_oracle(self):
        rng = np.random.default_rng(5)
        field = rng.random((8, 8))
        got = hpf_weight_map(field, 0.1)
        mag = np.abs(highpass_direct(field, 0.1))
        expected = mag / (mag.max() + 1e-12)
        np.testing.assert_allclose(got, expected, atol=1e-9)

    def test_stack_matches_single(self):
        rng = np.random.default_rng(6)
        frames = rng.random((5, 16, 16))
        stack = hpf_weight_map_stack(frames, 0.1)
        for i in range(5):
            np.testing.assert_allclose(stack[i], hpf_weight_map(frames[i], 0.1), atol=1e-12)

    def test_circular_shift_equivariance(self):
        rng = np.random.default_rng(7)
        field = rng.random((16, 16))
        base = np.abs(ifft2d_complex(highpass_apply(center_dc(fft2d(field)), 0.1)))
        shifted = np.roll(np.roll(field, 3, axis=0), -2, axis=1)
        moved = np.abs(ifft2d_complex(highpass_apply(center_dc(fft2d(shifted)), 0.1)))
        np.testing.assert_allclose(moved, np.roll(np.roll(base, 3, axis=0), -2, axis=1), atol=1e-9)

    def test_intensity_scaling_invariance(self):
        rng = np.random.default_rng(8)
        field = rng.random((16, 16)) + 0.1
        w1 = hpf_weight_map(field, 0.1)
        w2 = hpf_weight_map(3.7 * field, 0.1)
        np.testing.assert_allclose(w1, w2, atol=1e-9)


class TestCombine:
    def test_identical_masks_mean_identity(self):
        rng = np.random.default_rng(9)
        w = rng.random((4, 4))
        np.testing.assert_array_equal(combine_filters(w, w, "mean"), w)

    def test_mean_of_ones_and_zeros(self):
        ones, zeros = np.ones((3, 3)), np.zeros((3, 3))
        np.testing.assert_array_equal(combine_filters(ones, zeros, "mean"), np.full((3, 3), 0.5))

    def test_elementwise_average_exact(self):
        rng = np.random.default_rng(10)
        a, b = rng.random((5, 5)), rng.random((5, 5))
        expected = np.array([[(a[i, j] + b[i, j]) / 2.0 for j in range(5)] for i in range(5)])
        np.testing.assert_array_equal(combine_filters(a, b, "mean"), expected)

    def test_student_teacher_modes(self):
        a, b = np.zeros((2, 2)), np.ones((2, 2))
        assert np.array_equal(combine_filters(a, b, "student"), a)
        assert np.array_equal(combine_filters(a, b, "teacher"), b)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            combine_filters(np.zeros((2, 2)), np.zeros((3, 3)), "mean")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            combine_filters(np.zeros((2, 2)), np.zeros((2, 2)), "max")


def test_write_pgm_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    field = rng.random((6, 9))
    path = tmp_path / "w.pgm"
    write_pgm(path, field)
    raw = path.read_bytes()
    header, rest = raw.split(b"\n", 1)
    assert header == b"P5"
    dims, rest = rest.split(b"\n", 1)
    assert dims == b"9 6"
    maxval, pixels = rest.split(b"\n", 1)
    assert maxval == b"255"
    arr = np.frombuffer(pixels, dtype=np.uint8).reshape(6, 9)
    np.testing.assert_array_equal(arr, np.clip(np.rint(field * 255), 0, 255).astype(np.uint8))
