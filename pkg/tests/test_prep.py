"""Preparation tests: decode, contrast, masking, inpainting, resize."""

import numpy as np
import pytest
from PIL import Image

from pentimento.errors import ConfigError, DecodeError, ShapeError
from pentimento.prep import (
    apply_mask,
    fit_long_side,
    from_net_input,
    inpaint_diffusion,
    laplacian_residual,
    load_image,
    load_mask,
    normalize_contrast,
    resize_bilinear,
    save_image,
    to_gray,
    to_net_input,
)


def write_gray_png(path, values):
    Image.fromarray(np.asarray(values, dtype=np.uint8), mode="L").save(path)


class TestLoadSave:
    def test_white_pixel(self, tmp_path):
        path = tmp_path / "white.png"
        write_gray_png(path, [[255]])
        assert load_image(path) == pytest.approx(1.0)

    def test_black_pixel(self, tmp_path):
        path = tmp_path / "black.png"
        write_gray_png(path, [[0]])
        assert load_image(path) == pytest.approx(0.0)

    def test_gradient_strip_exact_by_255(self, tmp_path):
        path = tmp_path / "strip.png"
        values = np.arange(256, dtype=np.uint8).reshape(1, 256)
        write_gray_png(path, values)
        img = load_image(path)
        np.testing.assert_array_equal(img, values.astype(np.float32) / 255.0)

    def test_corrupt_file_raises_decode_error(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"not an image at all")
        with pytest.raises(DecodeError):
            load_image(path)

    def test_color_kept_as_three_channels(self, tmp_path):
        path = tmp_path / "rgb.png"
        arr = np.zeros((2, 2, 3), dtype=np.uint8)
        arr[..., 0] = 200
        Image.fromarray(arr, mode="RGB").save(path)
        img = load_image(path)
        assert img.shape == (2, 2, 3)

    def test_save_load_round_trip_within_one_step(self, tmp_path):
        rng = np.random.default_rng(0)
        img = rng.random((5, 7)).astype(np.float32)
        path = tmp_path / "rt.png"
        save_image(img, path)
        back = load_image(path)
        assert np.max(np.abs(back - img)) <= 1.0 / 255.0 / 2 + 1e-7

    def test_mask_threshold_semantics(self, tmp_path):
        path = tmp_path / "mask.png"
        write_gray_png(path, [[0, 127, 128, 255]])
        mask = load_mask(path)
        np.testing.assert_array_equal(mask, [[False, False, True, True]])


class TestNormalizeContrast:
    def test_full_range_image_unchanged(self, rng):
        img = rng.random((40, 40)).astype(np.float32)
        img[:2, :] = 0.0  # >1% mass at each extreme
        img[-2:, :] = 1.0
        out = normalize_contrast(img)
        assert np.max(np.abs(out - img)) <= 1.0 / 255.0

    def test_constant_maps_to_half(self):
        out = normalize_contrast(np.full((8, 8), 0.3, np.float32))
        np.testing.assert_array_equal(out, np.full((8, 8), 0.5, np.float32))

    def test_two_level_image_stretches_to_full_range(self):
        img = np.full((32, 32), 0.4, np.float32)
        img[16:, :] = 0.6
        out = normalize_contrast(img)
        assert set(np.unique(out)) == {0.0, 1.0}

    def test_monotone(self, rng):
        img = rng.random((16, 16)).astype(np.float32)
        out = normalize_contrast(img)
        order_in = np.argsort(img.ravel(), kind="stable")
        sorted_out = out.ravel()[order_in]
        assert np.all(np.diff(sorted_out) >= 0)

    def test_bad_percentiles_rejected(self):
        with pytest.raises(ConfigError):
            normalize_contrast(np.zeros((4, 4), np.float32), lo_pct=90, hi_pct=10)


class TestApplyMask:
    def test_empty_mask_bit_exact(self, rng):
        img = rng.random((6, 6)).astype(np.float32)
        out = apply_mask(img, np.zeros((6, 6), bool), fill=0.5)
        np.testing.assert_array_equal(out, img)

    def test_full_mask_constant_fill(self):
        img = np.linspace(0, 1, 16, dtype=np.float32).reshape(4, 4)
        out = apply_mask(img, np.ones((4, 4), bool), fill=0.5)
        np.testing.assert_array_equal(out, np.full((4, 4), 0.5, np.float32))

    @pytest.mark.parametrize("fill", [0.25, "diffusion"])
    def test_idempotent(self, fill, rng):
        img = rng.random((12, 12)).astype(np.float32)
        mask = np.zeros((12, 12), bool)
        mask[4:8, 5:9] = True
        once = apply_mask(img, mask, fill)
        twice = apply_mask(once, mask, fill)
        np.testing.assert_array_equal(once, twice)

    @pytest.mark.parametrize("fill", [0.0, 0.7, "diffusion"])
    def test_unmasked_pixels_never_altered(self, fill, rng):
        img = rng.random((10, 10)).astype(np.float32)
        mask = rng.random((10, 10)) < 0.3
        out = apply_mask(img, mask, fill)
        np.testing.assert_array_equal(out[~mask], img[~mask])

    def test_dims_mismatch(self, rng):
        with pytest.raises(ShapeError):
            apply_mask(
                rng.random((4, 4)).astype(np.float32), np.zeros((5, 5), bool), 0.5
            )


class TestInpaint:
    def test_constant_surround_fills_to_constant(self):
        img = np.full((9, 9), 0.8, np.float32)
        mask = np.zeros((9, 9), bool)
        mask[3:6, 3:6] = True
        result = inpaint_diffusion(img, mask, tol=1e-5)
        assert result.converged
        assert np.max(np.abs(result.image[mask] - 0.8)) < 1e-4

    def test_one_pixel_hole_on_strip_fills_to_neighbor_mean(self):
        img = np.array([[0.2, 0.0, 0.8]], dtype=np.float32)
        mask = np.array([[False, True, False]])
        result = inpaint_diffusion(img, mask, tol=1e-7)
        assert result.image[0, 1] == pytest.approx(0.5, abs=1e-5)

    def test_maximum_principle(self, rng):
        img = rng.random((24, 24)).astype(np.float32)
        mask = np.zeros((24, 24), bool)
        mask[5:15, 8:20] = True
        result = inpaint_diffusion(img, mask)
        lo, hi = img[~mask].min(), img[~mask].max()
        assert result.image[mask].min() >= lo - 1e-6
        assert result.image[mask].max() <= hi + 1e-6

    def test_harmonic_at_convergence(self, rng):
        """Interior Laplacian goes below 10*tol on a smooth gradient image."""
        yy, xx = np.meshgrid(np.linspace(0, 1, 32), np.linspace(0, 1, 32),
                             indexing="ij")
        img = (0.5 * yy + 0.5 * xx).astype(np.float32)
        mask = rng.random((32, 32)) < 0.2
        tol = 1e-5
        result = inpaint_diffusion(img, mask, tol=tol, max_iters=20000)
        assert result.converged
        assert laplacian_residual(result.image.astype(np.float64), mask) < 10 * tol

    def test_max_iters_flagged(self):
        img = np.tile(np.linspace(0, 1, 32, dtype=np.float32), (32, 1))
        mask = np.zeros((32, 32), bool)
        mask[8:28, 2:30] = True
        result = inpaint_diffusion(img, mask, tol=1e-12, max_iters=5)
        assert not result.converged
        assert result.iterations == 5

    def test_empty_mask_untouched(self, rng):
        img = rng.random((6, 6)).astype(np.float32)
        result = inpaint_diffusion(img, np.zeros((6, 6), bool))
        np.testing.assert_array_equal(result.image, img)
        assert result.converged

    def test_full_mask_constant_half(self):
        result = inpaint_diffusion(np.zeros((4, 4), np.float32), np.ones((4, 4), bool))
        np.testing.assert_array_equal(result.image, np.full((4, 4), 0.5, np.float32))


class TestResize:
    def test_identity_bit_exact(self, rng):
        img = rng.random((7, 9)).astype(np.float32)
        np.testing.assert_array_equal(resize_bilinear(img, 7, 9), img)

    def test_constant_stays_constant(self):
        img = np.full((5, 5), 0.42, np.float32)
        out = resize_bilinear(img, 13, 3)
        np.testing.assert_allclose(out, 0.42, rtol=1e-6)

    def test_linear_ramp_stays_linear_in_interior(self):
        """2x upscale of a ramp: constant first differences away from edges."""
        img = np.tile(np.linspace(0, 1, 16, dtype=np.float32), (4, 1))
        out = resize_bilinear(img, 4, 32)
        diffs = np.diff(out[0, 1:-1].astype(np.float64))
        assert np.max(np.abs(diffs - diffs[0])) <= 1e-6

    def test_color_resize(self, rng):
        img = rng.random((6, 6, 3)).astype(np.float32)
        out = resize_bilinear(img, 3, 9)
        assert out.shape == (3, 9, 3)

    def test_bad_target_rejected(self):
        with pytest.raises(ShapeError):
            resize_bilinear(np.zeros((4, 4), np.float32), 0, 5)


class TestLayoutHelpers:
    def test_fit_long_side_multiples(self):
        h, w = fit_long_side(1024, 768, 512)
        assert max(h, w) == 512
        assert h % 16 == 0 and w % 16 == 0

    def test_gray_replicated_to_three_channels(self, rng):
        img = rng.random((4, 5)).astype(np.float32)
        t = to_net_input(img)
        assert t.shape == (1, 3, 4, 5)
        for c in range(3):
            np.testing.assert_array_equal(t[0, c], img)

    def test_net_round_trip(self, rng):
        img = rng.random((4, 5, 3)).astype(np.float32)
        np.testing.assert_array_equal(from_net_input(to_net_input(img)), img)

    def test_to_gray_luminance(self):
        img = np.zeros((1, 1, 3), np.float32)
        img[0, 0] = [1.0, 1.0, 1.0]
        assert to_gray(img)[0, 0] == pytest.approx(1.0, abs=1e-6)
