"""
Test image transforms
- involutions and identity params
- geometry and dims
- perspective homography
- color and pixel-level values
"""
import numpy as np
import pytest

from conftest import make_raster
from models.media_models import Raster
from models.transform_models import TransformSpec
from services import image_augmentations as img_aug
from services.augmentation_core import apply_with_probability
from utils.errors import ParamValidationError
from utils.rng import Rng


def run(name, image, seed=0, **params):
    out, _ = apply_with_probability(TransformSpec(name=name, params=params), image, seed, modality="image")
    return out


class TestIdentities:
    """Involutions and identity parameterizations are bit-exact"""

    def test_flips_are_involutions(self, image):
        assert run("hflip", run("hflip", image)) == image
        assert run("vflip", run("vflip", image)) == image
        print("✓ hflip and vflip applied twice restore the input")

    def test_rotate_90_four_times(self, image):
        out = image
        for _ in range(4):
            out = run("rotate", out, degrees=90)
        assert out == image
        assert (run("rotate", image, degrees=90).width, run("rotate", image, degrees=90).height) == (image.height, image.width)
        print("✓ rotate(90) four times restores the input")

    @pytest.mark.parametrize("name,params", [
        ("brightness", {"factor": 1.0}),
        ("contrast", {"factor": 1.0}),
        ("saturation", {"factor": 1.0}),
        ("color_jitter", {}),
        ("sharpen", {"factor": 1.0}),
        ("blur", {"radius": 0}),
        ("pixelization", {"ratio": 1.0}),
        ("shuffle_pixels", {"factor": 0.0}),
        ("random_noise", {"mean": 0.0, "var": 0.0}),
        ("perspective_transform", {"sigma": 0}),
        ("skew", {"skew_factor": 0}),
        ("change_aspect_ratio", {"ratio": 1.0}),
        ("opacity", {"level": 1.0}),
        ("apply_filter_kernel", {"kernel": "identity"}),
        ("clip_image_size", {}),
        ("resize", {}),
        ("scale", {"factor": 1.0}),
        ("convert_color", {"mode": "RGB"}),
        ("apply_lambda", {}),
    ])
    def test_identity_params(self, image, name, params):
        assert run(name, image, **params) == image
        print(f"✓ {name} {params} is the identity")


class TestGeometry:
    """Output dims"""

    def test_crop(self):
        image = make_raster(40, 20)
        out = run("crop", image, x1=0.25, y1=0.5, x2=0.75, y2=1.0)
        assert (out.width, out.height) == (20, 10)
        assert np.array_equal(out.pixels, image.pixels[10:20, 10:30])
        print("✓ crop keeps the fractional box")

    def test_crop_order_validated(self, image):
        with pytest.raises(ParamValidationError):
            run("crop", image, x1=0.8, x2=0.2)
        print("✓ crop with x1 > x2 rejected")

    def test_pad_and_pad_square(self):
        image = make_raster(40, 20)
        out = run("pad", image, w_factor=0.25, h_factor=0.5, color=(1, 2, 3))
        assert (out.width, out.height) == (60, 40)
        assert tuple(out.pixels[0, 0]) == (1, 2, 3)
        square = run("pad_square", image)
        assert (square.width, square.height) == (40, 40)
        assert np.array_equal(square.pixels[10:30], image.pixels)
        print("✓ pad and pad_square dims")

    def test_scale_and_aspect(self):
        image = make_raster(40, 20)
        assert (run("scale", image, factor=0.5).width, run("scale", image, factor=0.5).height) == (20, 10)
        out = run("change_aspect_ratio", image, ratio=4.0)
        assert (out.width, out.height) == (80, 10)
        print("✓ scale and change_aspect_ratio dims")

    def test_rotate_expands_canvas(self, image):
        out = run("rotate", image, degrees=45)
        assert out.width > image.width and out.height > image.height
        print("✓ non-right-angle rotate expands to the bounding box")

    def test_clip_image_size(self):
        out = run("clip_image_size", make_raster(40, 40), max_resolution=400)
        assert (out.width, out.height) == (20, 20)
        with pytest.raises(ParamValidationError):
            run("clip_image_size", make_raster(), min_resolution=500, max_resolution=100)
        print("✓ clip_image_size rescales to the pixel budget")


class TestPerspective:
    """Homography solve and warp"""

    def test_homography_residual(self):
        src = img_aug.image_corners(64, 48)
        dst, h = img_aug.jittered_homography(64, 48, 4.0, Rng(3))
        residual = np.abs(img_aug.apply_homography(h, src) - dst).max()
        assert residual < 1e-6
        print(f"✓ Homography maps corners onto the jittered quad (residual {residual:.2e})")

    def test_perspective_is_deterministic(self):
        image = make_raster(48, 48)
        first = run("perspective_transform", image, seed=9, sigma=3.0)
        assert first == run("perspective_transform", image, seed=9, sigma=3.0)
        assert (first.width, first.height) == (48, 48)
        print("✓ perspective_transform reproducible under a seed")


class TestPixelValues:
    """Color and pixel-level transforms"""

    def test_pixelization_2x2_average(self):
        pixels = np.array([[[10, 10, 10], [20, 20, 20]], [[30, 30, 30], [40, 40, 40]]], dtype=np.uint8)
        out = run("pixelization", Raster(pixels), ratio=0.5)
        assert np.all(out.pixels == 25)
        print("✓ pixelization(0.5) on 2x2 is the block average")

    def test_grayscale_luma(self):
        out = run("grayscale", Raster(np.array([[[255, 0, 0]]], dtype=np.uint8)))
        assert tuple(out.pixels[0, 0]) == (76, 76, 76)
        print("✓ grayscale uses Rec.601 luma")

    def test_brightness_scales(self):
        out = run("brightness", Raster(np.full((2, 2, 3), 100, dtype=np.uint8)), factor=1.5)
        assert np.all(out.pixels == 150)
        print("✓ brightness multiplies values")

    def test_shuffle_preserves_pixels(self, image):
        out = run("shuffle_pixels", image, seed=4, factor=0.5)
        before = sorted(map(tuple, image.pixels.reshape(-1, 3)))
        after = sorted(map(tuple, out.pixels.reshape(-1, 3)))
        assert before == after
        assert out != image
        print("✓ shuffle_pixels permutes without changing the pixel multiset")

    def test_encoding_quality(self, image):
        low = run("encoding_quality", image, quality=10)
        assert low == run("encoding_quality", image, quality=10)
        assert low != image
        assert (low.width, low.height, low.channels) == (image.width, image.height, 3)
        print("✓ JPEG round trip is deterministic and lossy")

    def test_opacity_and_alpha(self, image):
        out = run("opacity", image, level=0.5)
        assert out.channels == 4
        assert np.all(out.pixels[:, :, 3] == 128)
        rgba = run("convert_color", image, mode="RGBA")
        assert np.array_equal(run("convert_color", rgba, mode="RGB").pixels, image.pixels)
        print("✓ opacity halves alpha; RGB <-> RGBA round trip")

    def test_random_noise_streams(self, image):
        first = run("random_noise", image, seed=1, var=0.05)
        assert first == run("random_noise", image, seed=1, var=0.05)
        assert first != run("random_noise", image, seed=2, var=0.05)
        print("✓ random_noise depends only on the seed")

    def test_random_noise_magnitude(self):
        gray = Raster(np.full((128, 128, 3), 128, dtype=np.uint8))
        out = run("random_noise", gray, seed=3, var=0.01)
        change = np.abs(out.pixels.astype(np.float64) - gray.pixels) / 255.0
        assert change.mean() == pytest.approx(0.1 * np.sqrt(2.0 / np.pi), abs=0.005)
        print(f"✓ var 0.01 noise moves mid-gray by {change.mean():.4f} on average")

    def test_color_jitter_clamps_and_desaturates(self):
        pixels = np.array([[[100, 100, 100], [200, 200, 200]]], dtype=np.uint8)
        bright = run("color_jitter", Raster(pixels), brightness_factor=2.0)
        assert bright.pixels[0, 0].tolist() == [200, 200, 200]
        assert bright.pixels[0, 1].tolist() == [255, 255, 255]
        flat = run("color_jitter", make_raster(16, 16, seed=5), saturation_factor=0.0)
        assert np.array_equal(flat.pixels[:, :, 0], flat.pixels[:, :, 1])
        assert np.array_equal(flat.pixels[:, :, 1], flat.pixels[:, :, 2])
        print("✓ color_jitter brightness 2 doubles and clamps; saturation 0 is gray")

    def test_masked_composite_default(self, image):
        out = run("masked_composite", image)
        half = image.width // 2
        assert np.array_equal(out.pixels[:, half:], image.pixels[:, half:])
        left = out.pixels[:, :half]
        assert np.array_equal(left[:, :, 0], left[:, :, 1])
        print("✓ masked_composite takes the gray copy on the left half")
