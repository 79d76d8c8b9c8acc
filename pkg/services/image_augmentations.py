"""
Image augmentations: spatial, color and pixel-level transforms over Raster

Every function takes a Raster first and returns a new Raster; inputs are
never modified. Identity parameterizations return a pixel-identical copy.
Overlay transforms live in services/image_overlays.py.
"""

import io
import logging
import math
from typing import Annotated, Any, Dict, Literal, Optional, Tuple

import numpy as np
from PIL import Image, ImageFilter
from pydantic import Field

from models.media_models import Raster
from services import intensity_service as ix
from services.augmentation_core import resolve_callable
from services.catalog import Color, Fraction, NonNegative, Positive, register
from services.media_io import as_raster
from utils.errors import ParamValidationError, TransformError
from utils.rng import Rng

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
PERSPECTIVE_MAX_REDRAWS = 8

FILTER_KERNELS: Dict[str, Tuple[Tuple[float, ...], float]] = {
    "identity": ((0, 0, 0, 0, 1, 0, 0, 0, 0), 1),
    "blur": ((1, 1, 1, 1, 1, 1, 1, 1, 1), 9),
    "smooth": ((1, 1, 1, 1, 5, 1, 1, 1, 1), 13),
    "sharpen": ((-2, -2, -2, -2, 32, -2, -2, -2, -2), 16),
    "detail": ((0, -1, 0, -1, 10, -1, 0, -1, 0), 6),
    "edge_enhance": ((-1, -1, -1, -1, 10, -1, -1, -1, -1), 2),
    "find_edges": ((-1, -1, -1, -1, 8, -1, -1, -1, -1), 1),
    "contour": ((-1, -1, -1, -1, 8, -1, -1, -1, -1), 1),
    "emboss": ((-1, 0, 0, 0, 1, 0, 0, 0, 0), 1),
}
KernelName = Literal["identity", "blur", "smooth", "sharpen", "detail", "edge_enhance",
                     "find_edges", "contour", "emboss"]


# ==================== HELPERS ====================

def split_alpha(img: Raster) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """(rgb float64, alpha uint8 or None)"""
    rgb = img.pixels[:, :, :3].astype(np.float64)
    alpha = img.pixels[:, :, 3:4] if img.channels == 4 else None
    return rgb, alpha


def join_alpha(rgb: np.ndarray, alpha: Optional[np.ndarray]) -> Raster:
    out = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
    if alpha is not None:
        out = np.concatenate([out, alpha], axis=2)
    return Raster(out)


def luma(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an (h, w, 3) float array"""
    return rgb @ LUMA_WEIGHTS


def fill_for(img: Raster, color) -> Tuple[int, ...]:
    color = tuple(int(c) for c in color)
    return color + (255,) if img.channels == 4 else color


def pil_rgb_filter(img: Raster, image_filter) -> Raster:
    """Apply a PIL filter to the color channels only"""
    rgb = Image.fromarray(np.ascontiguousarray(img.pixels[:, :, :3])).filter(image_filter)
    out = np.array(rgb, dtype=np.uint8)
    if img.channels == 4:
        out = np.concatenate([out, img.pixels[:, :, 3:4]], axis=2)
    return Raster(out)


def resize_raster(img: Raster, width: int, height: int, resample=Image.BILINEAR) -> Raster:
    if (width, height) == (img.width, img.height):
        return img.copy()
    return Raster.from_pil(img.to_pil().resize((max(1, width), max(1, height)), resample))


def _crop_order(params: Dict[str, Any]) -> None:
    if params["x2"] <= params["x1"] or params["y2"] <= params["y1"]:
        raise ParamValidationError("crop: need x1 < x2 and y1 < y2")


def _clip_sizes(params: Dict[str, Any]) -> None:
    low, high = params["min_resolution"], params["max_resolution"]
    if low is not None and high is not None and low > high:
        raise ParamValidationError("clip_image_size: min_resolution > max_resolution")


# ==================== SPATIAL ====================

@register("image", "spatial", ix.constant(100))
def hflip(img: Raster) -> Raster:
    """Mirror left-right"""
    return Raster(img.pixels[:, ::-1].copy())


@register("image", "spatial", ix.constant(100))
def vflip(img: Raster) -> Raster:
    """Mirror top-bottom"""
    return Raster(img.pixels[::-1].copy())


@register("image", "spatial", ix.rotate_degrees)
def rotate(img: Raster, degrees: float = 15.0, fill: Color = (255, 255, 255)) -> Raster:
    """
    Rotate counter-clockwise, expanding the canvas to the rotated bounding box

    Multiples of 90 degrees are exact sample permutations; other angles use
    bilinear interpolation with `fill` outside the source.
    """
    if degrees % 90 == 0:
        return Raster(np.rot90(img.pixels, k=int(degrees // 90) % 4).copy())
    rotated = img.to_pil().rotate(degrees, resample=Image.BILINEAR, expand=True, fillcolor=fill_for(img, fill))
    return Raster.from_pil(rotated)


@register("image", "spatial", ix.crop_area, validate_extra=_crop_order)
def crop(img: Raster, x1: Fraction = 0.25, y1: Fraction = 0.25,
         x2: Fraction = 0.75, y2: Fraction = 0.75) -> Raster:
    """Keep the box given as fractions of width/height"""
    left, upper = int(x1 * img.width), int(y1 * img.height)
    right = max(left + 1, int(x2 * img.width))
    lower = max(upper + 1, int(y2 * img.height))
    return Raster(img.pixels[upper:lower, left:right].copy())


@register("image", "spatial", ix.pad_amount)
def pad(img: Raster, w_factor: NonNegative = 0.25, h_factor: NonNegative = 0.25,
        color: Color = (0, 0, 0)) -> Raster:
    """Add int(w_factor*w) columns on each side and int(h_factor*h) rows top and bottom"""
    dw, dh = int(w_factor * img.width), int(h_factor * img.height)
    out = np.empty((img.height + 2 * dh, img.width + 2 * dw, img.channels), dtype=np.uint8)
    out[:, :] = fill_for(img, color)
    out[dh:dh + img.height, dw:dw + img.width] = img.pixels
    return Raster(out)


@register("image", "spatial", ix.constant(50))
def pad_square(img: Raster, color: Color = (0, 0, 0)) -> Raster:
    """Pad the shorter side (centered) so the output is max(w, h) square"""
    side = max(img.width, img.height)
    if img.width == img.height:
        return img.copy()
    out = np.empty((side, side, img.channels), dtype=np.uint8)
    out[:, :] = fill_for(img, color)
    left, top = (side - img.width) // 2, (side - img.height) // 2
    out[top:top + img.height, left:left + img.width] = img.pixels
    return Raster(out)


@register("image", "spatial", ix.explicit_target("width", "height"))
def resize(img: Raster, width: Optional[Annotated[int, Field(ge=1)]] = None,
           height: Optional[Annotated[int, Field(ge=1)]] = None) -> Raster:
    """Bilinear resize; a missing dim keeps the input's"""
    return resize_raster(img, width or img.width, height or img.height)


@register("image", "spatial", ix.log2_ratio("factor"))
def scale(img: Raster, factor: Positive = 0.5) -> Raster:
    """Resize both dims by factor (rounded, at least 1 px)"""
    return resize_raster(img, max(1, round(img.width * factor)), max(1, round(img.height * factor)))


@register("image", "spatial", ix.log2_ratio("ratio"))
def change_aspect_ratio(img: Raster, ratio: Positive = 1.0) -> Raster:
    """Multiply the current w/h ratio by `ratio` keeping the area: w*sqrt(r) x h/sqrt(r)"""
    if ratio == 1.0:
        return img.copy()
    root = math.sqrt(ratio)
    return resize_raster(img, max(1, round(img.width * root)), max(1, round(img.height / root)))


@register("image", "spatial", ix.explicit_target("min_resolution", "max_resolution"), validate_extra=_clip_sizes)
def clip_image_size(img: Raster, min_resolution: Optional[Annotated[int, Field(ge=1)]] = None,
                    max_resolution: Optional[Annotated[int, Field(ge=1)]] = None) -> Raster:
    """Rescale (aspect-preserving) so the pixel count lies within [min, max]"""
    area = img.width * img.height
    if min_resolution is not None and area < min_resolution:
        factor = math.sqrt(min_resolution / area)
    elif max_resolution is not None and area > max_resolution:
        factor = math.sqrt(max_resolution / area)
    else:
        return img.copy()
    return resize_raster(img, max(1, round(img.width * factor)), max(1, round(img.height * factor)))


@register("image", "spatial", ix.scaled("skew_factor", 1.0))
def skew(img: Raster, skew_factor: Annotated[float, Field(ge=-2.0, le=2.0)] = 0.0,
         axis: Literal[0, 1] = 0, fill: Color = (0, 0, 0)) -> Raster:
    """Shear along x (axis=0) or y (axis=1), expanding the canvas"""
    if skew_factor == 0:
        return img.copy()
    w, h = img.width, img.height
    if axis == 0:
        size = (w + int(math.ceil(abs(skew_factor) * h)), h)
        data = (1, -skew_factor, min(0.0, skew_factor * h), 0, 1, 0)
    else:
        size = (w, h + int(math.ceil(abs(skew_factor) * w)))
        data = (1, 0, 0, -skew_factor, 1, min(0.0, skew_factor * w))
    sheared = img.to_pil().transform(size, Image.AFFINE, data, resample=Image.BILINEAR,
                                     fillcolor=fill_for(img, fill))
    return Raster.from_pil(sheared)


# ==================== PERSPECTIVE ====================

def solve_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 H with H @ [x, y, 1] ~ [u, v, 1] from 4 point pairs (DLT, h33 = 1)"""
    a = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i], b[2 * i + 1] = u, v
    h = np.linalg.solve(a, b)
    return np.append(h, 1.0).reshape(3, 3)


def apply_homography(h: np.ndarray, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    homogeneous = np.column_stack([points, np.ones(len(points))]) @ h.T
    return homogeneous[:, :2] / homogeneous[:, 2:3]


def image_corners(width: int, height: int) -> np.ndarray:
    return np.array([[0, 0], [width - 1, 0], [width - 1, height - 1], [0, height - 1]], dtype=np.float64)


def is_convex_quad(quad: np.ndarray) -> bool:
    crosses = []
    for i in range(4):
        p0, p1, p2 = quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]
        crosses.append((p1[0] - p0[0]) * (p2[1] - p1[1]) - (p1[1] - p0[1]) * (p2[0] - p1[0]))
    crosses = np.array(crosses)
    return bool(np.all(crosses > 1e-9) or np.all(crosses < -1e-9))


def jittered_homography(width: int, height: int, sigma: float, rng: Rng,
                        base: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw Gaussian corner offsets until the quad is a valid homography target

    Returns:
        (jittered corners, H mapping source corners onto them)
    """
    src = image_corners(width, height)
    start = src if base is None else base
    for _ in range(PERSPECTIVE_MAX_REDRAWS + 1):
        dst = start + rng.normal(0.0, sigma, size=(4, 2))
        if not is_convex_quad(dst):
            continue
        try:
            h = solve_homography(src, dst)
        except np.linalg.LinAlgError:
            continue
        if abs(np.linalg.det(h)) > 1e-12:
            return dst, h
    raise TransformError(f"perspective: degenerate quadrilateral after {PERSPECTIVE_MAX_REDRAWS} redraws (sigma={sigma})")


def warp_bilinear(img: Raster, h: np.ndarray, fill) -> Raster:
    """Backward-map every output pixel through H^-1 and sample bilinearly"""
    height, width = img.height, img.width
    inverse = np.linalg.inv(h)
    ys, xs = np.mgrid[0:height, 0:width]
    coords = np.stack([xs.ravel(), ys.ravel(), np.ones(xs.size)], axis=0).astype(np.float64)
    mapped = inverse @ coords
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = mapped[0] / mapped[2]
        sy = mapped[1] / mapped[2]
    inside = np.isfinite(sx) & np.isfinite(sy) & (sx >= 0) & (sy >= 0) & (sx <= width - 1) & (sy <= height - 1)
    sx = np.where(inside, sx, 0.0)
    sy = np.where(inside, sy, 0.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = (sx - x0)[:, None]
    fy = (sy - y0)[:, None]
    src = img.pixels.astype(np.float64)
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    values = top * (1 - fy) + bottom * fy
    values[~inside] = np.array(fill_for(img, fill), dtype=np.float64)
    out = np.clip(np.rint(values), 0, 255).astype(np.uint8).reshape(height, width, img.channels)
    return Raster(out)


@register("image", "spatial", ix.scaled("sigma", 100.0))
def perspective_transform(img: Raster, sigma: NonNegative = 50.0, fill: Color = (0, 0, 0),
                          rng: Rng = None) -> Raster:
    """Jitter the four corners by N(0, sigma) px and warp with the resulting homography"""
    if sigma == 0:
        return img.copy()
    rng = rng or Rng(0)
    _, h = jittered_homography(img.width, img.height, sigma, rng)
    return warp_bilinear(img, h, fill)


# ==================== COLOR ====================

def _scale_values(img: Raster, factor: float) -> Raster:
    rgb, alpha = split_alpha(img)
    return join_alpha(rgb * factor, alpha)


def _contrast_values(img: Raster, factor: float) -> Raster:
    rgb, alpha = split_alpha(img)
    pivot = float(luma(rgb).mean())
    return join_alpha(pivot + factor * (rgb - pivot), alpha)


def _saturation_values(img: Raster, factor: float) -> Raster:
    rgb, alpha = split_alpha(img)
    gray = luma(rgb)[:, :, None]
    return join_alpha(gray + factor * (rgb - gray), alpha)


@register("image", "color", ix.factor_distance("factor"))
def brightness(img: Raster, factor: Positive = 1.0) -> Raster:
    """v -> clamp(round(v * factor))"""
    return img.copy() if factor == 1.0 else _scale_values(img, factor)


@register("image", "color", ix.factor_distance("factor"))
def contrast(img: Raster, factor: Positive = 1.0) -> Raster:
    """Scale distance from the image's mean Rec.601 luma"""
    return img.copy() if factor == 1.0 else _contrast_values(img, factor)


@register("image", "color", ix.factor_distance("factor"))
def saturation(img: Raster, factor: NonNegative = 1.0) -> Raster:
    """Lerp each pixel from its own luma (factor 0 = grayscale)"""
    return img.copy() if factor == 1.0 else _saturation_values(img, factor)


@register("image", "color", ix.maximum(ix.factor_distance("brightness_factor"),
                                       ix.factor_distance("contrast_factor"),
                                       ix.factor_distance("saturation_factor")))
def color_jitter(img: Raster, brightness_factor: Positive = 1.0, contrast_factor: Positive = 1.0,
                 saturation_factor: NonNegative = 1.0) -> Raster:
    """brightness, then contrast, then saturation; each step re-quantized to 8 bits"""
    out = brightness(img, brightness_factor)
    out = contrast(out, contrast_factor)
    return saturation(out, saturation_factor)


@register("image", "color", ix.constant(100))
def grayscale(img: Raster) -> Raster:
    """Rec.601 luma replicated to the three color channels"""
    rgb, alpha = split_alpha(img)
    gray = np.rint(luma(rgb))[:, :, None]
    return join_alpha(np.repeat(gray, 3, axis=2), alpha)


@register("image", "color", ix.constant(100))
def convert_color(img: Raster, mode: Literal["RGB", "RGBA", "L"] = "RGB") -> Raster:
    """Convert between RGB, RGBA and gray ("L" yields channel-equal RGB)"""
    if mode == "L":
        return grayscale(Raster(np.ascontiguousarray(img.pixels[:, :, :3])))
    if mode == img.mode:
        return img.copy()
    if mode == "RGB":
        return Raster(np.ascontiguousarray(img.pixels[:, :, :3]))
    alpha = np.full((img.height, img.width, 1), 255, dtype=np.uint8)
    return Raster(np.concatenate([img.pixels, alpha], axis=2))


@register("image", "color", ix.complement("level"))
def opacity(img: Raster, level: Fraction = 1.0) -> Raster:
    """Multiply the alpha channel by level (RGB inputs gain an opaque alpha first)"""
    if level == 1.0:
        return img.copy()
    pixels = img.pixels if img.channels == 4 else convert_color(img, "RGBA").pixels
    out = pixels.copy()
    out[:, :, 3] = np.clip(np.rint(out[:, :, 3].astype(np.float64) * level), 0, 255).astype(np.uint8)
    return Raster(out)


# ==================== PIXEL-LEVEL ====================

@register("image", "pixel-level", ix.scaled("radius", 10.0))
def blur(img: Raster, radius: NonNegative = 2.0) -> Raster:
    """Gaussian blur; radius 0 is the identity"""
    if radius == 0:
        return img.copy()
    return Raster.from_pil(img.to_pil().filter(ImageFilter.GaussianBlur(radius)))


@register("image", "pixel-level", ix.factor_distance("factor"))
def sharpen(img: Raster, factor: NonNegative = 1.0) -> Raster:
    """Unsharp mask: blurred + factor * (v - blurred); factor 1 is the identity"""
    if factor == 1.0:
        return img.copy()
    rgb, alpha = split_alpha(img)
    smooth = pil_rgb_filter(img, ImageFilter.SMOOTH)
    blurred = smooth.pixels[:, :, :3].astype(np.float64)
    return join_alpha(blurred + factor * (rgb - blurred), alpha)


@register("image", "pixel-level", ix.complement("ratio"))
def pixelization(img: Raster, ratio: Annotated[float, Field(gt=0.0, le=1.0)] = 1.0) -> Raster:
    """Box-downscale by ratio, then nearest-neighbour back to the input dims"""
    if ratio == 1.0:
        return img.copy()
    small_w = max(1, round(img.width * ratio))
    small_h = max(1, round(img.height * ratio))
    small = img.to_pil().resize((small_w, small_h), Image.BOX)
    return Raster.from_pil(small.resize((img.width, img.height), Image.NEAREST))


@register("image", "pixel-level", ix.noise_strength)
def random_noise(img: Raster, mean: float = 0.0, var: NonNegative = 0.01, rng: Rng = None) -> Raster:
    """Add N(mean, sqrt(var)) on the [0, 1] scale, clamp, re-quantize"""
    if var == 0 and mean == 0:
        return img.copy()
    rng = rng or Rng(0)
    rgb, alpha = split_alpha(img)
    noisy = rgb / 255.0 + rng.normal(mean, math.sqrt(var), size=rgb.shape)
    return join_alpha(np.clip(noisy, 0.0, 1.0) * 255.0, alpha)


@register("image", "pixel-level", ix.probability("factor"))
def shuffle_pixels(img: Raster, factor: Fraction = 0.0, rng: Rng = None) -> Raster:
    """Permute a `factor` share of pixel positions among themselves"""
    count = int(round(factor * img.width * img.height))
    if count < 2:
        return img.copy()
    rng = rng or Rng(0)
    flat = img.pixels.reshape(-1, img.channels).copy()
    chosen = rng.permutation(flat.shape[0])[:count]
    flat[chosen] = flat[chosen[rng.permutation(count)]]
    return Raster(flat.reshape(img.pixels.shape))


@register("image", "pixel-level", ix.complement_quality)
def encoding_quality(img: Raster, quality: Annotated[int, Field(ge=1, le=100)] = 50) -> Raster:
    """Baseline JPEG (4:2:0) encode/decode round trip; alpha passes through"""
    buffer = io.BytesIO()
    rgb = Image.fromarray(np.ascontiguousarray(img.pixels[:, :, :3]))
    rgb.save(buffer, format="JPEG", quality=int(quality), subsampling=2, optimize=False)
    buffer.seek(0)
    with Image.open(buffer) as decoded:
        out = np.array(decoded.convert("RGB"), dtype=np.uint8)
    if img.channels == 4:
        out = np.concatenate([out, img.pixels[:, :, 3:4]], axis=2)
    return Raster(out)


@register("image", "pixel-level", ix.nonzero("kernel", ("identity",)))
def apply_filter_kernel(img: Raster, kernel: KernelName = "sharpen") -> Raster:
    """Convolve color channels with one of the named 3x3 kernels"""
    if kernel == "identity":
        return img.copy()
    weights, divisor = FILTER_KERNELS[kernel]
    offset = 128 if kernel == "emboss" else 0
    return pil_rgb_filter(img, ImageFilter.Kernel((3, 3), weights, scale=divisor, offset=offset))


# ==================== COMPOSITE / UTILITY ====================

def _default_mask(width: int, height: int) -> Image.Image:
    mask = Image.new("L", (width, height), 0)
    mask.paste(255, (0, 0, max(1, width // 2), height))
    return mask


@register("image", "overlay", ix.constant(50))
def masked_composite(img: Raster, other: Optional[Any] = None, mask: Optional[Any] = None) -> Raster:
    """
    Take `other` where the mask is set and the input elsewhere

    other defaults to the grayscale input; mask defaults to the left half.
    Both are resized to the input dims.
    """
    other_raster = as_raster(other) if other is not None else grayscale(img)
    if other_raster.mode != img.mode:
        other_raster = convert_color(other_raster, img.mode)
    other_pil = other_raster.to_pil().resize((img.width, img.height), Image.BILINEAR)
    if mask is None:
        mask_pil = _default_mask(img.width, img.height)
    else:
        mask_pil = as_raster(mask).to_pil().convert("L").resize((img.width, img.height), Image.NEAREST)
    return Raster.from_pil(Image.composite(other_pil, img.to_pil(), mask_pil))


@register("image", "pixel-level", ix.constant(0))
def apply_lambda(img: Raster, aug_function: Optional[Any] = None,
                 kwargs: Optional[Dict[str, Any]] = None) -> Raster:
    """Run a user callable (or "module:attr" path) on the raster"""
    if aug_function is None:
        return img.copy()
    result = resolve_callable(aug_function)(img, **(kwargs or {}))
    return result if isinstance(result, Raster) else as_raster(result)
