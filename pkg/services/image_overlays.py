"""
Overlay image augmentations: captions, text, emoji, stripes, other images and screenshot templates

Overlays onto the input only touch the overlay's bounding box; overlay_onto_*
and meme_format build a new canvas.
"""

import logging
import math
from typing import Annotated, Any, Dict, Optional

import numpy as np
from pydantic import Field

from models.media_models import Raster
from services import intensity_service as ix
from services.catalog import Color, Fraction, register
from services.image_augmentations import convert_color, fill_for, resize_raster
from services.media_io import as_raster
from utils.assets import get_asset_store
from utils.errors import TransformError

logger = logging.getLogger(__name__)

NonEmptyText = Annotated[str, Field(min_length=1)]
FontScale = Annotated[int, Field(ge=1, le=32)]


# ==================== COMPOSITING ====================

def blend_rgba(base: Raster, overlay: np.ndarray, x: int, y: int, opacity: float = 1.0) -> Raster:
    """
    Alpha-blend an (h, w, 4) uint8 overlay onto base with its top-left at (x, y)

    The overlay is clipped to the base bounds; pixels outside its box are untouched.
    """
    out = base.pixels.copy()
    oh, ow = overlay.shape[:2]
    x0, y0 = max(0, x), max(0, y)
    x1, y1 = min(base.width, x + ow), min(base.height, y + oh)
    if x1 <= x0 or y1 <= y0 or opacity <= 0:
        return Raster(out)
    patch = overlay[y0 - y:y1 - y, x0 - x:x1 - x].astype(np.float64)
    alpha = patch[:, :, 3:4] / 255.0 * opacity
    region = out[y0:y1, x0:x1].astype(np.float64)
    region[:, :, :3] = patch[:, :, :3] * alpha + region[:, :, :3] * (1.0 - alpha)
    if base.channels == 4:
        region[:, :, 3:4] = 255.0 * alpha + region[:, :, 3:4] * (1.0 - alpha)
    out[y0:y1, x0:x1] = np.clip(np.rint(region), 0, 255).astype(np.uint8)
    return Raster(out)


def to_rgba(img: Raster) -> np.ndarray:
    return img.pixels if img.channels == 4 else convert_color(img, "RGBA").pixels


def text_layer(text: str, scale: int, color) -> np.ndarray:
    """RGBA layer of rendered text: color where a glyph covers, transparent elsewhere"""
    mask = get_asset_store().render_text(text, scale)
    layer = np.zeros(mask.shape + (4,), dtype=np.uint8)
    layer[mask] = tuple(int(c) for c in color) + (255,)
    return layer


def text_coverage(params: Dict[str, Any]) -> float:
    """Rendered text area (6x11 px glyph cell) relative to a 256x256 canvas"""
    area = len(params["text"]) * 66 * params["font_scale"] ** 2
    return min(1.0, area / 65536.0) * params["opacity"] * 100.0


def screenshot_cover(params: Dict[str, Any]) -> float:
    template = get_asset_store().template(params["template_id"])
    cw, ch = template.content_size
    return (1.0 - cw * ch / float(template.raster.width * template.raster.height)) * 100.0


def caption_share(params: Dict[str, Any]) -> float:
    """Caption height against a 256 px reference image"""
    return min(1.0, params["caption_height"] / 256.0) * 100.0


# ==================== OVERLAYS ====================

@register("image", "overlay", caption_share)
def meme_format(img: Raster, text: NonEmptyText = "LOL",
                caption_height: Annotated[int, Field(ge=1)] = 75,
                meme_bg_color: Color = (0, 0, 0), text_color: Color = (255, 255, 255)) -> Raster:
    """
    Add a caption band of caption_height rows above the image

    Text is drawn with the bitmap font at the largest integer scale that fits
    the band; the image is copied unchanged below the band.
    """
    store = get_asset_store()
    glyph_h = store.glyph_height()
    if caption_height < glyph_h:
        raise TransformError(f"meme_format: caption_height {caption_height} cannot fit a {glyph_h}px glyph row")
    mask = store.render_text(text, 1)
    text_h, text_w = mask.shape
    fit_rows = caption_height * 4 // (5 * text_h)
    fit_cols = int(img.width * 0.9) // max(1, text_w)
    scale = max(1, min(fit_rows, fit_cols))
    if scale > 1:
        mask = store.render_text(text, scale)
    mask = mask[:caption_height, :img.width]
    band = np.empty((caption_height, img.width, img.channels), dtype=np.uint8)
    band[:, :] = fill_for(img, meme_bg_color)
    top = (caption_height - mask.shape[0]) // 2
    left = (img.width - mask.shape[1]) // 2
    band_region = band[top:top + mask.shape[0], left:left + mask.shape[1]]
    band_region[mask] = fill_for(img, text_color)
    return Raster(np.concatenate([band, img.pixels], axis=0))


@register("image", "overlay", text_coverage)
def overlay_text(img: Raster, text: NonEmptyText = "augment", font_scale: FontScale = 2,
                 color: Color = (255, 255, 255), x_pos: Fraction = 0.1, y_pos: Fraction = 0.5,
                 opacity: Fraction = 1.0) -> Raster:
    """Draw text with its top-left corner at (x_pos*w, y_pos*h)"""
    layer = text_layer(text, font_scale, color)
    return blend_rgba(img, layer, int(x_pos * img.width), int(y_pos * img.height), opacity)


@register("image", "overlay", ix.area_fraction("emoji_size", "opacity"))
def overlay_emoji(img: Raster, emoji_id: str = "smile", emoji_size: Fraction = 0.15,
                  x_pos: Fraction = 0.4, y_pos: Fraction = 0.4, opacity: Fraction = 1.0) -> Raster:
    """Paste a bundled emoji sprite scaled to emoji_size * image height"""
    sprite = get_asset_store().emoji(emoji_id)
    side = round(emoji_size * img.height)
    if side < 1 or opacity == 0:
        return img.copy()
    width = max(1, round(sprite.width * side / sprite.height))
    scaled = resize_raster(sprite, width, side)
    return blend_rgba(img, to_rgba(scaled), int(x_pos * img.width), int(y_pos * img.height), opacity)


@register("image", "overlay", ix.area_fraction("overlay_size", "opacity"))
def overlay_image(img: Raster, overlay: Optional[Any] = None, overlay_size: Fraction = 0.3,
                  x_pos: Fraction = 0.35, y_pos: Fraction = 0.35, opacity: Fraction = 1.0) -> Raster:
    """Paste another image (default: the "star" sprite) scaled to overlay_size * image width"""
    source = as_raster(overlay) if overlay is not None else get_asset_store().emoji("star")
    width = round(overlay_size * img.width)
    if width < 1 or opacity == 0:
        return img.copy()
    height = max(1, round(source.height * width / source.width))
    scaled = resize_raster(source, width, height)
    return blend_rgba(img, to_rgba(scaled), int(x_pos * img.width), int(y_pos * img.height), opacity)


@register("image", "overlay", ix.complement_area("overlay_size"))
def overlay_onto_background_image(img: Raster, background: Optional[Any] = None,
                                  overlay_size: Annotated[float, Field(gt=0.0, le=1.0)] = 0.7,
                                  x_pos: Fraction = 0.15, y_pos: Fraction = 0.15) -> Raster:
    """
    Scale the image to overlay_size * background width and paste it onto the background

    The default background is a mid-gray canvas of the input's size.
    """
    if background is None:
        canvas = Raster.solid(img.width, img.height, fill_for(img, (128, 128, 128)))
    else:
        canvas = as_raster(background)
        if canvas.mode != img.mode:
            canvas = convert_color(canvas, img.mode)
    width = max(1, round(overlay_size * canvas.width))
    height = max(1, round(img.height * width / img.width))
    scaled = resize_raster(img, width, height)
    return blend_rgba(canvas, to_rgba(scaled), int(x_pos * canvas.width), int(y_pos * canvas.height))


@register("image", "overlay", screenshot_cover)
def overlay_onto_screenshot(img: Raster, template_id: str = "feed_portrait") -> Raster:
    """
    Letterbox the image into a template's content rect

    Output dims are the template's; template pixels outside the content rect
    are copied unchanged, the letterbox margin inside it is black.
    """
    template = get_asset_store().template(template_id)
    x0, y0, x1, y1 = template.content_rect
    cw, ch = template.content_size
    factor = min(cw / img.width, ch / img.height)
    width = min(cw, max(1, round(img.width * factor)))
    height = min(ch, max(1, round(img.height * factor)))
    scaled = resize_raster(img, width, height)
    canvas = template.raster.pixels.copy()
    canvas[y0:y1, x0:x1] = (0, 0, 0, 255)
    left = x0 + (cw - width) // 2
    top = y0 + (ch - height) // 2
    canvas[top:top + height, left:left + width] = to_rgba(scaled)
    out = Raster(canvas)
    return out if img.channels == 4 else convert_color(out, "RGB")


@register("image", "overlay", ix.product("line_width", "line_opacity"))
def overlay_stripes(img: Raster, line_width: Fraction = 0.5, line_color: Color = (255, 255, 255),
                    line_angle: float = 0.0, line_density: Fraction = 0.5,
                    line_opacity: Fraction = 1.0) -> Raster:
    """
    Parallel stripes at line_angle degrees (0 = horizontal)

    line_density sets the stripe count across the shorter side (1..20),
    line_width the covered share of each period.
    """
    if line_width == 0 or line_opacity == 0:
        return img.copy()
    count = max(1, round(line_density * 20))
    period = max(2.0, min(img.width, img.height) / count)
    theta = math.radians(line_angle)
    ys, xs = np.mgrid[0:img.height, 0:img.width]
    offset = -xs * math.sin(theta) + ys * math.cos(theta)
    on_stripe = np.mod(offset, period) < line_width * period
    layer = np.zeros((img.height, img.width, 4), dtype=np.uint8)
    layer[on_stripe] = tuple(int(c) for c in line_color) + (255,)
    return blend_rgba(img, layer, 0, 0, line_opacity)
