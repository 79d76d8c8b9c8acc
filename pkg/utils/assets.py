"""
Asset store: emoji sprites, screenshot templates and the bitmap font

Assets are described in <asset dir>/manifest.json either as drawing
instructions (rendered once with Pillow) or as a "path" to an RGBA PNG.
The store is immutable after load and safe to share between threads.
"""

import json
import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from models.media_models import Raster
from utils import config
from utils.errors import AssetError

logger = logging.getLogger(__name__)


class ScreenshotTemplate:
    """RGBA template plus the (x0, y0, x1, y1) content rect, end-exclusive"""

    def __init__(self, template_id: str, raster: Raster, content_rect: Tuple[int, int, int, int]):
        self.template_id = template_id
        self.raster = raster
        self.content_rect = content_rect

    @property
    def content_size(self) -> Tuple[int, int]:
        x0, y0, x1, y1 = self.content_rect
        return x1 - x0, y1 - y0


def _draw_shapes(size: Tuple[int, int], background, shapes: List[Dict[str, Any]], asset_id: str) -> Image.Image:
    image = Image.new("RGBA", size, tuple(background))
    draw = ImageDraw.Draw(image)
    for shape in shapes:
        kind = shape.get("type")
        fill = tuple(shape["fill"]) if "fill" in shape else None
        outline = tuple(shape["outline"]) if "outline" in shape else None
        width = int(shape.get("width", 1))
        if kind == "rectangle":
            draw.rectangle(shape["box"], fill=fill, outline=outline, width=width)
        elif kind == "ellipse":
            draw.ellipse(shape["box"], fill=fill, outline=outline, width=width)
        elif kind == "polygon":
            draw.polygon(shape["points"], fill=fill, outline=outline)
        elif kind == "line":
            draw.line(shape["points"], fill=fill, width=width)
        elif kind == "arc":
            draw.arc(shape["box"], shape["start"], shape["end"], fill=fill, width=width)
        else:
            raise AssetError(f"asset {asset_id}: unknown shape type {kind!r}")
    return image


def _render(entry: Dict[str, Any], base_dir: Path, kind: str) -> Raster:
    asset_id = entry.get("id")
    if not asset_id:
        raise AssetError(f"{kind} entry without id")
    if "path" in entry:
        path = base_dir / entry["path"]
        try:
            with Image.open(path) as image:
                return Raster.from_pil(image.convert("RGBA"))
        except OSError as e:
            raise AssetError(f"{kind} {asset_id}: cannot read {path}: {e}") from None
    size = entry.get("size")
    if not size or len(size) != 2 or min(size) < 1:
        raise AssetError(f"{kind} {asset_id}: size must be [width, height] >= 1")
    background = entry.get("background", [0, 0, 0, 0])
    return Raster.from_pil(_draw_shapes((int(size[0]), int(size[1])), background, entry.get("shapes", []), asset_id))


class AssetStore:
    """Immutable collection of emoji sprites, templates and the glyph font"""

    def __init__(self, emoji: Dict[str, Raster], templates: Dict[str, ScreenshotTemplate]):
        self._emoji = emoji
        self._templates = templates
        self._font = ImageFont.load_default_imagefont()

    @classmethod
    def from_manifest(cls, manifest: Dict[str, Any], base_dir: Path) -> "AssetStore":
        emoji = {}
        for entry in manifest.get("emoji", []):
            emoji[entry.get("id")] = _render(entry, base_dir, "emoji")
        templates = {}
        for entry in manifest.get("templates", []):
            raster = _render(entry, base_dir, "template")
            rect = entry.get("content_rect")
            if not rect or len(rect) != 4:
                raise AssetError(f"template {entry['id']}: content_rect must be [x0, y0, x1, y1]")
            x0, y0, x1, y1 = (int(v) for v in rect)
            if x1 <= x0 or y1 <= y0:
                raise AssetError(f"template {entry['id']}: content_rect {rect} has zero area")
            if x0 < 0 or y0 < 0 or x1 > raster.width or y1 > raster.height:
                raise AssetError(f"template {entry['id']}: content_rect {rect} exceeds {raster.width}x{raster.height}")
            templates[entry["id"]] = ScreenshotTemplate(entry["id"], raster, (x0, y0, x1, y1))
        return cls(emoji, templates)

    @classmethod
    def load(cls, asset_dir: Path) -> "AssetStore":
        manifest_path = Path(asset_dir) / "manifest.json"
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except OSError as e:
            raise AssetError(f"cannot read asset manifest {manifest_path}: {e}") from None
        except json.JSONDecodeError as e:
            raise AssetError(f"asset manifest {manifest_path} is not valid JSON: {e}") from None
        store = cls.from_manifest(manifest, manifest_path.parent)
        logger.info(f"Loaded assets from {manifest_path}: {len(store._emoji)} emoji, {len(store._templates)} templates")
        return store

    # ==================== LOOKUPS ====================

    def emoji(self, emoji_id: str) -> Raster:
        if emoji_id not in self._emoji:
            raise AssetError(f"unknown emoji {emoji_id!r}; available: {sorted(self._emoji)}")
        return self._emoji[emoji_id]

    def template(self, template_id: str) -> ScreenshotTemplate:
        if template_id not in self._templates:
            raise AssetError(f"unknown template {template_id!r}; available: {sorted(self._templates)}")
        return self._templates[template_id]

    @property
    def emoji_ids(self) -> List[str]:
        return sorted(self._emoji)

    @property
    def template_ids(self) -> List[str]:
        return sorted(self._templates)

    @property
    def font(self) -> ImageFont.ImageFont:
        return self._font

    def glyph_height(self) -> int:
        """Height of one rendered text row at scale 1"""
        left, top, right, bottom = self._font.getbbox("Ag|")
        return max(1, bottom)

    def render_text(self, text: str, scale: int = 1) -> np.ndarray:
        """Binary coverage mask (h, w) of `text` drawn without anti-aliasing"""
        left, top, right, bottom = self._font.getbbox(text)
        width, height = max(1, right), max(1, max(bottom, self.glyph_height()))
        canvas = Image.new("L", (width, height), 0)
        draw = ImageDraw.Draw(canvas)
        draw.fontmode = "1"
        draw.text((0, 0), text, fill=255, font=self._font)
        if scale > 1:
            canvas = canvas.resize((width * scale, height * scale), Image.NEAREST)
        return np.array(canvas) > 127


@lru_cache(maxsize=4)
def _cached_store(asset_dir: str) -> AssetStore:
    return AssetStore.load(Path(asset_dir))


def get_asset_store(asset_dir: Optional[Path] = None) -> AssetStore:
    return _cached_store(str(asset_dir or config.ASSET_DIR))
