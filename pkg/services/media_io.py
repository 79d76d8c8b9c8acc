"""
Media file I/O and modality inference

Images go through Pillow (PNG/JPEG read, PNG/JPEG write), audio through
soundfile (WAV PCM-16 / float-32) or raw interleaved f32le, text as UTF-8,
video through the clip directory format in services/clip_store.py.
"""

import logging
import shutil
from pathlib import Path
from typing import Any, Optional, Tuple, Union

import numpy as np
import soundfile as sf
from PIL import Image, UnidentifiedImageError

from models.media_models import AudioBuffer, Raster, TextDoc, modality_of
from utils.errors import MediaIOError

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}
AUDIO_EXTENSIONS = {".wav", ".f32le"}
TEXT_EXTENSIONS = {".txt"}
VIDEO_EXTENSIONS = {".mp4", ".mov", ".mkv", ".avi", ".webm"}

PathLike = Union[str, Path]


def infer_modality(path: PathLike) -> str:
    """Modality from the file extension, or "video" for a clip directory"""
    path = Path(path)
    if path.is_dir():
        if (path / "manifest.json").exists():
            return "video"
        raise MediaIOError(f"{path} is a directory without a clip manifest.json")
    suffix = path.suffix.lower()
    if suffix in IMAGE_EXTENSIONS:
        return "image"
    if suffix in AUDIO_EXTENSIONS:
        return "audio"
    if suffix in TEXT_EXTENSIONS:
        return "text"
    if suffix in VIDEO_EXTENSIONS:
        return "video"
    raise MediaIOError(f"cannot infer modality of {path} (unknown extension {suffix!r})")


# ==================== IMAGE ====================

def load_image(path: PathLike) -> Raster:
    try:
        with Image.open(path) as image:
            image.load()
            return Raster.from_pil(image)
    except (OSError, UnidentifiedImageError) as e:
        raise MediaIOError(f"cannot read image {path}: {e}") from None


def image_mode_of(path: PathLike) -> Optional[str]:
    """Pillow mode of the stored file (L, P, RGB, ...) without decoding pixels"""
    try:
        with Image.open(path) as image:
            return image.mode
    except (OSError, UnidentifiedImageError):
        return None


def save_image(img: Raster, path: PathLike, source_mode: Optional[str] = None) -> Path:
    """
    PNG, or JPEG at quality 95 for .jpg/.jpeg

    A grayscale source (L or LA) is written back as grayscale while every
    pixel still has equal color channels.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    image = img.to_pil()
    if source_mode in ("L", "LA") and is_gray(img):
        image = image.convert("LA" if img.channels == 4 and path.suffix.lower() == ".png" else "L")
    try:
        if path.suffix.lower() in (".jpg", ".jpeg"):
            if image.mode not in ("L", "RGB"):
                image = image.convert("RGB")
            image.save(path, format="JPEG", quality=95)
        else:
            image.save(path, format="PNG")
    except OSError as e:
        raise MediaIOError(f"cannot write image {path}: {e}") from None
    return path


def is_gray(img: Raster) -> bool:
    rgb = img.pixels[:, :, :3]
    return bool(np.all(rgb[:, :, 0] == rgb[:, :, 1]) and np.all(rgb[:, :, 1] == rgb[:, :, 2]))


def as_raster(value: Any) -> Raster:
    """Accept a Raster, an (h, w, c) uint8 array or an image path"""
    if isinstance(value, Raster):
        return value
    if isinstance(value, np.ndarray):
        return Raster(value)
    if isinstance(value, Image.Image):
        return Raster.from_pil(value)
    if isinstance(value, (str, Path)):
        return load_image(value)
    raise MediaIOError(f"expected an image, got {type(value).__name__}")


# ==================== AUDIO ====================

def load_audio(path: PathLike, sample_rate: Optional[int] = None, channels: int = 1) -> Tuple[AudioBuffer, Optional[str]]:
    """
    Read WAV (any soundfile subtype) or raw f32le

    Returns:
        (AudioBuffer, soundfile subtype or None for raw input)
    """
    path = Path(path)
    if path.suffix.lower() == ".f32le":
        if not sample_rate:
            raise MediaIOError(f"raw audio {path} needs a sample rate")
        try:
            raw = np.fromfile(path, dtype="<f4")
        except OSError as e:
            raise MediaIOError(f"cannot read audio {path}: {e}") from None
        if raw.size % channels:
            raise MediaIOError(f"raw audio {path}: {raw.size} samples is not a multiple of {channels} channels")
        return AudioBuffer(raw.reshape(-1, channels).T.copy(), sample_rate), None
    try:
        info = sf.info(str(path))
        data, rate = sf.read(str(path), dtype="float32", always_2d=True)
    except (RuntimeError, sf.LibsndfileError) as e:
        raise MediaIOError(f"cannot read audio {path}: {e}") from None
    return AudioBuffer(np.ascontiguousarray(data.T), rate), info.subtype


def save_audio(audio: AudioBuffer, path: PathLike, subtype: Optional[str] = None) -> Path:
    """WAV keeps the given subtype (default FLOAT); .f32le writes interleaved float-32"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    interleaved = np.ascontiguousarray(audio.samples.T.astype(np.float32))
    try:
        if path.suffix.lower() == ".f32le":
            interleaved.astype("<f4").tofile(path)
        else:
            sf.write(str(path), interleaved, audio.sample_rate, subtype=subtype or "FLOAT")
    except (OSError, RuntimeError, sf.LibsndfileError) as e:
        raise MediaIOError(f"cannot write audio {path}: {e}") from None
    return path


def as_audio(value: Any, sample_rate: Optional[int] = None) -> AudioBuffer:
    """Accept an AudioBuffer, a (channels, frames) array (needs sample_rate) or a path"""
    if isinstance(value, AudioBuffer):
        return value
    if isinstance(value, np.ndarray):
        if not sample_rate:
            raise MediaIOError("array audio needs a sample rate")
        return AudioBuffer(value, sample_rate)
    if isinstance(value, (str, Path)):
        return load_audio(value, sample_rate=sample_rate)[0]
    raise MediaIOError(f"expected audio, got {type(value).__name__}")


# ==================== TEXT ====================

def load_text(path: PathLike) -> TextDoc:
    """UTF-8 with line endings kept as written (no newline translation)"""
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            return TextDoc(handle.read())
    except (OSError, UnicodeDecodeError) as e:
        raise MediaIOError(f"cannot read text {path}: {e}") from None


def save_text(doc: TextDoc, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(doc.content)
    except OSError as e:
        raise MediaIOError(f"cannot write text {path}: {e}") from None
    return path


# ==================== DISPATCH ====================

class LoadedMedia:
    """A datum plus what is needed to write it back in the same format"""

    def __init__(self, datum: Any, modality: str, audio_subtype: Optional[str] = None,
                 path: Optional[Path] = None, image_mode: Optional[str] = None):
        self.datum = datum
        self.modality = modality
        self.audio_subtype = audio_subtype
        self.path = path
        self.image_mode = image_mode

    def unchanged(self, datum: Any, target: PathLike) -> bool:
        """True when datum is still the loaded value and target keeps the source format"""
        if self.path is None or self.modality == "video" or Path(target).suffix.lower() != self.path.suffix.lower():
            return False
        return datum is self.datum or datum == self.datum


def load_media(path: PathLike, sample_rate: Optional[int] = None, channels: int = 1) -> LoadedMedia:
    from services import clip_store

    path = Path(path)
    modality = infer_modality(path)
    if modality == "image":
        return LoadedMedia(load_image(path), modality, path=path, image_mode=image_mode_of(path))
    if modality == "audio":
        audio, subtype = load_audio(path, sample_rate=sample_rate, channels=channels)
        return LoadedMedia(audio, modality, subtype, path=path)
    if modality == "text":
        return LoadedMedia(load_text(path), modality, path=path)
    return LoadedMedia(clip_store.load_video(path), modality, path=path)


def save_media(datum: Any, path: PathLike, audio_subtype: Optional[str] = None,
               source: Optional[LoadedMedia] = None) -> Path:
    """
    Write datum in the format implied by path

    With the LoadedMedia it came from, an unchanged image, audio or text datum
    is written as a byte copy of the source file; a changed image keeps a
    grayscale source mode when its pixels are still gray.
    """
    from services import clip_store

    path = Path(path)
    if source is not None:
        audio_subtype = audio_subtype or source.audio_subtype
        if source.unchanged(datum, path):
            return copy_source(source.path, path)
    modality = modality_of(datum)
    if modality == "image":
        return save_image(datum, path, source.image_mode if source is not None else None)
    if modality == "audio":
        return save_audio(datum, path, audio_subtype)
    if modality == "text":
        return save_text(datum, path)
    return clip_store.save_video(datum, path)


def copy_source(source: Path, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if source.resolve() == path.resolve():
        return path
    try:
        shutil.copyfile(source, path)
    except OSError as e:
        raise MediaIOError(f"cannot write {path}: {e}") from None
    logger.debug(f"Unchanged input {source} copied to {path}")
    return path
