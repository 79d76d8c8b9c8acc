"""
Clip directory store and transcoder bridge

A clip directory holds:
    manifest.json      fps, frame_count, width, height, channels, audio {sample_rate, channels, frames} | null
    frames/000000.png  one PNG per frame, zero-padded six-digit index
    audio.f32le        interleaved float-32 PCM (only when audio is present)

Encoded containers (.mp4 etc.) are only reachable through an external
transcoder configured with AUGMENT_TRANSCODER.
"""

import json
import logging
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterator, Union

import numpy as np

from models.media_models import AudioBuffer, LazyFrames, Raster, VideoClip
from services.media_io import VIDEO_EXTENSIONS, load_image, save_image
from utils import config
from utils.errors import MediaIOError, TransformError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FRAMES_DIR = "frames"
AUDIO_NAME = "audio.f32le"

PathLike = Union[str, Path]


def frame_path(clip_dir: Path, index: int) -> Path:
    return clip_dir / FRAMES_DIR / f"{index:06d}.png"


def is_encoded(path: PathLike) -> bool:
    return Path(path).suffix.lower() in VIDEO_EXTENSIONS


# ==================== MANIFEST ====================

def read_manifest(clip_dir: PathLike) -> Dict[str, Any]:
    clip_dir = Path(clip_dir)
    try:
        manifest = json.loads((clip_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
    except OSError as e:
        raise MediaIOError(f"cannot read clip manifest in {clip_dir}: {e}") from None
    except json.JSONDecodeError as e:
        raise MediaIOError(f"clip manifest in {clip_dir} is not valid JSON: {e}") from None
    for key in ("fps", "frame_count"):
        if key not in manifest:
            raise MediaIOError(f"clip manifest in {clip_dir} is missing {key!r}")
    if manifest["frame_count"] < 1 or manifest["fps"] <= 0:
        raise MediaIOError(f"clip manifest in {clip_dir} needs frame_count >= 1 and fps > 0")
    return manifest


def build_manifest(clip: VideoClip) -> Dict[str, Any]:
    audio = None
    if clip.audio is not None:
        audio = {"sample_rate": clip.audio.sample_rate, "channels": clip.audio.channels,
                 "frames": clip.audio.frames}
    return {
        "fps": clip.fps,
        "frame_count": clip.frame_count,
        "width": clip.width,
        "height": clip.height,
        "channels": clip.channels,
        "audio": audio,
    }


# ==================== CLIP DIRECTORIES ====================

def read_frame(clip_dir: Path, index: int, manifest: Dict[str, Any]) -> Raster:
    path = frame_path(clip_dir, index)
    if not path.exists():
        raise MediaIOError(f"clip {clip_dir} is missing frame {path.name}")
    frame = load_image(path)
    expected = (manifest.get("width", frame.width), manifest.get("height", frame.height))
    if (frame.width, frame.height) != expected:
        raise MediaIOError(f"clip {clip_dir} frame {path.name} is {frame.width}x{frame.height}, "
                           f"manifest says {expected[0]}x{expected[1]}")
    return frame


def iter_frames(clip_dir: PathLike) -> Iterator[Raster]:
    """Yield frames one at a time without loading the whole clip"""
    clip_dir = Path(clip_dir)
    manifest = read_manifest(clip_dir)
    for index in range(manifest["frame_count"]):
        yield read_frame(clip_dir, index, manifest)


def read_clip_audio(clip_dir: Path, manifest: Dict[str, Any]):
    info = manifest.get("audio")
    if not info:
        return None
    path = clip_dir / AUDIO_NAME
    try:
        raw = np.fromfile(path, dtype="<f4")
    except OSError as e:
        raise MediaIOError(f"cannot read clip audio {path}: {e}") from None
    channels = int(info.get("channels", 1))
    if raw.size % channels:
        raise MediaIOError(f"clip audio {path} does not hold whole {channels}-channel frames")
    return AudioBuffer(raw.reshape(-1, channels).T.copy(), int(info["sample_rate"]))


def load_clip_dir(clip_dir: PathLike) -> VideoClip:
    """
    Open a clip directory; frames are read from disk on demand

    Only frame 0 and the audio track are read here. Frame files are checked
    for existence up front so a truncated clip fails before any op runs.
    """
    clip_dir = Path(clip_dir)
    manifest = read_manifest(clip_dir)
    count = manifest["frame_count"]
    for index in range(count):
        if not frame_path(clip_dir, index).exists():
            raise MediaIOError(f"clip {clip_dir} is missing frame {frame_path(clip_dir, index).name}")
    frames = LazyFrames(count, lambda index: read_frame(clip_dir, index, manifest))
    try:
        clip = VideoClip(frames, manifest["fps"], read_clip_audio(clip_dir, manifest))
    except TransformError as e:
        raise MediaIOError(f"clip {clip_dir} is inconsistent: {e}") from None
    logger.info(f"Opened clip {clip_dir} ({clip.frame_count} frames {clip.width}x{clip.height} @ {clip.fps}fps)")
    return clip


def save_clip_dir(clip: VideoClip, clip_dir: PathLike) -> Path:
    clip_dir = Path(clip_dir)
    try:
        (clip_dir / FRAMES_DIR).mkdir(parents=True, exist_ok=True)
        for stale in (clip_dir / FRAMES_DIR).glob("*.png"):
            stale.unlink()
        for index, frame in enumerate(clip.frames):
            save_image(frame, frame_path(clip_dir, index))
        audio_path = clip_dir / AUDIO_NAME
        if clip.audio is not None:
            np.ascontiguousarray(clip.audio.samples.T, dtype="<f4").tofile(audio_path)
        elif audio_path.exists():
            audio_path.unlink()
        (clip_dir / MANIFEST_NAME).write_text(json.dumps(build_manifest(clip), indent=2), encoding="utf-8")
    except OSError as e:
        raise MediaIOError(f"cannot write clip {clip_dir}: {e}") from None
    return clip_dir


# ==================== TRANSCODER ====================

class TranscoderBridge:
    """
    Runs `<cmd> decode <media> <clip_dir>` and `<cmd> encode <clip_dir> <media>`

    Any non-zero exit or missing output raises MediaIOError.
    """

    def __init__(self, command: str = None):
        self.command = shlex.split(command if command is not None else config.TRANSCODER_CMD)

    def _run(self, *args: str) -> None:
        if not self.command:
            raise MediaIOError("encoded video needs a transcoder; set AUGMENT_TRANSCODER or use a clip directory")
        argv = self.command + list(args)
        logger.info(f"Running transcoder: {' '.join(argv)}")
        try:
            completed = subprocess.run(argv, capture_output=True, text=True)
        except OSError as e:
            logger.error(f"Transcoder failed to start: {e}")
            raise MediaIOError(f"cannot start transcoder {self.command[0]}: {e}") from None
        if completed.returncode != 0:
            logger.error(f"Transcoder exited with {completed.returncode}: {completed.stderr.strip()}")
            raise MediaIOError(f"transcoder {args[0]} failed with exit code {completed.returncode}")

    def decode(self, media_path: PathLike, clip_dir: PathLike) -> Path:
        self._run("decode", str(media_path), str(clip_dir))
        if not (Path(clip_dir) / MANIFEST_NAME).exists():
            raise MediaIOError(f"transcoder produced no clip manifest for {media_path}")
        return Path(clip_dir)

    def encode(self, clip_dir: PathLike, media_path: PathLike) -> Path:
        self._run("encode", str(clip_dir), str(media_path))
        if not Path(media_path).exists():
            raise MediaIOError(f"transcoder produced no output at {media_path}")
        return Path(media_path)


def load_video(path: PathLike, bridge: TranscoderBridge = None) -> VideoClip:
    """
    Read a clip directory, or decode an encoded container through the transcoder

    Decoded frames stay in a temporary clip directory that is removed once
    the returned frames are garbage collected.
    """
    path = Path(path)
    if not is_encoded(path):
        return load_clip_dir(path)
    bridge = bridge or TranscoderBridge()
    tmp = tempfile.TemporaryDirectory(prefix="clip-decode-")
    try:
        clip = load_clip_dir(bridge.decode(path, tmp.name))
    except Exception:
        tmp.cleanup()
        raise
    clip.frames.owner = tmp
    return clip


def save_video(clip: VideoClip, path: PathLike, bridge: TranscoderBridge = None) -> Path:
    """Write a clip directory, or encode through the transcoder when path has a container extension"""
    path = Path(path)
    if not is_encoded(path):
        return save_clip_dir(clip, path)
    bridge = bridge or TranscoderBridge()
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="clip-encode-") as tmp:
        save_clip_dir(clip, tmp)
        return bridge.encode(tmp, path)
