"""In-memory media values: the substrates every transform operates on"""

from collections import OrderedDict
from collections.abc import Sequence
from typing import Any, Callable, Dict, Iterator, List, Optional

import numpy as np
from PIL import Image

from utils import config
from utils.errors import TransformError

MODALITIES = ("image", "audio", "text", "video")


class Raster:
    """8-bit RGB or RGBA image stored as a (height, width, channels) uint8 array"""

    def __init__(self, pixels: np.ndarray):
        pixels = np.asarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] not in (3, 4):
            raise TransformError(f"Raster needs shape (h, w, 3|4), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise TransformError(f"Raster dims must be >= 1, got {pixels.shape[1]}x{pixels.shape[0]}")
        if pixels.dtype != np.uint8:
            raise TransformError(f"Raster samples must be uint8, got {pixels.dtype}")
        self.pixels = pixels

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def mode(self) -> str:
        return "RGBA" if self.channels == 4 else "RGB"

    @classmethod
    def from_pil(cls, image: Image.Image) -> "Raster":
        if image.mode not in ("RGB", "RGBA"):
            image = image.convert("RGBA" if "A" in image.getbands() else "RGB")
        return cls(np.array(image, dtype=np.uint8))

    @classmethod
    def solid(cls, width: int, height: int, color=(0, 0, 0)) -> "Raster":
        color = tuple(int(c) for c in color)
        pixels = np.empty((height, width, len(color)), dtype=np.uint8)
        pixels[:, :] = color
        return cls(pixels)

    def to_pil(self) -> Image.Image:
        return Image.fromarray(self.pixels)

    def copy(self) -> "Raster":
        return Raster(self.pixels.copy())

    def shape_descriptor(self) -> Dict[str, Any]:
        return {"width": self.width, "height": self.height, "channels": self.channels}

    def __eq__(self, other) -> bool:
        return isinstance(other, Raster) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Raster({self.width}x{self.height}x{self.channels})"


class AudioBuffer:
    """Float PCM, samples shaped (channels, frames), values in [-1, 1]"""

    def __init__(self, samples: np.ndarray, sample_rate: int):
        samples = np.asarray(samples)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise TransformError(f"AudioBuffer needs shape (channels, frames), got {samples.shape}")
        if int(sample_rate) <= 0:
            raise TransformError(f"sample_rate must be > 0, got {sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise TransformError("AudioBuffer samples must be finite")
        if samples.dtype not in (np.float32, np.float64):
            samples = samples.astype(np.float32)
        self.samples = samples
        self.sample_rate = int(sample_rate)

    @classmethod
    def from_processed(cls, samples: np.ndarray, sample_rate: int) -> "AudioBuffer":
        """Clip to [-1, 1] and store as float32; used for every computed output"""
        samples = np.nan_to_num(np.asarray(samples, dtype=np.float64))
        return cls(np.clip(samples, -1.0, 1.0).astype(np.float32), sample_rate)

    @classmethod
    def silence(cls, frames: int, channels: int, sample_rate: int) -> "AudioBuffer":
        return cls(np.zeros((channels, frames), dtype=np.float32), sample_rate)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.frames / self.sample_rate

    def fit_to_length(self, frames: int) -> "AudioBuffer":
        """Truncate or silence-pad to exactly `frames` samples per channel"""
        if frames == self.frames:
            return self
        if frames < self.frames:
            return AudioBuffer(self.samples[:, :frames].copy(), self.sample_rate)
        pad = np.zeros((self.channels, frames - self.frames), dtype=self.samples.dtype)
        return AudioBuffer(np.concatenate([self.samples, pad], axis=1), self.sample_rate)

    def shape_descriptor(self) -> Dict[str, Any]:
        return {"samples": self.frames, "channels": self.channels, "sample_rate": self.sample_rate}

    def __eq__(self, other) -> bool:
        return (isinstance(other, AudioBuffer) and self.sample_rate == other.sample_rate
                and self.samples.shape == other.samples.shape
                and np.array_equal(self.samples, other.samples))

    def __repr__(self) -> str:
        return f"AudioBuffer({self.channels}ch x {self.frames} @ {self.sample_rate}Hz)"


class TextDoc:
    """Unicode scalar sequence; words are maximal runs of non-whitespace"""

    def __init__(self, content: str):
        if not isinstance(content, str):
            raise TransformError(f"TextDoc content must be str, got {type(content).__name__}")
        if any(0xD800 <= ord(ch) <= 0xDFFF for ch in content):
            raise TransformError("TextDoc content contains surrogate code points")
        self.content = content

    def words(self) -> List[str]:
        return self.content.split()

    def shape_descriptor(self) -> Dict[str, Any]:
        return {"chars": len(self.content), "words": len(self.words())}

    def __eq__(self, other) -> bool:
        return isinstance(other, TextDoc) and self.content == other.content

    def __repr__(self) -> str:
        preview = self.content if len(self.content) <= 40 else self.content[:37] + "..."
        return f"TextDoc({preview!r})"


class LazyFrames(Sequence):
    """
    Frames produced on demand by load(index)

    At most `window` produced frames stay resident; an evicted frame is
    produced again if asked for. Every frame must match the dims and channel
    count of the first one produced.
    """

    def __init__(self, count: int, load: Callable[[int], Raster], window: Optional[int] = None):
        self._count = int(count)
        self._load = load
        self.window = max(1, int(window if window is not None else config.FRAME_WINDOW))
        self._resident: "OrderedDict[int, Raster]" = OrderedDict()
        self._shape = None

    def __len__(self) -> int:
        return self._count

    def __getitem__(self, index):
        if isinstance(index, slice):
            picked = range(self._count)[index]
            return LazyFrames(len(picked), lambda i: self[picked[i]], self.window)
        if index < 0:
            index += self._count
        if not 0 <= index < self._count:
            raise IndexError(f"frame {index} out of range for {self._count} frames")
        frame = self._resident.get(index)
        if frame is not None:
            self._resident.move_to_end(index)
            return frame
        frame = self._load(index)
        shape = (frame.width, frame.height, frame.channels)
        if self._shape is None:
            self._shape = shape
        elif shape != self._shape:
            raise TransformError(f"frame {index} is {frame!r}, expected {'x'.join(map(str, self._shape))}")
        self._resident[index] = frame
        if len(self._resident) > self.window:
            self._resident.popitem(last=False)
        return frame

    def __iter__(self) -> Iterator[Raster]:
        for index in range(self._count):
            yield self[index]

    @property
    def resident(self) -> int:
        return len(self._resident)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sequence) or len(other) != self._count:
            return False
        return all(a == b for a, b in zip(self, other))

    def __repr__(self) -> str:
        return f"LazyFrames({self._count} frames, window={self.window})"


class VideoClip:
    """
    Ordered uniform-size frames, frame rate and optional audio track

    frames is either a list held in memory or a LazyFrames sequence that
    produces frames on demand; only frame 0 is produced up front.
    """

    def __init__(self, frames: Sequence, fps: float, audio: Optional[AudioBuffer] = None):
        if not isinstance(frames, LazyFrames):
            frames = list(frames)
        if len(frames) == 0:
            raise TransformError("VideoClip needs at least one frame")
        first = frames[0]
        if isinstance(frames, list):
            for index, frame in enumerate(frames):
                if (frame.width, frame.height, frame.channels) != (first.width, first.height, first.channels):
                    raise TransformError(
                        f"frame {index} is {frame!r}, expected {first.width}x{first.height}x{first.channels}"
                    )
        if fps <= 0:
            raise TransformError(f"fps must be > 0, got {fps}")
        self.frames = frames
        self.fps = float(fps)
        self.audio = audio
        self._first = (first.width, first.height, first.channels)

    @property
    def width(self) -> int:
        return self._first[0]

    @property
    def height(self) -> int:
        return self._first[1]

    @property
    def channels(self) -> int:
        return self._first[2]

    @property
    def mode(self) -> str:
        return "RGBA" if self.channels == 4 else "RGB"

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        return self.frame_count / self.fps

    def audio_frames_for(self, frame_count: int) -> int:
        return int(round(frame_count / self.fps * self.audio.sample_rate)) if self.audio else 0

    def synced(self) -> "VideoClip":
        """Truncate or silence-pad the audio track to the frame timeline"""
        if self.audio is None:
            return self
        target = self.audio_frames_for(self.frame_count)
        if target == self.audio.frames:
            return self
        return VideoClip(self.frames, self.fps, self.audio.fit_to_length(target))

    def materialize(self) -> "VideoClip":
        """Produce every frame and hold them all in memory"""
        if isinstance(self.frames, list):
            return self
        return VideoClip(list(self.frames), self.fps, self.audio)

    def shape_descriptor(self) -> Dict[str, Any]:
        return {
            "frames": self.frame_count,
            "width": self.width,
            "height": self.height,
            "fps": self.fps,
            "audio": self.audio.shape_descriptor() if self.audio else None,
        }

    def __eq__(self, other) -> bool:
        return (isinstance(other, VideoClip) and self.fps == other.fps
                and self.frames == other.frames and self.audio == other.audio)

    def __repr__(self) -> str:
        return f"VideoClip({self.frame_count} frames {self.width}x{self.height} @ {self.fps}fps)"


def modality_of(datum: Any) -> str:
    if isinstance(datum, Raster):
        return "image"
    if isinstance(datum, AudioBuffer):
        return "audio"
    if isinstance(datum, TextDoc):
        return "text"
    if isinstance(datum, VideoClip):
        return "video"
    raise TransformError(f"not a media datum: {type(datum).__name__}")
