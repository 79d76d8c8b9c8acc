"""
Video augmentations over VideoClip

Three kinds of ops live here:
- per-frame delegates that run an image transform on every frame with one
  set of resolved params (temporally coherent),
- temporal and composite ops that rebuild the frame timeline,
- audio ops that touch only the soundtrack.

Every op returns clip.synced(): the audio track is truncated or silence-padded
to frame_count / fps before the clip leaves this module.
"""

import bisect
import itertools
import logging
import math
from typing import Annotated, Any, Callable, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from PIL import Image, ImageDraw
from pydantic import Field

from models.media_models import AudioBuffer, LazyFrames, Raster, VideoClip
from models.transform_models import TransformSpec
from services import audio_augmentations, image_augmentations, image_overlays
from services import intensity_service as ix
from services.audio_dsp import fit_length
from services.augmentation_core import (NestedResult, as_rng, compose, load_pipeline, resolve_callable,
                                        validate_pipeline, validate_spec)
from services.catalog import Color, Fraction, NonNegative, Positive, TransformDef, catalog, register
from services.media_io import as_audio
from utils.errors import ParamValidationError, TransformError
from utils.rng import Rng

logger = logging.getLogger(__name__)

# video op name -> image op it runs on every frame
FRAME_DELEGATES = {
    "add_noise": "random_noise",
    "blur": "blur",
    "brightness": "brightness",
    "change_aspect_ratio": "change_aspect_ratio",
    "color_jitter": "color_jitter",
    "contrast": "contrast",
    "crop": "crop",
    "encoding_quality": "encoding_quality",
    "grayscale": "grayscale",
    "hflip": "hflip",
    "meme_format": "meme_format",
    "overlay_emoji": "overlay_emoji",
    "overlay_onto_screenshot": "overlay_onto_screenshot",
    "overlay_text": "overlay_text",
    "pad": "pad",
    "pixelization": "pixelization",
    "resize": "resize",
    "rotate": "rotate",
    "scale": "scale",
    "vflip": "vflip",
}

# image ops whose randomness is redrawn for every frame instead of shared
PER_FRAME_STREAMS = {"random_noise"}

# fps intensity is measured against this frame rate
REFERENCE_FPS = 30.0
BACKGROUND_GRAY = (128, 128, 128)

ShapeType = Literal["random", "rectangle", "ellipse", "triangle"]
SHAPE_TYPES = ("rectangle", "ellipse", "triangle")


# ==================== HELPERS ====================

def as_clip(value: Any) -> VideoClip:
    """Accept a VideoClip or a clip directory / encoded video path"""
    if isinstance(value, VideoClip):
        return value
    from services.clip_store import load_video

    return load_video(value)


def rebuild(clip: VideoClip, frames: Sequence[Raster], audio: Optional[AudioBuffer] = None,
            keep_audio: bool = True, fps: Optional[float] = None) -> VideoClip:
    track = clip.audio if keep_audio and audio is None else audio
    return VideoClip(frames, fps or clip.fps, track).synced()


# ==================== FRAME SEQUENCES ====================

def lazy_map(source: Sequence[Raster], produce: Callable[[int, Raster], Raster]) -> LazyFrames:
    """Frame i is produce(i, source[i]), computed when first asked for"""
    return LazyFrames(len(source), lambda index: produce(index, source[index]))


def remap(source: Sequence[Raster], indices: Sequence[int]) -> LazyFrames:
    """Frame j is source[indices[j]]"""
    return LazyFrames(len(indices), lambda index: source[indices[index]])


def chain(parts: List[Sequence[Raster]]) -> LazyFrames:
    """The parts' frames back to back"""
    ends = list(itertools.accumulate(len(part) for part in parts))

    def produce(index: int) -> Raster:
        part = bisect.bisect_right(ends, index)
        return parts[part][index - (ends[part - 1] if part else 0)]

    return LazyFrames(ends[-1], produce)


def audio_span(clip: VideoClip, start_frame: int, stop_frame: int) -> Optional[np.ndarray]:
    """Samples covering frames [start_frame, stop_frame) of a synced clip"""
    if clip.audio is None:
        return None
    audio = clip.synced().audio
    return audio.samples[:, clip.audio_frames_for(start_frame):clip.audio_frames_for(stop_frame)]


def conform_frame(frame: Raster, like: VideoClip) -> Raster:
    if (frame.width, frame.height) != (like.width, like.height):
        frame = image_augmentations.resize_raster(frame, like.width, like.height)
    if frame.channels != like.channels:
        frame = image_augmentations.convert_color(frame, like.mode)
    return frame


def conform_audio(other: VideoClip, like: VideoClip, frame_count: int) -> np.ndarray:
    """other's soundtrack (or silence) in like's audio format, covering frame_count frames"""
    samples = like.audio_frames_for(frame_count)
    if other.audio is None:
        return np.zeros((like.audio.channels, samples), dtype=np.float64)
    return fit_length(audio_augmentations.match_format(other.audio, like.audio), samples)


def resample_frames(clip: VideoClip, target_fps: float) -> LazyFrames:
    """Nearest-frame resample of the timeline to target_fps"""
    count = max(1, int(round(clip.frame_count * target_fps / clip.fps)))
    indices = [min(clip.frame_count - 1, int(round(j * clip.fps / target_fps))) for j in range(count)]
    return remap(clip.frames, indices)


def window(frame_count: int, offset_factor: float, duration_factor: float) -> range:
    start = int(round(offset_factor * frame_count))
    stop = min(frame_count, int(round((offset_factor + duration_factor) * frame_count)))
    return range(start, stop)


def gray_clip(like: VideoClip) -> VideoClip:
    frame = Raster.solid(like.width, like.height, image_augmentations.fill_for(like.frames[0], BACKGROUND_GRAY))
    return VideoClip([frame] * like.frame_count, like.fps, None)


def _check_window(params: Dict[str, Any]) -> None:
    if params["offset_factor"] + params["duration_factor"] > 1.0 + 1e-9:
        raise ParamValidationError("offset_factor + duration_factor must be <= 1")


def _check_trim(params: Dict[str, Any]) -> None:
    start, end = params["start_s"], params["end_s"]
    if start is not None and end is not None and end <= start:
        raise ParamValidationError(f"trim: end_s ({end}) must be > start_s ({start})")


def _check_audio_pipeline(params: Dict[str, Any]) -> None:
    validate_pipeline(load_pipeline(params["pipeline"] or [], "audio"), "audio")


# ==================== PER FRAME ====================

def map_frames(clip: VideoClip, defn: TransformDef, params: Dict[str, Any], rng: Rng) -> VideoClip:
    """
    Run one image transform on every frame with the same resolved params

    Most ops see an identical stream on every frame (same sprite placement,
    same homography); PER_FRAME_STREAMS ops draw from rng.derive(frame index).
    """
    redraw = defn.name in PER_FRAME_STREAMS

    def produce(index: int, frame: Raster) -> Raster:
        return defn.call(frame, params, rng.derive(index) if redraw else Rng(rng.seed))

    return rebuild(clip, lazy_map(clip.frames, produce))


def per_frame(spec: Union[TransformSpec, Dict[str, Any]], clip: VideoClip, rng: Union[Rng, int]) -> VideoClip:
    """
    Apply an image TransformSpec to every frame of a clip

    Random params are resolved once from rng.derive(0); spec.p is not
    consulted here (the video op wrapping it already drew its coin).
    """
    spec = spec if isinstance(spec, TransformSpec) else TransformSpec.model_validate(spec)
    rng = as_rng(rng)
    validate_spec(spec, "image")
    defn = catalog.get("image", spec.name)
    params = defn.resolve_params(spec.params, rng.derive(0))
    return map_frames(clip, defn, params, rng.derive(1))


def _frame_delegate(image_def: TransformDef) -> Callable:
    def run(clip: VideoClip, rng: Rng = None, **params) -> VideoClip:
        return map_frames(clip, image_def, params, rng or Rng(0))

    run.__doc__ = f"Per-frame {image_def.name}: {image_def.description}"
    return run


def register_frame_delegates() -> None:
    for video_name, image_name in FRAME_DELEGATES.items():
        image_def = catalog.registered("image", image_name)
        catalog.add(TransformDef(
            name=video_name,
            modality="video",
            func=_frame_delegate(image_def),
            category=image_def.category,
            intensity=image_def.intensity_fn,
            params_model=image_def.params_model,
            uses_rng=True,
            validate_extra=image_def.validate_extra,
            description=f"Per-frame {image_name}",
        ))


register_frame_delegates()


# ==================== TEMPORAL ====================

@register("video", "temporal", ix.window_loss("offset_factor", "duration_factor"), validate_extra=_check_window)
def time_crop(clip: VideoClip, offset_factor: Fraction = 0.0,
              duration_factor: Annotated[float, Field(gt=0.0, le=1.0)] = 1.0) -> VideoClip:
    """Keep frames in [offset * D, (offset + duration) * D); audio cut to the same interval"""
    kept = window(clip.frame_count, offset_factor, duration_factor)
    if len(kept) == 0:
        raise TransformError(
            f"time_crop: offset={offset_factor} duration={duration_factor} keeps no frame of {clip.frame_count}"
        )
    part = _excerpt(clip, kept.start, kept.stop)
    return rebuild(clip, part.frames, part.audio, keep_audio=False)


@register("video", "temporal", ix.explicit_target("start_s", "end_s"), validate_extra=_check_trim)
def trim(clip: VideoClip, start_s: Optional[NonNegative] = None, end_s: Optional[NonNegative] = None) -> VideoClip:
    """Keep [start_s, end_s) in seconds; either bound defaults to the clip edge"""
    start = 0 if start_s is None else min(clip.frame_count, int(round(start_s * clip.fps)))
    stop = clip.frame_count if end_s is None else min(clip.frame_count, int(round(end_s * clip.fps)))
    if stop <= start:
        raise TransformError(f"trim: [{start_s}, {end_s}) s keeps no frame of a {clip.duration:.3f} s clip")
    part = _excerpt(clip, start, stop)
    return rebuild(clip, part.frames, part.audio, keep_audio=False)


@register("video", "temporal", ix.loop_count("num_loops"))
def loop(clip: VideoClip, num_loops: Annotated[int, Field(ge=0)] = 0) -> VideoClip:
    """Play the clip num_loops extra times; frames and audio both repeat"""
    if num_loops == 0:
        return rebuild(clip, clip.frames)
    synced = clip.synced()
    track = None
    if synced.audio is not None:
        track = AudioBuffer(np.tile(synced.audio.samples, (1, num_loops + 1)), synced.audio.sample_rate)
    indices = [index % clip.frame_count for index in range(clip.frame_count * (num_loops + 1))]
    return rebuild(clip, remap(clip.frames, indices), track, keep_audio=False)


@register("video", "temporal", ix.log2_ratio("factor"))
def change_video_speed(clip: VideoClip, factor: Positive = 1.0) -> VideoClip:
    """Play factor times faster: frame timeline resampled to n / factor frames, audio sped up by factor"""
    if factor == 1.0:
        return rebuild(clip, clip.frames)
    count = max(1, int(round(clip.frame_count / factor)))
    frames = remap(clip.frames, [min(clip.frame_count - 1, int(i * factor)) for i in range(count)])
    track = audio_augmentations.speed(clip.audio, factor=factor) if clip.audio is not None else None
    return rebuild(clip, frames, track, keep_audio=False)


def fps_change(params: Dict[str, Any]) -> float:
    return ix.log2_ratio("fps")({"fps": params["fps"] / REFERENCE_FPS})


@register("video", "temporal", fps_change)
def fps(clip: VideoClip, fps: Positive = 15.0) -> VideoClip:
    """Nearest-frame resample to a new frame rate; duration and audio unchanged"""
    if fps == clip.fps:
        return rebuild(clip, clip.frames)
    return rebuild(clip, resample_frames(clip, fps), fps=fps)


@register("video", "temporal", ix.probability("offset_factor"))
def shift(clip: VideoClip, offset_factor: Fraction = 0.0, color: Color = (0, 0, 0)) -> VideoClip:
    """Delay content by offset_factor of the clip: solid frames (and silence) in front, tail dropped"""
    lead = min(clip.frame_count, int(round(offset_factor * clip.frame_count)))
    if lead == 0:
        return rebuild(clip, clip.frames)
    filler = Raster.solid(clip.width, clip.height, image_augmentations.fill_for(clip.frames[0], color))
    frames = chain([[filler] * lead, clip.frames[:clip.frame_count - lead]])
    track = None
    if clip.audio is not None:
        silence = np.zeros((clip.audio.channels, clip.audio_frames_for(lead)), dtype=np.float32)
        head = audio_span(clip, 0, clip.frame_count - lead)
        track = AudioBuffer(np.concatenate([silence, head], axis=1), clip.audio.sample_rate)
    return rebuild(clip, frames, track, keep_audio=False)


def decimation_share(params: Dict[str, Any]) -> float:
    return 100.0 * params["off_s"] / (params["on_s"] + params["off_s"])


@register("video", "temporal", decimation_share)
def time_decimate(clip: VideoClip, on_s: Positive = 1.0, off_s: NonNegative = 0.0) -> VideoClip:
    """Keep on_s seconds, drop off_s seconds, repeat; audio follows the same schedule"""
    if off_s == 0:
        return rebuild(clip, clip.frames)
    period = on_s + off_s
    kept = [i for i in range(clip.frame_count) if math.fmod(i / clip.fps, period) < on_s]
    track = None
    if clip.audio is not None:
        synced = clip.synced().audio
        times = np.arange(synced.frames) / synced.sample_rate
        mask = np.fmod(times, period) < on_s
        track = AudioBuffer(synced.samples[:, mask].copy(), synced.sample_rate)
    return rebuild(clip, remap(clip.frames, kept), track, keep_audio=False)


# ==================== COMPOSITE ====================

def _joined_audio(parts: List[VideoClip], like: VideoClip) -> Optional[AudioBuffer]:
    if like.audio is None:
        return None
    samples = [conform_audio(part, like, part.frame_count) for part in parts]
    return AudioBuffer.from_processed(np.concatenate(samples, axis=1), like.audio.sample_rate)


def _conformed(other: VideoClip, like: VideoClip) -> VideoClip:
    frames = resample_frames(other, like.fps) if other.fps != like.fps else other.frames
    return VideoClip(lazy_map(frames, lambda index, frame: conform_frame(frame, like)), like.fps, other.audio)


@register("video", "composite", ix.nonzero("others", ([], (), None)))
def concat(clip: VideoClip, others: Optional[List[Any]] = None,
           src_index: Annotated[int, Field(ge=0)] = 0) -> VideoClip:
    """
    Concatenate clips with the input placed at src_index

    Other clips must share the input's frame dims; their frame rate and audio
    format are converted to the input's.
    """
    parts = []
    for other in (as_clip(o) for o in others or ()):
        if (other.width, other.height) != (clip.width, clip.height):
            raise TransformError(
                f"concat: clip is {other.width}x{other.height}, expected {clip.width}x{clip.height}"
            )
        parts.append(_conformed(other, clip))
    parts.insert(min(src_index, len(parts)), clip)
    frames = chain([part.frames for part in parts])
    return rebuild(clip, frames, _joined_audio(parts, clip), keep_audio=False)


@register("video", "composite", ix.constant(50))
def insert_in_background(clip: VideoClip, background: Optional[Any] = None,
                         offset_factor: Fraction = 0.0) -> VideoClip:
    """
    Splice the clip into a background clip at offset_factor of the background

    The default background is a gray clip as long as the input.
    """
    bed = _conformed(as_clip(background), clip) if background is not None else gray_clip(clip)
    cut = int(round(offset_factor * bed.frame_count))
    parts = []
    if cut > 0:
        parts.append(_excerpt(bed, 0, cut))
    parts.append(clip)
    if cut < bed.frame_count:
        parts.append(_excerpt(bed, cut, bed.frame_count))
    frames = chain([part.frames for part in parts])
    return rebuild(clip, frames, _joined_audio(parts, clip), keep_audio=False)


def _excerpt(source: VideoClip, start: int, stop: int) -> VideoClip:
    span = audio_span(source, start, stop)
    track = AudioBuffer(span.copy(), source.audio.sample_rate) if span is not None else None
    return VideoClip(source.frames[start:stop], source.fps, track)


def _stack(clip: VideoClip, other: Optional[Any], axis: int) -> VideoClip:
    other = as_clip(other) if other is not None else clip
    if axis == 1 and other.height != clip.height:
        raise TransformError(f"hstack: heights differ ({clip.height} vs {other.height})")
    if axis == 0 and other.width != clip.width:
        raise TransformError(f"vstack: widths differ ({clip.width} vs {other.width})")
    def produce(index: int, frame: Raster) -> Raster:
        second = other.frames[index % other.frame_count]
        if second.mode != clip.mode:
            second = image_augmentations.convert_color(second, clip.mode)
        return Raster(np.concatenate([frame.pixels, second.pixels], axis=axis))

    return rebuild(clip, lazy_map(clip.frames, produce))


@register("video", "composite", ix.constant(50))
def hstack(clip: VideoClip, other: Optional[Any] = None) -> VideoClip:
    """Side by side (heights must match); audio and length from the input, other loops"""
    return _stack(clip, other, axis=1)


@register("video", "composite", ix.constant(50))
def vstack(clip: VideoClip, other: Optional[Any] = None) -> VideoClip:
    """Top over bottom (widths must match); audio and length from the input, other loops"""
    return _stack(clip, other, axis=0)


def _replace_window(clip: VideoClip, kept: range, source: Callable[[int], Raster]) -> VideoClip:
    return rebuild(clip, lazy_map(clip.frames, lambda index, frame: source(index) if index in kept else frame))


@register("video", "composite", ix.probability("duration_factor"), validate_extra=_check_window)
def replace_with_color_frames(clip: VideoClip, offset_factor: Fraction = 0.0, duration_factor: Fraction = 1.0,
                              color: Color = (0, 0, 0)) -> VideoClip:
    """Frames inside the window become solid color; audio is untouched"""
    filler = Raster.solid(clip.width, clip.height, image_augmentations.fill_for(clip.frames[0], color))
    return _replace_window(clip, window(clip.frame_count, offset_factor, duration_factor), lambda i: filler)


@register("video", "composite", ix.probability("duration_factor"), validate_extra=_check_window)
def replace_with_background(clip: VideoClip, background: Optional[Any] = None, offset_factor: Fraction = 0.0,
                            duration_factor: Fraction = 0.5) -> VideoClip:
    """Frames inside the window are replaced by the background clip's frames (looped); audio is untouched"""
    bed = _conformed(as_clip(background), clip) if background is not None else gray_clip(clip)
    kept = window(clip.frame_count, offset_factor, duration_factor)
    return _replace_window(clip, kept, lambda i: bed.frames[(i - kept.start) % bed.frame_count])


# ==================== OVERLAY ====================

@register("video", "overlay", ix.area_fraction("overlay_size"))
def overlay(clip: VideoClip, other: Optional[Any] = None, x_factor: Fraction = 0.0, y_factor: Fraction = 0.0,
            overlay_size: Fraction = 0.3) -> VideoClip:
    """Picture-in-picture: the other clip (default: the input itself) scaled to overlay_size * width"""
    other = as_clip(other) if other is not None else clip
    width = round(overlay_size * clip.width)
    if width < 1:
        return rebuild(clip, clip.frames)
    height = max(1, round(other.height * width / other.width))
    x, y = int(x_factor * clip.width), int(y_factor * clip.height)
    def produce(index: int, frame: Raster) -> Raster:
        inset = image_augmentations.resize_raster(other.frames[index % other.frame_count], width, height)
        return image_overlays.blend_rgba(frame, image_overlays.to_rgba(inset), x, y)

    return rebuild(clip, lazy_map(clip.frames, produce))


@register("video", "overlay", ix.probability("opacity"))
def blend_videos(clip: VideoClip, other: Optional[Any] = None, opacity: Fraction = 0.5) -> VideoClip:
    """
    out = (1 - opacity) * clip + opacity * other, frame by frame

    The default other is the input played backwards. Other frames are resized
    to the input's dims and loop when the other clip is shorter.
    """
    other = as_clip(other) if other is not None else VideoClip(clip.frames[::-1], clip.fps, None)
    def produce(index: int, frame: Raster) -> Raster:
        second = conform_frame(other.frames[index % other.frame_count], clip).pixels.astype(np.float64)
        mixed = (1.0 - opacity) * frame.pixels.astype(np.float64) + opacity * second
        return Raster(np.clip(np.rint(mixed), 0, 255).astype(np.uint8))

    return rebuild(clip, lazy_map(clip.frames, produce))


@register("video", "overlay", ix.complement_area("overlay_size"))
def overlay_onto_background_video(clip: VideoClip, background: Optional[Any] = None,
                                  overlay_size: Annotated[float, Field(gt=0.0, le=1.0)] = 0.7,
                                  x_factor: Fraction = 0.15, y_factor: Fraction = 0.15) -> VideoClip:
    """Each frame scaled onto the matching background frame (default: a gray canvas); output takes the background dims"""
    bed = as_clip(background) if background is not None else None
    def produce(index: int, frame: Raster) -> Raster:
        canvas = bed.frames[index % bed.frame_count] if bed is not None else None
        return image_overlays.overlay_onto_background_image(
            frame, background=canvas, overlay_size=overlay_size, x_pos=x_factor, y_pos=y_factor,
        )

    return rebuild(clip, lazy_map(clip.frames, produce))


def shape_coverage(params: Dict[str, Any]) -> float:
    return min(1.0, params["num_shapes"] * params["size"] ** 2) * params["opacity"] * 100.0


@register("video", "overlay", shape_coverage)
def overlay_shapes(clip: VideoClip, num_shapes: Annotated[int, Field(ge=1)] = 1, shape_type: ShapeType = "random",
                   color: Optional[Color] = None, opacity: Fraction = 1.0, size: Fraction = 0.2,
                   rng: Rng = None) -> VideoClip:
    """
    Static shapes composited onto every frame

    Positions, kinds and (when color is None) colors are drawn once per clip;
    size is the shape's side relative to the shorter frame side.
    """
    rng = rng or Rng(0)
    side = max(1, int(round(size * min(clip.width, clip.height))))
    layer = Image.new("RGBA", (clip.width, clip.height), (0, 0, 0, 0))
    draw = ImageDraw.Draw(layer)
    for _ in range(num_shapes):
        kind = rng.choice(SHAPE_TYPES) if shape_type == "random" else shape_type
        fill = tuple(color) if color is not None else tuple(int(c) for c in rng.integers(0, 256, size=3))
        x0 = int(rng.integers(0, max(1, clip.width - side + 1)))
        y0 = int(rng.integers(0, max(1, clip.height - side + 1)))
        box = [x0, y0, x0 + side - 1, y0 + side - 1]
        if kind == "rectangle":
            draw.rectangle(box, fill=fill + (255,))
        elif kind == "ellipse":
            draw.ellipse(box, fill=fill + (255,))
        else:
            draw.polygon([(x0 + side // 2, y0), (box[2], box[3]), (x0, box[3])], fill=fill + (255,))
    pixels = np.array(layer, dtype=np.uint8)
    frames = lazy_map(clip.frames, lambda index, frame: image_overlays.blend_rgba(frame, pixels, 0, 0, opacity))
    return rebuild(clip, frames)


def dot_coverage(params: Dict[str, Any]) -> float:
    """Dot area relative to a 256x256 frame"""
    return min(1.0, params["num_dots"] * params["dot_size"] ** 2 / 65536.0) * params["opacity"] * 100.0


@register("video", "overlay", dot_coverage)
def overlay_dots(clip: VideoClip, num_dots: Annotated[int, Field(ge=0)] = 100,
                 dot_size: Annotated[int, Field(ge=1)] = 3, color: Color = (255, 255, 255),
                 opacity: Fraction = 1.0, random_movement: bool = True, rng: Rng = None) -> VideoClip:
    """
    Square dots of dot_size px over every frame

    With random_movement each dot follows a Gaussian random walk (step
    sigma = dot_size px); otherwise dots stay where they were first drawn.
    """
    rng = rng or Rng(0)
    if num_dots == 0 or opacity == 0:
        return rebuild(clip, clip.frames)
    start = np.stack([rng.uniform(0, clip.width, size=num_dots), rng.uniform(0, clip.height, size=num_dots)], axis=1)
    if random_movement:
        steps = rng.normal(0.0, dot_size, size=(clip.frame_count, num_dots, 2))
        steps[0] = 0.0
        paths = start + np.cumsum(steps, axis=0)
    else:
        paths = np.broadcast_to(start, (clip.frame_count, num_dots, 2))
    rgba = tuple(int(c) for c in color) + (255,)

    def produce(index: int, frame: Raster) -> Raster:
        layer = np.zeros((clip.height, clip.width, 4), dtype=np.uint8)
        for x, y in paths[index]:
            x0, y0 = int(x) % clip.width, int(y) % clip.height
            layer[y0:y0 + dot_size, x0:x0 + dot_size] = rgba
        return image_overlays.blend_rgba(frame, layer, 0, 0, opacity)

    return rebuild(clip, lazy_map(clip.frames, produce))


# ==================== SPATIAL ====================

@register("video", "spatial", ix.maximum(ix.scaled("sigma", 100.0), ix.scaled("shake_sigma", 100.0)))
def perspective_transform_and_shake(clip: VideoClip, sigma: NonNegative = 50.0, shake_sigma: NonNegative = 0.0,
                                    fill: Color = (0, 0, 0), rng: Rng = None) -> VideoClip:
    """
    One perspective warp for the whole clip plus optional per-frame shake

    The base corner quad is drawn once with sigma; each frame then jitters
    that quad by N(0, shake_sigma) px from its own derived stream.
    """
    rng = rng or Rng(0)
    if sigma == 0 and shake_sigma == 0:
        return rebuild(clip, clip.frames)
    corners = image_augmentations.image_corners(clip.width, clip.height)
    if sigma > 0:
        base, base_h = image_augmentations.jittered_homography(clip.width, clip.height, sigma, rng.derive(0))
    else:
        base, base_h = corners, np.eye(3)
    def produce(index: int, frame: Raster) -> Raster:
        h = base_h
        if shake_sigma > 0:
            _, h = image_augmentations.jittered_homography(clip.width, clip.height, shake_sigma,
                                                           rng.derive(index + 1), base=base)
        return image_augmentations.warp_bilinear(frame, h, fill)

    return rebuild(clip, lazy_map(clip.frames, produce))


# ==================== AUDIO ====================

@register("video", "mixing", ix.constant(100))
def audio_swap(clip: VideoClip, audio: Optional[Any] = None, rng: Rng = None) -> VideoClip:
    """
    Replace the soundtrack, fitted to the clip duration

    Without a replacement, quiet white noise in the current track's format
    (mono 44.1 kHz when the clip is silent) is used.
    """
    if audio is not None:
        track = as_audio(audio, clip.audio.sample_rate if clip.audio is not None else None)
    else:
        rng = rng or Rng(0)
        rate = clip.audio.sample_rate if clip.audio is not None else 44100
        channels = clip.audio.channels if clip.audio is not None else 1
        samples = int(round(clip.duration * rate))
        track = AudioBuffer.from_processed(rng.normal(0.0, 0.05, size=(channels, samples)), rate)
    return rebuild(clip, clip.frames, track, keep_audio=False)


@register("video", "mixing", ix.constant(100))
def remove_audio(clip: VideoClip) -> VideoClip:
    return VideoClip(clip.frames, clip.fps, None)


def audio_pipeline_size(params: Dict[str, Any]) -> float:
    return 50.0 if load_pipeline(params["pipeline"] or [], "audio").children else 0.0


@register("video", "mixing", audio_pipeline_size, validate_extra=_check_audio_pipeline)
def augment_audio(clip: VideoClip, pipeline: Optional[Any] = None, rng: Rng = None) -> NestedResult:
    """
    Run an audio pipeline on the soundtrack

    The result is truncated or silence-padded back to the frame timeline and
    the audio pipeline's metadata is nested under this op's entry.
    """
    if clip.audio is None:
        raise TransformError("augment_audio: clip has no audio track")
    audio, children = compose(load_pipeline(pipeline or [], "audio"), clip.audio, rng or Rng(0), modality="audio")
    return NestedResult(rebuild(clip, clip.frames, audio, keep_audio=False), children)


# ==================== UTILITY ====================

@register("video", "utility", ix.constant(0))
def apply_lambda(clip: VideoClip, aug_function: Optional[Any] = None,
                 kwargs: Optional[Dict[str, Any]] = None) -> VideoClip:
    """Run a user callable (or "module:attr" path) on the clip"""
    if aug_function is None:
        return rebuild(clip, clip.frames)
    result = resolve_callable(aug_function)(clip, **(kwargs or {}))
    if not isinstance(result, VideoClip):
        raise TransformError(f"apply_lambda must return a VideoClip, got {type(result).__name__}")
    return result.synced()
