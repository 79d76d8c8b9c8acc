"""
Runtime microbenchmark over a modality's whole catalog

Every op runs once as warm-up and then `iterations` timed times on a
standardized synthetic input. Rows come back sorted by mean runtime,
slowest first; ops that cannot run on the preset (missing asset, data
constraint) are kept as skipped rows.
"""

import csv
import logging
import statistics
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Tuple, Union

import numpy as np
from rich.console import Console
from rich.table import Table

from models.eval_models import MIN_ITERATIONS, BenchRow
from models.media_models import AudioBuffer, Raster, TextDoc, VideoClip
from services.augmentation_core import NestedResult
from services.catalog import catalog
from utils.errors import AugmentationError, MediaIOError, ParamValidationError
from utils.rng import Rng

logger = logging.getLogger(__name__)


PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "full": {
        "image": {"width": 1080, "height": 1080},
        "audio": {"seconds": 10.0, "channels": 2, "sample_rate": 44100},
        "text": {"chars": 1000},
        "video": {"frames": 30, "width": 720, "height": 720, "fps": 30.0, "sample_rate": 44100},
    },
    "small": {
        "image": {"width": 64, "height": 64},
        "audio": {"seconds": 0.5, "channels": 2, "sample_rate": 16000},
        "text": {"chars": 200},
        "video": {"frames": 4, "width": 32, "height": 32, "fps": 4.0, "sample_rate": 16000},
    },
}

WORDS = ("the quick brown fox jumps over a lazy dog while he said she can't stop "
         "reading about image audio video text augmentation robustness").split()


# ==================== INPUTS ====================

def synthetic_image(width: int, height: int, rng: Rng) -> Raster:
    return Raster(rng.integers(0, 256, size=(height, width, 3)).astype(np.uint8))


def synthetic_audio(seconds: float, channels: int, sample_rate: int, rng: Rng) -> AudioBuffer:
    """440 Hz tone plus light noise on every channel"""
    frames = int(round(seconds * sample_rate))
    t = np.arange(frames) / sample_rate
    tone = 0.5 * np.sin(2 * np.pi * 440.0 * t)
    samples = tone[np.newaxis, :] + rng.normal(0.0, 0.01, size=(channels, frames))
    return AudioBuffer.from_processed(samples, sample_rate)


def synthetic_text(chars: int, rng: Rng) -> TextDoc:
    words: List[str] = []
    while len(" ".join(words)) < chars:
        words.append(rng.choice(WORDS))
    return TextDoc(" ".join(words)[:chars])


def synthetic_video(frames: int, width: int, height: int, fps: float, sample_rate: int, rng: Rng) -> VideoClip:
    clip_frames = [synthetic_image(width, height, rng.derive(i)) for i in range(frames)]
    audio = synthetic_audio(frames / fps, 2, sample_rate, rng.derive(frames))
    return VideoClip(clip_frames, fps, audio).synced()


def make_input(modality: str, preset: str = "small", seed: int = 0) -> Any:
    if preset not in PRESETS:
        raise ParamValidationError(f"unknown bench preset {preset!r}; choose from {sorted(PRESETS)}")
    size = PRESETS[preset][modality]
    rng = Rng(seed)
    if modality == "image":
        return synthetic_image(size["width"], size["height"], rng)
    if modality == "audio":
        return synthetic_audio(size["seconds"], size["channels"], size["sample_rate"], rng)
    if modality == "text":
        return synthetic_text(size["chars"], rng)
    return synthetic_video(size["frames"], size["width"], size["height"], size["fps"], size["sample_rate"], rng)


def describe(datum: Any) -> str:
    return " ".join(f"{k}={v}" for k, v in datum.shape_descriptor().items() if not isinstance(v, dict))


def bench_params(modality: str, name: str, datum: Any) -> Dict[str, Any]:
    """Per-op overrides so corner-jitter ops stay well-conditioned on small inputs"""
    if name in ("perspective_transform", "perspective_transform_and_shake"):
        side = min(datum.width, datum.height)
        return {"sigma": max(1.0, 0.05 * side)}
    return {}


# ==================== TIMING ====================

def realize(result: Any) -> Any:
    """Produce every frame of a lazily built clip so a timing covers the whole op"""
    datum = result.datum if isinstance(result, NestedResult) else result
    if isinstance(datum, VideoClip):
        for _ in datum.frames:
            pass
    return result


def time_call(fn: Callable[[], Any], iterations: int) -> Tuple[float, float]:
    """Warm-up once, then (mean, std) of `iterations` perf_counter timings"""
    realize(fn())
    timings = []
    for _ in range(iterations):
        start = time.perf_counter()
        realize(fn())
        timings.append(time.perf_counter() - start)
    # below the clock resolution a run reads as one tick
    tick = time.get_clock_info("perf_counter").resolution
    return max(statistics.mean(timings), tick), statistics.stdev(timings)


def skipped_row(modality: str, name: str, descriptor: str, reason: str) -> BenchRow:
    return BenchRow(name=name, modality=modality, input_descriptor=descriptor, skipped=True, reason=reason)


def run_bench(modality: str, iterations: int = MIN_ITERATIONS, preset: str = "small", seed: int = 0) -> List[BenchRow]:
    """
    One BenchRow per catalog op of the modality, sorted by mean descending (skipped rows last)

    A failing op never aborts the run: augmentation errors are expected data
    constraints and logged as warnings, anything else is logged with its
    traceback. Both become skipped rows carrying the reason.
    """
    if iterations < MIN_ITERATIONS:
        raise ParamValidationError(f"iterations must be >= {MIN_ITERATIONS}, got {iterations}")
    datum = make_input(modality, preset, seed)
    descriptor = describe(datum)
    rows = []
    for defn in catalog.definitions(modality):
        rng = Rng(seed)
        try:
            params = defn.resolve_params(bench_params(modality, defn.name, datum), None)
            mean, std = time_call(lambda: defn.call(datum, params, rng), iterations)
        except AugmentationError as e:
            logger.warning(f"Skipping {modality}.{defn.name}: {e}")
            rows.append(skipped_row(modality, defn.name, descriptor, str(e)))
            continue
        except Exception as e:
            logger.exception(f"Benchmark of {modality}.{defn.name} failed")
            rows.append(skipped_row(modality, defn.name, descriptor, f"{type(e).__name__}: {e}"))
            continue
        rows.append(BenchRow(name=defn.name, modality=modality, mean_s=mean, std_s=std,
                             iterations=iterations, input_descriptor=descriptor))
    rows.sort(key=lambda row: (row.skipped, -row.mean_s))
    logger.info(f"Benchmarked {len(rows)} {modality} ops on {descriptor} ({iterations} iterations)")
    return rows


# ==================== OUTPUT ====================

def write_bench_csv(rows: List[BenchRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["name", "modality", "mean_s", "std_s", "iterations", "input", "skipped", "reason"])
            for row in rows:
                writer.writerow([row.name, row.modality, f"{row.mean_s:.9f}", f"{row.std_s:.9f}",
                                 row.iterations, row.input_descriptor, row.skipped, row.reason or ""])
    except OSError as e:
        raise MediaIOError(f"cannot write bench CSV {path}: {e}") from None
    return path


def bench_table(rows: List[BenchRow], title: str = "") -> Table:
    table = Table(title=title or None)
    table.add_column("augmentation")
    table.add_column("mean (s)", justify="right")
    table.add_column("std (s)", justify="right")
    table.add_column("runs", justify="right")
    for row in rows:
        if row.skipped:
            table.add_row(row.name, "skipped", "", "")
        else:
            table.add_row(row.name, f"{row.mean_s:.6f}", f"{row.std_s:.6f}", str(row.iterations))
    return table


def print_bench(rows: List[BenchRow], console: Console = None, title: str = "") -> None:
    (console or Console()).print(bench_table(rows, title))
