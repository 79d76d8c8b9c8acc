"""Shared synthetic fixtures: small rasters, tones, clicks and short clips"""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

from models.media_models import AudioBuffer, Raster, TextDoc, VideoClip


def make_tone(freq: float = 440.0, seconds: float = 1.0, sample_rate: int = 22050,
              channels: int = 1, amplitude: float = 0.5) -> AudioBuffer:
    t = np.arange(int(seconds * sample_rate)) / sample_rate
    wave = amplitude * np.sin(2 * np.pi * freq * t)
    return AudioBuffer(np.tile(wave, (channels, 1)).astype(np.float32), sample_rate)


def make_clicks(seconds: float = 2.0, sample_rate: int = 22050, every_s: float = 0.5) -> AudioBuffer:
    samples = np.zeros(int(seconds * sample_rate), dtype=np.float32)
    step = int(every_s * sample_rate)
    samples[::step] = 0.9
    return AudioBuffer(samples[np.newaxis, :], sample_rate)


def make_raster(width: int = 32, height: int = 24, seed: int = 0, channels: int = 3) -> Raster:
    rng = np.random.default_rng(seed)
    return Raster(rng.integers(0, 256, size=(height, width, channels), dtype=np.uint8))


def make_clip(frames: int = 10, width: int = 16, height: int = 12, fps: float = 5.0,
              sample_rate: int = 8000, with_audio: bool = True) -> VideoClip:
    rasters = [make_raster(width, height, seed=i) for i in range(frames)]
    audio = make_tone(220.0, frames / fps, sample_rate, channels=2) if with_audio else None
    return VideoClip(rasters, fps, audio).synced()


def peak_frequency(samples: np.ndarray, sample_rate: int) -> float:
    spectrum = np.abs(np.fft.rfft(samples * np.hanning(len(samples))))
    return float(np.fft.rfftfreq(len(samples), 1.0 / sample_rate)[np.argmax(spectrum)])


@pytest.fixture
def image():
    return make_raster()


@pytest.fixture
def tone():
    return make_tone()


@pytest.fixture
def clip():
    return make_clip()


@pytest.fixture
def doc():
    return TextDoc("The quick brown fox can't stop; she said he won't jump over 3 lazy dogs.")
