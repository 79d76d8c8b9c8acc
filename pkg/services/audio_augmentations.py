"""
Audio augmentations over AudioBuffer

Every output goes through AudioBuffer.from_processed, so it is clipped to
[-1, 1], finite and float32 whatever the DSP produced.
"""

import logging
from fractions import Fraction as Ratio
from typing import Annotated, Any, Dict, Optional

import numpy as np
from pydantic import Field
from scipy import signal

from models.media_models import AudioBuffer
from services import audio_dsp
from services import intensity_service as ix
from services.augmentation_core import resolve_callable
from services.catalog import Fraction, Positive, register
from services.media_io import as_audio
from utils.errors import TransformError
from utils.rng import Rng

logger = logging.getLogger(__name__)

# Filter intensities are relative to the 44.1 kHz Nyquist frequency
REFERENCE_NYQUIST = 22050.0
CLICK_SECONDS = 0.1
CLICK_HZ = 1000.0

Semitones = Annotated[float, Field(ge=-24.0, le=24.0)]
KernelSize = Annotated[int, Field(ge=1)]
Frequency = Annotated[float, Field(gt=0.0)]


def _out(samples: np.ndarray, audio: AudioBuffer) -> AudioBuffer:
    return AudioBuffer.from_processed(samples, audio.sample_rate)


def _as64(audio: AudioBuffer) -> np.ndarray:
    return audio.samples.astype(np.float64)


def match_format(other: AudioBuffer, like: AudioBuffer) -> np.ndarray:
    """other's samples resampled to like's rate and mixed/broadcast to its channel count"""
    samples = other.samples.astype(np.float64)
    if other.sample_rate != like.sample_rate:
        ratio = Ratio(like.sample_rate, other.sample_rate).limit_denominator(1000)
        samples = signal.resample_poly(samples, ratio.numerator, ratio.denominator, axis=-1)
    if samples.shape[0] != like.channels:
        samples = np.repeat(samples.mean(axis=0, keepdims=True), like.channels, axis=0)
    return samples


def tile_to(samples: np.ndarray, frames: int) -> np.ndarray:
    """Loop or truncate along time to exactly `frames` samples"""
    if samples.shape[-1] == 0:
        raise TransformError("cannot loop an empty signal")
    repeats = -(-frames // samples.shape[-1])
    return np.tile(samples, (1, repeats))[:, :frames]


def filter_cutoff_low(params: Dict[str, Any]) -> float:
    return 100.0 * (1.0 - min(params["cutoff_hz"], REFERENCE_NYQUIST) / REFERENCE_NYQUIST)


def filter_cutoff_high(params: Dict[str, Any]) -> float:
    return 100.0 * min(params["cutoff_hz"], REFERENCE_NYQUIST) / REFERENCE_NYQUIST


def reverb_strength(params: Dict[str, Any]) -> float:
    return params["wet_level"] * params["room_size"]


# ==================== TEMPORAL ====================

@register("audio", "temporal", ix.log2_ratio("rate"))
def time_stretch(audio: AudioBuffer, rate: Positive = 1.5) -> AudioBuffer:
    """Phase-vocoder stretch to round(frames / rate) samples, pitch unchanged"""
    return _out(audio_dsp.time_stretch(_as64(audio), rate), audio)


@register("audio", "temporal", ix.log2_ratio("factor"))
def tempo(audio: AudioBuffer, factor: Positive = 2.0) -> AudioBuffer:
    """Play factor times faster without changing pitch"""
    return _out(audio_dsp.time_stretch(_as64(audio), factor), audio)


@register("audio", "temporal", ix.log2_ratio("factor"))
def speed(audio: AudioBuffer, factor: Positive = 2.0) -> AudioBuffer:
    """
    Resample so duration becomes duration / factor and pitch scales by factor

    Uses polyphase windowed-sinc resampling with the factor approximated by a
    ratio of integers (denominator <= 1000).
    """
    ratio = Ratio(factor).limit_denominator(1000)
    if ratio == 1:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate)
    resampled = signal.resample_poly(_as64(audio), ratio.denominator, ratio.numerator, axis=-1)
    return _out(resampled, audio)


@register("audio", "temporal", ix.window_loss("offset_factor", "duration_factor"))
def clip(audio: AudioBuffer, offset_factor: Fraction = 0.0, duration_factor: Fraction = 1.0) -> AudioBuffer:
    """Excerpt [offset * n, offset * n + duration * n) clamped to the buffer"""
    start = int(offset_factor * audio.frames)
    stop = min(audio.frames, start + int(duration_factor * audio.frames))
    if stop <= start:
        raise TransformError(f"clip: window offset={offset_factor} duration={duration_factor} keeps no samples")
    return AudioBuffer(audio.samples[:, start:stop].copy(), audio.sample_rate)


@register("audio", "temporal", ix.loop_count("n"))
def loop(audio: AudioBuffer, n: Annotated[int, Field(ge=0)] = 1) -> AudioBuffer:
    """Append n extra repetitions: (n + 1) x duration"""
    return AudioBuffer(np.tile(audio.samples, (1, n + 1)), audio.sample_rate)


# ==================== SPECTRAL ====================

@register("audio", "spectral", ix.scaled("n_semitones", 24.0))
def pitch_shift(audio: AudioBuffer, n_semitones: Semitones = 1.0) -> AudioBuffer:
    """Shift pitch by n semitones keeping duration"""
    return _out(audio_dsp.pitch_shift(_as64(audio), n_semitones), audio)


@register("audio", "spectral", ix.constant(100))
def harmonic(audio: AudioBuffer, kernel_size: KernelSize = 17) -> AudioBuffer:
    """Keep the harmonic (time-stable) part via median-filter HPSS"""
    return _out(audio_dsp.separate(_as64(audio), kernel_size, "harmonic"), audio)


@register("audio", "spectral", ix.constant(100))
def percussive(audio: AudioBuffer, kernel_size: KernelSize = 17) -> AudioBuffer:
    """Keep the percussive (frequency-broad) part via median-filter HPSS"""
    return _out(audio_dsp.separate(_as64(audio), kernel_size, "percussive"), audio)


@register("audio", "spectral", filter_cutoff_low)
def low_pass_filter(audio: AudioBuffer, cutoff_hz: Frequency = 500.0) -> AudioBuffer:
    b, a = audio_dsp.low_pass_coefficients(cutoff_hz, audio.sample_rate)
    return _out(audio_dsp.biquad(audio.samples, b, a), audio)


@register("audio", "spectral", filter_cutoff_high)
def high_pass_filter(audio: AudioBuffer, cutoff_hz: Frequency = 3000.0) -> AudioBuffer:
    b, a = audio_dsp.high_pass_coefficients(cutoff_hz, audio.sample_rate)
    return _out(audio_dsp.biquad(audio.samples, b, a), audio)


@register("audio", "spectral", ix.scaled("gain_db", 24.0))
def peaking_equalizer(audio: AudioBuffer, center_hz: Frequency = 500.0, q: Positive = 1.0,
                      gain_db: float = -3.0) -> AudioBuffer:
    """Boost or cut gain_db around center_hz; gain_db=0 is a unity filter"""
    b, a = audio_dsp.peaking_coefficients(center_hz, q, gain_db, audio.sample_rate)
    return _out(audio_dsp.biquad(audio.samples, b, a), audio)


@register("audio", "spectral", reverb_strength)
def reverb(audio: AudioBuffer, room_size: Annotated[float, Field(ge=0.0, le=100.0)] = 50.0,
           wet_level: Fraction = 0.3) -> AudioBuffer:
    return _out(audio_dsp.schroeder_reverb(audio.samples, audio.sample_rate, room_size, wet_level), audio)


# ==================== MIXING ====================

@register("audio", "mixing", ix.snr_strength)
def add_background_noise(audio: AudioBuffer, background: Optional[Any] = None, snr_level_db: float = 10.0,
                         rng: Rng = None) -> AudioBuffer:
    """
    Mix in background noise at snr_level_db

    The background (white Gaussian noise when not given) is looped or
    truncated to the input length and scaled so that
    10*log10(P_signal / P_noise) equals snr_level_db; the sum saturates.
    """
    rng = rng or Rng(0)
    samples = _as64(audio)
    signal_power = float(np.mean(samples ** 2))
    if signal_power == 0:
        raise TransformError("add_background_noise: SNR is undefined for a silent input")
    if background is None:
        noise = rng.normal(0.0, 1.0, size=samples.shape)
    else:
        noise = tile_to(match_format(as_audio(background, audio.sample_rate), audio), audio.frames)
    noise_power = float(np.mean(noise ** 2))
    if noise_power == 0:
        raise TransformError("add_background_noise: background is silent")
    gain = np.sqrt(signal_power / (noise_power * 10.0 ** (snr_level_db / 10.0)))
    return _out(samples + gain * noise, audio)


@register("audio", "mixing", ix.constant(50))
def insert_in_background(audio: AudioBuffer, background: Optional[Any] = None, offset_factor: Fraction = 0.0,
                         rng: Rng = None) -> AudioBuffer:
    """
    Splice the input into a background track at offset_factor of its length

    Without a background, low-level noise as long as the input is used.
    """
    rng = rng or Rng(0)
    if background is None:
        bed = rng.normal(0.0, 0.01, size=audio.samples.shape)
    else:
        bed = match_format(as_audio(background, audio.sample_rate), audio)
    cut = int(offset_factor * bed.shape[-1])
    return _out(np.concatenate([bed[:, :cut], _as64(audio), bed[:, cut:]], axis=1), audio)


@register("audio", "mixing", ix.probability("amplitude"))
def clicks(audio: AudioBuffer, seconds_between_clicks: Positive = 0.5, amplitude: Fraction = 0.5) -> AudioBuffer:
    """Add a decaying 1 kHz click every seconds_between_clicks, starting at 0"""
    samples = _as64(audio)
    rate = audio.sample_rate
    length = max(1, int(CLICK_SECONDS * rate))
    t = np.arange(length) / rate
    click = amplitude * np.sin(2 * np.pi * CLICK_HZ * t) * np.exp(-t * 40.0)
    step = max(1, int(round(seconds_between_clicks * rate)))
    track = np.zeros(audio.frames)
    for start in range(0, audio.frames, step):
        stop = min(audio.frames, start + length)
        track[start:stop] += click[:stop - start]
    return _out(samples + track[np.newaxis, :], audio)


# ==================== CHANNEL ====================

@register("audio", "channel", ix.constant(100))
def to_mono(audio: AudioBuffer) -> AudioBuffer:
    """Mean of the channels"""
    return _out(_as64(audio).mean(axis=0, keepdims=True), audio)


@register("audio", "channel", ix.constant(100))
def invert_channels(audio: AudioBuffer) -> AudioBuffer:
    """Reverse channel order (left <-> right for stereo)"""
    return AudioBuffer(audio.samples[::-1].copy(), audio.sample_rate)


# ==================== UTILITY ====================

@register("audio", "utility", ix.volume_change)
def change_volume(audio: AudioBuffer, volume_db: float = 0.0) -> AudioBuffer:
    if volume_db == 0:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate)
    return _out(_as64(audio) * 10.0 ** (volume_db / 20.0), audio)


@register("audio", "utility", ix.constant(50))
def normalize(audio: AudioBuffer, target_peak: Annotated[float, Field(gt=0.0, le=1.0)] = 1.0) -> AudioBuffer:
    """Scale so max |sample| equals target_peak; silence stays silent"""
    samples = _as64(audio)
    peak = float(np.max(np.abs(samples)))
    if peak == 0:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate)
    return _out(samples / peak * target_peak, audio)


@register("audio", "utility", ix.constant(0))
def apply_lambda(audio: AudioBuffer, aug_function: Optional[Any] = None,
                 kwargs: Optional[Dict[str, Any]] = None) -> AudioBuffer:
    """Run a user callable (or "module:attr" path) on the buffer"""
    if aug_function is None:
        return AudioBuffer(audio.samples.copy(), audio.sample_rate)
    result = resolve_callable(aug_function)(audio, **(kwargs or {}))
    return result if isinstance(result, AudioBuffer) else as_audio(result, audio.sample_rate)
