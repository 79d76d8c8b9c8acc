"""
Audio DSP building blocks

STFT with a Hann window (2048 / hop 512), phase vocoder time-scale
modification, median-filter harmonic/percussive separation, RBJ cookbook
biquads and a Schroeder reverberator. Everything works on float64
(channels, frames) arrays and never modifies its input.
"""

import math
from typing import Tuple

import numpy as np
from scipy import signal
from scipy.ndimage import median_filter

from utils.errors import TransformError

WINDOW_SIZE = 2048
HOP_SIZE = 512
BUTTERWORTH_Q = 1.0 / math.sqrt(2.0)

# Schroeder reverberator delay lines, in milliseconds
COMB_DELAYS_MS = (29.7, 37.1, 41.1, 43.7)
ALLPASS_DELAYS_MS = (5.0, 1.7)
ALLPASS_GAIN = 0.7


# ==================== STFT ====================

class Stft:
    """Complex spectra shaped (channels, bins, frames) plus what is needed to invert them"""

    def __init__(self, spectra: np.ndarray, window_size: int, hop_size: int, length: int):
        self.spectra = spectra
        self.window_size = window_size
        self.hop_size = hop_size
        self.length = length

    @classmethod
    def forward(cls, samples: np.ndarray, window_size: int = WINDOW_SIZE, hop_size: int = HOP_SIZE) -> "Stft":
        samples = np.asarray(samples, dtype=np.float64)
        if samples.shape[-1] < window_size:
            raise TransformError(
                f"audio of {samples.shape[-1]} samples is shorter than one {window_size}-sample window"
            )
        _, _, spectra = signal.stft(samples, window="hann", nperseg=window_size,
                                    noverlap=window_size - hop_size, boundary="zeros", padded=True)
        return cls(spectra, window_size, hop_size, samples.shape[-1])

    @property
    def frame_count(self) -> int:
        return self.spectra.shape[-1]

    def with_spectra(self, spectra: np.ndarray, length: int = None) -> "Stft":
        return Stft(spectra, self.window_size, self.hop_size, self.length if length is None else length)

    def inverse(self) -> np.ndarray:
        """Overlap-add back to exactly `length` samples per channel"""
        _, samples = signal.istft(self.spectra, window="hann", nperseg=self.window_size,
                                  noverlap=self.window_size - self.hop_size, boundary=True)
        return fit_length(np.real(samples), self.length)


def fit_length(samples: np.ndarray, length: int) -> np.ndarray:
    if samples.shape[-1] >= length:
        return samples[..., :length]
    pad = [(0, 0)] * (samples.ndim - 1) + [(0, length - samples.shape[-1])]
    return np.pad(samples, pad)


# ==================== PHASE VOCODER ====================

def phase_vocoder(stft: Stft, rate: float) -> np.ndarray:
    """
    Time-scale STFT frames by `rate` (> 1 is faster) with phase propagation

    Magnitudes are linearly interpolated between neighbouring analysis frames;
    phases advance by each bin's expected advance plus the measured deviation.
    """
    spectra = stft.spectra
    bins = spectra.shape[-2]
    time_steps = np.arange(0, stft.frame_count, rate, dtype=np.float64)
    expected_advance = np.linspace(0, np.pi * stft.hop_size, bins)
    padded = np.pad(spectra, [(0, 0), (0, 0), (0, 2)])
    out = np.zeros(spectra.shape[:-1] + (len(time_steps),), dtype=np.complex128)
    phase = np.angle(spectra[..., 0])
    for index, step in enumerate(time_steps):
        left = padded[..., int(step)]
        right = padded[..., int(step) + 1]
        alpha = step - int(step)
        magnitude = (1.0 - alpha) * np.abs(left) + alpha * np.abs(right)
        out[..., index] = magnitude * np.exp(1j * phase)
        deviation = np.angle(right) - np.angle(left) - expected_advance
        deviation -= 2.0 * np.pi * np.round(deviation / (2.0 * np.pi))
        phase = phase + expected_advance + deviation
    return out


def time_stretch(samples: np.ndarray, rate: float) -> np.ndarray:
    """Change duration by 1/rate keeping pitch; output has round(n / rate) samples"""
    if rate <= 0:
        raise TransformError(f"time_stretch rate must be > 0, got {rate}")
    stft = Stft.forward(samples)
    target = max(1, int(round(stft.length / rate)))
    if rate == 1.0:
        return stft.inverse()
    return stft.with_spectra(phase_vocoder(stft, rate), length=target).inverse()


def pitch_shift(samples: np.ndarray, n_semitones: float) -> np.ndarray:
    """Stretch by 2^(-n/12), then resample back to the original length"""
    length = samples.shape[-1]
    stretched = time_stretch(samples, 2.0 ** (-n_semitones / 12.0))
    if stretched.shape[-1] == length:
        return stretched
    return signal.resample(stretched, length, axis=-1)


# ==================== HARMONIC / PERCUSSIVE ====================

def hpss_masks(magnitude: np.ndarray, kernel_size: int = 17) -> Tuple[np.ndarray, np.ndarray]:
    """
    Soft (power 2) harmonic and percussive masks for a (channels, bins, frames) magnitude

    Harmonic content is the median across time, percussive across frequency.
    The masks sum to exactly 1 in every bin; bins where both medians vanish
    are split evenly.
    """
    harmonic = median_filter(magnitude, size=(1, 1, kernel_size), mode="reflect")
    percussive = median_filter(magnitude, size=(1, kernel_size, 1), mode="reflect")
    h2, p2 = harmonic ** 2, percussive ** 2
    total = h2 + p2
    harmonic_mask = np.full(magnitude.shape, 0.5)
    np.divide(h2, total, out=harmonic_mask, where=total > 0)
    return harmonic_mask, 1.0 - harmonic_mask


def separate(samples: np.ndarray, kernel_size: int = 17, component: str = "harmonic") -> np.ndarray:
    stft = Stft.forward(samples)
    harmonic_mask, percussive_mask = hpss_masks(np.abs(stft.spectra), kernel_size)
    mask = harmonic_mask if component == "harmonic" else percussive_mask
    return stft.with_spectra(stft.spectra * mask).inverse()


# ==================== BIQUADS ====================

def _check_frequency(frequency: float, sample_rate: int) -> None:
    if not (0 < frequency < sample_rate / 2.0):
        raise TransformError(f"frequency {frequency} Hz must be in (0, {sample_rate / 2.0}) at {sample_rate} Hz")


def low_pass_coefficients(cutoff_hz: float, sample_rate: int, q: float = BUTTERWORTH_Q) -> Tuple[np.ndarray, np.ndarray]:
    _check_frequency(cutoff_hz, sample_rate)
    w0 = 2.0 * math.pi * cutoff_hz / sample_rate
    alpha = math.sin(w0) / (2.0 * q)
    cos_w0 = math.cos(w0)
    b = np.array([(1 - cos_w0) / 2, 1 - cos_w0, (1 - cos_w0) / 2])
    a = np.array([1 + alpha, -2 * cos_w0, 1 - alpha])
    return b / a[0], a / a[0]


def high_pass_coefficients(cutoff_hz: float, sample_rate: int, q: float = BUTTERWORTH_Q) -> Tuple[np.ndarray, np.ndarray]:
    _check_frequency(cutoff_hz, sample_rate)
    w0 = 2.0 * math.pi * cutoff_hz / sample_rate
    alpha = math.sin(w0) / (2.0 * q)
    cos_w0 = math.cos(w0)
    b = np.array([(1 + cos_w0) / 2, -(1 + cos_w0), (1 + cos_w0) / 2])
    a = np.array([1 + alpha, -2 * cos_w0, 1 - alpha])
    return b / a[0], a / a[0]


def peaking_coefficients(center_hz: float, q: float, gain_db: float, sample_rate: int) -> Tuple[np.ndarray, np.ndarray]:
    _check_frequency(center_hz, sample_rate)
    w0 = 2.0 * math.pi * center_hz / sample_rate
    alpha = math.sin(w0) / (2.0 * q)
    amplitude = 10.0 ** (gain_db / 40.0)
    cos_w0 = math.cos(w0)
    b = np.array([1 + alpha * amplitude, -2 * cos_w0, 1 - alpha * amplitude])
    a = np.array([1 + alpha / amplitude, -2 * cos_w0, 1 - alpha / amplitude])
    return b / a[0], a / a[0]


def biquad(samples: np.ndarray, b: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Direct-form filter per channel from zero initial state"""
    return signal.lfilter(b, a, np.asarray(samples, dtype=np.float64), axis=-1)


# ==================== REVERB ====================

def feedback_delay(samples: np.ndarray, delay: int, gain: float) -> np.ndarray:
    """y[n] = x[n] + gain * y[n - delay], computed one delay-length block at a time"""
    out = np.array(samples, dtype=np.float64, copy=True)
    for start in range(delay, out.shape[-1], delay):
        stop = min(start + delay, out.shape[-1])
        out[..., start:stop] += gain * out[..., start - delay:stop - delay]
    return out


def allpass(samples: np.ndarray, delay: int, gain: float) -> np.ndarray:
    looped = feedback_delay(samples, delay, gain)
    delayed = np.zeros_like(looped)
    delayed[..., delay:] = looped[..., :-delay]
    return -gain * looped + delayed


def schroeder_reverb(samples: np.ndarray, sample_rate: int, room_size: float, wet_level: float) -> np.ndarray:
    """
    Four parallel feedback combs into two series allpasses

    room_size (0..100) sets the comb feedback between 0.70 and 0.98; the
    wet signal is mixed with the dry one at wet_level. Comb inputs are scaled
    by (1 - feedback) and the wet signal is capped at the dry peak, so the
    output never peaks above the input.
    """
    dry = np.asarray(samples, dtype=np.float64)
    if wet_level == 0:
        return dry.copy()
    feedback = 0.7 + 0.28 * room_size / 100.0
    wet = np.zeros_like(dry)
    for delay_ms in COMB_DELAYS_MS:
        delay = max(1, int(round(delay_ms * sample_rate / 1000.0)))
        wet += feedback_delay((1.0 - feedback) * dry, delay, feedback)
    wet /= len(COMB_DELAYS_MS)
    for delay_ms in ALLPASS_DELAYS_MS:
        wet = allpass(wet, max(1, int(round(delay_ms * sample_rate / 1000.0))), ALLPASS_GAIN)
    dry_peak, wet_peak = np.abs(dry).max(initial=0.0), np.abs(wet).max(initial=0.0)
    if wet_peak > dry_peak:
        wet *= dry_peak / wet_peak
    return (1.0 - wet_level) * dry + wet_level * wet
