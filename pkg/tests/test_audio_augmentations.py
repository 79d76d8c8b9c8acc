"""
Test audio transforms
- STFT round trip and phase vocoder: pitch shift, time stretch, tempo
- biquad filters and reverb, including its peak bound
- harmonic/percussive separation
- background noise SNR
- lengths of loop, speed and clip
- WAV/raw round trip through media_io
"""
import numpy as np
import pytest

from conftest import make_clicks, make_tone, peak_frequency
from models.media_models import AudioBuffer
from models.transform_models import TransformSpec
from services import audio_dsp, media_io
from services.augmentation_core import apply_with_probability
from utils.errors import MediaIOError, TransformError


def run(name, audio, seed=0, **params):
    out, _ = apply_with_probability(TransformSpec(name=name, params=params), audio, seed, modality="audio")
    return out


def rms_db(samples):
    return 10 * np.log10(np.mean(np.asarray(samples, dtype=np.float64) ** 2))


class TestPhaseVocoder:
    """Duration and pitch changes"""

    def test_pitch_shift_octave(self, tone):
        out = run("pitch_shift", tone, n_semitones=12)
        assert out.frames == tone.frames
        peak = peak_frequency(out.samples[0], out.sample_rate)
        assert abs(peak - 880.0) / 880.0 < 0.03
        print(f"✓ +12 semitones moves 440 Hz to {peak:.1f} Hz")

    def test_pitch_shift_octave_down(self):
        high = make_tone(880.0)
        out = run("pitch_shift", high, n_semitones=-12)
        peak = peak_frequency(out.samples[0], out.sample_rate)
        assert abs(peak - 440.0) / 440.0 < 0.03
        print(f"✓ -12 semitones moves 880 Hz to {peak:.1f} Hz")

    def test_stft_round_trip(self):
        samples = np.random.default_rng(0).uniform(-1.0, 1.0, (2, 22050))
        assert audio_dsp.HOP_SIZE * 4 == audio_dsp.WINDOW_SIZE
        restored = audio_dsp.Stft.forward(samples).inverse()
        assert restored.shape == samples.shape
        assert np.sqrt(np.mean((restored - samples) ** 2)) < 1e-6
        print("✓ Hann STFT at 75% overlap inverts to within 1e-6 RMS")

    def test_time_stretch_halves(self, tone):
        out = run("time_stretch", tone, rate=2.0)
        assert abs(out.frames - tone.frames / 2) <= audio_dsp.HOP_SIZE
        peak = peak_frequency(out.samples[0], out.sample_rate)
        assert abs(peak - 440.0) / 440.0 < 0.02
        print(f"✓ rate 2 halves duration ({out.frames} samples), pitch stays at {peak:.1f} Hz")

    def test_tempo_halves(self, tone):
        out = run("tempo", tone, factor=2.0)
        assert out.frames == round(tone.frames / 2)
        print("✓ tempo(2) halves duration")

    def test_unit_rate_keeps_length(self, tone):
        out = run("time_stretch", tone, rate=1.0)
        assert out.frames == tone.frames
        assert np.allclose(out.samples, tone.samples, atol=1e-4)
        print("✓ rate 1 reconstructs the input")

    def test_too_short_for_window(self):
        with pytest.raises(TransformError):
            run("pitch_shift", make_tone(seconds=0.05), n_semitones=2)
        print("✓ Input shorter than one window is a transform error")


class TestFilters:
    """Biquad responses"""

    def test_low_pass_attenuates(self):
        tone = make_tone(5000.0, seconds=1.0)
        out = run("low_pass_filter", tone, cutoff_hz=500.0)
        tail = slice(tone.frames // 2, None)
        drop = rms_db(tone.samples[:, tail]) - rms_db(out.samples[:, tail])
        assert drop >= 30.0
        print(f"✓ 500 Hz low-pass attenuates 5 kHz by {drop:.1f} dB")

    def test_high_pass_keeps_high(self):
        tone = make_tone(8000.0)
        out = run("high_pass_filter", tone, cutoff_hz=1000.0)
        tail = slice(tone.frames // 2, None)
        assert abs(rms_db(tone.samples[:, tail]) - rms_db(out.samples[:, tail])) < 1.0
        print("✓ High-pass passes content well above cutoff")

    def test_zero_gain_eq_is_unity(self, tone):
        out = run("peaking_equalizer", tone, gain_db=0.0)
        assert np.allclose(out.samples, tone.samples, atol=1e-6)
        print("✓ 0 dB peaking EQ is a unity filter")

    def test_reverb_tail(self):
        click = make_clicks(seconds=1.0, every_s=2.0)
        dry = run("reverb", click, wet_level=0.0)
        assert np.array_equal(dry.samples, click.samples)
        wet = run("reverb", click, room_size=80.0, wet_level=0.5)
        tail = wet.samples[0, int(0.1 * click.sample_rate):]
        assert wet.frames == click.frames
        assert np.abs(tail).max() > 1e-4
        print("✓ Reverb leaves a tail after an impulse, dry at wet_level 0")

    def test_reverb_never_louder_than_input(self):
        loud = make_tone(amplitude=0.9)
        for room_size in (0.0, 50.0, 100.0):
            out = run("reverb", loud, room_size=room_size, wet_level=1.0)
            assert np.abs(out.samples).max() <= np.abs(loud.samples).max() + 1e-6
        clicks = make_clicks(every_s=0.05)
        out = run("reverb", clicks, room_size=100.0, wet_level=0.7)
        assert np.abs(out.samples).max() <= np.abs(clicks.samples).max() + 1e-6
        print("✓ Full-size, fully wet reverb never peaks above the dry input")

    def test_cutoff_above_nyquist(self, tone):
        with pytest.raises(TransformError):
            run("low_pass_filter", tone, cutoff_hz=20000.0)
        print("✓ Cutoff at or above Nyquist rejected")


class TestSeparation:
    """Median-filter HPSS"""

    def test_masks_sum_to_one(self):
        magnitude = np.abs(np.random.default_rng(0).normal(size=(2, 65, 40)))
        magnitude[0, :10, :10] = 0.0
        harmonic, percussive = audio_dsp.hpss_masks(magnitude, 17)
        assert np.allclose(harmonic + percussive, 1.0)
        assert np.all((harmonic >= 0) & (harmonic <= 1))
        print("✓ Harmonic and percussive masks sum to 1 in every bin")

    def test_clicks_are_percussive(self):
        clicks = make_clicks()
        out = run("percussive", clicks)
        ratio = np.sum(out.samples.astype(np.float64) ** 2) / np.sum(clicks.samples.astype(np.float64) ** 2)
        assert ratio >= 0.8
        print(f"✓ Percussive part keeps {ratio:.2f} of a click train's energy")

    def test_tone_is_harmonic(self, tone):
        out = run("harmonic", tone)
        tail = slice(tone.frames // 4, 3 * tone.frames // 4)
        assert rms_db(tone.samples[:, tail]) - rms_db(out.samples[:, tail]) < 1.0
        print("✓ Harmonic part keeps a steady tone")


class TestMixing:
    """Noise, splicing and clicks"""

    def test_snr_zero_db(self):
        tone = make_tone(amplitude=0.1)
        out = run("add_background_noise", tone, seed=3, snr_level_db=0.0)
        noise = out.samples.astype(np.float64) - tone.samples
        assert abs(rms_db(tone.samples) - rms_db(noise)) < 0.1
        print("✓ 0 dB SNR gives equal signal and noise power")

    def test_silent_input(self):
        with pytest.raises(TransformError):
            run("add_background_noise", AudioBuffer.silence(4000, 1, 8000))
        print("✓ SNR on a silent input is a transform error")

    def test_background_looped_and_resampled(self, tone):
        background = make_tone(100.0, seconds=0.1, sample_rate=11025, channels=2)
        out = run("add_background_noise", tone, background=background, snr_level_db=20.0)
        assert out.frames == tone.frames and out.channels == tone.channels
        print("✓ Background matched to the input's rate, channels and length")

    def test_insert_in_background(self, tone):
        background = make_tone(100.0, seconds=0.5)
        out = run("insert_in_background", tone, background=background, offset_factor=0.5)
        assert out.frames == tone.frames + background.frames
        cut = background.frames // 2
        assert np.array_equal(out.samples[:, cut:cut + tone.frames], tone.samples)
        print("✓ Input spliced into the background at the offset")

    def test_clicks_added(self):
        silence = AudioBuffer.silence(22050, 1, 22050)
        out = run("clicks", silence, seconds_between_clicks=0.25, amplitude=0.5)
        assert np.max(np.abs(out.samples)) > 0.3
        assert np.count_nonzero(out.samples) > 0
        print("✓ Clicks added onto silence")


class TestLengthsAndChannels:
    """Temporal lengths and channel ops"""

    def test_loop(self, tone):
        assert run("loop", tone, n=2).frames == 3 * tone.frames
        assert run("loop", tone, n=0) == tone
        print("✓ loop(n) gives (n + 1) x duration")

    def test_speed(self, tone):
        out = run("speed", tone, factor=2.0)
        assert abs(out.frames - tone.frames / 2) <= 1
        peak = peak_frequency(out.samples[0], out.sample_rate)
        assert abs(peak - 880.0) / 880.0 < 0.02
        print(f"✓ speed(2) halves duration and doubles pitch ({peak:.1f} Hz)")

    def test_clip_window(self, tone):
        out = run("clip", tone, offset_factor=0.25, duration_factor=0.5)
        assert out.frames == tone.frames // 2
        assert np.array_equal(out.samples, tone.samples[:, tone.frames // 4:tone.frames // 4 + out.frames])
        with pytest.raises(TransformError):
            run("clip", tone, offset_factor=1.0, duration_factor=0.5)
        print("✓ clip keeps the window, empty window rejected")

    def test_channels(self):
        stereo = AudioBuffer(np.stack([np.full(100, 0.2), np.full(100, -0.4)]).astype(np.float32), 8000)
        mono = run("to_mono", stereo)
        assert mono.channels == 1 and np.allclose(mono.samples, -0.1)
        swapped = run("invert_channels", stereo)
        assert np.array_equal(swapped.samples[0], stereo.samples[1])
        print("✓ to_mono averages, invert_channels swaps")

    def test_volume_and_normalize(self, tone):
        quieter = run("change_volume", tone, volume_db=-6.0)
        assert abs((rms_db(tone.samples) - rms_db(quieter.samples)) - 6.0) < 0.01
        normalized = run("normalize", tone, target_peak=0.8)
        assert abs(np.max(np.abs(normalized.samples)) - 0.8) < 1e-6
        print("✓ change_volume and normalize scale as asked")


class TestAudioIO:
    """WAV subtype and raw float round trips"""

    def test_wav_subtype_preserved(self, tone, tmp_path):
        source = tmp_path / "in.wav"
        media_io.save_audio(tone, source, "PCM_16")
        loaded = media_io.load_media(source)
        assert loaded.audio_subtype == "PCM_16"
        target = media_io.save_media(run("change_volume", loaded.datum, volume_db=-3), tmp_path / "out.wav",
                                     loaded.audio_subtype)
        _, subtype = media_io.load_audio(target)
        assert subtype == "PCM_16"
        print("✓ Output WAV keeps the input's PCM_16 subtype")

    def test_raw_f32le(self, tmp_path):
        stereo = make_tone(seconds=0.1, channels=2)
        path = media_io.save_audio(stereo, tmp_path / "tone.f32le")
        audio, subtype = media_io.load_audio(path, sample_rate=22050, channels=2)
        assert subtype is None
        assert np.array_equal(audio.samples, stereo.samples)
        with pytest.raises(MediaIOError):
            media_io.load_audio(path)
        print("✓ Raw float-32 round trip needs a sample rate")
