"""
Test video transforms and the clip store
- temporal edits keep audio on the frame timeline
- augment_audio nesting and length restore
- per-frame image delegates
- stacking, blending, shapes and background composites
- clip directory round trip and transcoder errors
- lazy frame sequences with a bounded resident window
"""
import gc
import sys
import weakref

import numpy as np
import pytest

from conftest import make_clip, make_raster
from models.media_models import LazyFrames, VideoClip
from models.transform_models import TransformSpec
from services import clip_store
from services.augmentation_core import apply_with_probability
from services.video_augmentations import per_frame
from utils import config
from utils.errors import MediaIOError, ParamValidationError, TransformError


def run(name, clip, seed=0, **params):
    out, meta = apply_with_probability(TransformSpec(name=name, params=params), clip, seed, modality="video")
    return out


def audio_in_sync(clip):
    return clip.audio.frames == int(round(clip.duration * clip.audio.sample_rate))


class TestTemporal:
    """Frame and audio timelines"""

    def test_time_crop_ten_seconds(self):
        clip = make_clip(frames=50, fps=5.0)
        out = run("time_crop", clip, offset_factor=0.2, duration_factor=0.4)
        assert out.frame_count == 20
        assert out.duration == pytest.approx(4.0)
        assert out.frames[0] == clip.frames[10]
        assert audio_in_sync(out)
        start = clip.audio_frames_for(10)
        assert np.array_equal(out.audio.samples, clip.audio.samples[:, start:start + out.audio.frames])
        print("✓ time_crop(0.2, 0.4) of a 10 s clip keeps seconds 2..6 with audio")

    def test_time_crop_window_validated(self, clip):
        with pytest.raises(ParamValidationError):
            run("time_crop", clip, offset_factor=0.8, duration_factor=0.5)
        print("✓ offset + duration > 1 rejected")

    def test_trim(self):
        clip = make_clip(frames=20, fps=5.0)
        out = run("trim", clip, start_s=1.0, end_s=3.0)
        assert out.frame_count == 10 and audio_in_sync(out)
        with pytest.raises(ParamValidationError):
            run("trim", clip, start_s=3.0, end_s=1.0)
        print("✓ trim keeps [start_s, end_s)")

    def test_loop_zero_is_identity(self, clip):
        assert run("loop", clip, num_loops=0) == clip
        out = run("loop", clip, num_loops=2)
        assert out.frame_count == 3 * clip.frame_count and audio_in_sync(out)
        print("✓ loop(0) is the identity, loop(2) triples")

    def test_speed_and_fps(self, clip):
        fast = run("change_video_speed", clip, factor=2.0)
        assert fast.frame_count == clip.frame_count // 2 and audio_in_sync(fast)
        resampled = run("fps", clip, fps=10.0)
        assert resampled.frame_count == 2 * clip.frame_count
        assert resampled.duration == pytest.approx(clip.duration)
        print("✓ change_video_speed halves, fps keeps duration")

    def test_shift_and_decimate(self, clip):
        shifted = run("shift", clip, offset_factor=0.2, color=(0, 0, 0))
        assert shifted.frame_count == clip.frame_count
        assert np.all(shifted.frames[0].pixels == 0)
        assert shifted.frames[2] == clip.frames[0]
        decimated = run("time_decimate", clip, on_s=0.5, off_s=0.5)
        assert decimated.frame_count == 6 and audio_in_sync(decimated)
        print("✓ shift delays content, time_decimate drops the off periods")


class TestAudioTrack:
    """Soundtrack ops"""

    def test_augment_audio_tempo(self, clip):
        out, meta = apply_with_probability(
            TransformSpec(name="augment_audio", params={"pipeline": [{"op": "tempo", "params": {"factor": 2.0}}]}),
            clip, 0, modality="video")
        assert out.audio.frames == clip.audio.frames
        half = clip.audio.frames // 2
        assert np.all(out.audio.samples[:, half + 1:] == 0)
        assert len(meta.children) == 1
        assert meta.children[0].name == "tempo"
        assert meta.intensity == 50.0
        print("✓ tempo(2) inside augment_audio is padded back and nested in metadata")

    def test_augment_audio_needs_track(self):
        with pytest.raises(TransformError):
            run("augment_audio", make_clip(with_audio=False), pipeline=[{"op": "to_mono"}])
        print("✓ augment_audio on a silent clip is a transform error")

    def test_augment_audio_validates_pipeline(self, clip):
        with pytest.raises(ParamValidationError):
            run("augment_audio", clip, pipeline=[{"op": "tempo", "params": {"factor": -1}}])
        print("✓ Inner audio pipeline validated with the outer one")

    def test_remove_and_swap(self, clip):
        assert run("remove_audio", clip).audio is None
        swapped = run("audio_swap", make_clip(with_audio=False))
        assert swapped.audio is not None and audio_in_sync(swapped)
        print("✓ remove_audio drops the track, audio_swap adds a fitted one")


class TestPerFrame:
    """Image delegates"""

    def test_hflip_twice(self, clip):
        assert per_frame({"op": "hflip"}, per_frame({"op": "hflip"}, clip, 0), 1) == clip
        print("✓ per_frame hflip twice restores the clip")

    def test_rotate_swaps_dims(self, clip):
        out = run("rotate", clip, degrees=90)
        assert (out.width, out.height) == (clip.height, clip.width)
        assert out.frame_count == clip.frame_count
        assert out.audio == clip.audio
        print("✓ rotate(90) swaps frame dims and keeps audio")

    def test_noise_differs_per_frame(self):
        clip = make_clip(frames=2)
        clip.frames[1] = clip.frames[0]
        out = run("add_noise", clip, var=0.05)
        assert out.frames[0] != out.frames[1]
        print("✓ add_noise draws a new stream for every frame")

    def test_per_frame_commutes_with_time_crop(self, clip):
        spec = {"op": "blur", "params": {"radius": 1.0}}
        cropped_first = per_frame(spec, run("time_crop", clip, offset_factor=0.2, duration_factor=0.5), 3)
        filtered_first = run("time_crop", per_frame(spec, clip, 3), offset_factor=0.2, duration_factor=0.5)
        assert cropped_first == filtered_first
        assert cropped_first.frame_count == 5
        print("✓ per_frame blur and time_crop commute frame for frame")


class TestComposite:
    """Stacks and overlays"""

    def test_hstack(self):
        clip = make_clip(frames=2, width=100, height=100)
        out = run("hstack", clip, other=make_clip(frames=2, width=100, height=100))
        assert (out.width, out.height, out.frame_count) == (200, 100, 2)
        out = run("vstack", clip)
        assert (out.width, out.height) == (100, 200)
        print("✓ hstack/vstack dims")

    def test_stack_mismatch(self):
        clip = make_clip(frames=2, width=100, height=100)
        with pytest.raises(TransformError):
            run("hstack", clip, other=make_clip(frames=2, width=100, height=50))
        with pytest.raises(TransformError):
            run("vstack", clip, other=make_clip(frames=2, width=50, height=100))
        print("✓ Mismatched stack dims rejected")

    def test_concat(self, clip):
        other = make_clip(frames=8, fps=10.0, with_audio=False)
        out = run("concat", clip, others=[other], src_index=1)
        assert out.frame_count == clip.frame_count + 4
        assert out.frames[-1] == clip.frames[-1]
        assert audio_in_sync(out)
        with pytest.raises(TransformError):
            run("concat", clip, others=[make_clip(frames=2, width=8, height=8)])
        print("✓ concat conforms frame rate and audio, rejects other dims")

    def test_color_frames_window(self, clip):
        out = run("replace_with_color_frames", clip, offset_factor=0.5, duration_factor=0.5, color=(0, 0, 0))
        assert out.frames[0] == clip.frames[0]
        assert all(np.all(f.pixels == 0) for f in out.frames[5:])
        print("✓ replace_with_color_frames fills the window")

    def test_replace_with_background_default(self, clip):
        out = run("replace_with_background", clip)
        assert all(np.all(f.pixels == 128) for f in out.frames[:5])
        assert out.frames[5:] == clip.frames[5:]
        assert out.audio == clip.audio
        print("✓ replace_with_background fills the window with gray, audio untouched")

    def test_blend_videos_endpoints(self, clip):
        assert run("blend_videos", clip, opacity=0.0).frames == clip.frames
        reversed_mix = run("blend_videos", clip, opacity=1.0)
        assert reversed_mix.frames[0] == clip.frames[-1]
        assert reversed_mix.frames[-1] == clip.frames[0]
        assert audio_in_sync(reversed_mix)
        print("✓ blend_videos: opacity 0 is the input, 1 is the reversed clip")

    def test_overlay_shapes_static_rectangle(self, clip):
        out = run("overlay_shapes", clip, seed=2, shape_type="rectangle", color=(255, 0, 0), size=0.5)
        masks = [np.any(o.pixels != i.pixels, axis=-1) for o, i in zip(out.frames, clip.frames)]
        red = [np.all(o.pixels == (255, 0, 0), axis=-1) for o in out.frames]
        for mask, hit in zip(masks, red):
            assert hit.sum() == 36
            assert np.array_equal(hit, red[0])
            assert not np.any(mask & ~hit)
        print("✓ overlay_shapes draws one 6x6 rectangle at the same place on every frame")

    def test_overlay_onto_background_video(self, clip):
        out = run("overlay_onto_background_video", clip)
        assert (out.width, out.height) == (clip.width, clip.height)
        assert np.all(out.frames[0].pixels[0, 0] == 128)
        assert np.all(out.frames[0].pixels[-1, -1] == 128)
        assert out.frames[0] != clip.frames[0]
        print("✓ Frames scaled onto a gray canvas of the same size")


class TestClipStore:
    """Clip directories and the transcoder bridge"""

    def test_round_trip(self, clip, tmp_path):
        clip_store.save_clip_dir(clip, tmp_path / "clip")
        manifest = clip_store.read_manifest(tmp_path / "clip")
        assert manifest["frame_count"] == clip.frame_count
        assert clip_store.load_clip_dir(tmp_path / "clip") == clip
        print("✓ Clip directory round trip is exact")

    def test_missing_frame(self, clip, tmp_path):
        clip_store.save_clip_dir(clip, tmp_path / "clip")
        clip_store.frame_path(tmp_path / "clip", 3).unlink()
        with pytest.raises(MediaIOError):
            clip_store.load_clip_dir(tmp_path / "clip")
        print("✓ Missing frame is an I/O error")

    def test_frames_stream_through_a_bounded_window(self, tmp_path, monkeypatch):
        source = make_clip(frames=40, width=8, height=8)
        clip_store.save_clip_dir(source, tmp_path / "in")
        loaded = []
        read, write = clip_store.load_image, clip_store.save_image

        def tracked_read(path):
            frame = read(path)
            loaded.append(weakref.ref(frame))
            return frame

        peaks = []

        def watched_write(frame, path):
            gc.collect()
            peaks.append(sum(ref() is not None for ref in loaded))
            return write(frame, path)

        monkeypatch.setattr(clip_store, "load_image", tracked_read)
        monkeypatch.setattr(clip_store, "save_image", watched_write)
        clip = clip_store.load_clip_dir(tmp_path / "in")
        out = run("vflip", run("hflip", clip))
        out = run("loop", run("time_crop", out, offset_factor=0.5, duration_factor=0.5), num_loops=1)
        clip_store.save_clip_dir(out, tmp_path / "out")
        assert out.frame_count == 40 and audio_in_sync(out)
        assert len(loaded) >= 20
        assert max(peaks) <= config.FRAME_WINDOW < source.frame_count
        monkeypatch.undo()
        written = clip_store.load_clip_dir(tmp_path / "out")
        assert written.frames[0].pixels.tolist() == source.frames[20].pixels[::-1, ::-1].tolist()
        assert written.frames[20] == written.frames[0]
        print(f"✓ A 40-frame clip streamed with at most {max(peaks)} decoded frames resident")

    def test_lazy_frames_window(self):
        produced = []
        frames = LazyFrames(10, lambda index: produced.append(index) or make_raster(4, 4, seed=index), window=3)
        assert [f for f in frames] == [make_raster(4, 4, seed=i) for i in range(10)]
        assert frames.resident == 3
        frames[9]
        frames[0]
        assert produced == list(range(10)) + [0]
        assert frames[::-1][0] == frames[9]
        print("✓ LazyFrames keeps a bounded window and reproduces evicted frames")

    def test_lazy_frames_reject_mismatched_dims(self):
        frames = LazyFrames(2, lambda index: make_raster(4 + index, 4))
        clip = VideoClip(frames, 5.0)
        with pytest.raises(TransformError):
            list(clip.frames)
        print("✓ A lazily produced frame of the wrong size is a transform error")

    def test_transcoder_required(self, tmp_path):
        (tmp_path / "movie.mp4").write_bytes(b"")
        with pytest.raises(MediaIOError):
            clip_store.load_video(tmp_path / "movie.mp4", clip_store.TranscoderBridge(""))
        print("✓ Encoded video without a transcoder is an I/O error")

    def test_transcoder_failure(self, clip, tmp_path):
        bridge = clip_store.TranscoderBridge(f'"{sys.executable}" -c "import sys; sys.exit(3)"')
        with pytest.raises(MediaIOError):
            clip_store.save_video(clip, tmp_path / "out.mp4", bridge)
        print("✓ Non-zero transcoder exit is an I/O error")
