"""Extractor tests: sampling policies, emitted-pack validity under the
ranking engine's strict loader, and the CLI."""

import json
import subprocess
import sys
import wave
from pathlib import Path

import cv2
import numpy as np
import pytest

from shotmatch_extractors.boundaries import Shot, read_shot_csv
from shotmatch_extractors.encoders import (
    AUDIO_SAMPLE_RATE,
    MeanFrameClipEncoder,
    SpectrumWindowEncoder,
    TinyImageEncoder,
    audio_shot_embedding,
    read_wav_mono_16k,
)
from shotmatch_extractors.extract import ExtractorSpec, extract
from shotmatch_extractors.faces import BrightBlobFaceCounter
from shotmatch_extractors.frames import (
    FrameSource,
    center_frame_offset,
    every_nth_offsets,
    fps_capped_offsets,
    multi_view_offsets,
)
from shotmatch_extractors.masks import (
    BrightBlobSegmenter,
    person_masks_from_detections,
)


class IndexProbeEncoder:
    """Image 'encoder' that reads back the frame index painted into pixel 0,0."""

    name = "custom:index-probe"
    dim = 1
    model_id = "index-probe"

    def embed_image(self, rgb):
        return np.array([float(rgb[0, 0, 0])])


def paint_frame_dir(tmp_path, n_frames, size=32) -> Path:
    """Frames whose top-left pixel encodes the frame index."""
    d = tmp_path / "frames"
    d.mkdir()
    for i in range(n_frames):
        frame = np.full((size, size, 3), 40, dtype=np.uint8)
        frame[0, 0] = i
        cv2.imwrite(str(d / f"f{i:05d}.png"), frame)
    return d


def write_shots_csv(path, shots):
    lines = ["shot_index,start_frame,end_frame"]
    lines += [f"{s.shot_index},{s.start_frame},{s.end_frame}" for s in shots]
    Path(path).write_text("\n".join(lines) + "\n")


# -- boundaries ---------------------------------------------------------------


def test_read_shot_csv(tmp_path):
    csv_path = tmp_path / "shots.csv"
    write_shots_csv(csv_path, [Shot(1, 0, 5), Shot(2, 5, 9), Shot(3, 9, 20)])
    shots = read_shot_csv(csv_path)
    assert [s.frame_count for s in shots] == [5, 4, 11]


def test_read_shot_csv_rejects_gaps(tmp_path):
    csv_path = tmp_path / "shots.csv"
    write_shots_csv(csv_path, [Shot(1, 0, 5), Shot(2, 6, 9)])
    with pytest.raises(ValueError, match="contiguous"):
        read_shot_csv(csv_path)


# -- center frame and sampling --------------------------------------------


def test_center_frame_offset_odd_and_even():
    assert center_frame_offset(5) == 2
    assert center_frame_offset(4) == 2
    assert center_frame_offset(1) == 0
    assert center_frame_offset(2) == 1


def test_center_frame_used_for_image_features(tmp_path):
    frames = paint_frame_dir(tmp_path, 9)
    shots = [Shot(1, 0, 5), Shot(2, 5, 9)]  # lengths 5 (odd) and 4 (even)
    out = extract(
        frames,
        shots,
        tmp_path / "pack",
        movie_id="probe",
        feature_specs=[
            ExtractorSpec("custom:index-probe", "center_frame", IndexProbeEncoder())
        ],
    )
    sidecar = json.loads((out / "features" / "custom:index-probe.json").read_text())
    payload = np.frombuffer((out / "features" / "custom:index-probe.bin").read_bytes(), "<f4")
    by_shot = dict(zip(sidecar["shot_indices"], payload))
    # shot 1: frames 0..4, center = 0 + floor(5/2) = 2
    assert by_shot[1] == 2.0
    # shot 2: frames 5..8, center = 5 + floor(4/2) = 7
    assert by_shot[2] == 7.0


def test_every_nth_offsets():
    assert every_nth_offsets(9, 4) == [0, 4, 8]
    assert every_nth_offsets(8, 4) == [0, 4]
    assert every_nth_offsets(3, 4) == [0]


def test_fps_capped_offsets():
    assert fps_capped_offsets(100, fps=24.0) == [0, 24, 48, 72, 96]
    long = fps_capped_offsets(10_000, fps=1.0, cap=100)
    assert len(long) == 100
    assert long[0] == 0 and long[-1] == 9_999


def test_multi_view_offsets_shape_and_clamping():
    views = multi_view_offsets(200, views=4, view_len=32, stride=2)
    assert len(views) == 4 and all(len(v) == 32 for v in views)
    assert views[0][0] == 0 and max(views[-1]) <= 199
    short = multi_view_offsets(5, views=4, view_len=32, stride=2)
    assert all(max(v) <= 4 for v in short)


def test_clip_sampling_uses_every_fourth_frame(tmp_path):
    frames = paint_frame_dir(tmp_path, 9)
    clip = MeanFrameClipEncoder(IndexProbeEncoder(), "custom:clip-probe")
    out = extract(
        frames,
        [Shot(1, 0, 9)],
        tmp_path / "pack",
        movie_id="probe",
        feature_specs=[ExtractorSpec("custom:clip-probe", "every_4", clip)],
    )
    payload = np.frombuffer((out / "features" / "custom:clip-probe.bin").read_bytes(), "<f4")
    assert payload[0] == pytest.approx(np.mean([0, 4, 8]))


# -- audio ----------------------------------------------------------------


def write_wav(path, seconds, rate=AUDIO_SAMPLE_RATE):
    t = np.arange(int(seconds * rate)) / rate
    samples = (0.4 * np.sin(2 * np.pi * 440 * t) * 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(rate)
        fh.writeframes(samples.tobytes())


def test_audio_windows_count_and_mean(tmp_path):
    wav = tmp_path / "a.wav"
    write_wav(wav, seconds=4.8)
    samples = read_wav_mono_16k(wav)
    encoder = SpectrumWindowEncoder()
    vector, n_windows = audio_shot_embedding(samples, encoder)
    assert n_windows == 10
    window = int(0.48 * AUDIO_SAMPLE_RATE)
    per_window = [
        encoder.embed_window(samples[k * window : (k + 1) * window]) for k in range(10)
    ]
    np.testing.assert_allclose(vector, np.mean(per_window, axis=0), atol=1e-12)


def test_audio_shorter_than_one_window_is_padded(tmp_path):
    wav = tmp_path / "short.wav"
    write_wav(wav, seconds=0.2)
    samples = read_wav_mono_16k(wav)
    vector, n_windows = audio_shot_embedding(samples, SpectrumWindowEncoder())
    assert n_windows == 1
    assert np.isfinite(vector).all()


def test_audio_wrong_rate_rejected(tmp_path):
    wav = tmp_path / "b.wav"
    write_wav(wav, seconds=1.0, rate=22_050)
    with pytest.raises(ValueError, match="16000"):
        read_wav_mono_16k(wav)


# -- masks ------------------------------------------------------------------


def test_person_filter_and_thresholds():
    h = w = 6
    soft = np.zeros((3, 1, h, w))
    soft[0, 0, :2, :2] = 0.9   # person, confident
    soft[1, 0, 3:, 3:] = 0.9   # not a person
    soft[2, 0, 2:4, 2:4] = 0.9  # person but low score
    detections = {
        "masks": soft,
        "labels": np.array([1, 17, 1]),
        "scores": np.array([0.95, 0.99, 0.3]),
    }
    masks = person_masks_from_detections(detections)
    assert len(masks) == 1
    assert masks[0].sum() == 4


def test_blob_segmenter_finds_bright_regions():
    frame = np.zeros((8, 8, 3), dtype=np.uint8)
    frame[1:3, 1:3] = 255
    frame[5:7, 5:7] = 255
    det = BrightBlobSegmenter().detect(frame)
    masks = person_masks_from_detections(det)
    assert len(masks) == 2
    assert sum(m.sum() for m in masks) == 8


# -- full extraction + primary-loader acceptance ----------------------------


@pytest.fixture
def full_pack(tmp_path):
    rng = np.random.default_rng(0)
    d = tmp_path / "frames"
    d.mkdir()
    n_frames = 24
    for i in range(n_frames):
        frame = rng.integers(0, 80, size=(32, 32, 3), dtype=np.uint8)
        frame[10:14, 8 + (i % 4) : 12 + (i % 4)] = 220  # a moving bright block
        cv2.imwrite(str(d / f"f{i:05d}.png"), frame)
    shots = [Shot(1, 0, 7), Shot(2, 7, 16), Shot(3, 16, 24)]  # odd, odd, even lengths
    wav = tmp_path / "audio.wav"
    write_wav(wav, seconds=n_frames / 24.0 + 1.0)
    out = extract(
        d,
        shots,
        tmp_path / "pack",
        movie_id="synthetic-title",
        feature_specs=[
            ExtractorSpec("dedup", "center_frame", TinyImageEncoder("dedup", dim=1024)),
            ExtractorSpec("custom:tiny-image", "center_frame", TinyImageEncoder()),
            ExtractorSpec(
                "c4c", "fps1_cap100", MeanFrameClipEncoder(TinyImageEncoder("c4c"), "c4c")
            ),
            ExtractorSpec(
                "swin", "multi_view", MeanFrameClipEncoder(TinyImageEncoder("swin"), "swin")
            ),
        ],
        segmenter=BrightBlobSegmenter(threshold=200),
        face_counter=BrightBlobFaceCounter(threshold=200),
        with_flow=True,
        audio_path=wav,
        audio_spec=ExtractorSpec("yamnet", "audio_windows", SpectrumWindowEncoder()),
        fps=24.0,
    )
    return out


def test_emitted_pack_passes_strict_validation(full_pack):
    # the ranking engine's loader is the acceptance oracle for the format
    from shotmatch import load_movie_pack

    pack = load_movie_pack(full_pack)
    assert pack.movie_id == "synthetic-title"
    assert [s.shot_index for s in pack.shots] == [1, 2, 3]
    assert set(pack.features) == {"dedup", "custom:tiny-image", "c4c", "swin", "yamnet"}
    assert pack.features["dedup"].dim == 1024
    assert set(pack.masks) == {1, 2, 3}
    assert set(pack.flows) == {1, 2, 3}
    assert set(pack.faces) == {1, 2, 3}
    assert all(f.count >= 1 for f in pack.faces.values())


def test_emitted_pack_works_via_primary_cli(full_pack, tmp_path):
    out = tmp_path / "dedup.json"
    proc = subprocess.run(
        [sys.executable, "-m", "shotmatch.cli", "dedup", "--pack", str(full_pack),
         "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    doc = json.loads(out.read_text())
    assert sorted(doc["removed"] + doc["kept"]) == [1, 2, 3]

    ranked = tmp_path / "ranked.jsonl"
    proc = subprocess.run(
        [sys.executable, "-m", "shotmatch.cli", "topk", "--pack", str(full_pack),
         "--sim", "h2", "--k", "3", "--no-dedup", "--out", str(ranked)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(ranked.read_text().splitlines()) == 3


def test_extraction_provenance_recorded(full_pack):
    doc = json.loads((full_pack / "extraction.json").read_text())
    assert doc["masks"]["model"] == "bright-blob"
    assert doc["features/dedup"]["sampling"] == "center_frame"
    assert doc["flows"]["model"] == "opencv:farneback"


def test_video_file_source(tmp_path):
    video = tmp_path / "clip.avi"
    writer = cv2.VideoWriter(str(video), cv2.VideoWriter_fourcc(*"MJPG"), 24.0, (32, 32))
    assert writer.isOpened()
    for i in range(12):
        writer.write(np.full((32, 32, 3), i * 10, dtype=np.uint8))
    writer.release()
    source = FrameSource(video)
    assert len(source) == 12
    assert source.frame(3).shape == (32, 32, 3)
    source.close()

    out = extract(
        video,
        [Shot(1, 0, 6), Shot(2, 6, 12)],
        tmp_path / "vpack",
        movie_id="from-video",
        feature_specs=[ExtractorSpec("custom:tiny-image", "center_frame", TinyImageEncoder())],
    )
    from shotmatch import load_movie_pack

    assert load_movie_pack(out).features["custom:tiny-image"].dim == 64


def test_cli_end_to_end(tmp_path):
    frames = paint_frame_dir(tmp_path, 10)
    csv_path = tmp_path / "shots.csv"
    write_shots_csv(csv_path, [Shot(1, 0, 5), Shot(2, 5, 10)])
    out_dir = tmp_path / "cli-pack"
    proc = subprocess.run(
        [
            "shotmatch-extract", "--source", str(frames), "--shots", str(csv_path),
            "--movie-id", "cli-title", "--out", str(out_dir),
            "--with-masks", "--with-faces", "--with-flow",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    from shotmatch import load_movie_pack

    pack = load_movie_pack(out_dir)
    assert set(pack.features) == {"dedup", "custom:tiny-image"}


def test_shot_table_longer_than_source_rejected(tmp_path):
    frames = paint_frame_dir(tmp_path, 4)
    with pytest.raises(ValueError, match="frames"):
        extract(
            frames,
            [Shot(1, 0, 10)],
            tmp_path / "pack",
            movie_id="x",
            feature_specs=[ExtractorSpec("custom:tiny-image", "center_frame", TinyImageEncoder())],
        )


# -- torchvision plumbing (no pretrained weights needed) ---------------------


def test_torchvision_image_encoder_plumbing():
    torch = pytest.importorskip("torch")
    from shotmatch_extractors.encoders import TorchvisionImageEncoder

    encoder = TorchvisionImageEncoder("rn50", weights=None)
    vec = encoder.embed_image(np.zeros((48, 48, 3), dtype=np.uint8))
    assert vec.shape == (2048,)
    assert encoder.model_id.endswith("random-init")

    dedup = TorchvisionImageEncoder("dedup", weights=None)
    assert dedup.embed_image(np.zeros((48, 48, 3), dtype=np.uint8)).shape == (1024,)
