"""Orchestration: run encoders over a title's shots and emit a movie pack."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boundaries import Shot, read_shot_csv
from .encoders import AUDIO_SAMPLE_RATE, audio_shot_embedding, read_wav_mono_16k
from .frames import (
    FrameSource,
    center_frame_offset,
    every_nth_offsets,
    fps_capped_offsets,
    multi_view_offsets,
)
from .masks import person_masks_from_detections
from . import flow as flow_mod

SAMPLING_POLICIES = ("center_frame", "every_4", "fps1_cap100", "multi_view", "audio_windows")


@dataclass
class ExtractorSpec:
    """One feature pack to emit: which encoder, under which sampling policy."""

    encoder_name: str
    sampling: str
    encoder: object

    def __post_init__(self):
        if self.sampling not in SAMPLING_POLICIES:
            raise ValueError(f"unknown sampling policy {self.sampling!r}")


def _shot_frames(source: FrameSource, shot: Shot, offsets: list[int]) -> list[np.ndarray]:
    return [source.frame(shot.start_frame + off) for off in offsets]


def _feature_for_shot(spec: ExtractorSpec, source: FrameSource, shot: Shot) -> np.ndarray:
    length = shot.frame_count
    if spec.sampling == "center_frame":
        frame = source.frame(shot.start_frame + center_frame_offset(length))
        return spec.encoder.embed_image(frame)
    if spec.sampling == "every_4":
        frames = _shot_frames(source, shot, every_nth_offsets(length, 4))
        return spec.encoder.embed_clip(frames)
    if spec.sampling == "fps1_cap100":
        frames = _shot_frames(source, shot, fps_capped_offsets(length, source.fps))
        return spec.encoder.embed_clip(frames)
    if spec.sampling == "multi_view":
        views = multi_view_offsets(length)
        embeddings = [
            spec.encoder.embed_clip(_shot_frames(source, shot, view)) for view in views
        ]
        return np.mean(embeddings, axis=0)
    raise ValueError(f"sampling {spec.sampling!r} is not frame-based")


def extract(
    source_path: str | Path,
    shots: list[Shot] | str | Path,
    out_dir: str | Path,
    movie_id: str,
    feature_specs: list[ExtractorSpec] = (),
    segmenter=None,
    face_counter=None,
    with_flow: bool = False,
    flow_stride: int = flow_mod.FLOW_STRIDE,
    audio_path: str | Path | None = None,
    audio_spec: ExtractorSpec | None = None,
    fps: float | None = None,
) -> Path:
    """Run the configured extractors over every shot and write one pack.

    ``shots`` is a list or a boundary CSV path. Center-frame artifacts
    (masks, face counts) use frame floor(l/2) of each shot. The emitted
    directory conforms to the movie-pack format and includes an
    extraction.json provenance record.
    """
    from .packs import PackWriter

    if isinstance(shots, (str, Path)):
        shots = read_shot_csv(shots)
    source = FrameSource(source_path)
    try:
        if shots[-1].end_frame > len(source):
            raise ValueError(
                f"shot table needs {shots[-1].end_frame} frames, source has {len(source)}"
            )
        writer = PackWriter(movie_id, fps if fps is not None else source.fps, shots)

        for spec in feature_specs:
            if spec.sampling == "audio_windows":
                raise ValueError("audio specs go through the audio_spec argument")
            for shot in shots:
                writer.add_feature(spec.encoder_name, shot.shot_index, _feature_for_shot(spec, source, shot))
            writer.record_provenance(
                f"features/{spec.encoder_name}",
                {"model": getattr(spec.encoder, "model_id", "unknown"), "sampling": spec.sampling},
            )

        if segmenter is not None:
            for shot in shots:
                frame = source.frame(shot.start_frame + center_frame_offset(shot.frame_count))
                masks = person_masks_from_detections(segmenter.detect(frame))
                h, w = frame.shape[:2]
                writer.add_masks(shot.shot_index, masks, width=w, height=h)
            writer.record_provenance(
                "masks", {"model": getattr(segmenter, "model_id", "unknown"), "threshold": 0.5}
            )

        if face_counter is not None:
            for shot in shots:
                frame = source.frame(shot.start_frame + center_frame_offset(shot.frame_count))
                writer.add_face_count(shot.shot_index, face_counter.count_faces(frame))
            writer.record_provenance(
                "faces", {"model": getattr(face_counter, "model_id", "unknown")}
            )

        if with_flow:
            for shot in shots:
                frames = _shot_frames(source, shot, list(range(shot.frame_count)))
                writer.add_flow(shot.shot_index, flow_mod.shot_flow_summary(frames, flow_stride))
            writer.record_provenance(
                "flows", {"model": "opencv:farneback", "stride": flow_stride}
            )

        if audio_spec is not None:
            if audio_path is None:
                raise ValueError("audio_spec given without audio_path")
            samples = read_wav_mono_16k(audio_path)
            src_fps = fps if fps is not None else source.fps
            for shot in shots:
                lo = int(round(shot.start_frame / src_fps * AUDIO_SAMPLE_RATE))
                hi = int(round(shot.end_frame / src_fps * AUDIO_SAMPLE_RATE))
                vector, _ = audio_shot_embedding(samples[lo:hi], audio_spec.encoder)
                writer.add_feature(audio_spec.encoder_name, shot.shot_index, vector)
            writer.record_provenance(
                f"features/{audio_spec.encoder_name}",
                {
                    "model": getattr(audio_spec.encoder, "model_id", "unknown"),
                    "sampling": "audio_windows",
                },
            )

        return writer.write(out_dir)
    finally:
        source.close()
