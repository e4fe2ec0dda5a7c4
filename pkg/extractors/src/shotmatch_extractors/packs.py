"""Writer for the movie-pack directory format.

The format is the interchange contract with the ranking engine: manifest +
float32 tensor payloads with JSON sidecars + RLE masks + flow blobs + face
counts. An extra extraction.json records which models produced each artifact
(including substitutions); the loader on the other side ignores it.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def rle_encode(mask: np.ndarray) -> list[int]:
    """Run lengths over the row-major flattening, alternating 0s/1s from zeros."""
    flat = np.asarray(mask, dtype=bool).ravel(order="C")
    runs = []
    current = False
    count = 0
    for bit in flat:
        if bit == current:
            count += 1
        else:
            runs.append(count)
            current = bit
            count = 1
    runs.append(count)
    return runs


class PackWriter:
    """Accumulates per-shot artifacts and writes one pack directory."""

    def __init__(self, movie_id: str, fps: float, shots):
        self.movie_id = movie_id
        self.fps = fps
        self.shots = list(shots)
        self.features: dict[str, dict[int, np.ndarray]] = {}
        self.masks: dict[int, dict] = {}
        self.flows: dict[int, np.ndarray] = {}
        self.faces: dict[int, int] = {}
        self.provenance: dict[str, dict] = {}

    def add_feature(self, encoder_name: str, shot_index: int, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float32).ravel()
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"non-finite feature vector for shot {shot_index}")
        store = self.features.setdefault(encoder_name, {})
        if shot_index in store:
            raise ValueError(f"duplicate feature for shot {shot_index} under {encoder_name}")
        if store and len(next(iter(store.values()))) != len(vec):
            raise ValueError(f"inconsistent dim for encoder {encoder_name}")
        store[shot_index] = vec

    def add_masks(self, shot_index: int, instances: list[np.ndarray], width: int, height: int):
        for m in instances:
            if m.shape != (height, width):
                raise ValueError(f"mask shape {m.shape} != ({height}, {width})")
        self.masks[shot_index] = {
            "shot_index": shot_index,
            "width": width,
            "height": height,
            "instances": [rle_encode(m) for m in instances],
        }

    def add_flow(self, shot_index: int, field: np.ndarray) -> None:
        field = np.asarray(field, dtype=np.float32)
        if field.ndim != 3 or field.shape[2] != 2:
            raise ValueError(f"flow field must be (H, W, 2), got {field.shape}")
        self.flows[shot_index] = field

    def add_face_count(self, shot_index: int, count: int) -> None:
        if count < 0:
            raise ValueError("face count must be >= 0")
        self.faces[shot_index] = int(count)

    def record_provenance(self, artifact: str, details: dict) -> None:
        self.provenance[artifact] = details

    def write(self, out_dir: str | Path) -> Path:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        manifest = {
            "movie_id": self.movie_id,
            "fps": self.fps,
            "shots": [
                {
                    "shot_index": s.shot_index,
                    "start_frame": s.start_frame,
                    "end_frame": s.end_frame,
                }
                for s in sorted(self.shots, key=lambda s: s.shot_index)
            ],
        }
        (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

        if self.features:
            feat_dir = root / "features"
            feat_dir.mkdir(exist_ok=True)
            for name in sorted(self.features):
                vectors = self.features[name]
                indices = sorted(vectors)
                matrix = np.stack([vectors[i] for i in indices]).astype("<f4")
                sidecar = {
                    "encoder_name": name,
                    "dtype": "float32",
                    "order": "C",
                    "shape": [len(indices), matrix.shape[1]],
                    "shot_indices": indices,
                }
                (feat_dir / f"{name}.json").write_text(json.dumps(sidecar, indent=2) + "\n")
                (feat_dir / f"{name}.bin").write_bytes(matrix.tobytes(order="C"))

        if self.masks:
            doc = {"shots": [self.masks[i] for i in sorted(self.masks)]}
            (root / "masks.json").write_text(json.dumps(doc) + "\n")

        if self.flows:
            entries = []
            blobs = []
            for idx in sorted(self.flows):
                field = self.flows[idx]
                entries.append(
                    {"shot_index": idx, "width": field.shape[1], "height": field.shape[0]}
                )
                blobs.append(np.ascontiguousarray(field, dtype="<f4").tobytes(order="C"))
            doc = {"dtype": "float32", "order": "C", "shots": entries}
            (root / "flows.json").write_text(json.dumps(doc, indent=2) + "\n")
            (root / "flows.bin").write_bytes(b"".join(blobs))

        if self.faces:
            doc = {
                "shots": [
                    {"shot_index": i, "count": self.faces[i]} for i in sorted(self.faces)
                ]
            }
            (root / "faces.json").write_text(json.dumps(doc, indent=2) + "\n")

        if self.provenance:
            (root / "extraction.json").write_text(json.dumps(self.provenance, indent=2) + "\n")
        return root
