"""On-disk data model for movie packs and labeled shot pairs.

A movie pack is a directory:

    <pack>/
      manifest.json             movie_id, fps, shot table
      features/<encoder>.json   sidecar: {encoder_name, dtype, order, shape, shot_indices}
      features/<encoder>.bin    little-endian float32, row-major (C order)
      masks.json                per-shot instance masks, run-length encoded
      flows.json + flows.bin    per-shot averaged flow fields, float32
      faces.json                per-shot face counts

Tensor payloads are little-endian float32 in row-major order so round-trips
are bit-exact. Masks are RLE over the row-major flattening of the (H, W)
grid: runs alternate zeros/ones starting with zeros, and must sum to W*H.
Shot indices are 1-based everywhere. All validation is strict-fail: a pack
either loads completely or raises DataError with no partial state.

Labels live in a separate JSON-lines file, one pair per line with fields
movie_id, shot_i, shot_j, task, votes, majority, source.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

KNOWN_ENCODERS = ("clip", "rn50", "en7", "r2p1d", "swin", "c4c", "yamnet", "dedup")
LABEL_TASKS = ("frame", "motion")
LABEL_SOURCES = ("h1", "h2", "h4", "h5", "random_negative")


def is_valid_encoder_name(name: str) -> bool:
    """Registered encoder, a custom:* name, or either with a .metric suffix."""
    base = name[: -len(".metric")] if name.endswith(".metric") else name
    return base in KNOWN_ENCODERS or base.startswith("custom:")


@dataclass(frozen=True)
class ShotRecord:
    """One shot of one movie: identity plus its frame range."""

    movie_id: str
    shot_index: int
    start_frame: int
    end_frame: int
    fps: float

    def __post_init__(self):
        if self.shot_index < 1:
            raise DataError(f"shot_index must be >= 1, got {self.shot_index}")
        if self.start_frame < 0:
            raise DataError(f"start_frame must be >= 0, got {self.start_frame}")
        if self.end_frame <= self.start_frame:
            raise DataError(
                f"end_frame must exceed start_frame "
                f"({self.start_frame}..{self.end_frame} in shot {self.shot_index})"
            )
        if self.fps <= 0:
            raise DataError(f"fps must be positive, got {self.fps}")

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame


@dataclass
class FeaturePack:
    """Per-shot vectors for one movie under one named encoder."""

    movie_id: str
    encoder_name: str
    dim: int
    vectors: dict[int, np.ndarray]

    def __post_init__(self):
        if not is_valid_encoder_name(self.encoder_name):
            raise DataError(f"unknown encoder name {self.encoder_name!r}")
        if self.dim < 1:
            raise DataError(f"dim must be positive, got {self.dim}")
        for idx, vec in self.vectors.items():
            if vec.shape != (self.dim,):
                raise DataError(
                    f"vector for shot {idx} has length {vec.shape}, expected ({self.dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise DataError(f"vector for shot {idx} contains NaN or Inf")

    @property
    def shot_indices(self) -> list[int]:
        return sorted(self.vectors)

    def matrix(self) -> np.ndarray:
        """Vectors stacked by ascending shot_index, float32."""
        return np.stack([self.vectors[i] for i in self.shot_indices]).astype(np.float32)


@dataclass
class MaskSet:
    """Instance-level binary masks for one shot's center frame.

    ``instances`` has shape (u, H, W) and dtype bool; the union mask is
    derived, never stored.
    """

    movie_id: str
    shot_index: int
    width: int
    height: int
    instances: np.ndarray

    def __post_init__(self):
        inst = np.asarray(self.instances, dtype=bool)
        if inst.size == 0:
            inst = inst.reshape(0, self.height, self.width)
        if inst.ndim != 3 or inst.shape[1:] != (self.height, self.width):
            raise DataError(
                f"instances shape {inst.shape} does not match "
                f"(u, {self.height}, {self.width}) for shot {self.shot_index}"
            )
        if self.width < 1 or self.height < 1:
            raise DataError("mask dimensions must be positive")
        self.instances = inst

    @property
    def instance_count(self) -> int:
        return int(self.instances.shape[0])

    def union(self) -> np.ndarray:
        """(H, W) bool union of all instance masks."""
        if self.instance_count == 0:
            return np.zeros((self.height, self.width), dtype=bool)
        return np.any(self.instances, axis=0)


@dataclass
class FlowSummary:
    """Per-shot averaged optical-flow field, shape (H, W, 2).

    Channel 0 is horizontal displacement, channel 1 vertical, in pixels per
    frame step.
    """

    movie_id: str
    shot_index: int
    width: int
    height: int
    field: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.field, dtype=np.float64)
        if f.shape != (self.height, self.width, 2):
            raise DataError(
                f"flow field shape {f.shape} does not match "
                f"({self.height}, {self.width}, 2) for shot {self.shot_index}"
            )
        if not np.all(np.isfinite(f)):
            raise DataError(f"flow field for shot {self.shot_index} contains NaN or Inf")
        self.field = f


@dataclass(frozen=True)
class FaceCount:
    movie_id: str
    shot_index: int
    count: int

    def __post_init__(self):
        if self.count < 0:
            raise DataError(f"face count must be >= 0, got {self.count}")


@dataclass(frozen=True)
class LabeledPair:
    """An annotated shot pair with per-annotator votes and majority label."""

    movie_id: str
    shot_i: int
    shot_j: int
    task: str
    votes: tuple[bool, ...]
    majority: bool
    source: str

    def __post_init__(self):
        if self.shot_i >= self.shot_j:
            raise DataError(
                f"pair must have shot_i < shot_j, got ({self.shot_i}, {self.shot_j})"
            )
        if self.task not in LABEL_TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if self.source not in LABEL_SOURCES:
            raise DataError(f"unknown source {self.source!r}")
        if self.votes:
            if len(self.votes) != 3:
                raise DataError(f"votes must have length 3 or be empty, got {self.votes}")
            if self.majority != (sum(self.votes) >= 2):
                raise DataError(
                    f"stored majority {self.majority} disagrees with votes {self.votes} "
                    f"for pair ({self.movie_id}, {self.shot_i}, {self.shot_j})"
                )
        elif self.source != "random_negative":
            raise DataError("empty votes are only allowed for random_negative pairs")
        if self.source == "random_negative" and self.majority:
            raise DataError("random_negative pairs must be majority-negative")


@dataclass
class MoviePack:
    """Everything loaded from one movie pack directory."""

    movie_id: str
    shots: list[ShotRecord]
    features: dict[str, FeaturePack] = field(default_factory=dict)
    masks: dict[int, MaskSet] = field(default_factory=dict)
    flows: dict[int, FlowSummary] = field(default_factory=dict)
    faces: dict[int, FaceCount] = field(default_factory=dict)

    @property
    def shot_indices(self) -> list[int]:
        return [s.shot_index for s in self.shots]


# ---------------------------------------------------------------------------
# RLE mask codec


def rle_encode(mask: np.ndarray) -> list[int]:
    """Run lengths of the row-major flattening, alternating 0s/1s from zeros."""
    flat = np.asarray(mask, dtype=bool).ravel(order="C")
    runs: list[int] = []
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


def rle_decode(runs: list[int], height: int, width: int) -> np.ndarray:
    total = height * width
    if not runs:
        raise DataError("empty RLE run list")
    if any((not isinstance(r, int)) or isinstance(r, bool) or r < 0 for r in runs):
        raise DataError(f"RLE runs must be non-negative integers, got {runs}")
    if any(r == 0 for r in runs[1:]):
        raise DataError("only the leading RLE run may be zero")
    if sum(runs) != total:
        raise DataError(f"RLE runs sum to {sum(runs)}, expected {total} for {width}x{height}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)


# ---------------------------------------------------------------------------
# Tensor payload IO (little-endian float32, C order, JSON sidecar)


def write_f32_payload(path: Path, array: np.ndarray) -> None:
    data = np.ascontiguousarray(array, dtype="<f4")
    path.write_bytes(data.tobytes(order="C"))


def read_f32_payload(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * 4
    if len(raw) != expected:
        raise DataError(
            f"payload size mismatch for {path.name}: {len(raw)} bytes, expected {expected}"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)


# ---------------------------------------------------------------------------
# Loading


def _read_json(path: Path):
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {path}: {exc}") from exc


def _load_manifest(path: Path) -> tuple[str, float, list[ShotRecord]]:
    doc = _read_json(path)
    for key in ("movie_id", "fps", "shots"):
        if key not in doc:
            raise DataError(f"manifest missing key {key!r}")
    movie_id = doc["movie_id"]
    fps = float(doc["fps"])
    if not movie_id or not isinstance(movie_id, str):
        raise DataError("manifest movie_id must be a non-empty string")
    entries = doc["shots"]
    if not entries:
        raise DataError("manifest lists no shots")
    shots = [
        ShotRecord(
            movie_id=movie_id,
            shot_index=int(e["shot_index"]),
            start_frame=int(e["start_frame"]),
            end_frame=int(e["end_frame"]),
            fps=fps,
        )
        for e in entries
    ]
    shots.sort(key=lambda s: s.shot_index)
    indices = [s.shot_index for s in shots]
    if indices != list(range(1, len(shots) + 1)):
        raise DataError(f"shot indices must be exactly 1..{len(shots)}, got {indices}")
    for prev, cur in zip(shots, shots[1:]):
        if cur.start_frame != prev.end_frame:
            raise DataError(
                f"shots {prev.shot_index} and {cur.shot_index} are not contiguous "
                f"({prev.end_frame} vs {cur.start_frame})"
            )
    return movie_id, fps, shots


def _check_shot_refs(indices, known: set[int], what: str) -> None:
    seen = set()
    for idx in indices:
        if idx in seen:
            raise DataError(f"duplicate shot_index {idx} in {what}")
        seen.add(idx)
        if idx not in known:
            raise DataError(f"{what} references shot_index {idx} absent from manifest")


def _load_feature_pack(json_path: Path, movie_id: str, known: set[int]) -> FeaturePack:
    sidecar = _read_json(json_path)
    for key in ("encoder_name", "dtype", "order", "shape", "shot_indices"):
        if key not in sidecar:
            raise DataError(f"feature sidecar {json_path.name} missing key {key!r}")
    if sidecar["dtype"] != "float32":
        raise DataError(f"unsupported dtype {sidecar['dtype']!r} in {json_path.name}")
    if sidecar["order"] != "C":
        raise DataError(f"unsupported order {sidecar['order']!r} in {json_path.name}")
    name = sidecar["encoder_name"]
    if name != json_path.stem:
        raise DataError(
            f"sidecar encoder_name {name!r} does not match filename {json_path.stem!r}"
        )
    shape = tuple(int(x) for x in sidecar["shape"])
    if len(shape) != 2 or shape[1] < 1:
        raise DataError(f"feature shape must be [count, dim], got {list(shape)}")
    shot_indices = [int(i) for i in sidecar["shot_indices"]]
    if len(shot_indices) != shape[0]:
        raise DataError(
            f"{json_path.name}: {len(shot_indices)} shot_indices for {shape[0]} rows"
        )
    _check_shot_refs(shot_indices, known, f"feature pack {name!r}")
    payload = read_f32_payload(json_path.with_suffix(".bin"), shape)
    if not np.all(np.isfinite(payload)):
        raise DataError(f"feature pack {name!r} contains NaN or Inf")
    vectors = {idx: payload[row] for row, idx in enumerate(shot_indices)}
    return FeaturePack(movie_id=movie_id, encoder_name=name, dim=shape[1], vectors=vectors)


def _load_masks(path: Path, movie_id: str, known: set[int]) -> dict[int, MaskSet]:
    doc = _read_json(path)
    entries = doc.get("shots")
    if entries is None:
        raise DataError("masks.json missing 'shots'")
    _check_shot_refs([int(e["shot_index"]) for e in entries], known, "masks.json")
    out = {}
    for e in entries:
        idx = int(e["shot_index"])
        width, height = int(e["width"]), int(e["height"])
        masks = [rle_decode(runs, height, width) for runs in e["instances"]]
        inst = np.stack(masks) if masks else np.zeros((0, height, width), dtype=bool)
        out[idx] = MaskSet(
            movie_id=movie_id, shot_index=idx, width=width, height=height, instances=inst
        )
    return out


def _load_flows(json_path: Path, movie_id: str, known: set[int]) -> dict[int, FlowSummary]:
    doc = _read_json(json_path)
    if doc.get("dtype") != "float32" or doc.get("order") != "C":
        raise DataError("flows.json must declare dtype float32 and order C")
    entries = doc.get("shots")
    if entries is None:
        raise DataError("flows.json missing 'shots'")
    _check_shot_refs([int(e["shot_index"]) for e in entries], known, "flows.json")
    bin_path = json_path.with_suffix(".bin")
    raw = bin_path.read_bytes() if bin_path.is_file() else None
    if raw is None:
        raise DataError(f"missing file: {bin_path}")
    out = {}
    offset = 0
    for e in entries:
        idx = int(e["shot_index"])
        width, height = int(e["width"]), int(e["height"])
        nbytes = height * width * 2 * 4
        chunk = raw[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise DataError(
                f"payload size mismatch in flows.bin at shot {idx}: "
                f"{len(chunk)} bytes, expected {nbytes}"
            )
        field = np.frombuffer(chunk, dtype="<f4").reshape(height, width, 2).astype(np.float64)
        out[idx] = FlowSummary(
            movie_id=movie_id, shot_index=idx, width=width, height=height, field=field
        )
        offset += nbytes
    if offset != len(raw):
        raise DataError(
            f"payload size mismatch in flows.bin: {len(raw)} bytes, expected {offset}"
        )
    return out


def _load_faces(path: Path, movie_id: str, known: set[int]) -> dict[int, FaceCount]:
    doc = _read_json(path)
    entries = doc.get("shots")
    if entries is None:
        raise DataError("faces.json missing 'shots'")
    _check_shot_refs([int(e["shot_index"]) for e in entries], known, "faces.json")
    return {
        int(e["shot_index"]): FaceCount(
            movie_id=movie_id, shot_index=int(e["shot_index"]), count=int(e["count"])
        )
        for e in entries
    }


def load_movie_pack(path: str | Path) -> MoviePack:
    """Load and validate a movie pack directory.

    Raises DataError on any format or invariant violation; never returns a
    partially-populated pack.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"movie pack directory not found: {root}")
    movie_id, _fps, shots = _load_manifest(root / "manifest.json")
    known = {s.shot_index for s in shots}

    features: dict[str, FeaturePack] = {}
    feat_dir = root / "features"
    if feat_dir.is_dir():
        for json_path in sorted(feat_dir.glob("*.json")):
            pack = _load_feature_pack(json_path, movie_id, known)
            features[pack.encoder_name] = pack

    masks = _load_masks(root / "masks.json", movie_id, known) if (root / "masks.json").is_file() else {}
    flows = _load_flows(root / "flows.json", movie_id, known) if (root / "flows.json").is_file() else {}
    faces = _load_faces(root / "faces.json", movie_id, known) if (root / "faces.json").is_file() else {}

    return MoviePack(
        movie_id=movie_id, shots=shots, features=features, masks=masks, flows=flows, faces=faces
    )


# ---------------------------------------------------------------------------
# Writing


def write_movie_pack(pack: MoviePack, path: str | Path) -> None:
    """Write a MoviePack as a pack directory; tensor payloads round-trip bit-exactly."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "movie_id": pack.movie_id,
        "fps": pack.shots[0].fps if pack.shots else 0.0,
        "shots": [
            {"shot_index": s.shot_index, "start_frame": s.start_frame, "end_frame": s.end_frame}
            for s in sorted(pack.shots, key=lambda s: s.shot_index)
        ],
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    if pack.features:
        feat_dir = root / "features"
        feat_dir.mkdir(exist_ok=True)
        for name in sorted(pack.features):
            fp = pack.features[name]
            indices = fp.shot_indices
            sidecar = {
                "encoder_name": name,
                "dtype": "float32",
                "order": "C",
                "shape": [len(indices), fp.dim],
                "shot_indices": indices,
            }
            (feat_dir / f"{name}.json").write_text(json.dumps(sidecar, indent=2) + "\n")
            write_f32_payload(feat_dir / f"{name}.bin", fp.matrix())

    if pack.masks:
        entries = []
        for idx in sorted(pack.masks):
            ms = pack.masks[idx]
            entries.append(
                {
                    "shot_index": idx,
                    "width": ms.width,
                    "height": ms.height,
                    "instances": [rle_encode(m) for m in ms.instances],
                }
            )
        (root / "masks.json").write_text(json.dumps({"shots": entries}, indent=2) + "\n")

    if pack.flows:
        entries = []
        blobs = []
        for idx in sorted(pack.flows):
            fs = pack.flows[idx]
            entries.append({"shot_index": idx, "width": fs.width, "height": fs.height})
            blobs.append(np.ascontiguousarray(fs.field, dtype="<f4").tobytes(order="C"))
        doc = {"dtype": "float32", "order": "C", "shots": entries}
        (root / "flows.json").write_text(json.dumps(doc, indent=2) + "\n")
        (root / "flows.bin").write_bytes(b"".join(blobs))

    if pack.faces:
        entries = [
            {"shot_index": idx, "count": pack.faces[idx].count} for idx in sorted(pack.faces)
        ]
        (root / "faces.json").write_text(json.dumps({"shots": entries}, indent=2) + "\n")


# ---------------------------------------------------------------------------
# Labels


def load_labels(
    path: str | Path, task: str, movie_ids: set[str] | None = None
) -> list[LabeledPair]:
    """Read a JSON-lines labels file, returning only pairs for ``task``.

    The majority label is recomputed from the votes and cross-checked against
    the stored value. If ``movie_ids`` is given, pairs referencing other
    movies raise DataError.
    """
    if task not in LABEL_TASKS:
        raise DataError(f"unknown task {task!r}")
    p = Path(path)
    if not p.is_file():
        raise DataError(f"labels file not found: {p}")
    out = []
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{p}:{lineno}: invalid JSON: {exc}") from exc
        try:
            pair = LabeledPair(
                movie_id=row["movie_id"],
                shot_i=int(row["shot_i"]),
                shot_j=int(row["shot_j"]),
                task=row["task"],
                votes=tuple(bool(v) for v in row["votes"]),
                majority=bool(row["majority"]),
                source=row["source"],
            )
        except KeyError as exc:
            raise DataError(f"{p}:{lineno}: missing field {exc}") from exc
        except DataError as exc:
            raise DataError(f"{p}:{lineno}: {exc}") from exc
        if movie_ids is not None and pair.movie_id not in movie_ids:
            raise DataError(f"{p}:{lineno}: unknown movie {pair.movie_id!r}")
        if pair.task == task:
            out.append(pair)
    return out


def write_labels(pairs: list[LabeledPair], path: str | Path) -> None:
    lines = []
    for pair in pairs:
        lines.append(
            json.dumps(
                {
                    "movie_id": pair.movie_id,
                    "shot_i": pair.shot_i,
                    "shot_j": pair.shot_j,
                    "task": pair.task,
                    "votes": list(pair.votes),
                    "majority": pair.majority,
                    "source": pair.source,
                }
            )
        )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))
