"""Shared fixtures: synthetic movie packs and mask-set builders."""

from __future__ import annotations

import numpy as np
import pytest

from shotmatch.datastore import (
    FaceCount,
    FeaturePack,
    FlowSummary,
    MaskSet,
    MoviePack,
    ShotRecord,
    write_movie_pack,
)


def make_mask_set(movie_id: str, shot_index: int, grids, width=None, height=None) -> MaskSet:
    inst = np.asarray(grids, dtype=bool)
    if inst.ndim == 2:
        inst = inst[None]
    if inst.size == 0:
        inst = np.zeros((0, height, width), dtype=bool)
    return MaskSet(
        movie_id=movie_id,
        shot_index=shot_index,
        width=inst.shape[2],
        height=inst.shape[1],
        instances=inst,
    )


def make_movie_pack(
    movie_id: str = "movie-a",
    n_shots: int = 6,
    dim: int = 8,
    seed: int = 0,
    mask_size: int = 4,
    flow_size: int = 4,
    with_masks: bool = True,
    with_flows: bool = True,
    with_faces: bool = True,
    encoders: tuple[str, ...] = ("dedup", "clip"),
) -> MoviePack:
    rng = np.random.default_rng(seed)
    shots = []
    frame = 0
    for idx in range(1, n_shots + 1):
        length = int(rng.integers(8, 24))
        shots.append(
            ShotRecord(
                movie_id=movie_id,
                shot_index=idx,
                start_frame=frame,
                end_frame=frame + length,
                fps=24.0,
            )
        )
        frame += length

    features = {}
    for name in encoders:
        vecs = {i: rng.normal(size=dim) for i in range(1, n_shots + 1)}
        features[name] = FeaturePack(movie_id=movie_id, encoder_name=name, dim=dim, vectors=vecs)

    masks = {}
    if with_masks:
        for i in range(1, n_shots + 1):
            u = int(rng.integers(0, 3))
            grids = rng.random((u, mask_size, mask_size)) > 0.6 if u else np.zeros(
                (0, mask_size, mask_size), dtype=bool
            )
            masks[i] = MaskSet(
                movie_id=movie_id,
                shot_index=i,
                width=mask_size,
                height=mask_size,
                instances=np.asarray(grids, dtype=bool),
            )

    flows = {}
    if with_flows:
        for i in range(1, n_shots + 1):
            flows[i] = FlowSummary(
                movie_id=movie_id,
                shot_index=i,
                width=flow_size,
                height=flow_size,
                field=rng.normal(size=(flow_size, flow_size, 2)),
            )

    faces = {}
    if with_faces:
        for i in range(1, n_shots + 1):
            faces[i] = FaceCount(movie_id=movie_id, shot_index=i, count=int(rng.integers(0, 4)))

    return MoviePack(
        movie_id=movie_id, shots=shots, features=features, masks=masks, flows=flows, faces=faces
    )


@pytest.fixture
def movie_pack() -> MoviePack:
    return make_movie_pack()


@pytest.fixture
def pack_dir(tmp_path, movie_pack):
    path = tmp_path / "pack"
    write_movie_pack(movie_pack, path)
    return path
