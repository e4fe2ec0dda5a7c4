"""Approximate nearest-neighbor retrieval over shot representations.

The index is a layered navigable small-world graph searched by beam with
cosine similarity. Every shot is queried for its local top-k neighbors and
the candidate pairs are reduced to a global top-K, mirroring the exact path
but sub-quadratically. An exhaustive mode scans all vectors per query and is
the oracle for recall measurements.

Build and query are deterministic given the seed; the index is immutable
after build and safe for concurrent queries.
"""

from __future__ import annotations

import heapq
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datastore import FeaturePack
from .errors import DataError
from .ranking import BoundedTopK, RankedList, ScoredPair

DEFAULT_BUILD_PARAMS = {"m": 12, "ef_construction": 80, "seed": 0}
DEFAULT_QUERY_PARAMS = {"ef_search": 80, "mode": "ann"}

_MAGIC = b"SMIDX\x01"


@dataclass
class AnnIndex:
    """Frozen vector index over (movie_id, shot_index) entries."""

    encoder_name: str
    dim: int
    entries: list[tuple[str, int]]
    vectors: np.ndarray  # (n, dim) float32, as supplied
    build_params: dict
    query_params: dict = field(default_factory=lambda: dict(DEFAULT_QUERY_PARAMS))
    levels: np.ndarray | None = None
    graph: list[list[list[int]]] | None = None  # per layer, per node, neighbor ids
    entry_point: int = -1

    def __post_init__(self):
        if self.vectors.shape != (len(self.entries), self.dim):
            raise DataError(
                f"vector matrix shape {self.vectors.shape} does not match "
                f"{len(self.entries)} entries of dim {self.dim}"
            )
        if len({e for e in self.entries}) != len(self.entries):
            raise DataError("duplicate (movie_id, shot_index) entries in index")
        # float64 unit vectors so scores agree bit-for-bit with the exact path
        mat = self.vectors.astype(np.float64)
        norms = np.linalg.norm(mat, axis=1, keepdims=True)
        self._unit = mat / np.where(norms == 0.0, 1.0, norms)

    def __len__(self) -> int:
        return len(self.entries)

    # -- graph search -----------------------------------------------------

    def _search_layer(self, query: np.ndarray, entry_points: list[int], layer: int, ef: int):
        """Beam search one layer; returns [(similarity, node)] best-first."""
        adj = self.graph[layer]
        unit = self._unit
        visited = set(entry_points)
        sims = unit[entry_points] @ query
        candidates = []  # max-first via negated similarity
        best = []  # min-heap on similarity: root = worst kept
        for node, sim in zip(entry_points, sims):
            heapq.heappush(candidates, (-sim, node))
            heapq.heappush(best, (sim, node))
        while candidates:
            neg_sim, node = heapq.heappop(candidates)
            if len(best) >= ef and -neg_sim < best[0][0]:
                break
            fresh = [n for n in adj[node] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            fresh_sims = unit[fresh] @ query
            floor = best[0][0]
            full = len(best) >= ef
            for nbr, sim in zip(fresh, fresh_sims):
                if not full or sim > floor:
                    heapq.heappush(candidates, (-sim, nbr))
                    heapq.heappush(best, (sim, nbr))
                    if len(best) > ef:
                        heapq.heappop(best)
                    floor = best[0][0]
                    full = len(best) >= ef
        return sorted(((sim, node) for sim, node in best), reverse=True)

    def _descend(self, query: np.ndarray, to_layer: int) -> list[int]:
        node = self.entry_point
        for layer in range(len(self.graph) - 1, to_layer, -1):
            node = self._search_layer(query, [node], layer, 1)[0][1]
        return [node]

    def knn(self, query: np.ndarray, k: int, ef_search: int | None = None, mode: str = "ann"):
        """k nearest entries to ``query`` by cosine; [(similarity, entry_id)]."""
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DataError(f"query shape {q.shape} does not match dim {self.dim}")
        norm = np.linalg.norm(q)
        if norm:
            q = q / norm
        return self._knn_unit(q, k, ef_search, mode)

    def knn_node(self, node: int, k: int, ef_search: int | None = None, mode: str = "ann"):
        """k nearest entries to an indexed entry's own vector."""
        return self._knn_unit(self._unit[node], k, ef_search, mode)

    def _knn_unit(self, q: np.ndarray, k: int, ef_search: int | None, mode: str):
        if mode == "exhaustive":
            sims = np.clip(self._unit @ q, -1.0, 1.0)
            order = _top_k_by_similarity(sims, k)
            return [(float(sims[i]), int(i)) for i in order]
        if mode != "ann":
            raise DataError(f"unknown query mode {mode!r}")
        ef = max(k, ef_search if ef_search is not None else self.query_params["ef_search"])
        entry = self._descend(q, 0)
        found = self._search_layer(q, entry, 0, ef)[:k]
        return [(float(min(max(sim, -1.0), 1.0)), int(node)) for sim, node in found]


def _top_k_by_similarity(sims: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest sims ordered by (similarity desc, index asc);
    boundary ties resolve to the lowest indices, matching a full stable sort."""
    n = len(sims)
    if k >= n:
        return np.lexsort((np.arange(n), -sims))
    part = np.argpartition(-sims, k)[:k]
    boundary = sims[part].min()
    # pull in every candidate at or above the boundary, then order exactly
    candidates = np.nonzero(sims >= boundary)[0]
    order = candidates[np.lexsort((candidates, -sims[candidates]))]
    return order[:k]


def build_index(packs: list[FeaturePack], build_params: dict | None = None) -> AnnIndex:
    """Index all (movie, shot) vectors of the given packs.

    Packs must share one dimensionality. Construction is deterministic given
    build_params['seed'].
    """
    if not packs:
        raise DataError("empty index: no feature packs given")
    params = dict(DEFAULT_BUILD_PARAMS)
    params.update(build_params or {})
    dims = {p.dim for p in packs}
    if len(dims) != 1:
        raise DataError(f"representations must share one shape, got dims {sorted(dims)}")
    dim = dims.pop()

    entries: list[tuple[str, int]] = []
    rows = []
    for pack in packs:
        for idx in pack.shot_indices:
            entries.append((pack.movie_id, idx))
            rows.append(pack.vectors[idx])
    if not entries:
        raise DataError("empty index: packs contain no vectors")
    vectors = np.asarray(np.stack(rows), dtype=np.float32)

    index = AnnIndex(
        encoder_name=packs[0].encoder_name,
        dim=dim,
        entries=entries,
        vectors=vectors,
        build_params=params,
    )
    _build_graph(index)
    return index


def _build_graph(index: AnnIndex) -> None:
    n = len(index)
    m = int(index.build_params["m"])
    m0 = 2 * m
    efc = int(index.build_params["ef_construction"])
    rng = np.random.default_rng(int(index.build_params["seed"]))
    ml = 1.0 / math.log(2.0)
    levels = (-np.log(rng.random(n)) * ml).astype(np.int64)
    index.levels = levels
    n_layers = int(levels.max()) + 1 if n else 1
    graph: list[list[list[int]]] = [[[] for _ in range(n)] for _ in range(n_layers)]
    index.graph = graph
    index.entry_point = 0
    unit = index._unit
    max_level = int(levels[0])

    for node in range(1, n):
        level = int(levels[node])
        q = unit[node]
        eps = [index.entry_point]
        for layer in range(max_level, level, -1):
            eps = [index._search_layer(q, eps, layer, 1)[0][1]]
        for layer in range(min(level, max_level), -1, -1):
            cands = index._search_layer(q, eps, layer, efc)
            cap = m0 if layer == 0 else m
            nbrs = [c for _, c in cands[:cap]]
            graph[layer][node] = list(nbrs)
            for nbr in nbrs:
                lst = graph[layer][nbr]
                lst.append(node)
                if len(lst) > cap:
                    sims = unit[lst] @ unit[nbr]
                    order = np.lexsort((np.asarray(lst), -sims))[:cap]
                    graph[layer][nbr] = [lst[i] for i in order]
            eps = nbrs
        if level > max_level:
            index.entry_point = node
            max_level = level


def top_k_ann(
    index: AnnIndex,
    k: int,
    exclude_same_shot: bool = True,
    intra_movie_only: bool = False,
    query_params: dict | None = None,
) -> RankedList:
    """Per-shot k-NN queries reduced to the global top-K pairs.

    Candidate pairs are canonicalized (endpoints ordered, duplicates merged)
    before the global cut, so no pair appears twice and no self-pair appears.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if k > len(index):
        raise DataError(f"k={k} exceeds index size {len(index)}")
    params = dict(index.query_params)
    params.update(query_params or {})
    mode = params.get("mode", "ann")
    ef = params.get("ef_search")

    per_shot = k + 1 if exclude_same_shot else k
    per_shot = min(per_shot, len(index))
    seen: set[tuple[int, int]] = set()
    best = BoundedTopK(k)
    for qid in range(len(index)):
        for sim, nid in index.knn_node(qid, per_shot, ef_search=ef, mode=mode):
            if nid == qid:
                continue
            a, b = (qid, nid) if _entry_key(index, qid) < _entry_key(index, nid) else (nid, qid)
            if (a, b) in seen:
                continue
            seen.add((a, b))
            movie_a, shot_a = index.entries[a]
            movie_b, shot_b = index.entries[b]
            if intra_movie_only and movie_a != movie_b:
                continue
            if movie_a == movie_b and shot_a == shot_b:
                continue
            best.push(
                ScoredPair(
                    movie_id=movie_a,
                    shot_i=shot_a,
                    shot_j=shot_b,
                    score=float(sim),
                    movie_id_j=movie_b if movie_b != movie_a else None,
                )
            )
    return RankedList(tuple(best.ranked()), k)


def _entry_key(index: AnnIndex, node: int) -> tuple[str, int]:
    return index.entries[node]


# ---------------------------------------------------------------------------
# Persistence: versioned single-file binary


def save_index(index: AnnIndex, path: str | Path) -> None:
    meta = {
        "encoder_name": index.encoder_name,
        "dim": index.dim,
        "count": len(index),
        "build_params": index.build_params,
        "query_params": index.query_params,
        "entries": [[m, s] for m, s in index.entries],
        "levels": [int(x) for x in index.levels],
        "entry_point": index.entry_point,
        "layer_count": len(index.graph),
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    blob += np.ascontiguousarray(index.vectors, dtype="<f4").tobytes()
    for layer in index.graph:
        for nbrs in layer:
            blob += struct.pack("<I", len(nbrs))
            blob += np.asarray(nbrs, dtype="<i4").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_index(path: str | Path) -> AnnIndex:
    raw = Path(path).read_bytes()
    if raw[: len(_MAGIC)] != _MAGIC:
        raise DataError(f"not an index file (bad magic): {path}")
    off = len(_MAGIC)
    (meta_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = json.loads(raw[off : off + meta_len].decode())
    off += meta_len
    count, dim = meta["count"], meta["dim"]
    vec_bytes = count * dim * 4
    vectors = np.frombuffer(raw[off : off + vec_bytes], dtype="<f4").reshape(count, dim).copy()
    off += vec_bytes
    graph = []
    for _ in range(meta["layer_count"]):
        layer = []
        for _ in range(count):
            (n_nbrs,) = struct.unpack_from("<I", raw, off)
            off += 4
            nbrs = np.frombuffer(raw[off : off + 4 * n_nbrs], dtype="<i4")
            off += 4 * n_nbrs
            layer.append([int(x) for x in nbrs])
        graph.append(layer)
    if off != len(raw):
        raise DataError(f"trailing bytes in index file: {path}")
    index = AnnIndex(
        encoder_name=meta["encoder_name"],
        dim=dim,
        entries=[(m, int(s)) for m, s in meta["entries"]],
        vectors=vectors,
        build_params=meta["build_params"],
        query_params=meta["query_params"],
        levels=np.asarray(meta["levels"], dtype=np.int64),
        entry_point=int(meta["entry_point"]),
    )
    index.graph = graph
    return index
