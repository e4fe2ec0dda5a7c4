"""Reference optical flow for synthetic inputs: block-matching SAD plus
per-shot averaging.

This stands in for heavier dense-flow estimators so the flow-scoring path can
be exercised end to end with checkable fixtures; it makes no fidelity claim
beyond exact recovery of integer translations on textured frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class FrameGray:
    """A grayscale frame with pixel values in [0, 1], shape (H, W)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 2:
            raise DataError(f"frame must be 2-dimensional, got shape {p.shape}")
        if p.size == 0:
            raise DataError("frame must be non-empty")
        if p.min() < 0.0 or p.max() > 1.0:
            raise DataError("frame values must lie in [0, 1]")
        self.pixels = p

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class FlowField:
    """Per-pixel displacement, shape (H, W, 2): channel 0 dx, channel 1 dy."""

    field: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.field, dtype=np.float64)
        if f.ndim != 3 or f.shape[2] != 2:
            raise DataError(f"flow field must have shape (H, W, 2), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise DataError("flow field contains NaN or Inf")
        self.field = f

    @property
    def height(self) -> int:
        return self.field.shape[0]

    @property
    def width(self) -> int:
        return self.field.shape[1]


def _candidate_displacements(radius: int) -> list[tuple[int, int]]:
    # preference order for SAD ties: smallest |d|^2, then (dy, dx)
    cands = [
        (dy, dx)
        for dy in range(-radius, radius + 1)
        for dx in range(-radius, radius + 1)
    ]
    cands.sort(key=lambda d: (d[0] * d[0] + d[1] * d[1], d[0], d[1]))
    return cands


def block_matching_flow(
    f1: FrameGray, f2: FrameGray, block: int, search_radius: int
) -> FlowField:
    """Integer block displacements from f1 to f2 minimizing sum of absolute
    differences within +-search_radius.

    The winning displacement of each block is broadcast to all its pixels.
    Displacements that would shift a block outside the frame are not
    evaluated for that block, so border blocks search a clamped window.
    """
    if (f1.height, f1.width) != (f2.height, f2.width):
        raise DataError(
            f"frame dimensions differ: {f1.width}x{f1.height} vs {f2.width}x{f2.height}"
        )
    if block < 1 or search_radius < 1:
        raise DataError("block and search_radius must be positive")
    h, w = f1.height, f1.width
    if h % block or w % block:
        raise DataError(f"block size {block} must divide frame dimensions {w}x{h}")
    nby, nbx = h // block, w // block

    a = f1.pixels
    b = f2.pixels
    best_sad = np.full((nby, nbx), np.inf)
    best = np.zeros((nby, nbx, 2))  # (dx, dy) per block

    for dy, dx in _candidate_displacements(search_radius):
        # block row by is valid iff 0 <= by*block + dy and (by+1)*block + dy <= h
        by_lo = max(0, (-dy + block - 1) // block)
        by_hi = (h - block - dy) // block
        bx_lo = max(0, (-dx + block - 1) // block)
        bx_hi = (w - block - dx) // block
        if by_lo > by_hi or bx_lo > bx_hi:
            continue
        y0, y1 = by_lo * block, (by_hi + 1) * block
        x0, x1 = bx_lo * block, (bx_hi + 1) * block
        diff = np.abs(a[y0:y1, x0:x1] - b[y0 + dy : y1 + dy, x0 + dx : x1 + dx])
        sad = diff.reshape(by_hi - by_lo + 1, block, bx_hi - bx_lo + 1, block).sum(axis=(1, 3))
        region = np.s_[by_lo : by_hi + 1, bx_lo : bx_hi + 1]
        better = sad < best_sad[region]
        best_sad[region] = np.where(better, sad, best_sad[region])
        best[region] = np.where(better[..., None], np.array([dx, dy], dtype=float), best[region])

    field = np.repeat(np.repeat(best, block, axis=0), block, axis=1)
    return FlowField(field)


def average_flow(fields: list[FlowField]) -> FlowField:
    """Per-pixel arithmetic mean of flow fields with uniform dimensions."""
    if not fields:
        raise DataError("average_flow requires at least one field")
    shape = fields[0].field.shape
    for f in fields[1:]:
        if f.field.shape != shape:
            raise DataError(f"flow field shapes differ: {f.field.shape} vs {shape}")
    return FlowField(np.mean([f.field for f in fields], axis=0))


def shot_flow_summary(
    frames: list[FrameGray], stride: int = 1, block: int = 4, search_radius: int = 3
) -> FlowField:
    """Average block-matching flow over frame pairs (t, t+stride) for
    t = 0, stride, 2*stride, ...

    The mean is over the sampled pairs (fields are not rescaled by stride;
    cosine scoring is scale-invariant).
    """
    if stride < 1:
        raise DataError("stride must be positive")
    if len(frames) < stride + 1:
        raise DataError(
            f"need at least stride+1={stride + 1} frames, got {len(frames)}"
        )
    fields = []
    t = 0
    while t + stride < len(frames):
        fields.append(block_matching_flow(frames[t], frames[t + stride], block, search_radius))
        t += stride
    return average_flow(fields)
