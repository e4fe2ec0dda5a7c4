"""Per-shot dense optical flow summaries via OpenCV Farneback."""

from __future__ import annotations

import cv2
import numpy as np

FARNEBACK_PARAMS = dict(
    pyr_scale=0.5, levels=3, winsize=15, iterations=3, poly_n=5, poly_sigma=1.2, flags=0
)
FLOW_STRIDE = 4  # sample every 4 frames


def farneback_flow(frame_a: np.ndarray, frame_b: np.ndarray) -> np.ndarray:
    """(H, W, 2) displacement field between two RGB frames."""
    ga = cv2.cvtColor(frame_a, cv2.COLOR_RGB2GRAY)
    gb = cv2.cvtColor(frame_b, cv2.COLOR_RGB2GRAY)
    return cv2.calcOpticalFlowFarneback(ga, gb, None, **FARNEBACK_PARAMS).astype(np.float64)


def shot_flow_summary(frames: list[np.ndarray], stride: int = FLOW_STRIDE) -> np.ndarray:
    """Mean flow over frame pairs (t, t+stride) for t = 0, stride, ...; falls
    back to consecutive frames when the shot is shorter than the stride."""
    if len(frames) < 2:
        raise ValueError("need at least two frames for a flow summary")
    effective = stride if len(frames) > stride else 1
    fields = []
    t = 0
    while t + effective < len(frames):
        fields.append(farneback_flow(frames[t], frames[t + effective]))
        t += effective
    return np.mean(fields, axis=0)
