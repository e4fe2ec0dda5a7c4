"""Frame access and the sampling policies the encoders need.

A FrameSource abstracts over a decodable video file or a directory of image
files (sorted by name). Frames are RGB uint8 arrays.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


def center_frame_offset(frame_count: int) -> int:
    """Offset of a shot's center frame from its first frame: floor(l / 2)."""
    if frame_count < 1:
        raise ValueError(f"frame_count must be positive, got {frame_count}")
    return frame_count // 2


class FrameSource:
    """Random access to the frames of one title."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._frames: list[Path] | None = None
        self._video: cv2.VideoCapture | None = None
        if self.path.is_dir():
            self._frames = sorted(
                p for p in self.path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
            )
            if not self._frames:
                raise ValueError(f"no image frames found in {self.path}")
            self._count = len(self._frames)
            self._fps = 24.0
        else:
            video = cv2.VideoCapture(str(self.path))
            if not video.isOpened():
                raise ValueError(f"cannot decode video: {self.path}")
            self._video = video
            self._count = int(video.get(cv2.CAP_PROP_FRAME_COUNT))
            fps = float(video.get(cv2.CAP_PROP_FPS))
            self._fps = fps if fps > 0 else 24.0

    def __len__(self) -> int:
        return self._count

    @property
    def fps(self) -> float:
        return self._fps

    def frame(self, index: int) -> np.ndarray:
        """Frame ``index`` as an RGB uint8 array of shape (H, W, 3)."""
        if not 0 <= index < self._count:
            raise IndexError(f"frame {index} out of range 0..{self._count - 1}")
        if self._frames is not None:
            bgr = cv2.imread(str(self._frames[index]), cv2.IMREAD_COLOR)
            if bgr is None:
                raise ValueError(f"unreadable frame file: {self._frames[index]}")
        else:
            self._video.set(cv2.CAP_PROP_POS_FRAMES, index)
            ok, bgr = self._video.read()
            if not ok:
                raise ValueError(f"failed to decode frame {index} of {self.path}")
        return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)

    def close(self) -> None:
        if self._video is not None:
            self._video.release()


# -- sampling policies ---------------------------------------------------------


def every_nth_offsets(frame_count: int, stride: int = 4) -> list[int]:
    """Offsets 0, stride, 2*stride, ... within a shot."""
    return list(range(0, frame_count, stride))


def fps_capped_offsets(frame_count: int, fps: float, cap: int = 100) -> list[int]:
    """One frame per second, then a uniform subsample down to ``cap`` frames."""
    step = max(int(round(fps)), 1)
    offsets = list(range(0, frame_count, step))
    if len(offsets) <= cap:
        return offsets
    picks = np.linspace(0, len(offsets) - 1, cap).round().astype(int)
    return [offsets[i] for i in picks]


def multi_view_offsets(
    frame_count: int, views: int = 4, view_len: int = 32, stride: int = 2
) -> list[list[int]]:
    """``views`` uniformly placed windows of ``view_len`` frames sampled with
    temporal ``stride``; offsets clamp to the shot for short shots."""
    span = (view_len - 1) * stride
    starts = np.linspace(0, max(frame_count - 1 - span, 0), views).round().astype(int)
    result = []
    for start in starts:
        view = [min(int(start + k * stride), frame_count - 1) for k in range(view_len)]
        result.append(view)
    return result
