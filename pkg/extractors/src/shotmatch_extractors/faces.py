"""Face counting on a shot's center frame.

The paper's face detector is a pretrained face-recognition network, which is
not redistributable here; the adapters are pluggable and the pack records
which one ran. The cascade adapter uses an OpenCV Haar cascade XML when one
is available; the blob counter is the deterministic stand-in for tests.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np


class HaarFaceCounter:
    def __init__(self, cascade_path: str | Path):
        cascade = cv2.CascadeClassifier(str(cascade_path))
        if cascade.empty():
            raise ValueError(f"cannot load Haar cascade: {cascade_path}")
        self._cascade = cascade
        self.model_id = f"haar-cascade:{Path(cascade_path).name}"

    def count_faces(self, rgb: np.ndarray) -> int:
        gray = cv2.cvtColor(rgb, cv2.COLOR_RGB2GRAY)
        faces = self._cascade.detectMultiScale(gray, scaleFactor=1.1, minNeighbors=4)
        return len(faces)


class BrightBlobFaceCounter:
    """Counts connected bright regions; a stand-in with the same interface."""

    model_id = "bright-blob-faces"

    def __init__(self, threshold: int = 128):
        self.threshold = threshold

    def count_faces(self, rgb: np.ndarray) -> int:
        gray = cv2.cvtColor(rgb, cv2.COLOR_RGB2GRAY)
        count, _ = cv2.connectedComponents((gray >= self.threshold).astype(np.uint8))
        return count - 1  # background component excluded
