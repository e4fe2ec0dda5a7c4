"""Person instance masks from a segmentation model's raw detections.

A segmenter returns torchvision-style detections for one RGB frame:
{"masks": (N, 1, H, W) float in [0, 1], "labels": (N,), "scores": (N,)}.
Detections are filtered to the person class at a 0.5 score threshold and the
soft masks binarized at 0.5.
"""

from __future__ import annotations

import numpy as np

PERSON_LABEL = 1  # COCO class id for "person"
SCORE_THRESHOLD = 0.5
MASK_THRESHOLD = 0.5


def person_masks_from_detections(detections: dict) -> list[np.ndarray]:
    """Binary (H, W) person masks from raw detections, best score first."""
    masks = np.asarray(detections["masks"], dtype=np.float64)
    labels = np.asarray(detections["labels"]).ravel()
    scores = np.asarray(detections["scores"], dtype=np.float64).ravel()
    if masks.ndim == 4:
        masks = masks[:, 0]
    keep = [
        i
        for i in np.argsort(-scores, kind="stable")
        if labels[i] == PERSON_LABEL and scores[i] >= SCORE_THRESHOLD
    ]
    return [masks[i] >= MASK_THRESHOLD for i in keep]


class TorchvisionSegmenter:
    """Mask R-CNN (ResNet-50 FPN) adapter; weights=None runs the architecture
    without pretrained parameters, for plumbing checks offline."""

    def __init__(self, weights=None, min_size: int = 320):
        import torch
        from torchvision.models.detection import maskrcnn_resnet50_fpn

        self._torch = torch
        model = maskrcnn_resnet50_fpn(
            weights=weights, weights_backbone=None if weights is None else "DEFAULT",
            min_size=min_size, max_size=min_size * 2,
        )
        model.eval()
        self._model = model
        self.model_id = "torchvision:maskrcnn_resnet50_fpn" + (
            ":pretrained" if weights is not None else ":random-init"
        )

    def detect(self, rgb: np.ndarray) -> dict:
        torch = self._torch
        x = torch.from_numpy(rgb.astype(np.float32) / 255.0).permute(2, 0, 1)
        with torch.no_grad():
            out = self._model([x])[0]
        return {
            "masks": out["masks"].numpy(),
            "labels": out["labels"].numpy(),
            "scores": out["scores"].numpy(),
        }


class BrightBlobSegmenter:
    """Deterministic stand-in segmenter: connected bright regions become
    person detections with score 1.0."""

    model_id = "bright-blob"

    def __init__(self, threshold: int = 128):
        self.threshold = threshold

    def detect(self, rgb: np.ndarray) -> dict:
        import cv2

        gray = cv2.cvtColor(rgb, cv2.COLOR_RGB2GRAY)
        binary = (gray >= self.threshold).astype(np.uint8)
        count, components = cv2.connectedComponents(binary)
        masks = []
        for label in range(1, count):
            masks.append((components == label).astype(np.float64))
        if not masks:
            h, w = gray.shape
            return {
                "masks": np.zeros((0, 1, h, w)),
                "labels": np.zeros(0, dtype=int),
                "scores": np.zeros(0),
            }
        stacked = np.stack(masks)[:, None]
        return {
            "masks": stacked,
            "labels": np.full(len(masks), PERSON_LABEL, dtype=int),
            "scores": np.ones(len(masks)),
        }
