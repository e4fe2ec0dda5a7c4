"""Shot boundary ingestion from a simple CSV: shot_index,start_frame,end_frame."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Shot:
    shot_index: int
    start_frame: int
    end_frame: int  # exclusive

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame


def read_shot_csv(path: str | Path) -> list[Shot]:
    """Parse shot boundaries; an optional header row is skipped.

    Shots must be 1-indexed, contiguous, and non-overlapping.
    """
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("shot_index", ""):
                continue
            rows.append(Shot(int(row[0]), int(row[1]), int(row[2])))
    rows.sort(key=lambda s: s.shot_index)
    if [s.shot_index for s in rows] != list(range(1, len(rows) + 1)):
        raise ValueError("shot_index column must cover exactly 1..n")
    for shot in rows:
        if shot.end_frame <= shot.start_frame:
            raise ValueError(f"shot {shot.shot_index} has an empty frame range")
    for prev, cur in zip(rows, rows[1:]):
        if cur.start_frame != prev.end_frame:
            raise ValueError(
                f"shots {prev.shot_index} and {cur.shot_index} are not contiguous"
            )
    if not rows:
        raise ValueError(f"no shots found in {path}")
    return rows
