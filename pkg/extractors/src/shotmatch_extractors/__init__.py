"""Turn videos (or frame directories) into shotmatch movie packs.

The adapters here run pretrained encoders, instance segmentation, face
counting, and dense optical flow over shots defined by a boundary CSV, then
write the results in the movie-pack directory format the ranking engine
loads. Nothing in this package imports the ranking engine; the file format
is the contract between the two.
"""

from .boundaries import Shot, read_shot_csv
from .extract import ExtractorSpec, extract
from .frames import FrameSource, center_frame_offset
from .packs import PackWriter

__all__ = [
    "ExtractorSpec",
    "FrameSource",
    "PackWriter",
    "Shot",
    "center_frame_offset",
    "extract",
    "read_shot_csv",
]

__version__ = "0.1.0"
