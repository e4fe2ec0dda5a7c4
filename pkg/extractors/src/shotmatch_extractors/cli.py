"""Command line: emit a movie pack from a video (or frame directory).

By default the deterministic built-in encoders run, so the command works
without model weights; pass --torchvision to use the real architectures
(pretrained weights required for meaningful output).
"""

from __future__ import annotations

import argparse
import sys

from .encoders import (
    MeanFrameClipEncoder,
    SpectrumWindowEncoder,
    TinyImageEncoder,
)
from .extract import ExtractorSpec, extract
from .faces import BrightBlobFaceCounter
from .masks import BrightBlobSegmenter


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shotmatch-extract",
        description="Run extractors over a title and write a movie pack.",
    )
    parser.add_argument("--source", required=True, help="video file or frame directory")
    parser.add_argument("--shots", required=True, help="CSV: shot_index,start_frame,end_frame")
    parser.add_argument("--movie-id", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--fps", type=float, default=None)
    parser.add_argument(
        "--image-encoders", nargs="*", default=["dedup", "custom:tiny-image"],
        help="center-frame feature packs to emit (built-in encoder unless --torchvision)",
    )
    parser.add_argument("--clip-encoder", help="emit an every-4th-frame clip feature pack")
    parser.add_argument("--with-masks", action="store_true")
    parser.add_argument("--with-faces", action="store_true")
    parser.add_argument("--with-flow", action="store_true")
    parser.add_argument("--audio", help="16 kHz mono WAV sidecar; emits a yamnet-style pack")
    parser.add_argument("--torchvision", action="store_true",
                        help="use torchvision architectures where mapped")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    specs = []
    for name in args.image_encoders:
        if args.torchvision:
            from .encoders import TorchvisionImageEncoder

            encoder = TorchvisionImageEncoder(name, weights="DEFAULT")
        else:
            encoder = TinyImageEncoder(name=name, dim=1024 if name == "dedup" else 64)
        specs.append(ExtractorSpec(encoder_name=name, sampling="center_frame", encoder=encoder))
    if args.clip_encoder:
        clip = MeanFrameClipEncoder(TinyImageEncoder(name=args.clip_encoder), args.clip_encoder)
        specs.append(ExtractorSpec(encoder_name=args.clip_encoder, sampling="every_4", encoder=clip))

    audio_spec = None
    if args.audio:
        audio_spec = ExtractorSpec(
            encoder_name="yamnet", sampling="audio_windows", encoder=SpectrumWindowEncoder()
        )

    try:
        out = extract(
            args.source,
            args.shots,
            args.out,
            movie_id=args.movie_id,
            feature_specs=specs,
            segmenter=BrightBlobSegmenter() if args.with_masks else None,
            face_counter=BrightBlobFaceCounter() if args.with_faces else None,
            with_flow=args.with_flow,
            audio_path=args.audio,
            audio_spec=audio_spec,
            fps=args.fps,
        )
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    sys.stdout.write(f"{out}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
