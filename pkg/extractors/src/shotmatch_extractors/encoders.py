"""Image, video, and audio embedding adapters.

Every adapter reduces to: sample frames (or audio windows) per its policy,
embed each sample, aggregate to one vector per shot. The built-in
``custom:*`` encoders are deterministic numpy stand-ins that run anywhere;
the torchvision adapters load real architectures and accept either
pretrained weights (when downloadable) or a local checkpoint, recording the
exact model identity so packs are self-describing.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

AUDIO_WINDOW_SECONDS = 0.48
AUDIO_SAMPLE_RATE = 16_000


class TinyImageEncoder:
    """Deterministic stand-in image encoder: 16x16 grayscale thumbnail
    projected through a seeded gaussian matrix."""

    def __init__(self, name: str = "custom:tiny-image", dim: int = 64, seed: int = 0):
        self.name = name
        self.dim = dim
        rng = np.random.default_rng(seed)
        self._projection = rng.normal(size=(256, dim)) / np.sqrt(256)

    @property
    def model_id(self) -> str:
        return f"tiny-image(dim={self.dim})"

    def embed_image(self, rgb: np.ndarray) -> np.ndarray:
        gray = cv2.cvtColor(rgb, cv2.COLOR_RGB2GRAY)
        thumb = cv2.resize(gray, (16, 16), interpolation=cv2.INTER_AREA)
        return (thumb.astype(np.float64).ravel() / 255.0) @ self._projection


@dataclass
class CallableImageEncoder:
    """Wrap any frame -> vector function as an encoder."""

    name: str
    dim: int
    fn: object
    model_id: str = "callable"

    def embed_image(self, rgb: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(rgb), dtype=np.float64).ravel()


class TorchvisionImageEncoder:
    """Penultimate-layer embeddings from a torchvision classifier.

    ``weights`` may be a torchvision weights enum value, None (random
    initialization, for plumbing tests without network access), or a path to
    a state-dict checkpoint.
    """

    ARCHS = {
        # encoder name -> (constructor name, penultimate dim)
        "rn50": ("resnet50", 2048),
        "en7": ("efficientnet_b7", 2560),
        "dedup": ("mobilenet_v3_small", 1024),
    }

    def __init__(self, name: str, weights=None, checkpoint: str | None = None):
        if name not in self.ARCHS:
            raise ValueError(f"no torchvision mapping for encoder {name!r}")
        import torch
        import torchvision.models as models

        arch, dim = self.ARCHS[name]
        self.name = name
        self.dim = dim
        self._torch = torch
        model = getattr(models, arch)(weights=weights)
        if checkpoint:
            state = torch.load(checkpoint, map_location="cpu")
            model.load_state_dict(state)
        model.eval()
        self._model = model
        self._arch = arch
        self.model_id = f"torchvision:{arch}" + (
            ":pretrained" if weights is not None else ":random-init"
        )

    def embed_image(self, rgb: np.ndarray) -> np.ndarray:
        torch = self._torch
        x = cv2.resize(rgb, (224, 224), interpolation=cv2.INTER_AREA)
        x = torch.from_numpy(x.astype(np.float32) / 255.0).permute(2, 0, 1)[None]
        mean = torch.tensor([0.485, 0.456, 0.406]).view(1, 3, 1, 1)
        std = torch.tensor([0.229, 0.224, 0.225]).view(1, 3, 1, 1)
        x = (x - mean) / std
        with torch.no_grad():
            if self._arch == "resnet50":
                m = self._model
                h = m.conv1(x); h = m.bn1(h); h = m.relu(h); h = m.maxpool(h)
                h = m.layer1(h); h = m.layer2(h); h = m.layer3(h); h = m.layer4(h)
                h = m.avgpool(h).flatten(1)
            elif self._arch == "efficientnet_b7":
                h = self._model.features(x)
                h = self._model.avgpool(h).flatten(1)
            else:  # mobilenet_v3_small: penultimate = classifier up to 1024 units
                m = self._model
                h = m.features(x)
                h = m.avgpool(h).flatten(1)
                h = m.classifier[0](h)
                h = m.classifier[1](h)
        return h[0].numpy().astype(np.float64)


class TorchvisionVideoEncoder:
    """Clip embeddings from torchvision's r2plus1d_18 (penultimate pooling)."""

    def __init__(self, name: str = "r2p1d", weights=None, frames_per_clip: int = 16):
        import torch
        import torchvision.models.video as video_models

        self.name = name
        self.dim = 512
        self.frames_per_clip = frames_per_clip
        self._torch = torch
        model = video_models.r2plus1d_18(weights=weights)
        model.eval()
        self._model = model
        self.model_id = "torchvision:r2plus1d_18" + (
            ":pretrained" if weights is not None else ":random-init"
        )

    def embed_clip(self, frames: list[np.ndarray]) -> np.ndarray:
        torch = self._torch
        picks = np.linspace(0, len(frames) - 1, self.frames_per_clip).round().astype(int)
        clip = np.stack([cv2.resize(frames[i], (112, 112)) for i in picks])
        x = torch.from_numpy(clip.astype(np.float32) / 255.0).permute(3, 0, 1, 2)[None]
        mean = torch.tensor([0.43216, 0.394666, 0.37645]).view(1, 3, 1, 1, 1)
        std = torch.tensor([0.22803, 0.22145, 0.216989]).view(1, 3, 1, 1, 1)
        x = (x - mean) / std
        m = self._model
        with torch.no_grad():
            h = m.stem(x)
            h = m.layer1(h); h = m.layer2(h); h = m.layer3(h); h = m.layer4(h)
            h = m.avgpool(h).flatten(1)
        return h[0].numpy().astype(np.float64)


class MeanFrameClipEncoder:
    """Video-clip embedding as the mean of per-frame image embeddings; the
    stand-in for clip-level encoders when no video model is available."""

    def __init__(self, image_encoder, name: str):
        self.image_encoder = image_encoder
        self.name = name
        self.dim = image_encoder.dim
        self.model_id = f"mean-frames({image_encoder.model_id})"

    def embed_clip(self, frames: list[np.ndarray]) -> np.ndarray:
        return np.mean([self.image_encoder.embed_image(f) for f in frames], axis=0)


# -- audio -----------------------------------------------------------------


def read_wav_mono_16k(path: str | Path) -> np.ndarray:
    """Samples in [-1, 1] from a 16 kHz WAV file; stereo is averaged down."""
    with wave.open(str(path), "rb") as fh:
        rate = fh.getframerate()
        if rate != AUDIO_SAMPLE_RATE:
            raise ValueError(f"expected {AUDIO_SAMPLE_RATE} Hz audio, got {rate}")
        width = fh.getsampwidth()
        if width != 2:
            raise ValueError(f"expected 16-bit samples, got {8 * width}-bit")
        channels = fh.getnchannels()
        raw = np.frombuffer(fh.readframes(fh.getnframes()), dtype="<i2")
    samples = raw.reshape(-1, channels).mean(axis=1) if channels > 1 else raw.astype(np.float64)
    return samples / 32768.0


class SpectrumWindowEncoder:
    """Deterministic audio-window embedding: log magnitudes of the window's
    spectrum folded into fixed bins."""

    def __init__(self, name: str = "custom:audio-spectrum", dim: int = 64):
        self.name = name
        self.dim = dim
        self.model_id = f"audio-spectrum(dim={dim})"

    def embed_window(self, samples: np.ndarray) -> np.ndarray:
        mags = np.abs(np.fft.rfft(samples))
        bins = np.array_split(mags, self.dim)
        return np.log1p(np.array([b.mean() if len(b) else 0.0 for b in bins]))


def audio_shot_embedding(samples: np.ndarray, window_encoder) -> tuple[np.ndarray, int]:
    """Mean embedding over non-overlapping 0.48 s windows; returns the vector
    and the number of windows used. Audio shorter than one window is
    zero-padded up to a single window."""
    window = int(AUDIO_WINDOW_SECONDS * AUDIO_SAMPLE_RATE)
    if len(samples) == 0:
        raise ValueError("empty audio for shot")
    if len(samples) < window:
        samples = np.concatenate([samples, np.zeros(window - len(samples))])
    n_windows = len(samples) // window
    embeddings = [
        window_encoder.embed_window(samples[k * window : (k + 1) * window])
        for k in range(n_windows)
    ]
    return np.mean(embeddings, axis=0), n_windows
