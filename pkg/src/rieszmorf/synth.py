"""Synthetic moving-circle stimuli and a frequency-domain Riesz reference."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dataset import DatasetManifest, SequenceAnnotation, save_manifest
from .image import as_frame, write_pgm
from .riesz import MonogenicLevel

DIRECTIONS = {
    "right": (1.0, 0.0),
    "left": (-1.0, 0.0),
    "down": (0.0, 1.0),
    "up": (0.0, -1.0),
}


class SpecError(ValueError):
    """Synthetic stimulus parameters are inconsistent."""


@dataclass
class SyntheticSpec:
    width: int
    height: int
    radius: float
    path: List[Tuple[float, float]]
    edge_softness: float = 1.0
    noise_sigma: float = 0.0
    seed: int = 0

    def validate(self) -> "SyntheticSpec":
        if not self.path:
            raise SpecError("path must contain at least one position")
        if self.radius <= 0 or self.edge_softness < 0:
            raise SpecError("radius must be positive and edge softness non-negative")
        reach = self.radius + self.edge_softness / 2.0
        for x, y in self.path:
            if x - reach < 0 or y - reach < 0 or x + reach > self.width - 1 or y + reach > self.height - 1:
                raise SpecError(f"circle at ({x:.2f}, {y:.2f}) with radius {self.radius} exits the frame")
        return self


def smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def render_circle(width, height, cx, cy, radius, softness=1.0) -> np.ndarray:
    """Disc of intensity 1 on 0, pixel centers at integer coordinates."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    dist = np.hypot(xx - cx, yy - cy)
    if softness <= 0:
        return (dist <= radius).astype(np.float64)
    return smoothstep((radius + softness / 2.0 - dist) / softness)


def render_circle_sequence(spec: SyntheticSpec) -> List[np.ndarray]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    frames = []
    for cx, cy in spec.path:
        frame = render_circle(spec.width, spec.height, cx, cy, spec.radius, spec.edge_softness)
        if spec.noise_sigma > 0:
            frame = frame + rng.normal(0.0, spec.noise_sigma, frame.shape)
        frames.append(frame)
    return frames


def spectral_riesz_oracle(frame) -> MonogenicLevel:
    """Exact Riesz transform by DFT, multiplier ``i w_l / |w|`` (0 at DC).

    Uses numpy's transform convention (forward kernel ``exp(-i w x)``), under
    which the three-tap ``[0.5, 0, -0.5]`` filter has response ``i sin(w)``;
    both therefore map ``cos(w0 x)`` to ``-sin(w0 x)``.
    """
    frame = as_frame(frame)
    rows, cols = frame.shape
    w1 = 2 * np.pi * np.fft.fftfreq(cols)[None, :]
    w2 = 2 * np.pi * np.fft.fftfreq(rows)[:, None]
    norm = np.hypot(w1, w2)
    norm[0, 0] = 1.0
    spec = np.fft.fft2(frame)
    h1 = 1j * w1 / norm
    h2 = 1j * w2 / norm
    h1[0, 0] = h2[0, 0] = 0.0
    r1 = np.fft.ifft2(spec * h1).real
    r2 = np.fft.ifft2(spec * h2).real
    return MonogenicLevel(frame, r1, r2)


def linear_path(start, direction, step, n_frames) -> List[Tuple[float, float]]:
    dx, dy = direction
    return [(start[0] + dx * step * t, start[1] + dy * step * t) for t in range(n_frames)]


@dataclass
class MotionDatasetConfig:
    classes: Sequence[str] = ("right", "left", "up")
    subjects: int = 10
    reps: int = 3
    noise_sigma: float = 0.01
    seed: int = 0
    size: int = 64
    n_frames: int = 16
    fps: float = 100.0
    radius: Tuple[float, float] = (12.0, 18.0)
    center_jitter: float = 4.0
    # total displacement over the clip, in pixels
    displacement: Tuple[float, float] = (1.0, 2.0)
    edge_softness: float = 1.0

    def direction(self, name: str) -> Tuple[float, float]:
        if name in DIRECTIONS:
            return DIRECTIONS[name]
        try:
            angle = math.radians(float(name))
        except ValueError:
            raise SpecError(f"unknown motion class {name!r}") from None
        return math.cos(angle), math.sin(angle)


def make_motion_dataset(out_dir, cfg: Optional[MotionDatasetConfig] = None) -> Tuple[DatasetManifest, str]:
    """Write a circle-motion dataset (16-bit PGM frames) plus ``manifest.json``.

    Every subject gets its own radius, center and speed; repetitions add a
    smaller per-clip jitter.  The class fixes the motion direction.
    Returns the manifest and its path.
    """
    cfg = cfg or MotionDatasetConfig()
    if len(cfg.classes) < 2:
        raise SpecError("need at least 2 motion classes")
    if cfg.subjects < 2:
        raise SpecError("need at least 2 subjects for leave-one-subject-out evaluation")
    dirs = [cfg.direction(c) for c in cfg.classes]
    rng = np.random.default_rng(cfg.seed)
    os.makedirs(out_dir, exist_ok=True)
    mid = (cfg.size - 1) / 2.0
    sequences = []
    for s in range(cfg.subjects):
        subject = f"sub{s + 1:02d}"
        radius = rng.uniform(*cfg.radius)
        center = mid + rng.uniform(-cfg.center_jitter, cfg.center_jitter, size=2)
        travel = rng.uniform(*cfg.displacement)
        for c, (label, direction) in enumerate(zip(cfg.classes, dirs)):
            for r in range(cfg.reps):
                seq_id = f"{subject}_{label}_{r + 1:02d}"
                start = center + rng.uniform(-0.5, 0.5, size=2)
                step = travel * rng.uniform(0.9, 1.1) / (cfg.n_frames - 1)
                path = linear_path(start, direction, step, cfg.n_frames)
                spec = SyntheticSpec(
                    cfg.size, cfg.size, radius, path, cfg.edge_softness,
                    cfg.noise_sigma, int(rng.integers(2**31)),
                )
                rel = os.path.join(subject, seq_id)
                seq_dir = os.path.join(out_dir, rel)
                os.makedirs(seq_dir, exist_ok=True)
                for t, frame in enumerate(render_circle_sequence(spec)):
                    write_pgm(os.path.join(seq_dir, f"frame_{t:04d}.pgm"), frame)
                sequences.append(SequenceAnnotation(
                    id=seq_id, subject_id=subject, label=label, frames_dir=rel,
                    f_onset=0, f_apex=cfg.n_frames - 1, fps=cfg.fps,
                    f_offset=cfg.n_frames - 1,
                ))
    manifest = DatasetManifest("synthetic-motion", list(cfg.classes), sequences,
                               root=os.path.abspath(out_dir)).validate()
    path = os.path.join(out_dir, "manifest.json")
    save_manifest(manifest, path)
    return manifest, path
