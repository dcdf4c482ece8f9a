"""Mean oriented Riesz (MOR) image pairs and MORF histogram descriptors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .image import DimensionError, build_pyramid, level_shape
from .riesz import (
    QuatPhaseField,
    TemporalFilterConfig,
    amplify_phase,
    filter_phase_sequence,
    riesz_transform,
)


class AnnotationError(ValueError):
    """Onset/apex indices outside the sequence or out of order."""


@dataclass
class MorPair:
    mean_pc: np.ndarray
    mean_ps: np.ndarray
    level: int
    n_frames: int

    def __neg__(self) -> "MorPair":
        return MorPair(-self.mean_pc, -self.mean_ps, self.level, self.n_frames)


@dataclass(frozen=True)
class MorfParams:
    gx: int = 8
    gy: int = 8
    o: int = 6
    levels: Tuple[int, ...] = (2,)
    alpha: float = 1.0
    normalize: bool = False
    amplify_mode: str = "sine"

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
        if min(self.gx, self.gy, self.o) < 1:
            raise ValueError("gx, gy and o must be >= 1")
        if not self.levels or min(self.levels) < 1:
            raise ValueError("levels must be a non-empty list of indices >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.amplify_mode not in ("sine", "log"):
            raise ValueError(f"unknown amplify_mode {self.amplify_mode!r}")

    @property
    def segment_length(self) -> int:
        return self.gx * self.gy * self.o

    @property
    def length(self) -> int:
        return self.segment_length * len(self.levels)


@dataclass
class MorfDescriptor:
    values: np.ndarray
    params: MorfParams
    segments: List[Tuple[int, int]] = field(default_factory=list)

    def segment(self, level: int) -> np.ndarray:
        start, stop = self.segments[self.params.levels.index(level)]
        return self.values[start:stop]


def mean_oriented_riesz(phase_seq: Sequence[QuatPhaseField], f_o: int, f_a: int) -> MorPair:
    """Per-pixel mean of the phase fields ``f_o..f_a`` (inclusive)."""
    if not 0 <= f_o <= f_a < len(phase_seq):
        raise AnnotationError(
            f"need 0 <= onset ({f_o}) <= apex ({f_a}) < sequence length ({len(phase_seq)})"
        )
    acc_c = np.zeros(phase_seq[f_o].shape)
    acc_s = np.zeros(phase_seq[f_o].shape)
    for t in range(f_o, f_a + 1):
        acc_c += phase_seq[t].pc
        acc_s += phase_seq[t].ps
    n = f_a - f_o + 1
    return MorPair(acc_c / n, acc_s / n, phase_seq[f_o].level, n)


def magnitude_orientation(pair: MorPair) -> Tuple[np.ndarray, np.ndarray]:
    """Mean phase magnitude and four-quadrant orientation in ``(-pi, pi]``."""
    phi = np.hypot(pair.mean_pc, pair.mean_ps)
    theta = np.arctan2(pair.mean_ps, pair.mean_pc)
    theta = np.where(theta <= -np.pi, np.pi, theta)
    theta = np.where(phi == 0, 0.0, theta)
    return phi, theta


def cell_edges(n: int, g: int) -> np.ndarray:
    return (np.arange(g + 1) * n) // g


def grid_histogram(phi, theta, gx: int, gy: int, o: int, mask=None) -> np.ndarray:
    """Phase-weighted orientation histograms over a ``gy x gx`` cell grid.

    Output is cell-major (row, then column) with ``o`` bins per cell; bin 0
    starts at ``-pi``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    rows, cols = phi.shape
    if theta.shape != phi.shape:
        raise DimensionError("phi and theta must share dimensions")
    if gx > cols or gy > rows:
        raise DimensionError(f"grid {gx}x{gy} larger than image {cols}x{rows}")
    weights = phi
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != phi.shape:
            raise DimensionError(f"mask {mask.shape} does not match image {phi.shape}")
        weights = np.where(mask.astype(bool), phi, 0.0)
    bins = np.floor((theta + np.pi) * o / (2 * np.pi)).astype(np.int64)
    bins = np.clip(bins, 0, o - 1)
    row_cell = np.repeat(np.arange(gy), np.diff(cell_edges(rows, gy)))
    col_cell = np.repeat(np.arange(gx), np.diff(cell_edges(cols, gx)))
    cell = row_cell[:, None] * gx + col_cell[None, :]
    index = cell * o + bins
    return np.bincount(index.ravel(), weights=weights.ravel(), minlength=gx * gy * o)


def downsample_mask(mask, level: int) -> np.ndarray:
    """Nearest-sample a full-resolution mask onto pyramid ``level``."""
    step = 2 ** (level - 1)
    return np.asarray(mask)[::step, ::step]


def level_pair(frames, f_o: int, f_a: int, level: int, params: MorfParams,
               filter_cfg: TemporalFilterConfig, pyramids=None) -> MorPair:
    """MOR pair of one pyramid level."""
    if pyramids is None:
        pyramids = [build_pyramid(f, level) for f in frames]
    mono = [riesz_transform(p.band(level), level) for p in pyramids]
    phase = filter_phase_sequence(mono, filter_cfg)
    if params.alpha != 1:
        phase = [amplify_phase(p, params.alpha, params.amplify_mode) for p in phase]
    return mean_oriented_riesz(phase, f_o, f_a)


def extract_morf(
    seq: Sequence[np.ndarray],
    annotation,
    params: MorfParams,
    filter_cfg: TemporalFilterConfig,
    mask=None,
) -> MorfDescriptor:
    """MORF descriptor of a frame sequence.

    ``annotation`` is either ``(f_o, f_a)`` or an object with ``f_onset`` and
    ``f_apex`` attributes.  Levels are processed in ascending order and their
    histograms concatenated.
    """
    if hasattr(annotation, "f_onset"):
        f_o, f_a = annotation.f_onset, annotation.f_apex
    else:
        f_o, f_a = annotation
    if len(seq) < 2:
        raise AnnotationError("sequence needs at least 2 frames")
    if not 0 <= f_o <= f_a < len(seq):
        raise AnnotationError(f"onset/apex ({f_o}, {f_a}) invalid for {len(seq)} frames")
    shape = np.shape(seq[0])
    levels = sorted(params.levels)
    top = levels[-1]
    if min(shape) < 2**top:
        raise DimensionError(f"frames {shape} too small for pyramid level {top}")
    for lev in levels:
        rows, cols = level_shape(shape, lev)
        if rows < max(3, params.gy) or cols < max(3, params.gx):
            raise DimensionError(
                f"level {lev} band is {cols}x{rows}, too small for a {params.gx}x{params.gy} grid"
            )
    # phase is accumulated from the onset, so earlier frames are not needed
    window = list(seq[f_o:f_a + 1])
    if len(window) == 1:
        window = window * 2
    pyramids = [build_pyramid(f, top) for f in window]

    fields = {}
    for lev in levels:
        pair = level_pair(window, 0, f_a - f_o, lev, params, filter_cfg, pyramids)
        fields[lev] = magnitude_orientation(pair)
    return assemble_descriptor(fields, params, mask)


def assemble_descriptor(fields, params: MorfParams, mask=None) -> MorfDescriptor:
    """Histogram and concatenate per-level ``{level: (phi, theta)}`` fields."""
    levels = sorted(params.levels)
    parts, segments, start = [], [], 0
    for lev in levels:
        phi, theta = fields[lev]
        lmask = None if mask is None else downsample_mask(mask, lev)
        hist = grid_histogram(phi, theta, params.gx, params.gy, params.o, lmask)
        if params.normalize:
            norm = np.sqrt(np.dot(hist, hist))
            if norm > 0:
                hist = hist / norm
        parts.append(hist)
        segments.append((start, start + hist.size))
        start += hist.size
    ordered = MorfParams(params.gx, params.gy, params.o, tuple(levels), params.alpha,
                         params.normalize, params.amplify_mode)
    return MorfDescriptor(np.concatenate(parts), ordered, segments)
