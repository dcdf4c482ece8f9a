"""Approximate Riesz transform, quaternionic phase and its temporal processing.

A subband pixel ``I`` and its Riesz responses ``(R1, R2)`` form the
quaternion ``q = I + i R1 + j R2``.  With ``I = A cos(phi)``,
``R1 = A sin(phi) cos(theta)`` and ``R2 = A sin(phi) sin(theta)`` the
quaternionic phase is the pair ``(phi cos(theta), phi sin(theta))``, which is
the same for both solutions ``(A, phi, theta)`` and ``(A, -phi, theta + pi)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage, signal

from .image import DimensionError, StructureError, as_frame

EPS = 1e-10


class SequenceError(ValueError):
    """Too few frames or inconsistent frame sizes in a sequence."""


class ConfigError(ValueError):
    """Invalid processing configuration."""


@dataclass
class MonogenicLevel:
    i: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    level: int = 1

    def __post_init__(self):
        if not (self.i.shape == self.r1.shape == self.r2.shape):
            raise StructureError("i, r1, r2 must share dimensions")

    @property
    def shape(self):
        return self.i.shape

    def scaled(self, k: float) -> "MonogenicLevel":
        return MonogenicLevel(k * self.i, k * self.r1, k * self.r2, self.level)


@dataclass
class QuatPhaseField:
    """Per-pixel ``(phi cos(theta), phi sin(theta))``."""

    pc: np.ndarray
    ps: np.ndarray
    level: int = 1

    @property
    def shape(self):
        return self.pc.shape

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.pc, self.ps)

    def __neg__(self) -> "QuatPhaseField":
        return QuatPhaseField(-self.pc, -self.ps, self.level)

    @classmethod
    def zeros(cls, shape, level: int = 1) -> "QuatPhaseField":
        return cls(np.zeros(shape), np.zeros(shape), level)


@dataclass
class AmplitudeField:
    a: np.ndarray
    level: int = 1


@dataclass(frozen=True)
class TemporalFilterConfig:
    """Butterworth band-pass on the cumulative phase plus amplitude-weighted blur.

    ``low_hz == 0`` drops the high-pass section and ``high_hz == fps / 2``
    drops the low-pass section; with both the filter is a bypass.
    """

    low_hz: float = 0.5
    high_hz: float = 10.0
    fps: float = 100.0
    spatial_sigma: float = 2.0

    def validate(self) -> "TemporalFilterConfig":
        nyq = self.fps / 2.0
        if not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if not 0 <= self.low_hz < self.high_hz <= nyq:
            raise ConfigError(
                f"need 0 <= low_hz < high_hz <= fps/2, got low={self.low_hz} "
                f"high={self.high_hz} fps={self.fps}"
            )
        if self.spatial_sigma < 0:
            raise ConfigError("spatial_sigma must be >= 0")
        return self

    def with_fps(self, fps: float) -> "TemporalFilterConfig":
        return TemporalFilterConfig(self.low_hz, self.high_hz, fps, self.spatial_sigma)


def riesz_transform(band, level: int = 1) -> MonogenicLevel:
    """Three-tap ``[0.5, 0, -0.5]`` Riesz approximation of one subband.

    ``r1`` differentiates along x (columns), ``r2`` along y (rows).
    """
    band = as_frame(band)
    if band.shape[0] < 3 or band.shape[1] < 3:
        raise DimensionError(f"band {band.shape} smaller than 3x3")
    padded = np.pad(band, 1, mode="symmetric")
    r1 = 0.5 * padded[1:-1, 2:] - 0.5 * padded[1:-1, :-2]
    r2 = 0.5 * padded[2:, 1:-1] - 0.5 * padded[:-2, 1:-1]
    return MonogenicLevel(band, r1, r2, level)


def _phase_from_triple(i, r1, r2):
    amp = np.sqrt(i * i + r1 * r1 + r2 * r2)
    odd = np.hypot(r1, r2)
    valid = (amp > EPS) & (odd > EPS)
    phi = np.arctan2(odd, i)
    scale = np.divide(phi, odd, out=np.zeros_like(phi), where=valid)
    return amp, scale * r1, scale * r2


def extract_quat_phase(m: MonogenicLevel) -> Tuple[AmplitudeField, QuatPhaseField]:
    """Local amplitude and quaternionic phase of a monogenic triple."""
    amp, pc, ps = _phase_from_triple(m.i, m.r1, m.r2)
    return AmplitudeField(amp, m.level), QuatPhaseField(pc, ps, m.level)


def synthesize_triple(amplitude, phi, theta) -> MonogenicLevel:
    """Build ``(I, R1, R2)`` from spherical coordinates."""
    amplitude, phi, theta = np.broadcast_arrays(
        np.asarray(amplitude, float), np.asarray(phi, float), np.asarray(theta, float)
    )
    s = amplitude * np.sin(phi)
    return MonogenicLevel(amplitude * np.cos(phi), s * np.cos(theta), s * np.sin(theta))


def phase_difference(prev: MonogenicLevel, curr: MonogenicLevel) -> QuatPhaseField:
    """Quaternionic phase of ``q_curr * conj(q_prev)``.

    The product's k component (second order in the inter-frame change) is
    dropped, as in the original Riesz-pyramid magnification scheme.
    """
    if prev.shape != curr.shape:
        raise StructureError(f"shape mismatch {prev.shape} vs {curr.shape}")
    if prev.level != curr.level:
        raise StructureError(f"level mismatch {prev.level} vs {curr.level}")
    real = curr.i * prev.i + curr.r1 * prev.r1 + curr.r2 * prev.r2
    x = curr.r1 * prev.i - curr.i * prev.r1
    y = curr.r2 * prev.i - curr.i * prev.r2
    # normalization by |q_curr||q_prev| leaves the phase unchanged
    _, pc, ps = _phase_from_triple(real, x, y)
    return QuatPhaseField(pc, ps, curr.level)


def _temporal_filter(cfg: TemporalFilterConfig):
    nyq = cfg.fps / 2.0
    has_low = cfg.low_hz > 0
    has_high = cfg.high_hz < nyq
    if has_low and has_high:
        return signal.butter(1, [cfg.low_hz, cfg.high_hz], btype="bandpass", fs=cfg.fps)
    if has_low:
        return signal.butter(1, cfg.low_hz, btype="highpass", fs=cfg.fps)
    if has_high:
        return signal.butter(1, cfg.high_hz, btype="lowpass", fs=cfg.fps)
    return None


def amplitude_weighted_blur(values: np.ndarray, amplitude: np.ndarray, sigma: float) -> np.ndarray:
    """``blur(A^2 * values) / blur(A^2)`` with a 3-sigma Gaussian."""
    if sigma <= 0:
        return values
    weight = amplitude * amplitude
    num = ndimage.gaussian_filter(weight * values, sigma, mode="reflect", truncate=3.0)
    den = ndimage.gaussian_filter(weight, sigma, mode="reflect", truncate=3.0)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def cumulative_phase(levels: Sequence[MonogenicLevel]) -> np.ndarray:
    """Stack ``(T, 2, H, W)`` of phase accumulated from frame 0."""
    out = np.zeros((len(levels), 2) + levels[0].shape)
    for t in range(1, len(levels)):
        d = phase_difference(levels[t - 1], levels[t])
        out[t, 0] = out[t - 1, 0] + d.pc
        out[t, 1] = out[t - 1, 1] + d.ps
    return out


def filter_phase_sequence(
    levels: Sequence[MonogenicLevel], cfg: TemporalFilterConfig
) -> List[QuatPhaseField]:
    """Accumulate, temporally band-pass and spatially smooth the phase.

    Returns one field per input frame; frame 0 is all zero.
    """
    if len(levels) < 2:
        raise SequenceError(f"need at least 2 frames, got {len(levels)}")
    shape, level = levels[0].shape, levels[0].level
    if any(m.shape != shape for m in levels):
        raise SequenceError("frames of a sequence must share dimensions")
    cfg.validate()

    phase = cumulative_phase(levels)
    ba = _temporal_filter(cfg)
    if ba is not None:
        # causal recurrence along time, zero initial state (phase(0) == 0)
        phase = signal.lfilter(ba[0], ba[1], phase, axis=0)

    fields = []
    for t, m in enumerate(levels):
        pc, ps = phase[t, 0], phase[t, 1]
        if cfg.spatial_sigma > 0:
            amp = np.sqrt(m.i * m.i + m.r1 * m.r1 + m.r2 * m.r2)
            pc = amplitude_weighted_blur(pc, amp, cfg.spatial_sigma)
            ps = amplitude_weighted_blur(ps, amp, cfg.spatial_sigma)
        fields.append(QuatPhaseField(np.array(pc), np.array(ps), level))
    return fields


def amplify_phase(p: QuatPhaseField, alpha: float, mode: str = "sine") -> QuatPhaseField:
    """Magnify the quaternionic phase by ``alpha`` through exponentiation.

    ``mode="sine"`` returns the vector part of ``exp(alpha * p)``, i.e.
    ``sin(alpha phi) (cos theta, sin theta)``.  ``mode="log"`` takes the
    quaternion logarithm of that exponential again, giving the principal
    value of ``alpha * phi`` (folded into ``[0, pi]``).
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    phi = p.magnitude()
    nz = phi > 0
    a_phi = alpha * phi
    if mode == "sine":
        gain = np.sin(a_phi)
    elif mode == "log":
        s = np.sin(a_phi)
        gain = np.arctan2(np.abs(s), np.cos(a_phi)) * np.sign(s)
    else:
        raise ValueError(f"unknown amplification mode {mode!r}")
    scale = np.divide(gain, phi, out=np.zeros_like(phi), where=nz)
    return QuatPhaseField(scale * p.pc, scale * p.ps, p.level)
