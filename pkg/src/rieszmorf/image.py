"""Grayscale frames, separable filtering and the Laplacian pyramid.

Frames are plain 2-D ``float64`` numpy arrays indexed ``[row, col]``
(``[y, x]``).  Every convolution uses half-sample symmetric reflection at
the borders (``d c b a | a b c d | d c b a``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy import ndimage
from PIL import Image

BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
FRAME_EXTENSIONS = (".png", ".pgm", ".ppm", ".pnm")


class DimensionError(ValueError):
    """Frame too small (or mis-shaped) for the requested operation."""


class StructureError(ValueError):
    """Inconsistent sizes between pieces of a multi-part structure."""


class FrameReadError(OSError):
    """A frame file could not be decoded."""


def as_frame(data) -> np.ndarray:
    """Validate and convert ``data`` to a finite 2-D float64 frame."""
    frame = np.asarray(data, dtype=np.float64)
    if frame.ndim != 2 or frame.size == 0:
        raise DimensionError(f"expected a non-empty 2-D frame, got shape {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame contains NaN or Inf")
    return frame


def _filter_rows_cols(frame: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = ndimage.convolve1d(frame, kernel, axis=0, mode="reflect")
    return ndimage.convolve1d(out, kernel, axis=1, mode="reflect")


def lowpass(frame: np.ndarray) -> np.ndarray:
    """Separable 5-tap binomial blur."""
    return _filter_rows_cols(frame, BINOMIAL5)


def downsample(frame: np.ndarray) -> np.ndarray:
    """Blur, then keep even-indexed rows and columns (size ``ceil(n/2)``)."""
    return lowpass(frame)[::2, ::2]


def upsample(frame: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Zero-insert into ``shape`` and interpolate with twice the binomial kernel.

    Border handling mirrors the coarse samples (half-sample symmetric)
    before zero insertion.

    ``shape`` must satisfy ``ceil(shape / 2) == frame.shape``.
    """
    rows, cols = shape
    if ((rows + 1) // 2, (cols + 1) // 2) != frame.shape:
        raise StructureError(f"cannot upsample {frame.shape} to {tuple(shape)}")
    # Reflect on the coarse grid first: reflecting the zero-inserted signal
    # would put two samples (or two zeros) side by side at the border and
    # break reproduction of constants.
    padded = np.pad(frame, 1, mode="symmetric")
    full = np.zeros((2 * padded.shape[0] - 1, 2 * padded.shape[1] - 1), dtype=np.float64)
    full[::2, ::2] = padded
    k = 2.0 * BINOMIAL5
    full = ndimage.convolve1d(full, k, axis=0, mode="constant")
    full = ndimage.convolve1d(full, k, axis=1, mode="constant")
    return full[2:2 + rows, 2:2 + cols]


def level_shape(shape: Sequence[int], level: int) -> tuple:
    """Dimensions of pyramid band ``level`` (1-based) for an input of ``shape``."""
    rows, cols = shape
    for _ in range(level - 1):
        rows, cols = (rows + 1) // 2, (cols + 1) // 2
    return rows, cols


@dataclass
class ImagePyramid:
    """Laplacian bands (level 1 = finest) plus the lowpass residual."""

    bands: List[np.ndarray]
    residual: np.ndarray
    shape: tuple = field(init=False)

    def __post_init__(self):
        self.shape = self.bands[0].shape if self.bands else self.residual.shape

    @property
    def num_levels(self) -> int:
        return len(self.bands)

    def band(self, level: int) -> np.ndarray:
        """Band at 1-based ``level``."""
        if not 1 <= level <= self.num_levels:
            raise IndexError(f"level {level} outside 1..{self.num_levels}")
        return self.bands[level - 1]


def build_pyramid(frame, num_levels: int) -> ImagePyramid:
    """Decompose ``frame`` into ``num_levels`` Laplacian bands and a residual.

    Raises:
        DimensionError: if ``min(frame.shape) < 2**num_levels``.
    """
    frame = as_frame(frame)
    if num_levels < 1:
        raise DimensionError("num_levels must be >= 1")
    if min(frame.shape) < 2**num_levels:
        raise DimensionError(
            f"frame {frame.shape} too small for {num_levels} levels "
            f"(need min dimension >= {2**num_levels})"
        )
    bands = []
    current = frame
    for _ in range(num_levels):
        coarse = downsample(current)
        bands.append(current - upsample(coarse, current.shape))
        current = coarse
    return ImagePyramid(bands=bands, residual=current)


def collapse_pyramid(pyr: ImagePyramid) -> np.ndarray:
    """Invert :func:`build_pyramid`."""
    current = np.asarray(pyr.residual, dtype=np.float64)
    for band in reversed(pyr.bands):
        if ((band.shape[0] + 1) // 2, (band.shape[1] + 1) // 2) != current.shape:
            raise StructureError(
                f"band of shape {band.shape} does not match coarser level {current.shape}"
            )
        current = band + upsample(current, band.shape)
    return current


# -- frame files -------------------------------------------------------------

def _read_pnm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = raw[:2]
    if magic not in (b"P2", b"P5", b"P3", b"P6"):
        raise FrameReadError(f"{path}: not a PGM/PPM file")
    # header: magic, width, height, maxval separated by whitespace/comments
    tokens: list = []
    pos = 2
    while len(tokens) < 3:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while raw[pos:pos + 1] not in (b"\n", b"\r", b""):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(raw[start:pos]))
    width, height, maxval = tokens
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    if magic in (b"P5", b"P6"):
        pos += 1  # single whitespace byte before raster
        dtype = np.dtype(">u2") if maxval > 255 else np.uint8
        data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    else:
        data = np.array(raw[pos:].split()[:count], dtype=np.int64)
    if data.size != count:
        raise FrameReadError(f"{path}: truncated raster")
    data = data.astype(np.float64) / float(maxval)
    if channels == 3:
        return rgb_to_luma(data.reshape(height, width, 3))
    return data.reshape(height, width)


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    """Rec.601 luma of an ``(H, W, 3)`` array."""
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def read_frame(path) -> np.ndarray:
    """Read a PNG/PGM/PPM frame, normalized by its maximum code value."""
    path = os.fspath(path)
    if path.lower().endswith((".pgm", ".ppm", ".pnm")):
        return as_frame(_read_pnm(path))
    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.asarray(im)
    except OSError as exc:
        raise FrameReadError(f"{path}: {exc}") from exc
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        # Pillow widens 16-bit PNG to mode I
        arr = arr.astype(np.float64) / 65535.0
    elif mode == "F":
        arr = arr.astype(np.float64)
    else:
        arr = arr.astype(np.float64) / 255.0
    if arr.ndim == 3:
        arr = rgb_to_luma(arr[..., :3])
    return as_frame(arr)


def write_pgm(path, frame: np.ndarray, bits: int = 16) -> None:
    """Write ``frame`` (values in [0, 1], clipped) as a binary PGM."""
    maxval = (1 << bits) - 1
    codes = np.rint(np.clip(frame, 0.0, 1.0) * maxval)
    dtype = ">u2" if bits > 8 else np.uint8
    header = f"P5\n{frame.shape[1]} {frame.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(codes.astype(dtype).tobytes())


def list_frame_files(directory) -> List[str]:
    """Frame files of ``directory`` in lexicographic order."""
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(FRAME_EXTENSIONS))
    return [os.path.join(directory, n) for n in names]
