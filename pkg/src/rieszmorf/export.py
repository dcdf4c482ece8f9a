"""File formats: descriptor tables, debug float planes, metrics.

Binary descriptor file (little-endian)::

    b"MORF"  u16 version  u16 reserved
    params:  u32 gx  u32 gy  u32 o  u32 n_levels  u32 levels[n_levels]
             f64 alpha  u8 normalize  u8 amplify_mode (0 sine, 1 log)
    u32 n_records
    record:  u32 len + utf-8 id,  u32 len + utf-8 label,  f64 values[length]

Float plane dump: 16-byte header of u32 ``width, height, level, channel``
followed by row-major f32 samples.
"""

from __future__ import annotations

import csv
import io
import json
import struct
from typing import List, Sequence, Tuple

import numpy as np

from .morf import MorfParams

MAGIC = b"MORF"
VERSION = 1
_MODES = ("sine", "log")


class FormatError(ValueError):
    """Malformed descriptor or plane file."""


def write_descriptor_csv(path, ids: Sequence[str], labels: Sequence[str], features) -> None:
    """One row per sequence: id, label, values (full float precision)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for sid, lab, row in zip(ids, labels, features):
            writer.writerow([sid, lab] + [repr(float(v)) for v in row])


def read_descriptor_csv(path) -> Tuple[List[str], List[str], np.ndarray]:
    ids, labels, rows = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.reader(fh):
            ids.append(rec[0])
            labels.append(rec[1])
            rows.append([float(v) for v in rec[2:]])
    return ids, labels, np.asarray(rows, dtype=np.float64)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode_descriptors(params: MorfParams, ids, labels, features) -> bytes:
    features = np.asarray(features, dtype="<f8")
    if features.ndim != 2 or features.shape[1] != params.length:
        raise FormatError(f"features must be (n, {params.length})")
    out = io.BytesIO()
    out.write(MAGIC + struct.pack("<HH", VERSION, 0))
    out.write(struct.pack("<4I", params.gx, params.gy, params.o, len(params.levels)))
    out.write(struct.pack(f"<{len(params.levels)}I", *params.levels))
    out.write(struct.pack("<dBB", params.alpha, int(params.normalize), _MODES.index(params.amplify_mode)))
    out.write(struct.pack("<I", len(ids)))
    for sid, lab, row in zip(ids, labels, features):
        out.write(_pack_str(sid))
        out.write(_pack_str(lab))
        out.write(row.tobytes())
    return out.getvalue()


def decode_descriptors(data: bytes):
    """Inverse of :func:`encode_descriptors`: ``(params, ids, labels, features)``."""
    if data[:4] != MAGIC:
        raise FormatError("not a MORF descriptor file")
    pos = 4
    try:
        version, _ = struct.unpack_from("<HH", data, pos)
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        pos += 4
        gx, gy, o, nl = struct.unpack_from("<4I", data, pos)
        pos += 16
        levels = struct.unpack_from(f"<{nl}I", data, pos)
        pos += 4 * nl
        alpha, norm, mode = struct.unpack_from("<dBB", data, pos)
        pos += 10
        params = MorfParams(gx, gy, o, tuple(levels), alpha, bool(norm), _MODES[mode])
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        ids, labels = [], []
        feats = np.zeros((count, params.length))
        for k in range(count):
            for dest in (ids, labels):
                (n,) = struct.unpack_from("<I", data, pos)
                pos += 4
                dest.append(data[pos:pos + n].decode("utf-8"))
                pos += n
            feats[k] = np.frombuffer(data, dtype="<f8", count=params.length, offset=pos)
            pos += 8 * params.length
    except (struct.error, ValueError, IndexError) as exc:
        raise FormatError(f"malformed descriptor file: {exc}") from None
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after the last record")
    return params, ids, labels, feats


def write_descriptor_binary(path, params, ids, labels, features) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_descriptors(params, ids, labels, features))


def read_descriptor_binary(path):
    with open(path, "rb") as fh:
        return decode_descriptors(fh.read())


def write_plane(path, plane: np.ndarray, level: int, channel: int) -> None:
    plane = np.asarray(plane)
    rows, cols = plane.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4I", cols, rows, level, channel))
        fh.write(plane.astype("<f4").tobytes())


def read_plane(path) -> Tuple[np.ndarray, int, int]:
    """Returns ``(plane, level, channel)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise FormatError("plane file shorter than its header")
    cols, rows, level, channel = struct.unpack_from("<4I", data, 0)
    if len(data) != 16 + 4 * rows * cols:
        raise FormatError("plane size does not match header")
    plane = np.frombuffer(data, dtype="<f4", offset=16).reshape(rows, cols)
    return plane.astype(np.float64), level, channel


def metrics_json(doc: dict) -> str:
    """Canonical JSON text (sorted keys, fixed float repr) for byte-stable output."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_predictions_csv(path, metrics) -> None:
    """Per-sequence predictions with the fold that produced them."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "subject", "true", "predicted"]
                        + [f"score_{c}" for c in metrics.classes])
        for fold in metrics.folds:
            for sid, t, p, sc in zip(fold["test_ids"], fold["true"], fold["predicted"], fold["scores"]):
                writer.writerow([sid, fold["subject"], t, p] + [repr(float(v)) for v in sc])
