"""Sequence manifests, frame loading and leave-one-subject-out splits.

A manifest is one JSON document::

    {
      "name": "smic-hs",
      "classes": ["negative", "positive", "surprise"],
      "sequences": [
        {"id": "s01_ne_01", "subject_id": "s01", "label": "negative",
         "frames_dir": "s01/ne_01", "f_onset": 0, "f_apex": 14,
         "f_offset": 29, "fps": 100}
      ]
    }

``frames_dir`` is resolved relative to the manifest file.  Frame indices are
0-based positions in the lexicographically sorted frame listing of that
directory, so licensed datasets whose files are numbered from an absolute
recording index (``img46.jpg`` ...) must be converted first: rename the
frames with zero-padded counters starting at the first frame of the clip,
convert them to PNG/PGM, and subtract the first frame number from the
onset/apex/offset columns of the coding sheet.  :func:`manifest_from_rows`
does the bookkeeping once those files exist.  When ``f_apex`` is absent (as
for SMIC-HS, whose ground truth gives onset and offset only) the midpoint of
onset and offset is used.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .image import list_frame_files, read_frame


class ManifestError(ValueError):
    """Malformed or invalid manifest."""


class SplitError(ValueError):
    """Requested split cannot be formed from the available subjects."""


class FrameRangeError(IndexError):
    """Annotation points beyond the frames present on disk."""


@dataclass
class SequenceAnnotation:
    id: str
    subject_id: str
    label: str
    frames_dir: str
    f_onset: int
    f_apex: int
    fps: float
    f_offset: Optional[int] = None

    def validate(self) -> None:
        where = f"sequence {self.id!r}"
        if self.fps is None or not self.fps > 0:
            raise ManifestError(f"{where}: fps must be positive")
        if self.f_onset < 0:
            raise ManifestError(f"{where}: f_onset must be >= 0")
        if self.f_onset > self.f_apex:
            raise ManifestError(f"{where}: f_onset {self.f_onset} > f_apex {self.f_apex}")
        if self.f_offset is not None and self.f_apex > self.f_offset:
            raise ManifestError(f"{where}: f_apex {self.f_apex} > f_offset {self.f_offset}")


@dataclass
class DatasetManifest:
    name: str
    classes: List[str]
    sequences: List[SequenceAnnotation]
    root: str = field(default=".", compare=False)

    def validate(self) -> "DatasetManifest":
        if not self.sequences:
            raise ManifestError("manifest has no sequences")
        if len(set(self.classes)) != len(self.classes) or not self.classes:
            raise ManifestError("classes must be a non-empty list of unique names")
        seen = set()
        for seq in self.sequences:
            if seq.id in seen:
                raise ManifestError(f"duplicate sequence id {seq.id!r}")
            seen.add(seq.id)
            if seq.label not in self.classes:
                raise ManifestError(f"sequence {seq.id!r}: label {seq.label!r} not in classes")
            seq.validate()
        return self

    @property
    def subjects(self) -> List[str]:
        return sorted({s.subject_id for s in self.sequences})

    def by_id(self) -> Dict[str, SequenceAnnotation]:
        return {s.id: s for s in self.sequences}

    def frames_path(self, seq: SequenceAnnotation) -> str:
        return os.path.normpath(os.path.join(self.root, seq.frames_dir))

    def to_json(self) -> dict:
        seqs = []
        for s in self.sequences:
            d = asdict(s)
            if d["f_offset"] is None:
                del d["f_offset"]
            seqs.append(d)
        return {"name": self.name, "classes": list(self.classes), "sequences": seqs}


def _parse_sequence(raw: dict) -> SequenceAnnotation:
    sid = raw.get("id", "<missing id>")
    try:
        onset = int(raw["f_onset"])
        offset = raw.get("f_offset")
        offset = None if offset is None else int(offset)
        apex = raw.get("f_apex")
        if apex is None:
            if offset is None:
                raise ManifestError(f"sequence {sid!r}: f_apex missing and no f_offset to infer it")
            apex = (onset + offset) // 2
        return SequenceAnnotation(
            id=str(raw["id"]),
            subject_id=str(raw["subject_id"]),
            label=str(raw["label"]),
            frames_dir=str(raw["frames_dir"]),
            f_onset=onset,
            f_apex=int(apex),
            fps=float(raw["fps"]),
            f_offset=offset,
        )
    except KeyError as exc:
        raise ManifestError(f"sequence {sid!r}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"sequence {sid!r}: {exc}") from None


def manifest_from_dict(doc: dict, root: str = ".") -> DatasetManifest:
    if not isinstance(doc, dict):
        raise ManifestError("manifest must be a JSON object")
    try:
        classes = [str(c) for c in doc["classes"]]
        raw_seqs = doc["sequences"]
    except KeyError as exc:
        raise ManifestError(f"manifest missing field {exc.args[0]!r}") from None
    seqs = [_parse_sequence(r) for r in raw_seqs]
    return DatasetManifest(str(doc.get("name", "")), classes, seqs, root).validate()


def load_manifest(path) -> DatasetManifest:
    """Read and validate a JSON manifest."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    return manifest_from_dict(doc, root=os.path.dirname(os.path.abspath(path)))


def save_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json(), fh, indent=2, sort_keys=False)
        fh.write("\n")


def manifest_from_rows(
    rows: Iterable[dict], name: str, root: str = ".", classes: Optional[List[str]] = None
) -> DatasetManifest:
    """Build a manifest from coding-sheet rows already mapped to manifest keys.

    Each row needs ``id, subject_id, label, frames_dir, f_onset, fps`` and
    either ``f_apex`` or ``f_offset``.  Classes default to the sorted set of
    labels.
    """
    rows = list(rows)
    if classes is None:
        classes = sorted({str(r["label"]) for r in rows})
    return manifest_from_dict({"name": name, "classes": classes, "sequences": rows}, root)


def load_sequence(ann: SequenceAnnotation, root: str = ".") -> List[np.ndarray]:
    """Load every frame of ``ann`` as normalized float64 arrays."""
    directory = os.path.join(root, ann.frames_dir)
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"sequence {ann.id!r}: frames directory {directory} not found")
    files = list_frame_files(directory)
    if len(files) <= ann.f_apex:
        raise FrameRangeError(
            f"sequence {ann.id!r}: apex frame {ann.f_apex} but only {len(files)} frames"
        )
    frames = [read_frame(f) for f in files]
    shape = frames[0].shape
    for f, frame in zip(files, frames):
        if frame.shape != shape:
            raise ValueError(
                f"sequence {ann.id!r}: {os.path.basename(f)} has shape {frame.shape}, expected {shape}"
            )
    return frames


def loso_splits(manifest: DatasetManifest) -> List[Tuple[List[str], List[str]]]:
    """One ``(train_ids, test_ids)`` fold per subject, ordered by subject id."""
    return [(train, test) for _, train, test in loso_folds(manifest)]


def loso_folds(manifest: DatasetManifest) -> List[Tuple[str, List[str], List[str]]]:
    """Like :func:`loso_splits` but also returns the held-out subject."""
    subjects = manifest.subjects
    if len(subjects) < 2:
        raise SplitError(f"leave-one-subject-out needs >= 2 subjects, got {len(subjects)}")
    folds = []
    for subj in subjects:
        test = [s.id for s in manifest.sequences if s.subject_id == subj]
        train = [s.id for s in manifest.sequences if s.subject_id != subj]
        folds.append((subj, train, test))
    return folds
