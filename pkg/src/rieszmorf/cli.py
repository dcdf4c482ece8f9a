"""Command-line front end: ``rieszmorf {synth,extract,eval,pyramid-dump,phase-dump}``.

Option values come from, in increasing precedence: built-in defaults, an
optional JSON ``--config`` file (keys are the long option names with dashes
or underscores), and the command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from . import classify, export
from .classify import KernelParams
from .dataset import ManifestError, load_manifest, load_sequence
from .image import build_pyramid
from .morf import MorfParams
from .riesz import ConfigError, TemporalFilterConfig, filter_phase_sequence, riesz_transform
from .synth import MotionDatasetConfig, SpecError, make_motion_dataset

log = logging.getLogger("rieszmorf")

DEFAULTS = {
    "levels": "2",
    "gx": 8,
    "gy": 8,
    "o": 6,
    "alpha": 1.0,
    "normalize": False,
    "amplify_mode": "sine",
    "low_hz": 0.5,
    "high_hz": 10.0,
    "spatial_sigma": 2.0,
    "grid": None,
    "jobs": 1,
    "seed": 0,
    "format": None,
    "predictions": None,
    "param_sweep": None,
    "frame": 0,
    # synth
    "subjects": 10,
    "reps": 3,
    "classes": "right,left,up",
    "noise": 0.01,
    "size": 64,
    "frames": 16,
    "fps": 100.0,
}

SWEEP_KEYS = ("gx", "gy", "o", "alpha", "level")


@dataclass
class RunConfig:
    command: str
    manifest: Optional[str] = None
    out: Optional[str] = None
    morf: MorfParams = field(default_factory=MorfParams)
    filter: TemporalFilterConfig = field(default_factory=TemporalFilterConfig)
    grid: Optional[str] = None
    jobs: int = 1
    seed: int = 0
    options: dict = field(default_factory=dict)


def parse_levels(text) -> tuple:
    """``"2,3"`` (or a list) to a sorted tuple of unique levels."""
    if isinstance(text, (list, tuple)):
        text = ",".join(str(v) for v in text)
    try:
        levels = {int(v) for v in str(text).replace("+", ",").split(",") if v.strip()}
    except ValueError:
        raise ConfigError(f"invalid --levels {text!r}") from None
    return tuple(sorted(levels))


def _grid_value(token: str, dim: Optional[int]) -> float:
    token = token.strip()
    m = re.fullmatch(r"([0-9.eE+-]+)?\s*/\s*d", token)
    if m:
        if dim is None:
            return float("nan")
        return float(m.group(1) or 1.0) / dim
    return float(token)


def parse_grid(spec: Optional[str], dim: Optional[int] = None) -> Optional[List[KernelParams]]:
    """Parse ``"C=0.1,1;gamma=1/d,10/d;c0=0,1"`` (``d`` = descriptor length).

    With ``dim=None`` the spec is only validated.
    """
    if spec is None:
        return None
    values = {"C": [1.0], "gamma": ["1/d"], "c0": [1.0]}
    try:
        for part in spec.split(";"):
            if not part.strip():
                continue
            key, _, rhs = part.partition("=")
            key = key.strip()
            if key not in values or not rhs.strip():
                raise ValueError(f"unknown or empty grid entry {part!r}")
            values[key] = [v for v in rhs.split(",") if v.strip()]
        grid = []
        for C in values["C"]:
            for g in values["gamma"]:
                for c0 in values["c0"]:
                    c, gm, off = (_grid_value(str(v), dim) for v in (C, g, c0))
                    if dim is None:
                        # validate with a stand-in dimension
                        gm = _grid_value(str(g), 1)
                    grid.append(KernelParams(C=c, gamma=gm, c0=off))
    except ValueError as exc:
        raise ConfigError(f"invalid --grid {spec!r}: {exc}") from None
    return sorted(grid)


def parse_sweep(spec: Optional[str]):
    """``"o=4:10"`` (inclusive integer range) or ``"o=4,6,8"``."""
    if spec is None:
        return None
    key, _, rhs = spec.partition("=")
    key = key.strip()
    if key not in SWEEP_KEYS or not rhs:
        raise ConfigError(f"invalid --param-sweep {spec!r}; keys: {', '.join(SWEEP_KEYS)}")
    try:
        if ":" in rhs:
            lo, hi = (int(v) for v in rhs.split(":"))
            vals = list(range(lo, hi + 1))
        else:
            vals = [float(v) if key == "alpha" else int(v) for v in rhs.split(",")]
    except ValueError:
        raise ConfigError(f"invalid --param-sweep values {rhs!r}") from None
    if not vals:
        raise ConfigError("empty --param-sweep range")
    return key, vals


def _add_common(p: argparse.ArgumentParser, manifest=True):
    p.add_argument("--config", help="JSON file with option defaults")
    if manifest:
        p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--levels", help="pyramid levels, e.g. 2 or 2,3")
    p.add_argument("--gx", type=int)
    p.add_argument("--gy", type=int)
    p.add_argument("--o", type=int, help="orientation bins")
    p.add_argument("--alpha", type=float, help="phase magnification (1 = none)")
    p.add_argument("--amplify-mode", choices=("sine", "log"))
    p.add_argument("--normalize", action="store_const", const=True,
                   help="L2-normalize each level's histogram block")
    p.add_argument("--low-hz", type=float)
    p.add_argument("--high-hz", type=float)
    p.add_argument("--spatial-sigma", type=float)
    p.add_argument("--grid", help='SVM grid, e.g. "C=0.1,1,10,100;gamma=1/d,10/d;c0=0,1"')
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rieszmorf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic moving-circle dataset")
    _add_common(p, manifest=False)
    p.add_argument("--subjects", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--classes", help="comma-separated directions (right,left,up,down or degrees)")
    p.add_argument("--noise", type=float)
    p.add_argument("--size", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--fps", type=float)

    p = sub.add_parser("extract", help="compute MORF descriptors for a manifest")
    _add_common(p)
    p.add_argument("--format", choices=("csv", "binary"),
                   help="output format (default from extension: .csv or binary)")

    p = sub.add_parser("eval", help="leave-one-subject-out evaluation")
    _add_common(p)
    p.add_argument("--predictions", help="per-sequence prediction CSV")
    p.add_argument("--param-sweep", help='one descriptor parameter range, e.g. "o=4:10"')

    for name, text in (("pyramid-dump", "dump pyramid bands of one frame"),
                       ("phase-dump", "dump filtered phase fields of one sequence")):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.add_argument("--sequence", required=True, help="sequence id")
        if name == "pyramid-dump":
            p.add_argument("--frame", type=int)
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, config file and flags; validate everything up front."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_opts = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        opts.update({k.replace("-", "_"): v for k, v in file_opts.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "verbose"):
            opts[k] = v
    try:
        morf = MorfParams(
            gx=int(opts["gx"]), gy=int(opts["gy"]), o=int(opts["o"]),
            levels=parse_levels(opts["levels"]), alpha=float(opts["alpha"]),
            normalize=bool(opts["normalize"]), amplify_mode=str(opts["amplify_mode"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    # fps is per sequence; validate the band against the slowest plausible rate later
    filt = TemporalFilterConfig(float(opts["low_hz"]), float(opts["high_hz"]),
                                2.0 * float(opts["high_hz"]), float(opts["spatial_sigma"]))
    if filt.spatial_sigma < 0 or filt.low_hz < 0 or filt.low_hz >= filt.high_hz:
        raise ConfigError(f"invalid temporal filter band [{filt.low_hz}, {filt.high_hz}] "
                          f"or spatial sigma {filt.spatial_sigma}")
    parse_grid(opts["grid"])
    parse_sweep(opts.get("param_sweep"))
    jobs = int(opts["jobs"])
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    cfg = RunConfig(args.command, opts.get("manifest"), opts.get("out"), morf, filt,
                    opts["grid"], jobs, int(opts["seed"]), opts)
    if cfg.command != "synth":
        if not cfg.manifest:
            raise ConfigError("--manifest is required")
        if not os.path.isfile(cfg.manifest):
            raise ConfigError(f"manifest {cfg.manifest} not found")
    if not cfg.out:
        raise ConfigError("--out is required")
    return cfg


def _check_fps(manifest, filt: TemporalFilterConfig) -> None:
    for seq in manifest.sequences:
        filt.with_fps(seq.fps).validate()


def cmd_synth(cfg: RunConfig) -> int:
    o = cfg.options
    classes = [c.strip() for c in str(o["classes"]).split(",") if c.strip()]
    mcfg = MotionDatasetConfig(
        classes=classes, subjects=int(o["subjects"]), reps=int(o["reps"]),
        noise_sigma=float(o["noise"]), seed=cfg.seed, size=int(o["size"]),
        n_frames=int(o["frames"]), fps=float(o["fps"]),
    )
    _, path = make_motion_dataset(cfg.out, mcfg)
    print(path)
    return 0


def cmd_extract(cfg: RunConfig) -> int:
    manifest = load_manifest(cfg.manifest)
    _check_fps(manifest, cfg.filter)
    ext = classify.extract_descriptors(manifest, cfg.morf, cfg.filter, cfg.jobs)
    by_id = manifest.by_id()
    labels = [by_id[i].label for i in ext.ids]
    fmt = cfg.options.get("format") or ("csv" if cfg.out.lower().endswith(".csv") else "binary")
    if fmt == "csv":
        export.write_descriptor_csv(cfg.out, ext.ids, labels, ext.features)
    else:
        export.write_descriptor_binary(cfg.out, cfg.morf, ext.ids, labels, ext.features)
    for sid, err in ext.failures.items():
        print(f"error: sequence {sid}: {err}", file=sys.stderr)
    print(f"wrote {len(ext.ids)} descriptors of length {cfg.morf.length} to {cfg.out}")
    return 1 if ext.failures else 0


def _eval_once(manifest, morf: MorfParams, cfg: RunConfig):
    ext = classify.extract_descriptors(manifest, morf, cfg.filter, cfg.jobs)
    for sid, err in ext.failures.items():
        print(f"error: sequence {sid}: {err}", file=sys.stderr)
    grid = parse_grid(cfg.grid, morf.length)
    metrics = classify.evaluate_loso(manifest, morf, cfg.filter, grid, cfg.jobs, extraction=ext)
    doc = metrics.to_json()
    doc["descriptor"] = {"gx": morf.gx, "gy": morf.gy, "o": morf.o, "levels": list(morf.levels),
                         "alpha": morf.alpha, "normalize": morf.normalize,
                         "amplify_mode": morf.amplify_mode}
    doc["filter"] = {"low_hz": cfg.filter.low_hz, "high_hz": cfg.filter.high_hz,
                     "spatial_sigma": cfg.filter.spatial_sigma}
    doc["failures"] = dict(sorted(ext.failures.items()))
    return metrics, doc, bool(ext.failures)


def _sweep_params(base: MorfParams, key: str, value) -> MorfParams:
    kw = dict(gx=base.gx, gy=base.gy, o=base.o, levels=base.levels, alpha=base.alpha,
              normalize=base.normalize, amplify_mode=base.amplify_mode)
    if key == "level":
        kw["levels"] = (int(value),)
    else:
        kw[key] = value
    return MorfParams(**kw)


def cmd_eval(cfg: RunConfig) -> int:
    manifest = load_manifest(cfg.manifest)
    _check_fps(manifest, cfg.filter)
    sweep = parse_sweep(cfg.options.get("param_sweep"))
    failed = False
    if sweep is None:
        metrics, doc, failed = _eval_once(manifest, cfg.morf, cfg)
        out_doc = doc
        print(f"accuracy: {metrics.accuracy:.4f}  macro-F1: {metrics.f_measure:.4f}")
    else:
        key, values = sweep
        records = []
        for v in values:
            metrics, doc, f = _eval_once(manifest, _sweep_params(cfg.morf, key, v), cfg)
            failed |= f
            records.append({"param": key, "value": v, "metrics": doc})
            print(f"{key}={v}: accuracy: {metrics.accuracy:.4f}  macro-F1: {metrics.f_measure:.4f}")
        out_doc = {"sweep": records}
    with open(cfg.out, "w", encoding="utf-8") as fh:
        fh.write(export.metrics_json(out_doc))
    if cfg.options.get("predictions") and sweep is None:
        export.write_predictions_csv(cfg.options["predictions"], metrics)
    return 1 if failed else 0


def _find_sequence(manifest, sid):
    for seq in manifest.sequences:
        if seq.id == sid:
            return seq
    raise ManifestError(f"sequence {sid!r} not in manifest")


def cmd_pyramid_dump(cfg: RunConfig) -> int:
    manifest = load_manifest(cfg.manifest)
    seq = _find_sequence(manifest, cfg.options["sequence"])
    frames = load_sequence(seq, manifest.root)
    k = int(cfg.options["frame"])
    pyr = build_pyramid(frames[k], max(cfg.morf.levels))
    os.makedirs(cfg.out, exist_ok=True)
    for lev in range(1, pyr.num_levels + 1):
        export.write_plane(os.path.join(cfg.out, f"band_L{lev}.f32"), pyr.band(lev), lev, 0)
    export.write_plane(os.path.join(cfg.out, "residual.f32"), pyr.residual, pyr.num_levels + 1, 0)
    print(f"wrote {pyr.num_levels} bands and residual to {cfg.out}")
    return 0


def cmd_phase_dump(cfg: RunConfig) -> int:
    manifest = load_manifest(cfg.manifest)
    seq = _find_sequence(manifest, cfg.options["sequence"])
    frames = load_sequence(seq, manifest.root)[seq.f_onset:seq.f_apex + 1]
    filt = cfg.filter.with_fps(seq.fps).validate()
    top = max(cfg.morf.levels)
    pyrs = [build_pyramid(f, top) for f in frames]
    os.makedirs(cfg.out, exist_ok=True)
    count = 0
    for lev in sorted(cfg.morf.levels):
        mono = [riesz_transform(p.band(lev), lev) for p in pyrs]
        for t, field_ in enumerate(filter_phase_sequence(mono, filt)):
            for ch, plane in enumerate((field_.pc, field_.ps)):
                name = f"phase_L{lev}_t{t:04d}_c{ch}.f32"
                export.write_plane(os.path.join(cfg.out, name), plane, lev, ch)
                count += 1
    print(f"wrote {count} phase planes to {cfg.out}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "eval": cmd_eval,
    "pyramid-dump": cmd_pyramid_dump,
    "phase-dump": cmd_phase_dump,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, ManifestError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
