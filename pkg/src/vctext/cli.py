"""Command line entry point.

Subcommands: synth, train, eval, zeroshot, ablate, gradcheck, flops.

Configuration is a flat, typed key-value document with sectioned keys
(head.*, train.*, data.*), merged in order: preset, --config file,
repeated --set overrides. Keys must name declared fields of the
corresponding config dataclass; anything else is a usage error.

Exit codes:
    0  success
    2  usage errors (bad flags, unknown keys, unknown preset)
    3  file-format and manifest errors (magic, version, truncation,
       checksum, parse, duplicate/unknown vocabulary entries)
    4  shape, zero-norm and non-finite errors
    5  range, label and synthetic-spec errors
    6  sampling or metric degeneracy (insufficient clips, no positives)
    7  training divergence
    8  unknown ablation row
    9  gradient check above threshold
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

import vctext
from vctext import dataio, evalharness, presets
from vctext.errors import (
    ChecksumError,
    DegenerateClassError,
    DivergenceError,
    InsufficientClipsError,
    LabelError,
    MagicMismatchError,
    NonFiniteError,
    ParseError,
    RangeError,
    ShapeError,
    SpecError,
    TruncationError,
    UnknownAblationError,
    UsageError,
    VersionError,
    ZeroNormError,
)
from vctext.head.checkpoint import load_checkpoint, save_checkpoint
from vctext.head.config import HeadConfig
from vctext.head.flops import head_flops, head_flops_breakdown
from vctext.verification import (
    TOY_CONFIG,
    run_gradient_check,
    run_toggle_sweep,
    toy_bundles,
)

GRADCHECK_THRESHOLD = 1e-4

EXIT_CODES: list[tuple[tuple, int]] = [
    ((UsageError,), 2),
    ((MagicMismatchError, VersionError, TruncationError, ChecksumError,
      ParseError), 3),
    ((ShapeError, ZeroNormError, NonFiniteError), 4),
    ((RangeError, LabelError, SpecError), 5),
    ((InsufficientClipsError, DegenerateClassError), 6),
    ((DivergenceError,), 7),
    ((UnknownAblationError,), 8),
]


class GradCheckFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

_SECTIONS = {
    "head": HeadConfig,
    "train": evalharness.TrainConfig,
    "data": dataio.SyntheticSpec,
}


def _declared_keys() -> dict[str, type]:
    keys: dict[str, type] = {}
    for section, cls in _SECTIONS.items():
        for f in dataclasses.fields(cls):
            if f.repr:
                keys[f"{section}.{f.name}"] = f.type
    return keys


def _coerce(key: str, raw: str) -> object:
    ftype = str(_declared_keys()[key])
    if "bool" in ftype:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise UsageError(f"{key}: expected a boolean, got '{raw}'")
    if "int" in ftype:
        try:
            return int(raw)
        except ValueError as e:
            raise UsageError(f"{key}: expected an integer, got '{raw}'") from e
    if "float" in ftype:
        try:
            return float(raw)
        except ValueError as e:
            raise UsageError(f"{key}: expected a number, got '{raw}'") from e
    return raw


def _parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def merged_config(preset_name: str | None, config_path: str | None,
                  overrides: list[str], seed: int | None) -> dict[str, object]:
    declared = _declared_keys()
    merged: dict[str, object] = {}
    if preset_name:
        merged.update(presets.preset(preset_name))
    raw_pairs: list[tuple[str, str]] = []
    if config_path:
        raw_pairs.extend(_parse_config_file(config_path).items())
    for item in overrides or []:
        if "=" not in item:
            raise UsageError(f"--set needs key=value, got '{item}'")
        key, value = item.split("=", 1)
        raw_pairs.append((key.strip(), value.strip()))
    for key, value in raw_pairs:
        if key not in declared:
            raise UsageError(f"unknown config key '{key}'")
        merged[key] = _coerce(key, value)
    for key in merged:
        if key not in declared:
            raise UsageError(f"unknown config key '{key}' (from preset)")
    if seed is not None:
        merged["train.seed"] = seed
        merged["data.seed"] = seed
    return merged


def _section(merged: dict[str, object], name: str) -> dict[str, object]:
    return {k.split(".", 1)[1]: v for k, v in merged.items()
            if k.startswith(name + ".")}


def build_head_config(merged: dict[str, object]) -> HeadConfig:
    return HeadConfig(**_section(merged, "head"))


def build_train_config(merged: dict[str, object]) -> evalharness.TrainConfig:
    return evalharness.TrainConfig(**_section(merged, "train"))


def build_synth_spec(merged: dict[str, object]) -> dataio.SyntheticSpec:
    return dataio.SyntheticSpec(**_section(merged, "data"))


def _config_hash(merged: dict[str, object]) -> str:
    canonical = json.dumps(merged, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def write_manifest(directory: Path, command: str, merged: dict[str, object],
                   extra: dict | None = None) -> None:
    """Reproducibility record; the timestamp here is the only run-dependent
    byte any command writes."""
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config": merged,
        "config_hash": _config_hash(merged),
        "versions": {"vctext": vctext.__version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_synth(args) -> int:
    merged = merged_config(args.preset, args.config, args.set, args.seed)
    spec = build_synth_spec(merged)
    data = dataio.generate_synthetic(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataio.write_bundle_file(out, data)
    write_manifest(out.parent, "synth", merged,
                   {"bundles": len(data.bundles)})
    print(f"wrote {len(data.bundles)} bundles ({data.n_classes} classes, "
          f"dim {data.dim}) to {out}")
    return 0


def _cmd_train(args) -> int:
    merged = merged_config(args.preset, args.config, args.set, args.seed)
    head_cfg = build_head_config(merged)
    train_cfg = build_train_config(merged)
    data = dataio.read_bundle_file(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = evalharness.train(head_cfg, train_cfg, data,
                               checkpoint_path=str(out_dir / "checkpoint.vchk"))
    metric = evalharness.evaluate(head_cfg, result.params, data, split="test",
                                  loss_mode=train_cfg.loss_mode) \
        if data.split("test") else float("nan")
    records = [{"step": i + 1, "loss": v} for i, v in enumerate(result.losses)]
    records.append({"final": True, "metric": metric, "steps": train_cfg.steps})
    (out_dir / "metrics.jsonl").write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    write_manifest(out_dir, "train", merged)
    last = result.losses[-1] if result.losses else float("nan")
    print(f"trained {train_cfg.steps} steps; final loss {last:.4f}; "
          f"test metric {metric:.4f}; checkpoint at {out_dir / 'checkpoint.vchk'}")
    return 0


def _cmd_eval(args) -> int:
    head_cfg, params = load_checkpoint(args.checkpoint)
    data = dataio.read_bundle_file(args.data)
    loss_mode = "multi_label" if data.label_mode == "multi" else "single_label"
    metric = evalharness.evaluate(
        head_cfg, params, data, split=args.split, loss_mode=loss_mode,
        n_views=args.views, frames_per_view=args.frames_per_view)
    name = "mAP" if loss_mode == "multi_label" else "top1"
    print(f"{name} on split '{args.split}': {metric:.4f}")
    return 0


def _cmd_zeroshot(args) -> int:
    head_cfg, params = load_checkpoint(args.checkpoint)
    splits = [dataio.read_bundle_file(p) for p in args.data]
    result = evalharness.zero_shot_eval(head_cfg, params, splits,
                                        eval_split=args.split)
    for i, acc in enumerate(result.per_split):
        print(f"split {i}: top1 {acc:.4f}")
    print(f"mean {result.mean:.4f} +- {result.std:.4f} (population std, "
          f"{len(result.per_split)} splits)")
    return 0


def _cmd_ablate(args) -> int:
    merged = merged_config(args.preset, args.config, args.set, args.seed)
    head_cfg = build_head_config(merged)
    train_cfg = build_train_config(merged)
    data = dataio.read_bundle_file(args.data)
    rows = [r.strip() for r in args.rows.split(",")] if args.rows \
        else list(evalharness.ABLATION_ROWS)
    table = evalharness.run_ablation_suite(rows, head_cfg, train_cfg, data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablations.jsonl").write_text(table.to_json_lines())
    (out_dir / "ablations.txt").write_text(table.to_text())
    write_manifest(out_dir, "ablate", merged)
    print(table.to_text())
    return 0


def _cmd_gradcheck(args) -> int:
    merged = merged_config(args.preset or "toy", args.config, args.set, args.seed)
    head_cfg = build_head_config(merged)
    if args.all_toggles:
        results = run_toggle_sweep(head_cfg)
        worst = max(results.values())
        for name, err in sorted(results.items(), key=lambda kv: -kv[1]):
            print(f"{err:.3e}  {name}")
        print(f"max relative error over {len(results)} toggle combinations: "
              f"{worst:.3e}")
    else:
        n_frames = int(_section(merged, "data").get("n_frames", 2))
        data = toy_bundles(head_cfg, n_frames=n_frames, seed=0)
        worst = run_gradient_check(head_cfg, data)
        print(f"max relative error: {worst:.3e}")
    if worst > GRADCHECK_THRESHOLD:
        raise GradCheckFailure(f"gradient error {worst:.3e} exceeds "
                               f"{GRADCHECK_THRESHOLD}")
    return 0


def _cmd_flops(args) -> int:
    merged = merged_config(args.preset, args.config, args.set, None)
    head_cfg = build_head_config(merged)
    n_frames = args.frames or int(_section(merged, "data").get("n_frames", 16))
    breakdown = head_flops_breakdown(head_cfg, n_frames)
    total = head_flops(head_cfg, n_frames)
    width = max(len(k) for k in breakdown)
    print(f"head FLOPs per class logit ({n_frames} frames, "
          f"{head_cfg.tokens_per_frame} tokens/frame):")
    for name, value in breakdown.items():
        print(f"  {name:<{width}}  {value:>15,}")
    print(f"  {'total':<{width}}  {total:>15,}")
    assert total == sum(breakdown.values())
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_config_flags(sub, with_seed: bool = True) -> None:
    sub.add_argument("--preset", help="named preset: " + ", ".join(sorted(presets.PRESETS)))
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--set", action="append", metavar="KEY=VALUE",
                     help="override one config key (repeatable)")
    if with_seed:
        sub.add_argument("--seed", type=int, default=None,
                         help="override both train.seed and data.seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vctext",
        description="Video-conditioned text head: synthesize data, train, "
                    "evaluate, transfer, ablate, verify gradients, count FLOPs.")
    subs = parser.add_subparsers(dest="command", required=True)

    s = subs.add_parser("synth", help="generate a synthetic bundle file")
    _add_config_flags(s)
    s.add_argument("--out", required=True, help="output .vctr bundle file")
    s.set_defaults(fn=_cmd_synth)

    s = subs.add_parser("train", help="train the head on a bundle file")
    _add_config_flags(s)
    s.add_argument("--data", required=True, help="input .vctr bundle file")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(fn=_cmd_train)

    s = subs.add_parser("eval", help="evaluate a checkpoint on a bundle file")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--split", default="test")
    s.add_argument("--views", type=int, default=1,
                   help="temporal views fused at inference")
    s.add_argument("--frames-per-view", type=int, default=None)
    s.set_defaults(fn=_cmd_eval)

    s = subs.add_parser("zeroshot", help="evaluate against unseen vocabularies")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", nargs="+", required=True,
                   help="one bundle file per evaluation split")
    s.add_argument("--split", default="test")
    s.set_defaults(fn=_cmd_zeroshot)

    s = subs.add_parser("ablate", help="run the named ablation rows")
    _add_config_flags(s)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--rows", default=None,
                   help="comma-separated row names (default: all)")
    s.set_defaults(fn=_cmd_ablate)

    s = subs.add_parser("gradcheck", help="finite-difference gradient check")
    _add_config_flags(s)
    s.add_argument("--all-toggles", action="store_true",
                   help="sweep every ablation toggle combination")
    s.set_defaults(fn=_cmd_gradcheck)

    s = subs.add_parser("flops", help="analytic FLOP breakdown")
    _add_config_flags(s, with_seed=False)
    s.add_argument("--frames", type=int, default=None,
                   help="frames per view (default: preset data.n_frames)")
    s.set_defaults(fn=_cmd_flops)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except GradCheckFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return 9
    except Exception as e:  # noqa: BLE001 - mapped to documented exit codes
        for classes, code in EXIT_CODES:
            if isinstance(e, classes):
                print(f"error: {e}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
