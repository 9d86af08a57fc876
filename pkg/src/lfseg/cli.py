"""Command-line front end.

Subcommands: ``segment``, ``features``, ``flow``, ``synth``, ``eval``.
Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .energy import EnergyParams
from .flow import FlowError, FlowParams
from .lightfield import LightFieldError, read_mask
from .metrics import compare_report, prf
from .pipeline import (
    FlowSourceMissingError,
    PipelineConfig,
    features_dump,
    flow_dump,
    segment,
)
from .synth import emit, generate, parse_scene_spec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_CONFIG_KEYS = {
    "alpha": float,
    "beta": float,
    "gamma": float,
    "sig_a": float,
    "sig_b": float,
    "tau": float,
    "flow_levels": int,
    "flow_search_radius": int,
    "flow_patch_radius": int,
    "texture_window": int,
    "texture_thresh": float,
    "flow_source": str,
    "subset": str,
    "threads": int,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_config_file(path) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in _CONFIG_KEYS:
            raise UsageError(f"config line {lineno}: unknown entry {line!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise UsageError(f"config line {lineno}: {exc}") from exc
    return values


def build_pipeline_config(args) -> PipelineConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if getattr(args, "threads", None):
        values["threads"] = args.threads

    energy = EnergyParams(
        alpha=values.get("alpha", 70.0),
        beta=values.get("beta", 4.5),
        gamma=values.get("gamma", 4.5),
        a=values.get("sig_a", 0.5),
        b=values.get("sig_b", 5.0),
        tau=values.get("tau", 8.0),
    )
    flow = FlowParams(
        levels=values.get("flow_levels", 3),
        search_radius_px=values.get("flow_search_radius", 16),
        patch_radius_px=values.get("flow_patch_radius", 4),
    )
    try:
        return PipelineConfig(
            energy=energy,
            flow=flow,
            texture_window=values.get("texture_window", 4),
            texture_thresh=values.get("texture_thresh", 16.0),
            flow_source=values.get("flow_source", "builtin"),
            subset=values.get("subset", "all"),
            threads=values.get("threads", 1),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, help="region/boundary balance")
    p.add_argument("--beta", type=float, help="background-cost scale")
    p.add_argument("--gamma", type=float, help="boundary exponent rate")
    p.add_argument("--sig-a", dest="sig_a", type=float, help="sigmoid steepness")
    p.add_argument("--sig-b", dest="sig_b", type=float, help="sigmoid shift / threshold")
    p.add_argument("--tau", type=float, help="consistency tolerance in px")
    p.add_argument("--texture-thresh", dest="texture_thresh", type=float,
                   help="textureless gradient threshold")
    p.add_argument("--flow-source", dest="flow_source",
                   help="'builtin' or a directory of flow_f/_b .flo files")
    p.add_argument("--subset", choices=("all", "corners5", "uniform9"),
                   help="viewpoint subset to use")


def make_parser() -> _Parser:
    parser = _Parser(prog="lfseg", description=__doc__)
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--threads", type=int, help="flow worker threads")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a light-field directory")
    p.add_argument("--lf", required=True, help="light-field directory")
    p.add_argument("--out", required=True, help="output directory")
    _add_pipeline_flags(p)

    p = sub.add_parser("features", help="dump intermediate maps only")
    p.add_argument("--lf", required=True)
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)

    p = sub.add_parser("flow", help="precompute a .flo cache for a light field")
    p.add_argument("--lf", required=True)
    p.add_argument("--out", required=True)
    _add_pipeline_flags(p)

    p = sub.add_parser("synth", help="generate a synthetic scene directory")
    p.add_argument("--spec", required=True, help="key=value scene spec file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, help="override the scene rng seed")
    p.add_argument("--emit-flows", action="store_true", help="also write exact .flo files")

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", help="predicted mask PNG")
    p.add_argument("--gt", help="ground-truth mask PNG")
    p.add_argument("--batch", help="directory of scene subdirectories")
    p.add_argument("--csv", help="write CSV to this path")
    p.add_argument("--micro", action="store_true", help="pool counts instead of macro-averaging")
    return parser


def _cmd_segment(args) -> int:
    config = build_pipeline_config(args)
    result = segment(args.lf, config, args.out)
    if args.verbose:
        print(f"energy {result.energy_value:.6f}, foreground {int(result.mask.data.sum())} px")
    return EXIT_OK


def _cmd_features(args) -> int:
    config = build_pipeline_config(args)
    features_dump(args.lf, config, args.out)
    return EXIT_OK


def _cmd_flow(args) -> int:
    config = build_pipeline_config(args)
    flow_dump(args.lf, config, args.out)
    return EXIT_OK


def _cmd_synth(args) -> int:
    try:
        spec = parse_scene_spec(args.spec)
    except (OSError, ValueError) as exc:
        print(f"lfseg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        spec = dataclasses.replace(spec, rng_seed=args.seed)
    scene = generate(spec)
    emit(scene, args.out, flows="auto" if args.emit_flows else None)
    if args.verbose:
        print(f"wrote {scene.lightfield.num_views} views to {args.out}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    if args.batch:
        scenes = []
        root = Path(args.batch)
        if not root.is_dir():
            raise FileNotFoundError(f"batch directory {root} does not exist")
        for scene_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            gt_path = scene_dir / "gt_mask.png"
            if not gt_path.is_file():
                continue
            gt = read_mask(gt_path)
            methods = []
            for pred_path in sorted(scene_dir.glob("*.png")):
                if pred_path.name == "gt_mask.png":
                    continue
                methods.append((pred_path.stem, read_mask(pred_path)))
            if methods:
                scenes.append((scene_dir.name, gt, methods))
        _, _, text, csv = compare_report(scenes, micro=args.micro)
        print(text, end="")
        if args.csv:
            Path(args.csv).write_text(csv)
        return EXIT_OK
    if not (args.pred and args.gt):
        raise UsageError("eval needs --pred and --gt, or --batch")
    r = prf(read_mask(args.pred), read_mask(args.gt))
    line = f"precision={r.precision:.6f} recall={r.recall:.6f} f={r.f_measure:.6f}"
    print(line)
    if args.csv:
        Path(args.csv).write_text(
            f"scene,method,precision,recall,f\n-,{Path(args.pred).stem},"
            f"{r.precision:.6f},{r.recall:.6f},{r.f_measure:.6f}\n"
        )
    return EXIT_OK


_COMMANDS = {
    "segment": _cmd_segment,
    "features": _cmd_features,
    "flow": _cmd_flow,
    "synth": _cmd_synth,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"lfseg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"lfseg: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LightFieldError, FlowError, FlowSourceMissingError, FileNotFoundError, ValueError) as exc:
        print(f"lfseg: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
