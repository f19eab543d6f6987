"""Command-line pipeline driver.

One JSON config file is the source of truth; flags override individual
fields.  Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline, refine
from .corruption import SEVERITY_LEVELS
from .environment import EnvironmentFormatError, environment_from_dict
from .geometry import rasterize
from .pipeline import ConfigError, PipelineConfig, PipelineError
from .refine import RefinementConfig, build_pair_sequences, refine_map
from .rfsim import BANDS_GHZ, PathLossTable

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON pipeline config file")
    p.add_argument("--root", type=Path, help="dataset root directory")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--severity", type=float, choices=SEVERITY_LEVELS, help="corruption level")
    p.add_argument("--granularity", choices=("r1", "r2"))
    p.add_argument("--noise", choices=("none", "28ghz", "73ghz"))
    p.add_argument("--labels", choices=("classified", "oracle"), dest="labels_source")
    p.add_argument("--fit-mode", choices=("literal", "ols"), dest="fit_mode")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate environments and the split index")
    _add_common(p_gen)
    p_gen.add_argument("--train", type=int, help="train split size")
    p_gen.add_argument("--val", type=int, help="val split size")
    p_gen.add_argument("--test", type=int, help="test split size")

    p_rf = sub.add_parser("synth-rf", help="synthesize rf.json per environment")
    _add_common(p_rf)

    p_cor = sub.add_parser("corrupt", help="corrupt maps (test split gets binned)")
    _add_common(p_cor)

    p_ref = sub.add_parser("refine", help="refine corrupted maps against RF labels")
    _add_common(p_ref)
    p_ref.add_argument("--split", default="test", choices=("train", "val", "test"))
    p_ref.add_argument("--max-iters", type=int, dest="max_iters")
    p_ref.add_argument("--input", type=Path, help="single corrupted.json (file mode)")
    p_ref.add_argument("--rf", type=Path, help="single rf.json (file mode)")
    p_ref.add_argument("--env", type=Path, help="single environment.json (file mode)")
    p_ref.add_argument("--out", type=Path, help="output refined.json (file mode)")

    p_eval = sub.add_parser("eval", help="score a prediction source vs ground truth")
    _add_common(p_eval)
    p_eval.add_argument(
        "--pred",
        default="corrupted",
        help="'corrupted', 'refined', or a directory of <env_id>.json predictions",
    )
    p_eval.add_argument("--split", default="test", choices=("train", "val", "test"))

    p_render = sub.add_parser("render", help="write contour-overlay SVGs")
    _add_common(p_render)
    p_render.add_argument("--split", default="test", choices=("train", "val", "test"))

    p_exp = sub.add_parser("export", help="pack a JSON-lines dataset for the trainer")
    _add_common(p_exp)
    p_exp.add_argument("--out", type=Path, required=True)
    p_exp.add_argument("--variants", type=int, help="corruption instances per train env")
    p_exp.add_argument("--subset-min", type=int, dest="subset_min", help="min radio tokens")
    p_exp.add_argument(
        "--splits", nargs="+", default=["train", "val", "test"], choices=("train", "val", "test")
    )
    return parser


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = pipeline.load_config(args.config) if args.config else PipelineConfig()
    updates: dict = {}
    for attr in ("root", "seed", "severity", "granularity", "noise", "labels_source", "fit_mode"):
        value = getattr(args, attr, None)
        if value is not None:
            updates[attr] = value
    if getattr(args, "max_iters", None) is not None:
        updates["refinement"] = dataclasses.replace(
            cfg.refinement, max_iterations=args.max_iters
        )
    if getattr(args, "variants", None) is not None:
        updates["export_variants"] = args.variants
    if getattr(args, "subset_min", None) is not None:
        updates["min_radio_tokens"] = args.subset_min
    if any(getattr(args, k, None) is not None for k in ("train", "val", "test")):
        updates["splits"] = pipeline.SplitSizes(
            train=args.train if args.train is not None else cfg.splits.train,
            val=args.val if args.val is not None else cfg.splits.val,
            test=args.test if args.test is not None else cfg.splits.test,
        )
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _refine_single_file(args: argparse.Namespace, cfg: PipelineConfig) -> None:
    """File mode: refine one corrupted.json against one rf.json."""
    for name in ("rf", "env", "out"):
        if getattr(args, name) is None:
            raise PipelineError(f"file mode needs --input, --rf, --env, and --out (missing --{name})")
    env = environment_from_dict(json.loads(args.env.read_text()))
    corrupted_doc = json.loads(args.input.read_text())
    rf_doc = json.loads(args.rf.read_text())
    corrupted_map = rasterize(
        pipeline.corrupted_polygons(corrupted_doc), env.side_length
    )
    curves = None
    if cfg.labels_source == "classified":
        # No training split in file mode: fit on this file's LOS-labeled pairs.
        samples: dict[float, list[tuple[float, float]]] = {b: [] for b in BANDS_GHZ}
        for pair in rf_doc["pairs"]:
            if pair["label"] != "LOS":
                continue
            d = float(
                np.linalg.norm(env.bs[pair["bs_index"]] - env.ue[pair["ue_index"]])
            )
            for band in BANDS_GHZ:
                value = pair["loss_db"][str(band)]
                samples[band].append((d, float("inf") if value is None else value))
        curves = {
            band: refine.fit_curve(samples[band], band, mode=cfg.fit_mode)
            for band in BANDS_GHZ
        }
    labels = pipeline.pair_labels(cfg, env, rf_doc, curves)
    pairs = build_pair_sequences(env.ue, env.bs, labels, corrupted_map)
    ref_cfg = dataclasses.replace(cfg.refinement, seed=cfg.seed)
    refined = refine_map(corrupted_map, pairs, ref_cfg)
    pipeline.write_prediction(args.out, env.id, refined, cfg.labels_source)
    print(f"wrote {args.out}")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "gen":
            index = pipeline.stage_gen(cfg)
            print(f"generated {sum(len(v) for v in index.values())} environments in {cfg.root}")
        elif args.command == "synth-rf":
            pipeline.stage_synth_rf(cfg)
            print("rf.json written for all environments")
        elif args.command == "corrupt":
            pipeline.stage_corrupt(cfg)
            print("corrupted.json written for all environments")
        elif args.command == "refine":
            if args.input is not None:
                _refine_single_file(args, cfg)
            else:
                pipeline.stage_refine(cfg, split=args.split)
                print(f"refined.json written for split '{args.split}'")
        elif args.command == "eval":
            report = pipeline.stage_eval(cfg, pred=args.pred, split=args.split)
            print(
                f"macro IoU {report.macro_iou:.4f}  micro IoU {report.micro_iou:.4f}  "
                f"Hausdorff {report.mean_hausdorff:.2f}m  Chamfer {report.mean_chamfer:.2f}m"
            )
        elif args.command == "render":
            pipeline.stage_render(cfg, split=args.split)
            print(f"render.svg written for split '{args.split}'")
        elif args.command == "export":
            count = pipeline.stage_export(cfg, args.out, splits=tuple(args.splits))
            print(f"exported {count} records to {args.out}")
    except (ConfigError, PipelineError, EnvironmentFormatError, FileNotFoundError) as exc:
        print(f"rfmap: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
