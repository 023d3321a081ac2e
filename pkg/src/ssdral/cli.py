"""Command line interface: partition, gen-scene, run, eval.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .cloud import load_point_cloud, save_point_cloud
from .config import load_run_config, load_scene_spec, parse_kv_file
from .errors import ConfigError, DataError
from .harness import run_experiment
from .metrics import evaluate
from .partition import generate_superpoints
from .scene import generate_scene


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ssdral", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a cloud into superpoints")
    p.add_argument("cloud", help="input cloud file (7-column format)")
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--out", required=True, help="output path (8-column format)")
    p.add_argument("--voxel-size", type=float, default=0.5)
    p.add_argument("--color-threshold", type=float, default=0.1)
    p.add_argument("--normal-threshold", type=float, default=0.5)
    p.add_argument("--min-region", type=int, default=1)
    p.add_argument("--rng-seed", type=int, default=0)

    g = sub.add_parser("gen-scene", help="generate a synthetic scene")
    g.add_argument("spec", help="scene spec file (key = value)")
    g.add_argument("--out", help="output cloud path (overrides the spec's output key)")

    r = sub.add_parser("run", help="run an active-learning experiment")
    r.add_argument("config", help="run config file (section.key = value)")

    e = sub.add_parser("eval", help="compare predicted labels against ground truth")
    e.add_argument("pred", help="predicted labels (one per line, or a cloud file)")
    e.add_argument("gt", help="ground-truth labels (one per line, or a cloud file)")
    e.add_argument("--num-classes", type=int, default=None,
                   help="default: 1 + max label seen")
    return parser


def _read_labels(path: str) -> np.ndarray:
    labels = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = stripped.split()
                try:
                    if len(fields) >= 7:
                        labels.append(int(fields[6]))
                    else:
                        labels.append(int(fields[0]))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: not a label line") from None
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not labels:
        raise DataError(f"{path}: no labels")
    arr = np.asarray(labels, dtype=np.int64)
    if arr.min() < 0:
        raise DataError(f"{path}: negative label")
    return arr


def cmd_partition(args) -> int:
    cloud = load_point_cloud(args.cloud, args.num_classes)
    partition = generate_superpoints(
        cloud,
        voxel_size=args.voxel_size,
        color_threshold=args.color_threshold,
        normal_threshold=args.normal_threshold,
        min_region=args.min_region,
        rng_seed=args.rng_seed,
    )
    save_point_cloud(args.out, cloud, partition)
    print(f"wrote {args.out}: {len(cloud)} points, {len(partition)} superpoints")
    return 0


def cmd_gen_scene(args) -> int:
    spec = load_scene_spec(args.spec)
    out = args.out or parse_kv_file(args.spec).get("output")
    if not out:
        raise ConfigError("no output path: pass --out or set output in the spec")
    cloud = generate_scene(spec)
    save_point_cloud(out, cloud)
    print(f"wrote {out}: {len(cloud)} points, {cloud.num_classes} classes")
    return 0


def cmd_run(args) -> int:
    config = load_run_config(args.config)
    _, summary = run_experiment(config)
    print(json.dumps(summary))
    return 0


def cmd_eval(args) -> int:
    pred = _read_labels(args.pred)
    gt = _read_labels(args.gt)
    num_classes = args.num_classes or int(max(pred.max(), gt.max())) + 1
    result = evaluate(pred, gt, num_classes)
    print(f"accuracy {result.accuracy:.6f}")
    for c, iou in enumerate(result.per_class_iou):
        shown = "absent" if np.isnan(iou) else f"{iou:.6f}"
        print(f"iou[{c}] {shown}")
    print(f"miou {result.miou:.6f}")
    return 0


COMMANDS = {
    "partition": cmd_partition,
    "gen-scene": cmd_gen_scene,
    "run": cmd_run,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
