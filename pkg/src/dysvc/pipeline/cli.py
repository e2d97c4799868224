"""Command-line entry point: ``dysvc <verb> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import DysvcError
from .config import PipelineConfig, load_config


def _config(args) -> PipelineConfig:
    path = getattr(args, "config", None)
    cfg = load_config(path) if path else PipelineConfig()
    return cfg.with_overrides(seed=getattr(args, "seed", None), jobs=getattr(args, "jobs", None))


def _validate(args):
    from .manifest import validate_manifest

    m = validate_manifest(args.manifest)
    groups = {g: len(m.speakers(g)) for g in ("healthy", "als", "ataxic")}
    print(f"{len(m.entries)} entries; speakers: " + ", ".join(f"{k} {v}" for k, v in groups.items()))


def _train(args):
    from .commands import cmd_train

    print(cmd_train(args.manifest, _config(args), args.out))


def _transform(args):
    from .commands import cmd_transform

    print(cmd_transform(args.artifacts, args.input, _config(args), args.output))


def _evaluate(args):
    from .commands import cmd_evaluate

    report = cmd_evaluate(args.artifacts, args.manifest, _config(args), args.out)
    keys = ("dp_healthy_als", "dp_transformed_als", "pct_healthy_as_als", "pct_transformed_as_als")
    print(json.dumps({k: report[k] for k in keys}, indent=2))


def _augment(args):
    from .commands import cmd_augment

    cfg = _config(args)
    if args.k_max is not None:
        from dataclasses import replace
        cfg = cfg.with_overrides(evaluation=replace(cfg.evaluation, k_max=args.k_max))
    for r in cmd_augment(args.manifest, args.artifacts, cfg, args.out):
        print(f"k={r['k']:2d}  accuracy={r['accuracy']:.3f}  noise_baseline={r['baseline_accuracy']:.3f}")


def _synth(args):
    from .synth_corpus import synth_corpus

    seed = getattr(args, "seed", 0)
    print(synth_corpus(args.out, args.healthy, args.als, args.ataxic, args.phrases, seed))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("--jobs", type=int, help="worker processes for per-utterance analysis")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dysvc", description="Healthy-to-dysarthric speech simulation.",
                                parents=[common])
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a corpus manifest")
    s.add_argument("manifest", type=Path)
    s.set_defaults(fn=_validate)

    s = sub.add_parser("train", parents=[common], help="train MCEP/BAP GANs and pitch statistics")
    s.add_argument("manifest", type=Path)
    s.add_argument("--out", type=Path, required=True, help="artifact directory")
    s.set_defaults(fn=_train)

    s = sub.add_parser("transform", parents=[common], help="transform one healthy recording")
    s.add_argument("artifacts", type=Path)
    s.add_argument("input", type=Path)
    s.add_argument("output", type=Path)
    s.set_defaults(fn=_transform)

    s = sub.add_parser("evaluate", parents=[common], help="objective Dp / SVM report")
    s.add_argument("artifacts", type=Path)
    s.add_argument("manifest", type=Path)
    s.add_argument("--out", type=Path, help="JSON report path")
    s.set_defaults(fn=_evaluate)

    s = sub.add_parser("augment", parents=[common], help="augmentation accuracy curve")
    s.add_argument("manifest", type=Path)
    s.add_argument("artifacts", type=Path)
    s.add_argument("--out", type=Path, help="CSV curve path")
    s.add_argument("--k-max", type=int, dest="k_max")
    s.set_defaults(fn=_augment)

    s = sub.add_parser("synth-corpus", parents=[common], help="write the seeded synthetic corpus")
    s.add_argument("out", type=Path)
    s.add_argument("--healthy", type=int, default=8)
    s.add_argument("--als", type=int, default=8)
    s.add_argument("--ataxic", type=int, default=0)
    s.add_argument("--phrases", type=int, default=5)
    s.set_defaults(fn=_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.fn(args)
    except DysvcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
