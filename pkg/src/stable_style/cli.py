"""Command-line entry point: ``sst <subcommand> --config run.yaml [flags]``.

Exit codes: 0 on success, 1 when inputs or configuration fail validation,
2 on any other runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional

from . import pipeline
from .config import load_config
from .corpus import CorpusError
from .errors import ConfigError, InputError
from .tokenizer import VocabularyError

logger = logging.getLogger("stable_style")

VALIDATION_ERRORS = (ConfigError, InputError, CorpusError, VocabularyError)


def _floats(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="run directory (overrides output_dir)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted config override, e.g. train.epochs=3; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    knobs = argparse.ArgumentParser(add_help=False)
    knobs.add_argument("--alpha", type=float)
    knobs.add_argument("--beta", type=float)
    knobs.add_argument("--checkpoint", help="generator checkpoint (default: <out>/generator.pt)")

    p = argparse.ArgumentParser(prog="sst", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train-classifier", parents=[common], help="train the deletion and evaluation classifiers")
    s.add_argument("--role", choices=["style", "eval", "both"], default="both")
    sub.add_parser("train-generator", parents=[common], help="train the transfer model")
    s = sub.add_parser("train-lm", parents=[common], help="train a perplexity LM")
    s.add_argument("--kind", choices=["data", "general"], default="data")
    s = sub.add_parser("transfer", parents=[common, knobs], help="transfer the test split")
    s.add_argument("--direction", help="SRC-TGT, e.g. 0-1; default: every direction")
    s = sub.add_parser("sweep", parents=[common], help="alpha/beta trade-off sweep")
    s.add_argument("--checkpoint")
    s.add_argument("--alpha-grid", type=_floats)
    s.add_argument("--beta-grid", type=_floats)
    s.add_argument("--no-plot", action="store_true")
    s = sub.add_parser("walk", parents=[common, knobs], help="interpolate between style embeddings")
    s.add_argument("--text", action="append", default=[], metavar="STYLE:SENTENCE")
    s = sub.add_parser("evaluate", parents=[common], help="score system outputs and flag unstable ones")
    s.add_argument("--system", action="append", default=[], metavar="NAME=PREFIX",
                   help="outputs in PREFIX.<source style> or PREFIX.<src>-<tgt>.txt; repeatable")
    s.add_argument("--input-copy", action="store_true", help="also score the unchanged inputs")
    s.add_argument("--name", default="eval", help="subdirectory of the run for the report")
    s = sub.add_parser("synth-data", help="write a small synthetic corpus in the release layout")
    s.add_argument("root")
    s.add_argument("--n-train", type=int, default=2000)
    s.add_argument("--n-dev", type=int, default=200)
    s.add_argument("--n-test", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    return p


def _parse_systems(items: List[str]) -> dict:
    systems = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"--system expects NAME=PREFIX, got {item!r}")
        name, prefix = item.split("=", 1)
        systems[name] = prefix
    return systems


def _parse_texts(items: List[str]):
    out = []
    for item in items:
        style, _, text = item.partition(":")
        if not text.strip():
            raise ConfigError(f"--text expects STYLE:SENTENCE, got {item!r}")
        try:
            out.append((text.strip(), int(style)))
        except ValueError:
            raise ConfigError(f"bad style in --text {item!r}") from None
    return out or None


def run(args: argparse.Namespace) -> None:
    if args.command == "synth-data":
        import os

        from .synthetic import write_corpus
        os.makedirs(args.root, exist_ok=True)
        write_corpus(args.root, args.n_train, args.n_dev, args.n_test, args.seed)
        print(args.root)
        return

    flags = {"seed": args.seed, "output_dir": args.out}
    cfg = load_config(args.config, args.set, **flags)
    cfg.validate()
    cfg.out.mkdir(parents=True, exist_ok=True)
    with open(cfg.out / "config.resolved.json", "w", encoding="utf-8") as fh:
        json.dump({"config_hash": cfg.digest(), **cfg.to_dict()}, fh, indent=2, default=str)

    cmd = args.command
    if cmd == "train-classifier":
        paths = pipeline.run_train_classifier(cfg, args.role)
    elif cmd == "train-generator":
        paths = [pipeline.run_train_generator(cfg)]
    elif cmd == "train-lm":
        paths = [pipeline.run_train_lm(cfg, args.kind)]
    elif cmd == "transfer":
        paths = pipeline.run_transfer(cfg, args.alpha, args.beta, args.direction, args.checkpoint)
    elif cmd == "sweep":
        pipeline.run_sweep(cfg, args.alpha_grid, args.beta_grid, args.checkpoint, plot=not args.no_plot)
        paths = [cfg.out / "sweep" / "sweep.tsv"]
    elif cmd == "walk":
        paths = [pipeline.run_walk(cfg, _parse_texts(args.text), args.checkpoint, args.alpha, args.beta)]
    elif cmd == "evaluate":
        systems = _parse_systems(args.system)
        if not systems and not args.input_copy:
            raise ConfigError("evaluate needs at least one --system or --input-copy")
        pipeline.run_eval(cfg, systems, args.input_copy, out_name=args.name)
        print((cfg.out / args.name / "table.txt").read_text(encoding="utf-8"), end="")
        paths = [cfg.out / args.name / "report.jsonl"]
    else:  # pragma: no cover - argparse rejects unknown commands
        raise ConfigError(f"unknown command {cmd}")
    for p in paths:
        print(p)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - map everything else to the runtime code
        logger.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
