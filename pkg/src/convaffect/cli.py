"""Command-line interface: train, evaluate, predict, inspect.

Every command is a pure function of its config, input files, and seed;
rerunning reproduces the same artifacts. Failures exit with a categorized
code: 2 config, 3 data, 4 numeric divergence, 5 checkpoint/version
mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .corpus import LABELS, load_corpus, parse_split, split_stats
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    ConvAffectError,
    DataError,
    DimensionError,
    EmptySequenceError,
    EvaluationError,
    NumericError,
)
from .model import predict
from .pipeline import evaluate_checkpoint, load_config, load_for_inference, run_training

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_VERSION = 5

log = logging.getLogger("convaffect")


def _exit_code_for(exc: ConvAffectError) -> int:
    if isinstance(exc, CheckpointError):
        return EXIT_VERSION
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, DimensionError, EmptySequenceError, EvaluationError)):
        return EXIT_DATA
    if isinstance(exc, (ConfigError, ContractError)):
        return EXIT_CONFIG
    return EXIT_CONFIG


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    result, paths = run_training(cfg)
    if result.best_epoch is not None:
        print(
            f"best epoch {result.best_epoch}: validation "
            f"{cfg.early_stop_metric.upper()} {100 * result.best_metric:.2f}"
        )
    print(f"checkpoint: {paths['checkpoint']}")
    print(f"training log: {paths['log']}")
    print(f"validation report: {paths['report_txt']}")
    if result.diverged:
        print("training diverged; best checkpoint before divergence was kept", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_evaluate(args) -> int:
    report = evaluate_checkpoint(args.checkpoint, args.corpus, args.split, args.features)
    print(report.render_text())
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
        (out / "report.txt").write_text(report.render_text() + "\n", encoding="utf-8")
    return EXIT_OK


def _load_predict_payload(path: Path) -> list:
    if not path.is_file():
        raise DataError(f"dialogue file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(payload, list) and payload and isinstance(payload[0], dict):
        payload = [payload]  # a single dialogue was given bare
    if not isinstance(payload, list) or not payload:
        raise DataError(f"{path}: no dialogues to predict")
    # gold labels are not needed for prediction; fill absent ones in
    return [
        [dict(u, emotion=u.get("emotion", "neutral")) if isinstance(u, dict) else u for u in d]
        if isinstance(d, list) else d
        for d in payload
    ]


def cmd_predict(args) -> int:
    params, cfg, store = load_for_inference(args.checkpoint, args.features)
    split = parse_split("test", _load_predict_payload(Path(args.input)))
    sink = Path(args.output).open("w", encoding="utf-8") if args.output else sys.stdout
    try:
        for dialogue in split.dialogues:
            for utt, (code, probs) in zip(
                dialogue.utterances, predict(params, dialogue, store, cfg.max_tokens)
            ):
                record = {
                    "dialogue": dialogue.id,
                    "utterance": utt.index_in_dialogue,
                    "speaker": utt.speaker,
                    "text": utt.raw_text,
                    "predicted": LABELS[code],
                    "probabilities": {name: float(p) for name, p in zip(LABELS, probs)},
                }
                sink.write(json.dumps(record, sort_keys=True) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    return EXIT_OK


def cmd_inspect(args) -> int:
    splits = load_corpus(args.corpus)
    print(f"{'split':<12} {'dialogues (utterances)':>24}")
    for name in ("train", "validation", "test"):
        if name in splits:
            s = split_stats(splits[name])
            counts = f"{s['dialogues']} ({s['utterances']:,})"
            print(f"{name:<12} {counts:>24}")
    print()
    header = "".join(f"{label:>13}" for label in LABELS)
    print(f"{'labels':<12}{header}")
    for name in ("train", "validation", "test"):
        if name in splits:
            hist = split_stats(splits[name])["histogram"]
            row = "".join(f"{hist[label]:>13,}" for label in LABELS)
            print(f"{name:<12}{row}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convaffect",
        description="Contextual emotion classification over multi-party dialogues.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True, help="key = value config file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on one corpus split")
    p.add_argument("--checkpoint", required=True, help="checkpoint manifest (.json)")
    p.add_argument("--corpus", required=True, help="corpus directory or split file")
    p.add_argument("--split", required=True, choices=("train", "validation", "test"))
    p.add_argument("--features", default=None, help="feature store (JSON-lines)")
    p.add_argument("--output", default=None, help="directory for report.json/report.txt")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="label a dialogue file with a trained model")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="JSON dialogue file")
    p.add_argument("--features", default=None)
    p.add_argument("--output", default=None, help="JSON-lines output file (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("inspect", help="print corpus statistics")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvAffectError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
