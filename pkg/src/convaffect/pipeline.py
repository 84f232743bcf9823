"""Run plumbing: flat config files, environment overrides, and the
artifact-producing train/evaluate/predict flows shared by the CLI.

Config files are `key = value` lines with `#` comments. Any key can be
overridden by an environment variable named CONVAFFECT_<KEY uppercased>.
Every run is a pure function of (config, input files): artifacts land
under `output_dir` and are byte-identical across reruns with the same
seed, except the wall-clock elapsed_s field inside the training log.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import DEFAULT_ACTIVE, LABEL_TO_CODE, NUM_CLASSES, load_corpus
from .embed import FeatureStore, build_vocab, load_word_vectors
from .errors import ConfigError
from .metrics import EvalReport, evaluate_split
from .model import ModelParams
from .numkit import BACKEND
from .seeding import INIT, derive_rng
from .train import TrainConfig, TrainResult, train_loop

log = logging.getLogger("convaffect")

ENV_PREFIX = "CONVAFFECT_"

# keys that may not be overridden from the environment because another
# mechanism owns them
_RESERVED_ENV = {f"{ENV_PREFIX}BACKEND"}


@dataclass
class RunConfig:
    """Union of training hyperparameters, architecture sizes, and paths."""

    corpus: str | None = None
    word_vectors: str | None = None
    features: str | None = None
    output_dir: str = "run_output"
    seed: int = 0
    hidden: int = 300
    embed_dim: int = 300
    word_feature_dim: int = 1024
    utterance_feature_dim: int = 2304
    lr0: float = 0.00025
    decay_factor: float = 0.5
    decay_every: int = 15
    max_epochs: int = 50
    patience: int = 10
    dropout: float = 0.5
    max_tokens: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = 5.0
    early_stop_metric: str = "wa"
    active_classes: tuple[int, ...] = DEFAULT_ACTIVE
    freeze_embeddings: bool = False

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr0=self.lr0,
            decay_factor=self.decay_factor,
            decay_every=self.decay_every,
            max_epochs=self.max_epochs,
            patience=self.patience,
            dropout=self.dropout,
            max_tokens=self.max_tokens,
            seed=self.seed,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            active_classes=self.active_classes,
            clip_norm=self.clip_norm,
            early_stop_metric=self.early_stop_metric,
        ).validate()

    def to_dict(self) -> dict:
        d = asdict(self)
        d["active_classes"] = list(self.active_classes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["active_classes"] = tuple(d.get("active_classes", DEFAULT_ACTIVE))
        return cls(**d)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """`key = value` per line; blank lines and `#` comments ignored."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def apply_env_overrides(raw: dict[str, str], environ=os.environ) -> dict[str, str]:
    merged = dict(raw)
    known = {f.lower() for f in RunConfig.__dataclass_fields__}
    for env_key, value in environ.items():
        if not env_key.startswith(ENV_PREFIX) or env_key in _RESERVED_ENV:
            continue
        key = env_key[len(ENV_PREFIX):].lower()
        if key in known:
            merged[key] = value
    return merged


def _parse_active(value: str) -> tuple[int, ...]:
    codes = []
    for part in value.split(","):
        part = part.strip().lower()
        if not part:
            continue
        if part in LABEL_TO_CODE:
            codes.append(LABEL_TO_CODE[part])
        elif part.isdigit() and int(part) < NUM_CLASSES:
            codes.append(int(part))
        else:
            raise ConfigError(f"active_classes: unknown label {part!r}")
    if not codes:
        raise ConfigError("active_classes: empty list")
    return tuple(sorted(set(codes)))


def _parse_bool(value: str, key: str) -> bool:
    v = value.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def build_run_config(raw: dict[str, str]) -> RunConfig:
    cfg = RunConfig()
    fields = RunConfig.__dataclass_fields__
    for key, value in raw.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key == "active_classes":
                setattr(cfg, key, _parse_active(value))
            elif key == "freeze_embeddings":
                setattr(cfg, key, _parse_bool(value, key))
            elif key == "clip_norm":
                setattr(cfg, key, None if value.strip().lower() in ("none", "off") else float(value))
            elif key in ("corpus", "word_vectors", "features", "output_dir", "early_stop_metric"):
                setattr(cfg, key, value)
            elif key in ("seed", "hidden", "embed_dim", "word_feature_dim",
                         "utterance_feature_dim", "decay_every", "max_epochs",
                         "patience", "max_tokens"):
                setattr(cfg, key, int(value))
            else:
                setattr(cfg, key, float(value))
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {value!r} ({exc})") from exc
    cfg.train_config()  # surface invalid combinations now
    return cfg


def load_config(path: str | Path, environ=os.environ) -> RunConfig:
    return build_run_config(apply_env_overrides(parse_config_file(path), environ))


def load_feature_store(cfg: RunConfig) -> FeatureStore:
    if cfg.features:
        return FeatureStore.load(
            cfg.features, word_dim=cfg.word_feature_dim, utt_dim=cfg.utterance_feature_dim
        )
    log.warning("no feature file configured; running in degraded mode (zero features)")
    return FeatureStore(word_dim=cfg.word_feature_dim, utt_dim=cfg.utterance_feature_dim)


def setup_model(cfg: RunConfig, splits) -> ModelParams:
    if "train" not in splits:
        raise ConfigError("corpus has no train split; cannot build a vocabulary")
    vocab = build_vocab(splits["train"])
    table = load_word_vectors(
        cfg.word_vectors, vocab, dim=cfg.embed_dim, seed=cfg.seed,
        trainable=not cfg.freeze_embeddings,
    )
    params = ModelParams.init(
        embedding=table,
        word_feature_dim=cfg.word_feature_dim,
        utterance_feature_dim=cfg.utterance_feature_dim,
        hidden=cfg.hidden,
        rng=derive_rng(cfg.seed, INIT),
    )
    log.info(
        "model ready: %d parameters, vocabulary %d, embedding coverage %.3f, backend %s",
        params.parameter_count(), len(vocab), table.coverage, BACKEND,
    )
    return params


def run_training(cfg: RunConfig) -> tuple[TrainResult, dict[str, Path]]:
    """Full training flow: corpus -> model -> loop -> artifacts.

    Writes train_log.jsonl, checkpoint.json/.bin, and the best model's
    validation report into output_dir.
    """
    if not cfg.corpus:
        raise ConfigError("config is missing 'corpus'")
    splits = load_corpus(cfg.corpus)
    store = load_feature_store(cfg)
    params = setup_model(cfg, splits)
    result = train_loop(params, splits, store, cfg.train_config())

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "log": out / "train_log.jsonl",
        "checkpoint": out / "checkpoint.json",
        "report_json": out / "validation_report.json",
        "report_txt": out / "validation_report.txt",
    }
    with paths["log"].open("w", encoding="utf-8") as fh:
        for record in result.log:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    save_checkpoint(paths["checkpoint"], params, cfg.to_dict())
    report = evaluate_split(
        params, splits["validation"], store, cfg.active_classes, cfg.max_tokens
    )
    paths["report_json"].write_text(report.to_json() + "\n", encoding="utf-8")
    paths["report_txt"].write_text(report.render_text() + "\n", encoding="utf-8")
    return result, paths


def load_for_inference(
    checkpoint_path: str | Path, features_path: str | Path | None = None
) -> tuple[ModelParams, RunConfig, FeatureStore]:
    params, config_dict = load_checkpoint(checkpoint_path, trainable=False)
    cfg = RunConfig.from_dict(config_dict)
    if features_path is not None:
        cfg.features = str(features_path)
    else:
        cfg.features = None
    store = load_feature_store(cfg)
    return params, cfg, store


def evaluate_checkpoint(
    checkpoint_path: str | Path,
    corpus_path: str | Path,
    split_name: str,
    features_path: str | Path | None = None,
) -> EvalReport:
    params, cfg, store = load_for_inference(checkpoint_path, features_path)
    splits = load_corpus(corpus_path)
    if split_name not in splits:
        raise ConfigError(
            f"split {split_name!r} not found in {corpus_path} (has {sorted(splits)})"
        )
    return evaluate_split(
        params, splits[split_name], store, cfg.active_classes, cfg.max_tokens
    )
