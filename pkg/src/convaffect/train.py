"""Loss, class weighting, Adam, the learning-rate schedule, and the epoch
loop with early stopping.

Each dialogue is one batch: forward over all its utterances, one weighted
cross-entropy over the positively-weighted rows, one optimizer step.
Classes outside the active set carry weight zero, which is implemented as
structural exclusion: their rows never enter the loss graph, so their
gradient is exactly zero by construction, not by multiplication.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import DEFAULT_ACTIVE, NUM_CLASSES, DatasetSplit, label_histogram
from .embed import PAD_ID, FeatureStore
from .errors import ConfigError, ContractError, LabelError, NumericError
from .metrics import evaluate_split
from .model import ModelParams, dialogue_forward
from .numkit import Tensor, ops
from .seeding import DROPOUT, SHUFFLE, derive_rng


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights; excluded classes are exactly zero."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        if w.shape != (NUM_CLASSES,):
            raise ConfigError(f"class weights must have {NUM_CLASSES} entries, got shape {w.shape}")
        if (w < 0).any():
            raise ConfigError("class weights must be nonnegative")
        if not (w > 0).any():
            raise ConfigError("at least one class weight must be positive")


def compute_class_weights(
    histogram: Sequence[int], active: Sequence[int] = DEFAULT_ACTIVE
) -> ClassWeights:
    """Inverse-frequency weights with mean 1 over the active classes:
    w_c = N_active / (|active| * n_c). Inactive classes get exactly 0."""
    counts = np.asarray(histogram, dtype=np.int64)
    if counts.shape != (NUM_CLASSES,):
        raise ConfigError(f"histogram must have {NUM_CLASSES} entries, got shape {counts.shape}")
    active = sorted(set(int(c) for c in active))
    if not active:
        raise ConfigError("active class set is empty")
    for c in active:
        if not 0 <= c < NUM_CLASSES:
            raise ConfigError(f"active class code {c} outside 0..{NUM_CLASSES - 1}")
        if counts[c] == 0:
            raise ConfigError(f"active class {c} has zero training examples")
    total = counts[active].sum()
    w = np.zeros(NUM_CLASSES)
    for c in active:
        w[c] = total / (len(active) * counts[c])
    return ClassWeights(w=w)


def weighted_cross_entropy(
    probs: Tensor,
    gold: Sequence[int],
    weights: ClassWeights,
    include: Sequence[bool] | None = None,
) -> Tensor | None:
    """Mean weighted negative log-likelihood over the contributing rows.

    loss = (1/K) * sum_i w[gold_i] * (-log probs[i, gold_i]) where i ranges
    over the K rows with positive weight (and, if given, include[i] true).
    Rows outside that set are never gathered into the graph, so their
    gradient is identically zero. Returns None when no row contributes.
    """
    if probs.data.ndim != 2 or probs.data.shape[1] != NUM_CLASSES:
        raise ContractError(f"probs must be [N, {NUM_CLASSES}], got shape {probs.data.shape}")
    n = probs.data.shape[0]
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (n,):
        raise ContractError(f"need {n} gold labels, got shape {gold.shape}")
    if gold.size and (gold.min() < 0 or gold.max() >= NUM_CLASSES):
        raise LabelError(f"gold label outside 0..{NUM_CLASSES - 1}")
    row_sums = probs.data.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-9:
        raise ContractError("probs rows must each sum to 1")
    if include is None:
        include = np.ones(n, dtype=bool)
    else:
        include = np.asarray(include, dtype=bool)
        if include.shape != (n,):
            raise ContractError(f"include mask must have {n} entries, got shape {include.shape}")

    rows = np.flatnonzero((weights.w[gold] > 0) & include)
    if rows.size == 0:
        return None
    picked = ops.gather_cols(ops.select_rows(probs, rows), gold[rows])
    weighted = ops.mul(ops.log(picked), Tensor(-weights.w[gold[rows]]))
    return ops.scale(ops.sum_all(weighted), 1.0 / rows.size)


@dataclass
class TrainConfig:
    lr0: float = 0.00025
    decay_factor: float = 0.5
    decay_every: int = 15
    max_epochs: int = 50
    patience: int = 10
    dropout: float = 0.5
    max_tokens: int = 50
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    active_classes: tuple[int, ...] = DEFAULT_ACTIVE
    clip_norm: float | None = 5.0  # None disables clipping (fidelity runs)
    early_stop_metric: str = "wa"

    def validate(self) -> "TrainConfig":
        checks = [
            (self.lr0 > 0, "lr0 must be positive"),
            (self.decay_factor > 0, "decay_factor must be positive"),
            (self.decay_every >= 1, "decay_every must be >= 1"),
            (self.max_epochs >= 0, "max_epochs must be >= 0"),
            (self.patience >= 1, "patience must be >= 1"),
            (0.0 <= self.dropout < 1.0, "dropout must be in [0, 1)"),
            (self.max_tokens >= 1, "max_tokens must be >= 1"),
            (0.0 < self.beta1 < 1.0, "beta1 must be in (0, 1)"),
            (0.0 < self.beta2 < 1.0, "beta2 must be in (0, 1)"),
            (self.eps > 0, "eps must be positive"),
            (len(self.active_classes) > 0, "active_classes must be nonempty"),
            (self.clip_norm is None or self.clip_norm > 0, "clip_norm must be positive or None"),
            (self.early_stop_metric in ("wa", "uwa"), "early_stop_metric must be 'wa' or 'uwa'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """lr0 * decay_factor^floor(epoch / decay_every); epochs count from 0."""
    if epoch < 0:
        raise ConfigError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr0 * cfg.decay_factor ** (epoch // cfg.decay_every)


@dataclass
class AdamState:
    """Bias-corrected Adam moments, keyed by parameter name; one global
    step counter incremented per optimizer call."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(named: list[tuple[str, Tensor]], state: AdamState, lr: float) -> None:
    """One in-place Adam step over all trainable tensors. Missing gradients
    count as zero (the moments still decay)."""
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for name, p in named:
        if not p.requires_grad:
            continue
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def clip_gradients(named: list[tuple[str, Tensor]], max_norm: float | None) -> float:
    """Scale all gradients so their global 2-norm is at most max_norm.
    Returns the pre-clip norm; raises on non-finite gradients."""
    total = 0.0
    grads = []
    for name, p in named:
        if p.requires_grad and p.grad is not None:
            sq = float((p.grad * p.grad).sum())
            if not np.isfinite(sq):
                raise NumericError(f"non-finite gradient in {name}")
            total += sq
            grads.append(p.grad)
    norm = float(np.sqrt(total))
    if max_norm is not None and norm > max_norm and norm > 0:
        factor = max_norm / norm
        for g in grads:
            g *= factor
    return norm


def zero_gradients(named: list[tuple[str, Tensor]]) -> None:
    for _, p in named:
        p.grad = None


@dataclass
class TrainResult:
    log: list[dict]
    best_epoch: int | None
    best_metric: float
    best_state: dict[str, np.ndarray]
    diverged: bool = False


def _snapshot(named: list[tuple[str, Tensor]]) -> dict[str, np.ndarray]:
    return {name: p.data.copy() for name, p in named}


def _restore(named: list[tuple[str, Tensor]], state: dict[str, np.ndarray]) -> None:
    for name, p in named:
        np.copyto(p.data, state[name])


def train_loop(
    params: ModelParams,
    splits: dict[str, DatasetSplit],
    store: FeatureStore,
    cfg: TrainConfig,
    weights: ClassWeights | None = None,
    loss_row_filter: Callable | None = None,
) -> TrainResult:
    """Run up to max_epochs over the train split, keeping the best
    validation checkpoint.

    Per epoch: shuffle dialogue order (seeded), one optimizer step per
    dialogue (dialogues with no loss-contributing utterance are skipped
    entirely), then validation WA/UWA. Stops once `patience` epochs pass
    with no strict improvement of the early-stopping metric. On numeric
    divergence the loop aborts, keeping the best checkpoint seen.

    `loss_row_filter`, if given, additionally restricts which utterances may
    contribute loss (utterance -> bool); used to demonstrate that weight
    zero and outright removal are the same computation.

    The model is left holding the best parameters, which `best_state` also
    carries as plain arrays.
    """
    cfg.validate()
    if "train" not in splits or not splits["train"].dialogues:
        raise ConfigError("train split missing or empty")
    if "validation" not in splits or not splits["validation"].dialogues:
        raise ConfigError("validation split missing or empty")
    train_split, val_split = splits["train"], splits["validation"]

    if weights is None:
        weights = compute_class_weights(label_histogram(train_split), cfg.active_classes)
    named = params.named_tensors()
    adam = AdamState(beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    shuffle_rng = derive_rng(cfg.seed, SHUFFLE)
    dropout_rng = derive_rng(cfg.seed, DROPOUT)

    log: list[dict] = []
    best_epoch: int | None = None
    best_metric = -np.inf
    best_state = _snapshot(named)
    diverged = False

    for epoch in range(cfg.max_epochs):
        t0 = time.monotonic()
        lr = lr_at(epoch, cfg)
        order = shuffle_rng.permutation(len(train_split.dialogues))
        losses = []
        try:
            for di in order:
                d = train_split.dialogues[int(di)]
                state = dialogue_forward(
                    params, d, store, "train", cfg.dropout, dropout_rng, cfg.max_tokens
                )
                probs = ops.softmax(state.logits)
                include = None
                if loss_row_filter is not None:
                    include = [loss_row_filter(u) for u in d.utterances]
                loss = weighted_cross_entropy(
                    probs, [u.gold for u in d.utterances], weights, include
                )
                if loss is None:
                    continue  # nothing to optimize; no step, no moment decay
                loss.backward()
                if params.embedding.tensor.grad is not None:
                    params.embedding.tensor.grad[PAD_ID] = 0.0  # pad row stays zero
                clip_gradients(named, cfg.clip_norm)
                adam_update(named, adam, lr)
                zero_gradients(named)
                losses.append(loss.item())
        except NumericError:
            # abort without evaluating the broken epoch; best checkpoint
            # so far is restored below
            zero_gradients(named)
            diverged = True
            break

        report = evaluate_split(params, val_split, store, cfg.active_classes, cfg.max_tokens)
        record = {
            "epoch": epoch,
            "loss": float(np.mean(losses)) if losses else 0.0,
            "lr": lr,
            "val_wa": report.wa,
            "val_uwa": report.uwa,
            "elapsed_s": time.monotonic() - t0,
        }
        log.append(record)

        metric = report.wa if cfg.early_stop_metric == "wa" else report.uwa
        if metric > best_metric:
            best_metric = metric
            best_epoch = epoch
            best_state = _snapshot(named)
        since_best = epoch - (best_epoch if best_epoch is not None else 0)
        if since_best >= cfg.patience:
            break

    _restore(named, best_state)
    return TrainResult(
        log=log,
        best_epoch=best_epoch,
        best_metric=float(best_metric) if np.isfinite(best_metric) else 0.0,
        best_state=best_state,
        diverged=diverged,
    )
