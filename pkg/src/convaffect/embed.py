"""Vocabulary, word vectors, precomputed feature stores, and input fusion.

Two feature channels ride alongside the trainable word embeddings: a
per-token contextual vector (1024-d by default) concatenated at the word
level, and a per-utterance affect vector (2304-d by default) concatenated
onto the utterance encoding. Both are produced offline by external
extractors; this module only ingests them. Missing entries fall back to
zeros so the pipeline runs end to end without any feature files (degraded
mode, logged once per store).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import PAD_TOKEN, UNK_TOKEN, DatasetSplit, Utterance, pad_or_truncate
from .errors import ConfigError, DataError, DimensionError
from .numkit import Tensor, ops

log = logging.getLogger("convaffect")

PAD_ID = 0
UNK_ID = 1

WORD_VECTOR_DIM = 300
WORD_FEATURE_DIM = 1024
UTTERANCE_FEATURE_DIM = 2304


@dataclass(frozen=True)
class Vocabulary:
    """Dense token→index map with pad and unk pinned at 0 and 1."""

    tokens: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Vocabulary":
        ordered = (PAD_TOKEN, UNK_TOKEN, *tokens)
        return cls(tokens=ordered, index={t: i for i, t in enumerate(ordered)})

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode(self, tokens) -> np.ndarray:
        return np.array([self.id_of(t) for t in tokens], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.tokens)


def build_vocab(train: DatasetSplit) -> Vocabulary:
    """Vocabulary over the train split only; sorted insertion keeps ids
    stable across runs. Validation/test tokens outside it map to unk."""
    if not train.dialogues:
        raise ConfigError("build_vocab: empty train split")
    seen: set[str] = set()
    for d in train.dialogues:
        for u in d.utterances:
            seen.update(u.tokens)
    seen.discard(PAD_TOKEN)
    seen.discard(UNK_TOKEN)
    return Vocabulary.from_tokens(sorted(seen))


@dataclass
class WordEmbeddingTable:
    """Trainable V×dim table. Row 0 (pad) is all-zeros and stays that way;
    training masks its gradient."""

    vocab: Vocabulary
    tensor: Tensor
    dim: int
    coverage: float

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data


def _parse_vector_line(line: str, lineno: int, dim: int, path) -> tuple[str, np.ndarray]:
    parts = line.split()
    if len(parts) != dim + 1:
        raise DataError(
            f"{path}:{lineno}: expected a token and {dim} values, got {len(parts)} fields"
        )
    try:
        vec = np.array([float(p) for p in parts[1:]])
    except ValueError as exc:
        raise DataError(f"{path}:{lineno}: non-numeric value ({exc})") from exc
    return parts[0], vec


def load_word_vectors(
    path: str | Path | None,
    vocab: Vocabulary,
    dim: int = WORD_VECTOR_DIM,
    seed: int = 0,
    trainable: bool = True,
) -> WordEmbeddingTable:
    """Fill a table from a textual word-vector file (token + dim reals per
    line). Uncovered tokens draw from uniform(-0.05, 0.05) on the run
    seed's OOV stream in vocabulary order; the pad row is zero. path=None
    means no pretrained file (coverage 0)."""
    from .seeding import OOV, derive_rng

    pretrained: dict[str, np.ndarray] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise DataError(f"word-vector file not found: {path}")
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                token, vec = _parse_vector_line(line, lineno, dim, path)
                if token in vocab.index and token not in (PAD_TOKEN, UNK_TOKEN):
                    pretrained[token] = vec

    rng = derive_rng(seed, OOV)
    table = np.zeros((len(vocab), dim))
    covered = 0
    for i, token in enumerate(vocab.tokens):
        if i == PAD_ID:
            continue
        vec = pretrained.get(token)
        if vec is not None:
            table[i] = vec
            covered += 1
        else:
            table[i] = rng.uniform(-0.05, 0.05, size=dim)
    real = len(vocab) - 2  # reserved rows don't count toward coverage
    coverage = covered / real if real else 0.0
    return WordEmbeddingTable(
        vocab=vocab,
        tensor=Tensor(table, requires_grad=trainable),
        dim=dim,
        coverage=coverage,
    )


class FeatureStore:
    """Precomputed contextual features keyed by dialogue id and utterance
    index (plus token index for the word channel). Loaded from JSON-lines;
    an empty store serves zeros (degraded mode)."""

    def __init__(self, word_dim: int = WORD_FEATURE_DIM, utt_dim: int = UTTERANCE_FEATURE_DIM):
        self.word_dim = word_dim
        self.utt_dim = utt_dim
        self._word: dict[tuple[str, int, int], np.ndarray] = {}
        self._utt: dict[tuple[str, int], np.ndarray] = {}
        self._warned = False

    @classmethod
    def load(cls, path: str | Path, word_dim: int = WORD_FEATURE_DIM,
             utt_dim: int = UTTERANCE_FEATURE_DIM) -> "FeatureStore":
        store = cls(word_dim=word_dim, utt_dim=utt_dim)
        path = Path(path)
        if not path.is_file():
            raise DataError(f"feature file not found: {path}")
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
                store._ingest(rec, f"{path}:{lineno}")
        return store

    def _ingest(self, rec: dict, where: str) -> None:
        try:
            kind = rec["kind"]
            did = rec["dialogue"]
            ui = int(rec["utterance"])
            vec = np.array(rec["vector"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{where}: malformed feature record ({exc})") from exc
        if kind == "word":
            if "token" not in rec:
                raise DataError(f"{where}: word feature record missing 'token'")
            if vec.shape != (self.word_dim,):
                raise DimensionError(
                    f"{where}: word feature has {vec.shape[0]} dims, expected {self.word_dim}"
                )
            self._word[(did, ui, int(rec["token"]))] = vec
        elif kind == "utterance":
            if vec.shape != (self.utt_dim,):
                raise DimensionError(
                    f"{where}: utterance feature has {vec.shape[0]} dims, expected {self.utt_dim}"
                )
            self._utt[(did, ui)] = vec
        else:
            raise DataError(f"{where}: unknown feature kind {kind!r}")

    @property
    def empty(self) -> bool:
        return not self._word and not self._utt

    def _note_degraded(self, what: str) -> None:
        if not self._warned:
            log.warning("feature store has no %s entries; using zeros (degraded mode)", what)
            self._warned = True

    def word_matrix(self, dialogue_id: str, utt_index: int, n_rows: int) -> np.ndarray:
        """Per-token features for one utterance as [n_rows, word_dim];
        rows without an entry are zero."""
        M = np.zeros((n_rows, self.word_dim))
        hit = False
        for t in range(n_rows):
            vec = self._word.get((dialogue_id, utt_index, t))
            if vec is not None:
                M[t] = vec
                hit = True
        if not hit:
            self._note_degraded("word")
        return M

    def utterance_vector(self, dialogue_id: str, utt_index: int) -> np.ndarray:
        vec = self._utt.get((dialogue_id, utt_index))
        if vec is None:
            self._note_degraded("utterance")
            return np.zeros(self.utt_dim)
        return vec


def fuse_word_inputs(
    utt: Utterance,
    table: WordEmbeddingTable,
    store: FeatureStore,
    dialogue_id: str,
    max_len: int = 50,
) -> tuple[Tensor, int]:
    """Fused per-token inputs for one utterance.

    Row t concatenates the trainable embedding of token t with its
    precomputed contextual vector; pad rows are all-zero by construction
    (zero pad embedding, zero features). Returns the [max_len,
    dim + word_dim] tensor and the utterance's valid length.
    """
    tokens, valid_len = pad_or_truncate(list(utt.tokens), max_len)
    ids = table.vocab.encode(tokens)
    emb = ops.select_rows(table.tensor, ids)
    feats = store.word_matrix(dialogue_id, utt.index_in_dialogue, max_len)
    # features beyond valid_len would break masking invariance; drop them
    feats[valid_len:] = 0.0
    return ops.concat_cols(emb, Tensor(feats)), valid_len


def fuse_utterance_inputs(encoding: Tensor, utt_feature: np.ndarray) -> Tensor:
    """Concatenate an utterance encoding with its precomputed affect
    vector, giving the dialogue-level input."""
    if encoding.data.ndim != 1:
        raise DimensionError(
            f"fuse_utterance_inputs: encoding must be a vector, got shape {encoding.data.shape}"
        )
    utt_feature = np.asarray(utt_feature, dtype=np.float64)
    if utt_feature.ndim != 1:
        raise DimensionError(
            f"fuse_utterance_inputs: feature must be a vector, got shape {utt_feature.shape}"
        )
    return ops.concat_vec([encoding, Tensor(utt_feature)])
