"""Dialogue corpus: label taxonomy, data model, ingestion, normalization.

Corpus files are UTF-8 JSON: an array of dialogues, each an array of
{"speaker", "utterance", "emotion"} objects in speaking order. One file per
split. Everything here is immutable after load and safe for concurrent
reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, LabelError

# Label codes are frozen in this order; checkpoints and reports rely on it.
LABELS: tuple[str, ...] = (
    "neutral",
    "joy",
    "sadness",
    "fear",
    "anger",
    "surprise",
    "disgust",
    "non-neutral",
)
LABEL_TO_CODE: dict[str, int] = {name: i for i, name in enumerate(LABELS)}
NUM_CLASSES = len(LABELS)

# The four evaluated emotions; the rest carry zero loss weight by default.
DEFAULT_ACTIVE: tuple[int, ...] = (
    LABEL_TO_CODE["neutral"],
    LABEL_TO_CODE["joy"],
    LABEL_TO_CODE["sadness"],
    LABEL_TO_CODE["anger"],
)

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# Emoticons removed during normalization, matched as whole whitespace-
# delimited tokens after lowercasing. Textual laughter ("lol", "haha") is
# deliberately kept; models still see it.
EMOTICONS = frozenset({":)", ":(", ":-)", ":-(", ":d", ";)", ":p", ":/", "<3"})

_SPLIT_NAMES = ("train", "validation", "test")


@dataclass(frozen=True)
class Utterance:
    speaker: str
    raw_text: str
    tokens: tuple[str, ...]
    gold: int
    index_in_dialogue: int
    was_empty: bool = False


@dataclass(frozen=True)
class Dialogue:
    id: str
    utterances: tuple[Utterance, ...]

    def __len__(self) -> int:
        return len(self.utterances)


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    dialogues: tuple[Dialogue, ...]

    @property
    def utterance_count(self) -> int:
        return sum(len(d) for d in self.dialogues)


def normalize_text(raw: str) -> list[str]:
    """Lowercase, drop emoticons, strip punctuation except ! and ?, split.

    `!` and `?` survive as standalone tokens. All other non-alphanumeric,
    non-whitespace characters are deleted in place (so "don't" becomes
    "dont"). Idempotent: renormalizing the joined output changes nothing.
    """
    words = raw.lower().split()
    kept = " ".join(w for w in words if w not in EMOTICONS)
    chars: list[str] = []
    for ch in kept:
        if ch in "!?":
            chars.append(f" {ch} ")
        elif ch.isalnum() or ch.isspace():
            chars.append(ch)
    return "".join(chars).split()


def pad_or_truncate(tokens: list[str], max_len: int = 50) -> tuple[list[str], int]:
    """Clip to the first max_len tokens or right-pad with the pad token.

    Returns (fixed-length list, valid_len).
    """
    if max_len < 1:
        raise DataError(f"pad_or_truncate: max_len {max_len} < 1")
    if len(tokens) >= max_len:
        return list(tokens[:max_len]), max_len
    return list(tokens) + [PAD_TOKEN] * (max_len - len(tokens)), len(tokens)


def parse_label(name: str, where: str) -> int:
    code = LABEL_TO_CODE.get(str(name).strip().lower())
    if code is None:
        raise LabelError(f"{where}: unknown emotion {name!r} (expected one of {', '.join(LABELS)})")
    return code


def _parse_utterance(obj, dialogue_id: str, index: int) -> Utterance:
    where = f"dialogue {dialogue_id}, utterance {index}"
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected an object, got {type(obj).__name__}")
    for key in ("speaker", "utterance", "emotion"):
        if key not in obj:
            raise DataError(f"{where}: missing field {key!r}")
        if not isinstance(obj[key], str):
            raise DataError(f"{where}: field {key!r} must be a string")
    tokens = normalize_text(obj["utterance"])
    was_empty = not tokens
    if was_empty:
        # keep the slot so dialogue positions (the context) stay aligned
        tokens = [UNK_TOKEN]
    return Utterance(
        speaker=obj["speaker"],
        raw_text=obj["utterance"],
        tokens=tuple(tokens),
        gold=parse_label(obj["emotion"], where),
        index_in_dialogue=index,
        was_empty=was_empty,
    )


def parse_split(name: str, payload) -> DatasetSplit:
    """Build a split from decoded JSON (an array of dialogue arrays)."""
    if name not in _SPLIT_NAMES:
        raise DataError(f"unknown split name {name!r} (expected one of {_SPLIT_NAMES})")
    if not isinstance(payload, list):
        raise DataError(f"split {name}: top level must be an array of dialogues")
    dialogues = []
    for di, items in enumerate(payload):
        did = f"{name}:{di}"
        if not isinstance(items, list) or not items:
            raise DataError(f"dialogue {did}: expected a nonempty array of utterances")
        utts = tuple(_parse_utterance(obj, did, ui) for ui, obj in enumerate(items))
        dialogues.append(Dialogue(id=did, utterances=utts))
    return DatasetSplit(name=name, dialogues=tuple(dialogues))


def load_split(path: str | Path, name: str) -> DatasetSplit:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"corpus file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return parse_split(name, payload)


def load_corpus(path: str | Path) -> dict[str, DatasetSplit]:
    """Load a corpus directory ({train,validation,test}.json, any subset)
    or a single split file (split name taken from the stem, else train)."""
    path = Path(path)
    if path.is_dir():
        splits = {
            name: load_split(path / f"{name}.json", name)
            for name in _SPLIT_NAMES
            if (path / f"{name}.json").is_file()
        }
        if not splits:
            raise DataError(f"{path}: no train.json/validation.json/test.json found")
        return splits
    name = path.stem if path.stem in _SPLIT_NAMES else "train"
    return {name: load_split(path, name)}


def serialize_split(split: DatasetSplit) -> list:
    """Inverse of parse_split up to normalization (raw text is preserved)."""
    return [
        [
            {"speaker": u.speaker, "utterance": u.raw_text, "emotion": LABELS[u.gold]}
            for u in d.utterances
        ]
        for d in split.dialogues
    ]


def label_histogram(split: DatasetSplit) -> list[int]:
    counts = [0] * NUM_CLASSES
    for d in split.dialogues:
        for u in d.utterances:
            counts[u.gold] += 1
    return counts


def split_stats(split: DatasetSplit) -> dict:
    return {
        "dialogues": len(split.dialogues),
        "utterances": split.utterance_count,
        "histogram": dict(zip(LABELS, label_histogram(split))),
    }
