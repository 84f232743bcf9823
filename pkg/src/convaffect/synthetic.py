"""Synthetic dialogue generator with class cues and context echoes.

Each of the four active emotions owns a disjoint cue token, and every
generated utterance contains exactly one cue — except one "echo" utterance
per dialogue, which contains only filler and carries the label of the
utterance before it. A per-utterance classifier cannot get echoes right;
a model that reads dialogue context can, which is exactly what the
training gates here are meant to exercise.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .corpus import DEFAULT_ACTIVE, LABELS, DatasetSplit, parse_split
from .seeding import SYNTH, derive_rng

CUES: dict[int, str] = {
    DEFAULT_ACTIVE[0]: "okay",    # neutral
    DEFAULT_ACTIVE[1]: "woohoo",  # joy
    DEFAULT_ACTIVE[2]: "sniff",   # sadness
    DEFAULT_ACTIVE[3]: "argh",    # anger
}

FILLERS = (
    "the", "a", "so", "well", "and", "then", "um", "right", "you", "know",
    "that", "it", "was", "really", "just", "kind", "of", "maybe", "i", "we",
)

# marks an echo utterance; says nothing about WHICH class it echoes
ECHO_MARKER = "likewise"

_SPEAKERS = ("ann", "ben")


def _cued_utterance(label: int, rng: np.random.Generator) -> str:
    words = list(rng.choice(FILLERS, size=rng.integers(2, 5)))
    words.insert(int(rng.integers(0, len(words) + 1)), CUES[label])
    return " ".join(words)


def _echo_utterance(rng: np.random.Generator) -> str:
    # deliberately constant: an echo's text carries no class signal at all,
    # so its label is learnable from dialogue context only
    return ECHO_MARKER


def generate_payload(
    n_dialogues: int, n_utterances: int, rng: np.random.Generator, n_echoes: int = 1
) -> list:
    """Corpus-file-shaped data: a list of dialogues, each a list of
    {"speaker", "utterance", "emotion"} records.

    n_echoes utterances per dialogue are echoes (capped at n_utterances-1;
    position 0 always carries a cue). Labels resolve left to right, so an
    echo following an echo inherits transitively.
    """
    dialogues = []
    for _ in range(n_dialogues):
        labels = [int(rng.choice(DEFAULT_ACTIVE)) for _ in range(n_utterances)]
        k = min(n_echoes, n_utterances - 1)
        echo_at = set(
            int(i) for i in rng.choice(np.arange(1, n_utterances), size=k, replace=False)
        )
        for i in sorted(echo_at):
            labels[i] = labels[i - 1]
        utts = []
        for i, label in enumerate(labels):
            text = _echo_utterance(rng) if i in echo_at else _cued_utterance(label, rng)
            utts.append(
                {
                    "speaker": _SPEAKERS[i % len(_SPEAKERS)],
                    "utterance": text,
                    "emotion": LABELS[label],
                }
            )
        dialogues.append(utts)
    return dialogues


def generate_corpus(
    seed: int, n_train: int = 20, n_val: int = 5, n_utterances: int = 5
) -> dict[str, DatasetSplit]:
    """Train and validation splits from one seeded stream."""
    rng = derive_rng(seed, SYNTH)
    return {
        "train": parse_split("train", generate_payload(n_train, n_utterances, rng)),
        "validation": parse_split("validation", generate_payload(n_val, n_utterances, rng)),
    }


def write_corpus_files(
    directory: str | Path, seed: int, n_train: int = 20, n_val: int = 5, n_utterances: int = 5
) -> dict[str, Path]:
    """Materialize the synthetic corpus as split files for CLI runs."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = derive_rng(seed, SYNTH)
    paths = {}
    for name, count in (("train", n_train), ("validation", n_val)):
        payload = generate_payload(count, n_utterances, rng)
        p = directory / f"{name}.json"
        p.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")
        paths[name] = p
    return paths


def context_pair(seed: int, n_utterances: int = 5) -> tuple[DatasetSplit, int]:
    """Two dialogues identical except for the utterance preceding the echo;
    returns them as a split plus the echo's index.

    The echo utterance is shared verbatim between the two dialogues, so any
    difference in its prediction can only come from dialogue context.
    """
    rng = derive_rng(seed, SYNTH)
    base = generate_payload(1, n_utterances, rng)[0]
    echo_at = next(
        i for i, u in enumerate(base) if all(c not in u["utterance"].split() for c in CUES.values())
    )
    variant = [dict(u) for u in base]
    old_label = next(c for c, name in enumerate(LABELS) if name == base[echo_at - 1]["emotion"])
    new_label = next(c for c in DEFAULT_ACTIVE if c != old_label)
    variant[echo_at - 1] = {
        "speaker": base[echo_at - 1]["speaker"],
        "utterance": _cued_utterance(new_label, rng),
        "emotion": LABELS[new_label],
    }
    variant[echo_at] = dict(variant[echo_at], emotion=LABELS[new_label])
    return parse_split("test", [base, variant]), echo_at
