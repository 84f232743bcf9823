"""Corpus ingestion and text normalization contracts."""

import json

import numpy as np
import pytest

from convaffect.corpus import (
    DEFAULT_ACTIVE,
    LABEL_TO_CODE,
    LABELS,
    NUM_CLASSES,
    PAD_TOKEN,
    UNK_TOKEN,
    label_histogram,
    load_corpus,
    normalize_text,
    pad_or_truncate,
    parse_label,
    parse_split,
    serialize_split,
    split_stats,
)
from convaffect.errors import DataError, LabelError


def payload_of(*dialogues):
    return [
        [
            {"speaker": s, "utterance": t, "emotion": e}
            for s, t, e in dlg
        ]
        for dlg in dialogues
    ]


# --- label taxonomy ----------------------------------------------------------

def test_label_codes_are_frozen():
    assert LABELS == (
        "neutral", "joy", "sadness", "fear", "anger", "surprise", "disgust", "non-neutral",
    )
    assert NUM_CLASSES == 8
    assert LABEL_TO_CODE["neutral"] == 0
    assert LABEL_TO_CODE["non-neutral"] == 7
    assert DEFAULT_ACTIVE == (0, 1, 2, 4)


def test_parse_label_case_insensitive_and_error():
    assert parse_label("Joy", "here") == 1
    assert parse_label("  ANGER ", "here") == 4
    with pytest.raises(LabelError, match="happiness"):
        parse_label("happiness", "here")


# --- normalization -----------------------------------------------------------

def test_normalize_basic_cases():
    assert normalize_text("Good job Joe! Well done!") == [
        "good", "job", "joe", "!", "well", "done", "!",
    ]
    assert normalize_text("") == []
    assert normalize_text("There was no kangaroo!") == [
        "there", "was", "no", "kangaroo", "!",
    ]


def test_normalize_drops_emoticons_keeps_laughter():
    assert normalize_text("great :) really :-( fine") == ["great", "really", "fine"]
    assert normalize_text(":D ;) :P :/ <3") == []
    assert normalize_text("haha lol :)") == ["haha", "lol"]


def test_normalize_punctuation_handling():
    assert normalize_text("don't stop, ok?") == ["dont", "stop", "ok", "?"]
    assert normalize_text("what?!") == ["what", "?", "!"]
    assert normalize_text("...") == []
    assert normalize_text("a-b c_d") == ["ab", "cd"]


def test_normalize_idempotent():
    rng = np.random.default_rng(13)
    alphabet = list("abc !?.,':)(-")
    for _ in range(100):
        raw = "".join(rng.choice(alphabet, size=rng.integers(0, 40)))
        once = normalize_text(raw)
        assert normalize_text(" ".join(once)) == once


# --- pad / truncate -----------------------------------------------------------

def test_pad_or_truncate_padding():
    tokens, n = pad_or_truncate(["a", "b"], max_len=5)
    assert tokens == ["a", "b", PAD_TOKEN, PAD_TOKEN, PAD_TOKEN]
    assert n == 2


def test_pad_or_truncate_keeps_first_tokens():
    tokens, n = pad_or_truncate(["a", "b", "c", "d"], max_len=3)
    assert tokens == ["a", "b", "c"]
    assert n == 3


def test_pad_or_truncate_exact_and_invalid():
    tokens, n = pad_or_truncate(["a", "b"], max_len=2)
    assert (tokens, n) == (["a", "b"], 2)
    with pytest.raises(DataError):
        pad_or_truncate(["a"], max_len=0)


# --- parsing -------------------------------------------------------------------

def test_parse_split_structure_and_ids():
    split = parse_split(
        "train",
        payload_of(
            [("amy", "Hello there!", "joy"), ("bob", "hi", "neutral")],
            [("amy", "bye", "sadness")],
        ),
    )
    assert split.name == "train"
    assert len(split.dialogues) == 2
    assert split.dialogues[0].id == "train:0"
    assert split.dialogues[1].id == "train:1"
    assert split.utterance_count == 3
    first = split.dialogues[0].utterances[0]
    assert first.speaker == "amy"
    assert first.raw_text == "Hello there!"
    assert first.tokens == ("hello", "there", "!")
    assert first.gold == LABEL_TO_CODE["joy"]
    assert first.index_in_dialogue == 0
    assert not first.was_empty


def test_parse_split_empty_utterance_keeps_slot():
    split = parse_split("train", payload_of([("amy", ":)", "joy"), ("bob", "ok", "neutral")]))
    utt = split.dialogues[0].utterances[0]
    assert utt.was_empty
    assert utt.tokens == (UNK_TOKEN,)
    assert len(split.dialogues[0]) == 2


def test_parse_split_errors_name_the_location():
    with pytest.raises(DataError, match="train:0"):
        parse_split("train", [[]])
    with pytest.raises(DataError, match="utterance 1"):
        parse_split("train", payload_of([("a", "x", "joy"), ("b", 3, "joy")]))
    with pytest.raises(DataError, match="speaker"):
        parse_split("train", [[{"utterance": "x", "emotion": "joy"}]])
    with pytest.raises(LabelError, match="train:0"):
        parse_split("train", payload_of([("a", "x", "bliss")]))
    with pytest.raises(DataError):
        parse_split("dev", payload_of([("a", "x", "joy")]))
    with pytest.raises(DataError):
        parse_split("train", {"not": "a list"})


# --- files -----------------------------------------------------------------------

def test_load_corpus_directory_and_single_file(tmp_path):
    data = payload_of([("a", "one", "joy")])
    (tmp_path / "train.json").write_text(json.dumps(data))
    (tmp_path / "validation.json").write_text(json.dumps(data))
    splits = load_corpus(tmp_path)
    assert set(splits) == {"train", "validation"}
    assert splits["validation"].dialogues[0].id == "validation:0"

    single = tmp_path / "test.json"
    single.write_text(json.dumps(data))
    assert set(load_corpus(single)) == {"test"}
    other = tmp_path / "mydata.json"
    other.write_text(json.dumps(data))
    assert set(load_corpus(other)) == {"train"}


def test_load_corpus_errors(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_corpus(tmp_path / "missing.json")
    empty_dir = tmp_path / "nothing"
    empty_dir.mkdir()
    with pytest.raises(DataError):
        load_corpus(empty_dir)
    bad = tmp_path / "train.json"
    bad.write_text("{ not json")
    with pytest.raises(DataError, match="JSON"):
        load_corpus(bad)


def test_serialize_roundtrip():
    payload = payload_of(
        [("amy", "Hello there!", "joy"), ("bob", ":)", "surprise")],
        [("cat", "what?!", "anger")],
    )
    split = parse_split("train", payload)
    again = parse_split("train", serialize_split(split))
    assert again == split


# --- stats -------------------------------------------------------------------------

def test_label_histogram_and_stats():
    split = parse_split(
        "train",
        payload_of(
            [("a", "x", "joy"), ("b", "y", "joy"), ("c", "z", "anger")],
            [("a", "w", "neutral")],
        ),
    )
    hist = label_histogram(split)
    assert hist[LABEL_TO_CODE["joy"]] == 2
    assert hist[LABEL_TO_CODE["anger"]] == 1
    assert hist[LABEL_TO_CODE["neutral"]] == 1
    assert sum(hist) == 4
    stats = split_stats(split)
    assert stats["dialogues"] == 2
    assert stats["utterances"] == 4
    assert stats["histogram"]["joy"] == 2
