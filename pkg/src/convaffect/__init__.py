"""Contextual emotion classification for multi-party chat dialogues.

A two-level bidirectional GRU reads each utterance word by word, then reads
the dialogue utterance by utterance, so the label assigned to a message can
depend on what was said before and after it. Ships with its own small
autodiff kernel (numkit), corpus and feature handling, training loop,
evaluation metrics, and a command-line interface.
"""

__version__ = "0.1.0"
