"""One run seed, many independent streams.

Every source of randomness derives its generator from the single run seed
plus a fixed subsystem label, so adding draws to one subsystem never shifts
another's stream.
"""

from __future__ import annotations

import numpy as np

INIT = 0      # weight initialization
OOV = 1       # out-of-vocabulary embedding rows
DROPOUT = 2   # dropout masks
SHUFFLE = 3   # per-epoch dialogue order
SYNTH = 4     # synthetic corpus generation


def derive_rng(seed: int, label: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(label)])
