"""One master seed per run, split into independent named streams.

``rng(seed, STREAM)`` is ``np.random.default_rng([seed, STREAM])``: the pair is
hashed by ``SeedSequence`` so streams never overlap, and the mapping is stable
across processes and platforms.
"""

import numpy as np

WEIGHTS = 0  # W_in and A
TRAIN_R0 = 1  # reservoir initial state before training washout
DRIVE_R0 = 2  # reservoir initial state in the prediction phase
AUX_R0 = 3  # auxiliary copy initial state
TRAIN_IC = 4  # ODE initial condition of the training system
DRIVE_IC = 5  # ODE initial condition of the driving system
LYAP = 6  # Lyapunov estimation start point


def rng(seed: int, stream: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(stream), *map(int, extra)])


def seed_sequence(seed: int, stream: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(stream), *map(int, extra)])


def child(seed: int, *keys: int) -> int:
    """A 32-bit seed derived from ``seed`` and ``keys``, for sub-models of one run."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])
