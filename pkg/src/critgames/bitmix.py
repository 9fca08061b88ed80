"""Deterministic 64-bit mixing behind all procedural randomness.

Every random decision in the generative models is a pure function of
(seed, path, stream tag), realized with a splitmix64-style finalizer.
The scalar and numpy implementations are kept in lockstep and are
cross-checked bit for bit by the test suite.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

GOLDEN = 0x9E3779B97F4A7C15  # 2^64 / golden ratio, odd
_MULT_A = 0xBF58476D1CE4E5B9
_MULT_B = 0x94D049BB133111EB

# Stream tags, xor'd into a node state to open independent substreams.
DESIGNATED_TAG = 0x2545F4914F6CDD1D
FLIP_TAG = 0xFF51AFD7ED558CCD
COST_TAG = 0xD6E8FEB86659FD93
EVAL_TAG = 0xC4CEB9FE1A85EC53
SELECT_TAG = 0x9FB21C651E98DF25
DECIDE_TAG = 0xE7037ED1A0B428DB

_INV53 = 2.0**-53


def mix64(x: int) -> int:
    """splitmix64 finalizer; a bijection on [0, 2^64)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * _MULT_A) & MASK64
    x = ((x ^ (x >> 27)) * _MULT_B) & MASK64
    return x ^ (x >> 31)


def unit(h: int) -> float:
    """Map a 64-bit word to a double in [0, 1)."""
    return (h >> 11) * _INV53


def root_state(seed: int) -> int:
    return mix64(seed ^ GOLDEN)


def child_state(state: int, index: int) -> int:
    # index offset by 1 so child streams never reuse the node's own state
    return mix64(state ^ (((index + 1) * GOLDEN) & MASK64))


def stream_u64(state: int, tag: int) -> int:
    return mix64(state ^ tag)


def indexed_u64(state: int, tag: int, index: int) -> int:
    return mix64(state ^ tag ^ (((index + 1) * _MULT_B) & MASK64))


# numpy twins; arguments and results are uint64 arrays

_NP_MULT_A = np.uint64(_MULT_A)
_NP_MULT_B = np.uint64(_MULT_B)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def mix64_np(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    x ^= x >> _S30
    x *= _NP_MULT_A
    x ^= x >> _S27
    x *= _NP_MULT_B
    x ^= x >> _S31
    return x


def unit_np(h: np.ndarray) -> np.ndarray:
    return (h >> _S11).astype(np.float64) * _INV53


def root_state_np(seeds: np.ndarray) -> np.ndarray:
    return mix64_np(seeds.astype(np.uint64) ^ np.uint64(GOLDEN))


def child_state_np(states: np.ndarray, index: int) -> np.ndarray:
    step = np.uint64(((index + 1) * GOLDEN) & MASK64)
    return mix64_np(states ^ step)


def stream_u64_np(states: np.ndarray, tag: int) -> np.ndarray:
    return mix64_np(states ^ np.uint64(tag))


def indexed_u64_np(states: np.ndarray, tag: int, index: int) -> np.ndarray:
    word = np.uint64(tag ^ (((index + 1) * _MULT_B) & MASK64))
    return mix64_np(states ^ word)
