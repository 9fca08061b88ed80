"""Depth-limited minimax with fail-soft alpha-beta pruning, plus an
exhaustive unpruned oracle.

Frontier nodes (relative depth d_s, or terminal) are scored by the
heuristic; terminals return their true utility. Heuristic noise is
keyed by (search seed, node state) alone, so pruning cannot change the
value any frontier node would report and the pruned and unpruned
searches are exactly comparable. Ties in the root action go to the
lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf
from random import Random
from typing import Sequence

from . import bitmix
from .heuristics import EvalContext, HeuristicSpec, evaluate
from .tree_model import PLUS, GameParams, NodeCursor, check_path, player_at, walk

REFERENCE_CAP = 10**6


@dataclass(frozen=True)
class MinimaxConfig:
    depth: int
    heuristic: HeuristicSpec
    seed: int

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("search depth must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class MinimaxResult:
    value: float
    best_action: int
    frontier_evals: int


def frontier_seed(seed: int, state: int) -> int:
    """Stream seed for one frontier node; a function of (seed, state) only."""
    return bitmix.mix64(bitmix.mix64(seed ^ bitmix.EVAL_TAG) ^ state)


def _frontier_value(cursor: NodeCursor, cfg: MinimaxConfig) -> float:
    if cursor.terminal:
        return 1.0 if cursor.value == PLUS else 0.0
    ctx = EvalContext(cursor.value, cursor.player, cursor.depth, cursor.params)
    return evaluate(cfg.heuristic, ctx, Random(frontier_seed(cfg.seed, cursor.state)))


def _check_root(params: GameParams, path: Sequence[int]) -> NodeCursor:
    check_path(params, path)
    cursor = walk(params, path)
    if cursor.terminal:
        raise ValueError("search root is terminal")
    return cursor


def alphabeta(params: GameParams, path: Sequence[int], cfg: MinimaxConfig) -> MinimaxResult:
    root = _check_root(params, path)
    b = params.branching_factor
    counter = [0]

    def rec(cursor: NodeCursor, remaining: int, alpha: float, beta: float) -> float:
        if cursor.terminal or remaining == 0:
            counter[0] += 1
            return _frontier_value(cursor, cfg)
        if player_at(cursor.depth) == player_at(0):  # Max to move
            best = -inf
            for i in range(b):
                v = rec(cursor.child(i), remaining - 1, alpha, beta)
                if v > best:
                    best = v
                    if best > alpha:
                        alpha = best
                    if alpha >= beta:
                        break
            return best
        best = inf
        for i in range(b):
            v = rec(cursor.child(i), remaining - 1, alpha, beta)
            if v < best:
                best = v
                if best < beta:
                    beta = best
                if alpha >= beta:
                    break
        return best

    maximizing = root.depth % 2 == 0
    best = -inf if maximizing else inf
    best_action = 0
    alpha, beta = -inf, inf
    for i in range(b):
        v = rec(root.child(i), cfg.depth - 1, alpha, beta)
        if (maximizing and v > best) or (not maximizing and v < best):
            best = v
            best_action = i
            if maximizing and best > alpha:
                alpha = best
            if not maximizing and best < beta:
                beta = best
    return MinimaxResult(best, best_action, counter[0])


def minimax_reference(params: GameParams, path: Sequence[int], cfg: MinimaxConfig) -> MinimaxResult:
    root = _check_root(params, path)
    b = params.branching_factor
    if b**cfg.depth > REFERENCE_CAP:
        raise ValueError(f"reference search of {b}^{cfg.depth} frontier nodes exceeds cap")
    counter = [0]

    def rec(cursor: NodeCursor, remaining: int) -> float:
        if cursor.terminal or remaining == 0:
            counter[0] += 1
            return _frontier_value(cursor, cfg)
        values = (rec(cursor.child(i), remaining - 1) for i in range(b))
        if player_at(cursor.depth) == player_at(0):
            return max(values)
        return min(values)

    maximizing = root.depth % 2 == 0
    best = -inf if maximizing else inf
    best_action = 0
    for i in range(b):
        v = rec(root.child(i), cfg.depth - 1)
        if (maximizing and v > best) or (not maximizing and v < best):
            best = v
            best_action = i
    return MinimaxResult(best, best_action, counter[0])
