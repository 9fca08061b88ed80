"""UCT search over the synthetic game trees.

Selection walks the tracked tree by UCB1 with a negamax value term
(Min reads 1 - Q̄), unvisited children have infinite priority, and each
iteration grows the tree by one node unless it ends on a terminal,
which is re-evaluated in place. Rewards live in [0, 1] from Max's
perspective and are backed up as running means.

Determinism: all randomness is derived from the config seed through
three separate streams, one sequential stream for selection tie-breaks,
one keyed per node state for heuristic noise, and one keyed per
checkpoint for decision tie-breaks. Keying decisions by checkpoint
iteration makes a checkpointed run agree with independent shorter runs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from random import Random
from typing import Iterator, NamedTuple, TextIO

from . import bitmix
from .heuristics import EvalContext, HeuristicSpec, evaluate
from .tree_model import PLUS, GameParams, NodeCursor, Player, player_at


@dataclass(frozen=True)
class UctConfig:
    exploration: float
    budget: int
    heuristic: HeuristicSpec
    seed: int
    checkpoints: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.exploration < 0:
            raise ValueError("exploration constant must be >= 0")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        cps = tuple(self.checkpoints) or (self.budget,)
        if list(cps) != sorted(set(cps)):
            raise ValueError("checkpoints must be strictly ascending")
        if cps[0] < 1 or cps[-1] > self.budget:
            raise ValueError("checkpoints must lie in [1, budget]")
        object.__setattr__(self, "checkpoints", cps)


class _Node:
    __slots__ = ("state", "depth", "value", "terminal", "n", "q", "children")

    def __init__(self, state: int, depth: int, value: int, terminal: bool) -> None:
        self.state = state
        self.depth = depth
        self.value = value
        self.terminal = terminal
        self.n = 0
        self.q = 0.0
        self.children: list["_Node | None"] | None = None


class SearchTree:
    """Tracked nodes of one completed search, addressable by path."""

    def __init__(self, params: GameParams, root: _Node, node_count: int) -> None:
        self.params = params
        self.root = root
        self.node_count = node_count

    def nodes(self) -> Iterator[tuple[tuple[int, ...], _Node]]:
        stack: list[tuple[tuple[int, ...], _Node]] = [((), self.root)]
        while stack:
            path, node = stack.pop()
            yield path, node
            if node.children:
                for i, child in enumerate(node.children):
                    if child is not None:
                        stack.append((path + (i,), child))

    def records(self) -> dict[tuple[int, ...], tuple[int, float]]:
        return {path: (node.n, node.q) for path, node in self.nodes()}

    def depth_histogram(self) -> list[int]:
        counts: list[int] = []
        for path, _ in self.nodes():
            depth = len(path)
            while len(counts) <= depth:
                counts.append(0)
            counts[depth] += 1
        return counts


class BreadthFirstReport(NamedTuple):
    holds: bool
    max_sibling_gap: int


def breadth_first_check(tree: SearchTree) -> BreadthFirstReport:
    """Largest max-min spread of sibling visit counts over expanded nodes."""
    worst = 0
    for _, node in tree.nodes():
        kids = node.children
        if not kids or all(child is None for child in kids):
            continue
        visits = [0 if child is None else child.n for child in kids]
        worst = max(worst, max(visits) - min(visits))
    return BreadthFirstReport(worst <= 1, worst)


def check_conservation(tree: SearchTree) -> bool:
    """n(s) = 1 + sum of child visits, for every expanded node."""
    for _, node in tree.nodes():
        kids = node.children
        if not kids:
            continue
        total = sum(child.n for child in kids if child is not None)
        if any(child is not None for child in kids) and node.n != 1 + total:
            return False
    return True


@dataclass(frozen=True)
class CheckpointRecord:
    iteration: int
    action: int
    visits: tuple[int, ...]
    means: tuple[float, ...]


@dataclass(frozen=True)
class SearchResult:
    checkpoints: tuple[CheckpointRecord, ...]
    node_count: int
    depth_histogram: tuple[int, ...]
    breadth_first: BreadthFirstReport
    tree: SearchTree

    @property
    def final_action(self) -> int:
        return self.checkpoints[-1].action

    def action_at(self, iteration: int) -> int:
        for record in self.checkpoints:
            if record.iteration == iteration:
                return record.action
        raise KeyError(f"no checkpoint at iteration {iteration}")

    def to_json(self) -> str:
        payload = {
            "checkpoints": [
                {
                    "iteration": r.iteration,
                    "action": r.action,
                    "visits": list(r.visits),
                    "means": [round(q, 12) for q in r.means],
                }
                for r in self.checkpoints
            ],
            "node_count": self.node_count,
            "depth_histogram": list(self.depth_histogram),
            "breadth_first": {
                "holds": self.breadth_first.holds,
                "max_sibling_gap": self.breadth_first.max_sibling_gap,
            },
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def ucb_score(q_child: float, n_child: int, n_parent: int, c: float, perspective: Player) -> float:
    """UCB1 with the negamax value term; unvisited children rank first."""
    if n_child == 0:
        return math.inf
    value = q_child if perspective == Player.MAX else 1.0 - q_child
    return value + c * math.sqrt(math.log(n_parent) / n_child)


def _decide(root: _Node, b: int, rng: Random) -> tuple[int, tuple[int, ...], tuple[float, ...]]:
    kids = root.children
    visits = tuple(0 if (not kids or kids[i] is None) else kids[i].n for i in range(b))
    means = tuple(0.0 if (not kids or kids[i] is None) else kids[i].q for i in range(b))
    tracked = [i for i in range(b) if visits[i] > 0]
    if not tracked:
        return rng.randrange(b), visits, means
    best = max(means[i] for i in tracked)
    ties = [i for i in tracked if means[i] == best]
    action = ties[0] if len(ties) == 1 else ties[rng.randrange(len(ties))]
    return action, visits, means


def uct_search(params: GameParams, cfg: UctConfig, trace: TextIO | None = None) -> SearchResult:
    b = params.branching_factor
    c = cfg.exploration
    heuristic = cfg.heuristic
    log, sqrt = math.log, math.sqrt

    select_rng = Random(bitmix.mix64(cfg.seed ^ bitmix.SELECT_TAG))
    eval_base = bitmix.mix64(cfg.seed ^ bitmix.EVAL_TAG)
    decide_base = bitmix.mix64(cfg.seed ^ bitmix.DECIDE_TAG)

    root_cursor = NodeCursor.root(params)
    root = _Node(root_cursor.state, 0, root_cursor.value, root_cursor.terminal)
    node_count = 1

    def reward_for(node: _Node) -> float:
        if node.terminal:
            return 1.0 if node.value == PLUS else 0.0
        ctx = EvalContext(node.value, player_at(node.depth), node.depth, params)
        rng = Random(bitmix.mix64(eval_base ^ node.state))
        return evaluate(heuristic, ctx, rng)

    if trace is not None:
        trace.write("iteration,path,reward\n")

    records: list[CheckpointRecord] = []
    pending = list(cfg.checkpoints)

    # iteration 1: the root itself is created and evaluated
    r = reward_for(root)
    root.n = 1
    root.q = r
    if trace is not None:
        trace.write(f"1,r,{r:.6f}\n")
    if pending and pending[0] == 1:
        pending.pop(0)
        action, visits, means = _decide(root, b, Random(bitmix.indexed_u64(decide_base, bitmix.DECIDE_TAG, 1)))
        records.append(CheckpointRecord(1, action, visits, means))

    for it in range(2, cfg.budget + 1):
        node = root
        path = [root]
        steps: list[int] = []
        while True:
            if node.terminal:
                r = 1.0 if node.value == PLUS else 0.0
                break
            kids = node.children
            if kids is None:
                kids = node.children = [None] * b
            free = [i for i in range(b) if kids[i] is None]
            if free:
                idx = free[0] if len(free) == 1 else free[select_rng.randrange(len(free))]
                cursor = NodeCursor(params, node.depth, node.value, node.state)
                value = cursor.child_value(idx)
                depth = node.depth + 1
                child = _Node(
                    bitmix.child_state(node.state, idx), depth, value, depth >= params.max_depth
                )
                kids[idx] = child
                node_count += 1
                path.append(child)
                if trace is not None:
                    steps.append(idx)
                r = reward_for(child)
                break
            log_n = log(node.n)
            best = None
            best_score = -math.inf
            ties = 1
            if node.depth % 2 == 0:
                for i in range(b):
                    ch = kids[i]
                    s = ch.q + c * sqrt(log_n / ch.n)
                    if s > best_score:
                        best_score, best, ties = s, ch, 1
                    elif s == best_score:
                        ties += 1
                        if select_rng.random() * ties < 1.0:
                            best = ch
            else:
                for i in range(b):
                    ch = kids[i]
                    s = 1.0 - ch.q + c * sqrt(log_n / ch.n)
                    if s > best_score:
                        best_score, best, ties = s, ch, 1
                    elif s == best_score:
                        ties += 1
                        if select_rng.random() * ties < 1.0:
                            best = ch
            node = best
            path.append(node)
            if trace is not None:
                steps.append(kids.index(node))
        for nd in path:
            nd.n += 1
            nd.q += (r - nd.q) / nd.n
        if trace is not None:
            label = "/".join(map(str, steps)) if steps else "r"
            trace.write(f"{it},{label},{r:.6f}\n")
        if pending and pending[0] == it:
            pending.pop(0)
            rng = Random(bitmix.indexed_u64(decide_base, bitmix.DECIDE_TAG, it))
            action, visits, means = _decide(root, b, rng)
            records.append(CheckpointRecord(it, action, visits, means))

    tree = SearchTree(params, root, node_count)
    return SearchResult(
        checkpoints=tuple(records),
        node_count=node_count,
        depth_histogram=tuple(tree.depth_histogram()),
        breadth_first=breadth_first_check(tree),
        tree=tree,
    )
