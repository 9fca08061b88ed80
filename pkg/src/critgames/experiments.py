"""Grid sweeps measuring decision accuracy against search effort.

A grid cell fixes (gamma, b, exploration, heuristic); each of its M
trees gets seeds derived from (master seed, cell identity, tree index),
so results do not depend on execution order and a cell's trees are
stable under changes to the budget list or M. Accuracy delta_j is the
fraction of trees whose decision at budget j keeps the root's winning
value; the pathology index P_j = delta_j / delta_baseline flags cells
where extra effort hurt (P < 1). For the UCT algorithm budgets are
iteration checkpoints of one search; for alpha-beta they are search
depths.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from hashlib import blake2b
from itertools import product
from pathlib import Path
from random import Random
from typing import Callable, Iterable, Sequence

from . import bitmix
from .heuristics import parse_heuristic
from .search_minimax import MinimaxConfig, alphabeta
from .search_uct import UctConfig, uct_search
from .tree_model import GameParams, node_meta

_TREE_TAG = 0xB5297A4D3F84D5A9
_SEARCH_TAG = 0x68E31DA4DBB3C2B1

ALGORITHMS = ("uct", "alphabeta")

CSV_HEADER = "gamma,b,c,heuristic,algo,budget,delta,se,pathology_index"

#: decider(params, budgets, tree_seed, search_seed) -> {budget: action}
Decider = Callable[[GameParams, Sequence[int], int, int], dict[int, int]]


@dataclass(frozen=True)
class GridSpec:
    gammas: tuple[float, ...] = (0.9, 1.0)
    branchings: tuple[int, ...] = (2, 5, 10)
    explorations: tuple[float, ...] = (0.1, 0.5, 1.0, 2.0, 5.0)
    heuristics: tuple[str, ...] = ("histogram:chess_p10_light",)
    budgets: tuple[int, ...] = (10, 100, 1000, 10_000)
    max_depth: int = 50
    trees: int = 500
    master_seed: int = 0
    algorithm: str = "uct"

    def __post_init__(self) -> None:
        for name in ("gammas", "branchings", "explorations", "heuristics", "budgets"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.gammas or not self.branchings or not self.explorations:
            raise ValueError("gamma, b, and c lists must be non-empty")
        if not self.heuristics:
            raise ValueError("at least one heuristic required")
        if not self.budgets:
            raise ValueError("budget list must be non-empty")
        if list(self.budgets) != sorted(set(self.budgets)):
            raise ValueError("budgets must be strictly ascending")
        if any(j < 1 for j in self.budgets):
            raise ValueError("budgets must be >= 1")
        if self.trees < 1:
            raise ValueError("trees per cell must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master seed must fit in 64 bits")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        for text in self.heuristics:
            parse_heuristic(text)  # fail fast on typos


@dataclass(frozen=True)
class Cell:
    gamma: float
    branching: int
    exploration: float
    heuristic: str
    budgets: tuple[int, ...]
    max_depth: int
    trees: int
    algorithm: str


def cells(spec: GridSpec) -> list[Cell]:
    return [
        Cell(g, b, c, h, spec.budgets, spec.max_depth, spec.trees, spec.algorithm)
        for g, b, c, h in product(
            spec.gammas, spec.branchings, spec.explorations, spec.heuristics
        )
    ]


def cell_key(cell: Cell) -> int:
    """64-bit cell identity; budgets and M excluded so trees stay
    comparable when the budget list is truncated or M grows."""
    text = (
        f"{cell.gamma!r}|{cell.branching}|{cell.exploration!r}"
        f"|{cell.heuristic}|{cell.algorithm}|{cell.max_depth}"
    )
    return int.from_bytes(blake2b(text.encode(), digest_size=8).digest(), "big")


def tree_seeds(cell: Cell, master_seed: int, index: int) -> tuple[int, int]:
    base = bitmix.mix64(master_seed ^ cell_key(cell))
    return (
        bitmix.indexed_u64(base, _TREE_TAG, index),
        bitmix.indexed_u64(base, _SEARCH_TAG, index),
    )


def _decisions(cell: Cell, params: GameParams, search_seed: int) -> dict[int, int]:
    heuristic = parse_heuristic(cell.heuristic)
    if cell.algorithm == "uct":
        cfg = UctConfig(
            cell.exploration,
            cell.budgets[-1],
            heuristic,
            search_seed,
            checkpoints=cell.budgets,
        )
        result = uct_search(params, cfg)
        return {r.iteration: r.action for r in result.checkpoints}
    out = {}
    for depth in cell.budgets:
        res = alphabeta(params, (), MinimaxConfig(depth, heuristic, search_seed))
        out[depth] = res.best_action
    return out


def run_cell(
    cell: Cell,
    master_seed: int,
    tree_range: range | None = None,
    decider: Decider | None = None,
) -> list[dict[int, bool]]:
    """Per-tree correctness records: one {budget: correct} dict per tree."""
    records = []
    for t in tree_range if tree_range is not None else range(cell.trees):
        tree_seed, search_seed = tree_seeds(cell, master_seed, t)
        params = GameParams(cell.branching, cell.gamma, cell.max_depth, tree_seed)
        optimal = node_meta(params, ()).optimal_moves
        if decider is None:
            actions = _decisions(cell, params, search_seed)
        else:
            actions = decider(params, cell.budgets, tree_seed, search_seed)
        records.append({j: actions[j] in optimal for j in cell.budgets})
    return records


def fair_coin_decider(
    params: GameParams, budgets: Sequence[int], tree_seed: int, search_seed: int
) -> dict[int, int]:
    """Uniform random action per budget; wiring check for the statistics."""
    rng = Random(search_seed)
    return {j: rng.randrange(params.branching_factor) for j in budgets}


@dataclass(frozen=True)
class CellReport:
    cell: Cell
    deltas: tuple[float, ...]
    standard_errors: tuple[float, ...]
    pathology: tuple[float, ...]
    trees: int
    wall_time: float

    @property
    def baseline_defined(self) -> bool:
        return not math.isnan(self.pathology[0])


def pathology_report(cell: Cell, records: list[dict[int, bool]], wall_time: float = 0.0) -> CellReport:
    m = len(records)
    deltas = []
    ses = []
    for j in cell.budgets:
        delta = sum(rec[j] for rec in records) / m
        deltas.append(delta)
        ses.append(math.sqrt(delta * (1.0 - delta) / m))
    base = deltas[0]
    if base > 0:
        pathology = tuple(d / base for d in deltas)
    else:
        pathology = tuple(math.nan for _ in deltas)
    return CellReport(cell, tuple(deltas), tuple(ses), pathology, m, wall_time)


def _run_slice(spec: GridSpec, cell_index: int, start: int, stop: int) -> list[dict[int, bool]]:
    cell = cells(spec)[cell_index]
    return run_cell(cell, spec.master_seed, tree_range=range(start, stop))


def run_grid(
    spec: GridSpec, workers: int = 1, decider: Decider | None = None
) -> list[CellReport]:
    """All cells of the grid; workers > 1 fans (cell, tree-slice) tasks
    over a process pool with an order-independent reduction."""
    grid = cells(spec)
    if workers <= 1 or decider is not None:
        reports = []
        for cell in grid:
            t0 = time.perf_counter()
            records = run_cell(cell, spec.master_seed, decider=decider)
            reports.append(pathology_report(cell, records, time.perf_counter() - t0))
        return reports

    chunk = max(1, math.ceil(spec.trees / (2 * workers)))
    slices = [
        (ci, start, min(start + chunk, spec.trees))
        for ci in range(len(grid))
        for start in range(0, spec.trees, chunk)
    ]
    t0 = time.perf_counter()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_slice, spec, ci, a, b) for ci, a, b in slices]
        parts: dict[int, list[tuple[int, list[dict[int, bool]]]]] = {}
        for (ci, a, _), fut in zip(slices, futures):
            parts.setdefault(ci, []).append((a, fut.result()))
    elapsed = time.perf_counter() - t0
    reports = []
    for ci, cell in enumerate(grid):
        records = [rec for _, batch in sorted(parts[ci]) for rec in batch]
        reports.append(pathology_report(cell, records, elapsed / len(grid)))
    return reports


def theorem_c_bound(iterations: int) -> float:
    """Exploration constant forcing breadth-first behavior at budget N."""
    if iterations < 2:
        raise ValueError("bound needs at least 2 iterations")
    return math.sqrt(iterations**3 / (2.0 * math.log(iterations)))


@dataclass(frozen=True)
class TheoremReport:
    branching: int
    exploration: float
    iterations: int
    breadth_first_fraction: float
    accuracy: float
    standard_error: float


def run_theorem_experiment(
    iterations: int = 512,
    branchings: Sequence[int] = (2, 3),
    trees: int = 500,
    max_depth: int = 50,
    master_seed: int = 0,
) -> list[TheoremReport]:
    c = theorem_c_bound(iterations)
    heuristic = parse_heuristic("perfect")
    reports = []
    for b in branchings:
        cell = Cell(1.0, b, c, "perfect", (iterations,), max_depth, trees, "uct")
        uniform = 0
        correct = 0
        for t in range(trees):
            tree_seed, search_seed = tree_seeds(cell, master_seed, t)
            params = GameParams(b, 1.0, max_depth, tree_seed)
            cfg = UctConfig(c, iterations, heuristic, search_seed)
            result = uct_search(params, cfg)
            uniform += result.breadth_first.holds
            correct += result.final_action in node_meta(params, ()).optimal_moves
        accuracy = correct / trees
        reports.append(
            TheoremReport(
                b,
                c,
                iterations,
                uniform / trees,
                accuracy,
                math.sqrt(accuracy * (1.0 - accuracy) / trees),
            )
        )
    return reports


def csv_lines(reports: Iterable[CellReport]) -> list[str]:
    lines = [CSV_HEADER]
    for report in reports:
        cell = report.cell
        label = parse_heuristic(cell.heuristic).label
        for budget, delta, se, p in zip(
            cell.budgets, report.deltas, report.standard_errors, report.pathology
        ):
            p_text = "nan" if math.isnan(p) else f"{p:.6f}"
            lines.append(
                f"{cell.gamma:g},{cell.branching},{cell.exploration:g},{label},"
                f"{cell.algorithm},{budget},{delta:.6f},{se:.6f},{p_text}"
            )
    return lines


def _svg_panels(reports: list[CellReport]) -> str:
    panels: dict[tuple, list[CellReport]] = {}
    for report in reports:
        key = (report.cell.gamma, report.cell.branching, report.cell.heuristic)
        panels.setdefault(key, []).append(report)

    width, height, margin = 320, 240, 42
    rows = []
    colors = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
    for p_index, (key, group) in enumerate(sorted(panels.items(), key=lambda kv: repr(kv[0]))):
        gamma, b, heuristic = key
        x0 = margin
        y0 = p_index * height + margin
        plot_w, plot_h = width - 2 * margin, height - 2 * margin
        budgets = group[0].cell.budgets
        xs = [math.log10(j) for j in budgets]
        x_lo, x_hi = min(xs), max(xs)
        if x_hi == x_lo:
            x_hi = x_lo + 1.0
        values = [p for g in group for p in g.pathology if not math.isnan(p)]
        y_lo = min([0.0] + values)
        y_hi = max([1.05] + values)

        def sx(x):
            return x0 + (x - x_lo) / (x_hi - x_lo) * plot_w

        def sy(y):
            return y0 + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

        rows.append(
            f'<rect x="{x0}" y="{y0}" width="{plot_w}" height="{plot_h}" '
            'fill="none" stroke="#444"/>'
        )
        rows.append(
            f'<text x="{x0}" y="{y0 - 8}" font-size="12">'
            f"gamma={gamma:g} b={b} {heuristic}</text>"
        )
        baseline_y = sy(1.0)
        rows.append(
            f'<line x1="{x0}" y1="{baseline_y:.2f}" x2="{x0 + plot_w}" '
            f'y2="{baseline_y:.2f}" stroke="#bbb" stroke-dasharray="4 3"/>'
        )
        for j, x in zip(budgets, xs):
            rows.append(
                f'<text x="{sx(x):.2f}" y="{y0 + plot_h + 16}" font-size="10" '
                f'text-anchor="middle">{j}</text>'
            )
        for tick in (y_lo, 1.0, y_hi):
            rows.append(
                f'<text x="{x0 - 6}" y="{sy(tick) + 4:.2f}" font-size="10" '
                f'text-anchor="end">{tick:.2f}</text>'
            )
        for g_index, report in enumerate(sorted(group, key=lambda r: r.cell.exploration)):
            color = colors[g_index % len(colors)]
            points = " ".join(
                f"{sx(x):.2f},{sy(p):.2f}"
                for x, p in zip(xs, report.pathology)
                if not math.isnan(p)
            )
            if points:
                rows.append(
                    f'<polyline points="{points}" fill="none" stroke="{color}" '
                    'stroke-width="1.5"/>'
                )
            rows.append(
                f'<text x="{x0 + plot_w + 6}" y="{y0 + 14 + 14 * g_index}" '
                f'font-size="10" fill="{color}">c={report.cell.exploration:g}</text>'
            )
    total_h = len(panels) * height + margin
    body = "\n".join(rows)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width + 90}" '
        f'height="{total_h}" viewBox="0 0 {width + 90} {total_h}">\n'
        f"{body}\n</svg>\n"
    )


def manifest_lines(spec: GridSpec) -> list[str]:
    from . import __version__

    lines = [f"critgames {__version__}", "grid:"]
    for name in (
        "gammas",
        "branchings",
        "explorations",
        "heuristics",
        "budgets",
        "max_depth",
        "trees",
        "master_seed",
        "algorithm",
    ):
        lines.append(f"  {name} = {getattr(spec, name)!r}")
    return lines


def emit_results(
    spec: GridSpec,
    reports: list[CellReport],
    out_dir: str | Path,
    formats: Sequence[str] = ("csv", "svg"),
) -> list[Path]:
    if not reports:
        raise ValueError("nothing to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out / "results.csv"
        path.write_text("\n".join(csv_lines(reports)) + "\n")
        written.append(path)
    if "svg" in formats:
        path = out / "pathology.svg"
        path.write_text(_svg_panels(reports))
        written.append(path)
    path = out / "manifest.txt"
    path.write_text("\n".join(manifest_lines(spec)) + "\n")
    written.append(path)
    return written
