"""Experiment harness: optimal cost vs worst-case and average-case bounds.

For a tree with mean pairwise distance D (two independently uniform nodes,
with replacement), the expected optimal cost over uniform pebble/target
k-subsets is at most sqrt(D * k * (n - k)); the worst case is k(n - k).
:func:`run_opt_experiment` samples instances on a deterministic seed grid and
tabulates OPT against both bounds; :func:`check_expected_bound` aggregates
per-(n, k) cells with a 3-standard-error slack.

CSV output is byte-identical for identical config + seed; the per-row solve
time is therefore kept out of the file unless explicitly requested.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import IO, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .tree_core import (
    Instance,
    Tree,
    compute_demands,
    random_instance,
    root_tree,
    subtree_sizes,
)
from .upmt import lower_bound, render_plan_body, solve_upmt

__all__ = [
    "average_distance",
    "ExperimentConfig",
    "ExperimentRow",
    "run_opt_experiment",
    "write_csv",
    "CellCheck",
    "BoundCheckResult",
    "check_expected_bound",
    "BenchRow",
    "bench_solve",
]


def average_distance(tree: Tree, root: int = 0) -> Fraction:
    """Exact mean distance between two independently uniform nodes.

    Pairs are drawn with replacement, so the n self-pairs contribute zeros.
    Every edge (u, parent(u)) is crossed by |T_u| * (n - |T_u|) ordered pairs
    in each direction, hence the sum below; the value does not depend on the
    root used to organize it.
    """
    rooted = root_tree(tree, root)
    sizes = subtree_sizes(rooted)
    n = tree.n
    total = 2 * int((sizes * (n - sizes)).sum())
    return Fraction(total, n * n)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid description: tree distribution, sizes, k strategy, sample count.

    ``k_mode`` is ``"fixed"`` (k = k_value), ``"fraction"`` (k =
    round(k_value * n), clipped to [0, n]) or ``"sweep"`` (every k in
    1..n-1).  Row seeds are derived from ``base_seed`` and the cell, so any
    single row can be regenerated in isolation.
    """

    dist: str = "uniform"
    n_list: Tuple[int, ...] = (1000,)
    k_mode: str = "fixed"
    k_value: float = 1
    samples: int = 100
    base_seed: int = 0
    include_runtime: bool = False

    def __post_init__(self):
        if self.dist not in ("uniform", "path"):
            raise ValueError(f"unknown tree distribution {self.dist!r}")
        if self.k_mode not in ("fixed", "fraction", "sweep"):
            raise ValueError(f"unknown k_mode {self.k_mode!r}")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("n_list must hold positive sizes")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.k_mode == "fixed" and (self.k_value < 0 or self.k_value != int(self.k_value)):
            raise ValueError("fixed k must be a nonnegative integer")
        if self.k_mode == "fraction" and not 0 <= self.k_value <= 1:
            raise ValueError("fractional k must lie in [0, 1]")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))

    def cells(self) -> Iterator[Tuple[int, int]]:
        for n in self.n_list:
            if self.k_mode == "sweep":
                for k in range(1, n):
                    yield n, k
            elif self.k_mode == "fixed":
                k = int(self.k_value)
                if k <= n:
                    yield n, k
            else:
                yield n, min(n, max(0, round(self.k_value * n)))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("experiment config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "n_list" in data:
            data["n_list"] = tuple(data["n_list"])
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())

    def to_json(self) -> str:
        data = {}
        for f in fields(self):
            v = getattr(self, f.name)
            data[f.name] = list(v) if isinstance(v, tuple) else v
        return json.dumps(data, indent=2)


def _row_seed(base_seed: int, n: int, k: int, i: int) -> int:
    ss = np.random.SeedSequence(base_seed, spawn_key=(n, k, i))
    return int(ss.generate_state(1, np.uint64)[0])


def _expected_bound(dist: str, n: int, k: int) -> float:
    if k == 0 or k == n:
        return 0.0
    if dist == "uniform":
        d_mean = math.sqrt(math.pi * n / 2)  # asymptotic mean distance
    else:
        d_mean = (n * n - 1) / (3 * n)  # exact for the path
    return math.sqrt(d_mean * k * (n - k))


# ---------------------------------------------------------------------------
# the sweep


@dataclass
class ExperimentRow:
    n: int
    k: int
    seed: int
    opt: int
    bound_worst: int
    bound_expected: float
    d_estimate: float
    runtime_ms: float


def run_opt_experiment(
    cfg: ExperimentConfig, out: Union[None, str, os.PathLike, IO[str]] = None
) -> List[ExperimentRow]:
    """Sample the config grid; optionally stream the rows to CSV at ``out``."""
    rows: List[ExperimentRow] = []
    for n, k in cfg.cells():
        for i in range(cfg.samples):
            seed = _row_seed(cfg.base_seed, n, k, i)
            inst = random_instance(n, k, seed, cfg.dist)
            t0 = time.perf_counter()
            table = compute_demands(root_tree(inst.tree, 0), inst)
            opt = lower_bound(table)
            dt_ms = (time.perf_counter() - t0) * 1e3
            rows.append(
                ExperimentRow(
                    n=n,
                    k=k,
                    seed=seed,
                    opt=opt,
                    bound_worst=k * (n - k),
                    bound_expected=_expected_bound(cfg.dist, n, k),
                    d_estimate=float(average_distance(inst.tree)),
                    runtime_ms=dt_ms,
                )
            )
    if out is not None:
        write_csv(rows, out, cfg)
    return rows


def write_csv(
    rows: Sequence[ExperimentRow],
    out: Union[str, os.PathLike, IO[str]],
    cfg: ExperimentConfig,
) -> None:
    """Versioned-header CSV; %.6g floats keep it byte-stable across runs."""
    own = isinstance(out, (str, os.PathLike))
    f = open(out, "w", encoding="utf-8") if own else out
    try:
        f.write(
            "# pebbletree-experiment-v1"
            f" dist={cfg.dist} k_mode={cfg.k_mode} k_value={cfg.k_value:g}"
            f" samples={cfg.samples} base_seed={cfg.base_seed}\n"
        )
        cols = "n,k,seed,opt,bound_worst,bound_expected,d_estimate"
        if cfg.include_runtime:
            cols += ",runtime_ms"
        f.write(cols + "\n")
        for r in rows:
            line = (
                f"{r.n},{r.k},{r.seed},{r.opt},{r.bound_worst},"
                f"{r.bound_expected:.6g},{r.d_estimate:.6g}"
            )
            if cfg.include_runtime:
                line += f",{r.runtime_ms:.6g}"
            f.write(line + "\n")
    finally:
        if own:
            f.close()


# ---------------------------------------------------------------------------
# average-case bound check


@dataclass
class CellCheck:
    n: int
    k: int
    samples: int
    mean_opt: float
    d_hat: float
    bound: float
    stderr: float
    passed: bool


@dataclass
class BoundCheckResult:
    cells: List[CellCheck]
    passed: bool

    def as_text(self) -> str:
        lines = []
        for c in self.cells:
            lines.append(
                f"n={c.n} k={c.k} samples={c.samples}"
                f" mean_opt={c.mean_opt:.2f} bound=sqrt(D*k*(n-k))={c.bound:.2f}"
                f" se={c.stderr:.2f} -> {'ok' if c.passed else 'VIOLATED'}"
            )
        lines.append("all cells ok" if self.passed else "bound violated")
        return "\n".join(lines)


def check_expected_bound(cfg: ExperimentConfig) -> BoundCheckResult:
    """Check mean OPT <= sqrt(D_hat * k * (n - k)) + 3 SE per grid cell.

    D_hat is the mean of the exact per-tree average distances in the cell.
    At least 30 samples per cell are required for the error bars to mean
    anything.
    """
    if cfg.samples < 30:
        raise ValueError("need at least 30 samples per cell")
    rows = run_opt_experiment(cfg)
    cells: List[CellCheck] = []
    for n, k in cfg.cells():
        got = [r for r in rows if r.n == n and r.k == k]
        opts = np.array([r.opt for r in got], np.float64)
        d_hat = float(np.mean([r.d_estimate for r in got]))
        mean_opt = float(opts.mean())
        stderr = float(opts.std(ddof=1) / math.sqrt(len(got))) if len(got) > 1 else 0.0
        bound = math.sqrt(d_hat * k * (n - k))
        cells.append(
            CellCheck(
                n=n,
                k=k,
                samples=len(got),
                mean_opt=mean_opt,
                d_hat=d_hat,
                bound=bound,
                stderr=stderr,
                passed=mean_opt <= bound + 3 * stderr,
            )
        )
    return BoundCheckResult(cells=cells, passed=all(c.passed for c in cells))


# ---------------------------------------------------------------------------
# benchmarking (used by the CLI `bench` subcommand)


@dataclass
class BenchRow:
    n: int
    k: int
    moves: int
    seconds: float


def bench_solve(
    n_list: Sequence[int],
    k_frac: float = 0.1,
    base_seed: int = 0,
    repeats: int = 3,
    sink: Optional[IO[bytes]] = None,
) -> List[BenchRow]:
    """Best-of-``repeats`` wall time of solve + full plan emission per size.

    Emission goes to ``sink`` (default: the null device) so I/O is included
    but nothing lands on disk.  Instance generation is not timed.  One small
    warmup solve runs first so kernel compilation never lands in a timing.
    """
    own = sink is None
    f = open(os.devnull, "wb") if own else sink
    try:
        warm = random_instance(64, 6, 1)
        f.write(render_plan_body(solve_upmt(warm)))
        rows: List[BenchRow] = []
        for n in n_list:
            k = min(n, max(0, round(k_frac * n)))
            inst = random_instance(n, k, _row_seed(base_seed, n, k, 0))
            best = math.inf
            moves = 0
            for _ in range(max(1, repeats)):
                t0 = time.perf_counter()
                plan = solve_upmt(inst)
                f.write(b"# moves=%d\n" % len(plan))
                f.write(render_plan_body(plan))
                best = min(best, time.perf_counter() - t0)
                moves = len(plan)
            rows.append(BenchRow(n=int(n), k=int(k), moves=moves, seconds=best))
        return rows
    finally:
        if own:
            f.close()
