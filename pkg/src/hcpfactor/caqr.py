"""Multilevel communication-avoiding QR (ML-CAQR) and its one-level special case.

Each panel of width ``b_r`` is reduced by a tree: every processor row of the
level-``r`` grid factors its chunk of the panel (recursively, one level
down), then the surviving R factors are merged pairwise along a binary tree.
The reflectors are kept implicitly as a :class:`HouseholderTree`, so Q is
never formed unless explicitly requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .dense import CompactWY, householder_qr, qr_flops, wy_apply_flops
from .errors import DimensionMismatch, ShapeError
from .platform import ValidatedPlatform, make_platform
from .schedule import BlockSchedule, reduction_rounds, row_chunks, trapezoid_words
from .vmachine import CommLedger, maybe_parallel

__all__ = [
    "LocalTree",
    "Elimination",
    "PanelStep",
    "HouseholderTree",
    "QrResult",
    "caqr",
    "ml_caqr",
    "ml_apply",
]


@dataclass
class LocalTree:
    """Leaf of the reduction: reflectors from a sequential factorization."""

    wy: CompactWY
    structured: bool = False  # two stacked triangles (flop counting only)
    level: int = 0

    @property
    def rows(self) -> int:
        return self.wy.rows

    def apply_qt(self, c: np.ndarray) -> np.ndarray:
        return self.wy.apply_qt(c)

    def apply_q(self, c: np.ndarray) -> np.ndarray:
        return self.wy.apply_q(c)


Tree = Union[LocalTree, "HouseholderTree"]


@dataclass
class Elimination:
    """One pairwise merge: rows of ``source`` and ``target`` stacked and refactored."""

    round: int
    source: int
    target: int
    rows: np.ndarray
    split: int  # how many of ``rows`` came from the source
    tree: Tree


@dataclass
class PanelStep:
    step: int
    col0: int
    width: int
    chunks: list[tuple[int, int]]
    leaves: list[Tree]
    eliminations: list[Elimination]

    def apply_qt(self, c: np.ndarray) -> None:
        for (lo, hi), leaf in zip(self.chunks, self.leaves):
            c[lo:hi] = leaf.apply_qt(c[lo:hi])
        for e in self.eliminations:
            c[e.rows] = e.tree.apply_qt(c[e.rows])

    def apply_q(self, c: np.ndarray) -> None:
        for e in reversed(self.eliminations):
            c[e.rows] = e.tree.apply_q(c[e.rows])
        for (lo, hi), leaf in zip(self.chunks, self.leaves):
            c[lo:hi] = leaf.apply_q(c[lo:hi])


@dataclass
class HouseholderTree:
    """Implicit orthogonal factor of one level-``level`` factorization."""

    level: int
    rows: int
    cols: int
    p_rows: int
    p_cols: int
    block: int
    steps: list[PanelStep] = field(default_factory=list)

    def apply_qt(self, c) -> np.ndarray:
        c = np.array(c, dtype=float, copy=True)
        for step in self.steps:
            step.apply_qt(c)
        return c

    def apply_q(self, c) -> np.ndarray:
        c = np.array(c, dtype=float, copy=True)
        for step in reversed(self.steps):
            step.apply_q(c)
        return c

    def local_factors(self, path: tuple = ()) -> Iterator[tuple[tuple, CompactWY]]:
        """Every sequential reflector block, keyed by its position in the tree."""
        for step in self.steps:
            for p, leaf in enumerate(step.leaves):
                yield from _walk(leaf, path + ((self.level, step.step, "leaf", p),))
            for e in step.eliminations:
                yield from _walk(e.tree, path + ((self.level, step.step, "elim", e.round, e.source),))


def _walk(tree: Tree, path: tuple) -> Iterator[tuple[tuple, CompactWY]]:
    if isinstance(tree, LocalTree):
        yield path, tree.wy
    else:
        yield from tree.local_factors(path)


@dataclass
class QrResult:
    r_factor: np.ndarray
    tree: Tree
    ledger: CommLedger

    def q(self) -> np.ndarray:
        """Explicit orthogonal factor (``m x m``); for testing only."""
        m = self.tree.rows
        return self.tree.apply_q(np.eye(m))


class _QrRun:
    def __init__(self, platform: ValidatedPlatform, blocks: Sequence[int],
                 grids: Sequence[tuple[int, int]]):
        self.platform = platform
        self.blocks = tuple(blocks)
        self.grids = tuple(grids)

    def factor(self, w: np.ndarray, level: int, ledger: CommLedger | None,
               stacked: bool = False) -> Tree:
        """Overwrite ``w`` with ``[R; 0]`` and return the reflector tree."""
        m, n = w.shape
        if level == 0:
            f = householder_qr(w)
            k = f.r.shape[0]
            w[:] = 0.0
            w[:k] = f.r
            if ledger is not None:
                ledger.record_flops(2.0 * n ** 3 / 3.0 if stacked else qr_flops(m, n))
            return LocalTree(f.wy, structured=stacked)
        b = self.blocks[level - 1]
        pr, pc = self.grids[level - 1]
        tree = HouseholderTree(level, m, n, pr, pc, b)
        for s, c0 in enumerate(range(0, n, b)):
            if c0 >= m:
                break
            width = min(b, n - c0)
            panel = w[:, c0:c0 + width]
            chunks = row_chunks(c0, m, pr, width)
            leaves: list[Tree] = []
            tops: list[np.ndarray] = []
            with maybe_parallel(ledger, len(chunks)):
                for p, (lo, hi) in enumerate(chunks):
                    leaves.append(self.factor(panel[lo:hi], level - 1, ledger if p == 0 else None))
                    tops.append(np.arange(lo, lo + min(hi - lo, width)))
            elims = []
            for j, pairs in enumerate(reduction_rounds(len(chunks))):
                with maybe_parallel(ledger, len(pairs)):
                    for idx, (src, tgt) in enumerate(pairs):
                        led = ledger if idx == 0 else None
                        rows = np.concatenate([tops[src], tops[tgt]])
                        if led is not None:
                            sent = max(len(tops[src]), len(tops[tgt]))
                            led.record_p2p(trapezoid_words(sent, width), level, "qr-elim-R")
                        rr = panel[rows]
                        # both partners factor the stacked pair redundantly
                        with maybe_parallel(led, 2):
                            sub = self.factor(rr, level - 1, led, stacked=True)
                        panel[rows] = rr
                        elims.append(Elimination(j, src, tgt, rows, len(tops[src]), sub))
                        tops[src] = rows[:min(len(rows), width)]
            step = PanelStep(s, c0, width, chunks, leaves, elims)
            rest = n - c0 - width
            if rest > 0:
                step.apply_qt(w[:, c0 + width:])
                if ledger is not None:
                    _charge_step(step, tree, rest, ledger)
            tree.steps.append(step)
        return tree


def _charge_apply(tree: Tree, ncols: int, ledger: CommLedger) -> None:
    """Ledger cost of applying ``tree``'s transpose to ``ncols`` trailing columns."""
    if ncols <= 0:
        return
    if isinstance(tree, LocalTree):
        k = tree.wy.count
        if tree.structured:
            ledger.record_flops(3.0 * k * k * ncols)
        else:
            ledger.record_flops(wy_apply_flops(tree.rows, k, ncols))
        return
    for step in tree.steps:
        _charge_step(step, tree, ncols, ledger)


def _charge_step(step: PanelStep, tree: "HouseholderTree", ncols: int, ledger: CommLedger) -> None:
    level, pc = tree.level, tree.p_cols
    local = math.ceil(ncols / pc)
    width = step.width
    lo, hi = step.chunks[0]
    # leaf reflectors travel along the processor rows
    with ledger.parallel(multiplicity=len(step.chunks)):
        ledger.record_bcast((hi - lo) * width, level, pc, "qr-upfact-bcast")
        with ledger.parallel(multiplicity=pc):
            _charge_apply(step.leaves[0], local, ledger)
    for j, pairs in enumerate(reduction_rounds(len(step.chunks))):
        e = next(x for x in step.eliminations if x.round == j)
        rows = max(e.split, len(e.rows) - e.split)
        with ledger.parallel(multiplicity=len(pairs)):
            ledger.record_bcast(width * width, level, pc, "qr-upelim-bcast")
            with ledger.parallel(multiplicity=pc):
                ledger.record_p2p(rows * local, level, "qr-upelim-exchange")
                with ledger.parallel(multiplicity=2):
                    _charge_apply(e.tree, local, ledger)


def _check_input(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    m, n = a.shape
    if m < n:
        raise ShapeError(f"QR needs m >= n, got {m} x {n}")
    return a


def caqr(a, grid: tuple[int, int], b: int, platform: ValidatedPlatform | None = None,
         ledger: CommLedger | None = None) -> QrResult:
    """One-level CAQR on a ``Pr x Pc`` grid with panel width ``b``.

    Communication is charged to level 1 of ``platform`` (a one-level platform
    with default parameters when omitted).
    """
    a = _check_input(a)
    pr, pc = int(grid[0]), int(grid[1])
    if pr < 1 or pc < 1 or b < 1:
        raise ShapeError(f"invalid grid {grid} or block size {b}")
    if platform is None:
        platform = make_platform([(pr, pc)])
    if ledger is None:
        ledger = CommLedger(platform)
    grids = [(pr, pc)] + [
        (platform.p_rows(i), platform.p_cols(i)) for i in range(2, platform.depth + 1)
    ]
    run = _QrRun(platform, (b,), grids)
    w = a.copy()
    tree = run.factor(w, 1, ledger)
    n = a.shape[1]
    return QrResult(np.triu(w[:n]), tree, ledger)


def ml_caqr(a, platform: ValidatedPlatform, schedule: BlockSchedule | Sequence[int],
            ledger: CommLedger | None = None) -> QrResult:
    """Multilevel CAQR of a tall or square matrix on ``platform``."""
    a = _check_input(a)
    schedule = BlockSchedule.of(schedule)
    n = a.shape[1]
    schedule.check(n, platform.depth)
    if platform.depth == 1:
        return caqr(a, (platform.p_rows(1), platform.p_cols(1)), schedule.b(1), platform, ledger)
    if ledger is None:
        ledger = CommLedger(platform)
    grids = [(platform.p_rows(i), platform.p_cols(i)) for i in range(1, platform.depth + 1)]
    run = _QrRun(platform, schedule.blocks, grids)
    w = a.copy()
    tree = run.factor(w, platform.depth, ledger)
    return QrResult(np.triu(w[:n]), tree, ledger)


def ml_apply(tree: Tree, c, transpose: bool = True, ledger: CommLedger | None = None) -> np.ndarray:
    """Apply ``Q^T`` (default) or ``Q`` from a factorization tree to ``c``."""
    c = np.asarray(c, dtype=float)
    if c.ndim not in (1, 2) or c.shape[0] != tree.rows:
        raise ShapeError(f"operand with {c.shape[0] if c.ndim else 0} rows; tree has {tree.rows}")
    vec = c.ndim == 1
    c2 = c.reshape(-1, 1) if vec else c
    out = tree.apply_qt(c2) if transpose else tree.apply_q(c2)
    if ledger is not None:
        _charge_apply(tree, c2.shape[1], ledger)
    return out.ravel() if vec else out
