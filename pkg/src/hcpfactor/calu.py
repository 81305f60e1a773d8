"""Communication-avoiding LU with tournament pivoting: one-level CALU and the
two multilevel variants (1D over the levels' processor rows, 2D recursive).

All factorizations work in place on a packed ``L \\ U`` array and return the
row order: ``(P A)[i] = A[perm[i]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cannon import cannon_supported, ml_cannon
from .dense import lu_flops, trsm_lower_unit
from .errors import DimensionMismatch, ShapeError, SingularPanel
from .platform import ValidatedPlatform, make_platform
from .schedule import BlockSchedule, reduction_rounds, row_chunks
from .vmachine import CommLedger, maybe_parallel

__all__ = [
    "LuResult",
    "PivotQuality",
    "CommMap",
    "calu",
    "ml_calu",
    "pivot_quality",
    "tau_from_l",
    "select_pivots",
]

VARIANTS = ("1d", "2d")


@dataclass
class LuResult:
    perm: np.ndarray
    l_factor: np.ndarray
    u_factor: np.ndarray
    tau_trace: np.ndarray
    growth_trace: np.ndarray
    ledger: CommLedger

    def permuted(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float)[self.perm]


@dataclass(frozen=True)
class PivotQuality:
    tau_min: float
    fraction_tau_eq_one: float
    histogram: np.ndarray
    bin_edges: np.ndarray
    count: int


@dataclass(frozen=True)
class CommMap:
    """Hierarchy levels used by one CALU run.

    ``round_levels[j]`` carries the ``j``-th tournament round; ``col_level``
    carries traffic along processor rows (pivots, L); ``row_level`` traffic
    along processor columns (swaps, U).
    """

    round_levels: tuple[int, ...]
    col_level: int
    row_level: int

    @classmethod
    def flat(cls, level: int, p_rows: int) -> "CommMap":
        return cls((level,) * len(reduction_rounds(p_rows)), level, level)


def select_pivots(block: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Rows of ``block`` that partial pivoting would pick, in pivot order.

    Ties go to the smallest label.  A column that is entirely zero is
    tolerated: the smallest remaining label is taken and nothing is
    eliminated.  Returns indices into ``block``.
    """
    work = np.array(block, dtype=float, copy=True)
    m, w = work.shape
    order = np.arange(m)
    for k in range(min(m, w)):
        col = np.abs(work[k:, k])
        big = col.max()
        ties = np.flatnonzero(col == big)
        p = k + ties[np.argmin(labels[order[k + ties]])]
        if p != k:
            work[[k, p]] = work[[p, k]]
            order[[k, p]] = order[[p, k]]
        if big != 0.0 and k + 1 < m:
            work[k + 1:, k] /= work[k, k]
            work[k + 1:, k + 1:] -= np.outer(work[k + 1:, k], work[k, k + 1:])
    return order[:min(m, w)]


def _swap_to_top(w: np.ndarray, perm: np.ndarray, k0: int, winners: Sequence[int]) -> None:
    """Bring ``winners`` (row indices of ``w``) to rows ``k0, k0+1, ...`` by successive swaps."""
    order = np.arange(w.shape[0])
    where = np.arange(w.shape[0])
    for i, r in enumerate(winners):
        t = k0 + i
        p = where[r]
        if p != t:
            x = order[t]
            order[t], order[p] = r, x
            where[r], where[x] = t, p
    if np.any(order != np.arange(order.size)):
        w[:] = w[order]
        perm[:] = perm[order]


def _panel_nopiv(panel: np.ndarray, tolerant: bool) -> int:
    """Unpivoted LU of a panel in place; returns the number of eliminated columns."""
    ms, width = panel.shape
    kk = min(ms, width)
    for j in range(kk):
        piv = panel[j, j]
        if piv == 0.0:
            if tolerant:
                continue
            raise SingularPanel(f"zero pivot in panel column {j}")
        panel[j + 1:, j] /= piv
        panel[j + 1:, j + 1:] -= np.outer(panel[j + 1:, j], panel[j, j + 1:])
    return kk


def tau_from_l(l: np.ndarray) -> np.ndarray:
    """Pivot threshold per column: ``1 / max_{i >= k} |L[i, k]|``."""
    k = min(l.shape)
    out = np.empty(k)
    for j in range(k):
        big = np.abs(l[j:, j]).max()
        out[j] = 1.0 / big if big > 0 else math.nan
    return out


def pivot_quality(result: LuResult | np.ndarray, bins: int = 10) -> PivotQuality:
    taus = result.tau_trace if isinstance(result, LuResult) else np.asarray(result, dtype=float)
    edges = np.linspace(0.0, 1.0, bins + 1)
    taus = taus[np.isfinite(taus)]
    if taus.size == 0:
        return PivotQuality(math.nan, math.nan, np.zeros(bins, dtype=int), edges, 0)
    hist, _ = np.histogram(np.clip(taus, 0.0, 1.0), bins=edges)
    return PivotQuality(float(taus.min()), float(np.mean(taus == 1.0)), hist, edges, int(taus.size))


class _LuRun:
    def __init__(self, platform: ValidatedPlatform, blocks: Sequence[int],
                 grids: Sequence[tuple[int, int]]):
        self.platform = platform
        self.blocks = tuple(blocks)
        self.grids = tuple(grids)
        self.depth = len(self.grids)
        self.pr_total = math.prod(g[0] for g in self.grids)

    # -- one-level CALU ---------------------------------------------------

    def calu(self, w: np.ndarray, b: int, pr: int, pc: int, comm: CommMap,
             ledger: CommLedger | None, tolerant: bool, growth: list | None = None) -> np.ndarray:
        m, n = w.shape
        perm = np.arange(m)
        for k0 in range(0, min(m, n), b):
            width = min(b, n - k0)
            panel = w[k0:, k0:k0 + width]
            chunks = row_chunks(0, m - k0, pr, width)
            labels = perm[k0:]
            cands = []
            for lo, hi in chunks:
                cands.append(lo + select_pivots(panel[lo:hi], labels[lo:hi]))
            rounds = reduction_rounds(len(chunks))
            for pairs in rounds:
                for s, t in pairs:
                    rows = np.concatenate([cands[s], cands[t]])
                    cands[s] = rows[select_pivots(panel[rows], labels[rows])]
            _swap_to_top(w, perm, k0, k0 + cands[0])
            kk = _panel_nopiv(w[k0:, k0:k0 + width], tolerant)
            rest = n - k0 - width
            if rest > 0:
                l11 = np.tril(w[k0:k0 + kk, k0:k0 + kk], -1) + np.eye(kk)
                w[k0:k0 + kk, k0 + width:] = trsm_lower_unit(l11, w[k0:k0 + kk, k0 + width:])
                w[k0 + kk:, k0 + width:] -= w[k0 + kk:, k0:k0 + kk] @ w[k0:k0 + kk, k0 + width:]
            if growth is not None:
                growth.append(_trailing_max(w, k0 + kk, k0 + width))
            if ledger is not None:
                self._charge_calu_panel(ledger, m - k0, n, width, kk, rest, chunks, rounds,
                                        pr, pc, comm)
        return perm

    def _charge_calu_panel(self, ledger, ms, n, width, kk, rest, chunks, rounds, pr, pc, comm):
        h = chunks[0][1] - chunks[0][0]
        with ledger.parallel(multiplicity=len(chunks)):
            ledger.record_flops(lu_flops(h, width))
        for j, pairs in enumerate(rounds):
            with ledger.parallel(multiplicity=len(pairs)):
                ledger.record_p2p(width * width, comm.round_levels[j], "lu-tournament")
                with ledger.parallel(multiplicity=2):
                    ledger.record_flops(lu_flops(2 * width, width))
        ledger.record_bcast(kk, comm.col_level, pc, "lu-pivots")
        if pr > 1:
            ledger.record_p2p(kk * math.ceil(n / pc), comm.row_level, "lu-swap")
        with ledger.parallel(multiplicity=len(chunks)):
            ledger.record_flops(h * kk * kk)
        ledger.record_bcast(kk * (kk + 1) // 2, comm.col_level, pc, "lu-bcast-L11")
        ledger.record_bcast(h * kk, comm.col_level, pc, "lu-bcast-L")
        if rest > 0:
            local_cols = math.ceil(rest / pc)
            with ledger.parallel(multiplicity=pc):
                ledger.record_flops(kk * kk * local_cols)
            ledger.record_bcast(kk * local_cols, comm.row_level, pr, "lu-bcast-U")
            with ledger.parallel(multiplicity=len(chunks) * pc):
                ledger.record_flops(2.0 * math.ceil((ms - kk) / pr) * kk * local_cols)

    # -- 2D variant -------------------------------------------------------

    def lu2d(self, w: np.ndarray, level: int, ledger: CommLedger | None, tolerant: bool,
             growth: list | None = None) -> np.ndarray:
        pr, pc = self.grids[level - 1]
        b = self.blocks[level - 1]
        if level == 1:
            return self.calu(w, b, pr, pc, CommMap.flat(1, pr), ledger, tolerant, growth)
        m, n = w.shape
        perm = np.arange(m)
        below = self.platform.below(level)
        for k0 in range(0, min(m, n), b):
            width = min(b, n - k0)
            panel = w[k0:, k0:k0 + width]
            chunks = row_chunks(0, m - k0, pr, width)
            cands = []
            with maybe_parallel(ledger, len(chunks)):
                for p, (lo, hi) in enumerate(chunks):
                    order = self.lu2d(panel[lo:hi].copy(), level - 1,
                                      ledger if p == 0 else None, tolerant=True)
                    cands.append(lo + order[:min(hi - lo, width)])
            rounds = reduction_rounds(len(chunks))
            for pairs in rounds:
                with maybe_parallel(ledger, len(pairs)):
                    for idx, (s, t) in enumerate(pairs):
                        led = ledger if idx == 0 else None
                        rows = np.concatenate([cands[s], cands[t]])
                        if led is not None:
                            led.record_p2p(max(len(cands[s]), len(cands[t])) * width, level,
                                           "lu-tournament")
                        with maybe_parallel(led, 2):
                            order = self.lu2d(panel[rows].copy(), level - 1, led, tolerant=True)
                        cands[s] = rows[order[:min(len(rows), width)]]
            _swap_to_top(w, perm, k0, k0 + cands[0])
            kk = _panel_nopiv(w[k0:, k0:k0 + width], tolerant)
            rest = n - k0 - width
            ms = m - k0
            if ledger is not None:
                h = chunks[0][1] - chunks[0][0]
                ledger.record_bcast(kk, level, pc, "lu-pivots")
                if pr > 1:
                    ledger.record_p2p(kk * math.ceil(n / pc), level, "lu-swap")
                ledger.record_bcast(kk * kk, level, pr * pc, "lu-bcast-diag")
                with ledger.parallel(multiplicity=len(chunks)):
                    ledger.record_flops(h * kk * kk / below)
                ledger.record_bcast(h * kk, level, pc, "lu-bcast-L")
            if rest > 0:
                l11 = np.tril(w[k0:k0 + kk, k0:k0 + kk], -1) + np.eye(kk)
                w[k0:k0 + kk, k0 + width:] = trsm_lower_unit(l11, w[k0:k0 + kk, k0 + width:])
                if ledger is not None:
                    local_cols = math.ceil(rest / pc)
                    with ledger.parallel(multiplicity=pc):
                        ledger.record_flops(kk * kk * local_cols / below)
                    ledger.record_bcast(kk * local_cols, level, pr, "lu-bcast-U")
                self._schur(w[k0 + kk:, k0 + width:], w[k0 + kk:, k0:k0 + kk],
                            w[k0:k0 + kk, k0 + width:], level, ledger,
                            local_flops=2.0 * math.ceil((ms - kk) / pr) * kk
                            * math.ceil(rest / pc) / below,
                            nodes=below * len(chunks) * pc)
            if growth is not None:
                growth.append(_trailing_max(w, k0 + kk, k0 + width))
        return perm

    # -- 1D variant -------------------------------------------------------

    def lu1d(self, w: np.ndarray, level: int, ledger: CommLedger | None,
             growth: list | None = None) -> np.ndarray:
        if level == 1:
            return self.calu(w, self.blocks[0], self.pr_total, self.grids[0][1],
                             self._row_map(), ledger, tolerant=False, growth=growth)
        m, n = w.shape
        b = self.blocks[level - 1]
        cols = math.prod(g[1] for g in self.grids[:level])
        top = self.depth
        perm = np.arange(m)
        for k0 in range(0, min(m, n), b):
            width = min(b, n - k0)
            order = self.lu1d(w[k0:, k0:k0 + width], level - 1, ledger)
            if np.any(order != np.arange(order.size)):
                w[k0:, :k0] = w[k0:, :k0][order]
                w[k0:, k0 + width:] = w[k0:, k0 + width:][order]
                perm[k0:] = perm[k0:][order]
            kk = min(m - k0, width)
            rest = n - k0 - width
            if ledger is not None:
                ledger.record_bcast(kk, level, cols, "lu-pivots")
                if self.pr_total > 1:
                    ledger.record_p2p(kk * math.ceil((n - width) / cols), top, "lu-swap")
            if rest > 0:
                l11 = np.tril(w[k0:k0 + kk, k0:k0 + kk], -1) + np.eye(kk)
                w[k0:k0 + kk, k0 + width:] = trsm_lower_unit(l11, w[k0:k0 + kk, k0 + width:])
                rows_per = math.ceil((m - k0 - kk) / self.pr_total)
                cols_per = math.ceil(rest / cols)
                if ledger is not None:
                    ledger.record_bcast(kk * (kk + 1) // 2, level, cols, "lu-bcast-L11")
                    with ledger.parallel(multiplicity=cols):
                        ledger.record_flops(kk * kk * cols_per)
                    ledger.record_bcast(kk * cols_per, top, self.pr_total, "lu-bcast-U")
                    ledger.record_bcast(rows_per * kk, level, cols, "lu-bcast-L")
                self._schur(w[k0 + kk:, k0 + width:], w[k0 + kk:, k0:k0 + kk],
                            w[k0:k0 + kk, k0 + width:], level if level == top else 0, ledger,
                            local_flops=2.0 * rows_per * kk * cols_per,
                            nodes=self.pr_total * cols)
            if growth is not None:
                growth.append(_trailing_max(w, k0 + kk, k0 + width))
        return perm

    def _row_map(self) -> CommMap:
        """Tournament rounds over the stacked processor rows of every level."""
        levels = []
        cum = [math.prod(g[0] for g in self.grids[:k]) for k in range(1, self.depth + 1)]
        for j in range(len(reduction_rounds(self.pr_total))):
            dist = 1 << j
            levels.append(next(k + 1 for k, c in enumerate(cum) if c > dist))
        return CommMap(tuple(levels), 1, self.depth)

    # -- trailing update --------------------------------------------------

    def _schur(self, c: np.ndarray, l21: np.ndarray, u12: np.ndarray, level: int,
               ledger: CommLedger | None, local_flops: float, nodes: int) -> None:
        """``C -= L21 U12``: multilevel Cannon when the operands fit the grid, else a
        broadcast-based update whose communication was charged by the caller."""
        if c.size == 0:
            return
        if level >= 1 and cannon_supported(l21.shape, u12.shape, self.platform, level):
            c[:] = ml_cannon(c, -l21, u12, self.platform, level, ledger)
            return
        c -= l21 @ u12
        if ledger is not None:
            with ledger.parallel(multiplicity=nodes):
                ledger.record_flops(local_flops)


def _trailing_max(w: np.ndarray, r0: int, c0: int) -> float:
    block = w[r0:, c0:]
    return float(np.abs(block).max()) if block.size else 0.0


def _check_input(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def _result(a: np.ndarray, w: np.ndarray, perm: np.ndarray, growth: list,
            ledger: CommLedger) -> LuResult:
    m, n = a.shape
    k = min(m, n)
    l = np.tril(w[:, :k], -1)
    l[np.arange(k), np.arange(k)] = 1.0
    u = np.triu(w[:k])
    return LuResult(perm, l, u, tau_from_l(l), np.asarray(growth, dtype=float), ledger)


def calu(a, b: int, grid: tuple[int, int], platform: ValidatedPlatform | None = None,
         ledger: CommLedger | None = None) -> LuResult:
    """One-level CALU with tournament pivoting on a ``Pr x Pc`` grid."""
    a = _check_input(a)
    pr, pc = int(grid[0]), int(grid[1])
    if pr < 1 or pc < 1 or b < 1:
        raise ShapeError(f"invalid grid {grid} or block size {b}")
    if platform is None:
        platform = make_platform([(pr, pc)])
    if ledger is None:
        ledger = CommLedger(platform)
    run = _LuRun(platform, (b,), [(pr, pc)])
    w = a.copy()
    growth: list[float] = []
    perm = run.calu(w, b, pr, pc, CommMap.flat(1, pr), ledger, tolerant=False, growth=growth)
    return _result(a, w, perm, growth, ledger)


def ml_calu(a, platform: ValidatedPlatform, schedule: BlockSchedule | Sequence[int],
            variant: str = "2d", ledger: CommLedger | None = None) -> LuResult:
    """Multilevel CALU; ``variant`` is ``"1d"`` or ``"2d"``."""
    a = _check_input(a)
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    schedule = BlockSchedule.of(schedule)
    schedule.check(a.shape[1], platform.depth)
    grids = [(platform.p_rows(i), platform.p_cols(i)) for i in range(1, platform.depth + 1)]
    if platform.depth == 1:
        return calu(a, schedule.b(1), grids[0], platform, ledger)
    if ledger is None:
        ledger = CommLedger(platform)
    run = _LuRun(platform, schedule.blocks, grids)
    w = a.copy()
    growth: list[float] = []
    if variant == "2d":
        perm = run.lu2d(w, platform.depth, ledger, tolerant=False, growth=growth)
    else:
        perm = run.lu1d(w, platform.depth, ledger, growth=growth)
    return _result(a, w, perm, growth, ledger)
