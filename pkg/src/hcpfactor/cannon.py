"""Recursive multilevel Cannon matrix multiply."""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, LevelOutOfRange, NonSquareGrid, ShapeError
from .platform import ValidatedPlatform
from .vmachine import CommLedger, maybe_parallel

__all__ = ["ml_cannon", "cannon_supported"]


def _grid_side(platform: ValidatedPlatform, level: int) -> int:
    pr, pc = platform.p_rows(level), platform.p_cols(level)
    if pr != pc:
        raise NonSquareGrid(f"level {level} grid is {pr}x{pc}; Cannon needs a square grid")
    return pr


def _check(shape_a, shape_b, shape_c, platform: ValidatedPlatform, level: int) -> None:
    if not 0 <= level <= platform.depth:
        raise LevelOutOfRange(f"level {level} outside 0..{platform.depth}")
    m, k = shape_a
    k2, n = shape_b
    if k != k2 or shape_c != (m, n):
        raise DimensionMismatch(f"Cannon: A {shape_a}, B {shape_b}, C {shape_c}")
    q = math.prod(_grid_side(platform, j) for j in range(1, level + 1))
    if m % q or n % q or k % q:
        raise ShapeError(f"dimensions {(m, k, n)} are not divisible by the grid side {q}")


def cannon_supported(shape_a, shape_b, platform: ValidatedPlatform, level: int) -> bool:
    """Whether :func:`ml_cannon` accepts these operands at ``level``."""
    try:
        _check(tuple(shape_a), tuple(shape_b), (shape_a[0], shape_b[1]), platform, level)
    except (NonSquareGrid, ShapeError, DimensionMismatch):
        return False
    return True


def ml_cannon(c, a, b, platform: ValidatedPlatform, level: int | None = None,
              ledger: CommLedger | None = None) -> np.ndarray:
    """Return ``C + A B`` computed by Cannon's algorithm applied recursively.

    At level ``k`` the operands are split into a ``q x q`` block grid
    (``q = sqrt(P_k)``); every round multiplies local blocks through a call at
    level ``k - 1`` and then shifts A left and B up by one block.  Level 0 is
    a local multiply.
    """
    c = np.asarray(c, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    level = platform.depth if level is None else level
    _check(a.shape, b.shape, c.shape, platform, level)
    out = c.copy()
    _cannon(out, a, b, level, platform, ledger)
    return out


def _cannon(c: np.ndarray, a: np.ndarray, b: np.ndarray, level: int,
            platform: ValidatedPlatform, ledger: CommLedger | None) -> None:
    m, k = a.shape
    n = b.shape[1]
    if level == 0:
        c += a @ b
        if ledger is not None:
            ledger.record_flops(2.0 * m * n * k)
        return
    q = platform.p_rows(level)
    if q == 1:
        _cannon(c, a, b, level - 1, platform, ledger)
        return
    mb, kb, nb = m // q, k // q, n // q
    if ledger is not None:
        # initial skew: A(i, j) <- A(i, i + j), B(i, j) <- B(i + j, j)
        with ledger.parallel(multiplicity=q * q):
            ledger.record_p2p(mb * kb, level, "cannon-skew-A")
            ledger.record_p2p(kb * nb, level, "cannon-skew-B")
    for h in range(q):
        with maybe_parallel(ledger, q * q):
            for i in range(q):
                for j in range(q):
                    kk = (i + j + h) % q
                    _cannon(
                        c[i * mb:(i + 1) * mb, j * nb:(j + 1) * nb],
                        a[i * mb:(i + 1) * mb, kk * kb:(kk + 1) * kb],
                        b[kk * kb:(kk + 1) * kb, j * nb:(j + 1) * nb],
                        level - 1,
                        platform,
                        ledger if i == j == 0 else None,
                    )
            if ledger is not None:
                ledger.record_p2p(mb * kb, level, "cannon-shift-A")
                ledger.record_p2p(kb * nb, level, "cannon-shift-B")
