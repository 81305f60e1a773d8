"""Block schedules and the row-partition / reduction-tree geometry shared by the factorizations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import PlatformTooDeep, ShapeError

__all__ = ["BlockSchedule", "row_chunks", "reduction_rounds", "trapezoid_words"]


@dataclass(frozen=True)
class BlockSchedule:
    """Panel widths ``b_1..b_l`` (index 0 is the deepest level)."""

    blocks: tuple[int, ...]

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.blocks)
        if not blocks:
            raise ShapeError("a block schedule needs at least one block size")
        if any(b < 1 for b in blocks):
            raise ShapeError(f"block sizes must be >= 1, got {blocks}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def of(cls, blocks: "BlockSchedule | Sequence[int]") -> "BlockSchedule":
        return blocks if isinstance(blocks, cls) else cls(tuple(blocks))

    @property
    def depth(self) -> int:
        return len(self.blocks)

    def b(self, level: int) -> int:
        return self.blocks[level - 1]

    def check(self, n: int, depth: int) -> None:
        """Require one block per level, ``b_l | n`` and ``b_{r-1} | b_r``."""
        if self.depth < depth:
            raise PlatformTooDeep(
                f"platform has {depth} levels but only {self.depth} block sizes were given"
            )
        if self.depth > depth:
            raise ShapeError(f"{self.depth} block sizes given for a {depth}-level platform")
        top = self.blocks[-1]
        if n % top:
            raise ShapeError(f"top block size {top} does not divide n={n}")
        for lo, hi in zip(self.blocks, self.blocks[1:]):
            if hi % lo:
                raise ShapeError(f"block sizes must nest: {lo} does not divide {hi}")


def row_chunks(start: int, stop: int, parts: int, min_rows: int) -> list[tuple[int, int]]:
    """Split rows ``[start, stop)`` over at most ``parts`` processor rows.

    Chunks are contiguous and as even as possible (larger ones first).  When
    the active rows run short, fewer processor rows take part so that every
    chunk keeps at least ``min_rows`` rows; a single chunk is used if even
    that is impossible.
    """
    rows = stop - start
    if rows <= 0:
        return []
    count = max(1, min(parts, rows // max(min_rows, 1)))
    base, extra = divmod(rows, count)
    out = []
    lo = start
    for p in range(count):
        hi = lo + base + (1 if p < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def reduction_rounds(count: int) -> list[list[tuple[int, int]]]:
    """Binary-tree pairs per round; partner of node ``p`` in round ``j`` is ``p XOR 2**j``.

    The lower id survives and carries the result to the next round.
    """
    rounds = []
    bit = 1
    while bit < count:
        rounds.append([(p, p + bit) for p in range(0, count, 2 * bit) if p + bit < count])
        bit *= 2
    return rounds


def trapezoid_words(rows: int, cols: int) -> int:
    """Words in the upper trapezoid of a ``rows x cols`` triangular factor (rows <= cols)."""
    rows = min(rows, cols)
    return rows * cols - rows * (rows - 1) // 2
