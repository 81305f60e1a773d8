"""Hierarchical Cluster Platform (HCP) description and elementary communication costs.

Levels are numbered deepest-first: level 1 holds the processing elements,
level ``l`` is the outermost network.  A node of level ``i + 1`` contains
``P_i = p_rows * p_cols`` nodes of level ``i`` arranged as a 2D grid.

Words are 8-byte doubles throughout.  ``beta`` is seconds per word and
``alpha`` seconds per message.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    BufferConstraintViolation,
    EmptyPlatform,
    LevelOutOfRange,
    MemoryOverflow,
    NetworkKindMismatch,
    PlatformError,
)

NETWORK_KINDS = ("fully_pipelined", "bufferized", "forward")
WORD_BYTES = 8

__all__ = [
    "NETWORK_KINDS",
    "LevelSpec",
    "PlatformSpec",
    "ValidatedPlatform",
    "CostVector",
    "LowerBounds",
    "validate",
    "p2p_counts",
    "p2p_cost",
    "bcast_cost",
    "bcast_rounds",
    "lower_bounds",
    "make_platform",
    "near_square",
    "with_top_nodes",
    "platform_from_dict",
    "platform_to_dict",
    "load_platform",
    "bundled_platform_names",
]


@dataclass(frozen=True)
class LevelSpec:
    index: int
    p_rows: int
    p_cols: int
    alpha: float
    beta: float
    buffer_words: int
    network: str = "fully_pipelined"

    @property
    def nodes(self) -> int:
        return self.p_rows * self.p_cols


@dataclass(frozen=True)
class PlatformSpec:
    levels: tuple[LevelSpec, ...]
    mem_level1_words: int
    gamma: float

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))


@dataclass(frozen=True)
class ValidatedPlatform:
    """A platform whose derived tables have been computed and checked.

    Per-level accessors take the 1-based level number used in the model.
    """

    spec: PlatformSpec
    total_nodes: int
    subtree_nodes: tuple[int, ...]  # sP_i = prod_{j >= i} P_j, index i-1
    aggregated_memory: tuple[int, ...]  # M_i = M_1 * prod_{j < i} P_j, index i-1
    strict: bool = True

    @property
    def depth(self) -> int:
        return len(self.spec.levels)

    @property
    def gamma(self) -> float:
        return self.spec.gamma

    def level(self, i: int) -> LevelSpec:
        if not 1 <= i <= self.depth:
            raise LevelOutOfRange(f"level {i} outside 1..{self.depth}")
        return self.spec.levels[i - 1]

    def nodes(self, i: int) -> int:
        return self.level(i).nodes

    def p_rows(self, i: int) -> int:
        return self.level(i).p_rows

    def p_cols(self, i: int) -> int:
        return self.level(i).p_cols

    def sp(self, i: int) -> int:
        self.level(i)
        return self.subtree_nodes[i - 1]

    def mem(self, i: int) -> int:
        self.level(i)
        return self.aggregated_memory[i - 1]

    def below(self, i: int) -> int:
        """Number of level-1 elements inside one node of level ``i``."""
        self.level(i)
        return math.prod(lv.nodes for lv in self.spec.levels[: i - 1])

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(lv.alpha for lv in self.spec.levels)

    @property
    def betas(self) -> tuple[float, ...]:
        return tuple(lv.beta for lv in self.spec.levels)

    @property
    def buffers(self) -> tuple[int, ...]:
        return tuple(lv.buffer_words for lv in self.spec.levels)


@dataclass(frozen=True)
class CostVector:
    """Critical-path cost split per level (tuples indexed by level - 1)."""

    words: tuple[float, ...]
    messages: tuple[float, ...]
    comm_time: tuple[float, ...]
    flops: float = 0.0
    flop_time: float = 0.0

    @property
    def total_time(self) -> float:
        # no overlap between computation and communication
        return self.flop_time + sum(self.comm_time)

    @property
    def comm_total(self) -> float:
        return sum(self.comm_time)

    @classmethod
    def zero(cls, depth: int) -> "CostVector":
        z = (0.0,) * depth
        return cls(z, z, z)

    @classmethod
    def from_counts(
        cls,
        words: Sequence[float],
        messages: Sequence[float],
        platform: ValidatedPlatform,
        flops: float = 0.0,
    ) -> "CostVector":
        if len(words) != platform.depth or len(messages) != platform.depth:
            raise PlatformError("per-level arrays must have one entry per level")
        comm = tuple(
            w * lv.beta + s * lv.alpha
            for w, s, lv in zip(words, messages, platform.spec.levels)
        )
        return cls(
            tuple(float(w) for w in words),
            tuple(float(s) for s in messages),
            comm,
            float(flops),
            float(flops) * platform.gamma,
        )

    def __add__(self, other: "CostVector") -> "CostVector":
        if len(self.words) != len(other.words):
            raise PlatformError("cannot add cost vectors of different depth")
        return CostVector(
            tuple(a + b for a, b in zip(self.words, other.words)),
            tuple(a + b for a, b in zip(self.messages, other.messages)),
            tuple(a + b for a, b in zip(self.comm_time, other.comm_time)),
            self.flops + other.flops,
            self.flop_time + other.flop_time,
        )

    def scale(self, k: float) -> "CostVector":
        return CostVector(
            tuple(k * a for a in self.words),
            tuple(k * a for a in self.messages),
            tuple(k * a for a in self.comm_time),
            k * self.flops,
            k * self.flop_time,
        )


@dataclass(frozen=True)
class LowerBounds:
    words_bound: float
    messages_bound: float
    memory_bound: float


def validate(spec: PlatformSpec, strict: bool = True) -> ValidatedPlatform:
    """Check a platform description and compute its derived tables.

    With ``strict=False`` only well-formedness is checked; the buffer
    sandwich ``B_{i-1} <= B_i <= P_{i-1} B_{i-1}``, ``B_1 = M_1`` and the
    network-kind consistency rules are skipped.  This is meant for
    what-if platforms used in hand calculations.
    """
    levels = spec.levels
    if not levels:
        raise EmptyPlatform("a platform needs at least one level")
    for pos, lv in enumerate(levels, start=1):
        if lv.index != pos:
            raise PlatformError(f"level indices must be 1..l in order, got {lv.index} at {pos}")
        if lv.p_rows < 1 or lv.p_cols < 1:
            raise PlatformError(f"level {pos}: grid dimensions must be >= 1")
        if not (lv.alpha > 0 and lv.beta > 0):
            raise PlatformError(f"level {pos}: alpha and beta must be positive")
        if lv.buffer_words < 1:
            raise PlatformError(f"level {pos}: buffer_words must be >= 1")
        if lv.network not in NETWORK_KINDS:
            raise PlatformError(f"level {pos}: unknown network kind {lv.network!r}")
    if spec.mem_level1_words < 1:
        raise PlatformError("mem_level1_words must be >= 1")
    if not spec.gamma >= 0:
        raise PlatformError("gamma must be non-negative")

    if strict:
        _check_buffers(spec)

    nodes = [lv.nodes for lv in levels]
    depth = len(levels)
    subtree = tuple(math.prod(nodes[i:]) for i in range(depth))
    memory = tuple(spec.mem_level1_words * math.prod(nodes[:i]) for i in range(depth))
    return ValidatedPlatform(spec, subtree[0], subtree, memory, strict)


def _check_buffers(spec: PlatformSpec) -> None:
    levels = spec.levels
    first = levels[0]
    if first.buffer_words != spec.mem_level1_words:
        raise BufferConstraintViolation(
            f"level 1 must be fully pipelined: B_1={first.buffer_words} != M_1={spec.mem_level1_words}"
        )
    if first.network != "fully_pipelined":
        raise NetworkKindMismatch("level 1 is fully pipelined by convention")
    for below, lv in zip(levels, levels[1:]):
        lo = below.buffer_words
        hi = below.nodes * below.buffer_words
        b = lv.buffer_words
        if not lo <= b <= hi:
            raise BufferConstraintViolation(
                f"level {lv.index}: need B_{below.index}={lo} <= B_{lv.index}={b} <= {hi}"
            )
        if lv.network == "fully_pipelined":
            if b != hi:
                raise NetworkKindMismatch(
                    f"level {lv.index}: fully pipelined requires B = P_{below.index} * B_{below.index} = {hi}"
                )
            if below.network != "fully_pipelined":
                raise NetworkKindMismatch(
                    f"level {lv.index}: levels below a fully pipelined level must be fully pipelined"
                )
        elif lv.network == "forward" and b != lo:
            raise NetworkKindMismatch(
                f"level {lv.index}: forward network requires B = B_{below.index} = {lo}"
            )


def _check_level(platform: ValidatedPlatform, r: int) -> None:
    if not 1 <= r <= platform.depth:
        raise LevelOutOfRange(f"level {r} outside 1..{platform.depth}")


def p2p_counts(
    volume_words: float, level: int, platform: ValidatedPlatform
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Per-level (words, messages) of one point-to-point exchange at ``level``.

    The level-``r`` volume ``D`` is spread over the sub-nodes, so
    ``W_r = D`` and ``W_k = W_{k+1} / P_k`` below it.  Level 1 sends a single
    message; upper levels need ``ceil(W_k / B_k)`` messages.
    """
    _check_level(platform, level)
    if volume_words < 0:
        raise PlatformError("communication volume must be non-negative")
    depth = platform.depth
    words = [0.0] * depth
    messages = [0.0] * depth
    if volume_words == 0:
        return tuple(words), tuple(messages)
    w = float(volume_words)
    words[level - 1] = w
    for k in range(level - 1, 0, -1):
        w = w / platform.nodes(k)
        words[k - 1] = w
    if words[0] > platform.spec.mem_level1_words:
        raise MemoryOverflow(
            f"{words[0]:g} words per element exceed M_1={platform.spec.mem_level1_words}"
        )
    messages[0] = 1.0
    for k in range(2, level + 1):
        messages[k - 1] = float(math.ceil(words[k - 1] / platform.level(k).buffer_words))
    return tuple(words), tuple(messages)


def p2p_cost(volume_words: float, level: int, platform: ValidatedPlatform) -> CostVector:
    words, messages = p2p_counts(volume_words, level, platform)
    return CostVector.from_counts(words, messages, platform)


def bcast_rounds(fanout: int) -> int:
    """ceil(log2(fanout)) computed exactly on integers."""
    if fanout < 1:
        raise PlatformError("broadcast fanout must be >= 1")
    return (fanout - 1).bit_length()


def bcast_cost(
    volume_words: float, level: int, fanout: int, platform: ValidatedPlatform
) -> CostVector:
    rounds = bcast_rounds(fanout)
    if rounds == 0:
        _check_level(platform, level)
        return CostVector.zero(platform.depth)
    return p2p_cost(volume_words, level, platform).scale(rounds)


def lower_bounds(n: int, level: int, platform: ValidatedPlatform) -> LowerBounds:
    """Per-level communication lower bounds with unit asymptotic constants."""
    if n < 1:
        raise PlatformError("matrix order must be >= 1")
    _check_level(platform, level)
    sp = platform.sp(level)
    n2 = float(n) * float(n)
    root = math.sqrt(sp)
    return LowerBounds(
        words_bound=n2 / root,
        messages_bound=n2 / (platform.level(level).buffer_words * root),
        memory_bound=n2 / sp,
    )


# ---------------------------------------------------------------------------
# construction helpers


def near_square(p: int) -> tuple[int, int]:
    """Factor ``p`` as ``rows x cols`` with rows <= cols and rows maximal."""
    if p < 1:
        raise PlatformError("node count must be >= 1")
    rows = math.isqrt(p)
    while p % rows:
        rows -= 1
    return rows, p // rows


def make_platform(
    grids: Iterable[tuple[int, int]],
    alphas: Sequence[float] | float = 1e-6,
    betas: Sequence[float] | float = 1e-9,
    mem_level1_words: int = 1 << 40,
    gamma: float = 1e-10,
    networks: Sequence[str] | str = "fully_pipelined",
    buffers: Sequence[int] | None = None,
    strict: bool = True,
) -> ValidatedPlatform:
    """Build and validate a platform from per-level ``(p_rows, p_cols)`` grids.

    Missing buffer sizes follow the network kind: fully pipelined levels get
    ``P_{i-1} B_{i-1}``, forward levels ``B_{i-1}``, bufferized levels the
    geometric mean of the two extremes.
    """
    grids = [tuple(g) for g in grids]
    depth = len(grids)
    if depth == 0:
        raise EmptyPlatform("a platform needs at least one level")

    def per_level(value, name):
        if isinstance(value, (int, float, str)):
            return [value] * depth
        value = list(value)
        if len(value) != depth:
            raise PlatformError(f"{name} needs {depth} entries")
        return value

    alphas = per_level(alphas, "alphas")
    betas = per_level(betas, "betas")
    networks = per_level(networks, "networks")
    if buffers is None:
        buffers = [mem_level1_words]
        for i in range(1, depth):
            lo = buffers[-1]
            hi = lo * grids[i - 1][0] * grids[i - 1][1]
            kind = networks[i]
            if kind == "fully_pipelined":
                buffers.append(hi)
            elif kind == "forward":
                buffers.append(lo)
            else:
                buffers.append(max(lo, int(math.isqrt(lo * hi))))
    levels = tuple(
        LevelSpec(i + 1, g[0], g[1], float(a), float(b), int(buf), kind)
        for i, (g, a, b, buf, kind) in enumerate(zip(grids, alphas, betas, buffers, networks))
    )
    return validate(PlatformSpec(levels, int(mem_level1_words), float(gamma)), strict=strict)


def with_top_nodes(platform: ValidatedPlatform, nodes: int) -> ValidatedPlatform:
    """Copy of ``platform`` whose outermost level has ``nodes`` nodes (near-square grid).

    Used for strong-scaling sweeps; buffers of the top level keep their
    network-kind relation to the level below.
    """
    spec = platform.spec
    rows, cols = near_square(nodes)
    top = spec.levels[-1]
    new_top = LevelSpec(top.index, rows, cols, top.alpha, top.beta, top.buffer_words, top.network)
    return validate(PlatformSpec(spec.levels[:-1] + (new_top,), spec.mem_level1_words, spec.gamma),
                    strict=platform.strict)


# ---------------------------------------------------------------------------
# JSON config files


def platform_from_dict(data: dict, strict: bool = True) -> ValidatedPlatform:
    try:
        gamma = float(data["gamma"])
        mem = int(data["mem_level1_words"])
        raw_levels = data["levels"]
    except (KeyError, TypeError, ValueError) as exc:
        raise PlatformError(f"malformed platform config: {exc}") from exc
    if not raw_levels:
        raise EmptyPlatform("platform config lists no levels")
    levels = []
    for i, lv in enumerate(raw_levels, start=1):
        try:
            bandwidth = float(lv["bandwidth_GBps"])
            if bandwidth <= 0:
                raise ValueError("bandwidth must be positive")
            levels.append(
                LevelSpec(
                    index=i,
                    p_rows=int(lv["p_rows"]),
                    p_cols=int(lv["p_cols"]),
                    alpha=float(lv["alpha_s"]),
                    beta=WORD_BYTES / (bandwidth * 1e9),
                    buffer_words=int(lv["buffer_words"]),
                    network=str(lv.get("network", "fully_pipelined")),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PlatformError(f"malformed level {i} in platform config: {exc}") from exc
    return validate(PlatformSpec(tuple(levels), mem, gamma), strict=strict)


def platform_to_dict(platform: ValidatedPlatform) -> dict:
    spec = platform.spec
    return {
        "gamma": spec.gamma,
        "mem_level1_words": spec.mem_level1_words,
        "levels": [
            {
                "p_rows": lv.p_rows,
                "p_cols": lv.p_cols,
                "alpha_s": lv.alpha,
                "bandwidth_GBps": WORD_BYTES / lv.beta / 1e9,
                "buffer_words": lv.buffer_words,
                "network": lv.network,
            }
            for lv in spec.levels
        ],
    }


def bundled_platform_names() -> list[str]:
    root = resources.files("hcpfactor") / "platforms"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_platform(source: str | Path, strict: bool = True) -> ValidatedPlatform:
    """Load a platform from a JSON file, or by bundled name (``hopper``, ``exascale``)."""
    path = Path(source)
    if path.is_file():
        text = path.read_text()
    else:
        name = path.name[:-5] if path.name.endswith(".json") else path.name
        bundled = resources.files("hcpfactor") / "platforms" / f"{name}.json"
        if path.parent != Path(".") or not bundled.is_file():
            raise FileNotFoundError(f"platform file not found: {source}")
        text = bundled.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlatformError(f"platform file is not valid JSON: {exc}") from exc
    return platform_from_dict(data, strict=strict)
