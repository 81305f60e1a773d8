"""Analytical cost models on an HCP platform.

Closed-form upper bounds for ML-CAQR and ML-CALU, the detailed recursive
ML-CAQR bound, 1-level CAQR/CALU mapped onto the hierarchy, default block
sizes, call counts, and strong-scaling sweeps.  Logarithms are base 2 and
real-valued; ``O(.)`` terms of the bounds are dropped.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .platform import CostVector, LowerBounds, ValidatedPlatform, lower_bounds, with_top_nodes
from .schedule import BlockSchedule
from .vmachine import SCHEMA_VERSION

__all__ = [
    "ModelReport",
    "ALGORITHMS",
    "default_blocks",
    "calls_at_depth",
    "mlcaqr_cost",
    "mlcalu_cost",
    "onelevel_cost",
    "mlcaqr_detailed_bound",
    "rec_comm",
    "rec_bcast",
    "predict",
    "sweep",
    "report_rows",
    "write_csv",
    "CSV_COLUMNS",
]

ALGORITHMS = ("caqr", "calu", "mlcaqr", "mlcalu")
CSV_COLUMNS = ("algorithm", "n", "P", "level", "words", "messages", "comm_time_s", "flop_time_s",
               "total_time_s", "ccr", "bound_ratio", "schema_version")


def _lg(x: float) -> float:
    return math.log2(x) if x > 1 else 0.0


@dataclass(frozen=True)
class ModelReport:
    algorithm: str
    n: int
    platform: ValidatedPlatform
    cost: CostVector
    schedule: BlockSchedule | None = None
    detailed: CostVector | None = None  # detailed recursive bound (ML-CAQR only)
    notes: tuple[str, ...] = ()
    bounds: tuple[LowerBounds, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not self.bounds:
            bounds = tuple(lower_bounds(self.n, k, self.platform)
                           for k in range(1, self.platform.depth + 1))
            object.__setattr__(self, "bounds", bounds)

    @property
    def P(self) -> int:
        return self.platform.total_nodes

    @property
    def flops(self) -> float:
        return self.cost.flops

    @property
    def words(self) -> tuple[float, ...]:
        return self.cost.words

    @property
    def messages(self) -> tuple[float, ...]:
        return self.cost.messages

    @property
    def level_times(self) -> tuple[float, ...]:
        return self.cost.comm_time

    @property
    def total_time(self) -> float:
        return self.cost.total_time

    @property
    def ccr(self) -> float:
        return _ccr(self.cost)

    @property
    def bound_ratios(self) -> tuple[float, ...]:
        return tuple(w / b.words_bound for w, b in zip(self.cost.words, self.bounds))

    @property
    def message_bound_ratios(self) -> tuple[float, ...]:
        return tuple(s / b.messages_bound for s, b in zip(self.cost.messages, self.bounds))

    @property
    def detailed_ratio(self) -> tuple[float, ...] | None:
        """Per-level words of the detailed bound over the closed form."""
        if self.detailed is None:
            return None
        return tuple(d / c if c else math.inf if d else 1.0
                     for d, c in zip(self.detailed.words, self.cost.words))


def _ccr(cost: CostVector) -> float:
    comm = cost.comm_total
    if cost.flop_time == 0:
        return 0.0 if comm == 0 else math.inf
    return comm / cost.flop_time


def _vector(words, messages, flops, platform) -> CostVector:
    return CostVector.from_counts(list(words), list(messages), platform, flops)


# ---------------------------------------------------------------------------
# schedule helpers


def _largest_divisor_at_most(n: int, cap: int) -> int:
    cap = max(1, min(cap, n))
    best = 1
    i = 1
    while i * i <= n:
        if n % i == 0:
            for d in (i, n // i):
                if best < d <= cap:
                    best = d
        i += 1
    return best


def default_blocks(n: int, platform: ValidatedPlatform) -> BlockSchedule:
    """Block sizes ``b_k ~ n / (sqrt(sP_k) prod_{j>=k} log^2 P_j)`` that nest and divide ``n``.

    ``log2 P_j`` is clamped to 1 here so single-node levels do not divide by zero.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    depth = platform.depth
    blocks = [0] * depth
    upper = n
    for k in range(depth, 0, -1):
        logs = math.prod(max(_lg(platform.nodes(j)), 1.0) ** 2 for j in range(k, depth + 1))
        target = max(1, round(n / (math.sqrt(platform.sp(k)) * logs)))
        blocks[k - 1] = _largest_divisor_at_most(upper, target)
        upper = blocks[k - 1]
    return BlockSchedule(tuple(blocks))


def calls_at_depth(r: int, platform: ValidatedPlatform) -> float:
    """Upper bound ``N_r = 2^{l-r} prod_{j=r..l} log Pr_j`` on calls at recursion depth ``r``."""
    depth = platform.depth
    if not 1 <= r <= depth:
        raise ValueError(f"depth {r} outside 1..{depth}")
    return 2.0 ** (depth - r) * math.prod(_lg(platform.p_rows(j)) for j in range(r, depth + 1))


# ---------------------------------------------------------------------------
# recursive communication primitives (real-valued volumes)


def rec_comm(volume: float, r: int, platform: ValidatedPlatform) -> CostVector:
    """Point-to-point exchange of ``volume`` words between two level-``r`` nodes."""
    depth = platform.depth
    words = [0.0] * depth
    messages = [0.0] * depth
    if volume > 0:
        for k in range(1, r + 1):
            share = volume * platform.sp(r) / platform.sp(k)
            words[k - 1] = share
            messages[k - 1] = 1.0 if k == 1 else share / platform.level(k).buffer_words
    return _vector(words, messages, 0.0, platform)


def rec_bcast(volume: float, r: int, platform: ValidatedPlatform) -> CostVector:
    """Broadcast of ``volume`` words along a row of ``Pc_r`` level-``r`` nodes."""
    depth = platform.depth
    words = [0.0] * depth
    messages = [0.0] * depth
    steps = _lg(platform.p_cols(r))
    if volume > 0 and steps > 0:
        for k in range(1, r + 1):
            share = volume * platform.sp(r) * steps / platform.sp(k)
            words[k - 1] = share
            messages[k - 1] = (_lg(platform.p_cols(1)) if k == 1
                               else share / platform.level(k).buffer_words)
    return _vector(words, messages, 0.0, platform)


# ---------------------------------------------------------------------------
# level-1 base costs (CAQR on the P_1 grid of a single level-2 node)


def _caqr1(m: float, n: float, b: float, platform: ValidatedPlatform) -> CostVector:
    """1-level CAQR of an ``m x n`` matrix on ``Pr_1 x Pc_1`` with block ``b`` (leading terms)."""
    pr, pc = platform.p_rows(1), platform.p_cols(1)
    p = pr * pc
    lr, lc = _lg(pr), _lg(pc)
    b = min(b, n)
    flops = (2 * n * n * (3 * m - n) / (3 * p) + b * n * n / (2 * pc) + 3 * b * n * (2 * m - n) / (2 * pr)
             + (4 * b * b * n / 3 + n * n * (3 * b + 5) / (2 * pc)) * lr - b * b * n)
    words = (n * n / pc + b * n / 2) * lr + ((m * n - n * n / 2) / pr + 2 * n) * lc
    messages = 3 * (n / b) * lr + 2 * (n / b) * lc
    depth = platform.depth
    return _vector([words] + [0.0] * (depth - 1), [messages] + [0.0] * (depth - 1),
                   max(flops, 0.0), platform)


def _update1(m: float, n: float, w: float, b: float, platform: ValidatedPlatform) -> CostVector:
    """Applying the ``w`` reflectors of an ``m``-row panel to ``n`` columns on the P_1 grid."""
    pr, pc = platform.p_rows(1), platform.p_cols(1)
    lr, lc = _lg(pr), _lg(pc)
    flops = 4.0 * m * w * n / (pr * pc)
    words = (m * w / pr) * lc + (w * n / pc) * lr
    messages = (w / b) * (lr + lc)
    depth = platform.depth
    return _vector([words] + [0.0] * (depth - 1), [messages] + [0.0] * (depth - 1), flops, platform)


def mlcaqr_detailed_bound(n: int, platform: ValidatedPlatform, schedule: BlockSchedule) -> CostVector:
    """Detailed recursive upper bound of ML-CAQR on an ``n x n`` matrix (``l >= 2``)."""
    depth = platform.depth
    if depth < 2:
        raise ValueError("the detailed bound needs at least two levels")
    b = schedule.blocks
    m = float(n)
    b1, b2 = b[0], b[1]
    sp2 = math.sqrt(platform.sp(2))
    total = CostVector.zero(depth)

    total += _caqr1(m / sp2, b2, b1, platform).scale(n / b2)
    for r in range(2, depth + 1):
        br = b[r - 1]
        total += rec_bcast(m * br / math.sqrt(platform.sp(r)), r, platform).scale(n / br)
    total += _update1(m / sp2, n / sp2, b2, b1, platform).scale(n / b2)

    for r in range(2, depth + 1):
        br = b[r - 1]
        shrink = math.prod(math.sqrt(platform.nodes(j)) for j in range(2, r))
        calls = n * calls_at_depth(r, platform) / br
        if calls == 0:
            continue
        inner = (rec_comm(br * br / 2, r, platform)
                 + _caqr1(2 * br / shrink, b2, b1, platform).scale(br / b2))
        if r < depth:
            inner = (inner + rec_bcast(br * br, r, platform)
                     + _update1(br / shrink, n / sp2, b2, b1, platform).scale(br / b2))
        inner = (inner + rec_comm(br * n / math.sqrt(platform.sp(r)), r, platform)
                 + _update1(2 * br / shrink, n / sp2, b2, b1, platform).scale(br / b2))
        total += inner.scale(calls)
    return total


# ---------------------------------------------------------------------------
# closed forms


def onelevel_cost(algorithm: str, n: int, platform: ValidatedPlatform,
                  share_bandwidth: bool = True, latency_constant: float = 1.0) -> ModelReport:
    """Classical 1-level CAQR/CALU with every message crossing the top level.

    With ``share_bandwidth`` the effective top-level inverse bandwidth is
    multiplied by the number of level-1 nodes per top-level node
    (``P / sP_l``), which is how many concurrent exchanges share each link.
    """
    if algorithm not in ("caqr", "calu"):
        raise ValueError(f"unknown 1-level algorithm {algorithm!r}")
    depth = platform.depth
    p = platform.total_nodes
    lp = _lg(p)
    flops = (4.0 / 3.0 if algorithm == "caqr" else 2.0 / 3.0) * float(n) ** 3 / p
    words = [0.0] * depth
    messages = [0.0] * depth
    words[-1] = float(n) ** 2 / math.sqrt(p) * lp
    messages[-1] = latency_constant * math.sqrt(p) * lp ** 3
    top = platform.level(depth)
    sharing = platform.below(depth) if share_bandwidth else 1
    comm = [0.0] * depth
    comm[-1] = words[-1] * top.beta * sharing + messages[-1] * top.alpha
    cost = CostVector(tuple(words), tuple(messages), tuple(comm), flops, flops * platform.gamma)
    notes = (f"bandwidth shared by {sharing} concurrent exchanges",) if sharing > 1 else ()
    return ModelReport(algorithm, n, platform, cost, notes=notes)


def mlcaqr_cost(n: int, platform: ValidatedPlatform, schedule: BlockSchedule | None = None,
                share_bandwidth: bool = True) -> ModelReport:
    """Closed-form ML-CAQR bound plus the detailed recursive bound for comparison."""
    depth = platform.depth
    if depth == 1:
        base = onelevel_cost("caqr", n, platform, share_bandwidth)
        return ModelReport("mlcaqr", n, platform, base.cost, notes=base.notes)
    schedule = schedule or default_blocks(n, platform)
    l = depth
    p = platform.total_nodes
    lg = [_lg(platform.nodes(j)) for j in range(1, l + 1)]
    n2 = float(n) ** 2
    words = [0.0] * l
    messages = [0.0] * l
    words[0] = n2 / math.sqrt(p) * (l * lg[0] + lg[-1] + 4 * l * math.prod(lg))
    messages[0] = l * math.sqrt(p) * math.prod(x ** 3 for x in lg)
    for k in range(2, l):
        root = math.sqrt(platform.sp(k))
        tail = math.prod(lg[k - 1:])
        words[k - 1] = (l - k) * n2 / root * (1 + 2 * tail / math.sqrt(platform.nodes(l)))
        messages[k - 1] = (n2 / (platform.level(k).buffer_words * root)) * (l - k) * lg[k - 1]
    root_l = math.sqrt(platform.nodes(l))
    mid = math.prod(math.sqrt(platform.nodes(j)) for j in range(2, l))
    words[-1] = n2 / math.sqrt(platform.sp(l)) * lg[-1]
    messages[-1] = n2 / (platform.level(l).buffer_words * root_l) * lg[-1] * (1 + 1 / mid)
    flops = 4.0 * float(n) ** 3 / p
    cost = _vector(words, messages, flops, platform)
    detailed = mlcaqr_detailed_bound(n, platform, schedule)
    return ModelReport("mlcaqr", n, platform, cost, schedule, detailed,
                       notes=("lower-order O(.) terms dropped",))


def mlcalu_cost(n: int, platform: ValidatedPlatform, schedule: BlockSchedule | None = None,
                share_bandwidth: bool = True) -> ModelReport:
    """Closed-form 2D ML-CALU bound (``l >= 2``; ``l = 1`` is 1-level CALU)."""
    depth = platform.depth
    if depth == 1:
        base = onelevel_cost("calu", n, platform, share_bandwidth)
        return ModelReport("mlcalu", n, platform, base.cost, notes=base.notes)
    l = depth
    p = platform.total_nodes
    lg = [_lg(platform.nodes(j)) for j in range(1, l + 1)]
    n2, n3 = float(n) ** 2, float(n) ** 3
    notes = ["lower-order O(.) terms dropped"]
    flops = 2 * n3 / (3 * p) + n3 / p * (3 / 8) ** (l - 2) * (5 * l / 16 - 53 / 128)
    if lg[-1] > 0:
        flops += n3 / (p * lg[-1] ** 2)
    else:
        notes.append("n^3/(P log^2 P_l) term dropped: P_l = 1")
    halves = [1 + 0.5 * x for x in lg]
    head = n2 / (2 * math.sqrt(p)) * lg[0] * math.prod(halves[1:])
    tail3 = math.prod(halves[2:])
    words = [0.0] * l
    messages = [0.0] * l
    for k in range(1, l + 1):
        factor = (8 / 3 * lg[-1] ** 2 * (1 + (l - k) / math.sqrt(platform.nodes(k)))
                  + (l - 2) / 8 * (1 + l / 4) * tail3)
        root = math.sqrt(platform.sp(k))
        words[k - 1] = n2 / root * factor
        messages[k - 1] = n2 / (platform.level(k).buffer_words * root) * factor
    words[0] += head
    messages[0] += head
    cost = _vector(words, messages, max(flops, 0.0), platform)
    return ModelReport("mlcalu", n, platform, cost, schedule, notes=tuple(notes))


def predict(algorithm: str, n: int, platform: ValidatedPlatform,
            schedule: BlockSchedule | None = None, share_bandwidth: bool = True) -> ModelReport:
    if algorithm in ("caqr", "calu"):
        return onelevel_cost(algorithm, n, platform, share_bandwidth)
    if algorithm == "mlcaqr":
        return mlcaqr_cost(n, platform, schedule, share_bandwidth)
    if algorithm == "mlcalu":
        return mlcalu_cost(n, platform, schedule, share_bandwidth)
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHMS}")


def sweep(algorithm: str, platform: ValidatedPlatform, n_list: Iterable[int],
          top_nodes: Iterable[int] | None = None, share_bandwidth: bool = True) -> list[ModelReport]:
    """Reports for every ``(n, top-level node count)`` pair, in input order."""
    tops = list(top_nodes) if top_nodes is not None else [None]
    out = []
    for n in n_list:
        for t in tops:
            plat = platform if t is None else with_top_nodes(platform, t)
            out.append(predict(algorithm, int(n), plat, share_bandwidth=share_bandwidth))
    return out


def report_rows(report: ModelReport) -> list[dict]:
    """One CSV row per level."""
    rows = []
    for k in range(report.platform.depth):
        rows.append({
            "algorithm": report.algorithm,
            "n": report.n,
            "P": report.P,
            "level": k + 1,
            "words": report.words[k],
            "messages": report.messages[k],
            "comm_time_s": report.level_times[k],
            "flop_time_s": report.cost.flop_time,
            "total_time_s": report.total_time,
            "ccr": report.ccr,
            "bound_ratio": report.bound_ratios[k],
            "schema_version": SCHEMA_VERSION,
        })
    return rows


def write_csv(reports: Sequence[ModelReport], stream: io.TextIOBase | None = None) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        writer.writerows(report_rows(r))
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text
