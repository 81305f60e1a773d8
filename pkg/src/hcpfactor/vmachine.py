"""Instrumented simulated machine.

Algorithms record communications and flops into a :class:`CommLedger`.
Regions compose the records: sequential regions add up, parallel regions
take the component-wise maximum over their branches for the critical path
and the sum (times a declared multiplicity) for aggregate volume.

Since every algorithm here is symmetric across grid nodes, a parallel
region usually runs one representative branch and declares how many
identical branches it stands for::

    with ledger.parallel(multiplicity=p_rows):
        ledger.record_flops(leaf_flops)
"""

from __future__ import annotations

import json
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field

from .errors import NoOpenRegion, UnbalancedRegions
from .platform import CostVector, ValidatedPlatform, bcast_rounds, p2p_counts

SCHEMA_VERSION = 1

__all__ = ["Counts", "CommEvent", "CommLedger", "maybe_parallel", "maybe_branch"]


@dataclass
class Counts:
    """Per-level critical-path words/messages plus aggregate totals."""

    words: list[float]
    messages: list[float]
    aggregate_words: list[float]
    flops: float = 0.0
    aggregate_flops: float = 0.0

    @classmethod
    def zero(cls, depth: int) -> "Counts":
        return cls([0.0] * depth, [0.0] * depth, [0.0] * depth)

    def add(self, other: "Counts", times: float = 1.0) -> None:
        for k in range(len(self.words)):
            self.words[k] += other.words[k]
            self.messages[k] += other.messages[k]
            self.aggregate_words[k] += times * other.aggregate_words[k]
        self.flops += other.flops
        self.aggregate_flops += times * other.aggregate_flops

    def copy(self) -> "Counts":
        return Counts(list(self.words), list(self.messages), list(self.aggregate_words),
                      self.flops, self.aggregate_flops)

    def __add__(self, other: "Counts") -> "Counts":
        out = self.copy()
        out.add(other)
        return out


@dataclass(frozen=True)
class CommEvent:
    kind: str  # "p2p" or "bcast"
    level: int
    volume: float
    fanout: int
    words: tuple[float, ...]
    messages: tuple[float, ...]
    tag: str = ""


@dataclass
class _Frame:
    kind: str
    multiplicity: int = 1
    counts: Counts | None = None
    branches: list[Counts] = field(default_factory=list)


class CommLedger:
    """Record of one simulated run on ``platform``.

    A ledger belongs to one run; separate runs use separate ledgers.
    """

    def __init__(self, platform: ValidatedPlatform, keep_events: bool = True):
        self.platform = platform
        self.depth = platform.depth
        self.keep_events = keep_events
        self.events: list[CommEvent] = []
        self._stack: list[_Frame] = [_Frame("sequential", counts=Counts.zero(self.depth))]

    # -- regions ---------------------------------------------------------

    @property
    def open_regions(self) -> int:
        return len(self._stack) - 1

    def begin_sequential(self) -> None:
        self._stack.append(_Frame("sequential", counts=Counts.zero(self.depth)))

    def begin_parallel(self, multiplicity: int = 1) -> None:
        if multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")
        self._stack.append(_Frame("parallel", multiplicity=multiplicity))

    def begin_branch(self) -> None:
        if self._stack[-1].kind != "parallel":
            raise NoOpenRegion("branch() needs an open parallel region")
        self._stack.append(_Frame("branch", counts=Counts.zero(self.depth)))

    def end_region(self) -> None:
        if len(self._stack) == 1:
            raise NoOpenRegion("no open region to close")
        frame = self._stack.pop()
        if frame.kind == "parallel":
            self._close_parallel(frame)
            return
        parent = self._stack[-1]
        if frame.kind == "branch":
            parent.branches.append(frame.counts)
        else:
            self._target().add(frame.counts)

    def _close_parallel(self, frame: _Frame) -> None:
        out = Counts.zero(self.depth)
        for br in frame.branches:
            for k in range(self.depth):
                out.words[k] = max(out.words[k], br.words[k])
                out.messages[k] = max(out.messages[k], br.messages[k])
                out.aggregate_words[k] += br.aggregate_words[k]
            out.flops = max(out.flops, br.flops)
            out.aggregate_flops += br.aggregate_flops
        self._target().add(out, times=frame.multiplicity)

    def _target(self) -> Counts:
        frame = self._stack[-1]
        if frame.kind == "parallel":
            # records made directly inside a parallel region form one implicit branch
            if frame.counts is None:
                frame.counts = Counts.zero(self.depth)
                frame.branches.append(frame.counts)
            return frame.counts
        return frame.counts

    @contextmanager
    def sequential(self):
        self.begin_sequential()
        try:
            yield self
        finally:
            self.end_region()

    @contextmanager
    def parallel(self, multiplicity: int = 1):
        self.begin_parallel(multiplicity)
        try:
            yield self
        finally:
            self.end_region()

    @contextmanager
    def branch(self):
        self.begin_branch()
        try:
            yield self
        finally:
            self.end_region()

    # -- records ---------------------------------------------------------

    def record_p2p(self, volume: float, level: int, tag: str = "") -> None:
        words, messages = p2p_counts(volume, level, self.platform)
        if volume == 0:
            return
        target = self._target()
        for k in range(self.depth):
            target.words[k] += words[k]
            target.messages[k] += messages[k]
        for k in range(level):
            target.aggregate_words[k] += volume
        if self.keep_events:
            self.events.append(CommEvent("p2p", level, float(volume), 2, words, messages, tag))

    def record_bcast(self, volume: float, level: int, fanout: int, tag: str = "") -> None:
        rounds = bcast_rounds(fanout)
        words, messages = p2p_counts(volume, level, self.platform)
        if volume == 0 or rounds == 0:
            return
        target = self._target()
        for k in range(self.depth):
            target.words[k] += rounds * words[k]
            target.messages[k] += rounds * messages[k]
        for k in range(level):
            # every receiver gets one copy
            target.aggregate_words[k] += (fanout - 1) * volume
        if self.keep_events:
            self.events.append(CommEvent("bcast", level, float(volume), fanout, words, messages, tag))

    def record_flops(self, flops: float) -> None:
        if flops < 0:
            raise ValueError("flop count must be non-negative")
        target = self._target()
        target.flops += flops
        target.aggregate_flops += flops

    # -- results ---------------------------------------------------------

    @property
    def totals(self) -> Counts:
        if self.open_regions:
            raise UnbalancedRegions(f"{self.open_regions} region(s) still open")
        return self._stack[0].counts.copy()

    def extend(self, other: "CommLedger") -> None:
        """Append ``other`` as a sequential continuation of this run."""
        self._target().add(other.totals)
        self.events.extend(other.events)

    def price(self) -> CostVector:
        return price(self)

    def to_dict(self) -> dict:
        t = self.totals
        return {
            "schema_version": SCHEMA_VERSION,
            "levels": {
                str(k + 1): {
                    "words": t.words[k],
                    "messages": t.messages[k],
                    "aggregate_words": t.aggregate_words[k],
                }
                for k in range(self.depth)
            },
            "flops": t.flops,
            "aggregate_flops": t.aggregate_flops,
            "events": len(self.events),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def price(ledger: CommLedger) -> CostVector:
    t = ledger.totals
    return CostVector.from_counts(t.words, t.messages, ledger.platform, t.flops)


def maybe_parallel(ledger: CommLedger | None, multiplicity: int = 1):
    """``ledger.parallel(...)`` or a no-op when the run is not instrumented."""
    if ledger is None:
        return nullcontext()
    return ledger.parallel(multiplicity)


def maybe_branch(ledger: CommLedger | None):
    if ledger is None:
        return nullcontext()
    return ledger.branch()
