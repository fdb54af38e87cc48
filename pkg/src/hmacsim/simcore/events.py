"""Totally ordered future-event set."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

KINDS = frozenset(
    {"frame_boundary", "window_edge", "tx_start", "tx_end", "slot_edge", "packet_arrival", "timer"}
)


class CausalityError(RuntimeError):
    """An event was scheduled before the current clock."""


@dataclass(order=True)
class Event:
    time: int
    seq: int
    kind: str = field(compare=False)
    subject: int = field(compare=False, default=-1)
    payload: Any = field(compare=False, default=None)
    action: Callable[["Event"], None] | None = field(compare=False, default=None, repr=False)


class EventQueue:
    def __init__(self):
        self._heap: list[Event] = []
        self._seq = 0
        self.now = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, time: int, kind: str, subject: int = -1, payload=None, action=None) -> Event:
        if kind not in KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        if time < self.now:
            raise CausalityError(f"event at {time} scheduled at clock {self.now}")
        ev = Event(int(time), self._seq, kind, subject, payload, action)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def peek_time(self) -> int | None:
        return self._heap[0].time if self._heap else None

    def pop(self) -> Event:
        ev = heapq.heappop(self._heap)
        if ev.time < self.now:
            raise CausalityError(f"clock would move back from {self.now} to {ev.time}")
        self.now = ev.time
        return ev
