"""Line-oriented event trace.

One record per line, space separated, fixed field order::

    tick seq kind subject frame_kind src dst slots

Missing fields are written as ``-``; ``slots`` is a comma-joined list.
Besides the queue event kinds, reception outcomes are logged as
``rx_ok``, ``rx_corrupt`` and ``rx_missed`` with the receiving node as
subject and the seq of the ``tx_end`` that produced them.
"""

from __future__ import annotations

from typing import NamedTuple


class TraceRecord(NamedTuple):
    tick: int
    seq: int
    kind: str
    subject: int
    frame_kind: str | None = None
    src: int | None = None
    dst: int | None = None
    slots: tuple[int, ...] | None = None

    def format(self) -> str:
        def f(x):
            return "-" if x is None else str(x)

        slots = "-" if self.slots is None else (",".join(map(str, self.slots)) or "[]")
        return f"{self.tick} {self.seq} {self.kind} {self.subject} {f(self.frame_kind)} {f(self.src)} {f(self.dst)} {slots}"


def parse_line(line: str) -> TraceRecord:
    parts = line.split()
    if len(parts) != 8:
        raise ValueError(f"trace line needs 8 fields: {line!r}")
    tick, seq, kind, subject, fk, src, dst, slots = parts

    def opt(x):
        return None if x == "-" else int(x)

    if slots == "-":
        sl = None
    elif slots == "[]":
        sl = ()
    else:
        sl = tuple(int(s) for s in slots.split(","))
    return TraceRecord(int(tick), int(seq), kind, int(subject), None if fk == "-" else fk, opt(src), opt(dst), sl)


def dumps(records) -> str:
    return "".join(r.format() + "\n" for r in records)
