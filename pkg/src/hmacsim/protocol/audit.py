"""Trace audit: do slots negotiated without interference stay collision free?

A negotiation is *clean* when its ATIM, ATIM_ACK and ATIM_RES were each
decoded by every link neighbour of the node that sent them.  Those are
the frames that teach the neighbourhood which slots are taken, so a DATA
collision in a cleanly negotiated slot means the reservation scheme
itself failed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from hmacsim.protocol.frames import FrameConfig
from hmacsim.simcore.trace import TraceRecord, parse_line

_HANDSHAKE = ("ATIM", "ATIM_ACK", "ATIM_RES")


@dataclass(frozen=True)
class AuditReport:
    clean_negotiations: int
    clean_slots_used: int
    collisions: list[tuple[int, int, int, int]]  # (frame, slot, sender, receiver)

    @property
    def ok(self) -> bool:
        return not self.collisions


def _transmissions(records):
    """tx_end records keyed by seq, each with its reception outcomes."""
    ends: dict[int, TraceRecord] = {}
    outcomes: dict[int, list[str]] = defaultdict(list)
    rx_at: dict[int, dict[int, str]] = defaultdict(dict)
    for r in records:
        if r.kind == "tx_end":
            ends[r.seq] = r
        elif r.kind.startswith("rx_"):
            outcomes[r.seq].append(r.kind)
            rx_at[r.seq][r.subject] = r.kind
    return ends, outcomes, rx_at


def audit_reservations(records, cfg: FrameConfig) -> AuditReport:
    records = [parse_line(r) if isinstance(r, str) else r for r in records]
    ends, outcomes, rx_at = _transmissions(records)
    cycle = cfg.cycle_ticks

    # (frame, minislot, initiator, responder) -> {kind: all neighbours ok}
    steps: dict[tuple, dict[str, bool]] = defaultdict(dict)
    granted: dict[tuple, tuple[int, ...]] = {}
    for seq in sorted(ends):
        r = ends[seq]
        if r.frame_kind not in _HANDSHAKE:
            continue
        frame, offset = divmod(r.tick, cycle)
        if offset > cfg.active_ticks:
            continue
        minislot = (offset - 1) // cfg.minislot_ticks
        initiator, responder = (r.src, r.dst) if r.frame_kind != "ATIM_ACK" else (r.dst, r.src)
        key = (frame, minislot, initiator, responder)
        steps[key][r.frame_kind] = all(o == "rx_ok" for o in outcomes[seq])
        if r.frame_kind == "ATIM_RES":
            granted[key] = r.slots or ()

    clean: set[tuple[int, int, int, int]] = set()
    negotiations = 0
    for key, seen in steps.items():
        if all(seen.get(k) for k in _HANDSHAKE) and key in granted:
            negotiations += 1
            frame, _, a, b = key
            for s in granted[key]:
                clean.add((frame, s, a, b))

    used = 0
    collisions = []
    data_by_slot: dict[tuple[int, int, int, int], list[int]] = defaultdict(list)
    for seq in sorted(ends):
        r = ends[seq]
        if r.frame_kind not in ("DATA", "DATA_ACK"):
            continue
        frame, offset = divmod(r.tick, cycle)
        slot = (offset - cfg.active_ticks) // cfg.slot_ticks
        a, b = (r.src, r.dst) if r.frame_kind == "DATA" else (r.dst, r.src)
        data_by_slot[(frame, slot, a, b)].append(seq)
    for key in sorted(data_by_slot):
        if key not in clean:
            continue
        used += 1
        for seq in data_by_slot[key]:
            r = ends[seq]
            if rx_at[seq].get(r.dst) == "rx_corrupt":
                collisions.append(key)
                break
    return AuditReport(negotiations, used, collisions)
