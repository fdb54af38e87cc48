"""H-MAC: ATIM-window slot negotiation, data in reserved sleep slots.

Handshake inside one ATIM mini-slot::

    A --ATIM [preferred]--> B      (B's neighbours ignore)
    B --ATIM_ACK [grant]--> A      (B's neighbours mark grant busy)
    A --ATIM_RES [confirm]--> B    (A's neighbours mark confirm busy)

A relay that just confirmed an inbound reservation may immediately
negotiate the next hop for later slots, so one packet can cross several
hops in one frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hmacsim.protocol.frames import (
    RECEIVE,
    SEND,
    FrameConfig,
    FrameKind,
    NodeState,
    WireFrame,
)


class NoFreeSlotError(RuntimeError):
    """Nothing left to propose; negotiation waits for the next frame."""


class ReservationAborted(RuntimeError):
    """No granted slot is still usable by the sender."""


class WindowExhaustedError(RuntimeError):
    """No later mini-slot or data slot remains for a forwarding handshake."""


def pair_later(inbound, candidates) -> list[int]:
    """Greedy match of each inbound slot to a strictly later candidate.

    Both inputs are treated as sorted; returns the chosen candidates in
    ascending order (one per matched inbound slot).
    """
    out = []
    cands = sorted(candidates)
    j = 0
    last = -1
    for s in sorted(inbound):
        floor = max(s, last)
        while j < len(cands) and cands[j] <= floor:
            j += 1
        if j == len(cands):
            break
        last = cands[j]
        out.append(last)
        j += 1
    return out


def compose_atim(
    node: NodeState,
    peer: int,
    want: int,
    after=None,
    tx_time: int = 0,
    payload_id: int | None = None,
) -> WireFrame:
    """ATIM proposing the ``want`` lowest free slots.

    With ``after`` (inbound slots of a relay), every proposed slot is later
    than the inbound slot it will forward.
    """
    if want < 1:
        raise ValueError("want must be positive")
    if after is None:
        head = node.head_for(peer)
        if head is None:
            raise ValueError(f"node {node.id} has nothing queued for {peer}")
        if payload_id is None:
            payload_id = head.id
    free = node.ledger.free_slots()
    slots = pair_later(after, free) if after is not None else free
    slots = slots[:want]
    if not slots:
        raise NoFreeSlotError(f"node {node.id} has no free slot for {peer}")
    return WireFrame(FrameKind.ATIM, node.id, peer, tuple(slots), payload_id, tx_time)


def grant_slots(receiver: NodeState, atim: WireFrame, tx_time: int = 0) -> WireFrame:
    """ATIM_ACK: proposed slots the receiver also has free.

    If none overlap the receiver falls back to its own lowest free slot;
    an empty grant means rejection.
    """
    if atim.kind is not FrameKind.ATIM or atim.dst != receiver.id:
        raise ValueError("grant_slots needs an ATIM addressed to the receiver")
    free = receiver.ledger.free_slots()
    fs = set(free)
    grant = [s for s in atim.slot_list if s in fs]
    if not grant:
        grant = free[:1]
    return WireFrame(FrameKind.ATIM_ACK, receiver.id, atim.src, tuple(grant), atim.payload_id, tx_time)


def confirm_reservation(sender: NodeState, ack: WireFrame, inbound=None, tx_time: int = 0) -> WireFrame:
    """ATIM_RES with the granted slots still free at the sender; commits them."""
    if ack.kind is not FrameKind.ATIM_ACK or ack.dst != sender.id:
        raise ValueError("confirm_reservation needs an ATIM_ACK addressed to the sender")
    fs = set(sender.ledger.free_slots())
    ok = [s for s in ack.slot_list if s in fs]
    if inbound is not None:
        ok = pair_later(inbound, ok)
    if not ok:
        raise ReservationAborted(f"node {sender.id}: no usable slot in grant {list(ack.slot_list)}")
    sender.ledger.commit(ok, ack.src, SEND)
    return WireFrame(FrameKind.ATIM_RES, sender.id, ack.src, tuple(ok), ack.payload_id, tx_time)


def commit_reservation(receiver: NodeState, res: WireFrame) -> list[int]:
    """Receiver side of a confirmed reservation; returns the committed slots."""
    slots = [s for s in res.slot_list if s not in receiver.ledger.mine]
    receiver.ledger.commit(slots, res.src, RECEIVE)
    return slots


def overhear(node: NodeState, frame: WireFrame) -> None:
    """Grants and confirmations between other nodes block those slots."""
    if frame.kind in (FrameKind.ATIM_ACK, FrameKind.ATIM_RES) and node.id not in (frame.src, frame.dst):
        node.ledger.neighborhood_busy.update(frame.slot_list)


def atim_window_access(node: NodeState, rng: np.random.Generator, minislots: int, after: int = -1) -> int:
    """Uniform mini-slot in ``(after, minislots)``; raises if none is left."""
    lo = after + 1
    if lo >= minislots:
        raise WindowExhaustedError(f"node {node.id}: no mini-slot after {after}")
    return int(rng.integers(lo, minislots))


@dataclass(frozen=True)
class ChainPlan:
    peer: int
    minislot: int
    inbound: tuple[int, ...]
    want: int
    payload_id: int | None = None


def forward_chain_reserve(
    node: NodeState,
    inbound,
    sink: int,
    current_minislot: int,
    rng: np.random.Generator,
    cfg: FrameConfig,
    payload_id: int | None = None,
) -> ChainPlan:
    """Plan the outbound handshake of a relay right after an inbound one."""
    peer = node.routes.get(sink)
    if peer is None:
        raise ValueError(f"node {node.id} has no route to {sink}")
    inbound = tuple(sorted(inbound))
    if not inbound or inbound[0] >= cfg.data_slots - 1:
        raise WindowExhaustedError(f"node {node.id}: no data slot after {inbound}")
    m = atim_window_access(node, rng, cfg.atim_minislots, after=current_minislot)
    return ChainPlan(peer, m, inbound, len(inbound), payload_id)


@dataclass
class _Handshake:
    peer: int
    minislot: int
    stage: str
    inbound: tuple[int, ...] | None = None


class HMac:
    def __init__(self, sim):
        self.sim = sim
        self.cfg: FrameConfig = sim.cfg
        self.frame = -1
        self.frame_tick = 0
        # (node, slot) -> packet in flight awaiting DATA_ACK
        self._inflight: dict[tuple[int, int], object] = {}
        self._acked: set[tuple[int, int]] = set()
        self._taken: dict[int, set[int]] = {}

    # -- helpers -----------------------------------------------------------
    def _minislot_start(self, m: int) -> int:
        return self.frame_tick + m * self.cfg.minislot_ticks

    def _current_minislot(self) -> int:
        return (self.sim.now - self.frame_tick) // self.cfg.minislot_ticks

    def _plan(self, node: NodeState, peer: int, minislot: int, inbound=None, payload_id=None) -> None:
        self._taken[node.id].add(minislot)
        self.sim.schedule(
            self._minislot_start(minislot),
            "timer",
            lambda ev: self._send_atim(node, peer, minislot, inbound, payload_id),
            subject=node.id,
        )

    # -- frame structure ---------------------------------------------------
    def on_frame_start(self, f: int, t0: int) -> None:
        sim = self.sim
        self.frame = f
        self.frame_tick = t0
        self._inflight.clear()
        self._acked.clear()
        for n, node in sim.nodes.items():
            node.ledger.reset(f)
            node.pending_handshakes.clear()
            self._taken[n] = set()
            sim.wake(n)
        for n in sorted(sim.nodes):
            node = sim.nodes[n]
            if not node.tx_queue:
                continue
            peer = node.next_hop(node.tx_queue[0])
            if peer is None:
                continue
            m = atim_window_access(node, sim.rng_for(n), self.cfg.atim_minislots)
            self._plan(node, peer, m)

    def _send_atim(self, node: NodeState, peer: int, minislot: int, inbound, payload_id) -> None:
        if inbound is None:
            want = min(node.queued_for(peer), self.cfg.request_limit)
            if want == 0:
                return
        else:
            want = len(inbound)
        try:
            atim = compose_atim(node, peer, want, after=inbound, tx_time=self.cfg.ctrl_ticks, payload_id=payload_id)
        except NoFreeSlotError:
            return
        node.pending_handshakes[peer] = _Handshake(peer, minislot, "atim", inbound)
        self.sim.count_atim_sent()
        self.sim.transmit(node.id, atim)

    def on_window_end(self, f: int, t0: int) -> None:
        sim = self.sim
        by_slot: dict[int, list[tuple[int, int, str]]] = {}
        for n in sorted(sim.nodes):
            sim.sleep(n)
            for s, (peer, direction) in sorted(sim.nodes[n].ledger.mine.items()):
                by_slot.setdefault(s, []).append((n, peer, direction))
        for s in sorted(by_slot):
            start = self.cfg.slot_start(t0, s)
            entries = by_slot[s]
            sim.schedule(start, "slot_edge", lambda ev, s=s, e=entries: self._begin_slot(s, e))
            sim.schedule(start + self.cfg.exchange_ticks, "slot_edge", lambda ev, s=s, e=entries: self._end_slot(s, e))

    def _begin_slot(self, s: int, entries) -> None:
        sim = self.sim
        for n, _, _ in entries:
            sim.wake(n)
        for n, peer, direction in entries:
            if direction != SEND:
                continue
            node = sim.nodes[n]
            pkt = node.pop_for(peer)
            if pkt is None:
                sim.sleep(n)
                continue
            self._inflight[(n, s)] = pkt
            sim.transmit(n, WireFrame(FrameKind.DATA, n, peer, (), pkt.id, self.cfg.data_ticks))

    def _end_slot(self, s: int, entries) -> None:
        sim = self.sim
        if any(sim.tx_count[n] for n, _, _ in entries):
            # a DATA_ACK ending on this very tick: let its tx_end run first
            sim.schedule(sim.now, "slot_edge", lambda ev: self._end_slot(s, entries))
            return
        for n, _, direction in entries:
            if direction == SEND and (n, s) in self._inflight:
                pkt = self._inflight.pop((n, s))
                if (n, s) not in self._acked:
                    sim.nodes[n].tx_queue.appendleft(pkt)
            sim.sleep(n)

    # -- channel callbacks -------------------------------------------------
    def on_tx_start(self, src: int, frame: WireFrame) -> None:
        pass

    def on_tx_end(self, src: int, frame: WireFrame) -> None:
        pass

    def on_receive(self, r: int, frame: WireFrame, outcome: str) -> None:
        if outcome != "ok":
            return
        sim = self.sim
        node = sim.nodes[r]
        kind = frame.kind
        if frame.dst != r:
            overhear(node, frame)
            return
        if kind is FrameKind.ATIM:
            sim.count_atim_decoded()
            ack = grant_slots(node, frame, tx_time=self.cfg.ctrl_ticks)
            sim.transmit(r, ack, sim.now + self.cfg.sifs_ticks)
        elif kind is FrameKind.ATIM_ACK:
            hs = node.pending_handshakes.get(frame.src)
            if hs is None or hs.stage != "atim" or frame.is_rejection:
                node.pending_handshakes.pop(frame.src, None)
                return
            try:
                res = confirm_reservation(node, frame, inbound=hs.inbound, tx_time=self.cfg.ctrl_ticks)
            except ReservationAborted:
                node.pending_handshakes.pop(frame.src, None)
                return
            hs.stage = "confirmed"
            sim.transmit(r, res, sim.now + self.cfg.sifs_ticks)
        elif kind is FrameKind.ATIM_RES:
            slots = commit_reservation(node, frame)
            if slots and self.cfg.forward_chain:
                self._chain(node, slots, frame.payload_id)
        elif kind is FrameKind.DATA:
            pkt = sim.packets[frame.payload_id]
            sim.accept_packet(r, pkt)
            sim.transmit(r, WireFrame(FrameKind.DATA_ACK, r, frame.src, (), frame.payload_id, self.cfg.ctrl_ticks),
                         sim.now + self.cfg.sifs_ticks)
        elif kind is FrameKind.DATA_ACK:
            s = (sim.now - self.frame_tick - self.cfg.active_ticks) // self.cfg.slot_ticks
            self._acked.add((r, s))

    def _chain(self, node: NodeState, inbound, payload_id) -> None:
        sim = self.sim
        if payload_id is None:
            return
        sink = sim.packets[payload_id].sink
        if sink == node.id:
            return
        try:
            plan = forward_chain_reserve(
                node, inbound, sink, self._current_minislot(), sim.rng_for(node.id), self.cfg, payload_id
            )
        except WindowExhaustedError:
            return
        if plan.minislot in self._taken[node.id]:
            # already holding that mini-slot for its own request
            return
        self._plan(node, plan.peer, plan.minislot, inbound=plan.inbound, payload_id=payload_id)
