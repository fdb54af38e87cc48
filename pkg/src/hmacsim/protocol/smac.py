"""S-MAC baseline: fixed listen/sleep schedule, contention at frame start.

No adaptive listening and no RTS/CTS; a node that wins the channel sends
a train of DATA/DATA_ACK pairs to a single neighbour, then everyone
returns to the shared sleep schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hmacsim.protocol.frames import FrameConfig, FrameKind, NodeState, WireFrame


@dataclass(frozen=True)
class SmacAction:
    backoff: int
    peer: int
    packets: int


def smac_frame_step(node: NodeState, rng: np.random.Generator, cfg: FrameConfig) -> SmacAction | None:
    """Backoff draw and exchange plan for one frame, or None with an empty queue."""
    if not node.tx_queue:
        return None
    peer = node.next_hop(node.tx_queue[0])
    if peer is None:
        return None
    backoff = int(rng.integers(0, cfg.cw_slots)) * cfg.backoff_ticks
    return SmacAction(backoff, peer, min(node.queued_for(peer), cfg.packets_per_exchange))


@dataclass
class _Exchange:
    src: int
    peer: int
    remaining: int
    pkt: object = None
    acked: bool = False


class SMac:
    def __init__(self, sim):
        self.sim = sim
        self.cfg: FrameConfig = sim.cfg
        self.frame_tick = 0
        self.window_open = False
        self.engaged: dict[int, _Exchange] = {}

    @property
    def _per_packet(self) -> int:
        c = self.cfg
        return c.data_ticks + c.sifs_ticks + c.ctrl_ticks + c.sifs_ticks

    def on_frame_start(self, f: int, t0: int) -> None:
        sim = self.sim
        self.frame_tick = t0
        self.window_open = True
        for n in sorted(sim.nodes):
            sim.wake(n)
        for n in sorted(sim.nodes):
            act = smac_frame_step(sim.nodes[n], sim.rng_for(n), self.cfg)
            if act is not None:
                sim.schedule(t0 + act.backoff, "timer", lambda ev, n=n, a=act: self._attempt(n, a), subject=n)

    def on_window_end(self, f: int, t0: int) -> None:
        self.window_open = False
        for n in sorted(self.sim.nodes):
            if n not in self.engaged:
                self.sim.sleep(n)

    def _busy(self, n: int) -> bool:
        sim = self.sim
        now = sim.now
        sensed = sim.last_sensed[n]
        return n in self.engaged or sim.tx_count[n] > 0 or self.frame_tick <= sensed < now

    def _attempt(self, n: int, act: SmacAction) -> None:
        sim = self.sim
        if self._busy(n):
            return
        end_of_frame = self.frame_tick + sim.cycle
        fit = (end_of_frame - sim.now) // self._per_packet
        count = min(act.packets, fit, sim.nodes[n].queued_for(act.peer))
        if count < 1:
            return
        ex = _Exchange(n, act.peer, count)
        self.engaged[n] = ex
        if act.peer not in self.engaged:
            self.engaged[act.peer] = ex
        self._send_next(ex)

    def _send_next(self, ex: _Exchange) -> None:
        sim = self.sim
        pkt = sim.nodes[ex.src].pop_for(ex.peer)
        if pkt is None:
            self._finish(ex)
            return
        ex.pkt = pkt
        ex.acked = False
        ex.remaining -= 1
        sim.transmit(ex.src, WireFrame(FrameKind.DATA, ex.src, ex.peer, (), pkt.id, self.cfg.data_ticks))
        sim.schedule(sim.now + self._per_packet, "timer", lambda ev: self._after_packet(ex), subject=ex.src)

    def _after_packet(self, ex: _Exchange) -> None:
        sim = self.sim
        if sim.tx_count[ex.src] or sim.tx_count[ex.peer]:
            sim.schedule(sim.now, "timer", lambda ev: self._after_packet(ex), subject=ex.src)
            return
        if not ex.acked:
            self.sim.nodes[ex.src].tx_queue.appendleft(ex.pkt)
            self._finish(ex)
            return
        if ex.remaining > 0:
            self._send_next(ex)
        else:
            self._finish(ex)

    def _finish(self, ex: _Exchange) -> None:
        sim = self.sim
        for n in (ex.src, ex.peer):
            if self.engaged.get(n) is ex:
                del self.engaged[n]
                if not self.window_open:
                    sim.sleep(n)

    def on_tx_start(self, src: int, frame: WireFrame) -> None:
        pass

    def on_tx_end(self, src: int, frame: WireFrame) -> None:
        pass

    def on_receive(self, r: int, frame: WireFrame, outcome: str) -> None:
        if outcome != "ok" or frame.dst != r:
            return
        sim = self.sim
        if frame.kind is FrameKind.DATA:
            sim.accept_packet(r, sim.packets[frame.payload_id])
            sim.transmit(r, WireFrame(FrameKind.DATA_ACK, r, frame.src, (), frame.payload_id, self.cfg.ctrl_ticks),
                         sim.now + self.cfg.sifs_ticks)
        elif frame.kind is FrameKind.DATA_ACK:
            ex = self.engaged.get(r)
            if ex is not None and ex.src == r and ex.pkt is not None and ex.pkt.id == frame.payload_id:
                ex.acked = True
