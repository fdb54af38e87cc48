"""Discrete-event engine: clock, broadcast collision channel, radios, energy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hmacsim.metrics import Delivery, MetricsLedger
from hmacsim.protocol.frames import NodeState, Packet, WireFrame
from hmacsim.simcore.energy import EnergyLedger
from hmacsim.simcore.events import Event, EventQueue
from hmacsim.simcore.trace import TraceRecord
from hmacsim.simcore.traffic import traffic_source

OK = "ok"
CORRUPT = "corrupt"
MISSED = "missed"


@dataclass
class Transmission:
    id: int
    src: int
    frame: WireFrame
    start: int
    end: int


class Simulator:
    """One replication of a scenario.

    The MAC object (H-MAC or S-MAC) owns protocol behaviour; the simulator
    owns time, the channel, radio state and bookkeeping.
    """

    def __init__(self, scenario, seed: int, trace: bool = False):
        from hmacsim.protocol import make_mac

        self.scenario = scenario
        self.seed = seed
        self.cfg = scenario.frame
        self.topology = scenario.topology
        self.sink = scenario.sink
        self.cycle = self.cfg.cycle_ticks
        self.horizon = scenario.horizon * self.cycle
        self.queue = EventQueue()
        self.trace_enabled = trace
        self.trace: list[TraceRecord] = []

        ids = sorted(self.topology.nodes)
        routes = self.topology.routes_to(self.sink)
        self.nodes: dict[int, NodeState] = {
            n: NodeState(
                n,
                self.cfg.data_slots,
                routes={self.sink: routes[n]} if n in routes else {},
                queue_capacity=self.cfg.queue_capacity,
            )
            for n in ids
        }
        ss = np.random.SeedSequence(seed)
        traffic_ss, *node_ss = ss.spawn(1 + len(ids))
        self.traffic_rng = np.random.default_rng(traffic_ss)
        self._node_rng = {n: np.random.default_rng(s) for n, s in zip(ids, node_ss)}

        # radio state
        self.awake = dict.fromkeys(ids, False)
        self.wake_tick = dict.fromkeys(ids, 0)
        self.tx_count = dict.fromkeys(ids, 0)
        self.audible = dict.fromkeys(ids, 0)
        self.last_sensed = dict.fromkeys(ids, -1)
        self.mode = dict.fromkeys(ids, "sleep")
        self.mode_since = dict.fromkeys(ids, 0)
        self.energy = EnergyLedger(ids, self.cfg.tick)

        self._recent: list[Transmission] = []
        self._tx_ids = 0
        self._max_air = max(self.cfg.data_ticks, self.cfg.ctrl_ticks)

        self.packets: dict[int, Packet] = {}
        self._held: set[tuple[int, int]] = set()
        self._delivered: set[int] = set()
        self.metrics = MetricsLedger(
            scenario_key=scenario.key,
            seed=seed,
            horizon=self.horizon,
            tick_seconds=self.cfg.tick,
            cycle_ticks=self.cycle,
            warmup_frames=scenario.warmup_frames,
        )
        self.mac = make_mac(scenario.protocol, self)

    # -- time ----------------------------------------------------------
    @property
    def now(self) -> int:
        return self.queue.now

    def frame_of(self, tick: int) -> int:
        return tick // self.cycle

    def frame_start(self, frame: int) -> int:
        return frame * self.cycle

    def rng_for(self, node: int) -> np.random.Generator:
        return self._node_rng[node]

    def schedule(self, time: int, kind: str, action, subject: int = -1, payload=None) -> Event:
        return self.queue.schedule(time, kind, subject, payload, action)

    def _log(self, ev: Event) -> None:
        p = ev.payload
        if isinstance(p, WireFrame):
            rec = TraceRecord(ev.time, ev.seq, ev.kind, ev.subject, str(p.kind), p.src, p.dst, p.slot_list)
        elif isinstance(p, Transmission):
            f = p.frame
            rec = TraceRecord(ev.time, ev.seq, ev.kind, ev.subject, str(f.kind), f.src, f.dst, f.slot_list)
        else:
            rec = TraceRecord(ev.time, ev.seq, ev.kind, ev.subject)
        self.trace.append(rec)

    # -- radio -----------------------------------------------------------
    def _refresh(self, n: int) -> None:
        if not self.awake[n]:
            m = "sleep"
        elif self.tx_count[n]:
            m = "tx"
        elif self.audible[n]:
            m = "rx"
        else:
            m = "idle_listen"
        if m != self.mode[n]:
            now = self.now
            self.energy.account_energy(n, self.mode[n], self.mode_since[n], now)
            self.mode[n] = m
            self.mode_since[n] = now
            self.nodes[n].radio_mode = m

    def wake(self, n: int) -> None:
        if not self.awake[n]:
            self.awake[n] = True
            self.wake_tick[n] = self.now
            self._refresh(n)

    def sleep(self, n: int) -> None:
        if self.tx_count[n]:
            raise AssertionError(f"node {n} put to sleep mid-transmission")
        if self.awake[n]:
            self.awake[n] = False
            self._refresh(n)

    # -- channel ---------------------------------------------------------
    def transmit(self, src: int, frame: WireFrame, start: int | None = None) -> Event:
        """Put ``frame`` on the air at ``start`` (default: now)."""
        start = self.now if start is None else start
        return self.schedule(start, "tx_start", self._start_tx, subject=src, payload=frame)

    def _start_tx(self, ev: Event) -> None:
        src, frame = ev.subject, ev.payload
        if not self.awake[src]:
            raise AssertionError(f"node {src} transmits while asleep")
        tx = Transmission(self._tx_ids, src, frame, ev.time, ev.time + frame.tx_time)
        self._tx_ids += 1
        self._recent.append(tx)
        self.tx_count[src] += 1
        self._refresh(src)
        for n in self.topology.interference[src]:
            self.audible[n] += 1
            if self.awake[n]:
                self.last_sensed[n] = ev.time
            self._refresh(n)
        self.mac.on_tx_start(src, frame)
        self.schedule(tx.end, "tx_end", self._end_tx, subject=src, payload=tx)

    def _outcome(self, tx: Transmission, r: int) -> str:
        if not self.awake[r] or self.wake_tick[r] > tx.start:
            return MISSED
        heard = self.topology.interference[r]
        for o in self._recent:
            if o.id == tx.id or o.start >= tx.end or o.end <= tx.start:
                continue
            if o.src == r:
                return MISSED
            if o.src in heard:
                return CORRUPT
        return OK

    def _end_tx(self, ev: Event) -> None:
        tx: Transmission = ev.payload
        src = tx.src
        self.tx_count[src] -= 1
        self._refresh(src)
        for n in self.topology.interference[src]:
            self.audible[n] -= 1
            self._refresh(n)
        outcomes = [(r, self._outcome(tx, r)) for r in sorted(self.topology.links[src])]
        if self.trace_enabled:
            f = tx.frame
            for r, out in outcomes:
                self.trace.append(TraceRecord(ev.time, ev.seq, f"rx_{out}", r, str(f.kind), f.src, f.dst, f.slot_list))
        horizon = ev.time - self._max_air
        if len(self._recent) > 64:
            self._recent = [o for o in self._recent if o.end >= horizon]
        for r, out in outcomes:
            self.mac.on_receive(r, tx.frame, out)
        self.mac.on_tx_end(src, tx.frame)

    # -- packets ---------------------------------------------------------
    def _arrival(self, ev: Event) -> None:
        pkt: Packet = ev.payload
        self.metrics.generated += 1
        self.metrics.created[pkt.id] = (pkt.created, pkt.source, pkt.sink)
        self._held.add((pkt.id, pkt.source))
        self.metrics.hop_log.append((pkt.id, pkt.source, self.frame_of(ev.time)))
        if not self.nodes[pkt.source].enqueue(pkt):
            self.metrics.dropped += 1

    def accept_packet(self, node: int, pkt: Packet) -> bool:
        """Hand a received DATA payload to ``node``; False for duplicates."""
        key = (pkt.id, node)
        if key in self._held:
            return False
        self._held.add(key)
        pkt.hops += 1
        self.metrics.hop_log.append((pkt.id, node, self.frame_of(self.now)))
        if node == pkt.sink:
            if pkt.id not in self._delivered:
                self._delivered.add(pkt.id)
                self.metrics.deliveries.append(
                    Delivery(pkt.id, pkt.source, pkt.sink, pkt.created, self.now, pkt.hops)
                )
        elif not self.nodes[node].enqueue(pkt):
            self.metrics.dropped += 1
        return True

    def count_atim_sent(self) -> None:
        self.metrics.atim_sent += 1

    def count_atim_decoded(self) -> None:
        self.metrics.atim_decoded += 1

    # -- frames ----------------------------------------------------------
    def _frame_boundary(self, ev: Event) -> None:
        f = self.frame_of(ev.time)
        self.schedule(ev.time + self.cycle, "frame_boundary", self._frame_boundary)
        self.schedule(ev.time + self.cfg.active_ticks, "window_edge", self._window_end)
        self.mac.on_frame_start(f, ev.time)

    def _window_end(self, ev: Event) -> None:
        self.mac.on_window_end(self.frame_of(ev.time), ev.time - self.cfg.active_ticks)

    # -- run -------------------------------------------------------------
    def _schedule_traffic(self) -> None:
        tr = self.scenario.traffic
        pid = 0
        arrivals = []
        for src in tr.source_ids(self.topology, self.sink):
            ticks = traffic_source(
                src,
                tr.pattern,
                self.traffic_rng,
                self.cycle,
                self.horizon,
                start_frame=tr.start_frame,
                burst=tr.burst,
                rate=tr.rate,
                jitter=tr.jitter,
                count=tr.count,
            )
            arrivals.extend((t, src) for t in ticks)
        for t, src in sorted(arrivals, key=lambda a: a[0]):
            pkt = Packet(pid, src, self.sink, t)
            self.packets[pid] = pkt
            self.schedule(t, "packet_arrival", self._arrival, subject=src, payload=pkt)
            pid += 1

    def run(self) -> MetricsLedger:
        self._schedule_traffic()
        self.schedule(0, "frame_boundary", self._frame_boundary)
        q = self.queue
        while len(q) and q.peek_time() < self.horizon:
            ev = q.pop()
            if self.trace_enabled:
                self._log(ev)
            ev.action(ev)
        q.now = self.horizon
        for n in sorted(self.nodes):
            self.energy.account_energy(n, self.mode[n], self.mode_since[n], self.horizon)
            self.mode_since[n] = self.horizon
        m = self.metrics
        m.energy_ticks = self.energy.snapshot()
        m.idle_nodes = [n for n in sorted(self.nodes) if not (m.energy_ticks[n].get("tx") or m.energy_ticks[n].get("rx"))]
        m.energy_mj = {n: self.energy.energy_mj(n, self.scenario.energy) for n in sorted(self.nodes)}
        return m


def run(scenario, seed: int | None = None, trace: bool = False) -> MetricsLedger:
    """Run one replication; identical (scenario, seed) gives identical output."""
    sim = Simulator(scenario, scenario.seed if seed is None else seed, trace=trace)
    return sim.run()


def run_with_trace(scenario, seed: int | None = None) -> tuple[MetricsLedger, list[TraceRecord]]:
    sim = Simulator(scenario, scenario.seed if seed is None else seed, trace=True)
    ledger = sim.run()
    return ledger, sim.trace
