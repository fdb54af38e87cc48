"""Frame timing, wire messages, slot ledgers and node state."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum

BROADCAST = -1


class ConfigError(ValueError):
    pass


def to_ticks(seconds: float, tick: float = 1e-6, name: str = "duration") -> int:
    """Convert seconds to integer ticks, refusing values that would round."""
    value = seconds / tick
    n = round(value)
    if abs(value - n) > 1e-6 * max(1.0, abs(value)):
        raise ConfigError(f"{name}={seconds!r} is not a whole number of {tick!r}s ticks")
    return int(n)


@dataclass(frozen=True)
class FrameConfig:
    """One active (ATIM) window followed by ``data_slots`` sleep slots.

    Durations are in seconds; ``*_ticks`` give the integer clock values the
    simulator runs on.
    """

    active_len: float = 0.1
    data_slots: int = 18
    slot_len: float = 0.05
    atim_minislots: int = 20
    guard: float = 0.005
    data_tx: float = 0.04
    ctrl_tx: float = 0.0005
    sifs: float = 0.0001
    cw_slots: int = 16
    backoff_slot: float = 0.001
    # S-MAC packets per exchange; None -> data_slots
    smac_packets: int | None = None
    forward_chain: bool = True
    # most slots one ATIM may ask for; None -> data_slots
    request_cap: int | None = None
    queue_capacity: int = 64
    tick: float = 1e-6

    def __post_init__(self):
        for name in ("data_slots", "atim_minislots", "cw_slots", "queue_capacity"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.smac_packets is not None and (int(self.smac_packets) != self.smac_packets or self.smac_packets < 1):
            raise ConfigError(f"smac_packets must be a positive integer, got {self.smac_packets!r}")
        if self.request_cap is not None and (int(self.request_cap) != self.request_cap or self.request_cap < 1):
            raise ConfigError(f"request_cap must be a positive integer, got {self.request_cap!r}")
        for name in ("active_len", "slot_len", "data_tx", "ctrl_tx", "backoff_slot", "tick"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("guard", "sifs"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        t = {name: to_ticks(getattr(self, name), self.tick, name)
        for name in ("active_len", "slot_len", "guard", "data_tx", "ctrl_tx", "sifs", "backoff_slot")}
        object.__setattr__(self, "_t", t)
        if t["slot_len"] < t["data_tx"] + t["sifs"] + t["ctrl_tx"] + t["guard"]:
            raise ConfigError("slot_len too short for DATA + DATA_ACK + guard")
        if self.minislot_ticks * self.atim_minislots != t["active_len"]:
            raise ConfigError("active_len must split evenly into atim_minislots")
        if self.minislot_ticks <= self.handshake_ticks:
            raise ConfigError(
                f"mini-slot ({self.minislot_ticks} ticks) does not exceed one ATIM handshake ({self.handshake_ticks})"
            )
        if self.cw_slots * t["backoff_slot"] >= t["active_len"]:
            raise ConfigError("contention window must fit inside the active window")

    # integer views
    @property
    def active_ticks(self) -> int:
        return self._t["active_len"]

    @property
    def slot_ticks(self) -> int:
        return self._t["slot_len"]

    @property
    def data_ticks(self) -> int:
        return self._t["data_tx"]

    @property
    def ctrl_ticks(self) -> int:
        return self._t["ctrl_tx"]

    @property
    def sifs_ticks(self) -> int:
        return self._t["sifs"]

    @property
    def backoff_ticks(self) -> int:
        return self._t["backoff_slot"]

    @property
    def minislot_ticks(self) -> int:
        return self._t["active_len"] // self.atim_minislots

    @property
    def handshake_ticks(self) -> int:
        return 3 * self.ctrl_ticks + 2 * self.sifs_ticks

    @property
    def exchange_ticks(self) -> int:
        """DATA, SIFS, DATA_ACK."""
        return self.data_ticks + self.sifs_ticks + self.ctrl_ticks

    @property
    def cycle_ticks(self) -> int:
        return self.active_ticks + self.data_slots * self.slot_ticks

    @property
    def cycle(self) -> float:
        return self.cycle_ticks * self.tick

    @property
    def duty_cycle(self) -> float:
        return self.active_ticks / self.cycle_ticks

    @property
    def mean_backoff(self) -> float:
        """Mean S-MAC carrier-sense delay in seconds."""
        return (self.cw_slots - 1) / 2 * self.backoff_slot

    @property
    def packets_per_exchange(self) -> int:
        return self.data_slots if self.smac_packets is None else self.smac_packets

    @property
    def request_limit(self) -> int:
        return self.data_slots if self.request_cap is None else min(self.request_cap, self.data_slots)

    def slot_start(self, frame_start: int, slot: int) -> int:
        return frame_start + self.active_ticks + slot * self.slot_ticks


class FrameKind(str, Enum):
    ATIM = "ATIM"
    ATIM_ACK = "ATIM_ACK"
    ATIM_RES = "ATIM_RES"
    DATA = "DATA"
    DATA_ACK = "DATA_ACK"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class WireFrame:
    kind: FrameKind
    src: int
    dst: int
    slot_list: tuple[int, ...] = ()
    payload_id: int | None = None
    tx_time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "slot_list", tuple(self.slot_list))
        if self.kind in (FrameKind.ATIM, FrameKind.ATIM_RES) and not self.slot_list:
            raise ValueError(f"{self.kind} needs a nonempty slot list")
        if self.kind in (FrameKind.DATA, FrameKind.DATA_ACK) and self.slot_list:
            raise ValueError(f"{self.kind} carries no slot list")
        if any(s < 0 for s in self.slot_list):
            raise ValueError("negative slot index")

    @property
    def is_rejection(self) -> bool:
        """An ATIM_ACK with no granted slots."""
        return self.kind is FrameKind.ATIM_ACK and not self.slot_list


@dataclass
class Packet:
    id: int
    source: int
    sink: int
    created: int
    hops: int = 0


SEND = "send"
RECEIVE = "receive"


@dataclass
class SlotLedger:
    data_slots: int
    mine: dict[int, tuple[int, str]] = field(default_factory=dict)
    neighborhood_busy: set[int] = field(default_factory=set)
    epoch: int = -1

    def reset(self, epoch: int) -> None:
        self.mine.clear()
        self.neighborhood_busy.clear()
        self.epoch = epoch

    def free_slots(self) -> list[int]:
        return [s for s in range(self.data_slots) if s not in self.mine and s not in self.neighborhood_busy]

    def commit(self, slots, peer: int, direction: str) -> None:
        for s in slots:
            if not 0 <= s < self.data_slots:
                raise ValueError(f"slot {s} outside [0, {self.data_slots})")
            if s in self.mine:
                raise ValueError(f"slot {s} already reserved")
        for s in slots:
            self.mine[s] = (peer, direction)


@dataclass
class NodeState:
    id: int
    data_slots: int
    routes: dict[int, int] = field(default_factory=dict)
    queue_capacity: int = 64
    tx_queue: deque[Packet] = field(default_factory=deque)
    ledger: SlotLedger = None
    radio_mode: str = "sleep"
    pending_handshakes: dict[int, dict] = field(default_factory=dict)

    def __post_init__(self):
        if self.ledger is None:
            self.ledger = SlotLedger(self.data_slots)

    def next_hop(self, packet: Packet) -> int | None:
        return self.routes.get(packet.sink)

    def enqueue(self, packet: Packet) -> bool:
        """Drop-tail; returns False when the packet was dropped."""
        if len(self.tx_queue) >= self.queue_capacity:
            return False
        self.tx_queue.append(packet)
        return True

    def queued_for(self, peer: int) -> int:
        return sum(1 for p in self.tx_queue if self.next_hop(p) == peer)

    def head_for(self, peer: int) -> Packet | None:
        for p in self.tx_queue:
            if self.next_hop(p) == peer:
                return p
        return None

    def pop_for(self, peer: int) -> Packet | None:
        for i, p in enumerate(self.tx_queue):
            if self.next_hop(p) == peer:
                del self.tx_queue[i]
                return p
        return None
