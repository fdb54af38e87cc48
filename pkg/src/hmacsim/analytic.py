"""Closed-form latency, throughput and request-collision models.

Everything here is a pure function of its arguments.  The simulator's
measurements are compared against these values, so nothing in this module
may depend on the simulator.

Symbols follow the usual duty-cycled MAC notation:

* ``T_f`` / ``T_fx`` -- cycle length, ``t_active + slot_count * t_slot``
* ``n_r`` -- hops a packet advances per H-MAC frame
* ``S_m`` -- ATIM contention mini-slots, ``N`` -- contenders
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

MAX_CONTENDERS = 64


class InvalidParameterError(ValueError):
    """A model parameter is outside its domain."""


class CapacityError(ValueError):
    """More data slots requested than a frame holds."""


@dataclass(frozen=True)
class TimingParams:
    t_cs: float
    t_tx: float
    t_active: float
    t_slot: float
    slot_count: int
    hops: int = 1
    # mean hops per frame; a measured n_r is rarely an integer
    reserved_hops: float = 1
    strict: bool = False

    def __post_init__(self):
        if self.t_cs < 0 or (self.strict and self.t_cs == 0):
            raise InvalidParameterError(f"t_cs must be positive, got {self.t_cs}")
        if self.t_cs == 0:
            warnings.warn("t_cs=0: zero carrier-sense delay", RuntimeWarning, stacklevel=3)
        for name in ("t_tx", "t_active", "t_slot"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if int(self.slot_count) != self.slot_count or self.slot_count < 1:
            raise InvalidParameterError(f"slot_count must be a positive integer, got {self.slot_count}")
        if int(self.hops) != self.hops or self.hops < 1:
            raise InvalidParameterError(f"hops must be a positive integer, got {self.hops}")
        if not self.reserved_hops >= 1:
            raise InvalidParameterError(f"reserved_hops must be >= 1, got {self.reserved_hops}")
        if not self.cycle > self.t_tx:
            raise InvalidParameterError("cycle length must exceed t_tx")

    @property
    def cycle(self) -> float:
        return self.t_active + self.slot_count * self.t_slot


@dataclass(frozen=True)
class ThroughputParams:
    packets_per_exchange: int
    peers_per_frame: int
    packet_time: float
    sleep_time: float

    def __post_init__(self):
        if int(self.packets_per_exchange) != self.packets_per_exchange or self.packets_per_exchange < 0:
            raise InvalidParameterError("packets_per_exchange must be a nonnegative integer")
        if int(self.peers_per_frame) != self.peers_per_frame or self.peers_per_frame < 1:
            raise InvalidParameterError("peers_per_frame must be a positive integer")
        if not (self.packet_time > 0 and self.sleep_time > 0):
            raise InvalidParameterError("packet_time and sleep_time must be positive")
        if self.sleep_time < self.packet_time:
            raise InvalidParameterError("sleep_time must be at least packet_time")


@dataclass(frozen=True)
class ContentionParams:
    contenders: int
    mini_slots: int

    def __post_init__(self):
        if int(self.contenders) != self.contenders or self.contenders < 1:
            raise InvalidParameterError(f"contenders must be a positive integer, got {self.contenders}")
        if self.contenders > MAX_CONTENDERS:
            raise InvalidParameterError(f"contenders > {MAX_CONTENDERS} not supported")
        if int(self.mini_slots) != self.mini_slots or self.mini_slots < 1:
            raise InvalidParameterError(f"mini_slots must be a positive integer, got {self.mini_slots}")


# -- latency ---------------------------------------------------------------

def ieee80211_latency(p: TimingParams) -> float:
    """Mean N-hop latency of contention MAC without sleeping."""
    return p.hops * (p.t_cs + p.t_tx)


def smac_latency(p: TimingParams) -> float:
    """Mean N-hop latency of S-MAC without adaptive listening.

    First-hop sleep delay is uniform over the cycle (mean ``T_f/2``); each
    further hop costs exactly one cycle.
    """
    t_f = p.cycle
    return p.hops * t_f - t_f / 2 + p.t_cs + p.t_tx


def smac_hop_delay(p: TimingParams, t_cs_prev: float, t_cs_curr: float) -> float:
    if t_cs_prev < 0 or t_cs_curr < 0:
        raise InvalidParameterError("carrier-sense samples must be nonnegative")
    return p.cycle + t_cs_curr - t_cs_prev


def smac_path_delay(p: TimingParams, first_sleep: float, t_cs: list[float]) -> float:
    """Closed form of the telescoped per-hop sum for one packet.

    ``t_cs`` holds one carrier-sense sample per hop; only the last survives.
    """
    if len(t_cs) != p.hops:
        raise InvalidParameterError("need one carrier-sense sample per hop")
    return first_sleep + (p.hops - 1) * p.cycle + t_cs[-1] + p.t_tx


def hmac_frame_length(p: TimingParams) -> float:
    return p.cycle


def hmac_latency(p: TimingParams, apply_frame_rounding: bool = False) -> float:
    """Mean H-MAC latency, ``hops * T_fx / n_r``.

    With ``apply_frame_rounding`` progress is quantized to whole frames:
    a packet needs ``ceil(hops / n_r)`` full frames.
    """
    t_fx = p.cycle
    if apply_frame_rounding:
        frames = math.ceil(Fraction(p.hops) / Fraction(p.reserved_hops))
        return frames * t_fx
    return p.hops * (t_fx / p.reserved_hops)


# -- throughput -----------------------------------------------------------

def duty_fraction(p: TimingParams) -> float:
    sleep = p.slot_count * p.t_slot
    return sleep / (p.t_active + sleep)


def smac_throughput(tp: ThroughputParams, p: TimingParams) -> float:
    """Packets per second when one peer is served per frame."""
    return tp.packets_per_exchange / (p.t_active + tp.sleep_time)


def hmac_throughput(tp: ThroughputParams, p: TimingParams) -> float:
    """Packets per second when up to ``peers_per_frame`` peers are served."""
    wanted = tp.packets_per_exchange * tp.peers_per_frame
    if wanted > p.slot_count:
        raise CapacityError(f"{wanted} data slots requested, frame has {p.slot_count}")
    return wanted / (p.t_active + p.slot_count * p.t_slot)


# -- request collisions ---------------------------------------------------

def _pmf_exact(n: int, c: ContentionParams) -> Fraction:
    if int(n) != n or n < 0 or n > c.contenders:
        raise InvalidParameterError(f"n={n} outside [0, {c.contenders}]")
    q = Fraction(1, c.mini_slots)
    return math.comb(c.contenders, n) * q**n * (1 - q) ** (c.contenders - n)


def collision_slot_pmf(n: int, c: ContentionParams) -> float:
    """P[a given mini-slot holds exactly ``n`` of the requests]."""
    return float(_pmf_exact(n, c))


def expected_slots_with(n: int, c: ContentionParams) -> float:
    return float(c.mini_slots * _pmf_exact(n, c))


def expected_collided(c: ContentionParams) -> float:
    """Mean number of requests sharing their mini-slot with another."""
    n = c.contenders
    keep = (1 - Fraction(1, c.mini_slots)) ** (n - 1)
    return float(n - n * keep)


def success_ratio(c: ContentionParams) -> float:
    return float((1 - Fraction(1, c.mini_slots)) ** (c.contenders - 1))
