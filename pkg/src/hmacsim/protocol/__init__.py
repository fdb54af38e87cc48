"""Per-node MAC behaviour for H-MAC and the S-MAC baseline."""

from hmacsim.protocol.frames import (
    FrameConfig,
    FrameKind,
    NodeState,
    Packet,
    SlotLedger,
    WireFrame,
)
from hmacsim.protocol.hmac import (
    HMac,
    NoFreeSlotError,
    ReservationAborted,
    WindowExhaustedError,
    atim_window_access,
    compose_atim,
    confirm_reservation,
    forward_chain_reserve,
    grant_slots,
)
from hmacsim.protocol.smac import SMac, smac_frame_step


def make_mac(name: str, sim):
    if name == "hmac":
        return HMac(sim)
    if name == "smac":
        return SMac(sim)
    raise ValueError(f"unknown protocol {name!r}")
