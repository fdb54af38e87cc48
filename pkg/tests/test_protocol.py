from collections import Counter, defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmacsim.protocol import make_mac
from hmacsim.protocol.audit import audit_reservations
from hmacsim.protocol.frames import (
    RECEIVE,
    SEND,
    ConfigError,
    FrameConfig,
    FrameKind,
    NodeState,
    Packet,
    SlotLedger,
    WireFrame,
    to_ticks,
)
from hmacsim.protocol.hmac import (
    NoFreeSlotError,
    ReservationAborted,
    WindowExhaustedError,
    atim_window_access,
    commit_reservation,
    compose_atim,
    confirm_reservation,
    forward_chain_reserve,
    grant_slots,
    overhear,
    pair_later,
)
from hmacsim.protocol.smac import smac_frame_step
from hmacsim.scenario import Scenario, TrafficSpec
from hmacsim.simcore.engine import run, run_with_trace
from hmacsim.simcore.trace import TraceRecord

CFG = FrameConfig()


def node(i, peer=None, queued=1, slots=18):
    n = NodeState(i, slots, routes={99: peer} if peer is not None else {})
    for k in range(queued):
        n.enqueue(Packet(k, i, 99, 0))
    return n


def atim(src, dst, slots):
    return WireFrame(FrameKind.ATIM, src, dst, tuple(slots), 0)


def ack(src, dst, slots):
    return WireFrame(FrameKind.ATIM_ACK, src, dst, tuple(slots), 0)


# -- frame config --------------------------------------------------------------


def test_default_frame_is_ten_percent_duty():
    assert CFG.cycle == pytest.approx(1.0)
    assert CFG.duty_cycle == pytest.approx(0.1)
    assert CFG.cycle_ticks == CFG.active_ticks + 18 * CFG.slot_ticks


@pytest.mark.parametrize(
    "kw",
    [
        {"data_slots": 0},
        {"slot_len": 0.04},
        {"atim_minislots": 3},
        {"atim_minislots": 100},
        {"ctrl_tx": 0.002},
        {"smac_packets": 0},
        {"request_cap": 0},
    ],
)
def test_invalid_frame_configs(kw):
    with pytest.raises(ConfigError):
        FrameConfig(**kw)


def test_durations_must_be_whole_ticks():
    with pytest.raises(ConfigError):
        to_ticks(1.5e-7)
    assert to_ticks(0.05) == 50_000


def test_handshake_frames_need_slots():
    with pytest.raises(ValueError):
        WireFrame(FrameKind.ATIM, 0, 1, ())
    with pytest.raises(ValueError):
        WireFrame(FrameKind.DATA, 0, 1, (1,))
    assert WireFrame(FrameKind.ATIM_ACK, 1, 0, ()).is_rejection


def test_ledger_refuses_double_booking():
    led = SlotLedger(18)
    led.commit([3], 1, SEND)
    with pytest.raises(ValueError):
        led.commit([3], 2, RECEIVE)
    with pytest.raises(ValueError):
        led.commit([18], 2, RECEIVE)


def test_queue_drop_tail():
    n = NodeState(0, 18, queue_capacity=2)
    assert n.enqueue(Packet(0, 0, 1, 0)) and n.enqueue(Packet(1, 0, 1, 0))
    assert not n.enqueue(Packet(2, 0, 1, 0))
    assert [p.id for p in n.tx_queue] == [0, 1]


# -- compose / grant / confirm ---------------------------------------------------


def test_compose_lowest_slots_on_clean_ledger():
    assert compose_atim(node(0, 1), 1, 2).slot_list == (0, 1)


def test_compose_skips_busy_prefix():
    a = node(0, 1)
    a.ledger.neighborhood_busy.update({0, 1, 2})
    assert compose_atim(a, 1, 1).slot_list == (3,)


def test_compose_with_every_slot_busy():
    a = node(0, 1)
    a.ledger.neighborhood_busy.update(range(18))
    with pytest.raises(NoFreeSlotError):
        compose_atim(a, 1, 1)


def test_grant_full_agreement():
    assert grant_slots(node(1), atim(0, 1, [0, 1])).slot_list == (0, 1)


def test_grant_receiver_list_wins():
    b = node(1)
    b.ledger.neighborhood_busy.update({0, 1})
    assert grant_slots(b, atim(0, 1, [0, 1])).slot_list == (2,)


def test_grant_forced_single_slot():
    b = node(1)
    b.ledger.neighborhood_busy.update(set(range(18)) - {5})
    assert grant_slots(b, atim(0, 1, [5])).slot_list == (5,)


def test_grant_with_nothing_free_is_rejection():
    b = node(1)
    b.ledger.neighborhood_busy.update(range(18))
    assert grant_slots(b, atim(0, 1, [4])).is_rejection


def test_confirm_clean_completion():
    a = node(0, 1)
    res = confirm_reservation(a, ack(1, 0, [2]))
    assert res.slot_list == (2,)
    assert a.ledger.mine == {2: (1, SEND)}


def test_confirm_drops_slot_taken_by_overheard_reservation():
    # A asked B for [2, 3]; meanwhile A overheard C confirming slot 3 to D
    a = node(0, 1)
    overhear(a, WireFrame(FrameKind.ATIM_RES, 2, 3, (3,), 7))
    res = confirm_reservation(a, ack(1, 0, [2, 3]))
    assert res.slot_list == (2,)


def test_confirm_after_rejection_aborts_without_ledger_change():
    a = node(0, 1)
    with pytest.raises(ReservationAborted):
        confirm_reservation(a, ack(1, 0, []))
    assert a.ledger.mine == {}


def test_receiver_commits_confirmed_slots():
    b = node(1)
    assert commit_reservation(b, WireFrame(FrameKind.ATIM_RES, 0, 1, (4, 6), 0)) == [4, 6]
    assert b.ledger.mine == {4: (0, RECEIVE), 6: (0, RECEIVE)}


def test_overhearing_only_marks_third_party_frames():
    c = node(2)
    overhear(c, ack(1, 0, [5]))
    overhear(c, atim(0, 1, [9]))
    assert c.ledger.neighborhood_busy == {5}


# -- chaining ------------------------------------------------------------------


def test_pair_later_strictly_after_each_inbound():
    assert pair_later([0, 1], range(18)) == [1, 2]
    assert pair_later([3], [1, 2, 3]) == []
    assert pair_later([2, 5], [3, 4, 6, 7]) == [3, 6]


@given(st.sets(st.integers(0, 17), min_size=1), st.sets(st.integers(0, 17)))
def test_pair_later_properties(inbound, free):
    out = pair_later(inbound, free)
    assert out == sorted(set(out))
    assert set(out) <= free
    for s, o in zip(sorted(inbound), out):
        assert o > s


def test_relay_with_last_slot_cannot_forward():
    relay = node(1, 2, queued=0)
    with pytest.raises(WindowExhaustedError):
        forward_chain_reserve(relay, [17], 99, 3, np.random.default_rng(0), CFG)


def test_relay_plans_later_minislot():
    relay = node(1, 2, queued=0)
    plan = forward_chain_reserve(relay, [4], 99, 3, np.random.default_rng(0), CFG)
    assert plan.peer == 2 and plan.minislot > 3 and plan.inbound == (4,)


def test_window_access_uniform():
    rng = np.random.default_rng(0)
    n = node(0)
    draws = Counter(atim_window_access(n, rng, 4) for _ in range(40_000))
    assert set(draws) == {0, 1, 2, 3}
    assert all(abs(c / 40_000 - 0.25) < 0.01 for c in draws.values())
    with pytest.raises(WindowExhaustedError):
        atim_window_access(n, rng, 4, after=3)


def test_forward_chain_crosses_two_hops_in_one_frame():
    """A relay that got an early inbound slot forwards in a later one."""
    sc = Scenario(topology_spec="linear:2", horizon=3, traffic=TrafficSpec(pattern="burst", start_frame=0))
    found = False
    for seed in range(40):
        lg = run(sc, seed)
        if lg.deliveries and lg.deliveries[0].delivered < sc.frame.cycle_ticks:
            found = True
            assert lg.deliveries[0].hops == 2
            break
    assert found


def test_without_chaining_one_hop_per_frame():
    sc = Scenario(
        topology_spec="linear:3",
        frame=FrameConfig(forward_chain=False),
        horizon=6,
        traffic=TrafficSpec(pattern="burst", start_frame=0),
    )
    for seed in range(5):
        (d,) = run(sc, seed).deliveries
        assert d.delivered // sc.frame.cycle_ticks == 2


def test_single_slot_no_chaining_matches_smac_slope():
    frame = FrameConfig(data_slots=1, slot_len=0.9, forward_chain=False)
    lat = {}
    for h in (2, 5):
        sc = Scenario(topology_spec=f"linear:{h}", frame=frame, horizon=h + 3,
                      traffic=TrafficSpec(pattern="burst", start_frame=1))
        (d,) = run(sc, 0).deliveries
        lat[h] = (d.delivered - d.created) * frame.tick
    assert (lat[5] - lat[2]) / 3 == pytest.approx(frame.cycle, rel=1e-9)


# -- whole H-MAC runs -------------------------------------------------------------


def test_two_nodes_one_packet_single_quintuple():
    sc = Scenario(topology_spec="linear:1", horizon=3, traffic=TrafficSpec(pattern="burst", start_frame=0))
    _, trace = run_with_trace(sc, 0)
    kinds = [r.frame_kind for r in trace if r.kind == "tx_start"]
    assert kinds == ["ATIM", "ATIM_ACK", "ATIM_RES", "DATA", "DATA_ACK"]


def test_minislot_collision_with_single_minislot():
    frame = FrameConfig(atim_minislots=1, active_len=0.1)
    sc = Scenario(topology_spec="linear:2", frame=frame, horizon=2,
                  traffic=TrafficSpec(pattern="burst", sources=(0, 2), sink=1, start_frame=0))
    lg = run(sc, 0)
    # both sources retry every frame and always pick the same mini-slot
    assert lg.atim_sent == 2 * sc.horizon and lg.atim_decoded == 0


def test_lone_contender_always_decoded():
    sc = Scenario(topology_spec="star:1", horizon=6,
                  traffic=TrafficSpec(pattern="burst", sources="all", burst=64, start_frame=0))
    for seed in range(5):
        lg = run(sc, seed)
        # 64 packets at up to 18 slots per frame drain in 4 frames
        assert lg.atim_sent == 4 and lg.atim_decoded == 4


def _data_slots_trace(trace, cfg):
    """(frame, slot, src, dst) for every DATA transmission."""
    out = []
    for r in trace:
        if r.kind == "tx_start" and r.frame_kind == "DATA":
            f, off = divmod(r.tick, cfg.cycle_ticks)
            out.append((f, (off - cfg.active_ticks) // cfg.slot_ticks, r.src, r.dst))
    return out


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["linear:4", "0-1,1-2,1-3,3-4,2-4", "star:4"]))
def test_data_only_in_confirmed_slots(seed, topo):
    sc = Scenario(topology_spec=topo, horizon=4,
                  traffic=TrafficSpec(pattern="constant", rate=1.0, sources="all", start_frame=0))
    _, trace = run_with_trace(sc, seed)
    cfg = sc.frame
    confirmed = defaultdict(set)
    granted = defaultdict(set)
    for r in trace:
        if r.kind != "tx_end":
            continue
        f = r.tick // cfg.cycle_ticks
        if r.frame_kind == "ATIM_ACK":
            granted[(f, r.dst, r.src)].update(r.slots)
        elif r.frame_kind == "ATIM_RES":
            assert set(r.slots) <= granted[(f, r.src, r.dst)]
            confirmed[(f, r.src, r.dst)].update(r.slots)
    for f, s, a, b in _data_slots_trace(trace, cfg):
        assert 0 <= s < cfg.data_slots
        assert s in confirmed[(f, a, b)]


def test_ledgers_empty_at_every_frame_start():
    sc = Scenario(topology_spec="linear:3", horizon=5,
                  traffic=TrafficSpec(pattern="constant", rate=1.0, sources="all", start_frame=0))
    from hmacsim.simcore.engine import Simulator

    sim = Simulator(sc, 4)
    seen = []
    original = sim.mac.on_frame_start

    def check(f, t0):
        original(f, t0)
        seen.append(all(not n.ledger.mine for n in sim.nodes.values()))

    sim.mac.on_frame_start = check
    sim.run()
    assert seen and all(seen)


# -- S-MAC ---------------------------------------------------------------------------


def test_smac_step_none_with_empty_queue():
    assert smac_frame_step(node(0, 1, queued=0), np.random.default_rng(0), CFG) is None


def test_smac_step_backoff_in_window():
    rng = np.random.default_rng(0)
    a = node(0, 1, queued=30)
    acts = [smac_frame_step(a, rng, CFG) for _ in range(2000)]
    assert {x.backoff for x in acts} == {k * CFG.backoff_ticks for k in range(CFG.cw_slots)}
    assert all(x.peer == 1 and x.packets == CFG.packets_per_exchange for x in acts)


def test_smac_equal_backoff_both_collide():
    frame = FrameConfig(cw_slots=1)
    sc = Scenario(protocol="smac", topology_spec="linear:2", frame=frame, horizon=3,
                  traffic=TrafficSpec(pattern="burst", sources=(0, 2), sink=1, start_frame=0))
    _, trace = run_with_trace(sc, 0)
    corrupt = [r for r in trace if r.kind == "rx_corrupt" and r.subject == 1 and r.frame_kind == "DATA"]
    assert len(corrupt) >= 4  # both, in each of the first frames
    assert not [r for r in trace if r.kind == "rx_ok" and r.frame_kind == "DATA" and r.subject == 1]


def test_smac_hidden_pair_never_delivers():
    sc = Scenario(protocol="smac", topology_spec="linear:2", horizon=4,
                  traffic=TrafficSpec(pattern="burst", sources=(0, 2), sink=1, start_frame=0))
    assert run(sc, 3).deliveries == []


def test_smac_loser_defers_to_earlier_sender():
    sc = Scenario(protocol="smac", topology_spec="0-1,1-2,0-2", horizon=4,
                  traffic=TrafficSpec(pattern="burst", sources=(0, 2), sink=1, start_frame=0))
    lg = run(sc, 3)
    assert len(lg.deliveries) == 2


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_smac_single_peer_per_frame(seed):
    sc = Scenario(protocol="smac", topology_spec="0-1,1-2,1-3,3-4", horizon=5,
                  traffic=TrafficSpec(pattern="constant", rate=2.0, sources="all", sink=2, start_frame=0))
    _, trace = run_with_trace(sc, seed)
    peers = defaultdict(set)
    for r in trace:
        if r.kind == "rx_ok" and r.frame_kind == "DATA" and r.subject == r.dst:
            peers[(r.tick // sc.frame.cycle_ticks, r.src)].add(r.dst)
    assert all(len(v) == 1 for v in peers.values())


def test_smac_light_load_hop_delay_near_cycle():
    sc = Scenario(protocol="smac", topology_spec="linear:1", horizon=60,
                  traffic=TrafficSpec(pattern="constant", rate=1 / 3))
    lat = []
    for seed in range(10):
        lat += run(sc, seed).latencies()
    # created uniformly in the frame: mean wait T_f/2 plus backoff and airtime
    expected = CFG.cycle / 2 + CFG.mean_backoff + CFG.data_tx
    se = CFG.cycle / np.sqrt(12 * len(lat))
    assert abs(np.mean(lat) - expected) < 4 * se


def test_make_mac_rejects_unknown():
    with pytest.raises(ValueError):
        make_mac("tmac", None)


# -- audit -----------------------------------------------------------------------------


def _rec(tick, seq, kind, subject, fk, src, dst, slots):
    return TraceRecord(tick, seq, kind, subject, fk, src, dst, slots)


def _clean_handshake(seq0, slot):
    c = CFG.ctrl_ticks
    s = CFG.sifs_ticks
    t = 0
    out = []
    for i, (fk, src, dst) in enumerate([("ATIM", 0, 1), ("ATIM_ACK", 1, 0), ("ATIM_RES", 0, 1)]):
        end = t + c
        seq = seq0 + i
        out.append(_rec(end, seq, "tx_end", src, fk, src, dst, (slot,)))
        out.append(_rec(end, seq, "rx_ok", dst, fk, src, dst, (slot,)))
        t = end + s
    return out


def test_audit_flags_collision_in_clean_slot():
    slot = 2
    start = CFG.active_ticks + slot * CFG.slot_ticks
    end = start + CFG.data_ticks
    recs = _clean_handshake(0, slot) + [
        _rec(end, 10, "tx_end", 0, "DATA", 0, 1, ()),
        _rec(end, 10, "rx_corrupt", 1, "DATA", 0, 1, ()),
    ]
    rep = audit_reservations(recs, CFG)
    assert rep.clean_negotiations == 1
    assert rep.collisions == [(0, slot, 0, 1)]


def test_audit_ignores_unclean_negotiation():
    slot = 2
    recs = _clean_handshake(0, slot)
    recs[1] = recs[1]._replace(kind="rx_corrupt")
    start = CFG.active_ticks + slot * CFG.slot_ticks
    end = start + CFG.data_ticks
    recs += [_rec(end, 10, "tx_end", 0, "DATA", 0, 1, ()), _rec(end, 10, "rx_corrupt", 1, "DATA", 0, 1, ())]
    rep = audit_reservations(recs, CFG)
    assert rep.clean_negotiations == 0 and rep.ok


def test_audit_accepts_formatted_lines():
    sc = Scenario(topology_spec="linear:3", horizon=3,
                  traffic=TrafficSpec(pattern="burst", burst=3, start_frame=0))
    _, trace = run_with_trace(sc, 2)
    a = audit_reservations(trace, sc.frame)
    b = audit_reservations([r.format() for r in trace], sc.frame)
    assert a == b and a.clean_slots_used > 0 and a.ok
