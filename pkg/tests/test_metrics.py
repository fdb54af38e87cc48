import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import km_mean

from hmacsim import metrics as M
from hmacsim.experiments import LATENCY_RATE
from hmacsim.scenario import Scenario, TrafficSpec
from hmacsim.simcore.engine import run

CYCLE = 1_000_000


def ledger(key="k", seed=0, deliveries=(), sent=0, decoded=0, horizon=10 * CYCLE, warmup=0, energy=None):
    lg = M.MetricsLedger(key, seed, horizon, 1e-6, CYCLE, warmup_frames=warmup)
    for i, (c, d, h) in enumerate(deliveries):
        lg.deliveries.append(M.Delivery(i, 0, h, c, d, h))
        lg.created[i] = (c, 0, h)
    lg.generated = len(deliveries)
    lg.atim_sent, lg.atim_decoded = sent, decoded
    lg.energy_mj = energy or {0: 1.0, 1: 2.0}
    return lg


def test_one_delivery_one_second():
    s = M.summarize([ledger(deliveries=[(0, CYCLE, 1)])])
    assert s.mean_latency == 1.0
    assert s.n_reps == 1 and s.stderr["mean_latency"] == 0.0


def test_warmup_frame_excluded_by_default():
    lg = ledger(deliveries=[(0, CYCLE, 1), (2 * CYCLE, 4 * CYCLE, 1)], warmup=1)
    assert lg.latencies() == [2.0]
    assert lg.latencies(include_warmup=True) == [1.0, 2.0]


def test_success_ratio_is_decoded_over_sent():
    assert M.measured_success_ratio(ledger(sent=100, decoded=81)) == 0.81
    assert M.summarize([ledger(sent=100, decoded=81)]).success_ratio == 0.81


def test_success_ratio_without_requests():
    with pytest.raises(M.MetricsError):
        M.measured_success_ratio(ledger())
    assert M.summarize([ledger()]).success_ratio is None


def test_summarize_errors():
    with pytest.raises(M.MetricsError):
        M.summarize([])
    with pytest.raises(M.MetricsError):
        M.summarize([ledger("a"), ledger("b")])


def test_latency_over_delivered_only_with_delivery_rate():
    lg = ledger(deliveries=[(0, 3 * CYCLE, 3)])
    lg.generated = 4
    s = M.summarize([lg])
    assert s.mean_latency == 3.0 and s.latency_per_hop == 1.0
    assert s.delivery_rate == 0.25


_lat = st.tuples(st.integers(0, 5 * CYCLE), st.integers(0, 5 * CYCLE), st.integers(1, 10)).map(
    lambda t: (t[0], t[0] + t[1], t[2])
)
_ledgers = st.lists(
    st.builds(
        lambda d, s, e: ledger(deliveries=d, sent=s[0], decoded=min(s), energy={0: e, 1: e / 2}),
        st.lists(_lat, max_size=5),
        st.tuples(st.integers(0, 50), st.integers(0, 50)),
        st.floats(0, 1e3),
    ),
    min_size=1,
    max_size=6,
)


@settings(max_examples=60)
@given(_ledgers, st.randoms(use_true_random=False))
def test_summarize_is_permutation_invariant(lgs, rnd):
    shuffled = list(lgs)
    rnd.shuffle(shuffled)
    a, b = M.summarize(lgs), M.summarize(shuffled)
    for name in ("mean_latency", "latency_per_hop", "throughput_pps", "energy_network_mj", "success_ratio"):
        x, y = getattr(a, name), getattr(b, name)
        assert (x is None and y is None) or x == pytest.approx(y, rel=1e-12, abs=1e-12)
    assert set(a.stderr) == set(b.stderr)
    assert all(v >= 0 for v in a.stderr.values())
    if a.success_ratio is not None:
        assert 0 <= a.success_ratio <= 1


@given(st.lists(_lat, max_size=30), st.integers(1, 40))
def test_throughput_times_horizon_is_count(dels, frames):
    lg = ledger(deliveries=dels, horizon=frames * CYCLE)
    pps, ppf = M.throughput(lg)
    assert pps * lg.horizon_seconds == pytest.approx(len(dels), abs=1e-9)
    assert ppf * lg.horizon_frames == pytest.approx(len(dels), abs=1e-9)


def test_throughput_identity_on_a_run():
    sc = Scenario(topology_spec="linear:3", horizon=8, traffic=TrafficSpec(pattern="constant", rate=1.0))
    lg = run(sc, 1)
    pps, _ = M.throughput(lg)
    assert round(pps * lg.horizon_seconds) == len(lg.deliveries)


def test_span_throughput_counts_frames_inclusive():
    lg = ledger(deliveries=[(0, CYCLE // 2, 1), (0, 2 * CYCLE + 5, 1)])
    assert M.span_throughput(lg) == pytest.approx(2 / 3)
    assert M.span_throughput(ledger()) is None


# -- hop depth -----------------------------------------------------------------


def test_hop_depth_without_censoring_is_plain_mean():
    obs = [(2, False), (4, False), (3, False)]
    assert M.reserved_hop_depth(obs) == pytest.approx(3.0)
    assert M.naive_hop_depth(obs) == pytest.approx(3.0)


def test_censoring_lifts_estimate_above_naive():
    obs = [(3, False), (3, False), (1, True), (2, True)]
    assert M.reserved_hop_depth(obs) > M.naive_hop_depth(obs)


@given(st.lists(st.tuples(st.integers(0, 12), st.booleans()), min_size=1, max_size=40))
def test_hop_depth_matches_reference(obs):
    assert M.reserved_hop_depth(obs) == pytest.approx(km_mean(obs), rel=1e-12)


def test_hop_depth_needs_data():
    with pytest.raises(M.MetricsError):
        M.reserved_hop_depth([])


def test_frame_progress_sums_to_hops():
    sc = Scenario(topology_spec="linear:6", horizon=30, traffic=TrafficSpec(pattern="constant", rate=0.2))
    lg = run(sc, 2)
    obs = M.frame_progress(lg)
    counted = [d for d in lg.deliveries if d.created >= lg.warmup_frames * lg.cycle_ticks]
    assert sum(x for x, _ in obs) == sum(d.hops for d in counted)
    assert sum(c for _, c in obs) == len(counted)


# -- CSV --------------------------------------------------------------------------


def test_csv_order_and_header():
    rows = [
        M.Row("hops", 2, "smac", "mean_latency", 1.5, 0.1, 3, 1.55),
        M.Row("hops", 1, "smac", "mean_latency", 0.5, 0.0, 3),
        M.Row("hops", 2, "hmac", "mean_latency", 0.25, None, 3),
        M.Row("hops", 1, "hmac", "mean_latency", 1.0, 0.0, 3),
    ]
    lines = M.rows_to_csv(rows).splitlines()
    assert lines[0] == "sweep_var,value,protocol,metric,mean,stderr,n_reps,analytic"
    assert [l.split(",")[1:3] for l in lines[1:]] == [["1", "hmac"], ["1", "smac"], ["2", "hmac"], ["2", "smac"]]
    assert lines[2].endswith(",3,")
    assert lines[4] == "hops,2,smac,mean_latency,1.5,0.1,3,1.55"


def test_csv_floats_round_trip():
    x = 1 / 3
    line = M.rows_to_csv([M.Row("k", 1, "hmac", "m", x, None, 1)]).splitlines()[1]
    assert float(line.split(",")[4]) == x


# -- simulation-backed ---------------------------------------------------------------


def test_single_contender_ratio_is_one():
    sc = Scenario(topology_spec="star:1", horizon=5,
                  traffic=TrafficSpec(pattern="constant", rate=3.0, sources="all", start_frame=0))
    for seed in range(3):
        assert M.measured_success_ratio(run(sc, seed)) == 1.0


def test_smac_ten_hop_latency_per_hop_near_cycle():
    sc = Scenario(protocol="smac", topology_spec="linear:10", horizon=60,
                  traffic=TrafficSpec(pattern="constant", rate=LATENCY_RATE))
    s = M.summarize([run(sc, i) for i in range(10)])
    assert s.latency_per_hop == pytest.approx(sc.frame.cycle, rel=0.05)
    assert math.isfinite(s.stderr["latency_per_hop"])
