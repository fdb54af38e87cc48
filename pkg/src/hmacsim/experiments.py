"""Replicated sweeps, preset sweeps and simulated-vs-formula comparison."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from hmacsim import analytic
from hmacsim import metrics as M
from hmacsim.metrics import Row, rows_to_csv
from hmacsim.protocol.frames import FrameConfig
from hmacsim.scenario import Scenario, TrafficSpec
from hmacsim.simcore.engine import Simulator
from hmacsim.simcore.trace import dumps

PRESETS = ("fig4", "fig5", "fig6", "fig7", "fig8")


class UnknownPresetError(KeyError):
    pass


def replication_seeds(base_seed: int, replications: int) -> list[int]:
    return [base_seed + i for i in range(replications)]


def _run_one(args):
    scenario, seed, trace = args
    sim = Simulator(scenario, seed, trace=trace)
    ledger = sim.run()
    return ledger, (dumps(sim.trace) if trace else None)


def replicate(scenario: Scenario, replications: int | None = None, base_seed: int | None = None,
              jobs: int = 1, trace_first: bool = False):
    """Run every replication; returns (ledgers in seed order, trace text of the first or None)."""
    n = scenario.replications if replications is None else replications
    seed0 = scenario.seed if base_seed is None else base_seed
    work = [(scenario, s, trace_first and i == 0) for i, s in enumerate(replication_seeds(seed0, n))]
    if jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_one, work))
    else:
        results = [_run_one(w) for w in work]
    return [r[0] for r in results], results[0][1]


def timing_for(frame: FrameConfig, hops: int = 1, reserved_hops: float = 1) -> analytic.TimingParams:
    return analytic.TimingParams(
        t_cs=frame.mean_backoff,
        t_tx=frame.data_tx,
        t_active=frame.active_len,
        t_slot=frame.slot_len,
        slot_count=frame.data_slots,
        hops=hops,
        reserved_hops=reserved_hops,
    )


def _stat(values):
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None, 0
    m, se = M._mean_se(vals)
    return m, se, len(vals)


# -- per-preset definitions -------------------------------------------------

@dataclass
class PresetResult:
    name: str
    rows: list[Row]
    metric_order: tuple[str, ...]
    traces: dict[str, str]

    def csv(self) -> str:
        return rows_to_csv(self.rows, self.metric_order)


def _ctx(seed, replications, jobs, trace):
    return dict(base_seed=seed, replications=replications, jobs=jobs, trace_first=trace)


def _collect(traces, key, text):
    if text is not None:
        traces[key] = text


def burst_scenario(protocol: str, burst: int, hops: int = 10) -> Scenario:
    return Scenario(
        protocol=protocol,
        topology_spec=f"linear:{hops}",
        horizon=hops + 15,
        traffic=TrafficSpec(pattern="burst", burst=burst, start_frame=1),
        name=f"fig4-{protocol}-{burst}",
    )


def preset_fig4(seed=1, replications=30, jobs=1, trace=False) -> PresetResult:
    rows, traces = [], {}
    frame = FrameConfig()
    t_f = frame.cycle
    p = timing_for(frame)
    for k in range(1, frame.data_slots + 1):
        tp = analytic.ThroughputParams(k, 1, frame.slot_len, frame.cycle - frame.active_len)
        single_hop = {
            "smac": analytic.smac_throughput(tp, p) * t_f,
            "hmac": analytic.hmac_throughput(tp, p) * t_f,
        }
        for proto in ("hmac", "smac"):
            sc = burst_scenario(proto, k)
            ledgers, text = replicate(sc, **_ctx(seed, replications, jobs, trace))
            _collect(traces, f"{proto}_burst{k}", text)
            span = [M.span_throughput(lg) for lg in ledgers]
            m, se, n = _stat(span)
            rows.append(Row("burst", k, proto, "span_throughput_ppf", m, se, n))
            rows.append(Row("burst", k, proto, "span_throughput_pps", None if m is None else m / t_f,
                            None if se is None else se / t_f, n))
            m, se, n = _stat([M.first_hop_rate(lg) for lg in ledgers])
            rows.append(Row("burst", k, proto, "first_hop_ppf", m, se, n, single_hop[proto]))
    return PresetResult("fig4", rows, ("span_throughput_ppf", "span_throughput_pps", "first_hop_ppf"), traces)


def energy_scenario(protocol: str, rate: float, hops: int = 10, horizon: int = 60) -> Scenario:
    traffic = TrafficSpec(pattern="constant", rate=rate) if rate > 0 else TrafficSpec(pattern="none")
    return Scenario(protocol=protocol, topology_spec=f"linear:{hops}", horizon=horizon, traffic=traffic,
                    name=f"fig5-{protocol}")


def preset_fig5(seed=1, replications=30, jobs=1, trace=False) -> PresetResult:
    """Network energy under a light single flow, and with no traffic at all."""
    rows, traces = [], {}
    for rate in (0.0, 1 / 12):
        per_proto = {}
        for proto in ("hmac", "smac"):
            ledgers, text = replicate(energy_scenario(proto, rate), **_ctx(seed, replications, jobs, trace))
            _collect(traces, f"{proto}_rate{rate:.4f}", text)
            per_proto[proto] = ledgers
            net = [lg.network_energy() for lg in ledgers]
            m, se, n = _stat(net)
            rows.append(Row("rate", rate, proto, "energy_network_mj", m, se, n))
            m, se, n = _stat([e / len(lg.energy_mj) for e, lg in zip(net, ledgers)])
            rows.append(Row("rate", rate, proto, "energy_per_node_mj", m, se, n))
            idle = [math.fsum(lg.energy_mj[i] for i in lg.idle_nodes) / len(lg.idle_nodes)
                    for lg in ledgers if lg.idle_nodes]
            m, se, n = _stat(idle)
            rows.append(Row("rate", rate, proto, "idle_node_energy_mj", m, se, n))
        pairs = list(zip(per_proto["hmac"], per_proto["smac"]))
        m, se, n = _stat([h.network_energy() / s.network_energy() for h, s in pairs])
        rows.append(Row("rate", rate, "ratio", "energy_network_ratio", m, se, n))
        idle_ratio = [
            math.fsum(h.energy_mj[i] for i in h.idle_nodes) / math.fsum(s.energy_mj[i] for i in h.idle_nodes)
            for h, s in pairs
            if h.idle_nodes and set(h.idle_nodes) <= set(s.idle_nodes)
        ]
        m, se, n = _stat(idle_ratio)
        rows.append(Row("rate", rate, "ratio", "idle_node_energy_ratio", m, se, n))
    order = ("energy_network_mj", "energy_per_node_mj", "idle_node_energy_mj",
             "energy_network_ratio", "idle_node_energy_ratio")
    return PresetResult("fig5", rows, order, traces)


LATENCY_PACKETS = 20
LATENCY_RATE = 1 / 12


def latency_scenario(protocol: str, hops: int, forward_chain: bool = True) -> Scenario:
    horizon = 2 + math.ceil(LATENCY_PACKETS / LATENCY_RATE) + hops + 2
    return Scenario(
        protocol=protocol,
        topology_spec=f"linear:{hops}",
        frame=FrameConfig(forward_chain=forward_chain),
        horizon=horizon,
        traffic=TrafficSpec(pattern="constant", rate=LATENCY_RATE, count=LATENCY_PACKETS),
        name=f"fig6-{protocol}-{hops}",
    )


def _pooled_latency(ledgers):
    """Per-replication mean latency and per-hop latency."""
    lat, per_hop = [], []
    for lg in ledgers:
        cut = lg.warmup_frames * lg.cycle_ticks
        ds = [d for d in lg.deliveries if d.created >= cut]
        if not ds:
            continue
        ls = [(d.delivered - d.created) * lg.tick_seconds for d in ds]
        lat.append(math.fsum(ls) / len(ls))
        per_hop.append(math.fsum(x / d.hops for x, d in zip(ls, ds)) / len(ls))
    return lat, per_hop


def preset_fig6(seed=1, replications=30, jobs=1, trace=False, hops_range=range(1, 11)) -> PresetResult:
    """Latency against chain length.

    The H-MAC prediction uses hops-per-frame pooled over the whole sweep:
    on short chains almost every frame ends at the sink, so a per-point
    estimate is mostly censored.  The per-point value is still reported.
    """
    rows, traces = [], {}
    frame = FrameConfig()
    hmac_runs = {}
    for h in hops_range:
        for proto in ("hmac", "smac"):
            ledgers, text = replicate(latency_scenario(proto, h), **_ctx(seed, replications, jobs, trace))
            _collect(traces, f"{proto}_hops{h}", text)
            lat, per_hop = _pooled_latency(ledgers)
            if proto == "smac":
                expected = analytic.smac_latency(timing_for(frame, hops=h))
                m, se, n = _stat(lat)
                rows.append(Row("hops", h, proto, "mean_latency_s", m, se, n, expected))
                m, se, n = _stat(per_hop)
                rows.append(Row("hops", h, proto, "latency_per_hop_s", m, se, n, frame.cycle))
            else:
                hmac_runs[h] = (ledgers, lat, per_hop)
    pooled = M.reserved_hop_depth(
        [o for ledgers, _, _ in hmac_runs.values() for lg in ledgers for o in M.frame_progress(lg)]
    )
    for h, (ledgers, lat, per_hop) in hmac_runs.items():
        p = timing_for(frame, hops=h, reserved_hops=pooled)
        m, se, n = _stat(lat)
        rows.append(Row("hops", h, "hmac", "mean_latency_s", m, se, n, analytic.hmac_latency(p)))
        m, se, n = _stat(per_hop)
        rows.append(Row("hops", h, "hmac", "latency_per_hop_s", m, se, n, frame.cycle / pooled))
        local = M.reserved_hop_depth([o for lg in ledgers for o in M.frame_progress(lg)])
        rows.append(Row("hops", h, "hmac", "reserved_hops", local, None, len(ledgers), pooled))
    return PresetResult("fig6", rows, ("mean_latency_s", "latency_per_hop_s", "reserved_hops"), traces)


def contention_scenario(contenders: int, minislots: int, horizon: int = 10) -> Scenario:
    """Every leaf of a star saturated towards the hub, asking for one slot at a time.

    The one-slot cap keeps the hub from running out of grants, so all
    leaves keep contending in every frame.
    """
    frame = FrameConfig(atim_minislots=minislots, request_cap=1)
    return Scenario(
        protocol="hmac",
        topology_spec=f"star:{contenders}",
        frame=frame,
        horizon=horizon,
        traffic=TrafficSpec(pattern="burst", sources="all", burst=frame.queue_capacity, start_frame=0),
        name=f"contention-{contenders}-{minislots}",
    )


def _ratio_rows(var, value, sc, contenders, minislots, ctx, traces):
    ledgers, text = replicate(sc, **ctx)
    _collect(traces, f"hmac_{var}{value}", text)
    m, se, n = _stat([M.measured_success_ratio(lg) for lg in ledgers])
    expected = analytic.success_ratio(analytic.ContentionParams(contenders, minislots))
    return Row(var, value, "hmac", "success_ratio", m, se, n, expected)


FIG7_CONTENDERS = (2, 5, 10, 15, 20)
FIG8_MINISLOTS = (5, 10, 20, 40)


def preset_fig7(seed=1, replications=30, jobs=1, trace=False, contenders=FIG7_CONTENDERS) -> PresetResult:
    traces = {}
    ctx = _ctx(seed, replications, jobs, trace)
    rows = [_ratio_rows("contenders", n, contention_scenario(n, 20), n, 20, ctx, traces) for n in contenders]
    return PresetResult("fig7", rows, ("success_ratio",), traces)


def preset_fig8(seed=1, replications=30, jobs=1, trace=False, minislots=FIG8_MINISLOTS) -> PresetResult:
    traces = {}
    ctx = _ctx(seed, replications, jobs, trace)
    rows = [_ratio_rows("minislots", s, contention_scenario(10, s), 10, s, ctx, traces) for s in minislots]
    return PresetResult("fig8", rows, ("success_ratio",), traces)


_PRESETS = {
    "fig4": preset_fig4,
    "fig5": preset_fig5,
    "fig6": preset_fig6,
    "fig7": preset_fig7,
    "fig8": preset_fig8,
}


def build_preset(name: str, seed: int = 1, replications: int = 30, jobs: int = 1, trace: bool = False) -> PresetResult:
    try:
        fn = _PRESETS[name]
    except KeyError:
        raise UnknownPresetError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return fn(seed=seed, replications=replications, jobs=jobs, trace=trace)


def run_preset(name: str, out_dir, seed: int = 1, replications: int = 30, jobs: int = 1,
               trace: bool = False) -> list[str]:
    """Write ``<name>.csv`` (and traces when asked) into ``out_dir``; returns the paths."""
    result = build_preset(name, seed=seed, replications=replications, jobs=jobs, trace=trace)
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, f"{name}.csv")]
    with open(paths[0], "w", newline="") as fh:
        fh.write(result.csv())
    for key in sorted(result.traces):
        path = os.path.join(out_dir, f"{name}_{key}.trace")
        with open(path, "w") as fh:
            fh.write(result.traces[key])
        paths.append(path)
    return paths


# -- single-scenario comparison ----------------------------------------------

@dataclass(frozen=True)
class CompareRow:
    metric: str
    simulated: float
    stderr: float
    analytic: float
    rel_error: float


@dataclass
class Comparison:
    rows: list[CompareRow]
    notices: list[str]


def _row(metric, values, expected):
    m, se, _ = _stat(values)
    if m is None:
        return None
    return CompareRow(metric, m, se, expected, abs(m - expected) / abs(expected) if expected else math.inf)


def _is_single_flow_chain(sc: Scenario) -> bool:
    topo = sc.topology
    if not topo.is_linear_chain():
        return False
    srcs = sc.traffic.source_ids(topo, sc.sink)
    return len(srcs) == 1


def _is_contention_star(sc: Scenario) -> bool:
    topo = sc.topology
    return (
        topo.kind == "star"
        and sc.protocol == "hmac"
        and sc.traffic.source_ids(topo, sc.sink) == sorted(n for n in topo.nodes if n != sc.sink)
    )


def compare(scenario: Scenario, replications: int | None = None, base_seed: int | None = None,
            jobs: int = 1) -> Comparison:
    """Simulated means next to the closed-form predictions that apply."""
    chain = _is_single_flow_chain(scenario)
    star = _is_contention_star(scenario)
    if not (chain or star):
        return Comparison([], [
            f"no analytic counterpart: topology {scenario.topology_spec!r} with this traffic is neither a "
            "single-flow linear chain nor an all-leaves star"
        ])
    ledgers, _ = replicate(scenario, replications, base_seed, jobs)
    frame = scenario.frame
    rows, notices = [], []
    if chain:
        topo = scenario.topology
        src = scenario.traffic.source_ids(topo, scenario.sink)[0]
        hops = topo.hop_distances(scenario.sink)[src]
        lat, _ = _pooled_latency(ledgers)
        if scenario.protocol == "smac":
            expected = analytic.smac_latency(timing_for(frame, hops=hops))
        else:
            if frame.forward_chain:
                depth = M.reserved_hop_depth([o for lg in ledgers for o in M.frame_progress(lg)])
            else:
                depth = 1
            expected = analytic.hmac_latency(timing_for(frame, hops=hops, reserved_hops=depth))
        r = _row("mean_latency_s", lat, expected)
        if r is None:
            notices.append("no packet was delivered after warm-up; latency not compared")
        else:
            rows.append(r)
        if scenario.traffic.pattern == "burst":
            notices.append("burst packets are created on a frame boundary; the latency formulas assume uniform arrival")
            k = scenario.traffic.burst
            p = timing_for(frame)
            tp = analytic.ThroughputParams(k, 1, frame.slot_len, frame.cycle - frame.active_len)
            try:
                fn = analytic.smac_throughput if scenario.protocol == "smac" else analytic.hmac_throughput
                expected = fn(tp, p)
            except analytic.CapacityError as e:
                notices.append(f"throughput not compared: {e}")
            else:
                r = _row("first_hop_throughput_pps", [M.first_hop_rate(lg) / frame.cycle for lg in ledgers], expected)
                if r is not None:
                    rows.append(r)
        else:
            notices.append("throughput formulas assume one saturated exchange per frame; use a burst pattern")
    if star:
        n = len(scenario.topology.nodes) - 1
        if n > analytic.MAX_CONTENDERS:
            notices.append(f"success ratio not compared: {n} contenders exceeds {analytic.MAX_CONTENDERS}")
        else:
            expected = analytic.success_ratio(analytic.ContentionParams(n, frame.atim_minislots))
            vals = [M.measured_success_ratio(lg) for lg in ledgers if lg.atim_sent]
            r = _row("success_ratio", vals, expected)
            if r is not None:
                rows.append(r)
    return Comparison(rows, notices)
