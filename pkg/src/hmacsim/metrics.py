"""Per-run ledgers and replication summaries."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class Delivery:
    packet_id: int
    source: int
    sink: int
    created: int
    delivered: int
    hops: int


@dataclass
class MetricsLedger:
    scenario_key: str
    seed: int
    horizon: int
    tick_seconds: float
    cycle_ticks: int
    deliveries: list[Delivery] = field(default_factory=list)
    atim_sent: int = 0
    atim_decoded: int = 0
    generated: int = 0
    dropped: int = 0
    # (packet id, node, frame) each time a node first holds a packet
    hop_log: list[tuple[int, int, int]] = field(default_factory=list)
    # packet id -> (created tick, source, sink)
    created: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    energy_ticks: dict[int, dict[str, int]] = field(default_factory=dict)
    energy_mj: dict[int, float] = field(default_factory=dict)
    idle_nodes: list[int] = field(default_factory=list)
    warmup_frames: int = 1

    @property
    def horizon_seconds(self) -> float:
        return self.horizon * self.tick_seconds

    @property
    def horizon_frames(self) -> float:
        return self.horizon / self.cycle_ticks

    def latencies(self, include_warmup: bool = False) -> list[float]:
        cut = 0 if include_warmup else self.warmup_frames * self.cycle_ticks
        return [(d.delivered - d.created) * self.tick_seconds for d in self.deliveries if d.created >= cut]

    def network_energy(self) -> float:
        return math.fsum(self.energy_mj[n] for n in sorted(self.energy_mj))


def measured_success_ratio(ledger: MetricsLedger) -> float:
    if ledger.atim_sent == 0:
        raise MetricsError("no ATIM requests were sent")
    return ledger.atim_decoded / ledger.atim_sent


def throughput(ledger: MetricsLedger) -> tuple[float, float]:
    """Delivered packets per second and per frame over the whole horizon."""
    n = len(ledger.deliveries)
    return n / ledger.horizon_seconds, n / ledger.horizon_frames


def span_throughput(ledger: MetricsLedger) -> float | None:
    """Packets per frame from the first packet's frame to the last delivery's frame."""
    if not ledger.deliveries:
        return None
    first = min(c for c, _, _ in ledger.created.values()) // ledger.cycle_ticks
    last = max(d.delivered for d in ledger.deliveries) // ledger.cycle_ticks
    return len(ledger.deliveries) / (last - first + 1)


def first_hop_rate(ledger: MetricsLedger) -> float | None:
    """Packets that left their source during the first opportunity frame."""
    if not ledger.created:
        return None
    c = ledger.cycle_ticks
    first = min(-(-t // c) for t, _, _ in ledger.created.values())
    sources = {pid: src for pid, (_, src, _) in ledger.created.items()}
    moved = {pid for pid, node, f in ledger.hop_log if f == first and node != sources[pid]}
    return float(len(moved))


def frame_progress(ledger: MetricsLedger) -> list[tuple[int, bool]]:
    """(hops advanced, reached sink) for every frame a delivered packet spent in transit.

    Transit starts with the first frame whose boundary is at or after the
    packet's creation and ends with the delivery frame, which is flagged
    because the destination cut its progress short.
    """
    c = ledger.cycle_ticks
    per_packet: dict[int, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    sources = {pid: src for pid, (_, src, _) in ledger.created.items()}
    for pid, node, frame in ledger.hop_log:
        if node != sources.get(pid):
            per_packet[pid][frame] += 1
    out = []
    cut = ledger.warmup_frames * c
    for d in ledger.deliveries:
        if d.created < cut:
            continue
        first = -(-d.created // c)
        last = d.delivered // c
        hops = per_packet[d.packet_id]
        for f in range(first, last + 1):
            out.append((hops.get(f, 0), f == last))
    return out


def reserved_hop_depth(observations) -> float:
    """Mean hops per frame, correcting for frames truncated at the sink.

    A frame in which the packet reached its sink only says the chain could
    have advanced *at least* that far, so it is right-censored.  Product-limit
    estimate of P(progress > x), summed over x.
    """
    obs = list(observations)
    if not obs:
        raise MetricsError("no progress observations")
    top = max(x for x, _ in obs)
    events = defaultdict(int)
    seen = defaultdict(int)
    for x, censored in obs:
        seen[x] += 1
        if not censored:
            events[x] += 1
    at_risk = len(obs)
    surv = 1.0
    mean = 0.0
    for x in range(top + 1):
        if at_risk > 0:
            surv *= 1.0 - events[x] / at_risk
        mean += surv
        at_risk -= seen[x]
    return mean


def naive_hop_depth(observations) -> float:
    obs = list(observations)
    return sum(x for x, _ in obs) / len(obs)


@dataclass(frozen=True)
class Summary:
    n_reps: int
    mean_latency: float | None
    latency_per_hop: float | None
    throughput_pps: float
    throughput_ppf: float
    span_throughput_ppf: float | None
    energy_network_mj: float
    energy_per_node_mj: float
    success_ratio: float | None
    delivery_rate: float | None
    stderr: dict[str, float]


def _mean_se(values: list[float]) -> tuple[float, float]:
    n = len(values)
    m = math.fsum(values) / n
    if n < 2:
        return m, 0.0
    var = math.fsum((v - m) ** 2 for v in values) / (n - 1)
    return m, math.sqrt(var / n)


def summarize(ledgers) -> Summary:
    ledgers = list(ledgers)
    if not ledgers:
        raise MetricsError("summarize needs at least one ledger")
    keys = {lg.scenario_key for lg in ledgers}
    if len(keys) != 1:
        raise MetricsError("ledgers come from different scenarios")

    per: dict[str, list[float]] = defaultdict(list)
    for lg in ledgers:
        lats = lg.latencies()
        if lats:
            per["mean_latency"].append(math.fsum(lats) / len(lats))
            hops = [d.hops for d in lg.deliveries if d.created >= lg.warmup_frames * lg.cycle_ticks]
            per["latency_per_hop"].append(math.fsum(l / h for l, h in zip(lats, hops)) / len(lats))
        pps, ppf = throughput(lg)
        per["throughput_pps"].append(pps)
        per["throughput_ppf"].append(ppf)
        st = span_throughput(lg)
        if st is not None:
            per["span_throughput_ppf"].append(st)
        per["energy_network_mj"].append(lg.network_energy())
        per["energy_per_node_mj"].append(lg.network_energy() / len(lg.energy_mj))
        if lg.atim_sent:
            per["success_ratio"].append(measured_success_ratio(lg))
        if lg.generated:
            per["delivery_rate"].append(len(lg.deliveries) / lg.generated)

    means = {}
    stderr = {}
    for k, vals in per.items():
        means[k], stderr[k] = _mean_se(vals)
    return Summary(
        n_reps=len(ledgers),
        mean_latency=means.get("mean_latency"),
        latency_per_hop=means.get("latency_per_hop"),
        throughput_pps=means["throughput_pps"],
        throughput_ppf=means["throughput_ppf"],
        span_throughput_ppf=means.get("span_throughput_ppf"),
        energy_network_mj=means["energy_network_mj"],
        energy_per_node_mj=means["energy_per_node_mj"],
        success_ratio=means.get("success_ratio"),
        delivery_rate=means.get("delivery_rate"),
        stderr=stderr,
    )


CSV_COLUMNS = ("sweep_var", "value", "protocol", "metric", "mean", "stderr", "n_reps", "analytic")


@dataclass(frozen=True)
class Row:
    sweep_var: str
    value: float
    protocol: str
    metric: str
    mean: float | None
    stderr: float | None
    n_reps: int
    analytic: float | None = None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        if x.is_integer() and abs(x) < 1e15:
            return str(int(x))
        return repr(x)
    return str(x)


def rows_to_csv(rows, metric_order=None) -> str:
    """Header plus rows sorted by sweep value then protocol name."""
    order = {m: i for i, m in enumerate(metric_order or [])}
    ordered = sorted(
        enumerate(rows),
        key=lambda ir: (ir[1].value, ir[1].protocol, order.get(ir[1].metric, len(order)), ir[0]),
    )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for _, r in ordered:
        w.writerow([r.sweep_var, _fmt(r.value), r.protocol, r.metric, _fmt(r.mean), _fmt(r.stderr), r.n_reps, _fmt(r.analytic)])
    return buf.getvalue()
