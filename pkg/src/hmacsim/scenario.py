"""Scenario description and the ``key=value`` scenario file format.

A scenario file is line oriented::

    # comment
    [scenario]
    protocol = hmac
    horizon = 40
    [topology]
    topology = linear:10
    [frame]
    data_slots = 18

Section headers are optional; every key name is unique across sections.
Unspecified keys take the defaults of :func:`default_scenario`, which is
the 10-hop, 18+2 slot, 10% duty-cycle setup.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from hmacsim.protocol.frames import ConfigError, FrameConfig
from hmacsim.simcore.energy import DEFAULT_ENERGY, EnergyModel
from hmacsim.simcore.topology import Topology, TopologyError

PROTOCOLS = ("hmac", "smac")
PATTERNS = ("uniform", "constant", "burst", "none")


class ScenarioParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class ScenarioValidationError(ValueError):
    def __init__(self, field_name: str, msg: str):
        self.field = field_name
        super().__init__(f"{field_name}: {msg}")


@dataclass(frozen=True)
class TrafficSpec:
    pattern: str = "constant"
    # comma-separated ids or "all" (every node except the sink)
    sources: tuple[int, ...] | str = (0,)
    sink: int | None = None
    burst: int = 1
    rate: float = 1 / 12
    start_frame: int = 1
    jitter: bool = True
    # constant pattern: packets per source, 0 = until the horizon
    count: int = 0

    def source_ids(self, topology: Topology, sink: int) -> list[int]:
        if self.sources == "all":
            return [n for n in sorted(topology.nodes) if n != sink]
        return list(self.sources)


@dataclass(frozen=True)
class Scenario:
    protocol: str = "hmac"
    topology_spec: str = "linear:10"
    frame: FrameConfig = field(default_factory=FrameConfig)
    energy: EnergyModel = DEFAULT_ENERGY
    traffic: TrafficSpec = field(default_factory=TrafficSpec)
    horizon: int = 40
    replications: int = 30
    seed: int = 1
    warmup_frames: int = 1
    name: str = "default"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ScenarioValidationError("protocol", f"must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.horizon < 2:
            raise ScenarioValidationError("horizon", "must be at least 2 frames")
        if self.replications < 1:
            raise ScenarioValidationError("replications", "must be at least 1")
        if self.warmup_frames < 0:
            raise ScenarioValidationError("warmup_frames", "must be nonnegative")
        try:
            topo = Topology.parse(self.topology_spec)
        except (TopologyError, ValueError) as e:
            raise ScenarioValidationError("topology", str(e)) from None
        object.__setattr__(self, "_topology", topo)
        tr = self.traffic
        if tr.pattern not in PATTERNS:
            raise ScenarioValidationError("pattern", f"must be one of {PATTERNS}")
        sink = self.sink
        if sink not in topo.nodes:
            raise ScenarioValidationError("sink", f"node {sink} not in topology")
        if tr.pattern != "none":
            dist = topo.hop_distances(sink)
            for s in tr.source_ids(topo, sink):
                if s not in topo.nodes:
                    raise ScenarioValidationError("sources", f"node {s} not in topology")
                if s == sink:
                    raise ScenarioValidationError("sources", "source equals sink")
                if s not in dist:
                    raise ScenarioValidationError("sources", f"node {s} cannot reach sink {sink}")
        if tr.pattern == "constant" and not tr.rate > 0:
            raise ScenarioValidationError("rate", "must be positive")
        if tr.pattern == "burst" and tr.burst < 1:
            raise ScenarioValidationError("burst", "must be at least 1")
        if tr.start_frame < 0 or tr.start_frame >= self.horizon:
            raise ScenarioValidationError("start_frame", "must lie inside the horizon")

    @property
    def topology(self) -> Topology:
        return self._topology

    @property
    def sink(self) -> int:
        if self.traffic.sink is not None:
            return self.traffic.sink
        topo = self._topology
        # hub of a star, far end of a chain, else highest id
        return 0 if topo.kind == "star" else max(topo.nodes)

    @property
    def key(self) -> str:
        """Identity of everything except seed and replication count."""
        d = dataclasses.asdict(self)
        d.pop("seed")
        d.pop("replications")
        d.pop("name")
        return repr(sorted(d.items()))

    def replace(self, **changes) -> "Scenario":
        frame_fields = {f.name for f in dataclasses.fields(FrameConfig)}
        traffic_fields = {f.name for f in dataclasses.fields(TrafficSpec)}
        energy_fields = {f.name for f in dataclasses.fields(EnergyModel)}
        top, fr, tr, en = {}, {}, {}, {}
        for k, v in changes.items():
            if k in frame_fields:
                fr[k] = v
            elif k in traffic_fields:
                tr[k] = v
            elif k in energy_fields:
                en[k] = v
            else:
                top[k] = v
        if fr:
            top["frame"] = dataclasses.replace(self.frame, **fr)
        if tr:
            top["traffic"] = dataclasses.replace(self.traffic, **tr)
        if en:
            top["energy"] = dataclasses.replace(self.energy, **en)
        return dataclasses.replace(self, **top)


def default_scenario() -> Scenario:
    return Scenario()


# -- file format ----------------------------------------------------------

def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in {"1", "true", "yes", "on"}:
        return True
    if s in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _sources(v: str):
    v = v.strip()
    if v == "all":
        return "all"
    return tuple(int(x) for x in v.split(",") if x.strip())


def _opt_int(v: str):
    return None if v.strip().lower() in {"", "none", "auto"} else int(v)


# key -> (section, converter, target)
_KEYS = {
    "protocol": ("scenario", str, "top"),
    "horizon": ("scenario", int, "top"),
    "replications": ("scenario", int, "top"),
    "seed": ("scenario", int, "top"),
    "warmup_frames": ("scenario", int, "top"),
    "name": ("scenario", str, "top"),
    "topology": ("topology", str, "topology_spec"),
    "active_len": ("frame", float, "frame"),
    "data_slots": ("frame", int, "frame"),
    "slot_len": ("frame", float, "frame"),
    "atim_minislots": ("frame", int, "frame"),
    "guard": ("frame", float, "frame"),
    "data_tx": ("frame", float, "frame"),
    "ctrl_tx": ("frame", float, "frame"),
    "sifs": ("frame", float, "frame"),
    "cw_slots": ("frame", int, "frame"),
    "backoff_slot": ("frame", float, "frame"),
    "smac_packets": ("frame", _opt_int, "frame"),
    "forward_chain": ("frame", _bool, "frame"),
    "request_cap": ("frame", _opt_int, "frame"),
    "queue_capacity": ("frame", int, "frame"),
    "tick": ("frame", float, "frame"),
    "p_tx": ("energy", float, "energy"),
    "p_rx": ("energy", float, "energy"),
    "p_idle": ("energy", float, "energy"),
    "p_sleep": ("energy", float, "energy"),
    "pattern": ("traffic", str, "traffic"),
    "sources": ("traffic", _sources, "traffic"),
    "sink": ("traffic", _opt_int, "traffic"),
    "burst": ("traffic", int, "traffic"),
    "rate": ("traffic", float, "traffic"),
    "start_frame": ("traffic", int, "traffic"),
    "jitter": ("traffic", _bool, "traffic"),
    "count": ("traffic", int, "traffic"),
}
SECTIONS = {s for s, _, _ in _KEYS.values()}


def parse_scenario(text: str) -> Scenario:
    section = None
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioParseError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ScenarioParseError(f"unknown section [{section}]", lineno)
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ScenarioParseError(f"expected key=value, got {raw.strip()!r}", lineno)
        key = key.strip()
        if key not in _KEYS:
            raise ScenarioParseError(f"unknown key {key!r}", lineno)
        want_section, conv, _ = _KEYS[key]
        if section is not None and section != want_section:
            raise ScenarioParseError(f"key {key!r} belongs in [{want_section}], not [{section}]", lineno)
        if key in values:
            raise ScenarioParseError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = conv(val.strip())
        except ValueError as e:
            raise ScenarioParseError(f"bad value for {key!r}: {e}", lineno) from None
    return build_scenario(values)


def build_scenario(values: dict) -> Scenario:
    base = default_scenario()
    top, fr, tr, en = {}, {}, {}, {}
    for key, v in values.items():
        target = _KEYS[key][2]
        if target == "top":
            top[key] = v
        elif target == "topology_spec":
            top["topology_spec"] = v
        elif target == "frame":
            fr[key] = v
        elif target == "traffic":
            tr[key] = v
        else:
            en[key] = v
    try:
        frame = dataclasses.replace(base.frame, **fr)
    except ConfigError as e:
        bad = next((k for k in fr if k in str(e)), None) or next(iter(fr), "frame")
        raise ScenarioValidationError(bad, str(e)) from None
    try:
        energy = dataclasses.replace(base.energy, **en)
    except ValueError as e:
        raise ScenarioValidationError(next(iter(en), "energy"), str(e)) from None
    traffic = dataclasses.replace(base.traffic, **tr)
    return dataclasses.replace(base, frame=frame, energy=energy, traffic=traffic, **top)


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text())
