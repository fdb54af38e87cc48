"""Radio power model and exact per-mode time accounting."""

from __future__ import annotations

from dataclasses import dataclass

MODES = ("sleep", "idle_listen", "rx", "tx")


class EnergyOrderingError(AssertionError):
    pass


@dataclass(frozen=True)
class EnergyModel:
    """Power draw per radio mode, in milliwatts."""

    p_tx: float
    p_rx: float
    p_idle: float
    p_sleep: float

    def __post_init__(self):
        if not (self.p_idle > self.p_sleep >= 0):
            raise ValueError("need p_idle > p_sleep >= 0")
        if not (self.p_rx >= self.p_idle):
            raise ValueError("need p_rx >= p_idle")
        if not (self.p_tx >= self.p_rx):
            raise ValueError("need p_tx >= p_rx")

    def power(self, mode: str) -> float:
        return {"sleep": self.p_sleep, "idle_listen": self.p_idle, "rx": self.p_rx, "tx": self.p_tx}[mode]


# Arbitrary but fixed; only ratios are meaningful.
DEFAULT_ENERGY = EnergyModel(p_tx=60.0, p_rx=45.0, p_idle=45.0, p_sleep=0.09)


class EnergyLedger:
    """Integer-tick durations per node and radio mode."""

    def __init__(self, nodes, tick_seconds: float = 1e-6):
        self.tick_seconds = tick_seconds
        self.durations: dict[int, dict[str, int]] = {n: dict.fromkeys(MODES, 0) for n in nodes}
        self._cursor: dict[int, int] = dict.fromkeys(nodes, 0)

    def account_energy(self, node: int, mode: str, start: int, end: int) -> None:
        if mode not in MODES:
            raise ValueError(f"unknown radio mode {mode!r}")
        if end < start or start != self._cursor[node]:
            raise EnergyOrderingError(
                f"node {node}: interval [{start}, {end}) does not continue from {self._cursor[node]}"
            )
        self.durations[node][mode] += end - start
        self._cursor[node] = end

    def elapsed(self, node: int) -> int:
        return self._cursor[node]

    def energy_mj(self, node: int, model: EnergyModel) -> float:
        """Millijoules consumed by ``node``."""
        d = self.durations[node]
        return sum(d[m] * model.power(m) for m in MODES) * self.tick_seconds

    def network_energy_mj(self, model: EnergyModel) -> float:
        return sum(self.energy_mj(n, model) for n in sorted(self.durations))

    def snapshot(self) -> dict[int, dict[str, int]]:
        return {n: dict(d) for n, d in self.durations.items()}
