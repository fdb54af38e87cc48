"""Radio connectivity graphs."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


class TopologyError(ValueError):
    pass


@dataclass
class Topology:
    nodes: list[int]
    links: dict[int, frozenset[int]]
    interference: dict[int, frozenset[int]] = field(default_factory=dict)
    kind: str = "explicit"

    def __post_init__(self):
        ids = set(self.nodes)
        if not self.interference:
            self.interference = dict(self.links)
        for n in self.nodes:
            self.links.setdefault(n, frozenset())
            self.interference.setdefault(n, frozenset())
        for table, name in ((self.links, "links"), (self.interference, "interference")):
            for a, nbrs in table.items():
                if a not in ids or not nbrs <= ids:
                    raise TopologyError(f"{name} reference unknown node near {a}")
                if a in nbrs:
                    raise TopologyError(f"self loop at node {a}")
                for b in nbrs:
                    if a not in table[b]:
                        raise TopologyError(f"{name} not symmetric: {a}-{b}")
        for a in self.nodes:
            if not self.links[a] <= self.interference[a]:
                raise TopologyError(f"links of node {a} not contained in interference set")

    @classmethod
    def from_edges(cls, edges, nodes=None, interference_edges=(), kind="explicit") -> "Topology":
        edges = [tuple(e) for e in edges]
        if nodes is None:
            nodes = sorted({x for e in edges for x in e})
        adj: dict[int, set[int]] = {n: set() for n in nodes}
        for a, b in edges:
            if a not in adj or b not in adj:
                raise TopologyError(f"edge {a}-{b} references unknown node")
            adj[a].add(b)
            adj[b].add(a)
        inter = {n: set(s) for n, s in adj.items()}
        for a, b in interference_edges:
            inter[a].add(b)
            inter[b].add(a)
        return cls(
            list(nodes),
            {n: frozenset(s) for n, s in adj.items()},
            {n: frozenset(s) for n, s in inter.items()},
            kind=kind,
        )

    @classmethod
    def linear(cls, hops: int) -> "Topology":
        if hops < 1:
            raise TopologyError("linear topology needs at least one hop")
        return cls.from_edges([(i, i + 1) for i in range(hops)], kind="linear")

    @classmethod
    def star(cls, leaves: int) -> "Topology":
        """Hub 0 with ``leaves`` spokes; leaves do not hear each other."""
        if leaves < 1:
            raise TopologyError("star needs at least one leaf")
        return cls.from_edges([(0, i) for i in range(1, leaves + 1)], kind="star")

    @classmethod
    def ring(cls, n: int) -> "Topology":
        if n < 3:
            raise TopologyError("ring needs at least three nodes")
        return cls.from_edges([(i, (i + 1) % n) for i in range(n)], kind="ring")

    @classmethod
    def parse(cls, spec: str) -> "Topology":
        """``linear:H``, ``star:N``, ``ring:N`` or an edge list ``0-1,1-2``."""
        spec = spec.strip()
        if ":" in spec:
            name, _, arg = spec.partition(":")
            builders = {"linear": cls.linear, "star": cls.star, "ring": cls.ring}
            if name not in builders:
                raise TopologyError(f"unknown topology preset {name!r}")
            try:
                size = int(arg)
            except ValueError:
                raise TopologyError(f"bad topology size {arg!r}") from None
            return builders[name](size)
        edges = []
        for part in spec.split(","):
            part = part.strip()
            if not part:
                continue
            a, sep, b = part.partition("-")
            if not sep:
                raise TopologyError(f"bad edge {part!r}")
            edges.append((int(a), int(b)))
        if not edges:
            raise TopologyError("empty edge list")
        return cls.from_edges(edges)

    def hop_distances(self, root: int) -> dict[int, int]:
        dist = {root: 0}
        todo = deque([root])
        while todo:
            a = todo.popleft()
            for b in sorted(self.links[a]):
                if b not in dist:
                    dist[b] = dist[a] + 1
                    todo.append(b)
        return dist

    def next_hop(self, node: int, sink: int) -> int | None:
        """Lowest-id neighbour on a shortest path toward ``sink``."""
        if node == sink:
            return None
        dist = self.hop_distances(sink)
        if node not in dist:
            return None
        for b in sorted(self.links[node]):
            if dist.get(b) == dist[node] - 1:
                return b
        return None

    def routes_to(self, sink: int) -> dict[int, int]:
        dist = self.hop_distances(sink)
        table = {}
        for n in self.nodes:
            if n == sink or n not in dist:
                continue
            table[n] = min(b for b in self.links[n] if dist.get(b) == dist[n] - 1)
        return table

    def is_linear_chain(self) -> bool:
        if len(self.nodes) < 2:
            return False
        order = sorted(self.nodes)
        for i, n in enumerate(order):
            want = {order[j] for j in (i - 1, i + 1) if 0 <= j < len(order)}
            if set(self.links[n]) != want or set(self.interference[n]) != want:
                return False
        return True
