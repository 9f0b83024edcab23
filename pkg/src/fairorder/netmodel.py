"""Geo-distributed latency model: city topology, per-node receive timestamps.

A topology file is line-oriented plain text::

    city <name> <node_count>
    delay <cityA> <cityB> <one_way_ms>

Delays are one-way; a missing (A, B) entry falls back to (B, A).  The
bundled ``ethereum80.topo`` replicates the public distribution of Ethereum
nodes over 80 simulated nodes with representative inter-city delays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from importlib import resources

from .domain import ContractError

log = logging.getLogger(__name__)

US_PER_MS = 1000


class TopologyError(ValueError):
    """Malformed or inconsistent topology input."""


@dataclass(frozen=True)
class CityTopology:
    cities: tuple  # ((name, node_count), ...)
    latency_us: dict  # (cityA, cityB) -> one-way delay, µs
    intra_city_us: int = US_PER_MS

    def __post_init__(self):
        if not self.cities:
            raise TopologyError("topology needs at least one city")
        names = [name for name, _ in self.cities]
        if len(names) != len(set(names)):
            raise TopologyError("duplicate city names")
        for (name, count) in self.cities:
            if count <= 0:
                raise TopologyError(f"city {name} has nonpositive node count")
        known = {name for name, _ in self.cities}
        for pair, d in self.latency_us.items():
            if d < 0:
                raise TopologyError(f"negative latency for {pair}")
            for city in pair:
                if city not in known:
                    raise TopologyError(f"delay entry references unknown city {city!r}")
        object.__setattr__(self, "_delay_cache", {})

    @property
    def n_nodes(self) -> int:
        return sum(count for _, count in self.cities)

    @property
    def city_names(self) -> tuple:
        return tuple(name for name, _ in self.cities)

    def node_cities(self) -> tuple:
        """City of each node id, in city-block order."""
        out = []
        for name, count in self.cities:
            out.extend([name] * count)
        return tuple(out)

    def delay_us(self, a: str, b: str) -> int:
        if a not in self.city_names or b not in self.city_names:
            raise TopologyError(f"unknown city in pair ({a}, {b})")
        if a == b:
            return self.intra_city_us
        d = self.latency_us.get((a, b))
        if d is None:
            d = self.latency_us.get((b, a))
        if d is None:
            raise TopologyError(f"no delay entry for ({a}, {b})")
        return d

    def delays_from(self, origin: str) -> tuple:
        """Per-node one-way delay from an origin city, µs (cached)."""
        hit = self._delay_cache.get(origin)
        if hit is None:
            hit = tuple(self.delay_us(origin, city) for city in self.node_cities())
            self._delay_cache[origin] = hit
        return hit

    def max_delay_us(self) -> int:
        return max(
            self.delay_us(a, b) for a in self.city_names for b in self.city_names
        )


@dataclass(frozen=True)
class DelayModel:
    """Stochastic perturbations on top of the base delay matrix.

    jitter_ms: half-width of a uniform per-observation jitter, or None.
    clock_drift_max_us: bound on a fixed per-node clock offset.
    rng_stream: label separating this model's randomness from other streams.
    """

    jitter_ms: float | None = None
    clock_drift_max_us: int = 0
    rng_stream: str = "net"

    def sample_drifts(self, n_nodes: int, rng) -> tuple:
        if self.clock_drift_max_us == 0:
            return (0,) * n_nodes
        m = self.clock_drift_max_us
        return tuple(int(rng.integers(-m, m + 1)) for _ in range(n_nodes))


@dataclass
class ClampStats:
    """Counts raw timestamps that fell outside [T, T + delta_net]."""

    violations: int = 0
    observations: int = 0


def observe(
    invocation,
    origin_city: str,
    topology: CityTopology,
    delay_model: DelayModel,
    delta_net_us: int,
    rng=None,
    drifts=None,
    stats: ClampStats | None = None,
):
    """Per-node receive timestamps for one invocation.

    Each node sees T + delay(origin, node) + jitter + drift, clamped into
    [T, T + delta_net]: after stabilization every correct node's timestamp
    lies in that window, and the clamp enforces it while ``stats`` records
    how often the raw model violated it.
    """
    if origin_city not in topology.city_names:
        raise TopologyError(f"unknown origin city {origin_city!r}")
    t = invocation.invoke_time
    base = topology.delays_from(origin_city)
    n = topology.n_nodes
    if drifts is None:
        drifts = (0,) * n
    jitter_us = None
    if delay_model.jitter_ms is not None:
        if rng is None:
            raise ContractError("jitter requires an rng")
        half = delay_model.jitter_ms * US_PER_MS
        jitter_us = rng.uniform(-half, half, size=n)
    out = []
    hi = t + delta_net_us
    for i in range(n):
        raw = t + base[i] + drifts[i]
        if jitter_us is not None:
            raw += int(jitter_us[i])
        ts = raw
        if ts < t:
            ts = t
        elif ts > hi:
            ts = hi
        if stats is not None:
            stats.observations += 1
            if raw != ts:
                stats.violations += 1
        out.append((i, ts))
    return out


def parse_topology(text: str, source: str = "<string>") -> CityTopology:
    cities = []
    latency = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "city" and len(parts) == 3:
                cities.append((parts[1], int(parts[2])))
            elif parts[0] == "delay" and len(parts) == 4:
                ms = float(parts[3])
                if ms < 0:
                    raise TopologyError(f"{source}:{lineno}: negative latency")
                latency[(parts[1], parts[2])] = int(round(ms * US_PER_MS))
            else:
                raise TopologyError(f"{source}:{lineno}: unrecognized line {line!r}")
        except (ValueError, IndexError) as exc:
            raise TopologyError(f"{source}:{lineno}: {exc}") from exc
    for (a, b), d in latency.items():
        back = latency.get((b, a))
        if back is not None and back != d:
            log.warning("asymmetric delay %s<->%s: %d vs %d µs", a, b, d, back)
    topo = CityTopology(cities=tuple(cities), latency_us=latency)
    for a in topo.city_names:  # every pair must resolve, at least symmetrically
        for b in topo.city_names:
            topo.delay_us(a, b)
    return topo


def load_topology(path) -> CityTopology:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_topology(fh.read(), source=str(path))


def bundled_topology(name: str = "ethereum80.topo") -> CityTopology:
    text = resources.files("fairorder.data").joinpath(name).read_text(encoding="utf-8")
    return parse_topology(text, source=name)
