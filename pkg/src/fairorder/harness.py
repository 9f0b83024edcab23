"""Experiment runner: deterministic configs in, CSV tables out.

A config file is line-oriented ``key = value`` text, one experiment per
file.  Scenario kinds: geo_bias, tradeoff_curve, sandwich, liquidation,
bounds_table.  Every run is fully determined by (config, seed): reruns
produce byte-identical output files.

Policy specs are strings: ``pompe``, ``receive``, ``leader:<period_ms>``,
``bercow:<noise_ms>``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import analysis, attacks
from .adversary import AdversaryPlan, private_relay_placement
from .consensus import (
    OrderingPolicy,
    PlacedInvocation,
    PolicyKind,
    SimulationRun,
    order_leader_rotation,
    order_receive_all_correct,
    run_slotted,
)
from .domain import Invocation, ScoreInput, make_command_id
from .netmodel import CityTopology, bundled_topology, load_topology
from .sro import Backend, SroConfig, sro_init

TOPOLOGY_DIR_ENV = "FAIRORDER_TOPOLOGY_DIR"
US_PER_MS = 1000

SCENARIOS = ("geo_bias", "tradeoff_curve", "sandwich", "liquidation", "bounds_table")


class ConfigError(ValueError):
    """Bad experiment configuration."""


@dataclass
class ExperimentConfig:
    scenario: str
    topology: str = "bundled"
    policies: tuple = ("pompe",)
    delta_net_ms: int = 300
    slot_ms: int = 1500
    trials: int = 10_000
    seed: int = 0
    origins: tuple = ()
    gaps_ms: tuple = ()
    colluders: str = "0"  # node count, or "max" for f
    offsets_ms: tuple = (1, 25)
    prize_usd: int = 200_000
    bounds_n: tuple = (2, 3)
    alphas: tuple = ("1/5",)
    output: str = ""

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; pick from {SCENARIOS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.gaps_ms and list(self.gaps_ms) != sorted(self.gaps_ms):
            raise ConfigError("gap sweep must be monotone")


def parse_config(path) -> ExperimentConfig:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()

    def split(key, default):
        if key not in values:
            return default
        return tuple(part.strip() for part in values[key].split(",") if part.strip())

    def num_list(key, default):
        return tuple(int(x) for x in split(key, default))

    try:
        return ExperimentConfig(
            scenario=values.get("scenario", ""),
            topology=values.get("topology", "bundled"),
            policies=split("policies", ("pompe",)),
            delta_net_ms=int(values.get("dnet_ms", 300)),
            slot_ms=int(values.get("slot_ms", 1500)),
            trials=int(values.get("trials", 10_000)),
            seed=int(values.get("seed", 0)),
            origins=split("origins", ()),
            gaps_ms=num_list("gaps_ms", ()),
            colluders=values.get("colluders", "0"),
            offsets_ms=num_list("offsets_ms", (1, 25)),
            prize_usd=int(values.get("prize_usd", 200_000)),
            bounds_n=num_list("bounds_n", (2, 3)),
            alphas=split("alphas", ("1/5",)),
            output=values.get("output", ""),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_policy(spec: str) -> OrderingPolicy:
    name, _, arg = spec.partition(":")
    if name == "pompe":
        return OrderingPolicy.pompe()
    if name == "receive":
        return OrderingPolicy.receive()
    if name == "leader":
        return OrderingPolicy.leader(int(arg or 1500) * US_PER_MS)
    if name == "bercow":
        if not arg:
            raise ConfigError("bercow policy needs a noise width, e.g. bercow:1500")
        return OrderingPolicy.bercow(int(arg) * US_PER_MS)
    raise ConfigError(f"unknown policy {spec!r}")


def resolve_topology(name: str) -> CityTopology:
    if name in ("", "bundled"):
        return bundled_topology()
    if not os.path.isabs(name) and not os.path.exists(name):
        base = os.environ.get(TOPOLOGY_DIR_ENV)
        if base and os.path.exists(os.path.join(base, name)):
            return load_topology(os.path.join(base, name))
    return load_topology(name)


@dataclass
class TableResult:
    header: tuple
    rows: list = field(default_factory=list)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()


def emit_csv(result: TableResult, path):
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.to_csv_text())
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


def emit_plot_data(result: TableResult, path, x=0, series=1, y=2):
    """Long-format (x, series, y) projection of a table, for plotting tools."""
    out = TableResult(header=("x", "series", "y"))
    for row in result.rows:
        out.rows.append((row[x], row[series], row[y]))
    emit_csv(out, path)


def _fmt_prob(x) -> str:
    return f"{float(x):.6f}"


def _fmt_usd(x) -> str:
    return f"{float(x):.2f}"


def _sro_for(topology: CityTopology, seed: int):
    f = (topology.n_nodes - 1) // 3
    rng_seed = hashlib.sha256(b"sro" + seed.to_bytes(8, "big", signed=True)).digest()
    handle = sro_init(SroConfig(n=topology.n_nodes, f=f, backend=Backend.SEEDED_HASH), rng_seed)
    return f, handle


def _mk_invocation(t_us: int, *id_parts) -> Invocation:
    return Invocation(
        command_id=make_command_id(*id_parts),
        payload=b"",
        invoke_time=t_us,
        relevant_features=ScoreInput(invocation_time=t_us),
    )


def _run_policy_once(
    policy, placed, topology, f, sro, delta_net_us, slot_us, trial_seed, plan=None
):
    """One trial under any policy; returns the ledger."""
    if policy.kind in (PolicyKind.POMPE_MEDIAN, PolicyKind.BERCOW_NOISE):
        sim = SimulationRun(
            topology=topology,
            policy=policy,
            delta_net_us=delta_net_us,
            slot_interval_us=slot_us,
            f=f,
            invocations=placed,
            sro=sro,
            rng_seed=trial_seed,
            adversary=plan or AdversaryPlan(),
        )
        return run_slotted(sim).ledger
    rng = np.random.default_rng(trial_seed)
    if policy.kind is PolicyKind.LEADER_ROTATION:
        return order_leader_rotation(
            placed, topology, policy.rotation_period_us, delta_net_us, rng
        )
    return order_receive_all_correct(placed, topology, delta_net_us, rng)


def _trial_seed(config_seed: int, *tags) -> list:
    # hash() is salted per process; a digest keeps trial streams stable across runs
    digest = hashlib.sha256(repr(tags).encode()).digest()
    return [config_seed & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest[:8], "big")]


def run_geo_bias(config: ExperimentConfig) -> TableResult:
    """Pr[A first] - Pr[B first] for simultaneous invocations per city pair."""
    if len(config.origins) < 2:
        raise ConfigError("geo_bias needs at least two origin cities")
    topology = resolve_topology(config.topology)
    f, sro = _sro_for(topology, config.seed)
    delta_net_us = config.delta_net_ms * US_PER_MS
    slot_us = config.slot_ms * US_PER_MS
    t0 = slot_us // 2  # mid-slot, away from boundaries
    result = TableResult(header=("city_a", "city_b", "policy", "pr_a_first", "diff", "trials"))
    for pi, pair in enumerate(_pairs(config.origins)):
        city_a, city_b = pair
        for spec in config.policies:
            policy = parse_policy(spec)
            wins_a = 0
            for trial in range(config.trials):
                inv_a = _mk_invocation(t0, "geo", pi, spec, trial, "a")
                inv_b = _mk_invocation(t0, "geo", pi, spec, trial, "b")
                placed = [
                    PlacedInvocation(inv_a, city_a),
                    PlacedInvocation(inv_b, city_b),
                ]
                ledger = _run_policy_once(
                    policy, placed, topology, f, sro, delta_net_us, slot_us,
                    _trial_seed(config.seed, "geo", pi, spec, trial),
                )
                if ledger.precedes(inv_a.command_id, inv_b.command_id):
                    wins_a += 1
            pr_a = Fraction(wins_a, config.trials)
            result.rows.append(
                (city_a, city_b, spec, _fmt_prob(pr_a), _fmt_prob(2 * pr_a - 1), config.trials)
            )
    return result


def _pairs(origins):
    return [(a, b) for i, a in enumerate(origins) for b in origins[i + 1 :]]


def run_tradeoff_curve(config: ExperimentConfig) -> TableResult:
    """Pr[early sender first] as its head start grows.

    The disadvantaged city (higher median latency to the quorum) invokes
    ``gap`` ms before the advantaged city; the curve must reach 1.0 once
    the gap clears the policy's inversion horizon.
    """
    if len(config.origins) != 2:
        raise ConfigError("tradeoff_curve needs exactly two origin cities")
    if not config.gaps_ms:
        raise ConfigError("tradeoff_curve needs a gap sweep")
    topology = resolve_topology(config.topology)
    f, sro = _sro_for(topology, config.seed)
    delta_net_us = config.delta_net_ms * US_PER_MS
    slot_us = config.slot_ms * US_PER_MS

    def quorum_median(city):
        delays = sorted(topology.delays_from(city))[: 2 * f + 1]
        return delays[len(delays) // 2]

    slow, fast = sorted(config.origins, key=quorum_median, reverse=True)[:2]
    result = TableResult(
        header=("gap_ms", "policy", "early_city", "pr_early_first", "trials")
    )
    for spec in config.policies:
        policy = parse_policy(spec)
        for gap_ms in config.gaps_ms:
            gap_us = gap_ms * US_PER_MS
            t0 = slot_us // 2
            wins_early = 0
            for trial in range(config.trials):
                inv_early = _mk_invocation(t0, "gap", spec, gap_ms, trial, "early")
                inv_late = _mk_invocation(t0 + gap_us, "gap", spec, gap_ms, trial, "late")
                placed = [
                    PlacedInvocation(inv_early, slow),
                    PlacedInvocation(inv_late, fast),
                ]
                ledger = _run_policy_once(
                    policy, placed, topology, f, sro, delta_net_us, slot_us,
                    _trial_seed(config.seed, "gap", spec, gap_ms, trial),
                )
                if ledger.precedes(inv_early.command_id, inv_late.command_id):
                    wins_early += 1
            result.rows.append(
                (
                    gap_ms,
                    spec,
                    slow,
                    _fmt_prob(Fraction(wins_early, config.trials)),
                    config.trials,
                )
            )
    return result


def _colluder_ids(config: ExperimentConfig, topology: CityTopology, f: int):
    if config.colluders == "max":
        count = f
    else:
        count = int(config.colluders)
    if count < 0 or count > f:
        raise ConfigError(f"colluders must be in [0, f={f}]")
    n = topology.n_nodes
    return tuple(range(n - count, n))


def run_sandwich(config: ExperimentConfig) -> TableResult:
    """Permutation frequencies and attacker profit for the bracketing attack.

    Victim invokes from origins[0], the attacker's two commands from
    origins[1].  Colluding nodes misreport timestamps around the victim for
    the median-timestamp policies; the leader/receive baselines run honest.
    """
    if len(config.origins) != 2:
        raise ConfigError("sandwich needs (victim_city, attacker_city) origins")
    victim_city, attacker_city = config.origins
    topology = resolve_topology(config.topology)
    f, sro = _sro_for(topology, config.seed)
    delta_net_us = config.delta_net_ms * US_PER_MS
    slot_us = config.slot_ms * US_PER_MS
    colluders = _colluder_ids(config, topology, f)
    scenario = attacks.default_scenario()
    offsets_us = tuple(ms * US_PER_MS for ms in config.offsets_ms)
    t0 = slot_us // 2
    result = TableResult(
        header=("policy", "order", "frequency", "victim_usd", "attacker_usd")
    )
    table = attacks.payoff_table(scenario)
    for spec in config.policies:
        policy = parse_policy(spec)
        counts = {order: 0 for order in attacks.PERMUTATIONS}
        for trial in range(config.trials):
            i1 = _mk_invocation(t0, "sand", spec, trial, "i1")
            i2 = _mk_invocation(t0 + offsets_us[0], "sand", spec, trial, "i2")
            i3 = _mk_invocation(t0 + offsets_us[1], "sand", spec, trial, "i3")
            placed = [
                PlacedInvocation(i1, victim_city),
                PlacedInvocation(i2, attacker_city),
                PlacedInvocation(i3, attacker_city),
            ]
            plan = None
            if colluders and policy.kind in (PolicyKind.POMPE_MEDIAN, PolicyKind.BERCOW_NOISE):
                plan = private_relay_placement(
                    (i1, victim_city), ((i2, attacker_city), (i3, attacker_city)),
                    colluders, topology, delta_net_us, f,
                )
            ledger = _run_policy_once(
                policy, placed, topology, f, sro, delta_net_us, slot_us,
                _trial_seed(config.seed, "sand", spec, trial), plan=plan,
            )
            label = {i1.command_id: "i1", i2.command_id: "i2", i3.command_id: "i3"}
            counts[tuple(label[c] for c in ledger.entries)] += 1
        freqs = {order: Fraction(c, config.trials) for order, c in counts.items()}
        expected = attacks.expected_attacker_profit(scenario, freqs)
        for order in attacks.PERMUTATIONS:
            victim_usd, attacker_usd = table[order]
            result.rows.append(
                (
                    spec,
                    "-".join(order),
                    _fmt_prob(freqs[order]),
                    _fmt_usd(victim_usd),
                    _fmt_usd(attacker_usd),
                )
            )
        result.rows.append((spec, "expected", "1.000000", "", _fmt_usd(expected)))
    return result


def run_liquidation(config: ExperimentConfig) -> TableResult:
    """Expected liquidation payout per client when only the first wins."""
    if len(config.origins) != 2:
        raise ConfigError("liquidation needs exactly two origin cities")
    geo = run_geo_bias(replace(config, scenario="geo_bias"))
    result = TableResult(header=("policy", "city", "pr_first", "expected_usd"))
    for city_a, city_b, spec, pr_a, _, _ in geo.rows:
        p = Fraction(pr_a)
        values = attacks.liquidation_expected_values([p, 1 - p], config.prize_usd)
        result.rows.append((spec, city_a, _fmt_prob(p), _fmt_usd(values[0])))
        result.rows.append((spec, city_b, _fmt_prob(1 - p), _fmt_usd(values[1])))
    return result


def run_bounds_table(config: ExperimentConfig) -> TableResult:
    """Closed-form equality/linearizability figures over (n, alpha) grid."""
    delta_net_us = config.delta_net_ms * US_PER_MS
    result = TableResult(
        header=("n", "alpha", "epsilon", "lower", "upper", "delta_us")
    )
    for n in config.bounds_n:
        for alpha_text in config.alphas:
            alpha = Fraction(alpha_text)
            eps = analysis.epsilon_general(n, alpha)
            lower, upper = analysis.order_prob_bounds(n, alpha)
            delta_noise_us = int(delta_net_us / alpha)
            delta = analysis.delta_linearizability(delta_net_us, delta_noise_us)
            result.rows.append(
                (n, str(alpha), _fmt_prob(eps), _fmt_prob(lower), _fmt_prob(upper), delta)
            )
    return result


RUNNERS = {
    "geo_bias": run_geo_bias,
    "tradeoff_curve": run_tradeoff_curve,
    "sandwich": run_sandwich,
    "liquidation": run_liquidation,
    "bounds_table": run_bounds_table,
}


def run_experiment(config: ExperimentConfig) -> TableResult:
    return RUNNERS[config.scenario](config)
