"""Slotted agreement and the ordering policies under comparison.

``run_slotted`` drives an idealized per-slot agreement: commands whose
median timestamps fall inside a slot's interval are decided together, a
certificate of n - f signatures over the slot index materializes, and only
then is the slot's random seed revealed.  With the noised-median policy
each decided command receives uniform noise keyed by its own id, so its
final position cannot depend on other commands or on anything the nodes
chose before the seed existed.  A command is emitted (stable) once any
decided slot's interval end exceeds its noised timestamp.

Two simplified baselines are provided for comparison: rotating-leader
ordering (each leader emits what it has received, in its own receive
order) and all-correct receive ordering (a command precedes another only
if every node received it first; ties resolved by median receive time).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .adversary import AdversaryPlan, QUORUM_HIGH, QUORUM_LOW, clamp_to_window
from .domain import (
    ContractError,
    Invocation,
    Ledger,
    Slot,
    TimestampedCommand,
    median_timestamp,
    tie_break_key,
)
from .netmodel import CityTopology, ClampStats, DelayModel, observe
from .sro import RevealRequest, SroHandle


class PolicyKind(Enum):
    POMPE_MEDIAN = "pompe"
    BERCOW_NOISE = "bercow"
    LEADER_ROTATION = "leader"
    RECEIVE_ORDER = "receive"


@dataclass(frozen=True)
class OrderingPolicy:
    kind: PolicyKind
    noise_width_us: int = 0
    rotation_period_us: int = 0

    def __post_init__(self):
        if self.kind is PolicyKind.BERCOW_NOISE and self.noise_width_us <= 0:
            raise ContractError("noise width must be positive")
        if self.kind is PolicyKind.LEADER_ROTATION and self.rotation_period_us <= 0:
            raise ContractError("rotation period must be positive")

    @classmethod
    def pompe(cls):
        return cls(PolicyKind.POMPE_MEDIAN)

    @classmethod
    def bercow(cls, noise_width_us: int):
        return cls(PolicyKind.BERCOW_NOISE, noise_width_us=noise_width_us)

    @classmethod
    def leader(cls, rotation_period_us: int):
        return cls(PolicyKind.LEADER_ROTATION, rotation_period_us=rotation_period_us)

    @classmethod
    def receive(cls):
        return cls(PolicyKind.RECEIVE_ORDER)


@dataclass(frozen=True)
class PlacedInvocation:
    invocation: Invocation
    origin_city: str


def noise_from_seed(slot_seed: bytes, command_id: bytes, width_us: int) -> int:
    """Uniform integer in [0, width) from the slot seed, keyed per command.

    64 bits of PRF output scaled by exact integer arithmetic: bias is at
    most 2^-64 and the result is identical on every platform.
    """
    if width_us <= 0:
        return 0
    word = int.from_bytes(
        hashlib.sha512(b"noise" + slot_seed + command_id).digest()[:8], "big"
    )
    return (word * width_us) >> 64


@dataclass
class SimulationRun:
    topology: CityTopology
    policy: OrderingPolicy
    delta_net_us: int
    slot_interval_us: int
    f: int
    invocations: list  # [PlacedInvocation]
    sro: SroHandle
    rng_seed: int
    delay_model: DelayModel = field(default_factory=DelayModel)
    adversary: AdversaryPlan = field(default_factory=AdversaryPlan)
    slot_origin_us: int = 0

    def __post_init__(self):
        n = self.topology.n_nodes
        if n < 3 * self.f + 1:
            raise ContractError(f"need n >= 3f+1 nodes, got n={n}, f={self.f}")
        if self.slot_interval_us <= 0:
            raise ContractError("slot interval must be positive")
        if self.sro.config.n != n or self.sro.config.f != self.f:
            raise ContractError("oracle was initialized for a different (n, f)")

    @property
    def n(self) -> int:
        return self.topology.n_nodes


@dataclass
class RunResult:
    ledger: Ledger
    commands: dict  # command_id -> TimestampedCommand
    slots: list
    emission_slot: dict  # command_id -> slot index whose decision emitted it
    clamp_stats: ClampStats


def _select_quorum(stamps, quorum_size: int, bias):
    """The 2f+1 reported timestamps a client submits.

    Honest clients take the earliest responders; an adversarial client may
    instead pick the block of stamps that drags its median down or up.
    """
    ordered = sorted(stamps, key=lambda item: (item[1], item[0]))
    if bias == QUORUM_HIGH:
        return tuple(ordered[-quorum_size:])
    if bias is not None and bias != QUORUM_LOW:
        raise ContractError(f"unknown quorum bias {bias!r}")
    return tuple(ordered[:quorum_size])


def _noised_slot(ts_us: int, origin_us: int, interval_us: int) -> int:
    return (ts_us - origin_us) // interval_us


def run_slotted(sim: SimulationRun) -> RunResult:
    """Execute per-slot agreement and return the stable ledger.

    Deterministic in (invocations, rng_seed, oracle seed): replaying a run
    reproduces every timestamp, noise draw, and emission byte for byte.
    """
    if sim.policy.kind not in (PolicyKind.POMPE_MEDIAN, PolicyKind.BERCOW_NOISE):
        raise ContractError("run_slotted handles the median-timestamp policies only")
    if not sim.invocations:
        raise ContractError("no invocations to order")
    rng = np.random.default_rng(sim.rng_seed)
    stats = ClampStats()
    drifts = sim.delay_model.sample_drifts(sim.n, rng)
    quorum_size = 2 * sim.f + 1
    plan = sim.adversary

    by_slot: dict = {}
    for placed in sim.invocations:
        inv = placed.invocation
        stamps = observe(
            inv, placed.origin_city, sim.topology, sim.delay_model,
            sim.delta_net_us, rng=rng, drifts=drifts, stats=stats,
        )
        if plan.node_overrides:
            stamps = [
                (node, plan.node_overrides.get((inv.command_id, node), ts))
                for node, ts in stamps
            ]
        quorum = _select_quorum(stamps, quorum_size, plan.quorum_bias.get(inv.command_id))
        ats = median_timestamp([ts for _, ts in quorum])
        if inv.command_id in plan.ats_overrides:
            ats = clamp_to_window(
                plan.ats_overrides[inv.command_id], inv.invoke_time, sim.delta_net_us
            )
            quorum = tuple((node, ats) for node, _ in quorum)
        if ats < sim.slot_origin_us:
            raise ContractError(
                f"assigned timestamp {ats} precedes the first slot at {sim.slot_origin_us}"
            )
        k = _noised_slot(ats, sim.slot_origin_us, sim.slot_interval_us)
        by_slot.setdefault(k, []).append((inv, quorum, ats))

    ledger = Ledger()
    commands: dict = {}
    emission_slot: dict = {}
    slots: list = []
    pending: list = []  # (modified_ts, tie_key, command_id)
    k = min(by_slot)
    last_needed = max(by_slot)
    while k <= last_needed or pending:
        start = sim.slot_origin_us + k * sim.slot_interval_us
        end = start + sim.slot_interval_us
        certificate = sim.sro.quorum_signatures(k)
        slot_seed = sim.sro.reveal(RevealRequest(k, certificate))
        decided = []
        for inv, quorum, ats in by_slot.get(k, ()):
            if sim.policy.kind is PolicyKind.BERCOW_NOISE:
                noise = noise_from_seed(slot_seed, inv.command_id, sim.policy.noise_width_us)
            else:
                noise = 0
            cmd = TimestampedCommand(
                invocation=inv,
                node_timestamps=quorum,
                assigned_ts=ats,
                noise=noise,
                modified_ts=ats + noise,
            )
            decided.append(cmd)
            commands[inv.command_id] = cmd
            pending.append(
                (cmd.modified_ts, tie_break_key(slot_seed[:32], inv.command_id), inv.command_id)
            )
            last_needed = max(
                last_needed,
                _noised_slot(cmd.modified_ts, sim.slot_origin_us, sim.slot_interval_us),
            )
        slots.append(
            Slot(
                index=k,
                interval_start=start,
                interval_end=end,
                decided_commands=tuple(decided),
                decision_certificate=certificate,
            )
        )
        ripe = sorted(entry for entry in pending if entry[0] < end)
        if ripe:
            pending = [entry for entry in pending if entry[0] >= end]
            for _, _, command_id in ripe:
                ledger.entries.append(command_id)
                emission_slot[command_id] = k
        ledger.stable_watermark = end
        k += 1
    return RunResult(ledger, commands, slots, emission_slot, stats)


def _receive_matrix(placed_invocations, topology, delay_model, delta_net_us, rng, stats=None):
    drifts = delay_model.sample_drifts(topology.n_nodes, rng)
    out = {}
    for placed in placed_invocations:
        stamps = observe(
            placed.invocation, placed.origin_city, topology, delay_model,
            delta_net_us, rng=rng, drifts=drifts, stats=stats,
        )
        out[placed.invocation.command_id] = [ts for _, ts in stamps]
    return out


def order_leader_rotation(
    placed_invocations,
    topology: CityTopology,
    rotation_period_us: int,
    delta_net_us: int,
    rng,
    delay_model: DelayModel = DelayModel(),
    tie_seed: bytes = b"leader",
    schedule=None,
    phase_us=None,
) -> Ledger:
    """Rotating-leader baseline: each period's leader proposes, in its own
    receive order, every command it has received by the period's end.

    Leadership schedule and phase default to draws from ``rng``, modeling an
    arbitrary alignment between invocations and the rotation; pass them
    explicitly to pin a scenario.
    """
    if rotation_period_us <= 0:
        raise ContractError("rotation period must be positive")
    if not placed_invocations:
        return Ledger()
    n = topology.n_nodes
    receive = _receive_matrix(placed_invocations, topology, delay_model, delta_net_us, rng)
    if schedule is None:
        schedule = [int(x) for x in rng.permutation(n)]
    phase = int(rng.integers(0, rotation_period_us)) if phase_us is None else phase_us
    batches: dict = {}
    for placed in placed_invocations:
        cmd_id = placed.invocation.command_id
        times = receive[cmd_id]
        p = (placed.invocation.invoke_time - phase) // rotation_period_us
        while True:
            leader = schedule[p % n]
            if times[leader] < phase + (p + 1) * rotation_period_us:
                batches.setdefault(p, []).append(
                    (times[leader], tie_break_key(tie_seed, cmd_id), cmd_id)
                )
                break
            p += 1
    ledger = Ledger()
    for p in sorted(batches):
        for _, _, cmd_id in sorted(batches[p]):
            ledger.entries.append(cmd_id)
    if batches:
        last = max(batches)
        ledger.stable_watermark = phase + (last + 1) * rotation_period_us
    return ledger


def all_correct_precedence(receive: dict):
    """Pairs (a, b) such that every node received a strictly before b."""
    ids = list(receive)
    pairs = set()
    for a in ids:
        for b in ids:
            if a != b and all(ra < rb for ra, rb in zip(receive[a], receive[b])):
                pairs.add((a, b))
    return pairs


def order_receive_all_correct(
    placed_invocations,
    topology: CityTopology,
    delta_net_us: int,
    rng,
    delay_model: DelayModel = DelayModel(),
    tie_seed: bytes = b"receive",
) -> Ledger:
    """All-correct receive-order baseline.

    Builds the (acyclic) relation "every node received a before b" and
    emits a linear extension, ordering by median receive time and breaking
    exact ties with the seeded hash.  Median receive time respects the
    relation: if a beats b at every node, a's k-th order statistic is
    strictly smaller than b's.
    """
    if not placed_invocations:
        return Ledger()
    receive = _receive_matrix(placed_invocations, topology, delay_model, delta_net_us, rng)

    def sort_key(cmd_id):
        times = sorted(receive[cmd_id])
        return (times[len(times) // 2], tie_break_key(tie_seed, cmd_id), cmd_id)

    ordered = sorted(receive, key=sort_key)
    position = {cmd_id: i for i, cmd_id in enumerate(ordered)}
    for a, b in all_correct_precedence(receive):
        if position[a] > position[b]:  # pragma: no cover - median order extends the relation
            raise AssertionError("output violates all-correct receive precedence")
    ledger = Ledger(entries=ordered)
    if ordered:
        ledger.stable_watermark = max(max(receive[c]) for c in receive) + 1
    return ledger


def assert_no_far_inversions(result: RunResult, delta_us: int):
    """Check no pair invoked more than delta apart is inverted in a ledger."""
    order = {cmd_id: i for i, cmd_id in enumerate(result.ledger.entries)}
    cmds = list(result.commands.values())
    for a in cmds:
        for b in cmds:
            gap = b.invocation.invoke_time - a.invocation.invoke_time
            if gap > delta_us and order[a.command_id] > order[b.command_id]:
                raise AssertionError(
                    f"inversion across {gap} µs gap "
                    f"(> {delta_us}): {a.command_id.hex()[:8]} after {b.command_id.hex()[:8]}"
                )
