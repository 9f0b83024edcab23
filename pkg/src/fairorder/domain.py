"""Core vocabulary: invocations, timestamps, slots, ledgers, scores.

All times are integer microseconds. Timestamps must fit in 63 bits so that
sums with noise never overflow on any platform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

MAX_TIMESTAMP = 2**63 - 1


class ContractError(ValueError):
    """A caller violated an operation's precondition."""


def median_timestamp(timestamps) -> int:
    """Median of an odd-length timestamp list (the (f+1)-th smallest of 2f+1).

    As long as at most f entries are adversarial, the result is bounded on
    both sides by entries contributed by correct nodes.
    """
    ts = list(timestamps)
    if not ts or len(ts) % 2 == 0:
        raise ContractError(f"median requires an odd-length nonempty list, got {len(ts)} entries")
    ts.sort()
    return ts[len(ts) // 2]


@dataclass(frozen=True)
class ScoreInput:
    """The relevant features of one invocation: its time plus optional extras."""

    invocation_time: int
    extra_features: tuple = ()  # ordered (name, value) pairs

    def __post_init__(self):
        names = [name for name, _ in self.extra_features]
        if len(names) != len(set(names)):
            raise ContractError(f"duplicate feature names: {names}")


@dataclass(frozen=True)
class TimeOnly:
    """Score = invocation time, unchanged."""


@dataclass(frozen=True)
class LinearCombination:
    """Score = round(w_time * time + sum_i w_i * feature_i).

    weights[0] applies to invocation_time; weights[1:] align with
    extra_features in order.
    """

    weights: tuple


ScoreFormula = TimeOnly | LinearCombination


def score(inp: ScoreInput, formula: ScoreFormula) -> int:
    """Map relevant features to an integer score (microsecond-equivalent units).

    Pure in ScoreInput: two invocations with equal relevant features always
    score equally, whatever their identity or origin.
    """
    if isinstance(formula, TimeOnly):
        return inp.invocation_time
    if isinstance(formula, LinearCombination):
        if len(formula.weights) != 1 + len(inp.extra_features):
            raise ContractError(
                f"expected {1 + len(inp.extra_features)} weights, got {len(formula.weights)}"
            )
        total = formula.weights[0] * inp.invocation_time
        for w, (_, value) in zip(formula.weights[1:], inp.extra_features):
            total += w * value
        return round(total)
    raise ContractError(f"unknown score formula: {formula!r}")


@dataclass(frozen=True)
class Invocation:
    """A client command with its true send time and relevant features."""

    command_id: bytes
    payload: bytes
    invoke_time: int
    relevant_features: ScoreInput

    def __post_init__(self):
        if self.invoke_time < 0:
            raise ContractError("invoke_time must be >= 0")


def make_command_id(*parts) -> bytes:
    """Hash-sized unique id from arbitrary labels (ints, strs, bytes, tuples)."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, (tuple, list)):
            p = make_command_id(*p)
        elif isinstance(p, int):
            p = p.to_bytes(8, "big", signed=True)
        elif isinstance(p, str):
            p = p.encode()
        h.update(len(p).to_bytes(4, "big"))
        h.update(p)
    return h.digest()


@dataclass(frozen=True)
class TimestampedCommand:
    """An invocation bound to its quorum timestamps, noise, and sort key."""

    invocation: Invocation
    node_timestamps: tuple  # ((node_id, ts_us), ...), exactly 2f+1 entries
    assigned_ts: int
    noise: int
    modified_ts: int

    def __post_init__(self):
        values = [ts for _, ts in self.node_timestamps]
        if median_timestamp(values) != self.assigned_ts:
            raise ContractError("assigned_ts is not the median of node_timestamps")
        if self.noise < 0:
            raise ContractError("noise must be >= 0")
        if self.modified_ts != self.assigned_ts + self.noise:
            raise ContractError("modified_ts != assigned_ts + noise")
        if self.modified_ts > MAX_TIMESTAMP:
            raise ContractError("timestamp overflow (must fit in 63 bits)")

    @property
    def command_id(self) -> bytes:
        return self.invocation.command_id


@dataclass(frozen=True)
class Slot:
    """One consensus decision: a time interval and the commands assigned to it."""

    index: int
    interval_start: int
    interval_end: int
    decided_commands: tuple = ()
    decision_certificate: frozenset = frozenset()  # {(node_id, signature_bytes)}

    def __post_init__(self):
        if self.interval_end <= self.interval_start:
            raise ContractError("slot interval must be nonempty")
        for cmd in self.decided_commands:
            if not (self.interval_start <= cmd.assigned_ts < self.interval_end):
                raise ContractError("decided command outside slot interval")
        ids = {node for node, _ in self.decision_certificate}
        if len(ids) != len(self.decision_certificate):
            raise ContractError("duplicate node in decision certificate")


@dataclass
class Ledger:
    """Final output order: command ids, stable up to the watermark."""

    entries: list = field(default_factory=list)  # command_ids in output order
    stable_watermark: int = 0

    def position(self, command_id: bytes) -> int:
        return self.entries.index(command_id)

    def precedes(self, first: bytes, second: bytes) -> bool:
        return self.position(first) < self.position(second)


def tie_break_key(slot_seed: bytes, command_id: bytes) -> bytes:
    """Deterministic per-command sort key for equal modified timestamps.

    Keyed by a slot seed rather than arrival order, so the outcome cannot
    encode irrelevant features like network position.
    """
    return hashlib.sha256(slot_seed + command_id).digest()


def tie_break(a: TimestampedCommand, b: TimestampedCommand, slot_seed: bytes) -> int:
    """Total order on commands with equal modified_ts: -1, 0, or +1."""
    if a.modified_ts != b.modified_ts:
        raise ContractError("tie_break applies only to equal modified timestamps")
    ka = (tie_break_key(slot_seed, a.command_id), a.command_id)
    kb = (tie_break_key(slot_seed, b.command_id), b.command_id)
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0
