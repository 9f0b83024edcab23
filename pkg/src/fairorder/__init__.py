"""Ordered consensus with equal opportunity: simulator, oracle, analysis."""

from .analysis import (
    BoundQuery,
    delta_linearizability,
    epsilon_general,
    epsilon_pair,
    order_prob_bounds,
    order_prob_integrate,
    order_prob_monte_carlo,
)
from .consensus import (
    OrderingPolicy,
    PlacedInvocation,
    PolicyKind,
    SimulationRun,
    order_leader_rotation,
    order_receive_all_correct,
    run_slotted,
)
from .domain import (
    Invocation,
    Ledger,
    ScoreInput,
    Slot,
    TimestampedCommand,
    median_timestamp,
    score,
    tie_break,
)
from .netmodel import CityTopology, DelayModel, bundled_topology, load_topology, observe
from .sro import Backend, RevealRequest, SroConfig, generate_proof, reveal, sro_init, verify

__all__ = [
    "Backend",
    "BoundQuery",
    "CityTopology",
    "DelayModel",
    "Invocation",
    "Ledger",
    "OrderingPolicy",
    "PlacedInvocation",
    "PolicyKind",
    "RevealRequest",
    "ScoreInput",
    "SimulationRun",
    "Slot",
    "SroConfig",
    "TimestampedCommand",
    "bundled_topology",
    "delta_linearizability",
    "epsilon_general",
    "epsilon_pair",
    "generate_proof",
    "load_topology",
    "median_timestamp",
    "observe",
    "order_leader_rotation",
    "order_prob_bounds",
    "order_prob_integrate",
    "order_prob_monte_carlo",
    "order_receive_all_correct",
    "reveal",
    "run_slotted",
    "score",
    "sro_init",
    "tie_break",
    "verify",
]
