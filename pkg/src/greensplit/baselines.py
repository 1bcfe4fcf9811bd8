"""Static reference policies and the policy enumeration.

D-RAN keeps the whole chain at the DUs; C-RAN moves every split-eligible
type entirely to the CU.  Neither learns anything about energy, so both
greedily dispatch the feasible maximum of renewable energy each step.
"""

from __future__ import annotations

from enum import Enum

from .env import NodeAction, Observation
from .model import FunctionChain, TrafficType

__all__ = ["PolicyKind", "dran_policy", "cran_policy"]


class PolicyKind(Enum):
    DRAN = "dran"
    CRAN = "cran"
    RLDFS_QL = "rldfs_ql"
    RLDFS_SARSA = "rldfs_sarsa"
    ORACLE = "oracle"

    @property
    def trained(self) -> bool:
        return self in (PolicyKind.RLDFS_QL, PolicyKind.RLDFS_SARSA)

    @property
    def algorithm(self) -> str:
        if self is PolicyKind.RLDFS_QL:
            return "q_learning"
        if self is PolicyKind.RLDFS_SARSA:
            return "sarsa"
        raise ValueError(f"{self.value} is not a trained policy")


def _nonpinned_count(types) -> int:
    return sum(1 for ty in types if not ty.pinned_to_du)


def dran_policy(observation: Observation, *, chain: FunctionChain,
                types: tuple[TrafficType, ...], n_levels: int,
                for_cu: bool = False) -> NodeAction:
    """Everything at the DUs, renewable use maximal."""
    del observation  # static policy
    if for_cu:
        return NodeAction(dispatch_level=n_levels - 1)
    splits = (chain.count,) * _nonpinned_count(types)
    return NodeAction(dispatch_level=n_levels - 1, split_points=splits)


def cran_policy(observation: Observation, *, chain: FunctionChain,
                types: tuple[TrafficType, ...], n_levels: int,
                for_cu: bool = False) -> NodeAction:
    """Split-eligible traffic fully centralized, renewable use maximal."""
    del observation
    if for_cu:
        return NodeAction(dispatch_level=n_levels - 1)
    splits = (0,) * _nonpinned_count(types)
    return NodeAction(dispatch_level=n_levels - 1, split_points=splits)
