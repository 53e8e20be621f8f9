"""Predictive grouping of targets and greedy agent-to-group assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .estimation import FilterParams, TargetEstimate
from .vehicle import AgentState

__all__ = [
    "ClusterParams",
    "ClusterAssignment",
    "predict_paths",
    "cluster_targets",
    "group_centroids",
    "assign_agents",
    "cluster_and_assign",
]


@dataclass(frozen=True)
class ClusterParams:
    """Grouping thresholds.

    Two targets merge when their end-of-horizon positions are closer than
    ``split_distance`` and their travel headings differ by at most
    ``angle_threshold``. A target whose predicted displacement is below
    ``min_displacement`` has no meaningful heading and matches any heading.
    """

    split_distance: float = 40.0
    angle_threshold: float = math.radians(30.0)
    horizon: int = 3
    min_displacement: float = 0.5

    def __post_init__(self):
        if not self.split_distance > 0:
            raise ValueError("split_distance must be positive")
        if not 0 < self.angle_threshold < math.pi:
            raise ValueError("angle_threshold must lie in (0, pi)")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.min_displacement < 0:
            raise ValueError("min_displacement must be >= 0")


@dataclass(frozen=True)
class ClusterAssignment:
    groups: tuple[tuple[int, ...], ...]
    centroids: np.ndarray
    agent_to_group: Mapping[int, int]

    def group_of(self, agent_id: int) -> tuple[int, ...]:
        return self.groups[self.agent_to_group[agent_id]]


def predict_paths(
    estimates: Sequence[TargetEstimate], params: FilterParams, K: int
) -> dict[int, np.ndarray]:
    """Open-loop mean predictions, ``K`` future (x, y) positions per target."""
    if K < 1:
        raise ValueError("K must be >= 1")
    A = params.transition
    out = {}
    for est in estimates:
        m = est.mean
        path = np.empty((K, 2))
        for k in range(K):
            m = A @ m
            path[k] = m[:2]
        out[est.target_id] = path
    return out


def _heading_gap(a: float, b: float) -> float:
    gap = abs(a - b) % (2.0 * math.pi)
    return min(gap, 2.0 * math.pi - gap)


def cluster_targets(
    predicted_paths: Mapping[int, np.ndarray],
    params: ClusterParams,
    current_positions: Mapping[int, np.ndarray] | None = None,
) -> tuple[tuple[int, ...], ...]:
    """Partition targets into groups.

    Displacement is measured from the current position (or the first
    predicted point when none is given) to the end of the horizon. Groups are
    the connected components of the merge relation, listed in ascending
    order of their smallest target id.
    """
    ids = sorted(predicted_paths)
    if not ids:
        raise ValueError("at least one target is required")
    ends = {i: np.asarray(predicted_paths[i], dtype=float)[-1] for i in ids}
    headings = {}
    for i in ids:
        start = (
            np.asarray(current_positions[i], dtype=float)[:2]
            if current_positions is not None
            else np.asarray(predicted_paths[i], dtype=float)[0]
        )
        disp = ends[i] - start
        headings[i] = math.atan2(disp[1], disp[0]) if np.hypot(*disp) >= params.min_displacement else None

    parent = {i: i for i in ids}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_idx, a in enumerate(ids):
        for b in ids[a_idx + 1:]:
            close = np.hypot(*(ends[a] - ends[b])) < params.split_distance
            ha, hb = headings[a], headings[b]
            aligned = ha is None or hb is None or _heading_gap(ha, hb) <= params.angle_threshold
            if close and aligned:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    groups: dict[int, list[int]] = {}
    for i in ids:
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(g) for _, g in sorted(groups.items()))


def group_centroids(groups, positions: Mapping[int, np.ndarray]) -> np.ndarray:
    return np.array([np.mean([np.asarray(positions[i])[:2] for i in g], axis=0) for g in groups])


def assign_agents(
    agent_states: Mapping[int, AgentState] | Sequence[AgentState],
    groups: Sequence[Sequence[int]],
    centroids,
) -> dict[int, int]:
    """Greedy assignment in ascending agent id.

    Each agent takes the nearest group nobody has claimed yet. Once every
    group is claimed, the remaining agents join the largest group (lowest
    group id on ties).
    """
    if not groups:
        raise ValueError("at least one group is required")
    if not isinstance(agent_states, Mapping):
        agent_states = dict(enumerate(agent_states))
    centroids = np.asarray(centroids, dtype=float).reshape(len(groups), 2)
    sizes = [len(g) for g in groups]
    largest = max(range(len(groups)), key=lambda g: (sizes[g], -g))
    claimed: set[int] = set()
    out = {}
    for aid in sorted(agent_states):
        free = [g for g in range(len(groups)) if g not in claimed]
        if not free:
            out[aid] = largest
            continue
        xy = agent_states[aid].position[:2]
        dist = [float(np.hypot(*(centroids[g] - xy))) for g in free]
        best = free[int(np.argmin(dist))]  # argmin keeps the lowest group id on ties
        claimed.add(best)
        out[aid] = best
    return out


def cluster_and_assign(
    estimates: Sequence[TargetEstimate],
    agent_states: Mapping[int, AgentState],
    filter_params: FilterParams,
    params: ClusterParams,
) -> ClusterAssignment:
    paths = predict_paths(estimates, filter_params, params.horizon)
    current = {e.target_id: e.position for e in estimates}
    groups = cluster_targets(paths, params, current)
    centroids = group_centroids(groups, current)
    return ClusterAssignment(groups, centroids, assign_agents(agent_states, groups, centroids))
