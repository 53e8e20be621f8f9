"""Receding-horizon controller for one agent.

The objective is the summed trace of every cluster target's covariance
over the horizon, propagated by a Kalman recursion in which a target is
"observed" (with a noiseless pseudomeasurement) at step k by every agent
whose predicted footprint contains it. Other agents' updates are applied
first, in ascending id, then the planning agent's own.

Candidate control sequences come from a per-axis lattice and are searched
exhaustively. Sequences sharing a prefix share a prefix of the
covariance recursion, so the search is organized as a tree: level k holds
every admissible prefix of length k. Infeasible prefixes are pruned as
soon as they appear. All covariance arithmetic is elementwise, so a node's
value does not depend on how many siblings are evaluated alongside it and
:func:`rollout` reproduces :func:`solve` bit for bit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .estimation import FilterParams, TargetEstimate
from .sensing import CameraSpec, DetectionProfile
from .vehicle import AgentState, VehicleParams, step_array

__all__ = [
    "PlannerConfig",
    "Plan",
    "FovBoundaryCheck",
    "fov_binaries",
    "planning_noise",
    "hover_plan",
    "rollout",
    "feasible",
    "solve",
    "lattice_controls",
]


@dataclass(frozen=True)
class PlannerConfig:
    """Planner tuning.

    ``lattice`` lists per-axis force levels as fractions of the vehicle's
    maximum force, so any level in [-1, 1] respects the acceleration limit.
    """

    horizon: int = 3
    safety_distance: float = 2.5
    noise_scale: float = 2.0
    r_floor: float = 0.05
    lattice: tuple[float, ...] = (-1.0, 0.0, 1.0)
    candidate_budget: int = 27**3
    terminal_braking: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.safety_distance > 0:
            raise ValueError("safety_distance must be positive")
        if not self.noise_scale > 0:
            raise ValueError("noise_scale must be positive")
        if not 0 <= self.r_floor <= 1:
            raise ValueError("r_floor must lie in [0, 1]")
        levels = tuple(sorted(float(v) for v in self.lattice))
        if not levels or any(abs(v) > 1 for v in levels) or len(set(levels)) != len(levels):
            raise ValueError("lattice levels must be distinct fractions in [-1, 1]")
        object.__setattr__(self, "lattice", levels)
        if len(levels) ** (3 * self.horizon) > self.candidate_budget:
            raise ValueError(
                f"{len(levels) ** (3 * self.horizon)} candidate sequences exceed the budget of "
                f"{self.candidate_budget}"
            )


@dataclass(frozen=True)
class Plan:
    agent_id: int
    controls: np.ndarray  # (K, 3) forces
    states: np.ndarray  # (K + 1, 6) predicted states, states[0] is the state at created_step
    objective: float
    created_step: int
    degraded: bool = False

    def state_at(self, step: int) -> np.ndarray:
        """Predicted state at absolute ``step``; holds the last state beyond the horizon."""
        i = min(max(step - self.created_step, 0), len(self.states) - 1)
        return self.states[i]

    def agent_states(self) -> list[AgentState]:
        return [AgentState.from_vector(x) for x in self.states]


@dataclass(frozen=True)
class FovBoundaryCheck:
    sides: tuple[bool, bool, bool, bool]  # left, right, bottom, top
    total: int
    inside: bool


def fov_binaries(agent_state: AgentState, target_xy, cam: CameraSpec) -> FovBoundaryCheck:
    """Per-side footprint checks for one target.

    Side k has half-extent z * tan(theta_k) (horizontal half-angle for left
    and right, vertical for bottom and top). With dx = x_t - x_a, the left
    side holds when -dx <= l and the right side when dx <= l; likewise in y.
    """
    th, tv = cam.half_tangents
    z = float(agent_state.position[2])
    half = (z * th, z * th, z * tv, z * tv)
    dx = float(target_xy[0]) - float(agent_state.position[0])
    dy = float(target_xy[1]) - float(agent_state.position[1])
    offsets = (-dx, dx, -dy, dy)
    sides = tuple(bool(o <= l) for o, l in zip(offsets, half))
    total = sum(sides)
    return FovBoundaryCheck(sides, total, total == 4)


def _noise_ratio(z, cfg: PlannerConfig, prof: DetectionProfile):
    return np.clip((np.asarray(z, dtype=float) - prof.alpha1) / (prof.alpha2 - prof.alpha1), cfg.r_floor, 1.0)


def planning_noise(z: float, cfg: PlannerConfig, prof: DetectionProfile) -> tuple[float, np.ndarray]:
    """Planner-side measurement std and covariance at altitude ``z``."""
    sigma = float(cfg.noise_scale * _noise_ratio(z, cfg, prof))
    return sigma, sigma * sigma * np.eye(2)


def _variance(z, cfg: PlannerConfig, prof: DetectionProfile):
    sigma = cfg.noise_scale * _noise_ratio(z, cfg, prof)
    return sigma * sigma


def lattice_controls(cfg: PlannerConfig, vehicle: VehicleParams) -> np.ndarray:
    """All per-step force vectors, ordered lexicographically by (ux, uy, uz)."""
    levels = np.asarray(cfg.lattice) * vehicle.max_force
    return np.array(list(itertools.product(levels, repeat=3)))


# ---------------------------------------------------------------------------
# covariance arithmetic on stacks of 4x4 matrices, elementwise only


def _predict_cov(P: np.ndarray, dt: float, Q: np.ndarray) -> np.ndarray:
    pp, pv = P[..., :2, :2], P[..., :2, 2:]
    vp, vv = P[..., 2:, :2], P[..., 2:, 2:]
    out = np.empty_like(P)
    out[..., :2, :2] = pp + dt * (pv + vp) + (dt * dt) * vv
    out[..., :2, 2:] = pv + dt * vv
    out[..., 2:, :2] = vp + dt * vv
    out[..., 2:, 2:] = vv
    return out + Q


def _gain_terms(P: np.ndarray, var):
    """Inverse innovation entries (s00, s01, s11) for R = var * I."""
    a = P[..., 0, 0] + var
    b = P[..., 0, 1]
    d = P[..., 1, 1] + var
    det = a * d - b * b
    return d / det, -b / det, a / det


def _correction(P: np.ndarray, var) -> np.ndarray:
    """K C P for R = var * I, i.e. the amount an update removes from P."""
    s00, s01, s11 = _gain_terms(P, var)
    g0, g1 = P[..., :, 0], P[..., :, 1]
    k0 = g0 * s00[..., None] + g1 * s01[..., None]
    k1 = g0 * s01[..., None] + g1 * s11[..., None]
    return k0[..., :, None] * P[..., None, 0, :] + k1[..., :, None] * P[..., None, 1, :]


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def _trace(P: np.ndarray) -> np.ndarray:
    return ((P[..., 0, 0] + P[..., 1, 1]) + P[..., 2, 2]) + P[..., 3, 3]


# ---------------------------------------------------------------------------
# search tree


@dataclass
class _Problem:
    """Everything about one planning call that does not depend on the candidate."""

    start: np.ndarray  # (6,)
    step: int
    horizon: int
    target_means: np.ndarray  # (K, T, 2) predicted positions at tau+1..tau+K
    target_cov: np.ndarray  # (T, 4, 4)
    others_pos: np.ndarray  # (K, M, 3)
    others_bits: np.ndarray  # (K, M, T)
    others_var: np.ndarray  # (K, M)
    cfg: PlannerConfig
    vehicle: VehicleParams
    cam: CameraSpec
    prof: DetectionProfile
    dt: float
    Q: np.ndarray


def _build_problem(
    own_state, estimates, others_plans, cfg, vehicle, cam, prof, filter_params, step
) -> _Problem:
    K = cfg.horizon
    start = own_state.as_vector() if isinstance(own_state, AgentState) else np.asarray(own_state, float).reshape(6)
    A = filter_params.transition
    T = len(estimates)
    means = np.empty((K, T, 2))
    cov = np.empty((T, 4, 4))
    for j, est in enumerate(estimates):
        m = est.mean
        cov[j] = est.covariance
        for k in range(K):
            m = A @ m
            means[k, j] = m[:2]
    others = sorted(others_plans, key=lambda p: p.agent_id)
    M = len(others)
    others_pos = np.empty((K, M, 3))
    for k in range(K):
        for i, plan in enumerate(others):
            others_pos[k, i] = plan.state_at(step + k + 1)[:3]
    th, tv = cam.half_tangents
    if M and T:
        dx = np.abs(means[:, None, :, 0] - others_pos[:, :, None, 0])
        dy = np.abs(means[:, None, :, 1] - others_pos[:, :, None, 1])
        z = others_pos[:, :, None, 2]
        bits = (dx <= z * th) & (dy <= z * tv)
    else:
        bits = np.zeros((K, M, T), dtype=bool)
    return _Problem(
        start=start,
        step=step,
        horizon=K,
        target_means=means,
        target_cov=cov,
        others_pos=others_pos,
        others_bits=bits,
        others_var=_variance(others_pos[..., 2], cfg, prof),
        cfg=cfg,
        vehicle=vehicle,
        cam=cam,
        prof=prof,
        dt=filter_params.dt,
        Q=filter_params.process_noise,
    )


def _state_ok(x: np.ndarray, vehicle: VehicleParams, tol: float = 1e-9) -> np.ndarray:
    lo, hi = vehicle.workspace
    ok = np.all(np.abs(x[:, 3:]) <= vehicle.speed_limits + tol, axis=1)
    ok &= np.all(x[:, :3] >= np.asarray(lo) - tol, axis=1)
    ok &= np.all(x[:, :3] <= np.asarray(hi) + tol, axis=1)
    return ok


def _braking_ok(p: np.ndarray, v: np.ndarray, lo: float, hi: float, vehicle: VehicleParams,
                max_steps: int = 8, tol: float = 1e-9) -> np.ndarray:
    """Whether braking at full deceleration along one axis stays in [lo, hi].

    ``p`` and ``v`` broadcast against each other. Requiring this of every
    terminal state keeps each accepted plan extendable by a safe step.
    """
    p, v = np.broadcast_arrays(np.asarray(p, float), np.asarray(v, float))
    p = p.copy()
    v = v.copy()
    ok = np.ones(p.shape, dtype=bool)
    dv = vehicle.max_acceleration * vehicle.dt  # gamma * u_max
    for _ in range(max_steps):
        if not np.any(v):
            break
        p = p + vehicle.dt * v
        ok &= (p >= lo - tol) & (p <= hi + tol)
        rv = vehicle.drag * v
        v = np.where(np.abs(rv) <= dv, 0.0, rv - np.sign(rv) * dv)
    return ok


def _separation(pos: np.ndarray, prob: _Problem, k: int) -> np.ndarray:
    """Minimum distance from each position to the other agents at horizon step k."""
    if prob.others_pos.shape[1] == 0:
        return np.full(len(pos), np.inf)
    diff = pos[:, None, :] - prob.others_pos[k - 1][None, :, :]
    return np.sqrt((diff * diff).sum(-1)).min(axis=1)


@dataclass
class _Level:
    states: np.ndarray  # (n, 6)
    parent: np.ndarray  # (n,) index into the previous level
    control: np.ndarray  # (n, 3) force that produced the node
    cov: np.ndarray | None  # (G, T, 4, 4) distinct posterior covariances, None on the leaf level
    cov_index: np.ndarray  # (n,) row of ``cov`` holding each node's covariance
    J: np.ndarray  # (n,) accumulated objective
    effort: np.ndarray  # (n,) accumulated squared force
    min_sep: np.ndarray  # (n,) smallest separation along the prefix
    violation: np.ndarray  # (n,) accumulated vehicle-bound violation, 0 when admissible


def _grow(prob: _Problem, level: _Level, k: int, axis_forces: list[np.ndarray], prune: bool) -> _Level:
    """Children of every node in ``level`` at horizon step ``k`` (1-based).

    ``axis_forces[a]`` has shape (1, L_a) to apply the same levels to every
    parent, or (n_par, 1) to give each parent its own control. Children are
    ordered parent-major, then by x, y and z level.

    A child's position depends only on its parent (position lags force by one
    step), so positions, separations and the covariance recursion are
    evaluated per parent. Velocity and braking checks are separable per
    axis and are combined by broadcasting.
    """
    veh = prob.vehicle
    par = level.states
    n_par = len(par)
    pos = par[:, :3] + veh.dt * par[:, 3:]  # identical to step_array's position update
    lo, hi = veh.workspace
    limits = veh.speed_limits
    leaf = k == prob.horizon

    vel = [veh.drag * par[:, 3 + a][:, None] + veh.gain * axis_forces[a] for a in range(3)]
    over_pos = (np.clip(np.asarray(lo) - pos, 0, None) + np.clip(pos - np.asarray(hi), 0, None)).sum(1)
    over_vel = [np.clip(np.abs(vel[a]) - limits[a], 0, None) for a in range(3)]
    viol = (
        (level.violation + over_pos)[:, None, None, None]
        + over_vel[0][:, :, None, None]
        + over_vel[1][:, None, :, None]
        + over_vel[2][:, None, None, :]
    )
    if leaf and prob.cfg.terminal_braking:
        brake = [_braking_ok(pos[:, a][:, None], vel[a], lo[a], hi[a], veh) for a in range(3)]
        brake_ok = brake[0][:, :, None, None] & brake[1][:, None, :, None] & brake[2][:, None, None, :]
        viol = viol + np.where(brake_ok, 0.0, 1.0)
    sep_par = np.minimum(level.min_sep, _separation(pos, prob, k))

    shape = (n_par, vel[0].shape[1], vel[1].shape[1], vel[2].shape[1])
    viol = np.broadcast_to(viol, shape)
    if prune:
        keep = (viol <= 0.0) & (sep_par >= prob.cfg.safety_distance)[:, None, None, None]
    else:
        keep = np.ones(shape, dtype=bool)
    parent, ix, iy, iz = np.nonzero(keep)

    force = [np.broadcast_to(axis_forces[a], vel[a].shape) for a in range(3)]
    u = np.stack([force[0][parent, ix], force[1][parent, iy], force[2][parent, iz]], axis=1)
    x = np.empty((len(parent), 6))
    x[:, :3] = pos[parent]
    x[:, 3] = vel[0][parent, ix]
    x[:, 4] = vel[1][parent, iy]
    x[:, 5] = vel[2][parent, iz]

    post = _posterior(prob, level, k, pos)
    tr = _trace(post)  # (n_par, T)
    gain = np.zeros(n_par)
    for j in range(tr.shape[1]):
        gain = gain + tr[:, j]
    effort = ((u[:, 0] * u[:, 0] + u[:, 1] * u[:, 1]) + u[:, 2] * u[:, 2])
    return _Level(
        states=x,
        parent=parent,
        control=u,
        cov=None if leaf else post,
        cov_index=parent,
        J=(level.J + gain)[parent],
        effort=level.effort[parent] + effort,
        min_sep=sep_par[parent],
        violation=viol[parent, ix, iy, iz],
    )


def _posterior(prob: _Problem, level: _Level, k: int, pos: np.ndarray) -> np.ndarray:
    """Covariances after the step for the children of each parent at ``pos``."""
    T = prob.target_cov.shape[0]
    n_par = len(pos)
    if T == 0 or n_par == 0:
        return np.zeros((n_par, T, 4, 4))
    # siblings share a covariance, so predict and apply other agents' updates once per group
    prior = _predict_cov(level.cov, prob.dt, prob.Q)  # (G, T, 4, 4)
    for m in range(prob.others_bits.shape[1]):
        bits = prob.others_bits[k - 1, m]
        if bits.any():
            var = prob.others_var[k - 1, m]
            prior[:, bits] = _symmetrize(prior[:, bits] - _correction(prior[:, bits], var))
    prior = prior[level.cov_index]  # (n_par, T, 4, 4)
    th, tv = prob.cam.half_tangents
    means = prob.target_means[k - 1]  # (T, 2)
    z = pos[:, 2]
    own = (np.abs(means[None, :, 0] - pos[:, None, 0]) <= (z * th)[:, None]) & (
        np.abs(means[None, :, 1] - pos[:, None, 1]) <= (z * tv)[:, None]
    )
    var = _variance(z, prob.cfg, prob.prof)[:, None]
    corr = _correction(prior, var)
    return _symmetrize(prior - np.where(own[..., None, None], corr, 0.0))


def _root(prob: _Problem) -> _Level:
    return _Level(
        states=prob.start[None, :].copy(),
        parent=np.zeros(1, dtype=np.int64),
        control=np.zeros((1, 3)),
        cov=prob.target_cov[None].copy(),
        cov_index=np.zeros(1, dtype=np.int64),
        J=np.zeros(1),
        effort=np.zeros(1),
        min_sep=np.full(1, np.inf),
        violation=np.zeros(1),
    )


def _search(prob: _Problem, levels_per_axis: np.ndarray, prune: bool) -> list[_Level]:
    forces = [levels_per_axis[None, :]] * 3
    levels = [_root(prob)]
    for k in range(1, prob.horizon + 1):
        nxt = _grow(prob, levels[-1], k, forces, prune)
        levels.append(nxt)
        if len(nxt.states) == 0:
            break
    return levels


def _path(levels: list[_Level], leaf: int) -> tuple[np.ndarray, np.ndarray]:
    """Controls (K, 3) and states (K + 1, 6) along the branch ending at ``leaf``."""
    controls, states = [], [levels[-1].states[leaf]]
    node = leaf
    for depth in range(len(levels) - 1, 0, -1):
        controls.append(levels[depth].control[node])
        node = int(levels[depth].parent[node])
        states.append(levels[depth - 1].states[node])
    return np.array(controls[::-1]), np.array(states[::-1])


# ---------------------------------------------------------------------------
# public operations


def rollout(
    candidate_controls,
    own_state,
    estimates: Sequence[TargetEstimate],
    others_plans: Sequence[Plan],
    cfg: PlannerConfig,
    *,
    cam: CameraSpec,
    prof: DetectionProfile,
    filter_params: FilterParams,
    vehicle: VehicleParams,
    step: int = 0,
) -> float:
    """Objective of one control sequence (no feasibility checks).

    ``others_plans`` missing an agent simply means that agent contributes no
    pseudomeasurements; a plan shorter than the horizon holds its last state.
    """
    u = np.asarray(candidate_controls, dtype=float).reshape(-1, 3)
    if len(u) != cfg.horizon:
        raise ValueError(f"expected {cfg.horizon} controls, got {len(u)}")
    prob = _build_problem(own_state, estimates, others_plans, cfg, vehicle, cam, prof, filter_params, step)
    level = _root(prob)
    for k in range(1, cfg.horizon + 1):
        forces = [u[k - 1, a].reshape(1, 1) for a in range(3)]
        level = _grow(prob, level, k, forces, prune=False)
    return float(level.J[0])


def feasible(
    states,
    others_plans: Sequence[Plan],
    cfg: PlannerConfig,
    vehicle: VehicleParams,
    controls=None,
    step: int = 0,
) -> bool:
    """Check a predicted trajectory against every hard constraint.

    ``states`` holds K+1 states starting with the current one, which is not
    checked. Each later state must respect the velocity and workspace
    bounds and keep at least the safety distance from the other agents'
    plans at the same time step; ``controls`` (if given) must respect the
    force limit.
    """
    xs = np.array([s.as_vector() if isinstance(s, AgentState) else np.asarray(s, float) for s in states])
    fut = xs[1:]
    if not np.all(_state_ok(fut, vehicle)):
        return False
    if controls is not None:
        acc = np.abs(np.asarray(controls, dtype=float).reshape(-1, 3)) * vehicle.gain
        if np.any(acc > vehicle.max_acceleration + 1e-9):
            return False
    for k in range(1, len(xs)):
        for plan in others_plans:
            if np.linalg.norm(xs[k, :3] - plan.state_at(step + k)[:3]) < cfg.safety_distance:
                return False
    return True


def hover_plan(agent_id: int, state, cfg: PlannerConfig, vehicle: VehicleParams, step: int) -> Plan:
    """Zero-force plan used to bootstrap the fleet before the first round."""
    x = state.as_vector() if isinstance(state, AgentState) else np.asarray(state, float).reshape(6)
    states = [x]
    zero = np.zeros(3)
    for _ in range(cfg.horizon):
        states.append(step_array(states[-1], zero, vehicle))
    return Plan(agent_id, np.zeros((cfg.horizon, 3)), np.array(states), 0.0, step)


def solve(
    agent_id: int,
    own_state,
    estimates: Sequence[TargetEstimate],
    others_plans: Sequence[Plan],
    cfg: PlannerConfig,
    *,
    cam: CameraSpec,
    prof: DetectionProfile,
    filter_params: FilterParams,
    vehicle: VehicleParams,
    step: int = 0,
) -> Plan:
    """Best admissible control sequence over the lattice.

    Ties in the objective go to the smaller total squared force, then to the
    lexicographically smaller control sequence. When nothing is admissible
    the plan that keeps the vehicle within its own bounds (if possible) and
    maximizes the smallest separation from the fleet is returned, flagged as
    degraded.
    """
    prob = _build_problem(own_state, estimates, others_plans, cfg, vehicle, cam, prof, filter_params, step)
    levels_per_axis = np.asarray(cfg.lattice) * vehicle.max_force

    levels = _search(prob, levels_per_axis, prune=True)
    degraded = len(levels) != cfg.horizon + 1 or len(levels[-1].states) == 0
    if degraded:
        levels = _search(prob, levels_per_axis, prune=False)
    leaves = levels[-1]
    order = np.arange(len(leaves.J))  # already lexicographic in the control sequence
    if not degraded:
        # lexsort treats its last key as the primary one
        best = int(np.lexsort((order, leaves.effort, leaves.J))[0])
    else:
        best = int(np.lexsort((order, leaves.effort, -leaves.min_sep, leaves.violation))[0])
    controls, states = _path(levels, best)
    return Plan(agent_id, controls, states, float(leaves.J[best]), step, degraded)
