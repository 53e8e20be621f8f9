"""Double-integrator UAV dynamics with drag, actuation and workspace limits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "AgentState",
    "VehicleParams",
    "Violation",
    "step",
    "step_array",
    "transition_matrices",
    "validate",
]


@dataclass(frozen=True)
class AgentState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))

    @classmethod
    def from_vector(cls, x) -> "AgentState":
        x = np.asarray(x, dtype=float).reshape(6)
        return cls(x[:3], x[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @property
    def altitude(self) -> float:
        return float(self.position[2])

    def __add__(self, other: "AgentState") -> "AgentState":
        return AgentState(self.position + other.position, self.velocity + other.velocity)


@dataclass(frozen=True)
class VehicleParams:
    """Physical parameters and limits of one UAV.

    ``mass`` is in kg, ``drag`` is the per-step velocity retention factor
    rho in (0, 1], ``dt`` the sampling interval. Bounds on velocity and
    acceleration are per axis; ``workspace`` is ((xmin, ymin, zmin),
    (xmax, ymax, zmax)) and its zmin doubles as the altitude floor.
    """

    mass: float = 1.5
    drag: float = 0.98
    dt: float = 1.0
    max_horizontal_speed: float = 12.0
    max_vertical_speed: float = 7.0
    max_acceleration: float = 7.0
    workspace: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (-1000.0, -1000.0, 25.0),
        (1000.0, 1000.0, 150.0),
    )

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not 0 < self.drag <= 1:
            raise ValueError(f"drag must lie in (0, 1], got {self.drag!r}")
        for name in ("max_horizontal_speed", "max_vertical_speed", "max_acceleration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        lo, hi = (tuple(float(v) for v in b) for b in self.workspace)
        if len(lo) != 3 or len(hi) != 3 or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"workspace must be a non-empty 3D box, got {self.workspace!r}")
        object.__setattr__(self, "workspace", (lo, hi))

    @property
    def gain(self) -> float:
        """gamma = dt / m, force to velocity increment."""
        return self.dt / self.mass

    @property
    def max_force(self) -> float:
        """Largest per-axis force that keeps gamma*u within the acceleration limit."""
        return self.max_acceleration / self.gain

    @property
    def speed_limits(self) -> np.ndarray:
        return np.array([self.max_horizontal_speed, self.max_horizontal_speed, self.max_vertical_speed])

    @property
    def altitude_floor(self) -> float:
        return self.workspace[0][2]


def transition_matrices(params: VehicleParams) -> tuple[np.ndarray, np.ndarray]:
    """Return (A, B) for x' = A x + B u."""
    eye = np.eye(3)
    A = np.block([[eye, params.dt * eye], [np.zeros((3, 3)), params.drag * eye]])
    B = np.vstack([np.zeros((3, 3)), params.gain * eye])
    return A, B


def step(state: AgentState, u, params: VehicleParams) -> AgentState:
    """One step of the linear dynamics. Limits are not enforced here."""
    u = np.asarray(u, dtype=float).reshape(3)
    pos = state.position + params.dt * state.velocity
    vel = params.drag * state.velocity + params.gain * u
    return AgentState(pos, vel)


def step_array(x: np.ndarray, u: np.ndarray, params: VehicleParams) -> np.ndarray:
    """Batched ``step`` on (..., 6) states and (..., 3) forces."""
    out = np.empty(np.broadcast_shapes(x.shape, u.shape[:-1] + (6,)))
    out[..., :3] = x[..., :3] + params.dt * x[..., 3:]
    out[..., 3:] = params.drag * x[..., 3:] + params.gain * u
    return out


@dataclass(frozen=True)
class Violation:
    kind: str  # "velocity", "acceleration", "altitude", "workspace"
    axis: str
    value: float
    limit: float

    @property
    def magnitude(self) -> float:
        return abs(self.value) - abs(self.limit) if self.kind in ("velocity", "acceleration") else abs(
            self.value - self.limit
        )


_AXES = ("x", "y", "z")


def validate(state: AgentState, u, params: VehicleParams, tol: float = 1e-9) -> list[Violation]:
    """List every violated bound. An empty list means the state and input are admissible.

    ``u`` may be None to check the state only.
    """
    out: list[Violation] = []
    limits = params.speed_limits
    for i, ax in enumerate(_AXES):
        v = state.velocity[i]
        if abs(v) > limits[i] + tol:
            out.append(Violation("velocity", ax, float(v), float(np.copysign(limits[i], v))))
    if u is not None:
        acc = params.gain * np.asarray(u, dtype=float).reshape(3)
        for i, ax in enumerate(_AXES):
            if abs(acc[i]) > params.max_acceleration + tol:
                out.append(
                    Violation("acceleration", ax, float(acc[i]), float(np.copysign(params.max_acceleration, acc[i])))
                )
    lo, hi = params.workspace
    z = state.position[2]
    if z < lo[2] - tol:
        out.append(Violation("altitude", "z", float(z), lo[2]))
    for i, ax in enumerate(_AXES):
        p = state.position[i]
        if i == 2 and p < lo[2] - tol:
            continue  # already reported as an altitude-floor violation
        if p < lo[i] - tol:
            out.append(Violation("workspace", ax, float(p), lo[i]))
        elif p > hi[i] + tol:
            out.append(Violation("workspace", ax, float(p), hi[i]))
    return out
