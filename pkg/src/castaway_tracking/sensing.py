"""Downward camera model: footprint, detection probability and noisy detections."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .seaworld import CastawayTruth
from .vehicle import AgentState

__all__ = [
    "CameraSpec",
    "DetectionProfile",
    "Measurement",
    "fov_extents",
    "detection_probability",
    "in_fov",
    "in_fov_array",
    "sense",
]


@dataclass(frozen=True)
class CameraSpec:
    horizontal_fov: float = math.radians(30.0)
    vertical_fov: float = math.radians(20.0)

    def __post_init__(self):
        for name in ("horizontal_fov", "vertical_fov"):
            a = getattr(self, name)
            if not 0 < a < math.pi:
                raise ValueError(f"{name} must lie in (0, pi), got {a!r}")

    @property
    def half_tangents(self) -> tuple[float, float]:
        return math.tan(self.horizontal_fov / 2.0), math.tan(self.vertical_fov / 2.0)


@dataclass(frozen=True)
class DetectionProfile:
    """Piecewise-linear detection probability in altitude.

    Probability is 1 up to ``alpha1``, ``p_min`` from ``alpha2`` upwards and
    linear in between. The slope and intercept are fixed by continuity at
    both breakpoints.
    """

    alpha1: float = 30.0
    alpha2: float = 100.0
    p_min: float = 0.25
    slope: float = field(init=False)
    intercept: float = field(init=False)

    def __post_init__(self):
        if not (0 <= self.alpha1 < self.alpha2):
            raise ValueError(f"need 0 <= alpha1 < alpha2, got {self.alpha1}, {self.alpha2}")
        if not 0 < self.p_min <= 1:
            raise ValueError(f"p_min must lie in (0, 1], got {self.p_min!r}")
        slope = (self.p_min - 1.0) / (self.alpha2 - self.alpha1)
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "intercept", 1.0 - slope * self.alpha1)

    # aliases matching the usual beta1/beta2 naming of the ramp
    @property
    def beta1(self) -> float:
        return self.slope

    @property
    def beta2(self) -> float:
        return self.intercept


@dataclass(frozen=True)
class Measurement:
    agent_id: int
    target_id: int
    value: np.ndarray
    step: int
    std: float  # per-axis noise std used to generate it


def fov_extents(z: float, cam: CameraSpec) -> tuple[float, float]:
    """Full side lengths (l_h, l_v) of the footprint at altitude ``z``."""
    th, tv = cam.half_tangents
    return 2.0 * z * th, 2.0 * z * tv


def detection_probability(z, prof: DetectionProfile):
    z_arr = np.asarray(z, dtype=float)
    p = np.where(
        z_arr <= prof.alpha1,
        1.0,
        np.where(z_arr >= prof.alpha2, prof.p_min, prof.slope * z_arr + prof.intercept),
    )
    return float(p) if p.ndim == 0 else p


def in_fov(agent: AgentState, target_xy, cam: CameraSpec) -> bool:
    """Closed-rectangle footprint test."""
    l_h, l_v = fov_extents(agent.position[2], cam)
    dx = abs(float(target_xy[0]) - float(agent.position[0]))
    dy = abs(float(target_xy[1]) - float(agent.position[1]))
    return bool(dx <= l_h / 2.0 and dy <= l_v / 2.0)


def in_fov_array(agent_pos: np.ndarray, target_xy: np.ndarray, cam: CameraSpec) -> np.ndarray:
    """Broadcasting version of :func:`in_fov` on raw arrays.

    ``agent_pos`` has a trailing axis (x, y, z, ...), ``target_xy`` a
    trailing axis (x, y, ...).
    """
    th, tv = cam.half_tangents
    z = agent_pos[..., 2]
    # 2*z*t/2 == z*t exactly in binary floating point
    return (np.abs(target_xy[..., 0] - agent_pos[..., 0]) <= z * th) & (
        np.abs(target_xy[..., 1] - agent_pos[..., 1]) <= z * tv
    )


def sense(
    agent: AgentState,
    truths: Sequence[CastawayTruth],
    cam: CameraSpec,
    prof: DetectionProfile,
    zeta: float,
    rng: np.random.Generator,
    agent_id: int = 0,
    step: int = 0,
) -> list[Measurement]:
    """Draw this step's detections for one agent.

    Every target inside the footprint is detected independently with the
    altitude-dependent probability; a detection carries isotropic Gaussian
    noise of per-axis std ``zeta / p``. One uniform and two normals are
    consumed per in-view target, so the stream layout does not depend on
    the detection outcome.
    """
    if not zeta > 0:
        raise ValueError(f"zeta must be positive, got {zeta!r}")
    p = detection_probability(agent.position[2], prof)
    std = zeta / p
    out = []
    for truth in truths:
        if not in_fov(agent, truth.position, cam):
            continue
        hit = rng.random() < p
        noise = rng.standard_normal(2) * std
        if hit:
            out.append(Measurement(agent_id, truth.id, truth.position[:2] + noise, step, std))
    return out
