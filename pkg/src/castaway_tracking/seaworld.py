"""Ground-truth castaway drift under a modified Stokes-drift wave model.

Each wave source radiates a decaying surface velocity

    v = (omega * h / 2) * exp(-w * d) * sin(q * d - omega * tau)

where ``d`` is the planar distance from the source origin. A castaway is
pushed along the radial direction away from the source (and vertically) by
``v * dt`` each step. Several sources superpose linearly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "WaveSource",
    "CastawayTruth",
    "TruthTable",
    "water_velocity",
    "drift_step",
    "generate_truth",
]


@dataclass(frozen=True)
class WaveSource:
    """A single ocean wave field.

    Derived quantities (wave number, depth factor, period, frequency) are
    computed once at construction.

    Parameters
    ----------
    origin : (x, y) of the source in metres.
    wavelength : L, metres.
    wave_height : h, metres.
    decay_rate : w >= 0, 1/m. The envelope decays as exp(-w d).
    water_depth : D, metres.
    gravity : g, m/s^2.
    max_steepness : upper bound on q*h (small-amplitude regime).
    """

    origin: tuple[float, float]
    wavelength: float
    wave_height: float
    decay_rate: float
    water_depth: float
    gravity: float = 9.81
    max_steepness: float = 0.2

    wave_number: float = field(init=False, repr=False)
    depth_factor: float = field(init=False, repr=False)
    period: float = field(init=False, repr=False)
    frequency: float = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("wavelength", "wave_height", "water_depth", "gravity"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not (math.isfinite(self.decay_rate) and self.decay_rate >= 0):
            raise ValueError(f"decay_rate must be >= 0, got {self.decay_rate!r}")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

        q = 2.0 * math.pi / self.wavelength
        if q * self.wave_height >= self.max_steepness:
            raise ValueError(
                f"small-amplitude condition violated: q*h = {q * self.wave_height:.4g}"
                f" >= {self.max_steepness}"
            )
        # 1 - tanh(x) = 2 / (exp(2x) + 1); tanh itself rounds to 1.0 for x > ~19
        if not 2.0 / (math.exp(min(2.0 * q * self.water_depth, 700.0)) + 1.0) > 0.0:
            raise ValueError("depth factor tanh(q*D) is not strictly below 1")
        z = math.tanh(q * self.water_depth)
        period = math.sqrt(2.0 * math.pi * self.wavelength / (self.gravity * z))

        object.__setattr__(self, "wave_number", q)
        object.__setattr__(self, "depth_factor", z)
        object.__setattr__(self, "period", period)
        object.__setattr__(self, "frequency", 2.0 * math.pi / period)

    @property
    def envelope(self) -> float:
        """Upper bound on |water_velocity|, omega * h / 2."""
        return self.frequency * self.wave_height / 2.0


@dataclass(frozen=True)
class CastawayTruth:
    id: int
    position: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        object.__setattr__(self, "position", pos)


def _radial(wave: WaveSource, pos) -> tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(pos, dtype=float)
    dx = pos[..., 0] - wave.origin[0]
    dy = pos[..., 1] - wave.origin[1]
    # atan2(0, 0) == 0, which is the convention for a castaway sitting on the origin
    return np.hypot(dx, dy), np.arctan2(dy, dx)


def water_velocity(wave: WaveSource, pos, tau: float):
    """Water velocity (m/s) felt at ``pos`` at time ``tau`` seconds.

    ``pos`` may be a single 3D point or an array of points with a trailing
    axis of length >= 2; only the planar coordinates are used.
    """
    d, _ = _radial(wave, pos)
    v = (
        wave.frequency * wave.wave_height / 2.0
        * np.exp(-wave.decay_rate * d)
        * np.sin(wave.wave_number * d - wave.frequency * tau)
    )
    return float(v) if np.ndim(v) == 0 else v


def _displacement(waves: Sequence[WaveSource], pos: np.ndarray, tau: float, dt: float) -> np.ndarray:
    disp = np.zeros_like(pos, dtype=float)
    for wave in waves:
        d, phi = _radial(wave, pos)
        v = (
            wave.frequency * wave.wave_height / 2.0
            * np.exp(-wave.decay_rate * d)
            * np.sin(wave.wave_number * d - wave.frequency * tau)
        )
        disp[..., 0] += v * np.cos(phi) * dt
        disp[..., 1] += v * np.sin(phi) * dt
        disp[..., 2] += v * dt
    return disp


def drift_step(wave: WaveSource, castaway: CastawayTruth, tau: float, dt: float) -> CastawayTruth:
    """Advance one castaway by ``dt`` under a single wave source."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    new = castaway.position + _displacement([wave], castaway.position, tau, dt)
    return CastawayTruth(castaway.id, new)


@dataclass(frozen=True)
class TruthTable:
    """Dense ground-truth trajectories.

    ``positions[s, c]`` is the 3D position of castaway ``ids[c]`` at time
    ``times[s] = s * dt``. Row 0 holds the initial positions.
    """

    ids: tuple[int, ...]
    dt: float
    positions: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.positions.shape[0]) * self.dt

    def at(self, step: int) -> list[CastawayTruth]:
        return [CastawayTruth(i, self.positions[step, c]) for c, i in enumerate(self.ids)]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "castaway_id", "x", "y", "z"])
            for s in range(self.positions.shape[0]):
                for c, cid in enumerate(self.ids):
                    x, y, z = self.positions[s, c]
                    writer.writerow([s, cid, repr(float(x)), repr(float(y)), repr(float(z))])
        return path


def generate_truth(
    waves: Sequence[WaveSource],
    initial_positions,
    duration: float,
    dt: float,
    ids: Sequence[int] | None = None,
) -> TruthTable:
    """Roll out every castaway for ``duration`` seconds.

    Displacements from all sources are summed each step. With no sources
    the castaways stay where they are.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    n_steps = round(duration / dt)
    if n_steps < 0 or abs(n_steps * dt - duration) > 1e-9 * max(1.0, abs(duration)):
        raise ValueError(f"duration {duration} is not an integral multiple of dt {dt}")
    start = np.asarray(initial_positions, dtype=float).reshape(-1, 3)
    if start.shape[0] < 1:
        raise ValueError("at least one castaway is required")
    if ids is None:
        ids = range(start.shape[0])
    ids = tuple(int(i) for i in ids)
    if len(ids) != start.shape[0] or len(set(ids)) != len(ids):
        raise ValueError("castaway ids must be unique and match the number of positions")

    out = np.empty((n_steps + 1, start.shape[0], 3))
    out[0] = start
    for s in range(n_steps):
        out[s + 1] = out[s] + _displacement(waves, out[s], s * dt, dt)
    return TruthTable(ids, float(dt), out)
