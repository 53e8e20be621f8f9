"""Planar constant-velocity Kalman filter for castaways and fleet fusion.

State is ``[x, y, vx, vy]``; only ``(x, y)`` is observed. A missed or
absent detection leaves the prior untouched (intermittent observations).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "EstimationError",
    "FilterParams",
    "TargetEstimate",
    "OBSERVATION",
    "initial_estimate",
    "predict",
    "update",
    "update_missed",
    "fusion_weights",
    "fuse",
]

OBSERVATION = np.hstack([np.eye(2), np.zeros((2, 2))])


class EstimationError(ArithmeticError):
    """Raised when a filter step cannot be carried out numerically."""


@dataclass(frozen=True)
class FilterParams:
    dt: float = 1.0
    process_noise: np.ndarray = field(default_factory=lambda: np.diag([0.05, 0.05, 0.01, 0.01]))

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        Q = np.array(self.process_noise, dtype=float).reshape(4, 4)
        if not np.allclose(Q, Q.T, atol=1e-12) or np.linalg.eigvalsh(Q).min() < -1e-12:
            raise ValueError("process noise must be symmetric positive semi-definite")
        Q.setflags(write=False)
        object.__setattr__(self, "process_noise", Q)

    @property
    def transition(self) -> np.ndarray:
        A = np.eye(4)
        A[0, 2] = A[1, 3] = self.dt
        return A

    @property
    def observation(self) -> np.ndarray:
        return OBSERVATION


@dataclass(frozen=True)
class TargetEstimate:
    target_id: int
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        cov = np.array(self.covariance, dtype=float).reshape(4, 4)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def trace(self) -> float:
        return float(np.trace(self.covariance))

    @property
    def position(self) -> np.ndarray:
        return self.mean[:2]


def initial_estimate(target_id: int, reported_xy, cov_diag=(4.0, 4.0, 1.0, 1.0)) -> TargetEstimate:
    """Estimate seeded from a reported position with zero velocity."""
    xy = np.asarray(reported_xy, dtype=float)[:2]
    return TargetEstimate(target_id, np.r_[xy, 0.0, 0.0], np.diag(cov_diag))


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def predict(est: TargetEstimate, params: FilterParams) -> TargetEstimate:
    A = params.transition
    P = A @ est.covariance @ A.T + params.process_noise
    return TargetEstimate(est.target_id, A @ est.mean, _symmetrize(P))


def update(est: TargetEstimate, meas, R, params: FilterParams | None = None) -> TargetEstimate:
    """Correct a prior with one position measurement of covariance ``R``."""
    C = OBSERVATION
    P = est.covariance
    R = np.asarray(R, dtype=float).reshape(2, 2)
    S = C @ P @ C.T + R
    try:
        gain = np.linalg.solve(S, C @ P).T  # P C^T S^-1, with S and P symmetric
    except np.linalg.LinAlgError as exc:
        raise EstimationError(f"singular innovation covariance for target {est.target_id}") from exc
    if not np.all(np.isfinite(gain)):
        raise EstimationError(f"non-finite Kalman gain for target {est.target_id}")
    innovation = np.asarray(meas, dtype=float).reshape(2) - C @ est.mean
    mean = est.mean + gain @ innovation
    P_post = P - gain @ C @ P
    return TargetEstimate(est.target_id, mean, _symmetrize(P_post))


def update_missed(est: TargetEstimate) -> TargetEstimate:
    """No detection this step: the prior is the posterior."""
    return est


def fusion_weights(traces: Sequence[float]) -> np.ndarray:
    """Normalized inverse-trace weights.

    If any trace is zero, the first such estimate takes all the weight.
    """
    traces = np.asarray(traces, dtype=float)
    if traces.size == 0:
        raise ValueError("cannot fuse an empty set of estimates")
    zero = np.flatnonzero(traces <= 0.0)
    if zero.size:
        w = np.zeros_like(traces)
        w[zero[0]] = 1.0
        return w
    inv = 1.0 / traces
    return inv / inv.sum()


def fuse(estimates: Sequence[TargetEstimate]) -> TargetEstimate:
    """Convex combination of per-agent estimates of one target.

    With scalar weights w_i (inverse trace, normalized), the fused mean is
    sum w_i m_i and the fused covariance sum w_i^2 P_i.
    """
    if not estimates:
        raise ValueError("cannot fuse an empty set of estimates")
    tid = estimates[0].target_id
    if any(e.target_id != tid for e in estimates):
        raise ValueError("all estimates passed to fuse must refer to the same target")
    if len(estimates) == 1:
        return estimates[0]
    w = fusion_weights([e.trace for e in estimates])
    mean = sum(wi * e.mean for wi, e in zip(w, estimates))
    cov = sum((wi * wi) * e.covariance for wi, e in zip(w, estimates))
    return TargetEstimate(tid, mean, _symmetrize(cov))
