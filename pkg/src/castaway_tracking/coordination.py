"""Fleet information exchange and the sequential planning protocol."""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence


from .estimation import TargetEstimate, fuse
from .planner import Plan, solve
from .vehicle import AgentState

__all__ = ["FleetMessage", "MessageBus", "planning_round", "exchange_and_fuse"]


@dataclass(frozen=True)
class FleetMessage:
    kind: str  # "plan" or "estimate-snapshot"
    sender: int
    step: int
    payload: Any

    def to_json(self) -> dict:
        if self.kind == "plan":
            p = self.payload
            body = {
                "agent_id": p.agent_id,
                "created_step": p.created_step,
                "objective": p.objective,
                "degraded": p.degraded,
                "controls": p.controls.tolist(),
                "states": p.states.tolist(),
            }
        else:
            body = [
                {"target_id": e.target_id, "mean": e.mean.tolist(), "covariance": e.covariance.tolist()}
                for e in self.payload
            ]
        return {"kind": self.kind, "sender": self.sender, "step": self.step, "payload": body}


class MessageBus:
    """In-process broadcast bus.

    Delivery is lossless and FIFO per sender. Publishing is guarded by a
    lock so several threads may publish at once. With ``trace_path`` every
    message is also appended to a line-delimited JSON file.
    """

    def __init__(self, trace_path: str | Path | None = None):
        self._lock = threading.Lock()
        self._log: list[FleetMessage] = []
        self._last_step: dict[int, int] = {}
        self._trace = Path(trace_path) if trace_path is not None else None
        if self._trace is not None:
            self._trace.write_text("")

    def publish(self, msg: FleetMessage) -> None:
        if msg.kind not in ("plan", "estimate-snapshot"):
            raise ValueError(f"unknown message kind {msg.kind!r}")
        with self._lock:
            last = self._last_step.get(msg.sender)
            if last is not None and msg.step < last:
                raise ValueError(f"agent {msg.sender} published step {msg.step} after step {last}")
            self._last_step[msg.sender] = msg.step
            self._log.append(msg)
            if self._trace is not None:
                with self._trace.open("a") as fh:
                    fh.write(json.dumps(msg.to_json()) + "\n")

    def messages(self, sender: int | None = None, kind: str | None = None) -> list[FleetMessage]:
        with self._lock:
            return [
                m for m in self._log
                if (sender is None or m.sender == sender) and (kind is None or m.kind == kind)
            ]

    def latest_plans(self) -> dict[int, Plan]:
        out = {}
        for m in self.messages(kind="plan"):
            out[m.sender] = m.payload
        return out

    def __len__(self) -> int:
        return len(self._log)


def planning_round(
    fleet_states: Mapping[int, AgentState],
    cluster_estimates: Mapping[int, Sequence[TargetEstimate]],
    previous_plans: Mapping[int, Plan],
    step: int,
    *,
    bus: MessageBus | None = None,
    solver: Callable[..., Plan] = solve,
    **solver_kwargs,
) -> list[Plan]:
    """One round of sequential planning.

    Agents plan in ascending id. Agent i sees the plans already made this
    round by agents < i and last round's plans of agents > i. Each new plan
    is broadcast before the next agent plans. ``solver_kwargs`` are passed
    through to the solver (planner config, camera, profiles, ...).
    """
    ids = sorted(fleet_states)
    fresh: dict[int, Plan] = {}
    for aid in ids:
        others = [fresh[j] for j in ids if j < aid] + [previous_plans[j] for j in ids if j > aid and j in previous_plans]
        plan = solver(aid, fleet_states[aid], list(cluster_estimates.get(aid, ())), others, step=step, **solver_kwargs)
        fresh[aid] = plan
        if bus is not None:
            bus.publish(FleetMessage("plan", aid, step, plan))
    return [fresh[aid] for aid in ids]


def exchange_and_fuse(
    banks: Mapping[int, Mapping[int, TargetEstimate]],
    step: int,
    bus: MessageBus | None = None,
) -> dict[int, dict[int, TargetEstimate]]:
    """Fuse every agent's posterior per target and hand the result to all agents."""
    ids = sorted(banks)
    if bus is not None:
        for aid in ids:
            snapshot = [banks[aid][t] for t in sorted(banks[aid])]
            bus.publish(FleetMessage("estimate-snapshot", aid, step, snapshot))
    per_target: dict[int, list[TargetEstimate]] = defaultdict(list)
    for aid in ids:
        for tid, est in banks[aid].items():
            per_target[tid].append(est)
    fused = {tid: fuse(ests) for tid, ests in sorted(per_target.items())}
    return {aid: dict(fused) for aid in ids}
