"""Horizontal autoscaling of one chain position.

Per monitoring period each replica reports utilization = served requests x
per-request cost / period length, clamped to [0, 1].  When the maximum
per-replica utilization strictly exceeds the threshold and no scale-out
completed within the cooldown window, one replica is added; there is no
scale-in.  Dispatch is strict round-robin over RUNNING replicas, each modeled
as a single-server FIFO queue with deterministic service time.

Queue arithmetic accepts ints or Fractions so load generators can keep exact
inter-arrival spacing even when the period does not divide evenly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import AllReplicasDown
from .nfvi import VnfInstance


class ScalingMode(str, Enum):
    HORIZONTAL = "HORIZONTAL"


class ScalingAction(str, Enum):
    SCALE_OUT = "SCALE_OUT"
    NONE = "NONE"


@dataclass(frozen=True)
class ScalingPolicy:
    period_t_ms: int
    cpu_threshold: float = 0.70
    mode: ScalingMode = ScalingMode.HORIZONTAL
    cooldown_periods: int = 1

    def __post_init__(self):
        if not 0 < self.cpu_threshold < 1:
            raise ValueError("threshold must be a fraction in (0, 1)")
        if self.period_t_ms <= 0:
            raise ValueError("monitoring period must be positive")


@dataclass(frozen=True)
class UtilizationSample:
    instance_id: str
    period_index: int
    utilization: float
    served: int = 0


class ReplicaGroup:
    """Replicas of one image at one chain position, plus their queue state."""

    def __init__(self, chain_id: str, position: int, period_t_ms: int):
        self.chain_id = chain_id
        self.position = position
        self.period_t_ms = period_t_ms
        self.instances: list[VnfInstance] = []
        self.dispatch_cursor = 0
        self.last_join_period: int | None = None
        self._busy_until: dict[str, object] = {}
        # (period_index, instance_id) -> completed requests
        self.served: dict[tuple[int, str], int] = {}
        self.drops = 0

    @property
    def image(self):
        return self.instances[0].image

    def add_replica(self, instance: VnfInstance, period_index: int | None = None,
                    now_ms=0) -> None:
        if self.instances and instance.image_id != self.instances[0].image_id:
            raise ValueError("replica group instances must share one image")
        self.instances.append(instance)
        self._busy_until[instance.instance_id] = now_ms
        if period_index is not None:
            self.last_join_period = period_index

    def running(self) -> list[VnfInstance]:
        return [i for i in self.instances if i.is_running()]

    def dispatch(self) -> VnfInstance:
        """Strict round-robin over RUNNING replicas."""
        n = len(self.instances)
        for offset in range(n):
            index = (self.dispatch_cursor + offset) % n
            candidate = self.instances[index]
            if candidate.is_running():
                self.dispatch_cursor = (index + 1) % n
                return candidate
        self.drops += 1
        raise AllReplicasDown(f"no RUNNING replica at position {self.position}")

    def submit(self, arrival_ms):
        """Dispatch one request and run it through the chosen replica's FIFO
        queue.  Returns (instance_id, completion time); response time is the
        difference from the arrival."""
        replica = self.dispatch()
        cost = replica.image.cost_per_request_ms
        start = max(arrival_ms, self._busy_until[replica.instance_id])
        completion = start + cost
        self._busy_until[replica.instance_id] = completion
        period = int(completion // self.period_t_ms)
        key = (period, replica.instance_id)
        self.served[key] = self.served.get(key, 0) + 1
        return replica.instance_id, completion


def sample_utilization(group: ReplicaGroup, period_index: int,
                       policy: ScalingPolicy) -> list[UtilizationSample]:
    """One sample per replica from the period's completed-request counts."""
    samples = []
    for inst in group.instances:
        served = group.served.get((period_index, inst.instance_id), 0)
        utilization = min(1.0, served * inst.image.cost_per_request_ms
                          / policy.period_t_ms)
        if inst.is_running():
            inst.utilization = utilization
        samples.append(UtilizationSample(inst.instance_id, period_index,
                                         utilization, served))
    return samples


def decide(samples: list[UtilizationSample], policy: ScalingPolicy,
           group: ReplicaGroup) -> ScalingAction:
    """Scale out iff the max sample strictly exceeds the threshold and no
    scale-out completed within the cooldown window (periods (p-c, p])."""
    if not samples:
        return ScalingAction.NONE
    period = samples[0].period_index
    if group.last_join_period is not None and \
            period - group.last_join_period <= policy.cooldown_periods:
        return ScalingAction.NONE
    if max(s.utilization for s in samples) > policy.cpu_threshold:
        return ScalingAction.SCALE_OUT
    return ScalingAction.NONE
