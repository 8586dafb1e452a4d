"""Emulated sensors, robots, and the two consumer applications.

Sensors emit one reading per quantity per period as CoAP messages carrying
brand raw payloads; values come from a synthetic generator (baseline level
plus scheduled temperature spikes) or a CSV trace.  The wildfire application
watches the delivered SenML stream for sustained high temperature and then
runs a robot mission (grab, then deploy) over the downlink; the forest
monitoring application simply consumes the same stream, which is what makes
the sensor network shared.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum

from .dataplane import (CoapCode, CoapMessage, CoapType, HttpKind, HttpMessage,
                        LcpCommand, LcpFrame, Quantity, RawMeasurement,
                        RAW_CODECS, UNIT_FOR_QUANTITY)
from .errors import RobotBusy
from .interfaces import DeviceBrand
from .senml import Actuation, SenmlPack, parse_pack
from .sim import Simulator


@dataclass(frozen=True)
class FirePolicy:
    temperature_threshold_cel: Decimal = Decimal("60")
    consecutive_samples: int = 2

    def __post_init__(self):
        if self.temperature_threshold_cel <= 0 or self.consecutive_samples < 1:
            raise ValueError("bad fire policy")


def detect_fire(policy: FirePolicy, values) -> int | None:
    """Index of the sample that completes the first run of
    ``consecutive_samples`` values at or above the threshold, else None."""
    run = 0
    for index, value in enumerate(values):
        run = run + 1 if value >= policy.temperature_threshold_cel else 0
        if run >= policy.consecutive_samples:
            return index
    return None


class FireDetector:
    """Streaming edge-triggered version: one event per fire episode."""

    def __init__(self, policy: FirePolicy):
        self.policy = policy
        self._run = 0
        self._latched = False

    def feed(self, value: Decimal) -> bool:
        if value >= self.policy.temperature_threshold_cel:
            self._run += 1
            if self._run >= self.policy.consecutive_samples and not self._latched:
                self._latched = True
                return True
        else:
            self._run = 0
            self._latched = False
        return False


# --------------------------------------------------------------------------
# value sources
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Spike:
    start_ms: int
    end_ms: int
    value: Decimal


class SyntheticSource:
    """Constant baseline per quantity, with temperature spikes by schedule."""

    def __init__(self, baseline: dict[Quantity, Decimal] | None = None,
                 spikes: tuple[Spike, ...] = ()):
        self.baseline = baseline or {Quantity.TEMPERATURE: Decimal("25")}
        self.spikes = spikes

    def value_at(self, quantity: Quantity, ts_ms: int) -> Decimal:
        base = self.baseline.get(quantity, Decimal("0"))
        if quantity is Quantity.TEMPERATURE:
            for spike in self.spikes:
                if spike.start_ms <= ts_ms < spike.end_ms:
                    return spike.value
        return base


class TraceSource:
    """Step function over trace rows (timestampS, quantity, value, unit)."""

    def __init__(self, rows):
        self._rows: dict[Quantity, list[tuple[int, Decimal]]] = {}
        for ts_s, quantity, value, unit in rows:
            quantity = Quantity(quantity)
            if unit != UNIT_FOR_QUANTITY[quantity]:
                raise ValueError(f"unit {unit!r} inconsistent with {quantity}")
            self._rows.setdefault(quantity, []).append((int(ts_s), Decimal(value)))
        for series in self._rows.values():
            series.sort()

    @classmethod
    def from_csv(cls, path) -> "TraceSource":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            rows = [(r["timestampS"], r["quantity"], r["value"], r["unit"])
                    for r in reader]
        return cls(rows)

    def value_at(self, quantity: Quantity, ts_ms: int) -> Decimal:
        series = self._rows.get(quantity, [])
        current = Decimal("0")
        for ts_s, value in series:
            if ts_s * 1000 <= ts_ms:
                current = value
            else:
                break
        return current


# --------------------------------------------------------------------------
# sensors
# --------------------------------------------------------------------------

class SensorEmulator:
    def __init__(self, sim: Simulator, sensor_id: str, brand: DeviceBrand,
                 quantities: tuple[Quantity, ...], emit_period_ms: int,
                 source, fire_threshold: Decimal | None = None):
        self.sim = sim
        self.sensor_id = sensor_id
        self.brand = brand
        self.quantities = quantities
        self.emit_period_ms = emit_period_ms
        self.source = source
        self.fire_threshold = fire_threshold
        self.emitted = 0
        self._message_id = 0
        self._sink = None

    def start(self, sink, until_ms: int) -> None:
        """Emit one reading per quantity per period from t+period until the
        horizon; ``sink(coap_message, sensor)`` receives each message."""
        self._sink = sink
        ts = self.sim.now_ms + self.emit_period_ms
        while ts <= until_ms:
            self.sim.at(ts, self._emit)
            ts += self.emit_period_ms

    def _emit(self) -> None:
        for quantity in self.quantities:
            value = self.source.value_at(quantity, self.sim.now_ms)
            measurement = RawMeasurement(
                self.sensor_id, self.brand, quantity, value,
                UNIT_FOR_QUANTITY[quantity], self.sim.now_ms // 1000)
            encode = RAW_CODECS[self.brand][0]
            self._message_id = (self._message_id + 1) & 0xFFFF
            message = CoapMessage(CoapType.NON, CoapCode.CONTENT_205,
                                  self._message_id,
                                  f"{self.sensor_id}/{quantity.value.lower()}",
                                  encode(measurement))
            self.emitted += 1
            details = {"sensor": self.sensor_id, "quantity": quantity.value,
                       "value": str(value)}
            if self.fire_threshold is not None and quantity is Quantity.TEMPERATURE:
                details["aboveThreshold"] = value >= self.fire_threshold
            self.sim.log.emit(self.sensor_id, "SENSOR_EMIT", **details)
            self._sink(message, self)


# --------------------------------------------------------------------------
# robots
# --------------------------------------------------------------------------

class RobotState(str, Enum):
    IDLE = "IDLE"
    MOVING = "MOVING"
    GRABBED = "GRABBED"
    DEPLOYED = "DEPLOYED"


class RobotEmulator:
    """Executes framed commands sequentially, one latency period each."""

    def __init__(self, sim: Simulator, robot_id: str,
                 command_latency_ms: int = 300):
        self.sim = sim
        self.robot_id = robot_id
        self.command_latency_ms = command_latency_ms
        self.state = RobotState.IDLE
        self.accepted: list[tuple[int, str]] = []
        self.listeners: list = []
        self._queue: deque[LcpCommand] = deque()
        self._busy = False

    def receive_frame(self, frame: LcpFrame) -> None:
        command = LcpCommand.from_bytes(frame.body)
        self.accepted.append((self.sim.now_ms, command.decode()[0]))
        self.sim.log.emit(self.robot_id, "ROBOT_CMD",
                          command=command.decode()[0],
                          opcode=command.opcode)
        self._queue.append(command)
        if not self._busy:
            self._next()

    def _next(self) -> None:
        if not self._queue:
            self._busy = False
            return
        self._busy = True
        command = self._queue.popleft()
        name = command.decode()[0]
        if name == "grab":
            self._set_state(RobotState.MOVING, command)

        def complete():
            if name == "grab":
                self._set_state(RobotState.GRABBED, command)
            elif name == "deploy":
                self._set_state(RobotState.DEPLOYED, command)
            elif name == "stop":
                self._set_state(RobotState.IDLE, command)
            # status: state unchanged, reply implied
            self._next()

        self.sim.after(self.command_latency_ms, complete)

    def _set_state(self, state: RobotState, command: LcpCommand) -> None:
        self.state = state
        self.sim.log.emit(self.robot_id, "ROBOT_STATE", state=state.value,
                          opcode=command.opcode)
        for listener in list(self.listeners):
            listener(self, state)


# --------------------------------------------------------------------------
# applications
# --------------------------------------------------------------------------

class ForestMonitoringApp:
    """Consumes the shared SenML stream and keeps per-sensor tallies."""

    def __init__(self, application_id: str = "forest-monitoring"):
        self.application_id = application_id
        self.received = 0
        self.dropped = 0
        self.by_sensor: dict[str, int] = {}

    def deliver(self, message: HttpMessage, sensor=None) -> None:
        pack = parse_pack(message.body)
        self.received += 1
        sensor_id = pack.base_name.rstrip("/")
        self.by_sensor[sensor_id] = self.by_sensor.get(sensor_id, 0) + 1

    def on_drop(self, sensor=None) -> None:
        self.dropped += 1


class WildfireApp:
    """Detects fire episodes in the stream and runs the robot mission."""

    def __init__(self, sim: Simulator, policy: FirePolicy,
                 robot: RobotEmulator, send_command,
                 application_id: str = "wildfire-management",
                 retry_ms: int = 2_000, stop_after_ms: int = 5_000):
        self.sim = sim
        self.application_id = application_id
        self.policy = policy
        self.robot = robot
        self.send_command = send_command  # callable(HttpMessage)
        self.retry_ms = retry_ms
        self.stop_after_ms = stop_after_ms
        self.received = 0
        self.dropped = 0
        self.detections: list[int] = []
        self.deployments: list[int] = []
        self.busy_rejections = 0
        self._detectors: dict[str, FireDetector] = {}
        self._mission_open = False
        robot.listeners.append(self._on_robot_state)

    def deliver(self, message: HttpMessage, sensor=None) -> None:
        self.received += 1
        pack = parse_pack(message.body)
        for entry in pack.entries:
            if entry.name != Quantity.TEMPERATURE.value.lower() or entry.value is None:
                continue
            detector = self._detectors.setdefault(pack.base_name,
                                                  FireDetector(self.policy))
            if detector.feed(entry.value):
                self.sim.log.emit(self.application_id, "FIRE_DETECTED",
                                  sensor=pack.base_name.rstrip("/"),
                                  value=str(entry.value))
                self.detections.append(self.sim.now_ms)
                self.dispatch_robot()

    def on_drop(self, sensor=None) -> None:
        self.dropped += 1

    def dispatch_robot(self) -> None:
        """Send the grab+deploy mission; rejected while the robot is busy."""
        if self._mission_open or self.robot.state is not RobotState.IDLE:
            self.busy_rejections += 1
            self.sim.log.emit(self.application_id, "ROBOT_BUSY",
                              robot=self.robot.robot_id)
            return
        self._mission_open = True
        self._send_mission()

    def _send_mission(self) -> None:
        if not self._mission_open:
            return
        self._post_actuation("grab", "extinguisher")
        self._post_actuation("deploy", None)

        def check_retry():
            if self._mission_open and self.robot.state is RobotState.IDLE:
                self._send_mission()

        self.sim.after(self.retry_ms, check_retry)

    def _post_actuation(self, command: str, target: str | None) -> None:
        pack = SenmlPack(base_name=self.robot.robot_id + "/",
                         base_time_s=self.sim.now_ms // 1000,
                         actuation=Actuation(command, target))
        message = HttpMessage(
            HttpKind.REQUEST, f"/robots/{self.robot.robot_id}/commands",
            method="POST",
            headers=(("Content-Type", "application/senml+json"),),
            body=pack.to_json())
        self.send_command(message)

    def _on_robot_state(self, robot: RobotEmulator, state: RobotState) -> None:
        if state is RobotState.DEPLOYED and self._mission_open:
            self._mission_open = False
            self.deployments.append(self.sim.now_ms)
            self.sim.log.emit(self.application_id, "MISSION_COMPLETE",
                              robot=robot.robot_id)
            self.sim.after(self.stop_after_ms, lambda: self._post_actuation("stop", None))
