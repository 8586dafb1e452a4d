"""Scenario runner and metrics collection.

A scenario bundles up to four studies, mirroring the evaluation trio of
provisioning time, migration downtime, end-to-end delay, and scalability:

* provisioning: repeated chain deployments with live migration, timing each
  from first instantiation to the last instance running at the target.
* downtime: configured per-converter downtime windows measured back via
  periodic liveness probes.
* e2e: the wildfire scenario, virtualized and over the direct-gateway
  baseline, timing fire onset to robot deployment per episode.
* ramp: a stepped load ramp through the queueing model with the autoscaler
  on and off.

Every reported number is recomputed from event logs by the reducers in this
module, and identical scenarios (seed included) export identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

from .control import RetryPolicy
from .dataplane import Quantity
from .devices import (FirePolicy, ForestMonitoringApp, RobotEmulator,
                      SensorEmulator, Spike, SyntheticSource, WildfireApp)
from .errors import AllReplicasDown, IoError, MalformedRequest
from .interfaces import (DeviceBrand, InfoModel, InterfaceDescriptor, Protocol,
                         QosParams, VwsanDescriptor)
from .nfvi import (ChainDirection, Domain, InstanceState, MigrationApproach,
                   MigrationPlan, Nfvi)
from .pipeline import DirectPath, SimChainPath
from .scaling import (ReplicaGroup, ScalingAction, ScalingPolicy, decide,
                      sample_utilization)
from .sim import Simulator
from .store import VnfImage, VnfKind, VnfStore
from .world import ApplicationSpec, SignalingScenario, World

_RAW_MODEL = {DeviceBrand.SUNSPOT: InfoModel.RAW_SUNSPOT,
              DeviceBrand.ADVANTICSYS: InfoModel.RAW_ADVANTICSYS}


def standard_catalog() -> list[VnfImage]:
    """The gateway converter images the scenarios deploy."""
    coap = Protocol.COAP
    http = Protocol.HTTP
    images = []
    for brand, model in _RAW_MODEL.items():
        tag = brand.value.lower()
        images.append(VnfImage.from_dict({
            "imageId": f"pc-coap-http-{tag}", "kind": "PROTOCOL_CONVERTER",
            "input": {"protocol": "COAP", "infoModel": model.value},
            "output": {"protocol": "HTTP", "infoModel": model.value},
            "costPerRequestMs": 1}))
        images.append(VnfImage.from_dict({
            "imageId": f"imc-{tag}-senml", "kind": "INFO_MODEL_CONVERTER",
            "input": {"protocol": "HTTP", "infoModel": model.value},
            "output": {"protocol": "HTTP", "infoModel": "SENML_JSON"},
            "costPerRequestMs": 1}))
    images.append(VnfImage.from_dict({
        "imageId": "imc-senml-lcp", "kind": "INFO_MODEL_CONVERTER",
        "input": {"protocol": "HTTP", "infoModel": "SENML_JSON"},
        "output": {"protocol": "HTTP", "infoModel": "LCP_CMD"},
        "costPerRequestMs": 1}))
    images.append(VnfImage.from_dict({
        "imageId": "pc-http-lcp", "kind": "PROTOCOL_CONVERTER",
        "input": {"protocol": "HTTP", "infoModel": "LCP_CMD"},
        "output": {"protocol": "LCP_TRANSPORT", "infoModel": "LCP_CMD"},
        "costPerRequestMs": 1}))
    return images


def default_provider() -> VwsanDescriptor:
    return VwsanDescriptor(
        "forest-net",
        (DeviceBrand.SUNSPOT, DeviceBrand.ADVANTICSYS, DeviceBrand.LEGO_NXT),
        (InterfaceDescriptor(Protocol.COAP, InfoModel.RAW_SUNSPOT),
         InterfaceDescriptor(Protocol.COAP, InfoModel.RAW_ADVANTICSYS),
         InterfaceDescriptor(Protocol.LCP_TRANSPORT, InfoModel.LCP_CMD)))


SENML_HTTP = InterfaceDescriptor(Protocol.HTTP, InfoModel.SENML_JSON)


# --------------------------------------------------------------------------
# scenario model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProvisioningStudy:
    runs: int = 20
    boot_delay_ms: tuple[int, int] = (14_400, 16_200)
    chaining_delay_ms: int = 1_000
    transfer_delay_ms: tuple[int, int] = (4_500, 5_000)
    downtime_ms: tuple[int, ...] = (2_000, 3_000)
    parallel_boot: bool = False


@dataclass(frozen=True)
class DowntimeStudy:
    protocol_downtime_s: tuple[int, ...] = (30, 24, 31, 33, 24)
    info_model_downtime_s: tuple[int, ...] = (39, 39, 38, 38, 38)
    probe_period_ms: int = 1_000
    transfer_delay_ms: int = 45_000
    boot_delay_ms: tuple[int, int] = (1_000, 2_000)


@dataclass(frozen=True)
class E2eStudy:
    episodes: int = 12
    warm_start_ms: int = 60_000
    episode_spacing_ms: int = 20_000
    first_spike_duration_ms: int = 45_000
    spike_duration_ms: int = 1_000
    spike_value: str = "75"


@dataclass(frozen=True)
class RampStudy:
    period_t_ms: int = 10_000
    cpu_threshold: float = 0.70
    cooldown_periods: int = 1
    cost_per_request_ms: int = 10
    # (requests per period, number of periods) per step; the ramp is gradual
    steps: tuple[tuple[int, int], ...] = ((500, 3), (1000, 3), (1500, 3),
                                          (2000, 3), (2500, 3), (3000, 3),
                                          (3500, 3), (4000, 3))
    boot_delay_ms: tuple[int, int] = (2_000, 4_000)


@dataclass(frozen=True)
class SensorSpec:
    sensor_id: str
    brand: DeviceBrand
    quantities: tuple[Quantity, ...] = (Quantity.TEMPERATURE,)
    emit_period_ms: int = 200


@dataclass(frozen=True)
class RobotSpec:
    robot_id: str
    command_latency_ms: int = 300


def default_thresholds() -> dict:
    return {
        "provisioningMinMs": 32_585,
        "provisioningMaxMs": 40_320,
        "downtimeToleranceMs": 1_000,
        "e2eSteadyDiffMaxMs": 5,
        "e2eFirstEpisodePct": 1.0,
        "scalingSlopeMaxMs": 10,
        "noScalingSlopeMinMs": 300,
        "slopeRatioMin": 50,
    }


@dataclass
class Scenario:
    seed: int = 1
    catalog: list[VnfImage] = field(default_factory=standard_catalog)
    provider: VwsanDescriptor = field(default_factory=default_provider)
    sensors: tuple[SensorSpec, ...] = (
        SensorSpec("spot-1", DeviceBrand.SUNSPOT),
        SensorSpec("spot-2", DeviceBrand.SUNSPOT),
        SensorSpec("adv-1", DeviceBrand.ADVANTICSYS),
        SensorSpec("adv-2", DeviceBrand.ADVANTICSYS),
    )
    robots: tuple[RobotSpec, ...] = (RobotSpec("nxt-1"),)
    qos: QosParams = field(default_factory=lambda: QosParams(2_000, 100))
    fire_policy: FirePolicy = field(default_factory=FirePolicy)
    vm_quota: int = 64
    retry_after_s: int = 30
    clock_compression: float = 0.0
    provisioning: ProvisioningStudy | None = field(default_factory=ProvisioningStudy)
    downtime: DowntimeStudy | None = field(default_factory=DowntimeStudy)
    e2e: E2eStudy | None = field(default_factory=E2eStudy)
    ramp: RampStudy | None = field(default_factory=RampStudy)
    thresholds: dict = field(default_factory=default_thresholds)

    def as_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "catalog": [i.as_dict() for i in self.catalog],
            "provider": self.provider.as_dict(),
            "sensors": [{"sensorId": s.sensor_id, "brand": s.brand.value,
                         "quantities": [q.value for q in s.quantities],
                         "emitPeriodMs": s.emit_period_ms} for s in self.sensors],
            "robots": [{"robotId": r.robot_id,
                        "commandLatencyMs": r.command_latency_ms}
                       for r in self.robots],
            "qos": self.qos.as_dict(),
            "firePolicy": {
                "temperatureThresholdCel": str(self.fire_policy.temperature_threshold_cel),
                "consecutiveSamples": self.fire_policy.consecutive_samples},
            "vmQuota": self.vm_quota,
            "retryAfterS": self.retry_after_s,
            "clockCompression": self.clock_compression,
            "thresholds": dict(self.thresholds),
        }
        if self.provisioning:
            p = self.provisioning
            d["provisioning"] = {
                "runs": p.runs, "bootDelayMs": list(p.boot_delay_ms),
                "chainingDelayMs": p.chaining_delay_ms,
                "transferDelayMs": list(p.transfer_delay_ms),
                "downtimeMs": list(p.downtime_ms),
                "parallelBoot": p.parallel_boot}
        if self.downtime:
            s = self.downtime
            d["downtime"] = {
                "protocolDowntimeS": list(s.protocol_downtime_s),
                "infoModelDowntimeS": list(s.info_model_downtime_s),
                "probePeriodMs": s.probe_period_ms,
                "transferDelayMs": s.transfer_delay_ms,
                "bootDelayMs": list(s.boot_delay_ms)}
        if self.e2e:
            e = self.e2e
            d["e2e"] = {
                "episodes": e.episodes, "warmStartMs": e.warm_start_ms,
                "episodeSpacingMs": e.episode_spacing_ms,
                "firstSpikeDurationMs": e.first_spike_duration_ms,
                "spikeDurationMs": e.spike_duration_ms,
                "spikeValue": e.spike_value}
        if self.ramp:
            r = self.ramp
            d["ramp"] = {
                "periodTMs": r.period_t_ms, "cpuThreshold": r.cpu_threshold,
                "cooldownPeriods": r.cooldown_periods,
                "costPerRequestMs": r.cost_per_request_ms,
                "steps": [list(step) for step in r.steps],
                "bootDelayMs": list(r.boot_delay_ms)}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        try:
            scenario = cls(
                seed=int(d.get("seed", 1)),
                catalog=[VnfImage.from_dict(i) for i in d["catalog"]]
                if "catalog" in d else standard_catalog(),
                provider=VwsanDescriptor.from_dict(d["provider"])
                if "provider" in d else default_provider(),
                sensors=tuple(SensorSpec(s["sensorId"], DeviceBrand(s["brand"]),
                                         tuple(Quantity(q) for q in
                                               s.get("quantities", ["TEMPERATURE"])),
                                         int(s.get("emitPeriodMs", 200)))
                              for s in d["sensors"]) if "sensors" in d
                else Scenario.sensors,
                robots=tuple(RobotSpec(r["robotId"],
                                       int(r.get("commandLatencyMs", 300)))
                             for r in d["robots"]) if "robots" in d
                else Scenario.robots,
                qos=QosParams.from_dict(d["qos"]) if "qos" in d
                else QosParams(2_000, 100),
                fire_policy=FirePolicy(
                    Decimal(str(d["firePolicy"]["temperatureThresholdCel"])),
                    int(d["firePolicy"]["consecutiveSamples"]))
                if "firePolicy" in d else FirePolicy(),
                vm_quota=int(d.get("vmQuota", 64)),
                retry_after_s=int(d.get("retryAfterS", 30)),
                clock_compression=float(d.get("clockCompression", 0.0)),
                provisioning=_provisioning_from(d.get("provisioning")),
                downtime=_downtime_from(d.get("downtime")),
                e2e=_e2e_from(d.get("e2e")),
                ramp=_ramp_from(d.get("ramp")),
                thresholds=dict(d.get("thresholds", default_thresholds())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRequest(f"bad scenario: {exc}") from exc
        return scenario

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _provisioning_from(d) -> ProvisioningStudy | None:
    if d is None:
        return None
    return ProvisioningStudy(
        runs=int(d.get("runs", 20)),
        boot_delay_ms=tuple(d.get("bootDelayMs", (14_400, 16_200))),
        chaining_delay_ms=int(d.get("chainingDelayMs", 1_000)),
        transfer_delay_ms=tuple(d.get("transferDelayMs", (4_500, 5_000))),
        downtime_ms=tuple(d.get("downtimeMs", (2_000, 3_000))),
        parallel_boot=bool(d.get("parallelBoot", False)))


def _downtime_from(d) -> DowntimeStudy | None:
    if d is None:
        return None
    return DowntimeStudy(
        protocol_downtime_s=tuple(d.get("protocolDowntimeS", (30, 24, 31, 33, 24))),
        info_model_downtime_s=tuple(d.get("infoModelDowntimeS", (39, 39, 38, 38, 38))),
        probe_period_ms=int(d.get("probePeriodMs", 1_000)),
        transfer_delay_ms=int(d.get("transferDelayMs", 45_000)),
        boot_delay_ms=tuple(d.get("bootDelayMs", (1_000, 2_000))))


def _e2e_from(d) -> E2eStudy | None:
    if d is None:
        return None
    return E2eStudy(
        episodes=int(d.get("episodes", 12)),
        warm_start_ms=int(d.get("warmStartMs", 60_000)),
        episode_spacing_ms=int(d.get("episodeSpacingMs", 20_000)),
        first_spike_duration_ms=int(d.get("firstSpikeDurationMs", 45_000)),
        spike_duration_ms=int(d.get("spikeDurationMs", 1_000)),
        spike_value=str(d.get("spikeValue", "75")))


def _ramp_from(d) -> RampStudy | None:
    if d is None:
        return None
    return RampStudy(
        period_t_ms=int(d.get("periodTMs", 10_000)),
        cpu_threshold=float(d.get("cpuThreshold", 0.70)),
        cooldown_periods=int(d.get("cooldownPeriods", 1)),
        cost_per_request_ms=int(d.get("costPerRequestMs", 10)),
        steps=tuple((int(a), int(b)) for a, b in d.get("steps", RampStudy.steps)),
        boot_delay_ms=tuple(d.get("bootDelayMs", (2_000, 4_000))))


def validate_scenario(d: dict) -> Scenario:
    """Parse + sanity-check a scenario dict, raising MalformedRequest."""
    scenario = Scenario.from_dict(d)
    if scenario.ramp and any(load <= 0 or periods <= 0
                             for load, periods in scenario.ramp.steps):
        raise MalformedRequest("ramp steps must have positive load and duration")
    if scenario.provisioning:
        lo, hi = scenario.provisioning.boot_delay_ms
        if not 0 < lo <= hi:
            raise MalformedRequest("bootDelayMs must be a (lo, hi) range")
    return scenario


# --------------------------------------------------------------------------
# event-log reducers (the independent recomputation path for every metric)
# --------------------------------------------------------------------------

def provisioning_times(events) -> dict[str, dict]:
    """Per-chain spans from the log: first INSTANTIATING to last RUNNING at
    the migration target, plus the per-phase breakdown."""
    chains: dict[str, dict] = {}
    for e in events:
        if e.kind == "INSTANCE_STATE":
            chain = e.get("chain")
            if chain is None:
                continue
            c = chains.setdefault(chain, {})
            if e.get("state") == InstanceState.INSTANTIATING.value:
                c.setdefault("first_instantiating", e.ts_ms)
            if e.get("state") == InstanceState.RUNNING.value:
                c["last_running"] = e.ts_ms
                c.setdefault("boot_done", {})
                if "migration_start" not in c:
                    c["last_running_source"] = e.ts_ms
        elif e.kind == "CHAIN_START":
            chains.setdefault(e.entity, {})["chain_start"] = e.ts_ms
        elif e.kind == "CHAIN_CREATED":
            chains.setdefault(e.entity, {})["chain_created"] = e.ts_ms
        elif e.kind == "MIGRATION_START":
            chains.setdefault(e.entity, {})["migration_start"] = e.ts_ms
        elif e.kind == "MIGRATION_END" and not e.get("aborted"):
            chains.setdefault(e.entity, {})["migration_end"] = e.ts_ms
    out = {}
    for chain_id, c in chains.items():
        if "first_instantiating" not in c or "migration_end" not in c:
            continue
        out[chain_id] = {
            "totalMs": c["migration_end"] - c["first_instantiating"],
            "instantiationMs": c["last_running_source"] - c["first_instantiating"],
            "chainingMs": c["chain_created"] - c["chain_start"],
            "migrationMs": c["migration_end"] - c["migration_start"],
        }
    return out


def fire_episodes(events) -> list[dict]:
    """Pair fire-onset emissions with robot deployments.

    Onset = first emission at or above the threshold after a below-threshold
    emission (or stream start); completion = next DEPLOYED state."""
    onsets = []
    above = False
    for e in events:
        if e.kind == "SENSOR_EMIT" and e.get("aboveThreshold") is not None:
            flag = bool(e.get("aboveThreshold"))
            if flag and not above:
                onsets.append(e.ts_ms)
            above = flag
    deploys = [e.ts_ms for e in events
               if e.kind == "ROBOT_STATE" and e.get("state") == "DEPLOYED"]
    episodes = []
    di = 0
    for onset in onsets:
        while di < len(deploys) and deploys[di] < onset:
            di += 1
        if di == len(deploys):
            break
        episodes.append({"onsetMs": onset, "deployMs": deploys[di],
                         "e2eMs": deploys[di] - onset})
        di += 1
    return episodes


def service_provisioning_ms(events, application_id: str) -> int | None:
    """Request submission to SERVICE_START for one application."""
    submit = start = None
    request_id = None
    for e in events:
        if e.kind == "SERVICE_REQUEST" and e.get("app") == application_id:
            submit = e.ts_ms
            request_id = e.get("serviceRequest")
        elif e.kind == "SERVICE_START" and e.get("serviceRequest") == request_id:
            start = e.ts_ms
            break
    if submit is None or start is None:
        return None
    return start - submit


def replica_count_trace(events, initial_ts: int | None = None) -> list[tuple[int, int]]:
    trace = []
    count = 0
    for e in events:
        if e.kind == "REPLICA_JOINED":
            count += 1
            trace.append((e.ts_ms, count))
    return trace


# --------------------------------------------------------------------------
# study runners
# --------------------------------------------------------------------------

def _uplink_catalog(catalog, brand: DeviceBrand) -> list[VnfImage]:
    model = _RAW_MODEL[brand]
    return [img for img in catalog
            if img.input.info_model in (model, InfoModel.SENML_JSON)
            and img.output.info_model in (model, InfoModel.SENML_JSON)
            and img.input.protocol is not Protocol.LCP_TRANSPORT
            and img.output.protocol is not Protocol.LCP_TRANSPORT
            and img.output.info_model is not InfoModel.LCP_CMD
            and img.input.info_model is not InfoModel.LCP_CMD]


@dataclass
class ProvisioningResult:
    times_ms: list[int]
    breakdowns: list[dict]
    identity_ok: bool
    logs: list[bytes]
    migration_rows: list[dict]


def run_provisioning_study(scenario: Scenario) -> ProvisioningResult:
    study = scenario.provisioning
    times, breakdowns, logs, rows = [], [], [], []
    identity_ok = True
    images = _uplink_catalog(scenario.catalog, DeviceBrand.SUNSPOT)
    provider = VwsanDescriptor(
        scenario.provider.provider_id, (DeviceBrand.SUNSPOT,),
        (InterfaceDescriptor(Protocol.COAP, InfoModel.RAW_SUNSPOT),))
    for run in range(study.runs):
        sig = SignalingScenario(
            images=images, providers=[provider],
            applications=[ApplicationSpec("provision-probe",
                                          provider.provider_id,
                                          (SENML_HTTP,), scenario.qos)],
            approach=MigrationApproach.LIVE_AFTER_CHAIN,
            boot_delay_ms=study.boot_delay_ms,
            chaining_delay_ms=study.chaining_delay_ms,
            transfer_delay_ms=study.transfer_delay_ms,
            downtime_ms=study.downtime_ms,
            parallel_boot=study.parallel_boot,
            vm_quota=scenario.vm_quota,
            seed=scenario.seed + run)
        world = World(sig)
        world.run()
        spans = provisioning_times(world.log.events)
        for chain_id, span in sorted(spans.items()):
            times.append(span["totalMs"])
            breakdowns.append(span)
            parts = (span["instantiationMs"] + span["chainingMs"]
                     + span["migrationMs"])
            if parts != span["totalMs"]:
                identity_ok = False
        logs.append(world.log.to_jsonl())
        for record in world.nfvi.migrations:
            for instance_id, downtime, start, end in record.windows:
                rows.append({"run": run, "chainId": record.chain_id,
                             "instanceId": instance_id, "downtimeMs": downtime,
                             "startMs": start, "endMs": end})
    return ProvisioningResult(times, breakdowns, identity_ok, logs, rows)


@dataclass
class DowntimeResult:
    # one row per sample: configured/measured ms per converter role
    rows: list[dict]
    logs: list[bytes]
    migration_rows: list[dict]


def run_downtime_study(scenario: Scenario) -> DowntimeResult:
    study = scenario.downtime
    rows, logs, migration_rows = [], [], []
    images = _uplink_catalog(scenario.catalog, DeviceBrand.SUNSPOT)
    for index, (proto_s, info_s) in enumerate(zip(study.protocol_downtime_s,
                                                  study.info_model_downtime_s)):
        sim = Simulator(seed=scenario.seed + 100 + index)
        store = VnfStore()
        for img in images:
            store.register(img)
        nfvi = Nfvi(sim, store, boot_delay_ms=study.boot_delay_ms,
                    chaining_delay_ms=1_000)
        plan = MigrationPlan(MigrationApproach.LIVE_AFTER_CHAIN,
                             Domain.GATEWAY_PROVIDER, Domain.VWSAN_PROVIDER,
                             (proto_s * 1000, info_s * 1000),
                             study.transfer_delay_ms)
        period = study.probe_period_ms
        probes = {}

        ordered = sorted(images, key=lambda i: (i.kind is not VnfKind.PROTOCOL_CONVERTER))

        def deploy(ordered=ordered, plan=plan):
            first = nfvi.instantiate(ordered[0].image_id, plan.source,
                                     on_running=lambda _i: boot_second())

            def boot_second():
                nfvi.instantiate(ordered[1].image_id, plan.source,
                                 on_running=lambda _i: chain_up())

            def chain_up():
                chain = nfvi.chain([i.instance_id for i in
                                    nfvi.instances.values()],
                                   ChainDirection.UPLINK)
                lead = 3 * period
                until = sim.now_ms + lead + study.transfer_delay_ms + 3 * period
                for inst in chain.instances:
                    probes[inst.instance_id] = nfvi.probe(
                        inst.instance_id, period, until)
                sim.after(lead, lambda: nfvi.migrate(chain, plan))

        deploy()
        sim.run()
        by_role = {}
        for inst in nfvi.instances.values():
            role = ("protocol" if inst.image.kind is VnfKind.PROTOCOL_CONVERTER
                    else "infoModel")
            by_role[role] = probes[inst.instance_id].measured_downtime_ms()
        rows.append({
            "sample": index + 1,
            "protocolConfiguredMs": proto_s * 1000,
            "protocolMeasuredMs": by_role.get("protocol"),
            "infoModelConfiguredMs": info_s * 1000,
            "infoModelMeasuredMs": by_role.get("infoModel"),
        })
        logs.append(sim.log.to_jsonl())
        for record in nfvi.migrations:
            for instance_id, downtime, start, end in record.windows:
                migration_rows.append({"run": index, "chainId": record.chain_id,
                                       "instanceId": instance_id,
                                       "downtimeMs": downtime,
                                       "startMs": start, "endMs": end})
    return DowntimeResult(rows, logs, migration_rows)


@dataclass
class E2eResult:
    episodes: list[dict]
    provisioning_ms: int | None
    emitted: int
    received: dict[str, int]
    dropped: dict[str, int]
    busy_rejections: int
    log: bytes


def _spikes(scenario: Scenario) -> tuple[Spike, ...]:
    e = scenario.e2e
    value = Decimal(e.spike_value)
    spikes = [Spike(0, e.first_spike_duration_ms, value)]
    for k in range(1, e.episodes):
        start = e.warm_start_ms + (k - 1) * e.episode_spacing_ms
        spikes.append(Spike(start, start + e.spike_duration_ms, value))
    return tuple(spikes)


def _e2e_horizon(scenario: Scenario) -> int:
    e = scenario.e2e
    return e.warm_start_ms + (e.episodes - 1) * e.episode_spacing_ms + 10_000


def _wire_devices(sim, scenario, uplink_for_brand, downlink, robot_spec):
    """Shared device wiring for the virtualized and baseline runs."""
    robot = RobotEmulator(sim, robot_spec.robot_id, robot_spec.command_latency_ms)
    forest = ForestMonitoringApp()
    wildfire = WildfireApp(sim, scenario.fire_policy, robot,
                           send_command=downlink.send)
    downlink.subscribe(lambda frame, meta: robot.receive_frame(frame))
    for brand, path in uplink_for_brand.items():
        path.subscribe(forest.deliver, forest.on_drop)
        path.subscribe(wildfire.deliver, wildfire.on_drop)
    sensors = []
    spikes = _spikes(scenario)
    horizon = _e2e_horizon(scenario)
    for spec in scenario.sensors:
        source = SyntheticSource(spikes=spikes)
        sensor = SensorEmulator(sim, spec.sensor_id, spec.brand,
                                spec.quantities, spec.emit_period_ms, source,
                                fire_threshold=scenario.fire_policy.temperature_threshold_cel)
        sensor.start(lambda msg, s: uplink_for_brand[s.brand].send(msg, s), horizon)
        sensors.append(sensor)
    return robot, forest, wildfire, sensors


def run_e2e_virtualized(scenario: Scenario) -> E2eResult:
    study_scenario = SignalingScenario(
        images=list(scenario.catalog), providers=[scenario.provider],
        applications=[
            ApplicationSpec("forest-monitoring", scenario.provider.provider_id,
                            (SENML_HTTP,), scenario.qos),
            ApplicationSpec("wildfire-management", scenario.provider.provider_id,
                            (SENML_HTTP,), scenario.qos),
        ],
        approach=MigrationApproach.LIVE_AFTER_CHAIN,
        boot_delay_ms=scenario.provisioning.boot_delay_ms
        if scenario.provisioning else (14_400, 16_200),
        chaining_delay_ms=scenario.provisioning.chaining_delay_ms
        if scenario.provisioning else 1_000,
        transfer_delay_ms=scenario.provisioning.transfer_delay_ms
        if scenario.provisioning else (4_500, 5_000),
        downtime_ms=scenario.provisioning.downtime_ms
        if scenario.provisioning else (2_000, 3_000),
        vm_quota=scenario.vm_quota,
        retry_after_s=scenario.retry_after_s,
        seed=scenario.seed + 300)
    world = World(study_scenario)
    sim = world.sim
    wf_agent = world.agents["wildfire-management"]

    def chain_for(agent, direction, brand=None):
        model = _RAW_MODEL[brand] if brand else None

        def lookup():
            if not agent.started:
                return None
            for chain_id in agent.chain_ids:
                chain = world.nfvi.chains.get(chain_id)
                if chain is None or chain.direction is not direction:
                    continue
                if model is None or chain.instances[0].image.input.info_model is model:
                    return chain
            return None

        return lookup

    uplinks = {}
    for brand in {s.brand for s in scenario.sensors}:
        uplinks[brand] = SimChainPath(
            sim, chain_for(wf_agent, ChainDirection.UPLINK, brand),
            name=f"uplink-{brand.value.lower()}")
    downlink = SimChainPath(sim, chain_for(wf_agent, ChainDirection.DOWNLINK),
                            name="downlink")
    robot, forest, wildfire, sensors = _wire_devices(
        sim, scenario, uplinks, downlink, scenario.robots[0])
    if scenario.clock_compression:
        sim.run_realtime(scenario.clock_compression)
    else:
        sim.run()
    episodes = fire_episodes(sim.log.events)
    return E2eResult(
        episodes=episodes,
        provisioning_ms=service_provisioning_ms(sim.log.events,
                                                "wildfire-management"),
        emitted=sum(s.emitted for s in sensors),
        received={"forest": forest.received, "wildfire": wildfire.received},
        dropped={"forest": forest.dropped, "wildfire": wildfire.dropped},
        busy_rejections=wildfire.busy_rejections,
        log=sim.log.to_jsonl())


def run_e2e_baseline(scenario: Scenario) -> E2eResult:
    sim = Simulator(seed=scenario.seed + 400)
    uplinks = {}
    for brand in {s.brand for s in scenario.sensors}:
        uplinks[brand] = DirectPath(sim, _uplink_catalog(scenario.catalog, brand),
                                    name=f"direct-up-{brand.value.lower()}")
    down_images = [img for img in scenario.catalog
                   if img.input.info_model in (InfoModel.SENML_JSON, InfoModel.LCP_CMD)
                   and img.output.info_model is InfoModel.LCP_CMD]
    down_images.sort(key=lambda i: i.input.info_model is not InfoModel.SENML_JSON)
    downlink = DirectPath(sim, down_images, name="direct-down")
    robot, forest, wildfire, sensors = _wire_devices(
        sim, scenario, uplinks, downlink, scenario.robots[0])
    sim.run()
    return E2eResult(
        episodes=fire_episodes(sim.log.events),
        provisioning_ms=None,
        emitted=sum(s.emitted for s in sensors),
        received={"forest": forest.received, "wildfire": wildfire.received},
        dropped={"forest": forest.dropped, "wildfire": wildfire.dropped},
        busy_rejections=wildfire.busy_rejections,
        log=sim.log.to_jsonl())


@dataclass
class RampResult:
    response_by_load: list[tuple[int, float]]
    replica_trace: list[tuple[int, int]]
    drops: int
    log: bytes


def run_load_ramp(scenario: Scenario, scaling_enabled: bool) -> RampResult:
    study = scenario.ramp
    sim = Simulator(seed=scenario.seed + (500 if scaling_enabled else 600))
    store = VnfStore()
    image = VnfImage.from_dict({
        "imageId": "ramp-converter", "kind": "PROTOCOL_CONVERTER",
        "input": {"protocol": "COAP", "infoModel": "RAW_SUNSPOT"},
        "output": {"protocol": "HTTP", "infoModel": "RAW_SUNSPOT"},
        "costPerRequestMs": study.cost_per_request_ms})
    store.register(image)
    nfvi = Nfvi(sim, store, boot_delay_ms=study.boot_delay_ms,
                vm_quota={d: max(scenario.vm_quota, 64) for d in Domain})
    T = study.period_t_ms
    policy = ScalingPolicy(T, study.cpu_threshold,
                           cooldown_periods=study.cooldown_periods)
    group = ReplicaGroup("ramp-chain", 0, T)
    pending_boots = [0]

    def join(instance):
        pending_boots[0] -= 1
        group.add_replica(instance, period_index=sim.now_ms // T,
                          now_ms=Fraction(sim.now_ms))
        sim.log.emit("autoscaler", "REPLICA_JOINED",
                     instance=instance.instance_id,
                     period=sim.now_ms // T,
                     replicas=len(group.instances))

    pending_boots[0] += 1
    nfvi.instantiate(image.image_id, Domain.VWSAN_PROVIDER, on_running=join)

    # exact uniform arrivals: period p of step s puts `load` requests at
    # period_start + k*T/load, k = 0..load-1
    arrivals: list[tuple[Fraction, int]] = []
    period_start = T  # period 0 is warm-up for the first replica's boot
    for step_index, (load, periods) in enumerate(study.steps):
        for _ in range(periods):
            for k in range(load):
                arrivals.append((period_start + Fraction(k * T, load), step_index))
            period_start += T
    schedule_end = period_start

    response_sum = [Fraction(0)] * len(study.steps)
    response_n = [0] * len(study.steps)
    drops = 0

    def period_boundary():
        boundary = sim.now_ms
        period = boundary // T - 1
        samples = sample_utilization(group, period, policy)
        for s in samples:
            sim.log.emit("autoscaler", "UTILIZATION_SAMPLE",
                         instance=s.instance_id, period=s.period_index,
                         served=s.served, utilization=s.utilization)
        if scaling_enabled and decide(samples, policy, group) is ScalingAction.SCALE_OUT:
            sim.log.emit("autoscaler", "SCALE_OUT", period=period,
                         maxUtilization=max(s.utilization for s in samples))
            pending_boots[0] += 1
            nfvi.instantiate(image.image_id, Domain.VWSAN_PROVIDER,
                             on_running=join)
        busy_tail = max((b for b in group._busy_until.values()), default=0)
        if boundary < schedule_end or busy_tail > boundary or pending_boots[0]:
            sim.at(boundary + T, period_boundary)

    sim.at(2 * T, period_boundary)  # first full period ends at 2T

    ai = 0
    while True:
        next_ts = sim.peek_ts()
        if ai < len(arrivals) and (next_ts is None or arrivals[ai][0] <= next_ts):
            arrival, step_index = arrivals[ai]
            ai += 1
            try:
                _, completion = group.submit(arrival)
            except AllReplicasDown:
                drops += 1
                continue
            response_sum[step_index] += completion - arrival
            response_n[step_index] += 1
        elif next_ts is not None:
            sim.step()
        else:
            break

    response_by_load = []
    for step_index, (load, _) in enumerate(study.steps):
        mean = (float(response_sum[step_index] / response_n[step_index])
                if response_n[step_index] else 0.0)
        response_by_load.append((load, mean))
    return RampResult(response_by_load,
                      replica_count_trace(sim.log.events),
                      drops, sim.log.to_jsonl())
