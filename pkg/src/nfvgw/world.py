"""Composition of a full simulated deployment: store, infrastructure, the
three domains' controllers, and one signaling agent per application."""

from __future__ import annotations

from dataclasses import dataclass, field

from .control import (CentralController, InfrastructureAgent, LocalController,
                      OssBss, RetryPolicy)
from .errors import GatewayError, NotFound
from .interfaces import InterfaceDescriptor, QosParams, VwsanDescriptor
from .nfvi import Domain, Mano, MigrationApproach, MigrationPlan, Nfvi
from .sim import Simulator
from .store import VnfStore


@dataclass(frozen=True)
class ApplicationSpec:
    application_id: str
    provider_id: str
    northbound: tuple[InterfaceDescriptor, ...]
    qos: QosParams
    submit_at_ms: int = 0
    policy: RetryPolicy = RetryPolicy.RETRY


@dataclass
class SignalingScenario:
    images: list = field(default_factory=list)          # catalog dicts or VnfImage
    providers: list[VwsanDescriptor] = field(default_factory=list)
    applications: list[ApplicationSpec] = field(default_factory=list)
    approach: MigrationApproach = MigrationApproach.LIVE_AFTER_CHAIN
    boot_delay_ms: tuple[int, int] = (14_400, 16_200)
    chaining_delay_ms: int = 1_000
    transfer_delay_ms: tuple[int, int] = (4_500, 5_000)
    downtime_ms: tuple[int, ...] = (2_000, 3_000)
    parallel_boot: bool = False
    vm_quota: int = 64
    control_latency_ms: int = 0
    retry_after_s: int = 30
    seed: int = 1


class World:
    """A wired deployment ready to run on its simulator."""

    def __init__(self, scenario: SignalingScenario):
        self.scenario = scenario
        self.sim = Simulator(seed=scenario.seed)
        self.store = VnfStore()
        for image in scenario.images:
            if isinstance(image, dict):
                self.store.load_catalog([image])
            else:
                self.store.register(image)
        self.nfvi = Nfvi(self.sim, self.store,
                         boot_delay_ms=scenario.boot_delay_ms,
                         chaining_delay_ms=scenario.chaining_delay_ms,
                         vm_quota={d: scenario.vm_quota for d in Domain})
        transfer = self.sim.rng.randint(*scenario.transfer_delay_ms) \
            if isinstance(scenario.transfer_delay_ms, tuple) \
            else scenario.transfer_delay_ms
        plan = MigrationPlan(
            scenario.approach, Domain.GATEWAY_PROVIDER, Domain.VWSAN_PROVIDER,
            scenario.downtime_ms if scenario.approach is MigrationApproach.LIVE_AFTER_CHAIN
            else (0,) * max(1, len(scenario.downtime_ms)),
            transfer)
        self.mano = Mano(self.nfvi, plan, parallel_boot=scenario.parallel_boot)
        self.central = CentralController(self.sim, self.store, self.mano,
                                         scenario.control_latency_ms,
                                         scenario.retry_after_s)
        self.oss = OssBss(self.sim, {p.provider_id: p for p in scenario.providers})
        self.locals: dict[str, LocalController] = {
            p.provider_id: LocalController(self.sim, p.provider_id, self.oss,
                                           self.central,
                                           scenario.control_latency_ms,
                                           oss_retry_ms=scenario.retry_after_s * 1000)
            for p in scenario.providers
        }
        self.central.notify_cb = self._route_notification
        self.agents: dict[str, InfrastructureAgent] = {}
        for app in scenario.applications:
            local = self.locals[app.provider_id]
            agent = InfrastructureAgent(self.sim, app.application_id, local,
                                        app.qos, app.northbound, app.policy,
                                        scenario.retry_after_s)
            self.agents[app.application_id] = agent
            self.sim.at(app.submit_at_ms, agent.submit)

    def _route_notification(self, notification) -> None:
        for local in self.locals.values():
            if notification.service_request_id in local.requests:
                local.notify_availability(notification)
                return
        raise NotFound(f"no domain owns {notification.service_request_id!r}")

    @property
    def log(self):
        return self.sim.log

    def run(self, until_ms: int | None = None) -> int:
        return self.sim.run(until_ms)


def run_signaling(scenario: SignalingScenario, until_ms: int | None = None) -> World:
    """Execute the negotiation end to end and return the world, whose event
    log is the totally ordered control-plane record."""
    world = World(scenario)
    world.run(until_ms)
    return world
