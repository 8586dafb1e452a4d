"""Simulated NFV infrastructure and orchestration for the two provider
domains: VM boot, converter instantiation, chaining, live migration with
per-instance downtime windows, the image-transfer deployment flow, liveness
probing, and termination.

Timing model for live migration: an instance's VM stays reachable while its
memory is pre-copied and goes dark for the configured downtime at the tail of
the transfer window, so every instance reports RUNNING in the target domain
exactly when the window closes.  Downtimes therefore cannot exceed the
transfer delay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import (CapacityExceeded, CompositionMismatch, NotFound,
                     NotRunning, SourceMismatch, UnknownImage)
from .sim import Simulator
from .store import VnfImage, VnfStore


class Domain(str, Enum):
    GATEWAY_PROVIDER = "GATEWAY_PROVIDER"
    VWSAN_PROVIDER = "VWSAN_PROVIDER"


class VmState(str, Enum):
    BOOTING = "BOOTING"
    UP = "UP"
    MIGRATING = "MIGRATING"
    DOWN = "DOWN"


class InstanceState(str, Enum):
    INSTANTIATING = "INSTANTIATING"
    RUNNING = "RUNNING"
    MIGRATING = "MIGRATING"
    TERMINATED = "TERMINATED"


class ChainDirection(str, Enum):
    UPLINK = "UPLINK"
    DOWNLINK = "DOWNLINK"


class MigrationApproach(str, Enum):
    LIVE_AFTER_CHAIN = "LIVE_AFTER_CHAIN"
    IMAGE_THEN_INSTANTIATE = "IMAGE_THEN_INSTANTIATE"


@dataclass
class SimVm:
    vm_id: str
    vcpu: int
    ram_mb: int
    boot_delay_ms: int
    state: VmState = VmState.BOOTING


@dataclass
class VnfInstance:
    instance_id: str
    image: VnfImage
    vm: SimVm
    domain: Domain
    state: InstanceState = InstanceState.INSTANTIATING
    utilization: float = 0.0
    chain_id: str | None = None

    @property
    def image_id(self) -> str:
        return self.image.image_id

    def is_running(self) -> bool:
        return self.state is InstanceState.RUNNING


@dataclass
class ForwardingChain:
    chain_id: str
    direction: ChainDirection
    instances: list[VnfInstance]
    service_request_id: str | None = None
    active: bool = True

    @property
    def instance_ids(self) -> list[str]:
        return [i.instance_id for i in self.instances]

    @property
    def domain(self) -> Domain:
        return self.instances[0].domain


@dataclass(frozen=True)
class MigrationPlan:
    approach: MigrationApproach
    source: Domain
    target: Domain
    per_instance_downtime_ms: tuple[int, ...]
    transfer_delay_ms: int

    def __post_init__(self):
        if self.approach is MigrationApproach.LIVE_AFTER_CHAIN:
            if any(d <= 0 for d in self.per_instance_downtime_ms):
                raise ValueError("live migration requires positive downtimes")
            if any(d > self.transfer_delay_ms for d in self.per_instance_downtime_ms):
                raise ValueError("downtime cannot exceed the transfer window")
        else:
            if any(d != 0 for d in self.per_instance_downtime_ms):
                raise ValueError("image-transfer deployment has no downtime")


@dataclass
class MigrationRecord:
    chain_id: str
    approach: MigrationApproach
    start_ms: int
    source: Domain
    target: Domain
    end_ms: int | None = None
    aborted: bool = False
    # (instance_id, downtime_ms, down_start, down_end)
    windows: list[tuple[str, int, int, int]] = field(default_factory=list)


@dataclass
class ProbeResult:
    instance_id: str
    period_ms: int
    samples: list[tuple[int, bool]] = field(default_factory=list)

    def failed(self) -> list[int]:
        return [ts for ts, ok in self.samples if not ok]

    def measured_downtime_ms(self) -> int | None:
        """Span from the first failed probe to the next successful one."""
        first_fail = None
        for ts, ok in self.samples:
            if not ok and first_fail is None:
                first_fail = ts
            elif ok and first_fail is not None:
                return ts - first_fail
        return None


class Nfvi:
    """Both domains' infrastructure plus the orchestration entry points."""

    def __init__(self, sim: Simulator, store: VnfStore,
                 boot_delay_ms: tuple[int, int] = (12_000, 18_000),
                 chaining_delay_ms: int = 1_000,
                 vm_quota: dict[Domain, int] | None = None):
        self.sim = sim
        self.store = store
        self.boot_delay_ms = boot_delay_ms
        self.chaining_delay_ms = chaining_delay_ms
        self.vm_quota = vm_quota or {d: 64 for d in Domain}
        self.instances: dict[str, VnfInstance] = {}
        self.chains: dict[str, ForwardingChain] = {}
        self.migrations: list[MigrationRecord] = []
        self._live_vms: dict[Domain, int] = {d: 0 for d in Domain}
        self._counters = {"vm": 0, "inst": 0, "chain": 0}

    def _next_id(self, prefix: str) -> str:
        self._counters[prefix] += 1
        return f"{prefix}-{self._counters[prefix]:04d}"

    def _emit_instance(self, inst: VnfInstance, **extra) -> None:
        self.sim.log.emit(inst.instance_id, "INSTANCE_STATE",
                          state=inst.state.value, domain=inst.domain.value,
                          image=inst.image_id, chain=inst.chain_id, **extra)

    def _emit_vm(self, vm: SimVm) -> None:
        self.sim.log.emit(vm.vm_id, "VM_STATE", state=vm.state.value)

    # ------------------------------------------------------------------
    # lifecycle operations
    # ------------------------------------------------------------------

    def instantiate(self, image_id: str, domain: Domain,
                    chain_id: str | None = None,
                    service_request_id: str | None = None,
                    on_running=None) -> VnfInstance:
        image = self.store.get(image_id)
        if image is None:
            raise UnknownImage(f"image {image_id!r} not in store")
        if self._live_vms[domain] >= self.vm_quota[domain]:
            raise CapacityExceeded(f"VM quota reached in {domain.value}")
        self._live_vms[domain] += 1
        boot = self.sim.rng.randint(*self.boot_delay_ms)
        vm = SimVm(self._next_id("vm"), image.resource_profile.vcpu,
                   image.resource_profile.ram_mb, boot)
        inst = VnfInstance(self._next_id("inst"), image, vm, domain,
                           chain_id=chain_id)
        self.instances[inst.instance_id] = inst
        self._emit_vm(vm)
        self._emit_instance(inst, serviceRequest=service_request_id)

        def boot_done():
            if inst.state is not InstanceState.INSTANTIATING:
                return  # terminated while booting
            vm.state = VmState.UP
            inst.state = InstanceState.RUNNING
            self._emit_vm(vm)
            self._emit_instance(inst, serviceRequest=service_request_id)
            if on_running is not None:
                on_running(inst)

        self.sim.after(boot, boot_done)
        return inst

    def chain(self, instance_ids: list[str], direction: ChainDirection,
              service_request_id: str | None = None,
              chain_id: str | None = None) -> ForwardingChain:
        if not instance_ids:
            raise CompositionMismatch("empty chain: use the direct path instead")
        instances = []
        for iid in instance_ids:
            inst = self.instances.get(iid)
            if inst is None:
                raise NotFound(f"instance {iid!r} unknown")
            instances.append(inst)
        domains = {i.domain for i in instances}
        if any(not i.is_running() for i in instances) or len(domains) != 1:
            raise NotRunning("all instances must be RUNNING in one domain")
        for left, right in zip(instances, instances[1:]):
            if left.image.output != right.image.input:
                raise CompositionMismatch(
                    f"{left.image_id} output does not feed {right.image_id}")
        chain = ForwardingChain(chain_id or self._next_id("chain"), direction,
                                instances, service_request_id)
        for inst in instances:
            inst.chain_id = chain.chain_id
        self.chains[chain.chain_id] = chain
        self.sim.log.emit(chain.chain_id, "CHAIN_CREATED",
                          direction=direction.value,
                          instances=list(instance_ids),
                          serviceRequest=service_request_id,
                          domain=instances[0].domain.value)
        return chain

    def migrate(self, chain: ForwardingChain, plan: MigrationPlan,
                on_done=None) -> MigrationRecord:
        """Live migration of a whole chain (approach with per-VM downtime).

        The image-transfer approach never has source instances to move; it is
        realized by :meth:`Mano.deploy_chain` instantiating directly in the
        target domain.
        """
        if plan.approach is not MigrationApproach.LIVE_AFTER_CHAIN:
            raise ValueError("migrate() only implements live migration")
        if not chain.active or any(not i.is_running() or i.domain is not plan.source
                                   for i in chain.instances):
            raise SourceMismatch("chain must be RUNNING in the source domain")
        if len(plan.per_instance_downtime_ms) != len(chain.instances):
            raise ValueError("one downtime entry per chain instance required")

        start = self.sim.now_ms
        record = MigrationRecord(chain.chain_id, plan.approach, start,
                                 plan.source, plan.target)
        self.migrations.append(record)
        self.sim.log.emit(chain.chain_id, "MIGRATION_START",
                          approach=plan.approach.value,
                          source=plan.source.value, target=plan.target.value,
                          serviceRequest=chain.service_request_id)
        self._live_vms[plan.target] += len(chain.instances)

        end = start + plan.transfer_delay_ms
        for inst, downtime in zip(chain.instances, plan.per_instance_downtime_ms):
            inst.state = InstanceState.MIGRATING
            inst.vm.state = VmState.MIGRATING
            self._emit_vm(inst.vm)
            self._emit_instance(inst)
            record.windows.append((inst.instance_id, downtime,
                                   end - downtime, end))

            def go_down(inst=inst):
                if record.aborted or inst.state is not InstanceState.MIGRATING:
                    return
                inst.vm.state = VmState.DOWN
                self._emit_vm(inst.vm)

            def arrive(inst=inst):
                if record.aborted or inst.state is not InstanceState.MIGRATING:
                    return
                inst.vm.state = VmState.UP
                inst.state = InstanceState.RUNNING
                inst.domain = plan.target
                self._emit_vm(inst.vm)
                self._emit_instance(inst)

            self.sim.at(end - downtime, go_down)
            self.sim.at(end, arrive)

        def finish():
            if record.aborted:
                return
            record.end_ms = self.sim.now_ms
            self._live_vms[plan.source] -= len(chain.instances)
            self.sim.log.emit(chain.chain_id, "MIGRATION_END",
                              aborted=False,
                              serviceRequest=chain.service_request_id)
            if on_done is not None:
                on_done(chain)

        self.sim.at(end, finish)
        return record

    def terminate(self, instance_id: str) -> None:
        inst = self.instances.get(instance_id)
        if inst is None or inst.state is InstanceState.TERMINATED:
            raise NotFound(f"no live instance {instance_id!r}")
        if inst.state is InstanceState.MIGRATING:
            self._abort_migration(inst)
        inst.state = InstanceState.TERMINATED
        inst.vm.state = VmState.DOWN
        self._live_vms[inst.domain] -= 1
        self._emit_vm(inst.vm)
        self._emit_instance(inst)
        if inst.chain_id and inst.chain_id in self.chains:
            chain = self.chains[inst.chain_id]
            if chain.active:
                chain.active = False
                self.sim.log.emit(chain.chain_id, "CHAIN_DISSOLVED",
                                  serviceRequest=chain.service_request_id)

    def _abort_migration(self, inst: VnfInstance) -> None:
        """Close the in-flight record and roll sibling instances back to the
        source domain (MIGRATING -> RUNNING is a legal reverse step)."""
        for record in self.migrations:
            if record.chain_id != inst.chain_id or record.end_ms is not None:
                continue
            record.aborted = True
            record.end_ms = self.sim.now_ms
            self._live_vms[record.target] -= len(self.chains[record.chain_id].instances)
            self.sim.log.emit(record.chain_id, "MIGRATION_END", aborted=True)
            for sibling in self.chains[record.chain_id].instances:
                if sibling is inst or sibling.state is not InstanceState.MIGRATING:
                    continue
                sibling.state = InstanceState.RUNNING
                sibling.vm.state = VmState.UP
                self._emit_vm(sibling.vm)
                self._emit_instance(sibling)

    def probe(self, instance_id: str, period_ms: int,
              until_ms: int, start_ms: int | None = None) -> ProbeResult:
        """Sample reachability of an instance's VM once per period over the
        declared window.  Unreachable exactly while the VM is DOWN or BOOTING."""
        inst = self.instances.get(instance_id)
        if inst is None:
            raise NotFound(f"instance {instance_id!r} unknown")
        result = ProbeResult(instance_id, period_ms)
        ts = self.sim.now_ms if start_ms is None else start_ms

        def sample(inst=inst):
            reachable = inst.vm.state not in (VmState.DOWN, VmState.BOOTING)
            result.samples.append((self.sim.now_ms, reachable))

        while ts <= until_ms:
            self.sim.at(ts, sample)
            ts += period_ms
        return result


class Mano:
    """Orchestrates deployment: instantiate, chain, and hand over to the
    serving domain using either migration approach."""

    def __init__(self, nfvi: Nfvi, plan: MigrationPlan, parallel_boot: bool = False):
        self.nfvi = nfvi
        self.plan = plan
        self.parallel_boot = parallel_boot

    @property
    def sim(self) -> Simulator:
        return self.nfvi.sim

    def deploy_chain(self, images: list[VnfImage], direction: ChainDirection,
                     service_request_id: str | None = None, on_ready=None) -> str:
        """Deploy a resolved chain; returns the chain id assigned up front.

        ``on_ready(chain)`` fires once every instance is RUNNING in the target
        domain.  With the live approach the chain boots in the source domain,
        is chained there, then migrates; with the image-transfer approach the
        images cross first and instances only ever exist at the target.
        """
        chain_id = self.nfvi._next_id("chain")
        plan = MigrationPlan(
            self.plan.approach, self.plan.source, self.plan.target,
            self._downtimes(len(images)), self.plan.transfer_delay_ms)
        if plan.approach is MigrationApproach.LIVE_AFTER_CHAIN:
            self._boot_all(images, plan.source, chain_id, service_request_id,
                           lambda ids: self._chain_then_migrate(
                               chain_id, ids, direction, service_request_id,
                               plan, on_ready))
        else:
            self.sim.log.emit(chain_id, "IMAGE_TRANSFER_START",
                              images=[i.image_id for i in images],
                              target=plan.target.value,
                              serviceRequest=service_request_id)

            def transferred():
                self.sim.log.emit(chain_id, "IMAGE_TRANSFER_END",
                                  serviceRequest=service_request_id)
                self._boot_all(images, plan.target, chain_id, service_request_id,
                               lambda ids: self._chain_at(
                                   chain_id, ids, direction, service_request_id,
                                   on_ready))

            self.sim.after(plan.transfer_delay_ms, transferred)
        return chain_id

    def _downtimes(self, n: int) -> tuple[int, ...]:
        base = self.plan.per_instance_downtime_ms
        if self.plan.approach is MigrationApproach.IMAGE_THEN_INSTANTIATE:
            return (0,) * n
        if len(base) >= n:
            return tuple(base[:n])
        return base + (base[-1],) * (n - len(base))

    def _boot_all(self, images, domain, chain_id, service_request_id, done):
        ids: list[str] = []
        remaining = len(images)

        def on_running(_inst):
            nonlocal remaining
            remaining -= 1
            if remaining == 0:
                done(ids)

        if self.parallel_boot:
            for image in images:
                inst = self.nfvi.instantiate(image.image_id, domain, chain_id,
                                             service_request_id, on_running)
                ids.append(inst.instance_id)
        else:
            def boot_next(index=0):
                if index == len(images):
                    return
                inst = self.nfvi.instantiate(
                    images[index].image_id, domain, chain_id, service_request_id,
                    lambda _i, index=index: (on_running(_i), boot_next(index + 1)))
                ids.append(inst.instance_id)

            boot_next()

    def _chain_then_migrate(self, chain_id, ids, direction, service_request_id,
                            plan, on_ready):
        self.sim.log.emit(chain_id, "CHAIN_START", instances=list(ids),
                          serviceRequest=service_request_id)

        def chained():
            chain = self.nfvi.chain(ids, direction, service_request_id, chain_id)
            self.nfvi.migrate(chain, plan, on_done=on_ready)

        self.sim.after(self.nfvi.chaining_delay_ms, chained)

    def _chain_at(self, chain_id, ids, direction, service_request_id, on_ready):
        self.sim.log.emit(chain_id, "CHAIN_START", instances=list(ids),
                          serviceRequest=service_request_id)

        def chained():
            chain = self.nfvi.chain(ids, direction, service_request_id, chain_id)
            if on_ready is not None:
                on_ready(chain)

        self.sim.after(self.nfvi.chaining_delay_ms, chained)

    def teardown(self, chain: ForwardingChain) -> None:
        for inst in chain.instances:
            if inst.state is not InstanceState.TERMINATED:
                self.nfvi.terminate(inst.instance_id)
