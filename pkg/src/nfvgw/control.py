"""Control plane for service negotiation across the three domains.

The Infrastructure Agent (application domain) files service requests with the
sensor-network provider's Local Controller; the Local Controller combines
them with the OSS/BSS network description into VNF requests for the gateway
provider's Central Controller, which resolves chains against the store and
drives deployment.  Availability flows back the same way.

Cross-domain messages are asynchronous events on the simulator loop and are
logged with their REST verb and path; resource collections are serialized
critical sections so the REST adapters may call in from server threads.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from enum import Enum

from .errors import (Conflict, GatewayError, MalformedRequest, NoConversionPath,
                     NotFound, OssUnavailable)
from .interfaces import (BRAND_CLASS, DeviceBrand, DeviceClass,
                         InterfaceDescriptor, QosParams, VwsanDescriptor)
from .nfvi import ChainDirection, Mano
from .sim import Simulator
from .store import VnfImage, VnfStore

SERVICE_REQUESTS_PATH = "/ApplicationsServiceRequests"
NOTIFICATION_PATH = "/ServiceAvailabilityNotification"
VNF_REQUESTS_PATH = "/VNFsRequest"


class ServiceRequestState(str, Enum):
    PENDING = "PENDING"
    VNFS_REQUESTED = "VNFS_REQUESTED"
    AVAILABLE = "AVAILABLE"
    UNAVAILABLE = "UNAVAILABLE"
    CANCELLED = "CANCELLED"


_ALLOWED = {
    ServiceRequestState.PENDING: {ServiceRequestState.VNFS_REQUESTED,
                                  ServiceRequestState.CANCELLED},
    ServiceRequestState.VNFS_REQUESTED: {ServiceRequestState.AVAILABLE,
                                         ServiceRequestState.UNAVAILABLE,
                                         ServiceRequestState.CANCELLED},
    ServiceRequestState.AVAILABLE: {ServiceRequestState.CANCELLED},
    ServiceRequestState.UNAVAILABLE: {ServiceRequestState.VNFS_REQUESTED,
                                      ServiceRequestState.CANCELLED},
    ServiceRequestState.CANCELLED: set(),
}


@dataclass
class ServiceRequest:
    request_id: str
    application_id: str
    northbound: tuple[InterfaceDescriptor, ...]
    qos: QosParams
    state: ServiceRequestState = ServiceRequestState.PENDING
    chain_ids: list[str] = field(default_factory=list)
    vnf_request_id: str | None = None

    def transition(self, new_state: ServiceRequestState) -> None:
        if new_state not in _ALLOWED[self.state]:
            raise Conflict(f"{self.state.value} -> {new_state.value} not allowed")
        self.state = new_state

    def as_dict(self) -> dict:
        return {
            "requestId": self.request_id,
            "applicationId": self.application_id,
            "northbound": [d.as_dict() for d in self.northbound],
            "qos": self.qos.as_dict(),
            "state": self.state.value,
            "chainIds": list(self.chain_ids),
        }


@dataclass
class VnfRequest:
    vnf_request_id: str
    service_request_id: str
    northbound: tuple[InterfaceDescriptor, ...]
    vwsan: VwsanDescriptor
    qos: QosParams
    # brand name -> chain id, filled as deployment completes
    chains: dict[str, str] = field(default_factory=dict)
    failed: bool = False
    deleted: bool = False

    def as_dict(self) -> dict:
        return {
            "vnfRequestId": self.vnf_request_id,
            "serviceRequestId": self.service_request_id,
            "northbound": [d.as_dict() for d in self.northbound],
            "vwsan": self.vwsan.as_dict(),
            "qos": self.qos.as_dict(),
            "chains": dict(self.chains),
        }


@dataclass(frozen=True)
class AvailabilityNotification:
    service_request_id: str
    available: bool
    chain_ids: tuple[str, ...] | None = None
    retry_after_s: int | None = None

    def __post_init__(self):
        if self.available == (self.chain_ids is None) or \
                self.available != (self.retry_after_s is None):
            raise MalformedRequest(
                "exactly one of chainIds / retryAfterS must be populated")


class OssBss:
    """Provider-side directory of network descriptions, with fault injection
    for retry tests."""

    def __init__(self, sim: Simulator, descriptors: dict[str, VwsanDescriptor]):
        self.sim = sim
        self._descriptors = dict(descriptors)
        self.failures_remaining = 0

    def set_descriptor(self, descriptor: VwsanDescriptor) -> None:
        self._descriptors[descriptor.provider_id] = descriptor

    def describe(self, provider_id: str) -> VwsanDescriptor:
        self.sim.log.emit("oss-bss", "OSS_QUERY", provider=provider_id)
        if self.failures_remaining > 0:
            self.failures_remaining -= 1
            raise OssUnavailable("OSS/BSS not reachable")
        descriptor = self._descriptors.get(provider_id)
        if descriptor is None:
            raise NotFound(f"no network description for {provider_id!r}")
        return descriptor


class CentralController:
    """Gateway-provider controller: owns the VNF request collection, searches
    the store and drives the deployment MANO."""

    def __init__(self, sim: Simulator, store: VnfStore, mano: Mano,
                 control_latency_ms: int = 0, retry_after_s: int = 30):
        self.sim = sim
        self.store = store
        self.mano = mano
        self.control_latency_ms = control_latency_ms
        self.retry_after_s = retry_after_s
        self.requests: dict[str, VnfRequest] = {}
        self.notify_cb = None  # wired to the local controller
        self._lock = threading.Lock()
        self._counter = 0

    # -- REST resource operations (Table-driven verb/path logged) --

    def create_vnf_request(self, service_request_id: str,
                           northbound: tuple[InterfaceDescriptor, ...],
                           vwsan: VwsanDescriptor, qos: QosParams) -> str:
        if not northbound or not service_request_id:
            raise MalformedRequest("vnf request needs northbound + service request id")
        with self._lock:
            self._counter += 1
            vr = VnfRequest(f"vr-{self._counter:04d}", service_request_id,
                            tuple(northbound), vwsan, qos)
            self.requests[vr.vnf_request_id] = vr
        self.sim.log.emit("central-controller", "VNF_REQUEST",
                          verb="POST", path=VNF_REQUESTS_PATH,
                          vnfRequest=vr.vnf_request_id,
                          serviceRequest=service_request_id)
        self.sim.after(0, lambda: self._resolve_and_deploy(vr, vr.vwsan.device_brands))
        return vr.vnf_request_id

    def update_vnf_request(self, vnf_request_id: str, patch: dict) -> VnfRequest:
        with self._lock:
            vr = self.requests.get(vnf_request_id)
            if vr is None or vr.deleted:
                raise NotFound(f"vnf request {vnf_request_id!r} unknown")
            old_brands = set(vr.vwsan.device_brands)
            if "vwsan" in patch:
                vr.vwsan = VwsanDescriptor.from_dict(patch["vwsan"]) \
                    if isinstance(patch["vwsan"], dict) else patch["vwsan"]
            if "qos" in patch:
                vr.qos = QosParams.from_dict(patch["qos"]) \
                    if isinstance(patch["qos"], dict) else patch["qos"]
            unknown = set(patch) - {"vwsan", "qos"}
            if unknown:
                raise MalformedRequest(f"unknown vnf request fields: {sorted(unknown)}")
        self.sim.log.emit("central-controller", "VNF_REQUEST_UPDATED",
                          verb="PUT", path=f"{VNF_REQUESTS_PATH}/{{VNFsRequestId}}",
                          vnfRequest=vnf_request_id,
                          serviceRequest=vr.service_request_id)
        added = [b for b in vr.vwsan.device_brands if b not in old_brands]
        removed = old_brands - set(vr.vwsan.device_brands)
        for brand in removed:
            chain_id = vr.chains.pop(brand.value, None)
            if chain_id:
                self._teardown_chain(chain_id)
        if added:
            self.sim.after(0, lambda: self._resolve_and_deploy(vr, added,
                                                               renotify=vr.failed))
        return vr

    def delete_vnf_request(self, vnf_request_id: str) -> None:
        with self._lock:
            vr = self.requests.get(vnf_request_id)
            if vr is None or vr.deleted:
                raise NotFound(f"vnf request {vnf_request_id!r} unknown")
            vr.deleted = True
        self.sim.log.emit("central-controller", "VNF_REQUEST_DELETED",
                          verb="DELETE", path=f"{VNF_REQUESTS_PATH}/{{VNFsRequestId}}",
                          vnfRequest=vnf_request_id,
                          serviceRequest=vr.service_request_id)
        for chain_id in vr.chains.values():
            self._teardown_chain(chain_id)
        vr.chains.clear()

    def get_vnf_request(self, vnf_request_id: str) -> VnfRequest:
        vr = self.requests.get(vnf_request_id)
        if vr is None or vr.deleted:
            raise NotFound(f"vnf request {vnf_request_id!r} unknown")
        return vr

    # -- resolution and deployment --

    def _resolve_and_deploy(self, vr: VnfRequest, brands, renotify: bool = True):
        if vr.deleted:
            return
        plans: list[tuple[DeviceBrand, ChainDirection, list[VnfImage]]] = []
        feasible = True
        for brand in brands:
            south = vr.vwsan.interface_for(brand)
            direction = (ChainDirection.UPLINK
                         if BRAND_CLASS[brand] is DeviceClass.SENSOR
                         else ChainDirection.DOWNLINK)
            images = None
            for north in vr.northbound:
                try:
                    if direction is ChainDirection.UPLINK:
                        images = self.store.resolve_chain(south, north)
                    else:
                        images = self.store.resolve_chain(north, south)
                    break
                except NoConversionPath:
                    continue
            self.sim.log.emit("central-controller", "STORE_LOOKUP",
                              brand=brand.value, found=images is not None,
                              images=[i.image_id for i in images or []],
                              serviceRequest=vr.service_request_id)
            if images is None:
                feasible = False
                continue
            plans.append((brand, direction, images))

        if not feasible:
            vr.failed = True
            self._notify(AvailabilityNotification(
                vr.service_request_id, False, retry_after_s=self.retry_after_s))
            return
        vr.failed = False

        pending = [plan for plan in plans if plan[2]]
        if not pending:
            # all conversions are identity: serve over the direct path
            if renotify:
                self._notify(AvailabilityNotification(
                    vr.service_request_id, True, chain_ids=()))
            return

        remaining = len(pending)

        def chain_ready(brand, chain):
            nonlocal remaining
            vr.chains[brand.value] = chain.chain_id
            remaining -= 1
            if remaining == 0 and not vr.deleted and renotify:
                self._notify(AvailabilityNotification(
                    vr.service_request_id, True,
                    chain_ids=tuple(sorted(vr.chains.values()))))

        for brand, direction, images in pending:
            self.mano.deploy_chain(images, direction, vr.service_request_id,
                                   on_ready=lambda c, b=brand: chain_ready(b, c))

    def _teardown_chain(self, chain_id: str) -> None:
        for inst in list(self.mano.nfvi.instances.values()):
            if inst.chain_id == chain_id and inst.state.value != "TERMINATED":
                self.mano.nfvi.terminate(inst.instance_id)

    def _notify(self, notification: AvailabilityNotification) -> None:
        if self.notify_cb is None:
            return
        self.sim.after(self.control_latency_ms,
                       lambda: _guarded(self.sim, lambda: self.notify_cb(notification)))


class LocalController:
    """Provider-domain controller: owns the service request collection and the
    availability notification resource."""

    def __init__(self, sim: Simulator, provider_id: str, oss: OssBss,
                 central: CentralController, control_latency_ms: int = 0,
                 oss_retry_ms: int = 30_000):
        self.sim = sim
        self.provider_id = provider_id
        self.oss = oss
        self.central = central
        self.control_latency_ms = control_latency_ms
        self.oss_retry_ms = oss_retry_ms
        self.requests: dict[str, ServiceRequest] = {}
        self.availability_listeners: list = []  # infrastructure agents
        self._lock = threading.Lock()
        self._counter = 0

    # -- REST resource operations --

    def create_service_request(self, application_id: str,
                               northbound, qos: QosParams) -> str:
        northbound = tuple(northbound)
        if not northbound:
            raise MalformedRequest("northbound interface list must not be empty")
        if not isinstance(qos, QosParams):
            qos = QosParams.from_dict(qos)
        with self._lock:
            self._counter += 1
            req = ServiceRequest(f"sr-{self.provider_id}-{self._counter:04d}",
                                 application_id, northbound, qos)
            self.requests[req.request_id] = req
        self.sim.log.emit("local-controller", "SERVICE_REQUEST",
                          verb="POST", path=SERVICE_REQUESTS_PATH,
                          serviceRequest=req.request_id, app=application_id)
        self.sim.after(0, lambda: self._signal(req))
        return req.request_id

    def update_service_request(self, request_id: str, patch: dict) -> ServiceRequest:
        with self._lock:
            req = self.requests.get(request_id)
            if req is None:
                raise NotFound(f"service request {request_id!r} unknown")
            if req.state is ServiceRequestState.CANCELLED:
                raise Conflict("request is cancelled")
            unknown = set(patch) - {"qos", "northbound"}
            if unknown:
                raise MalformedRequest(f"unknown patch fields: {sorted(unknown)}")
            if "qos" in patch:
                req.qos = patch["qos"] if isinstance(patch["qos"], QosParams) \
                    else QosParams.from_dict(patch["qos"])
            if "northbound" in patch:
                nb = tuple(d if isinstance(d, InterfaceDescriptor)
                           else InterfaceDescriptor.from_dict(d)
                           for d in patch["northbound"])
                if not nb:
                    raise MalformedRequest("northbound interface list must not be empty")
                req.northbound = nb
        self.sim.log.emit("local-controller", "SERVICE_REQUEST_UPDATED",
                          verb="PUT",
                          path=f"{SERVICE_REQUESTS_PATH}/{{RequestId}}",
                          serviceRequest=request_id)
        if req.state is ServiceRequestState.UNAVAILABLE:
            self.sim.after(0, lambda: self._signal(req))
        return req

    def delete_service_request(self, request_id: str) -> None:
        with self._lock:
            req = self.requests.get(request_id)
            if req is None or req.state is ServiceRequestState.CANCELLED:
                raise NotFound(f"service request {request_id!r} unknown")
            req.transition(ServiceRequestState.CANCELLED)
        self.sim.log.emit("local-controller", "SERVICE_REQUEST_DELETED",
                          verb="DELETE",
                          path=f"{SERVICE_REQUESTS_PATH}/{{RequestId}}",
                          serviceRequest=request_id)
        if req.vnf_request_id is not None:
            vnf_request_id = req.vnf_request_id
            self.sim.after(self.control_latency_ms,
                           lambda: _guarded(self.sim, lambda:
                                            self.central.delete_vnf_request(vnf_request_id)))

    def get_service_request(self, request_id: str) -> ServiceRequest:
        req = self.requests.get(request_id)
        if req is None:
            raise NotFound(f"service request {request_id!r} unknown")
        return req

    def notify_availability(self, notification: AvailabilityNotification) -> None:
        with self._lock:
            req = self.requests.get(notification.service_request_id)
            if req is None:
                raise NotFound("unknown service request in notification")
            if req.state is not ServiceRequestState.VNFS_REQUESTED:
                raise Conflict(f"request is {req.state.value}, not VNFS_REQUESTED")
            if notification.available:
                req.transition(ServiceRequestState.AVAILABLE)
                req.chain_ids = list(notification.chain_ids or ())
            else:
                req.transition(ServiceRequestState.UNAVAILABLE)
        self.sim.log.emit("local-controller", "AVAILABILITY_NOTIFICATION",
                          verb="POST", path=NOTIFICATION_PATH,
                          serviceRequest=notification.service_request_id,
                          available=notification.available,
                          chainIds=list(notification.chain_ids or ()),
                          retryAfterS=notification.retry_after_s)
        for listener in list(self.availability_listeners):
            self.sim.after(self.control_latency_ms,
                           lambda cb=listener: cb(notification))

    # -- signaling toward the central controller --

    def _signal(self, req: ServiceRequest) -> None:
        """Query the OSS/BSS and file the VNF request (initial or resumed)."""
        if req.state not in (ServiceRequestState.PENDING,
                             ServiceRequestState.UNAVAILABLE):
            return
        try:
            vwsan = self.oss.describe(self.provider_id)
        except OssUnavailable:
            self.sim.log.emit("local-controller", "OSS_RETRY_SCHEDULED",
                              serviceRequest=req.request_id,
                              retryAtMs=self.sim.now_ms + self.oss_retry_ms)
            self.sim.after(self.oss_retry_ms, lambda: self._signal(req))
            return
        req.transition(ServiceRequestState.VNFS_REQUESTED)
        northbound, qos, request_id = req.northbound, req.qos, req.request_id

        def file_vnf_request():
            if req.state is not ServiceRequestState.VNFS_REQUESTED:
                return
            req.vnf_request_id = self.central.create_vnf_request(
                request_id, northbound, vwsan, qos)

        self.sim.after(self.control_latency_ms, file_vnf_request)


def _guarded(sim: Simulator, fn) -> None:
    """Deliver an async cross-domain message; rejections become log events."""
    try:
        fn()
    except GatewayError as exc:
        sim.log.emit("control", "CONTROL_REJECTED", code=exc.code,
                     reason=str(exc))


class RetryPolicy(str, Enum):
    RETRY = "RETRY"
    CANCEL = "CANCEL"


class InfrastructureAgent:
    """Application-side signaling agent: files the service request and reacts
    to availability notifications (start service, retry, or cancel)."""

    def __init__(self, sim: Simulator, application_id: str,
                 local: LocalController, qos: QosParams,
                 northbound, policy: RetryPolicy = RetryPolicy.RETRY,
                 retry_after_s: int = 30):
        self.sim = sim
        self.application_id = application_id
        self.local = local
        self.qos = qos
        self.northbound = tuple(northbound)
        self.policy = policy
        self.retry_after_s = retry_after_s
        self.request_id: str | None = None
        self.chain_ids: list[str] = []
        self.started = False
        self.on_service_start = None  # hook for the sensor/actuator agent

    def submit(self) -> None:
        if self._on_notification not in self.local.availability_listeners:
            self.local.availability_listeners.append(self._on_notification)
        self.request_id = self.local.create_service_request(
            self.application_id, self.northbound, self.qos)

    def _on_notification(self, notification: AvailabilityNotification) -> None:
        if notification.service_request_id != self.request_id:
            return
        if notification.available:
            self.chain_ids = list(notification.chain_ids or ())
            self.started = True
            self.sim.log.emit(self.application_id, "SERVICE_START",
                              serviceRequest=self.request_id,
                              chainIds=list(self.chain_ids))
            if self.on_service_start is not None:
                self.on_service_start(self.chain_ids)
        elif self.policy is RetryPolicy.RETRY:
            retry_ms = (notification.retry_after_s or self.retry_after_s) * 1000

            def resume():
                req = self.local.requests.get(self.request_id)
                if req is not None and req.state is ServiceRequestState.UNAVAILABLE:
                    _guarded(self.sim, lambda: self.local.update_service_request(
                        self.request_id, {"qos": self.qos}))

            self.sim.log.emit(self.application_id, "RETRY_SCHEDULED",
                              serviceRequest=self.request_id,
                              retryAtMs=self.sim.now_ms + retry_ms)
            self.sim.after(retry_ms, resume)
        else:
            _guarded(self.sim, lambda: self.local.delete_service_request(self.request_id))
