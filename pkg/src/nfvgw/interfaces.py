"""Interface descriptors: the (protocol, information-model) pairs the gateway
converts between, plus QoS parameters and provider-side network descriptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import MalformedRequest


class Protocol(str, Enum):
    COAP = "COAP"
    HTTP = "HTTP"
    LCP_TRANSPORT = "LCP_TRANSPORT"


class InfoModel(str, Enum):
    RAW_SUNSPOT = "RAW_SUNSPOT"
    RAW_ADVANTICSYS = "RAW_ADVANTICSYS"
    SENML_JSON = "SENML_JSON"
    LCP_CMD = "LCP_CMD"


# Which information models may be carried over which protocol.  The LCP
# transport is a raw byte stream understood only by the robots; LCP command
# payloads may additionally ride inside HTTP bodies between converters.
COMPATIBLE_MODELS: dict[Protocol, frozenset[InfoModel]] = {
    Protocol.COAP: frozenset({InfoModel.RAW_SUNSPOT, InfoModel.RAW_ADVANTICSYS,
                              InfoModel.SENML_JSON}),
    Protocol.HTTP: frozenset({InfoModel.RAW_SUNSPOT, InfoModel.RAW_ADVANTICSYS,
                              InfoModel.SENML_JSON, InfoModel.LCP_CMD}),
    Protocol.LCP_TRANSPORT: frozenset({InfoModel.LCP_CMD}),
}


@dataclass(frozen=True, order=True)
class InterfaceDescriptor:
    """One northbound or southbound interface of the gateway."""

    protocol: Protocol
    info_model: InfoModel

    def __post_init__(self):
        if self.info_model not in COMPATIBLE_MODELS[self.protocol]:
            raise MalformedRequest(
                f"{self.info_model.value} cannot be carried over {self.protocol.value}")

    def as_dict(self) -> dict:
        return {"protocol": self.protocol.value, "infoModel": self.info_model.value}

    @classmethod
    def from_dict(cls, d: dict) -> "InterfaceDescriptor":
        try:
            return cls(Protocol(d["protocol"]), InfoModel(d["infoModel"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedRequest(f"bad interface descriptor: {d!r}") from exc

    def __str__(self) -> str:
        return f"{self.protocol.value}/{self.info_model.value}"


@dataclass(frozen=True)
class QosParams:
    """Service-delivery QoS limits carried in a service request."""

    max_latency_ms: int
    min_throughput_rps: int

    def __post_init__(self):
        if self.max_latency_ms <= 0 or self.min_throughput_rps <= 0:
            raise MalformedRequest("QoS parameters must be strictly positive")

    def as_dict(self) -> dict:
        return {"maxLatencyMs": self.max_latency_ms,
                "minThroughputRps": self.min_throughput_rps}

    @classmethod
    def from_dict(cls, d: dict) -> "QosParams":
        try:
            return cls(int(d["maxLatencyMs"]), int(d["minThroughputRps"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedRequest(f"bad qos: {d!r}") from exc


class DeviceBrand(str, Enum):
    SUNSPOT = "SUNSPOT"
    ADVANTICSYS = "ADVANTICSYS"
    LEGO_NXT = "LEGO_NXT"


class DeviceClass(str, Enum):
    SENSOR = "SENSOR"
    ROBOT = "ROBOT"


BRAND_CLASS: dict[DeviceBrand, DeviceClass] = {
    DeviceBrand.SUNSPOT: DeviceClass.SENSOR,
    DeviceBrand.ADVANTICSYS: DeviceClass.SENSOR,
    DeviceBrand.LEGO_NXT: DeviceClass.ROBOT,
}


@dataclass(frozen=True)
class VwsanDescriptor:
    """What a sensor/actuator network provider exposes: its device brands and
    the southbound interface spoken by each brand (parallel lists)."""

    provider_id: str
    device_brands: tuple[DeviceBrand, ...]
    southbound: tuple[InterfaceDescriptor, ...]

    def __post_init__(self):
        if len(self.device_brands) != len(self.southbound):
            raise MalformedRequest("one southbound descriptor per brand required")
        if len(set(self.device_brands)) != len(self.device_brands):
            raise MalformedRequest("duplicate device brands")

    def interface_for(self, brand: DeviceBrand) -> InterfaceDescriptor:
        return self.southbound[self.device_brands.index(brand)]

    def as_dict(self) -> dict:
        return {
            "providerId": self.provider_id,
            "deviceBrands": [b.value for b in self.device_brands],
            "southbound": [d.as_dict() for d in self.southbound],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VwsanDescriptor":
        try:
            return cls(
                str(d["providerId"]),
                tuple(DeviceBrand(b) for b in d["deviceBrands"]),
                tuple(InterfaceDescriptor.from_dict(s) for s in d["southbound"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedRequest(f"bad vwsan descriptor: {d!r}") from exc
