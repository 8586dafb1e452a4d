"""Gateway VNF behaviors: protocol conversion between CoAP-like, HTTP-like and
the robots' length-prefixed command transport, and information-model
conversion between brand-specific raw measurements, SenML packs, and robot
commands.

All conversions are pure functions; :func:`behavior_for` maps a converter
image's (input, output) descriptor pair to the matching function so chains can
be executed hop by hop.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from decimal import Decimal
from enum import Enum

from .errors import (ChainDown, MissingBody, ParseError, UnknownCommand,
                     UnsupportedCode)
from .interfaces import DeviceBrand, InfoModel, InterfaceDescriptor, Protocol
from .senml import Actuation, SenmlEntry, SenmlPack, parse_decimal, parse_pack


# --------------------------------------------------------------------------
# message types
# --------------------------------------------------------------------------

class CoapType(str, Enum):
    CON = "CON"
    NON = "NON"


class CoapCode(str, Enum):
    GET = "GET"
    POST = "POST"
    CONTENT_205 = "CONTENT_205"


@dataclass(frozen=True)
class CoapMessage:
    msg_type: CoapType
    code: CoapCode
    message_id: int
    uri_path: str
    payload: bytes = b""

    def __post_init__(self):
        if not 0 <= self.message_id <= 0xFFFF:
            raise ParseError("CoAP message id must fit in 16 bits")


class HttpKind(str, Enum):
    REQUEST = "REQUEST"
    RESPONSE = "RESPONSE"


@dataclass(frozen=True)
class HttpMessage:
    kind: HttpKind
    uri: str
    method: str | None = None
    status: int | None = None
    headers: tuple[tuple[str, str], ...] = ()
    body: bytes = b""

    def __post_init__(self):
        if self.body and self.header("Content-Type") is None:
            raise ParseError("non-empty body requires Content-Type")

    def header(self, name: str) -> str | None:
        for key, value in self.headers:
            if key.lower() == name.lower():
                return value
        return None


@dataclass(frozen=True)
class LcpFrame:
    """A robot-transport frame: 2-byte little-endian length prefix + body."""

    data: bytes

    @property
    def body(self) -> bytes:
        return self.data[2:]


Message = CoapMessage | HttpMessage | LcpFrame


# --------------------------------------------------------------------------
# raw measurement encodings
# --------------------------------------------------------------------------

class Quantity(str, Enum):
    TEMPERATURE = "TEMPERATURE"
    HUMIDITY = "HUMIDITY"
    CO2 = "CO2"
    WIND_SPEED = "WIND_SPEED"
    RAIN = "RAIN"


UNIT_FOR_QUANTITY: dict[Quantity, str] = {
    Quantity.TEMPERATURE: "Cel",
    Quantity.HUMIDITY: "%RH",
    Quantity.CO2: "ppm",
    Quantity.WIND_SPEED: "m/s",
    Quantity.RAIN: "mm",
}

_TLV_SENSOR_ID = 0x01
_TLV_QUANTITY = 0x02
_TLV_VALUE = 0x03
_TLV_UNIT = 0x04
_TLV_TIMESTAMP = 0x05

_QUANTITY_CODE = {q: i + 1 for i, q in enumerate(Quantity)}
_CODE_QUANTITY = {v: k for k, v in _QUANTITY_CODE.items()}


@dataclass(frozen=True)
class RawMeasurement:
    sensor_id: str
    brand: DeviceBrand
    quantity: Quantity
    value: Decimal
    unit: str
    timestamp_s: int

    def __post_init__(self):
        if self.unit != UNIT_FOR_QUANTITY[self.quantity]:
            raise ParseError(
                f"unit {self.unit!r} inconsistent with {self.quantity.value}")


def encode_sunspot(m: RawMeasurement) -> bytes:
    return f"{m.sensor_id}|{m.quantity.value}|{m.value}|{m.unit}|{m.timestamp_s}".encode()


def decode_sunspot(raw: bytes) -> RawMeasurement:
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ParseError("sunspot payload is not ASCII") from exc
    parts = text.split("|")
    if len(parts) != 5:
        raise ParseError(f"expected 5 pipe-delimited fields, got {len(parts)}")
    sensor_id, quantity, value, unit, ts = parts
    if not sensor_id:
        raise ParseError("empty sensor id")
    try:
        q = Quantity(quantity)
        ts_s = int(ts)
    except ValueError as exc:
        raise ParseError(f"bad sunspot field: {exc}") from exc
    return RawMeasurement(sensor_id, DeviceBrand.SUNSPOT, q,
                          parse_decimal(value), unit, ts_s)


def _tlv(t: int, value: bytes) -> bytes:
    if len(value) > 0xFF:
        raise ParseError("TLV value too long")
    return bytes([t, len(value)]) + value


def encode_advanticsys(m: RawMeasurement) -> bytes:
    return b"".join([
        _tlv(_TLV_SENSOR_ID, m.sensor_id.encode("ascii")),
        _tlv(_TLV_QUANTITY, bytes([_QUANTITY_CODE[m.quantity]])),
        _tlv(_TLV_VALUE, str(m.value).encode("ascii")),
        _tlv(_TLV_UNIT, m.unit.encode("ascii")),
        _tlv(_TLV_TIMESTAMP, struct.pack(">I", m.timestamp_s)),
    ])


def decode_advanticsys(raw: bytes) -> RawMeasurement:
    fields: dict[int, bytes] = {}
    pos = 0
    while pos < len(raw):
        if pos + 2 > len(raw):
            raise ParseError("truncated TLV header")
        t, length = raw[pos], raw[pos + 1]
        pos += 2
        if pos + length > len(raw):
            raise ParseError("truncated TLV value")
        if t in fields:
            raise ParseError(f"duplicate TLV type 0x{t:02x}")
        fields[t] = raw[pos:pos + length]
        pos += length
    required = {_TLV_SENSOR_ID, _TLV_QUANTITY, _TLV_VALUE, _TLV_UNIT,
                _TLV_TIMESTAMP}
    if set(fields) != required:
        raise ParseError("TLV payload missing or extra fields")
    qcode = fields[_TLV_QUANTITY]
    if len(qcode) != 1 or qcode[0] not in _CODE_QUANTITY:
        raise ParseError("bad quantity code")
    if len(fields[_TLV_TIMESTAMP]) != 4:
        raise ParseError("timestamp must be 4 bytes")
    try:
        sensor_id = fields[_TLV_SENSOR_ID].decode("ascii")
        unit = fields[_TLV_UNIT].decode("ascii")
        value = parse_decimal(fields[_TLV_VALUE].decode("ascii"))
    except UnicodeDecodeError as exc:
        raise ParseError("TLV text field is not ASCII") from exc
    if not sensor_id:
        raise ParseError("empty sensor id")
    return RawMeasurement(sensor_id, DeviceBrand.ADVANTICSYS,
                          _CODE_QUANTITY[qcode[0]], value, unit,
                          struct.unpack(">I", fields[_TLV_TIMESTAMP])[0])


RAW_CODECS = {
    DeviceBrand.SUNSPOT: (encode_sunspot, decode_sunspot),
    DeviceBrand.ADVANTICSYS: (encode_advanticsys, decode_advanticsys),
}

_RAW_MODEL_BRAND = {
    InfoModel.RAW_SUNSPOT: DeviceBrand.SUNSPOT,
    InfoModel.RAW_ADVANTICSYS: DeviceBrand.ADVANTICSYS,
}


# --------------------------------------------------------------------------
# LCP command table
# --------------------------------------------------------------------------

LCP_OPCODES: dict[str, int] = {
    "grab": 0x01,
    "deploy": 0x02,
    "stop": 0x03,
    "status": 0x04,
}
LCP_COMMANDS: dict[int, str] = {v: k for k, v in LCP_OPCODES.items()}

# commands that produce feedback to the caller
_REPLY_OPCODES = {0x04}


@dataclass(frozen=True)
class LcpCommand:
    opcode: int
    args: bytes = b""
    expects_reply: bool = False

    def __post_init__(self):
        if self.opcode not in LCP_COMMANDS:
            raise UnknownCommand(f"opcode 0x{self.opcode:02x} not in command table")

    def to_bytes(self) -> bytes:
        return bytes([self.opcode]) + self.args

    @classmethod
    def from_bytes(cls, data: bytes) -> "LcpCommand":
        if not data:
            raise ParseError("empty command")
        return cls(data[0], data[1:], expects_reply=data[0] in _REPLY_OPCODES)

    def decode(self) -> tuple[str, str | None]:
        """Inverse of the command-table mapping: (command, target)."""
        target = self.args.decode("ascii") if self.args else None
        return LCP_COMMANDS[self.opcode], target


# --------------------------------------------------------------------------
# the four conversion operations
# --------------------------------------------------------------------------

_MEDIA_TYPES = {
    InfoModel.RAW_SUNSPOT: "text/plain",
    InfoModel.RAW_ADVANTICSYS: "text/plain",
    InfoModel.SENML_JSON: "application/senml+json",
    InfoModel.LCP_CMD: "application/octet-stream",
}


def protocol_convert_up(msg: CoapMessage,
                        info_model: InfoModel = InfoModel.RAW_SUNSPOT) -> HttpMessage:
    """Re-encode an uplink CoAP message as HTTP, payload byte-exact."""
    uri = "/" + msg.uri_path.lstrip("/")
    headers: tuple[tuple[str, str], ...] = ()
    if msg.payload:
        headers = (("Content-Type", _MEDIA_TYPES[info_model]),)
    if msg.code is CoapCode.CONTENT_205:
        return HttpMessage(HttpKind.RESPONSE, uri, status=200, headers=headers,
                           body=msg.payload)
    if msg.code is CoapCode.POST:
        return HttpMessage(HttpKind.REQUEST, uri, method="POST", headers=headers,
                           body=msg.payload)
    raise UnsupportedCode(f"{msg.code.value} has no uplink mapping")


def protocol_convert_down(msg: HttpMessage) -> LcpFrame:
    """Frame an HTTP-carried LCP command body for the robot transport."""
    if msg.kind is not HttpKind.REQUEST:
        raise UnsupportedCode("downlink conversion expects an HTTP request")
    if not msg.body:
        raise MissingBody("no command body to frame")
    return LcpFrame(struct.pack("<H", len(msg.body)) + msg.body)


def info_model_convert_up(raw: bytes, brand: DeviceBrand) -> SenmlPack:
    """Decode a brand raw payload into a single-entry SenML pack."""
    decode = RAW_CODECS[brand][1]
    m = decode(raw)
    entry = SenmlEntry(name=m.quantity.value.lower(), unit=m.unit, value=m.value)
    return SenmlPack(base_name=m.sensor_id + "/", base_time_s=m.timestamp_s,
                     entries=(entry,))


def info_model_convert_down(pack: SenmlPack) -> LcpCommand:
    """Map an actuation pack onto the robot command table."""
    if pack.actuation is None:
        raise UnknownCommand("pack has no actuation object")
    opcode = LCP_OPCODES.get(pack.actuation.command)
    if opcode is None:
        raise UnknownCommand(f"no opcode for {pack.actuation.command!r}")
    args = (pack.actuation.target or "").encode("ascii")
    return LcpCommand(opcode, args, expects_reply=opcode in _REPLY_OPCODES)


# --------------------------------------------------------------------------
# converter behaviors, keyed by image (input, output) descriptors
# --------------------------------------------------------------------------

def _http_with_body(msg: HttpMessage, body: bytes, model: InfoModel) -> HttpMessage:
    headers = tuple((k, v) for k, v in msg.headers if k.lower() != "content-type")
    if body:
        headers += (("Content-Type", _MEDIA_TYPES[model]),)
    return replace(msg, headers=headers, body=body)


def _up_info_behavior(brand: DeviceBrand):
    def convert(msg: Message) -> Message:
        if not isinstance(msg, HttpMessage):
            raise ParseError("info-model conversion expects an HTTP message")
        pack = info_model_convert_up(msg.body, brand)
        return _http_with_body(msg, pack.to_json(), InfoModel.SENML_JSON)
    return convert


def _down_info_behavior(msg: Message) -> Message:
    if not isinstance(msg, HttpMessage):
        raise ParseError("info-model conversion expects an HTTP message")
    command = info_model_convert_down(parse_pack(msg.body))
    return _http_with_body(msg, command.to_bytes(), InfoModel.LCP_CMD)


def _up_protocol_behavior(info_model: InfoModel):
    def convert(msg: Message) -> Message:
        if not isinstance(msg, CoapMessage):
            raise ParseError("uplink protocol conversion expects CoAP")
        return protocol_convert_up(msg, info_model)
    return convert


def _down_protocol_behavior(msg: Message) -> Message:
    if not isinstance(msg, HttpMessage):
        raise ParseError("downlink protocol conversion expects HTTP")
    return protocol_convert_down(msg)


def behavior_for(inp: InterfaceDescriptor, out: InterfaceDescriptor):
    """Return the conversion callable for a converter image, or None when the
    pair has no defined data-plane behavior (resolution-only images)."""
    if inp.protocol is Protocol.COAP and out.protocol is Protocol.HTTP \
            and inp.info_model is out.info_model:
        return _up_protocol_behavior(inp.info_model)
    if inp.protocol is Protocol.HTTP and out.protocol is Protocol.LCP_TRANSPORT \
            and inp.info_model is out.info_model is InfoModel.LCP_CMD:
        return _down_protocol_behavior
    if inp.protocol is out.protocol is Protocol.HTTP:
        if inp.info_model in _RAW_MODEL_BRAND and out.info_model is InfoModel.SENML_JSON:
            return _up_info_behavior(_RAW_MODEL_BRAND[inp.info_model])
        if inp.info_model is InfoModel.SENML_JSON and out.info_model is InfoModel.LCP_CMD:
            return _down_info_behavior
    return None


# --------------------------------------------------------------------------
# chain execution
# --------------------------------------------------------------------------

@dataclass
class HopRecord:
    instance_id: str
    latency_ms: int


def process_through_chain(hops, message: Message):
    """Push a message through an ordered list of chain hops.

    Each hop must expose ``instance_id``, ``image`` (with descriptors and
    ``cost_per_request_ms``) and ``is_running()``.  Returns the outbound
    message and the per-hop latency record.  An empty hop list is the direct
    path: the message passes unchanged.
    """
    records: list[HopRecord] = []
    for hop in hops:
        if not hop.is_running():
            raise ChainDown(f"instance {hop.instance_id} is not RUNNING")
        convert = behavior_for(hop.image.input, hop.image.output)
        if convert is None:
            raise ParseError(f"image {hop.image.image_id} has no data-plane behavior")
        message = convert(message)
        records.append(HopRecord(hop.instance_id, hop.image.cost_per_request_ms))
    return message, records
