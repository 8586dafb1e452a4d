"""SenML pack encoding and decoding.

Packs serialize to a canonical JSON form: keys sorted, no insignificant
whitespace, numeric values emitted as their original decimal strings (no
float round-trip).  Canonical bytes make cross-brand equivalence checks and
golden-vector tests meaningful as byte comparisons.

Measurement packs use ``bn``/``bt``/``e``; actuation packs additionally carry
an ``act`` object with the command name and optional target.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

from .errors import ParseError

_DECIMAL_RE = re.compile(r"-?\d+(\.\d+)?")


@dataclass(frozen=True)
class SenmlEntry:
    """One measurement: exactly one of value / string_value / bool_value set."""

    name: str
    unit: str | None = None
    value: Decimal | None = None
    string_value: str | None = None
    bool_value: bool | None = None
    time_s: int | None = None

    def __post_init__(self):
        populated = [v for v in (self.value, self.string_value, self.bool_value)
                     if v is not None]
        if len(populated) != 1:
            raise ParseError("entry needs exactly one of v/sv/bv")


@dataclass(frozen=True)
class Actuation:
    command: str
    target: str | None = None


@dataclass(frozen=True)
class SenmlPack:
    base_name: str
    base_time_s: int
    entries: tuple[SenmlEntry, ...] = ()
    actuation: Actuation | None = None

    def __post_init__(self):
        for e in self.entries:
            if not (self.base_name + e.name):
                raise ParseError("resolved entry name must be non-empty")

    def to_json(self) -> bytes:
        """Canonical serialization: sorted keys, minimal whitespace."""
        return _dump(self._as_obj())

    def _as_obj(self) -> dict:
        obj: dict = {"bn": self.base_name, "bt": self.base_time_s,
                     "e": [_entry_obj(e) for e in self.entries]}
        if self.actuation is not None:
            act = {"command": self.actuation.command}
            if self.actuation.target is not None:
                act["target"] = self.actuation.target
            obj["act"] = act
        return obj


def _entry_obj(e: SenmlEntry) -> dict:
    obj: dict = {"n": e.name}
    if e.unit is not None:
        obj["u"] = e.unit
    if e.value is not None:
        obj["v"] = e.value
    elif e.string_value is not None:
        obj["sv"] = e.string_value
    else:
        obj["bv"] = e.bool_value
    if e.time_s is not None:
        obj["t"] = e.time_s
    return obj


def _dump(obj) -> bytes:
    """json.dumps with sorted keys, except Decimals are written verbatim."""
    if isinstance(obj, dict):
        items = (b'"%s":%s' % (k.encode(), _dump(v)) for k, v in sorted(obj.items()))
        return b"{" + b",".join(items) + b"}"
    if isinstance(obj, list):
        return b"[" + b",".join(_dump(v) for v in obj) + b"]"
    if isinstance(obj, Decimal):
        text = str(obj)
        if not _DECIMAL_RE.fullmatch(text):
            raise ParseError(f"non-plain decimal {text!r}")
        return text.encode()
    return json.dumps(obj, separators=(",", ":"), sort_keys=True).encode()


def parse_pack(data: bytes | str) -> SenmlPack:
    """Parse a JSON SenML pack, keeping numeric values as Decimals."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    try:
        obj = json.loads(data, parse_float=Decimal, parse_int=_int_or_decimal)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad SenML JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("SenML pack must be a JSON object")
    try:
        entries = tuple(_parse_entry(e) for e in obj.get("e", []))
        act = None
        if "act" in obj:
            act_obj = obj["act"]
            act = Actuation(str(act_obj["command"]), act_obj.get("target"))
        return SenmlPack(str(obj["bn"]), int(obj["bt"]), entries, act)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad SenML pack: {exc}") from exc


def _int_or_decimal(text: str):
    # bt/t stay ints; anything else keeps exact decimal form
    return int(text)


def _parse_entry(obj: dict) -> SenmlEntry:
    value = obj.get("v")
    if value is not None and not isinstance(value, Decimal):
        value = Decimal(str(value))
    return SenmlEntry(
        name=str(obj["n"]),
        unit=obj.get("u"),
        value=value,
        string_value=obj.get("sv"),
        bool_value=obj.get("bv"),
        time_s=obj.get("t"),
    )


def parse_decimal(text: str) -> Decimal:
    """Strict plain-decimal parser (no exponents, no inf/nan)."""
    if not _DECIMAL_RE.fullmatch(text):
        raise ParseError(f"not a plain decimal: {text!r}")
    try:
        return Decimal(text)
    except InvalidOperation as exc:  # pragma: no cover - regex already guards
        raise ParseError(f"not a decimal: {text!r}") from exc
