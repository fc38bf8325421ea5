"""Typed DNS records and the JSON record-file format.

A record file is either one JSON object or an array of them; each object
carries a ``"Type"`` key followed by type-specific keys::

    {"Type": "A", "Address": "192.168.1.1"}
    {"Type": "MX", "MailServer": "mail.example.com", "TTL": 3600, "Priority": 10}

Encoding is canonical (fixed key order, compact separators) so equal files
always produce the same bytes and therefore the same content id.
"""

from __future__ import annotations

import enum
import ipaddress
import json
import re
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import (
    BadAddressSyntax,
    BadRecordField,
    MalformedJson,
    MissingTypeKey,
    ValidationFailure,
)
from .names import parse_domain_name

DEFAULT_TTL = 60

_HEX_RE = re.compile(r"^(?:[0-9a-fA-F]{2})*$")


class RRType(enum.IntEnum):
    A = 1
    NS = 2
    CNAME = 5
    SOA = 6
    PTR = 12
    MX = 15
    TXT = 16
    AAAA = 28
    SRV = 33
    OPT = 41
    TLSA = 52
    ANY = 255


def rrtype_name(code: int) -> str:
    try:
        return RRType(code).name
    except ValueError:
        return f"TYPE{code}"


def parse_rrtype(value: str | int) -> int:
    if isinstance(value, int):
        return value
    text = value.strip().upper()
    if text.startswith("TYPE") and text[4:].isdigit():
        return int(text[4:])
    try:
        return RRType[text]
    except KeyError:
        raise ValueError(f"unknown record type {value!r}") from None


def _check_uint(name: str, value: Any, bits: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadRecordField(f"{name} must be an integer, got {value!r}")
    if not 0 <= value < (1 << bits):
        raise BadRecordField(f"{name}={value} does not fit in {bits} bits")
    return value


def _check_name(name: str, value: Any) -> str:
    if not isinstance(value, str):
        raise BadRecordField(f"{name} must be a string, got {value!r}")
    try:
        parse_domain_name(value, strict=False)
    except ValidationFailure as exc:
        raise BadRecordField(f"{name}: {exc}") from exc
    return value


@dataclass(frozen=True)
class ARecord:
    address: str

    rtype = RRType.A

    def __post_init__(self) -> None:
        if not isinstance(self.address, str):
            raise BadAddressSyntax(f"address must be text, got {self.address!r}")
        try:
            ipaddress.IPv4Address(self.address)
        except (ipaddress.AddressValueError, TypeError) as exc:
            raise BadAddressSyntax(f"bad IPv4 address {self.address!r}") from exc

    def to_json(self) -> dict[str, Any]:
        return {"Type": "A", "Address": self.address}


@dataclass(frozen=True)
class AAAARecord:
    address: str

    rtype = RRType.AAAA

    def __post_init__(self) -> None:
        if not isinstance(self.address, str):
            raise BadAddressSyntax(f"address must be text, got {self.address!r}")
        try:
            ipaddress.IPv6Address(self.address)
        except (ipaddress.AddressValueError, TypeError) as exc:
            raise BadAddressSyntax(f"bad IPv6 address {self.address!r}") from exc

    def to_json(self) -> dict[str, Any]:
        return {"Type": "AAAA", "Address": self.address}


@dataclass(frozen=True)
class CNAMERecord:
    target: str

    rtype = RRType.CNAME

    def __post_init__(self) -> None:
        _check_name("Target", self.target)

    def to_json(self) -> dict[str, Any]:
        return {"Type": "CNAME", "Target": self.target}


@dataclass(frozen=True)
class MXRecord:
    mail_server: str
    ttl: int
    priority: int

    rtype = RRType.MX

    def __post_init__(self) -> None:
        _check_name("MailServer", self.mail_server)
        _check_uint("TTL", self.ttl, 32)
        _check_uint("Priority", self.priority, 16)

    def to_json(self) -> dict[str, Any]:
        return {"Type": "MX", "MailServer": self.mail_server, "TTL": self.ttl, "Priority": self.priority}


@dataclass(frozen=True)
class TLSARecord:
    usage: int
    selector: int
    matching_type: int
    cert_data: str

    rtype = RRType.TLSA

    def __post_init__(self) -> None:
        _check_uint("Usage", self.usage, 8)
        _check_uint("Selector", self.selector, 8)
        _check_uint("MatchingType", self.matching_type, 8)
        if not isinstance(self.cert_data, str) or not _HEX_RE.match(self.cert_data):
            raise BadRecordField(f"CertData must be hex, got {self.cert_data!r}")

    def to_json(self) -> dict[str, Any]:
        return {
            "Type": "TLSA",
            "Usage": self.usage,
            "Selector": self.selector,
            "MatchingType": self.matching_type,
            "CertData": self.cert_data,
        }


@dataclass(frozen=True)
class ExtensionRecord:
    """A record of a type this package does not interpret.

    Kept verbatim so files written by newer tools survive a round trip; the
    resolver never answers with it.
    """

    type: str
    fields: tuple[tuple[str, Any], ...] = ()

    rtype = None

    def to_json(self) -> dict[str, Any]:
        return {"Type": self.type, **dict(self.fields)}


@dataclass(frozen=True)
class RawRecord:
    """Opaque wire rdata for types relayed from upstream without decoding."""

    type_code: int
    rdata: bytes

    @property
    def rtype(self) -> int:
        return self.type_code


DnsRecord = Union[ARecord, AAAARecord, CNAMERecord, MXRecord, TLSARecord, ExtensionRecord]
RecordData = Union[ARecord, AAAARecord, CNAMERecord, MXRecord, TLSARecord, RawRecord]


@dataclass(frozen=True)
class Answer:
    """One resource record in a resolution result."""

    name: str
    rtype: int
    ttl: int
    data: RecordData
    rclass: int = 1


@dataclass(frozen=True)
class RecordFile:
    records: tuple[DnsRecord, ...]
    # Not serialized: the JSON format has no place for it.
    default_ttl: int = field(default=DEFAULT_TTL)

    def __post_init__(self) -> None:
        if not self.records:
            raise MalformedJson("a record file needs at least one record")

    def of_type(self, rtype: int) -> list[DnsRecord]:
        return [r for r in self.records if r.rtype == rtype]

    def ttl_for(self, record: DnsRecord) -> int:
        if isinstance(record, MXRecord):
            return record.ttl
        return self.default_ttl


def _require(obj: dict[str, Any], key: str) -> Any:
    try:
        return obj[key]
    except KeyError:
        raise BadRecordField(f"{obj.get('Type')} record lacks {key!r}") from None


def _str_field(obj: dict[str, Any], key: str) -> str:
    value = _require(obj, key)
    if not isinstance(value, str):
        raise BadAddressSyntax(f"{key} must be a string, got {value!r}")
    return value


def record_from_json(obj: Any) -> DnsRecord:
    if not isinstance(obj, dict):
        raise MalformedJson(f"record must be a JSON object, got {type(obj).__name__}")
    if "Type" not in obj:
        raise MissingTypeKey(f"record has no 'Type' key: {obj!r}")
    kind = obj["Type"]
    if not isinstance(kind, str):
        raise MissingTypeKey(f"'Type' must be a string, got {kind!r}")
    if kind == "A":
        return ARecord(_str_field(obj, "Address"))
    if kind == "AAAA":
        return AAAARecord(_str_field(obj, "Address"))
    if kind == "CNAME":
        return CNAMERecord(_require(obj, "Target"))
    if kind == "MX":
        return MXRecord(_require(obj, "MailServer"), _require(obj, "TTL"), _require(obj, "Priority"))
    if kind == "TLSA":
        return TLSARecord(
            _require(obj, "Usage"),
            _require(obj, "Selector"),
            _require(obj, "MatchingType"),
            _require(obj, "CertData"),
        )
    return ExtensionRecord(kind, tuple((k, v) for k, v in obj.items() if k != "Type"))


def _dumps(obj: Any) -> bytes:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def encode_record_file(file: RecordFile) -> bytes:
    if len(file.records) == 1:
        return _dumps(file.records[0].to_json())
    return _dumps([r.to_json() for r in file.records])


def decode_record_file(data: bytes | str, default_ttl: int = DEFAULT_TTL) -> RecordFile:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJson(f"record file is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedJson(str(exc)) from exc
    items = doc if isinstance(doc, list) else [doc]
    return RecordFile(tuple(record_from_json(item) for item in items), default_ttl=default_ttl)


def record_file(*records: DnsRecord, default_ttl: int = DEFAULT_TTL) -> RecordFile:
    return RecordFile(tuple(records), default_ttl=default_ttl)


class Rcode(enum.IntEnum):
    NOERROR = 0
    FORMERR = 1
    SERVFAIL = 2
    NXDOMAIN = 3
    NOTIMP = 4
    REFUSED = 5


def rcode_name(code: int) -> str:
    try:
        return Rcode(code).name
    except ValueError:
        return f"RCODE{code}"


@dataclass(frozen=True)
class ResolutionResult:
    rcode: int
    answers: tuple[Answer, ...] = ()
    cname_chain: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.rcode == Rcode.NXDOMAIN and self.answers:
            raise ValueError("an NXDOMAIN result carries no answers")

    @classmethod
    def nxdomain(cls) -> ResolutionResult:
        return cls(Rcode.NXDOMAIN)

    @classmethod
    def servfail(cls) -> ResolutionResult:
        return cls(Rcode.SERVFAIL)

    @property
    def min_ttl(self) -> int | None:
        return min((a.ttl for a in self.answers), default=None)
