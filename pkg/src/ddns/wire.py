"""RFC 1035 message codec (the subset a forwarding proxy needs).

Names are written uncompressed; compression pointers are followed when
reading.  Only UDP is spoken, so responses are capped at 512 bytes and the
TC bit is set when answers had to be dropped.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field

from .errors import FormErr, RecordFileError, Truncated, UnsupportedOpcode, ValidationFailure
from .names import DomainName, parse_domain_name
from .records import (
    AAAARecord,
    Answer,
    ARecord,
    CNAMERecord,
    MXRecord,
    RawRecord,
    Rcode,
    RecordData,
    ResolutionResult,
    RRType,
    TLSARecord,
)

HEADER = struct.Struct(">HHHHHH")
MAX_UDP_PAYLOAD = 512
MAX_DATAGRAM = 4096
MAX_POINTER_JUMPS = 64

QR = 0x8000
AA = 0x0400
TC = 0x0200
RD = 0x0100
RA = 0x0080

CLASS_IN = 1


@dataclass(frozen=True)
class Question:
    name: str
    qtype: int
    qclass: int = CLASS_IN


@dataclass(frozen=True)
class Message:
    id: int
    flags: int = 0
    questions: tuple[Question, ...] = ()
    answers: tuple[Answer, ...] = ()
    authority: tuple[Answer, ...] = ()
    additional: tuple[Answer, ...] = ()

    @property
    def rcode(self) -> int:
        return self.flags & 0x000F

    @property
    def opcode(self) -> int:
        return (self.flags >> 11) & 0xF

    @property
    def is_response(self) -> bool:
        return bool(self.flags & QR)

    @property
    def truncated(self) -> bool:
        return bool(self.flags & TC)


@dataclass(frozen=True)
class WireQuery:
    id: int
    qname: DomainName
    qtype: int
    qclass: int = CLASS_IN
    flags: int = RD
    # Original question bytes, echoed verbatim in the response.
    raw_question: bytes = field(default=b"", compare=False, repr=False)


# -- names -----------------------------------------------------------------


def encode_name(name: str) -> bytes:
    name = name.rstrip(".")
    out = bytearray()
    if name:
        for label in name.split("."):
            raw = label.encode("latin-1")
            if not raw or len(raw) > 63:
                raise ValueError(f"bad label {label!r} in {name!r}")
            out.append(len(raw))
            out += raw
    out.append(0)
    if len(out) > 255:
        raise ValueError(f"name {name!r} exceeds 255 octets")
    return bytes(out)


def read_name(data: bytes, offset: int, msg_id: int | None = None) -> tuple[str, int]:
    """Read a possibly compressed name; return (text, offset after it)."""
    labels: list[str] = []
    end = None
    jumps = 0
    length_total = 0
    while True:
        if offset >= len(data):
            raise Truncated("name runs past end of message", msg_id)
        length = data[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise Truncated("truncated compression pointer", msg_id)
            target = ((length & 0x3F) << 8) | data[offset + 1]
            if end is None:
                end = offset + 2
            jumps += 1
            if jumps > MAX_POINTER_JUMPS or target >= offset:
                raise FormErr("compression pointer loop", msg_id)
            offset = target
            continue
        if length & 0xC0:
            raise FormErr(f"reserved label type 0x{length:02x}", msg_id)
        offset += 1
        if length == 0:
            break
        if offset + length > len(data):
            raise Truncated("label runs past end of message", msg_id)
        labels.append(data[offset : offset + length].decode("latin-1"))
        length_total += length + 1
        if length_total > 255:
            raise FormErr("name exceeds 255 octets", msg_id)
        offset += length
    return ".".join(labels), (end if end is not None else offset)


# -- resource records ------------------------------------------------------


def encode_rdata(data: RecordData) -> bytes:
    if isinstance(data, ARecord):
        return ipaddress.IPv4Address(data.address).packed
    if isinstance(data, AAAARecord):
        return ipaddress.IPv6Address(data.address).packed
    if isinstance(data, CNAMERecord):
        return encode_name(data.target)
    if isinstance(data, MXRecord):
        return struct.pack(">H", data.priority) + encode_name(data.mail_server)
    if isinstance(data, TLSARecord):
        return bytes([data.usage, data.selector, data.matching_type]) + bytes.fromhex(data.cert_data)
    if isinstance(data, RawRecord):
        return data.rdata
    raise TypeError(f"cannot encode {type(data).__name__} on the wire")


def encode_rr(rr: Answer) -> bytes:
    rdata = encode_rdata(rr.data)
    return encode_name(rr.name) + struct.pack(">HHIH", rr.rtype, rr.rclass, rr.ttl, len(rdata)) + rdata


def _decode_rdata(data: bytes, start: int, length: int, rtype: int, ttl: int, msg_id: int) -> RecordData:
    end = start + length
    rdata = data[start:end]

    def name_at(offset: int) -> tuple[str, int]:
        name, after = read_name(data, offset, msg_id)
        if after > end:
            raise FormErr("name overruns rdata", msg_id)
        return name, after

    try:
        if rtype == RRType.A:
            if length != 4:
                raise FormErr("A rdata must be 4 bytes", msg_id)
            return ARecord(str(ipaddress.IPv4Address(rdata)))
        if rtype == RRType.AAAA:
            if length != 16:
                raise FormErr("AAAA rdata must be 16 bytes", msg_id)
            return AAAARecord(str(ipaddress.IPv6Address(rdata)))
        if rtype == RRType.CNAME:
            return CNAMERecord(name_at(start)[0])
        if rtype == RRType.MX:
            if length < 3:
                raise FormErr("MX rdata too short", msg_id)
            (pref,) = struct.unpack_from(">H", data, start)
            return MXRecord(name_at(start + 2)[0], ttl, pref)
        if rtype == RRType.TLSA:
            if length < 3:
                raise FormErr("TLSA rdata too short", msg_id)
            return TLSARecord(rdata[0], rdata[1], rdata[2], rdata[3:].hex())
        # Re-encode embedded names uncompressed so the rdata stays valid
        # outside the message it came from.
        if rtype in (RRType.NS, RRType.PTR):
            return RawRecord(rtype, encode_name(name_at(start)[0]))
        if rtype == RRType.SOA:
            mname, off = name_at(start)
            rname, off = name_at(off)
            if end - off != 20:
                raise FormErr("SOA rdata has wrong fixed part", msg_id)
            return RawRecord(rtype, encode_name(mname) + encode_name(rname) + data[off:end])
        if rtype == RRType.SRV:
            if length < 7:
                raise FormErr("SRV rdata too short", msg_id)
            return RawRecord(rtype, data[start : start + 6] + encode_name(name_at(start + 6)[0]))
    except (ValidationFailure, RecordFileError, ValueError) as exc:
        if isinstance(exc, FormErr):
            raise
        raise FormErr(f"bad rdata for type {rtype}: {exc}", msg_id) from exc
    return RawRecord(rtype, rdata)


def _read_rr(data: bytes, offset: int, msg_id: int) -> tuple[Answer, int]:
    name, offset = read_name(data, offset, msg_id)
    if offset + 10 > len(data):
        raise Truncated("resource record header truncated", msg_id)
    rtype, rclass, ttl, rdlength = struct.unpack_from(">HHIH", data, offset)
    offset += 10
    if offset + rdlength > len(data):
        raise Truncated("rdata truncated", msg_id)
    rdata = _decode_rdata(data, offset, rdlength, rtype, ttl, msg_id)
    return Answer(name, rtype, ttl, rdata, rclass), offset + rdlength


# -- messages --------------------------------------------------------------


def encode_message(msg: Message) -> bytes:
    out = bytearray(
        HEADER.pack(
            msg.id,
            msg.flags,
            len(msg.questions),
            len(msg.answers),
            len(msg.authority),
            len(msg.additional),
        )
    )
    for q in msg.questions:
        out += encode_name(q.name) + struct.pack(">HH", q.qtype, q.qclass)
    for section in (msg.answers, msg.authority, msg.additional):
        for rr in section:
            out += encode_rr(rr)
    return bytes(out)


def _read_header(data: bytes) -> tuple[int, int, int, int, int, int]:
    if len(data) < HEADER.size:
        msg_id = struct.unpack_from(">H", data)[0] if len(data) >= 2 else None
        raise Truncated(f"datagram of {len(data)} bytes is shorter than a header", msg_id)
    return HEADER.unpack_from(data)


def _read_question(data: bytes, offset: int, msg_id: int) -> tuple[Question, int]:
    name, offset = read_name(data, offset, msg_id)
    if offset + 4 > len(data):
        raise Truncated("question truncated", msg_id)
    qtype, qclass = struct.unpack_from(">HH", data, offset)
    return Question(name, qtype, qclass), offset + 4


def decode_message(data: bytes) -> Message:
    msg_id, flags, qd, an, ns, ar = _read_header(data)
    offset = HEADER.size
    questions = []
    for _ in range(qd):
        q, offset = _read_question(data, offset, msg_id)
        questions.append(q)
    sections: list[list[Answer]] = [[], [], []]
    for section, count in zip(sections, (an, ns, ar)):
        for _ in range(count):
            rr, offset = _read_rr(data, offset, msg_id)
            section.append(rr)
    return Message(msg_id, flags, tuple(questions), *(tuple(s) for s in sections))


# -- queries and responses -------------------------------------------------


def encode_query(q: WireQuery) -> bytes:
    header = HEADER.pack(q.id, q.flags & ~QR & 0xFFFF, 1, 0, 0, 0)
    return header + encode_name(str(q.qname)) + struct.pack(">HH", q.qtype, q.qclass)


def decode_query(data: bytes) -> WireQuery:
    """Parse a query datagram carrying exactly one question.

    Additional-section records (an EDNS OPT from dig, say) are ignored.
    """
    msg_id, flags, qd, _an, _ns, _ar = _read_header(data)
    if len(data) > MAX_DATAGRAM:
        raise FormErr(f"datagram of {len(data)} bytes exceeds {MAX_DATAGRAM}", msg_id)
    if flags & QR:
        raise FormErr("message is a response, not a query", msg_id)
    opcode = (flags >> 11) & 0xF
    if opcode != 0:
        raise UnsupportedOpcode(f"opcode {opcode} not supported", msg_id)
    if qd != 1:
        raise FormErr(f"expected one question, got {qd}", msg_id)
    q, end = _read_question(data, HEADER.size, msg_id)
    if q.name:
        try:
            qname = parse_domain_name(q.name, strict=False)
        except ValidationFailure as exc:
            raise FormErr(f"bad query name: {exc}", msg_id) from exc
    else:
        qname = DomainName(())
    return WireQuery(msg_id, qname, q.qtype, q.qclass, flags, raw_question=data[HEADER.size : end])


def _question_bytes(q: WireQuery) -> bytes:
    if q.raw_question:
        return q.raw_question
    return encode_name(str(q.qname)) + struct.pack(">HH", q.qtype, q.qclass)


def response_flags(query_flags: int, rcode: int) -> int:
    return QR | (query_flags & RD) | RA | (int(rcode) & 0xF)


def encode_response(q: WireQuery, result: ResolutionResult, max_size: int = MAX_UDP_PAYLOAD) -> bytes:
    """Encode ``result`` as the reply to ``q``.

    Answers that do not fit in ``max_size`` are dropped and TC is set.
    """
    question = _question_bytes(q)
    body = bytearray(question)
    size = HEADER.size + len(question)
    count = 0
    flags = response_flags(q.flags, result.rcode)
    for rr in result.answers:
        encoded = encode_rr(rr)
        if size + len(encoded) > max_size:
            flags |= TC
            break
        body += encoded
        size += len(encoded)
        count += 1
    return HEADER.pack(q.id, flags, 1, count, 0, 0) + bytes(body)


def error_response(msg_id: int, rcode: int, query_flags: int = 0, raw_question: bytes = b"") -> bytes:
    qd = 1 if raw_question else 0
    return HEADER.pack(msg_id, response_flags(query_flags, rcode), qd, 0, 0, 0) + raw_question


def result_from_message(msg: Message) -> ResolutionResult:
    rcode = msg.rcode
    answers = () if rcode == Rcode.NXDOMAIN else msg.answers
    return ResolutionResult(rcode, answers)
