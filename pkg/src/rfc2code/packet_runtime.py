"""The static framework: header materialization, bit-level field access,
one's-complement checksums, IR interpretation, and pcap emission.

All multi-octet fields are big-endian on the wire; get/set work on plain
ints so callers never touch byte order.
"""

from __future__ import annotations

import copy
import re
import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .document_model import HeaderLayout
from .ir import (
    AllOf,
    AnyOf,
    Call,
    ChecksumRange,
    Comment,
    Compare,
    ComputeChecksum,
    Const,
    CopyField,
    END_OF_HEADER,
    END_OF_MESSAGE,
    FieldPath,
    FieldRef,
    If,
    InputField,
    OriginalData,
    PacketProgram,
    ProviderRef,
    SetField,
    SwapFields,
)


class RuntimeError_(Exception):
    pass


def normalize_field(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


_DATA_MARKER = re.compile(r"data")


def fixed_fields(layout: HeaderLayout) -> list[tuple[str, int]]:
    """Layout fields that live in the materialized header; a trailing
    'data'-named row is a variable-payload marker, not a fixed field."""
    fields = list(layout.fields)
    while fields and _DATA_MARKER.search(fields[-1][0].lower()):
        fields.pop()
    return fields


# ---------------------------------------------------------------------------
# Headers and packets
# ---------------------------------------------------------------------------


class HeaderInstance:
    def __init__(self, layout: HeaderLayout, layer: str) -> None:
        self.layout = layout
        self.layer = layer
        self._fields = fixed_fields(layout)
        total_bits = sum(w for _, w in self._fields)
        if total_bits % 8:
            raise RuntimeError_(f"{layer}: header bits not octet aligned")
        self.data = bytearray(total_bits // 8)
        self._offsets: dict[str, tuple[int, int]] = {}
        off = 0
        for name, width in self._fields:
            self._offsets[normalize_field(name)] = (off, width)
            off += width
        self._variable = {normalize_field(n) for n, _ in layout.fields} \
            - set(self._offsets)

    def has_field(self, name: str) -> bool:
        return normalize_field(name) in self._offsets

    def is_variable_field(self, name: str) -> bool:
        return normalize_field(name) in self._variable

    def get(self, name: str) -> int:
        off, width = self._offsets[normalize_field(name)]
        value = 0
        for bit in range(off, off + width):
            byte, shift = divmod(bit, 8)
            value = (value << 1) | ((self.data[byte] >> (7 - shift)) & 1)
        return value

    def set(self, name: str, value: int) -> None:
        off, width = self._offsets[normalize_field(name)]
        value &= (1 << width) - 1
        for i, bit in enumerate(range(off, off + width)):
            byte, shift = divmod(bit, 8)
            bitval = (value >> (width - 1 - i)) & 1
            if bitval:
                self.data[byte] |= 1 << (7 - shift)
            else:
                self.data[byte] &= ~(1 << (7 - shift)) & 0xFF
        return None

    def field_byte_offset(self, name: str) -> int:
        off, _ = self._offsets[normalize_field(name)]
        if off % 8:
            raise RuntimeError_(f"field {name} not byte aligned")
        return off // 8

    def field_names(self) -> list[str]:
        return list(self._offsets)

    def __len__(self) -> int:
        return len(self.data)


IPV4_LAYOUT = HeaderLayout(protocol="IP", message="", fields=[
    ("Version", 4), ("IHL", 4), ("Type of Service", 8), ("Total Length", 16),
    ("Identification", 16), ("Flags", 3), ("Fragment Offset", 13),
    ("Time to Live", 8), ("Protocol", 8), ("Header Checksum", 16),
    ("Source Address", 32), ("Destination Address", 32),
])


def ipv4_header() -> HeaderInstance:
    hdr = HeaderInstance(IPV4_LAYOUT, "ip")
    hdr.set("version", 4)
    hdr.set("ihl", 5)
    hdr.set("time_to_live", 64)
    return hdr


class Packet:
    def __init__(self, headers: Iterable[HeaderInstance] = (),
                 payload: bytes = b"") -> None:
        self.headers = list(headers)
        self.payload = bytes(payload)

    def layer(self, name: str) -> Optional[HeaderInstance]:
        for hdr in self.headers:
            if hdr.layer == name:
                return hdr
        return None

    def require(self, name: str) -> HeaderInstance:
        hdr = self.layer(name)
        if hdr is None:
            raise RuntimeError_(f"packet has no {name} header")
        return hdr

    def serialize(self) -> bytes:
        return b"".join(bytes(h.data) for h in self.headers) + self.payload

    def clone(self) -> "Packet":
        return copy.deepcopy(self)

    def layer_offset(self, name: str) -> int:
        off = 0
        for hdr in self.headers:
            if hdr.layer == name:
                return off
            off += len(hdr)
        raise RuntimeError_(f"packet has no {name} header")

    def __len__(self) -> int:
        return len(self.serialize())


def parse_packet(data: bytes, layouts: dict[str, HeaderLayout],
                 order: list[str]) -> Packet:
    """Inverse of serialize for the given layer stack."""
    pkt = Packet()
    pos = 0
    for layer in order:
        hdr = HeaderInstance(layouts[layer], layer)
        size = len(hdr)
        hdr.data = bytearray(data[pos:pos + size])
        pkt.headers.append(hdr)
        pos += size
    pkt.payload = bytes(data[pos:])
    return pkt


# ---------------------------------------------------------------------------
# One's-complement checksum
# ---------------------------------------------------------------------------


def ones_complement_checksum(span: bytes) -> int:
    """16-bit one's complement of the one's complement sum; odd-length
    spans are padded with a zero octet for summation."""
    if len(span) % 2:
        span = span + b"\x00"
    total = 0
    for i in range(0, len(span), 2):
        total += (span[i] << 8) | span[i + 1]
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def resolve_range(packet: Packet, rng: ChecksumRange) -> tuple[int, int]:
    """Byte span [start, end) of a checksum range within the packet."""
    hdr = packet.require(rng.start.layer)
    start = packet.layer_offset(rng.start.layer) \
        + hdr.field_byte_offset(rng.start.name)
    fixed = rng.fixed_bytes()
    if fixed is not None:
        end = start + fixed
    elif rng.end == END_OF_HEADER:
        end = packet.layer_offset(rng.start.layer) + len(hdr)
    elif rng.end == END_OF_MESSAGE:
        end = len(packet)
    else:
        raise RuntimeError_(f"unknown range end {rng.end!r}")
    if end > len(packet):
        raise RuntimeError_("checksum range extends past packet end")
    return start, end


def verify_checksum(packet: Packet, field_path: FieldPath,
                    rng: ChecksumRange) -> bool:
    """True iff the one's-complement sum over the range (checksum field
    included) is 0xFFFF."""
    start, end = resolve_range(packet, rng)
    span = packet.serialize()[start:end]
    if len(span) % 2:
        span = span + b"\x00"
    total = 0
    for i in range(0, len(span), 2):
        total += (span[i] << 8) | span[i + 1]
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total == 0xFFFF


# ---------------------------------------------------------------------------
# Environment: OS services, clock, addresses, per-run parameters
# ---------------------------------------------------------------------------


def parse_ipv4(text: str) -> int:
    parts = [int(p) for p in text.split(".")]
    if len(parts) != 4 or any(p > 255 or p < 0 for p in parts):
        raise RuntimeError_(f"bad IPv4 address {text!r}")
    return (parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3]


def format_ipv4(value: int) -> str:
    return ".".join(str((value >> s) & 0xFF) for s in (24, 16, 8, 0))


@dataclass
class Environment:
    """Deterministic provider for everything the OS would normally supply:
    interface addresses, the wall clock, and per-invocation parameters."""
    values: dict = field(default_factory=dict)
    state: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)
    calls: list = field(default_factory=list)

    DEFAULTS = {
        "interface_address": "10.0.1.1",
        "destination_address": "192.168.2.7",
        "identifier": 0x1234,
        "sequence_number": 1,
        "payload": b"",
        "time_ms": 43200000,        # milliseconds since midnight UT
        "error_pointer": 1,
        "gateway_address": "10.0.1.254",
        "protocol_number": 1,
    }

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        if key in self.DEFAULTS:
            return self.DEFAULTS[key]
        raise RuntimeError_(f"environment provides no {key!r}")

    def address(self, key: str) -> int:
        value = self.get(key)
        return parse_ipv4(value) if isinstance(value, str) else int(value)


# ---------------------------------------------------------------------------
# Interpretation
# ---------------------------------------------------------------------------

PROTOCOL_NUMBERS = {"icmp": 1, "igmp": 2, "udp": 17}


class Executor:
    def __init__(self, program: PacketProgram, env: Optional[Environment] = None):
        self.program = program
        self.env = env or Environment()
        self.layouts = {normalize_field(l.message or l.protocol): l
                        for l in program.layouts}

    def _layout_for(self, protocol: str, message: str) -> HeaderLayout:
        for layout in self.program.layouts:
            if (layout.protocol.lower() == protocol.lower()
                    and normalize_field(layout.message)
                    == normalize_field(message)):
                return layout
        for layout in self.program.layouts:
            if layout.protocol.lower() == protocol.lower():
                return layout
        raise RuntimeError_(f"no layout for {protocol}/{message}")

    def execute(self, unit_name: str, input_packet: Optional[Packet] = None,
                payload: Optional[bytes] = None) -> Packet:
        """Interpret advice then body; returns the constructed packet."""
        if unit_name not in self.program.units:
            raise RuntimeError_(f"no unit named {unit_name}")
        unit = self.program.units[unit_name]
        if unit.role == "receiver" and input_packet is None:
            raise RuntimeError_(f"receiver unit {unit_name} needs an input packet")
        out = self._initial_packet(unit, input_packet, payload)
        for ins in unit.advice_before:
            self._run(ins, out, input_packet, note="advice")
        for ins in unit.body:
            self._run(ins, out, input_packet, note="body")
        self._finalize(out)
        return out

    # -- packet templates ---------------------------------------------------

    def _initial_packet(self, unit, input_packet, payload) -> Packet:
        proto_layer = unit.protocol.lower()
        if (unit.role == "receiver" and input_packet is not None
                and input_packet.layer(proto_layer) is not None):
            out = input_packet.clone()
            ip = out.layer("ip")
            if ip is not None:
                ip.set("time_to_live", 64)
            return out
        layout = self._layout_for(unit.protocol, unit.message)
        ip = ipv4_header()
        ip.set("protocol", PROTOCOL_NUMBERS.get(proto_layer, 1))
        if input_packet is not None and input_packet.layer("ip") is not None:
            in_ip = input_packet.layer("ip")
            ip.set("source_address", in_ip.get("destination_address"))
            ip.set("destination_address", in_ip.get("source_address"))
        else:
            ip.set("source_address", self.env.address("interface_address"))
            ip.set("destination_address", self.env.address("destination_address"))
        msg = HeaderInstance(layout, proto_layer)
        body = payload if payload is not None else self.env.get("payload")
        return Packet([ip, msg], payload=body)

    # -- instruction dispatch -------------------------------------------------

    def _run(self, ins, out: Packet, input_packet: Optional[Packet],
             note: str) -> None:
        self.env.trace.append((note, ins))
        if isinstance(ins, Comment):
            return
        if isinstance(ins, SetField):
            self._set(out, input_packet, ins.path, ins.value)
        elif isinstance(ins, CopyField):
            self._set(out, input_packet, ins.dst, ins.src)
        elif isinstance(ins, SwapFields):
            a = self._read_field(out, ins.a)
            b = self._read_field(out, ins.b)
            self._write_field(out, ins.a, b)
            self._write_field(out, ins.b, a)
        elif isinstance(ins, ComputeChecksum):
            start, end = resolve_range(out, ins.range)
            span = out.serialize()[start:end]
            value = ones_complement_checksum(span)
            self._write_field(out, ins.dst, value)
        elif isinstance(ins, If):
            if self._cond(ins.cond, out, input_packet):
                for sub in ins.then:
                    self._run(sub, out, input_packet, note)
        elif isinstance(ins, Call):
            self.env.calls.append((ins.function, ins.args))
        else:
            raise RuntimeError_(f"cannot interpret {ins!r}")

    def _cond(self, cond, out, input_packet) -> bool:
        if isinstance(cond, Compare):
            lhs = self._value(out, input_packet, cond.lhs)
            rhs = self._value(out, input_packet, cond.rhs)
            if isinstance(lhs, (bytes, bytearray)):
                lhs = len(lhs)
            if isinstance(rhs, (bytes, bytearray)):
                rhs = len(rhs)
            ops = {"==": lhs == rhs, "!=": lhs != rhs, ">=": lhs >= rhs,
                   "<=": lhs <= rhs, ">": lhs > rhs, "<": lhs < rhs}
            if cond.op not in ops:
                raise RuntimeError_(f"bad comparison op {cond.op!r}")
            return ops[cond.op]
        if isinstance(cond, AnyOf):
            return any(self._cond(c, out, input_packet) for c in cond.operands)
        if isinstance(cond, AllOf):
            return all(self._cond(c, out, input_packet) for c in cond.operands)
        raise RuntimeError_(f"cannot evaluate condition {cond!r}")

    # -- field/value resolution ------------------------------------------------

    def _read_field(self, pkt: Packet, path: FieldPath):
        if path.layer == "state":
            return self.env.state.get(path.name, 0)
        if path.name == "payload":
            return pkt.payload
        hdr = pkt.require(path.layer)
        if hdr.is_variable_field(path.name):
            return pkt.payload
        return hdr.get(path.name)

    def _write_field(self, pkt: Packet, path: FieldPath, value) -> None:
        if path.layer == "state":
            self.env.state[path.name] = value
            return
        if path.name == "payload":
            pkt.payload = bytes(value)
            return
        hdr = pkt.require(path.layer)
        if hdr.is_variable_field(path.name):
            pkt.payload = bytes(value)
            return
        hdr.set(path.name, int(value))

    def _value(self, out: Packet, input_packet: Optional[Packet], expr):
        if isinstance(expr, Const):
            return expr.value
        if isinstance(expr, FieldRef):
            return self._read_field(out, expr.path)
        if isinstance(expr, InputField):
            if input_packet is None:
                raise RuntimeError_("input packet required for this unit")
            return self._read_field(input_packet, expr.path)
        if isinstance(expr, ProviderRef):
            value = self.env.get(expr.key)
            if isinstance(value, str) and "." in value:
                return parse_ipv4(value)
            return value
        if isinstance(expr, OriginalData):
            if input_packet is None:
                raise RuntimeError_("input packet required for original data")
            ip = input_packet.require("ip")
            data = bytes(ip.data) if expr.include_header else b""
            rest = b"".join(bytes(h.data) for h in input_packet.headers[1:]) \
                + input_packet.payload
            return data + rest[: expr.payload_bits // 8]
        raise RuntimeError_(f"cannot evaluate {expr!r}")

    def _set(self, out, input_packet, path, value_expr) -> None:
        value = self._value(out, input_packet, value_expr)
        self._write_field(out, path, value)

    # -- epilogue ---------------------------------------------------------------

    def _finalize(self, pkt: Packet) -> None:
        ip = pkt.layer("ip")
        if ip is None:
            return
        ip.set("total_length", len(pkt))
        ip.set("header_checksum", 0)
        ip.set("header_checksum", ones_complement_checksum(bytes(ip.data)))


def execute(program: PacketProgram, unit_name: str,
            input_packet: Optional[Packet] = None,
            env: Optional[Environment] = None,
            payload: Optional[bytes] = None) -> Packet:
    return Executor(program, env).execute(unit_name, input_packet, payload)


# ---------------------------------------------------------------------------
# pcap emission and hex dumps
# ---------------------------------------------------------------------------

PCAP_MAGIC = 0xA1B2C3D4
PCAP_LINKTYPE_RAW_IP = 101


def write_pcap(packets: Iterable[Packet], path,
               env: Optional[Environment] = None) -> None:
    """Classic pcap, big-endian, version 2.4, linktype raw IP (101)."""
    env = env or Environment()
    base = int(env.get("time_ms")) // 1000
    try:
        fh = open(path, "wb")
    except OSError as exc:
        raise RuntimeError_(f"cannot write pcap {path}: {exc}") from exc
    with fh:
        fh.write(struct.pack(">IHHiIII", PCAP_MAGIC, 2, 4, 0, 0, 65535,
                             PCAP_LINKTYPE_RAW_IP))
        for i, pkt in enumerate(packets):
            data = pkt.serialize() if isinstance(pkt, Packet) else bytes(pkt)
            fh.write(struct.pack(">IIII", base, i, len(data), len(data)))
            fh.write(data)


def hexdump(data: bytes) -> str:
    """Offset + hex + ASCII, 16 bytes per row."""
    rows = []
    for off in range(0, len(data), 16):
        chunk = data[off:off + 16]
        hexes = " ".join(f"{b:02x}" for b in chunk)
        text = "".join(chr(b) if 32 <= b < 127 else "." for b in chunk)
        rows.append(f"{off:08x}  {hexes:<47}  |{text}|")
    return "\n".join(rows) + ("\n" if rows else "")
