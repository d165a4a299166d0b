import random
import struct

import pytest
from hypothesis import given, strategies as st

from rfc2code.document_model import HeaderLayout
from rfc2code.ir import ChecksumRange, FieldPath
from rfc2code.packet_runtime import (
    Environment,
    HeaderInstance,
    IPV4_LAYOUT,
    Packet,
    RuntimeError_,
    format_ipv4,
    hexdump,
    ipv4_header,
    ones_complement_checksum,
    parse_ipv4,
    parse_packet,
    resolve_range,
    verify_checksum,
    write_pcap,
)

ECHO_LAYOUT = HeaderLayout(protocol="ICMP", message="Echo or Echo Reply Message",
                           fields=[("Type", 8), ("Code", 8), ("Checksum", 16),
                                   ("Identifier", 16), ("Sequence Number", 16)])


def icmp_header():
    return HeaderInstance(ECHO_LAYOUT, "icmp")


# -- one's complement checksum -------------------------------------------------


def reference_checksum(span: bytes) -> int:
    """Independent oracle: word-by-word end-around-carry addition."""
    if len(span) % 2:
        span = span + b"\x00"
    acc = 0
    for i in range(0, len(span), 2):
        word = (span[i] << 8) | span[i + 1]
        acc = acc + word
        while acc > 0xFFFF:
            acc = (acc & 0xFFFF) + 1
    return (~acc) & 0xFFFF


def test_checksum_empty_span():
    assert ones_complement_checksum(b"") == 0xFFFF


def test_checksum_hand_computed_example():
    # one word 0x0800 plus padding word 0x0000 -> sum 0x0800 -> complement
    assert ones_complement_checksum(bytes([0x08, 0x00, 0x00, 0x00])) == 0xF7FF


def test_checksum_matches_oracle_on_random_spans():
    rng = random.Random(1234)
    for _ in range(1000):
        span = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 80)))
        assert ones_complement_checksum(span) == reference_checksum(span)


def test_checksum_involution():
    rng = random.Random(99)
    for _ in range(200):
        body = bytearray(rng.randrange(256)
                         for _ in range(2 * rng.randrange(2, 30)))
        body[2:4] = b"\x00\x00"
        value = ones_complement_checksum(bytes(body))
        body[2:4] = struct.pack(">H", value)
        total = 0
        for i in range(0, len(body), 2):
            total += (body[i] << 8) | body[i + 1]
        while total >> 16:
            total = (total & 0xFFFF) + (total >> 16)
        assert total == 0xFFFF


# -- field access ----------------------------------------------------------------


def test_field_roundtrip_exhaustive_narrow():
    hdr = icmp_header()
    for name, width in ECHO_LAYOUT.fields:
        if width > 8:
            continue
        for value in range(1 << width):
            hdr.set(name, value)
            assert hdr.get(name) == value


@given(st.integers(min_value=0, max_value=0xFFFF),
       st.integers(min_value=0, max_value=0xFFFF))
def test_field_roundtrip_randomized_wide(ident, seq):
    hdr = icmp_header()
    hdr.set("type", 8)
    hdr.set("identifier", ident)
    hdr.set("sequence_number", seq)
    assert hdr.get("identifier") == ident
    assert hdr.get("sequence_number") == seq
    assert hdr.get("type") == 8          # adjacent fields unperturbed
    assert hdr.get("code") == 0


def test_set_masks_to_width():
    hdr = icmp_header()
    hdr.set("type", 0x1FF)
    assert hdr.get("type") == 0xFF


def test_sub_byte_fields():
    hdr = ipv4_header()
    assert hdr.get("version") == 4
    assert hdr.get("ihl") == 5
    hdr.set("flags", 0b010)
    hdr.set("fragment_offset", 1234)
    assert hdr.get("flags") == 0b010
    assert hdr.get("fragment_offset") == 1234


def test_variable_data_marker_field_excluded():
    layout = HeaderLayout(protocol="ICMP", message="Destination Unreachable",
                          fields=[("Type", 8), ("Code", 8), ("Checksum", 16),
                                  ("unused", 32),
                                  ("Internet Header + 64 bits of Original Data Datagram", 32)])
    hdr = HeaderInstance(layout, "icmp")
    assert len(hdr) == 8
    assert hdr.is_variable_field(
        "Internet Header + 64 bits of Original Data Datagram")


# -- packets -----------------------------------------------------------------------


def test_serialization_roundtrip():
    ip = ipv4_header()
    ip.set("source_address", parse_ipv4("10.0.1.1"))
    icmp = icmp_header()
    icmp.set("type", 8)
    pkt = Packet([ip, icmp], payload=b"abc")
    data = pkt.serialize()
    assert len(data) == 20 + 8 + 3
    again = parse_packet(data, {"ip": IPV4_LAYOUT, "icmp": ECHO_LAYOUT},
                         ["ip", "icmp"])
    assert again.serialize() == data
    assert again.require("icmp").get("type") == 8
    assert again.payload == b"abc"


def test_checksum_range_resolution_and_verification():
    ip = ipv4_header()
    icmp = icmp_header()
    icmp.set("type", 8)
    pkt = Packet([ip, icmp], payload=b"payload!")
    rng = ChecksumRange(start=FieldPath("icmp", "type"))
    start, end = resolve_range(pkt, rng)
    assert start == 20 and end == len(pkt)
    span = pkt.serialize()[start:end]
    icmp.set("checksum", ones_complement_checksum(span))
    assert verify_checksum(pkt, FieldPath("icmp", "checksum"), rng)
    # flipping one payload byte breaks it
    pkt.payload = b"payloadX"
    assert not verify_checksum(pkt, FieldPath("icmp", "checksum"), rng)


def test_header_only_checksum_fails_over_full_message():
    # checksumming only the header while verifying header+payload is the
    # classic range bug
    ip = ipv4_header()
    icmp = icmp_header()
    pkt = Packet([ip, icmp], payload=b"\x01\x02\x03\x04")
    header_rng = ChecksumRange(start=FieldPath("icmp", "type"),
                               end="end_of_header")
    full_rng = ChecksumRange(start=FieldPath("icmp", "type"))
    start, end = resolve_range(pkt, header_rng)
    span = pkt.serialize()[start:end]
    icmp.set("checksum", ones_complement_checksum(span))
    assert verify_checksum(pkt, FieldPath("icmp", "checksum"), header_rng)
    assert not verify_checksum(pkt, FieldPath("icmp", "checksum"), full_rng)


def test_fixed_byte_range():
    rng = ChecksumRange(start=FieldPath("igmp", "version"), end="bytes:8")
    assert rng.fixed_bytes() == 8


# -- pcap --------------------------------------------------------------------------


def test_pcap_empty_is_global_header_only(tmp_path):
    path = tmp_path / "empty.pcap"
    write_pcap([], path)
    data = path.read_bytes()
    assert len(data) == 24
    magic, major, minor = struct.unpack(">IHH", data[:8])
    assert magic == 0xA1B2C3D4
    assert (major, minor) == (2, 4)
    linktype = struct.unpack(">I", data[20:24])[0]
    assert linktype == 101


def test_pcap_single_icmp_packet_length(tmp_path):
    ip = ipv4_header()
    icmp = icmp_header()
    pkt = Packet([ip, icmp], payload=b"")
    assert len(pkt) == 28
    path = tmp_path / "one.pcap"
    write_pcap([pkt], path)
    data = path.read_bytes()
    assert len(data) == 24 + 16 + 48 - 20    # 24 global + 16 record + 28 bytes
    incl, orig = struct.unpack(">II", data[32:40])
    assert incl == orig == 28


def test_pcap_record_order(tmp_path):
    ip1, ip2 = ipv4_header(), ipv4_header()
    ip1.set("identification", 1)
    ip2.set("identification", 2)
    path = tmp_path / "two.pcap"
    write_pcap([Packet([ip1]), Packet([ip2])], path)
    data = path.read_bytes()
    first = data[24 + 16: 24 + 16 + 20]
    second = data[24 + 16 + 20 + 16:]
    assert struct.unpack(">H", first[4:6])[0] == 1
    assert struct.unpack(">H", second[4:6])[0] == 2


def test_pcap_unwritable_path_errors(tmp_path):
    with pytest.raises(RuntimeError_):
        write_pcap([], tmp_path / "no" / "such" / "dir" / "x.pcap")


# -- hexdump ------------------------------------------------------------------------


def test_hexdump_format():
    out = hexdump(b"ABCDEFGHIJKLMNOPqr")
    lines = out.splitlines()
    assert lines[0].startswith("00000000  41 42 43 44")
    assert lines[0].endswith("|ABCDEFGHIJKLMNOP|")
    assert lines[1].startswith("00000010  71 72")
    assert hexdump(b"") == ""


# -- addresses ------------------------------------------------------------------------


def test_ipv4_text_roundtrip():
    for text in ["0.0.0.0", "10.0.1.1", "255.255.255.255", "192.168.2.7"]:
        assert format_ipv4(parse_ipv4(text)) == text
    with pytest.raises(RuntimeError_):
        parse_ipv4("300.1.1.1")


def test_environment_defaults_and_overrides():
    env = Environment(values={"identifier": 7})
    assert env.get("identifier") == 7
    assert env.get("sequence_number") == 1
    assert env.address("interface_address") == parse_ipv4("10.0.1.1")
    with pytest.raises(RuntimeError_):
        env.get("nonexistent_service")
