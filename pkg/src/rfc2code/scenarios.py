"""Message-exchange scenarios exercising generated sender/receiver units:
echo-style roundtrips and router-side error replies (unknown subnet,
expired TTL, unsupported type of service, full buffers, same-subnet
gateways).  Each run writes a pcap capture and a hex dump."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .ir import ChecksumRange, FieldPath, PacketProgram
from .packet_runtime import (
    Environment,
    Executor,
    Packet,
    hexdump,
    ipv4_header,
    parse_ipv4,
    verify_checksum,
    write_pcap,
)


class ScenarioError(Exception):
    pass


def in_subnet(address: int, subnet: str) -> bool:
    base, _, prefix = subnet.partition("/")
    bits = int(prefix or "32")
    mask = ((1 << bits) - 1) << (32 - bits) if bits else 0
    return (address & mask) == (parse_ipv4(base) & mask)


@dataclass
class ScenarioResult:
    name: str
    ok: bool
    notes: list[str] = field(default_factory=list)
    packets: list[Packet] = field(default_factory=list)


def load_scenarios(path) -> list[dict]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return data["scenarios"]


def _trigger_packet(cfg: dict, env: Environment) -> Packet:
    ip = ipv4_header()
    trig = cfg.get("trigger", {})
    ip.set("source_address", parse_ipv4(trig.get("src", "192.168.2.7")))
    ip.set("destination_address", parse_ipv4(trig.get("dest", "10.0.1.1")))
    ip.set("time_to_live", trig.get("ttl", 64))
    ip.set("type_of_service", trig.get("tos", 0))
    ip.set("protocol", trig.get("protocol", 6))
    payload = bytes.fromhex(trig.get("payload_hex", "00112233445566778899aabb"))
    return Packet([ip], payload=payload)


def _condition_holds(cfg: dict, packet: Packet) -> bool:
    cond = cfg.get("condition", "")
    ip = packet.require("ip")
    if cond == "unknown_subnet":
        dest = ip.get("destination_address")
        return not any(in_subnet(dest, s) for s in cfg.get("router_subnets", []))
    if cond == "ttl_expired":
        return ip.get("time_to_live") <= 1
    if cond == "bad_tos":
        return ip.get("type_of_service") != cfg.get("supported_tos", 0)
    if cond == "buffer_full":
        return bool(cfg.get("buffer_full", False))
    if cond == "same_subnet_gateway":
        src = ip.get("source_address")
        gw = parse_ipv4(cfg["gateway"])
        for subnet in cfg.get("router_subnets", []):
            if in_subnet(src, subnet) and in_subnet(gw, subnet):
                return True
        return False
    raise ScenarioError(f"unknown condition {cond!r}")


def _check(result: ScenarioResult, ok: bool, label: str) -> None:
    result.notes.append(f"{'ok' if ok else 'FAIL'}: {label}")
    if not ok:
        result.ok = False


def _reply_checks(result: ScenarioResult, cfg: dict, trigger: Packet,
                  reply: Packet) -> None:
    icmp = reply.layer("icmp")
    _check(result, icmp is not None, "reply carries an ICMP header")
    if icmp is None:
        return
    _check(result, icmp.get("type") == cfg["expect_type"],
           f"type == {cfg['expect_type']}")
    if "expect_code" in cfg:
        _check(result, icmp.get("code") == cfg["expect_code"],
               f"code == {cfg['expect_code']}")
    rng = ChecksumRange(start=FieldPath("icmp", "type"))
    _check(result, verify_checksum(reply, FieldPath("icmp", "checksum"), rng),
           "ICMP checksum valid over the message range")
    trig_ip = trigger.require("ip")
    rep_ip = reply.require("ip")
    _check(result,
           rep_ip.get("destination_address") == trig_ip.get("source_address"),
           "reply addressed to the triggering source")
    if cfg.get("carries_original_data", False):
        expected = bytes(trig_ip.data) + trigger.payload[:8]
        _check(result, reply.payload == expected,
               "carries internet header plus first 64 bits of original data")
    if "expect_pointer" in cfg:
        _check(result, icmp.get("pointer") == cfg["expect_pointer"],
               f"pointer == {cfg['expect_pointer']}")
    if "gateway" in cfg and icmp.has_field("gateway_internet_address"):
        _check(result,
               icmp.get("gateway_internet_address") == parse_ipv4(cfg["gateway"]),
               f"gateway internet address == {cfg['gateway']}")


def run_scenario(cfg: dict, program: PacketProgram,
                 env: Optional[Environment] = None) -> ScenarioResult:
    env = env or Environment()
    result = ScenarioResult(name=cfg["name"], ok=True)
    executor = Executor(program, env)
    kind = cfg.get("kind", "error_reply")

    if kind == "roundtrip":
        payload = bytes.fromhex(cfg.get("payload_hex", ""))
        request = executor.execute(cfg["request_unit"], payload=payload)
        result.packets.append(request)
        req_icmp = request.require("icmp")
        _check(result, req_icmp.get("type") == cfg["expect_request_type"],
               f"request type == {cfg['expect_request_type']}")
        rng = ChecksumRange(start=FieldPath("icmp", "type"))
        _check(result,
               verify_checksum(request, FieldPath("icmp", "checksum"), rng),
               "request checksum valid")
        reply = executor.execute(cfg["reply_unit"], input_packet=request)
        result.packets.append(reply)
        rep_icmp = reply.require("icmp")
        _check(result, rep_icmp.get("type") == cfg["expect_reply_type"],
               f"reply type == {cfg['expect_reply_type']}")
        _check(result,
               verify_checksum(reply, FieldPath("icmp", "checksum"), rng),
               "reply checksum valid")
        req_ip, rep_ip = request.require("ip"), reply.require("ip")
        _check(result,
               rep_ip.get("source_address") == req_ip.get("destination_address")
               and rep_ip.get("destination_address") == req_ip.get("source_address"),
               "source and destination addresses reversed")
        for fname in cfg.get("preserved_fields", []):
            _check(result, rep_icmp.get(fname) == req_icmp.get(fname),
                   f"{fname} preserved")
        if cfg.get("preserve_payload", False):
            _check(result, reply.payload == request.payload, "data returned")
        for fname, source in cfg.get("expect_time_fields", {}).items():
            want = env.get("time_ms") if source == "now" else req_icmp.get(fname)
            _check(result, rep_icmp.get(fname) == want, f"{fname} set from {source}")
        return result

    trigger = _trigger_packet(cfg, env)
    result.packets.append(trigger)
    holds = _condition_holds(cfg, trigger)
    _check(result, holds, f"trigger condition {cfg.get('condition')}")
    if not holds:
        return result
    reply = executor.execute(cfg["unit"], input_packet=trigger)
    result.packets.append(reply)
    _reply_checks(result, cfg, trigger, reply)
    return result


def run_all(scenarios: list[dict], program: PacketProgram,
            out_dir: Optional[Path] = None,
            env: Optional[Environment] = None) -> list[ScenarioResult]:
    results = []
    for cfg in scenarios:
        result = run_scenario(cfg, program, env=env or Environment())
        results.append(result)
        if out_dir is not None:
            out_dir = Path(out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_pcap(result.packets, out_dir / f"{result.name}.pcap")
            dump = "\n".join(hexdump(p.serialize()) for p in result.packets)
            (out_dir / f"{result.name}.hex").write_text(dump, encoding="utf-8")
    return results
