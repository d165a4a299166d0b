"""Convert winnowed logical forms into the packet-program IR.

Each predicate dispatches to a handler; field terms resolve against the
sentence's dynamic context first, then the pre-defined static context.
Unresolvable actionable terms and unhandled predicates raise
CodegenFailure, which feeds the iterative non-actionable discovery loop.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .document_model import DynamicContext, HeaderLayout, message_key
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
    FunctionUnit,
)
from .packet_runtime import normalize_field
from .semantics import Num, Pred, Str, Term, format_lf


class CodegenFailure(Exception):
    def __init__(self, kind: str, detail: str) -> None:
        super().__init__(f"{kind}: {detail}")
        self.kind = kind            # HandlerMissing | UnresolvedTerm | AdviceTargetMissing
        self.detail = detail


# ---------------------------------------------------------------------------
# Static context
# ---------------------------------------------------------------------------


@dataclass
class StaticContext:
    """Pre-defined bindings: lower-layer fields, helper functions, OS
    services, swap pairs, checksum ranges, state variables."""
    fields: dict[str, FieldPath] = field(default_factory=dict)
    functions: dict[str, str] = field(default_factory=dict)
    providers: dict[str, str] = field(default_factory=dict)
    inputs: dict[str, FieldPath] = field(default_factory=dict)
    swaps: dict[str, tuple[FieldPath, FieldPath]] = field(default_factory=dict)
    states: dict[str, str] = field(default_factory=dict)
    modes: dict[str, str] = field(default_factory=dict)
    ranges: dict[str, ChecksumRange] = field(default_factory=dict)
    range_terms: dict[str, str] = field(default_factory=dict)
    default_range: str = ""
    origdata: dict[str, str] = field(default_factory=dict)
    consts: dict[str, int] = field(default_factory=dict)

    def merge(self, other: "StaticContext") -> "StaticContext":
        merged = StaticContext()
        for attr in ("fields", "functions", "providers", "inputs", "swaps",
                     "states", "modes", "ranges", "range_terms", "origdata",
                     "consts"):
            d = dict(getattr(self, attr))
            d.update(getattr(other, attr))
            setattr(merged, attr, d)
        merged.default_range = other.default_range or self.default_range
        return merged


def _parse_path(text: str) -> FieldPath:
    layer, _, name = text.strip().partition(".")
    return FieldPath(layer, normalize_field(name) if layer != "state" else name)


def load_static_context(path) -> StaticContext:
    """Line format: `term -> kind:target`; `range NAME start=.. end=..`;
    `range_default NAME`."""
    ctx = StaticContext()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("range_default "):
                ctx.default_range = line.split(None, 1)[1].strip()
                continue
            if line.startswith("range "):
                parts = line.split()
                name = parts[1]
                kv = dict(p.split("=", 1) for p in parts[2:])
                ctx.ranges[name] = ChecksumRange(
                    start=_parse_path(kv["start"]), end=kv.get("end", END_OF_MESSAGE))
                continue
            if "->" not in line:
                raise CodegenFailure("BadContextFile", f"{path}:{lineno}: {line!r}")
            term_part, target = (s.strip() for s in line.split("->", 1))
            term = normalize_field(term_part)
            kind, _, arg = target.partition(":")
            if kind == "field":
                ctx.fields[term] = _parse_path(arg)
            elif kind == "fn":
                ctx.functions[term] = arg.strip()
            elif kind == "provider":
                ctx.providers[term] = arg.strip()
            elif kind == "input":
                ctx.inputs[term] = _parse_path(arg)
            elif kind == "swap":
                a, b = arg.split(",")
                ctx.swaps[term] = (_parse_path(a), _parse_path(b))
            elif kind == "state":
                ctx.states[term] = arg.strip()
            elif kind == "mode":
                ctx.modes[term] = arg.strip()
            elif kind == "range_ref":
                ctx.range_terms[term] = arg.strip()
            elif kind == "origdata":
                ctx.origdata[term] = arg.strip()
            elif kind == "const":
                ctx.consts[term] = int(arg)
            else:
                raise CodegenFailure(
                    "BadContextFile", f"{path}:{lineno}: unknown kind {kind!r}")
    return ctx


# ---------------------------------------------------------------------------
# Term resolution (dynamic first, then static)
# ---------------------------------------------------------------------------


class Resolver:
    def __init__(self, dyn: DynamicContext, static: StaticContext,
                 layouts: list[HeaderLayout]) -> None:
        self.dyn = dyn
        self.static = static
        self.layouts = layouts
        self.proto_layer = (dyn.protocol or "icmp").lower()

    def _message_layout(self) -> Optional[HeaderLayout]:
        target = normalize_field(self.dyn.message)
        for lay in self.layouts:
            if normalize_field(lay.message) == target and target:
                return lay
        for lay in self.layouts:
            if lay.protocol.lower() == (self.dyn.protocol or "").lower():
                return lay
        return None

    def field_path(self, term: str) -> Optional[FieldPath]:
        """Dynamic context first (this message's header), then static."""
        term = normalize_field(term)
        candidates = [term]
        if term.endswith("_field"):
            candidates.append(term[: -len("_field")])
        layout = self._message_layout()
        for cand in candidates:
            if layout is not None:
                for name, _ in layout.fields:
                    if normalize_field(name) == cand:
                        return FieldPath(self.proto_layer, cand)
            if cand == "data" or cand == "payload":
                return FieldPath(self.proto_layer, "payload")
        for cand in candidates:
            if cand in self.static.fields:
                return self.static.fields[cand]
            if cand in self.static.states:
                return FieldPath("state", self.static.states[cand])
            if cand in self.static.modes:
                return FieldPath("state", self.static.modes[cand])
        return None

    def value(self, term: Term) -> Optional[object]:
        """ValueExpr for an LF leaf (numbers, fields, provider services)."""
        if isinstance(term, Num):
            return Const(term.value)
        if not isinstance(term, Str):
            return None
        text = term.value
        if re.fullmatch(r"-?\d+", text):
            return Const(int(text))
        norm = normalize_field(text)
        if norm in self.static.consts:
            return Const(self.static.consts[norm])
        path = self.field_path(norm)
        if path is not None:
            return FieldRef(path)
        if norm in self.static.providers:
            return ProviderRef(self.static.providers[norm])
        if norm in self.static.inputs:
            return InputField(self.static.inputs[norm])
        return None

    def function(self, term: str) -> Optional[str]:
        return self.static.functions.get(normalize_field(term))

    def range_for(self, term: str) -> Optional[ChecksumRange]:
        norm = normalize_field(term)
        name = self.static.range_terms.get(norm, norm)
        if name in self.static.ranges:
            return self.static.ranges[name]
        if self.static.default_range:
            return self.static.ranges.get(self.static.default_range)
        return None

    def default_checksum(self) -> Optional[tuple[FieldPath, ChecksumRange]]:
        path = self.field_path("checksum")
        rng = None
        if self.static.default_range:
            rng = self.static.ranges.get(self.static.default_range)
        if path is None or rng is None:
            return None
        return path, rng


# ---------------------------------------------------------------------------
# @AdvComment filtering
# ---------------------------------------------------------------------------


def tag_non_actionable(lf: Term) -> Term:
    return Pred("@AdvComment", (lf,))


def filter_non_actionable(lfs) -> tuple[list[Term], list[Term]]:
    """Drop @AdvComment-tagged LFs; returns (kept, removed)."""
    kept, removed = [], []
    for lf in lfs:
        if isinstance(lf, Pred) and lf.name == "@AdvComment":
            removed.append(lf)
        else:
            kept.append(lf)
    return kept, removed


# ---------------------------------------------------------------------------
# LF -> instructions
# ---------------------------------------------------------------------------


@dataclass
class AdviceRecord:
    target: str                     # "checksum" — units computing one
    instructions: list


@dataclass
class Converted:
    instructions: list = field(default_factory=list)
    advice: list = field(default_factory=list)     # AdviceRecord list
    role: str = ""                  # forced by the LF itself (@Form ...)


RECEIVER_PHRASES = ("to form", "echoer", "receiver", "on receipt",
                    "must be returned", "is returned")
SENDER_PHRASES = ("sender",)


def infer_role(sentence_text: str) -> str:
    low = sentence_text.lower()
    if any(p in low for p in SENDER_PHRASES):
        return "sender"
    if any(p in low for p in RECEIVER_PHRASES):
        return "receiver"
    return ""


def _leaf(term: Term) -> str:
    if isinstance(term, Str):
        return term.value
    if isinstance(term, Num):
        return str(term.value)
    raise CodegenFailure("UnresolvedTerm", format_lf(term))


def _flatten(term: Term, name: str) -> list[Term]:
    if isinstance(term, Pred) and term.name == name and len(term.args) == 2:
        return _flatten(term.args[0], name) + _flatten(term.args[1], name)
    return [term]


def _statement_order(args: list[Term]) -> list[Term]:
    # conjunction semantics store the right conjunct first; document order
    # is the reverse
    return list(reversed(args))


class Converter:
    """Post-order traversal of one winnowed LF, dispatching per predicate."""

    def __init__(self, resolver: Resolver) -> None:
        self.r = resolver

    def convert(self, lf: Term) -> Converted:
        out = Converted()
        self._statement(lf, out, range_override={})
        return out

    # -- statements -----------------------------------------------------------

    def _statement(self, lf: Term, out: Converted, range_override: dict) -> None:
        if not isinstance(lf, Pred):
            raise CodegenFailure("UnresolvedTerm", format_lf(lf))
        name = lf.name
        if name == "@AdvComment":
            return
        if name == "@And":
            for part in _statement_order(_flatten(lf, "@And")):
                self._statement(part, out, range_override)
            return
        if name == "@StartsWith":
            stmt, anchor = lf.args
            path = self.r.field_path(_leaf(anchor))
            if path is None:
                raise CodegenFailure("UnresolvedTerm", _leaf(anchor))
            override = dict(range_override)
            override["start"] = path
            self._statement(stmt, out, override)
            return
        if name == "@EndsAt":
            stmt, anchor = lf.args
            override = dict(range_override)
            override["end"] = self._range_end(anchor)
            self._statement(stmt, out, override)
            return
        if name in ("@Form", "@InMessage"):
            if name == "@Form":
                msg, body = lf.args
            else:
                body, msg = lf.args
            term = _leaf(msg)
            if "reply" in term or "report" in term:
                out.role = "receiver"
            else:
                out.role = "sender"
            self._statement(body, out, range_override)
            return
        if name == "@Use" and len(lf.args) == 2 \
                and isinstance(lf.args[1], Pred) and lf.args[1].name == "@Action":
            action = lf.args[1]
            fn = self.r.function(_leaf(action.args[0]))
            if fn is None:
                raise CodegenFailure("UnresolvedTerm", _leaf(action.args[0]))
            if fn.startswith("call:"):
                out.instructions.append(Call(fn.split(":", 1)[1]))
                return
            raise CodegenFailure("HandlerMissing", fn)
        if name == "@AdvBefore":
            target, body = lf.args
            self._advice(target, body, out)
            return
        if name == "@If":
            cond, body = lf.args
            sub = Converted()
            self._statement(body, sub, range_override)
            out.advice.extend(sub.advice)
            out.instructions.append(If(self._condition(cond), tuple(sub.instructions)))
            return
        if name == "@When":
            body, cond = lf.args
            sub = Converted()
            self._statement(body, sub, range_override)
            out.instructions.append(If(self._condition(cond), tuple(sub.instructions)))
            return
        if name == "@InMode":
            body, modes = lf.args
            sub = Converted()
            self._statement(body, sub, range_override)
            conds = tuple(self._mode_cond(m) for m in _flatten(modes, "@And"))
            out.instructions.append(If(AnyOf(conds), tuple(sub.instructions)))
            return
        if name == "@May":
            self._statement(lf.args[0], out, range_override)
            return
        if name == "@Is":
            self._assignment(lf.args[0], lf.args[1], out, range_override)
            return
        if name == "@Action":
            self._action(lf.args[0], lf.args[1] if len(lf.args) > 1 else None,
                         out, range_override)
            return
        if name == "@Invoke":
            fn = self.r.function(_leaf(lf.args[0]))
            if fn is None:
                raise CodegenFailure("UnresolvedTerm", _leaf(lf.args[0]))
            out.instructions.append(Call(fn))
            return
        if name == "@Assign":
            self._assignment(lf.args[0], lf.args[1], out, range_override)
            return
        if name == "@Cease":
            target = lf.args[0]
            term = _leaf(target) if not isinstance(target, Pred) \
                else normalize_field(format_lf(target))
            fn = self.r.function(term) if not isinstance(target, Pred) else None
            if fn is None and isinstance(target, Pred) and target.name == "@Of":
                chain = [_leaf(t) for t in _flatten(target, "@Of")]
                fn = self.r.function(" ".join(chain))
            if fn is None:
                fn = "cease_" + normalize_field(
                    term if not isinstance(target, Pred) else "action")
            out.instructions.append(Call(fn))
            return
        if name == "@Identify":
            fld, _what = lf.args
            path = self.r.field_path(_leaf(fld))
            if path is None:
                raise CodegenFailure("UnresolvedTerm", _leaf(fld))
            out.instructions.append(SetField(path, ProviderRef("error_pointer")))
            return
        raise CodegenFailure("HandlerMissing", name)

    # -- assignment -------------------------------------------------------------

    def _assignment(self, lhs: Term, rhs: Term, out: Converted,
                    range_override: dict) -> None:
        if isinstance(lhs, Pred) and lhs.name == "@And":
            for part in _statement_order(_flatten(lhs, "@And")):
                self._assignment(part, rhs, out, range_override)
            return
        if isinstance(lhs, Pred) and lhs.name == "@For":
            # purpose modifiers on the subject don't change the target
            self._assignment(lhs.args[0], rhs, out, range_override)
            return
        if isinstance(lhs, Pred):
            raise CodegenFailure("HandlerMissing",
                                 f"assignment to {lhs.name} expression")
        path = self.r.field_path(_leaf(lhs))
        if path is None:
            raise CodegenFailure("UnresolvedTerm", _leaf(lhs))
        # checksum-definition right-hand sides compile to ComputeChecksum
        if isinstance(rhs, Pred) and rhs.name == "@Of":
            chain = _flatten(rhs, "@Of")
            fns = [self.r.function(_leaf(t)) for t in chain[:-1]
                   if not isinstance(t, Pred)]
            if fns and all(f is not None for f in fns) \
                    and set(fns) <= {"ones_complement", "ones_complement_sum"}:
                operand = chain[-1]
                rng = self.r.range_for(_leaf(operand))
                if rng is None:
                    raise CodegenFailure("UnresolvedTerm", _leaf(operand))
                rng = ChecksumRange(
                    start=range_override.get("start", rng.start),
                    end=range_override.get("end", rng.end))
                out.instructions.append(ComputeChecksum(path, rng))
                return
            # "the value of X" / "the address of X" resolve through X
            if len(chain) == 2 and not isinstance(chain[0], Pred) \
                    and _leaf(chain[0]) in ("value", "address", "current_time"):
                value = self.r.value(chain[1])
                if value is not None:
                    if isinstance(value, (FieldRef, InputField)):
                        out.instructions.append(CopyField(path, value))
                    else:
                        out.instructions.append(SetField(path, value))
                    return
            raise CodegenFailure("UnresolvedTerm", format_lf(rhs))
        if isinstance(rhs, Pred) and rhs.name == "@From":
            value = self._from_value(rhs)
            out.instructions.append(CopyField(path, value))
            return
        if isinstance(rhs, Pred) and rhs.name == "@Plus":
            value = self._plus_value(rhs)
            out.instructions.append(SetField(path, value))
            return
        if isinstance(rhs, Pred) and rhs.name == "@At":
            value = self.r.value(rhs.args[0])
            if value is None:
                raise CodegenFailure("UnresolvedTerm", format_lf(rhs.args[0]))
            out.instructions.append(SetField(path, value))
            return
        if isinstance(rhs, Pred):
            raise CodegenFailure("HandlerMissing", f"{rhs.name} as a value")
        value = self.r.value(rhs)
        if value is None:
            raise CodegenFailure("UnresolvedTerm", _leaf(rhs))
        if isinstance(value, (FieldRef, InputField)):
            out.instructions.append(CopyField(path, value))
        else:
            out.instructions.append(SetField(path, value))

    def _from_value(self, node: Pred):
        what, source = node.args
        src = normalize_field(_leaf(source)) if not isinstance(source, Pred) else ""
        if "datagram" not in src:
            raise CodegenFailure("UnresolvedTerm", format_lf(source))
        terms = [_leaf(t) for t in _flatten(what, "@And")]
        paths = set()
        for t in terms:
            norm = normalize_field(t)
            if norm in self.r.static.inputs:
                paths.add(self.r.static.inputs[norm])
            else:
                raise CodegenFailure("UnresolvedTerm", t)
        if len(paths) != 1:
            raise CodegenFailure("UnresolvedTerm", format_lf(node))
        return InputField(paths.pop())

    def _plus_value(self, node: Pred):
        parts = _flatten(node, "@Plus")
        kinds = set()
        bits = 64
        for part in parts:
            if isinstance(part, Pred) and part.name == "@Of":
                chain = _flatten(part, "@Of")
                head = normalize_field(_leaf(chain[0]))
                kind = self.r.static.origdata.get(head, "")
            else:
                kind = self.r.static.origdata.get(normalize_field(_leaf(part)), "")
            if not kind:
                raise CodegenFailure("UnresolvedTerm", format_lf(part))
            if kind.startswith("bits:"):
                bits = int(kind.split(":", 1)[1])
                kinds.add("bits")
            else:
                kinds.add(kind)
        if kinds == {"header", "bits"}:
            return OriginalData(include_header=True, payload_bits=bits)
        raise CodegenFailure("UnresolvedTerm", format_lf(node))

    # -- actions ---------------------------------------------------------------

    def _action(self, verb: Term, operand: Optional[Term], out: Converted,
                range_override: dict) -> None:
        fn = self.r.function(_leaf(verb))
        if fn is None:
            raise CodegenFailure("UnresolvedTerm", _leaf(verb))
        if fn.startswith("call:"):
            out.instructions.append(Call(fn.split(":", 1)[1]))
            return
        if fn == "reverse":
            term = normalize_field(_leaf(operand))
            swap = self.r.static.swaps.get(term)
            if swap is None:
                raise CodegenFailure("UnresolvedTerm", term)
            out.instructions.append(SwapFields(*swap))
            return
        if fn in ("compute_checksum", "recompute_checksum"):
            operand_term = _leaf(operand) if operand is not None else "checksum"
            path = self.r.field_path(operand_term)
            rng = self.r.range_for(operand_term)
            if path is None or rng is None:
                raise CodegenFailure("UnresolvedTerm", operand_term)
            rng = ChecksumRange(start=range_override.get("start", rng.start),
                                end=range_override.get("end", rng.end))
            out.instructions.append(ComputeChecksum(path, rng))
            return
        if fn == "set_field":
            term = _leaf(operand)
            path = self.r.field_path(term)
            if path is None:
                raise CodegenFailure("UnresolvedTerm", term)
            key = normalize_field(term)
            out.instructions.append(SetField(path, ProviderRef(key)))
            return
        if fn == "return_data":
            src: Term = operand
            if isinstance(src, Pred) and src.name == "@Received":
                src = src.args[0]
            term = _leaf(src)
            path = self.r.field_path(term)
            if path is None:
                raise CodegenFailure("UnresolvedTerm", term)
            out.instructions.append(CopyField(path, InputField(path)))
            return
        raise CodegenFailure("HandlerMissing", fn)

    def _range_end(self, anchor: Term) -> str:
        """'the end of the ICMP message' and kin resolve to a range end."""
        if isinstance(anchor, Pred) and anchor.name == "@Of":
            chain = _flatten(anchor, "@Of")
            head = normalize_field(_leaf(chain[0]))
            tail = normalize_field(_leaf(chain[-1]))
            if head == "end":
                if "header" in tail:
                    return "end_of_header"
                return "end_of_message"
        term = normalize_field(_leaf(anchor))
        if "header" in term:
            return "end_of_header"
        if "message" in term:
            return "end_of_message"
        raise CodegenFailure("UnresolvedTerm", format_lf(anchor))

    # -- advice ------------------------------------------------------------------

    def _advice(self, target: Term, body: Term, out: Converted) -> None:
        if not isinstance(target, Pred) or target.name != "@Action":
            raise CodegenFailure("UnresolvedTerm",
                                 f"advice target {format_lf(target)}")
        operand = _leaf(target.args[1]) if len(target.args) > 1 else ""
        if "checksum" not in normalize_field(operand):
            raise CodegenFailure("HandlerMissing",
                                 f"advice on {operand!r}")
        sub = Converted()
        self._statement(body, sub, {})
        out.advice.append(AdviceRecord(target="checksum",
                                       instructions=sub.instructions))

    # -- conditions ----------------------------------------------------------------

    def _condition(self, cond: Term):
        if isinstance(cond, Pred) and cond.name == "@And":
            return AllOf(tuple(self._condition(c)
                               for c in _statement_order(_flatten(cond, "@And"))))
        if isinstance(cond, Pred) and cond.name == "@Is":
            lhs, rhs = cond.args
            lv = self._cond_value(lhs)
            rv = self._cond_value(rhs)
            return Compare(lv, "==", rv)
        if isinstance(cond, Pred) and cond.name == "@IsNot":
            lhs, rhs = cond.args
            return Compare(self._cond_value(lhs), "!=", self._cond_value(rhs))
        if isinstance(cond, Pred) and cond.name == "@Reach":
            lhs, rhs = cond.args
            return Compare(self._cond_value(lhs), ">=", self._cond_value(rhs))
        if isinstance(cond, Pred) and cond.name == "@Compare":
            lhs, rhs = cond.args
            return Compare(self._cond_value(lhs), ">", self._cond_value(rhs))
        if isinstance(cond, Pred) and cond.name in ("@Found", "@Expire",
                                                    "@Changed"):
            inner = cond.args[0]
            if isinstance(inner, Pred) and inner.name == "@No":
                return Compare(self._cond_value(inner.args[0]), "==", Const(0))
            return Compare(self._cond_value(inner), "!=", Const(0))
        if isinstance(cond, Pred) and cond.name == "@May":
            raise CodegenFailure("HandlerMissing", "@May as a condition")
        raise CodegenFailure("HandlerMissing",
                             cond.name if isinstance(cond, Pred) else format_lf(cond))

    def _cond_value(self, term: Term):
        if isinstance(term, Pred) and term.name == "@Of":
            chain = _flatten(term, "@Of")
            if _leaf(chain[0]) in ("value", "the value"):
                return self._cond_value(chain[-1])
            raise CodegenFailure("UnresolvedTerm", format_lf(term))
        value = self.r.value(term)
        if value is None:
            # bare words inside conditions ("odd", "nonzero") stay symbolic
            raise CodegenFailure("UnresolvedTerm", _leaf(term))
        return value

    def _mode_cond(self, term: Term):
        value = self.r.value(term)
        if value is None:
            raise CodegenFailure("UnresolvedTerm", _leaf(term))
        return Compare(value, "!=", Const(0))


def lf_to_instructions(lf: Term, dyn: DynamicContext, static: StaticContext,
                       layouts: list[HeaderLayout]) -> Converted:
    return Converter(Resolver(dyn, static, layouts)).convert(lf)


# ---------------------------------------------------------------------------
# Program assembly
# ---------------------------------------------------------------------------


@dataclass
class PendingCode:
    source: tuple                   # document order key
    message: str                    # full message heading
    roles: tuple[str, ...]          # () means both
    converted: Converted


def unit_name(protocol: str, message_heading: str, role: str) -> str:
    key = message_key(message_heading, protocol)
    return f"{protocol.lower()}_{key}_{role}"


def assemble_program(protocol: str, pending: list[PendingCode],
                     layouts: list[HeaderLayout]) -> PacketProgram:
    """Group instructions by (protocol, message, role) in source order;
    checksum computations migrate to the end of each unit body."""
    program = PacketProgram(layouts=list(layouts))
    messages = sorted({p.message for p in pending if p.message})
    for heading in messages:
        for role in ("sender", "receiver"):
            name = unit_name(protocol, heading, role)
            program.units[name] = FunctionUnit(
                name=name, protocol=protocol, message=heading, role=role)
    advice_records: list[tuple[str, tuple[str, ...], AdviceRecord]] = []
    for item in sorted(pending, key=lambda p: p.source):
        roles = item.roles or ("sender", "receiver")
        targets = [item.message] if item.message else messages
        for heading in targets:
            for role in roles:
                unit = program.units[unit_name(protocol, heading, role)]
                unit.body.extend(item.converted.instructions)
        for adv in item.converted.advice:
            for heading in targets:
                advice_records.append((heading, roles, adv))
    # checksum computations run last within a unit; sentences restating a
    # directive (the same assignment in two places) collapse to one
    for unit in program.units.values():
        checksums = [i for i in unit.body if isinstance(i, ComputeChecksum)]
        unit.body = [i for i in unit.body if not isinstance(i, ComputeChecksum)]
        unit.body.extend(checksums)
        seen = set()
        deduped = []
        for ins in unit.body:
            if ins in seen:
                continue
            seen.add(ins)
            deduped.append(ins)
        unit.body = deduped
    for heading, roles, adv in advice_records:
        for role in roles:
            unit = program.units[unit_name(protocol, heading, role)]
            attach_advice(unit, adv)
    # a role no sentence contributes to gets no unit
    program.units = {name: unit for name, unit in program.units.items()
                     if unit.body or unit.advice_before}
    return program


def attach_advice(unit: FunctionUnit, advice: AdviceRecord) -> None:
    """Advice instructions execute before the unit body; the target action
    (a checksum computation) must exist in the unit."""
    if advice.target == "checksum":
        if not any(isinstance(i, ComputeChecksum) for i in unit.body):
            raise CodegenFailure(
                "AdviceTargetMissing",
                f"{unit.name} computes no checksum for advice to precede")
    unit.advice_before.extend(advice.instructions)


# ---------------------------------------------------------------------------
# Value-code idiom: field descriptions carrying fixed values
# ---------------------------------------------------------------------------


def value_code_instructions(field_name: str, codes: list[tuple[int, str]],
                            dyn: DynamicContext, static: StaticContext,
                            layouts: list[HeaderLayout]) -> list[tuple[tuple[str, ...], list]]:
    """(roles, instructions) pairs from `8 = Echo message`-style idioms.

    A single bare value assigns unconditionally; values qualified by a
    message phrase route to the role that forms that message ("... reply
    message" belongs to the receiver).
    """
    resolver = Resolver(dyn, static, layouts)
    path = resolver.field_path(field_name)
    if path is None:
        return []
    out: list[tuple[tuple[str, ...], list]] = []
    if len(codes) == 1 and not codes[0][1]:
        out.append(((), [SetField(path, Const(codes[0][0]))]))
        return out
    for code, meaning in codes:
        low = meaning.lower()
        if not low.endswith("message"):
            continue
        role = "receiver" if ("reply" in low or "report" in low) else "sender"
        out.append(((role,), [SetField(path, Const(code))]))
    return out


# ---------------------------------------------------------------------------
# C-like source rendering (secondary, non-executed)
# ---------------------------------------------------------------------------


def _render_value(expr, unit: FunctionUnit) -> str:
    if isinstance(expr, Const):
        return str(expr.value)
    if isinstance(expr, FieldRef):
        return _render_path(expr.path, unit)
    if isinstance(expr, InputField):
        return f"in->{expr.path.name}"
    if isinstance(expr, ProviderRef):
        return f"sys_{expr.key}()"
    if isinstance(expr, OriginalData):
        return f"original_datagram_excerpt({expr.payload_bits})"
    return repr(expr)


def _render_path(path: FieldPath, unit: FunctionUnit) -> str:
    if path.layer == "state":
        return path.name
    if path.layer == unit.protocol.lower():
        return f"hdr->{path.name}"
    return f"{path.layer}->{path.name}"


def _render_cond(cond, unit: FunctionUnit) -> str:
    if isinstance(cond, Compare):
        if cond.op == "!=" and cond.rhs == Const(0):
            return _render_value(cond.lhs, unit)
        return f"{_render_value(cond.lhs, unit)} {cond.op} " \
               f"{_render_value(cond.rhs, unit)}"
    if isinstance(cond, AnyOf):
        return " || ".join(_render_cond(c, unit) for c in cond.operands)
    if isinstance(cond, AllOf):
        return " && ".join(_render_cond(c, unit) for c in cond.operands)
    return repr(cond)


def _render_instruction(ins, unit: FunctionUnit, depth: int) -> list[str]:
    pad = "  " * depth
    if isinstance(ins, SetField):
        return [f"{pad}{_render_path(ins.path, unit)} = "
                f"{_render_value(ins.value, unit)};"]
    if isinstance(ins, CopyField):
        return [f"{pad}{_render_path(ins.dst, unit)} = "
                f"{_render_value(ins.src, unit)};"]
    if isinstance(ins, SwapFields):
        return [f"{pad}swap({_render_path(ins.a, unit)}, "
                f"{_render_path(ins.b, unit)});"]
    if isinstance(ins, ComputeChecksum):
        rng = ins.range
        return [f"{pad}{_render_path(ins.dst, unit)} = ones_complement_checksum"
                f"({rng.start.layer}.{rng.start.name}, {rng.end});"]
    if isinstance(ins, If):
        lines = [f"{pad}if ({_render_cond(ins.cond, unit)}) {{"]
        for sub in ins.then:
            lines.extend(_render_instruction(sub, unit, depth + 1))
        lines.append(f"{pad}}}")
        return lines
    if isinstance(ins, Call):
        args = ", ".join(str(a) for a in ins.args)
        return [f"{pad}{ins.function}({args});"]
    if isinstance(ins, Comment):
        return [f"{pad}/* {ins.text} */"]
    return [f"{pad}/* {ins!r} */"]


def emit_source_text(program: PacketProgram) -> str:
    """Deterministic C-like rendering: one function per unit, advice first,
    2-space indent."""
    blocks = []
    for name in program.unit_names():
        unit = program.units[name]
        lines = [f"void {name}() {{"]
        for ins in unit.advice_before:
            lines.extend(_render_instruction(ins, unit, 1))
        for ins in unit.body:
            lines.extend(_render_instruction(ins, unit, 1))
        lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def emit_unit_body(program: PacketProgram, name: str) -> str:
    unit = program.units[name]
    lines: list[str] = []
    for ins in unit.advice_before:
        lines.extend(_render_instruction(ins, unit, 0))
    for ins in unit.body:
        lines.extend(_render_instruction(ins, unit, 0))
    return "\n".join(lines) + ("\n" if lines else "")
