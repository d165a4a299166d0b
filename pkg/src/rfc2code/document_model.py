"""Structured view of an RFC-style spec: section/paragraph hierarchy,
packet-header layouts from ASCII art, field descriptions, and per-sentence
dynamic context records.

Indentation carries the content hierarchy; `+-+-` ruled blocks are header
art; short label lines introduce field descriptions; `<int> = <text>` and
`<int> for <text>` lines are value-code idioms, not sentences.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional


class DocumentError(Exception):
    pass


KIND_PROSE = "prose"
KIND_HEADER_ART = "header_art"
KIND_FIELD_DESCRIPTION = "field_description"
KIND_PSEUDO_CODE = "pseudo_code"


@dataclass
class Paragraph:
    indent_level: int
    sentences: list[str]
    kind: str
    lines: list[str] = field(default_factory=list)
    label: str = ""                 # set for field_description label paragraphs
    value_code_lines: list[str] = field(default_factory=list)


@dataclass
class Section:
    heading: str
    paragraphs: list[Paragraph] = field(default_factory=list)


@dataclass
class SpecDocument:
    title: str
    sections: list[Section] = field(default_factory=list)

    @property
    def protocol(self) -> str:
        return protocol_acronym(self.title)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "sections": [
                {
                    "heading": sec.heading,
                    "paragraphs": [
                        {
                            "indent_level": p.indent_level,
                            "kind": p.kind,
                            "sentences": list(p.sentences),
                        }
                        for p in sec.paragraphs
                    ],
                }
                for sec in self.sections
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


@dataclass
class HeaderLayout:
    protocol: str
    message: str
    fields: list[tuple[str, int]]   # (name, width_bits) in wire order

    def offsets(self) -> dict[str, tuple[int, int]]:
        """name -> (bit offset, width)."""
        out = {}
        off = 0
        for name, width in self.fields:
            out[name] = (off, width)
            off += width
        return out

    @property
    def total_bits(self) -> int:
        return sum(w for _, w in self.fields)


@dataclass
class FieldDescription:
    field_name: str
    sentences: list[str]
    value_codes: list[tuple[int, str]]
    matched: bool = True            # names a field of some layout


@dataclass
class DynamicContext:
    protocol: str = ""
    message: str = ""
    field: str = ""
    role: str = ""

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "message": self.message,
                "field": self.field, "role": self.role}


@dataclass
class SentenceRecord:
    text: str
    context: DynamicContext
    source: tuple[int, int, int]    # (section idx, paragraph idx, sentence idx)


# ---------------------------------------------------------------------------
# Paragraph extraction
# ---------------------------------------------------------------------------

_RULER = re.compile(r"\+-(\+|-)*")
_VALUE_CODE = re.compile(r"^(\d+)\s*(?:(=|for)\s*(.*?))?\s*[.;]?$")
_LABEL = re.compile(r"^[A-Z][A-Za-z0-9 '+/&-]*:?$")
_ABBREVIATIONS = ("e.g.", "i.e.", "etc.", "vs.")

STRUCTURAL_LABELS = {
    "ip fields", "icmp fields", "igmp fields", "ntp fields", "fields",
    "addresses", "description", "summary of message types",
}


def protocol_acronym(title: str) -> str:
    m = re.search(r"\(([A-Z][A-Z0-9]+)\)", title)
    if m:
        return m.group(1)
    words = [w for w in re.split(r"[^A-Za-z0-9]+", title) if w]
    initials = "".join(w[0].upper() for w in words
                       if w[0].isupper() or w[0].isdigit())
    return initials or title.strip()


def split_sentences(text: str) -> list[str]:
    """Split on '.' + whitespace, protecting abbreviations and numbers;
    unpunctuated fragments stay a single sentence."""
    guarded = text
    for abbr in _ABBREVIATIONS:
        guarded = guarded.replace(abbr, abbr.replace(".", "\x00"))
    guarded = re.sub(r"(\d)\.(\d)", "\\1\x00\\2", guarded)
    parts = re.split(r"(?<=\.)\s+", guarded)
    out = []
    for part in parts:
        part = part.replace("\x00", ".").strip()
        if part:
            out.append(part)
    return out


def _indent_of(line: str, lineno: int) -> int:
    if "\t" in line[: len(line) - len(line.lstrip())]:
        raise DocumentError(f"line {lineno}: tab in indentation")
    return len(line) - len(line.lstrip(" "))


def _classify(lines: list[str], indent: int) -> str:
    body = "\n".join(lines)
    if _RULER.search(body) or "|" in body and re.search(r"\+-", body):
        return KIND_HEADER_ART
    stripped = [ln.strip() for ln in lines]
    if (len(stripped) == 1 and indent > 0 and _LABEL.match(stripped[0])
            and len(stripped[0].split()) <= 9
            and not stripped[0].endswith(".")):
        return KIND_FIELD_DESCRIPTION
    ops = sum(body.count(op) for op in (":=", "<-", "{", "}", "==", "+=")) \
        + body.count(" = ")
    words = max(len(body.split()), 1)
    if indent > 0 and ops >= 3 and ops / words > 0.12:
        return KIND_PSEUDO_CODE
    return KIND_PROSE


def extract_paragraphs(raw: str) -> SpecDocument:
    """Build the SpecDocument: indentation drives hierarchy, rulings mark
    header art, short label lines mark field descriptions."""
    lines = raw.splitlines()
    title = ""
    sections: list[Section] = []
    current: Optional[Section] = None
    block: list[str] = []
    block_indent = 0

    def flush() -> None:
        nonlocal block
        if not block or current is None:
            block = []
            return
        kind = _classify(block, block_indent)
        para = Paragraph(indent_level=block_indent, sentences=[], kind=kind,
                         lines=list(block))
        if kind == KIND_HEADER_ART:
            pass
        elif kind == KIND_FIELD_DESCRIPTION:
            para.label = block[0].strip().rstrip(":")
        elif kind == KIND_PSEUDO_CODE:
            pass
        else:
            value_lines = []
            text_lines = []
            for ln in block:
                if _VALUE_CODE.match(ln.strip()):
                    value_lines.append(ln.strip())
                else:
                    text_lines.append(ln.strip())
            para.value_code_lines = value_lines
            if text_lines:
                para.sentences = split_sentences(" ".join(text_lines))
        current.paragraphs.append(para)
        block = []

    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            flush()
            continue
        indent = _indent_of(line, lineno)
        if indent == 0:
            flush()
            if not title:
                title = line.strip()
                current = Section(heading=title)
                sections.append(current)
            else:
                current = Section(heading=line.strip())
                sections.append(current)
            continue
        if not block:
            block_indent = indent
        block.append(line)
    flush()

    # drop the synthetic title section when it carries no content
    sections = [s for s in sections
                if s.paragraphs or s.heading != title or len(sections) == 1]
    return SpecDocument(title=title, sections=sections)


# ---------------------------------------------------------------------------
# Header layout extraction
# ---------------------------------------------------------------------------


def extract_header_layout(paragraph: Paragraph, protocol: str = "",
                          message: str = "") -> HeaderLayout:
    """Field names and widths from `+-+-` ruled ASCII art; rows are 32-bit
    ruled and multi-row diagrams concatenate in order."""
    if paragraph.kind != KIND_HEADER_ART:
        raise DocumentError("paragraph is not header art")
    lines = paragraph.lines
    ruler = None
    for ln in lines:
        if set(ln.strip()) <= {"+", "-"} and ln.strip().startswith("+"):
            ruler = ln
            break
    if ruler is None:
        raise DocumentError("header art lacks a +-+ ruler line")
    plus_positions = [i for i, ch in enumerate(ruler) if ch == "+"]
    first = plus_positions[0]
    bits_per_row = (plus_positions[-1] - first) // 2

    fields: list[tuple[str, int]] = []
    for row_idx, ln in enumerate(lines):
        if "|" not in ln:
            continue
        if "..." in ln:
            # variable-length payload marker row ("Data ...")
            continue
        pipes = [i for i, ch in enumerate(ln) if ch == "|"]
        row_bits = 0
        for a, b in zip(pipes, pipes[1:]):
            if (a - first) % 2 or (b - first) % 2:
                raise DocumentError(
                    f"row {row_idx}: separator misaligned with bit ruler")
            width = (b - a) // 2
            name = ln[a + 1:b].strip()
            if not name:
                raise DocumentError(f"row {row_idx}: unlabeled field span")
            fields.append((name, width))
            row_bits += width
        if row_bits != bits_per_row or bits_per_row != 32:
            raise DocumentError(
                f"row {row_idx}: widths sum to {row_bits} bits, expected 32")
    return HeaderLayout(protocol=protocol, message=message, fields=fields)


def document_layouts(doc: SpecDocument) -> list[HeaderLayout]:
    layouts = []
    for sec in doc.sections:
        for para in sec.paragraphs:
            if para.kind == KIND_HEADER_ART:
                layouts.append(extract_header_layout(
                    para, protocol=doc.protocol, message=sec.heading))
    return layouts


# ---------------------------------------------------------------------------
# Field descriptions
# ---------------------------------------------------------------------------


def _parse_value_codes(lines: list[str]) -> list[tuple[int, str]]:
    codes = []
    for ln in lines:
        m = _VALUE_CODE.match(ln.strip())
        if m:
            meaning = (m.group(3) or "").strip()
            codes.append((int(m.group(1)), meaning))
    return codes


def extract_field_descriptions(doc: SpecDocument) -> list[FieldDescription]:
    """One FieldDescription per field label; sentences and value codes come
    from the label's following deeper-indented paragraphs."""
    layouts = document_layouts(doc)
    known = {name.lower() for lay in layouts for name, _ in lay.fields}
    out: list[FieldDescription] = []
    for sec in doc.sections:
        paras = sec.paragraphs
        for i, para in enumerate(paras):
            if para.kind != KIND_FIELD_DESCRIPTION:
                continue
            label = para.label
            if label.lower() in STRUCTURAL_LABELS:
                continue
            sentences: list[str] = []
            code_lines: list[str] = []
            for child in paras[i + 1:]:
                if child.indent_level <= para.indent_level:
                    break
                if child.kind == KIND_PROSE:
                    sentences.extend(child.sentences)
                    code_lines.extend(child.value_code_lines)
            out.append(FieldDescription(
                field_name=label,
                sentences=sentences,
                value_codes=_parse_value_codes(code_lines),
                matched=label.lower() in known,
            ))
    return out


# ---------------------------------------------------------------------------
# Sentence contexts
# ---------------------------------------------------------------------------

_MESSAGE_SUFFIXES = ("message", "messages", "packets", "procedure")


def is_message_heading(heading: str) -> bool:
    h = heading.lower()
    return h.endswith(_MESSAGE_SUFFIXES) and "summary" not in h


def message_key(heading: str, protocol: str = "") -> str:
    """Short unit-name key: 'Echo or Echo Reply Message' -> 'echo'."""
    h = heading.lower()
    for suf in _MESSAGE_SUFFIXES:
        if h.endswith(suf):
            h = h[: -len(suf)].strip()
    if " or " in h:
        h = h.split(" or ")[0].strip()
    for noise in ("reception of", "transmission of"):
        if h.startswith(noise):
            h = h[len(noise):].strip()
    drop = {"request", "reply", protocol.lower()}
    words = [w for w in re.split(r"[^a-z0-9]+", h) if w and w not in drop]
    return "_".join(words)


def build_sentence_contexts(doc: SpecDocument) -> list[SentenceRecord]:
    """Every prose sentence gets {protocol, message, field, role} from its
    enclosing section heading and nearest field label; role stays empty
    here and is overridden by annotations downstream."""
    records: list[SentenceRecord] = []
    protocol = doc.protocol
    for si, sec in enumerate(doc.sections):
        message = sec.heading if is_message_heading(sec.heading) else ""
        label_stack: list[tuple[int, str]] = []
        for pi, para in enumerate(sec.paragraphs):
            while label_stack and para.indent_level <= label_stack[-1][0]:
                label_stack.pop()
            if para.kind == KIND_FIELD_DESCRIPTION:
                if para.label.lower() in STRUCTURAL_LABELS:
                    label_stack = []
                else:
                    label_stack.append((para.indent_level, para.label.lower()))
                continue
            if para.kind != KIND_PROSE:
                continue
            fld = label_stack[-1][1] if label_stack else ""
            for ti, text in enumerate(para.sentences):
                ctx = DynamicContext(protocol=protocol, message=message,
                                     field=fld, role="")
                records.append(SentenceRecord(text=text, context=ctx,
                                              source=(si, pi, ti)))
    return records
