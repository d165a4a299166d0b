"""End-to-end pipeline orchestration and the batch human-in-the-loop
workflow: runs, ambiguity reports, annotation files, rewrites, metrics,
and ablations.

The loop is file-mediated: a run writes a report; the user edits the
annotation file (rewrites, roles, non-actionable confirmations); the next
run honors it.
"""

from __future__ import annotations

import json
import math
import textwrap
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import codegen, document_model as dm
from .chart import ParseError, parse_tokens, reparse_with_subject
from .codegen import (
    CodegenFailure,
    Converted,
    PendingCode,
    StaticContext,
    infer_role,
    lf_to_instructions,
    load_static_context,
    value_code_instructions,
)
from .disambiguator import (
    CheckRuleSet,
    KindOracle,
    STAGES,
    isolated_check,
    load_check_rules,
    winnow,
)
from .document_model import (
    SpecDocument,
    SentenceRecord,
    build_sentence_contexts,
    document_layouts,
    extract_field_descriptions,
    extract_paragraphs,
)
from .lexicon import (
    Lexicon,
    TermDictionary,
    chunk_noun_phrases,
    load_lexicon,
    load_term_dictionary,
    plain_tokens,
)
from .packet_runtime import normalize_field
from .semantics import PredicateRegistry


class HarnessError(Exception):
    pass


# ---------------------------------------------------------------------------
# Annotations: the single file carrying all human-in-the-loop decisions
# ---------------------------------------------------------------------------


@dataclass
class Annotation:
    source: tuple[int, int, int]
    directive: str                  # advcomment | role=sender | role=receiver | rewrite
    text: str = ""                  # replacement text for rewrite
    original: str = ""              # prefix of the sentence when annotated
    confirmed: bool = False

    def to_dict(self) -> dict:
        return {"source": list(self.source), "directive": self.directive,
                "text": self.text, "original": self.original,
                "confirmed": self.confirmed}


@dataclass
class AnnotationFile:
    annotations: list[Annotation] = field(default_factory=list)

    def for_source(self, source: tuple[int, int, int]) -> list[Annotation]:
        return [a for a in self.annotations if tuple(a.source) == tuple(source)]

    def role_for(self, source) -> str:
        for a in self.for_source(source):
            if a.directive.startswith("role="):
                return a.directive.split("=", 1)[1]
        return ""

    def is_non_actionable(self, source) -> bool:
        return any(a.directive == "advcomment" and a.confirmed
                   for a in self.for_source(source))

    def has_candidate(self, source) -> bool:
        return any(a.directive == "advcomment" for a in self.for_source(source))

    def confirmed_non_actionable(self) -> list[Annotation]:
        return [a for a in self.annotations
                if a.directive == "advcomment" and a.confirmed]

    def save(self, path) -> None:
        data = {"annotations": [a.to_dict() for a in self.annotations]}
        Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def load_annotations(path) -> AnnotationFile:
    if path is None or not Path(path).exists():
        return AnnotationFile()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    out = AnnotationFile()
    for row in data.get("annotations", []):
        out.annotations.append(Annotation(
            source=tuple(row["source"]), directive=row["directive"],
            text=row.get("text", ""), original=row.get("original", ""),
            confirmed=bool(row.get("confirmed", False))))
    return out


# ---------------------------------------------------------------------------
# Rewrites: annotation-driven spec surgery (the batch feedback loop)
# ---------------------------------------------------------------------------


def render_document(doc: SpecDocument) -> str:
    """Canonical text rendering; apply_rewrites output is a normal input."""
    lines: list[str] = [doc.title, ""]
    for sec in doc.sections:
        if sec.heading != doc.title or sec.paragraphs:
            if sec.heading != doc.title:
                lines.append(sec.heading)
                lines.append("")
        for para in sec.paragraphs:
            pad = " " * para.indent_level
            if para.kind in (dm.KIND_HEADER_ART, dm.KIND_PSEUDO_CODE):
                lines.extend(para.lines)
            elif para.kind == dm.KIND_FIELD_DESCRIPTION:
                lines.append(pad + para.lines[0].strip())
            else:
                body = " ".join(para.sentences)
                if body:
                    wrapped = textwrap.wrap(body, width=78 - para.indent_level)
                    lines.extend(pad + w for w in wrapped)
                for code_line in para.value_code_lines:
                    lines.append(pad + code_line)
            lines.append("")
    while lines and not lines[-1]:
        lines.pop()
    return "\n".join(lines) + "\n"


def apply_rewrites(spec_text: str, annotations: AnnotationFile) -> str:
    """Replace annotated sentences; stale locations (text changed since
    annotation) are an error listing the mismatch."""
    if not any(a.directive == "rewrite" for a in annotations.annotations):
        return spec_text
    doc = extract_paragraphs(spec_text)
    records = build_sentence_contexts(doc)
    by_source = {rec.source: rec for rec in records}
    mismatches = []
    for ann in annotations.annotations:
        if ann.directive != "rewrite":
            continue
        source = tuple(ann.source)
        rec = by_source.get(source)
        if rec is None:
            mismatches.append(f"{source}: no sentence at this location")
            continue
        if ann.original and not rec.text.startswith(ann.original):
            mismatches.append(
                f"{source}: expected text starting {ann.original!r}, "
                f"found {rec.text!r}")
            continue
        si, pi, ti = source
        doc.sections[si].paragraphs[pi].sentences[ti] = ann.text
    if mismatches:
        raise HarnessError("stale rewrite annotations:\n  "
                           + "\n  ".join(mismatches))
    return render_document(doc)


# ---------------------------------------------------------------------------
# Pipeline configuration and report
# ---------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    spec: Path
    dictionary: Path
    lexicons: list[Path]
    checks: list[Path]
    context: Path
    annotations: Optional[Path] = None
    out_dir: Optional[Path] = None
    predicates: Optional[Path] = None
    mode: str = "full"              # full | no_dictionary | no_chunking

    def validate(self) -> None:
        paths = [self.spec, self.dictionary, self.context, *self.lexicons,
                 *self.checks]
        if self.predicates:
            paths.append(self.predicates)
        missing = [str(p) for p in paths if not Path(p).exists()]
        if missing:
            raise HarnessError(f"missing config files: {', '.join(missing)}")


@dataclass
class SentenceResult:
    source: tuple[int, int, int]
    text: str
    context: dict
    outcome: str        # unique | ambiguous | empty | non_actionable | codegen_failed | parse_error
    stage_counts: list[tuple[str, int]] = field(default_factory=list)
    lfs: list[str] = field(default_factory=list)
    stage_note: str = ""
    role: str = ""
    error: str = ""


@dataclass
class RunReport:
    corpus: str
    sentences: list[SentenceResult] = field(default_factory=list)
    unit_names: list[str] = field(default_factory=list)
    candidates: list[dict] = field(default_factory=list)
    source_text: str = ""

    def flagged_ambiguous(self) -> list[SentenceResult]:
        return [s for s in self.sentences if s.outcome == "ambiguous"]

    def flagged_empty(self) -> list[SentenceResult]:
        return [s for s in self.sentences if s.outcome == "empty"]

    def unconfirmed_failures(self) -> list[SentenceResult]:
        return [s for s in self.sentences if s.outcome == "codegen_failed"]

    @property
    def clean(self) -> bool:
        return not (self.flagged_ambiguous() or self.flagged_empty()
                    or self.unconfirmed_failures())

    def to_dict(self) -> dict:
        return {
            "corpus": self.corpus,
            "clean": self.clean,
            "units": self.unit_names,
            "sentences": [
                {
                    "source": list(s.source),
                    "text": s.text,
                    "context": s.context,
                    "outcome": s.outcome,
                    "stage_note": s.stage_note,
                    "role": s.role,
                    "stage_counts": [[n, c] for n, c in s.stage_counts],
                    "lfs": s.lfs,
                    "error": s.error,
                }
                for s in self.sentences
            ],
            "non_actionable_candidates": self.candidates,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Pipeline assets (loaded once per run)
# ---------------------------------------------------------------------------


@dataclass
class Assets:
    dictionary: TermDictionary
    lexicon: Lexicon
    rules: CheckRuleSet
    static: StaticContext
    registry: Optional[PredicateRegistry]


def load_assets(config: PipelineConfig) -> Assets:
    registry = (PredicateRegistry.from_file(config.predicates)
                if config.predicates else None)
    dictionary = load_term_dictionary(config.dictionary)
    lexicon = Lexicon()
    for path in config.lexicons:
        for entry in load_lexicon(path, registry).entries():
            lexicon.add(entry)
    rules = CheckRuleSet()
    for path in config.checks:
        rules = rules.merge(load_check_rules(path))
    static = load_static_context(config.context)
    if registry is not None:
        for name in rules.referenced_predicates():
            if name not in registry:
                raise HarnessError(f"check rules reference unregistered {name}")
    return Assets(dictionary, lexicon, rules, static, registry)


def build_kind_oracle(doc: SpecDocument, assets: Assets) -> KindOracle:
    fields: set[str] = set()
    for layout in document_layouts(doc):
        for name, _w in layout.fields:
            base = normalize_field(name)
            fields.add(base)
            fields.add(base + "_field")
    for term in (*assets.static.fields, *assets.static.states,
                 *assets.static.modes, *assets.static.swaps,
                 *assets.static.inputs):
        fields.add(term)
        fields.add(term + "_field")
    functions = set(assets.static.functions)
    return KindOracle(fields=fields, functions=functions)


# ---------------------------------------------------------------------------
# The run itself
# ---------------------------------------------------------------------------


def _tokenize(text: str, assets: Assets, mode: str):
    if mode == "full":
        return chunk_noun_phrases(text, assets.dictionary)
    return plain_tokens(text)


def _parse(record: SentenceRecord, assets: Assets, mode: str):
    tokens = _tokenize(record.text, assets, mode)
    kwargs = {}
    if mode == "no_dictionary":
        kwargs = {"fallback_np": True, "compound_nps": True}
    result = parse_tokens(tokens, assets.lexicon,
                          sentence_text=record.text, **kwargs)
    if not result.lfs and record.context.field and mode == "full":
        subject = record.context.field
        retried = reparse_with_subject(tokens, assets.lexicon, subject,
                                       sentence_text=record.text)
        if retried.lfs:
            return retried
    return result


def run_pipeline(config: PipelineConfig,
                 write_artifacts: bool = True) -> tuple[RunReport, object]:
    """document extraction -> chunking -> parse -> winnow -> codegen.

    Module errors attach to the offending sentence; the run continues.
    """
    config.validate()
    assets = load_assets(config)
    spec_text = Path(config.spec).read_text(encoding="utf-8")
    doc = extract_paragraphs(spec_text)
    layouts = document_layouts(doc)
    records = build_sentence_contexts(doc)
    annotations = load_annotations(config.annotations)
    oracle = build_kind_oracle(doc, assets)

    report = RunReport(corpus=Path(config.spec).stem, source_text=spec_text)
    pending: list[PendingCode] = []

    for record in records:
        res = SentenceResult(source=record.source, text=record.text,
                             context=record.context.to_dict(), outcome="")
        report.sentences.append(res)
        role = annotations.role_for(record.source) or infer_role(record.text)
        record.context.role = role
        res.role = role
        confirmed_na = annotations.is_non_actionable(record.source)
        try:
            parsed = _parse(record, assets, config.mode)
        except ParseError as exc:
            res.outcome = "parse_error"
            res.error = str(exc)
            continue
        res.stage_note = parsed.stage_note
        if assets.registry is not None:
            for lf in parsed.lfs:
                assets.registry.validate(lf)
        if not parsed.lfs:
            res.outcome = "non_actionable" if confirmed_na else "empty"
            continue
        outcome = winnow(parsed.lfs, assets.rules, oracle)
        res.stage_counts = outcome.stage_counts
        res.lfs = outcome.lf_texts
        if confirmed_na:
            res.outcome = "non_actionable"
            continue
        if outcome.final == "empty":
            res.outcome = "empty"
            continue
        if outcome.final == "ambiguous":
            res.outcome = "ambiguous"
            continue
        # unique: convert to instructions
        try:
            converted = lf_to_instructions(outcome.unique_lf, record.context,
                                           assets.static, layouts)
        except CodegenFailure as exc:
            res.outcome = "codegen_failed"
            res.error = str(exc)
            report.candidates.append({
                "source": list(record.source), "text": record.text,
                "error": str(exc)})
            continue
        res.outcome = "unique"
        roles: tuple[str, ...]
        if converted.role:
            roles = (converted.role,)
        elif role:
            roles = (role,)
        else:
            roles = ()
        if converted.instructions or converted.advice:
            pending.append(PendingCode(source=record.source,
                                       message=record.context.message,
                                       roles=roles, converted=converted))

    # value-code idiom instructions, in document order
    descriptions = extract_field_descriptions(doc)
    for desc, source in zip(descriptions, _description_sources(doc)):
        if not desc.value_codes:
            continue
        si, pi = source
        message = (doc.sections[si].heading
                   if dm.is_message_heading(doc.sections[si].heading) else "")
        if not message:
            continue
        ctx = dm.DynamicContext(protocol=doc.protocol, message=message,
                                field=desc.field_name.lower())
        for roles, instructions in value_code_instructions(
                desc.field_name, desc.value_codes, ctx, assets.static, layouts):
            pending.append(PendingCode(
                source=(si, pi, 0), message=message, roles=roles,
                converted=Converted(instructions=instructions)))

    program = None
    try:
        program = codegen.assemble_program(doc.protocol, pending, layouts)
        report.unit_names = program.unit_names()
    except CodegenFailure as exc:
        report.candidates.append({"source": [], "text": "<assembly>",
                                  "error": str(exc)})

    if write_artifacts and config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json(), encoding="utf-8")
        (out / "document.json").write_text(doc.to_json(), encoding="utf-8")
        if program is not None:
            (out / f"{doc.protocol.lower()}_generated.c").write_text(
                codegen.emit_source_text(program), encoding="utf-8")
    return report, program


def _description_sources(doc: SpecDocument) -> list[tuple[int, int]]:
    out = []
    for si, sec in enumerate(doc.sections):
        for pi, para in enumerate(sec.paragraphs):
            if para.kind == dm.KIND_FIELD_DESCRIPTION \
                    and para.label.lower() not in dm.STRUCTURAL_LABELS:
                out.append((si, pi))
    return out


# ---------------------------------------------------------------------------
# Iterative non-actionable discovery
# ---------------------------------------------------------------------------


def discover_non_actionable(report: RunReport,
                            annotations: AnnotationFile) -> list[Annotation]:
    """Append each codegen failure as a candidate @AdvComment annotation,
    pending human confirmation. Idempotent once candidates are confirmed."""
    added = []
    for cand in report.candidates:
        if not cand["source"]:
            continue
        source = tuple(cand["source"])
        if annotations.has_candidate(source):
            continue
        ann = Annotation(source=source, directive="advcomment",
                         original=cand["text"][:40], confirmed=False)
        annotations.annotations.append(ann)
        added.append(ann)
    return added


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass
class StageStats:
    stage: str
    minimum: int
    average: float
    maximum: int


def pipeline_metrics(report: RunReport) -> list[StageStats]:
    """Per-stage min/avg/max LF counts across ambiguous sentences (base > 1)."""
    rows = [s.stage_counts for s in report.sentences
            if s.stage_counts and s.stage_counts[0][1] > 1]
    if not rows:
        return []
    stats = []
    for idx, stage in enumerate(("base",) + STAGES):
        values = [row[idx][1] for row in rows]
        stats.append(StageStats(stage, min(values),
                                sum(values) / len(values), max(values)))
    return stats


@dataclass
class CheckStats:
    check: str
    mean_removed: float
    stderr: float
    affected: int
    total_ambiguous: int


def isolated_metrics(config: PipelineConfig) -> list[CheckStats]:
    """Apply each check alone to every ambiguous sentence's base LF set."""
    assets = load_assets(config)
    spec_text = Path(config.spec).read_text(encoding="utf-8")
    doc = extract_paragraphs(spec_text)
    records = build_sentence_contexts(doc)
    oracle = build_kind_oracle(doc, assets)
    base_sets = []
    for record in records:
        parsed = _parse(record, assets, config.mode)
        if len(parsed.lfs) > 1:
            base_sets.append(parsed.lfs)
    out = []
    for stage in ("type", "arg_order", "pred_order", "distributivity"):
        removed = []
        for lfs in base_sets:
            kept = isolated_check(lfs, stage, assets.rules, oracle)
            removed.append(len(lfs) - len(kept))
        n = len(removed)
        affected = sum(1 for r in removed if r > 0)
        mean = sum(removed) / n if n else 0.0
        if n > 1:
            var = sum((r - mean) ** 2 for r in removed) / (n - 1)
            stderr = math.sqrt(var / n)
        else:
            stderr = 0.0
        out.append(CheckStats(stage, mean, stderr, affected, n))
    return out


def render_stage_table(stats: list[StageStats]) -> str:
    if not stats:
        return "no ambiguous sentences\n"
    header = f"{'stage':<16}{'min':>6}{'avg':>8}{'max':>6}"
    rows = [header, "-" * len(header)]
    for s in stats:
        rows.append(f"{s.stage:<16}{s.minimum:>6}{s.average:>8.2f}{s.maximum:>6}")
    return "\n".join(rows) + "\n"


def render_check_table(stats: list[CheckStats]) -> str:
    if not stats:
        return "no ambiguous sentences\n"
    header = (f"{'check':<16}{'mean_removed':>14}{'stderr':>9}"
              f"{'affected':>10}{'of':>5}")
    rows = [header, "-" * len(header)]
    for s in stats:
        rows.append(f"{s.check:<16}{s.mean_removed:>14.2f}{s.stderr:>9.2f}"
                    f"{s.affected:>10}{s.total_ambiguous:>5}")
    return "\n".join(rows) + "\n"


def stage_stats_csv(stats: list[StageStats]) -> str:
    lines = ["stage,min,avg,max"]
    for s in stats:
        lines.append(f"{s.stage},{s.minimum},{s.average:.4f},{s.maximum}")
    return "\n".join(lines) + "\n"


def check_stats_csv(stats: list[CheckStats]) -> str:
    lines = ["check,mean_removed,stderr,affected,total_ambiguous"]
    for s in stats:
        lines.append(f"{s.check},{s.mean_removed:.4f},{s.stderr:.4f},"
                     f"{s.affected},{s.total_ambiguous}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# NP-labeling ablation
# ---------------------------------------------------------------------------


@dataclass
class AblationRow:
    source: tuple[int, int, int]
    text: str
    base_count: int
    mode_count: int

    @property
    def delta(self) -> int:
        return self.mode_count - self.base_count


@dataclass
class AblationTable:
    mode: str
    rows: list[AblationRow]

    @property
    def increased(self) -> int:
        return sum(1 for r in self.rows if r.delta > 0)

    @property
    def decreased(self) -> int:
        return sum(1 for r in self.rows
                   if r.delta < 0 and r.mode_count > 0)

    @property
    def zeroed(self) -> int:
        return sum(1 for r in self.rows
                   if r.mode_count == 0 and r.base_count > 0)

    def render(self) -> str:
        return (f"mode={self.mode}: sentences={len(self.rows)} "
                f"increase={self.increased} decrease={self.decreased} "
                f"zero={self.zeroed}\n")


def ablate_np_labeling(config: PipelineConfig, mode: str) -> AblationTable:
    """Re-parse the corpus with NP machinery degraded and report deltas."""
    if mode not in ("full", "no_dictionary", "no_chunking"):
        raise HarnessError(f"unknown ablation mode {mode!r}")
    assets = load_assets(config)
    spec_text = Path(config.spec).read_text(encoding="utf-8")
    doc = extract_paragraphs(spec_text)
    records = build_sentence_contexts(doc)
    rows = []
    for record in records:
        base = _parse(record, assets, "full")
        try:
            varied = base if mode == "full" else _parse(record, assets, mode)
            mode_count = len(varied.lfs)
        except ParseError:
            mode_count = 0
        rows.append(AblationRow(record.source, record.text,
                                len(base.lfs), mode_count))
    return AblationTable(mode, rows)
