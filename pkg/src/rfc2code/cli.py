"""Command-line front end: run, metrics, ablate, rewrite, scenario.

Exit code 0 means a clean run; 2 means residual ambiguity or failures
remain (for CI gating).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import figures, scenarios as scn
from .harness import (
    AnnotationFile,
    HarnessError,
    PipelineConfig,
    ablate_np_labeling,
    apply_rewrites,
    check_stats_csv,
    discover_non_actionable,
    isolated_metrics,
    load_annotations,
    pipeline_metrics,
    render_check_table,
    render_stage_table,
    run_pipeline,
    stage_stats_csv,
)
from .packet_runtime import Environment

DATA_DIR = Path(__file__).parent / "data"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", type=Path, required=True,
                        help="RFC-style spec text file")
    parser.add_argument("--dict", type=Path, dest="dictionary",
                        default=DATA_DIR / "terms.dict",
                        help="domain term dictionary")
    parser.add_argument("--lexicon", type=Path, action="append", default=[],
                        help="lexicon file (repeatable)")
    parser.add_argument("--checks", type=Path, action="append", default=[],
                        help="check-rule file (repeatable)")
    parser.add_argument("--context", type=Path,
                        default=DATA_DIR / "static_context_icmp.ctx",
                        help="static context file")
    parser.add_argument("--annotations", type=Path, default=None,
                        help="annotation file with human decisions")
    parser.add_argument("--out", type=Path, default=Path("out"),
                        help="output directory")
    parser.add_argument("--mode", default="full",
                        choices=["full", "no_dictionary", "no_chunking"])


def _config(args) -> PipelineConfig:
    lexicons = list(args.lexicon) or [DATA_DIR / "lexicon_core.lex",
                                      DATA_DIR / "lexicon_icmp.lex"]
    checks = list(args.checks) or [DATA_DIR / "checks_icmp.rules"]
    return PipelineConfig(
        spec=args.spec, dictionary=args.dictionary, lexicons=lexicons,
        checks=checks, context=args.context, annotations=args.annotations,
        out_dir=args.out, predicates=DATA_DIR / "predicates.txt",
        mode=args.mode)


def cmd_run(args) -> int:
    config = _config(args)
    report, _program = run_pipeline(config)
    annotations = load_annotations(config.annotations)
    added = discover_non_actionable(report, annotations)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if added:
        annotations.save(out / "annotations_candidates.json")
    counts = {}
    for s in report.sentences:
        counts[s.outcome] = counts.get(s.outcome, 0) + 1
    print(f"corpus: {report.corpus}")
    print(f"sentences: {len(report.sentences)} "
          + " ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    print(f"units: {len(report.unit_names)}")
    for s in report.flagged_ambiguous():
        print(f"  ambiguous {s.source}: {s.text[:70]}")
    for s in report.flagged_empty():
        print(f"  zero-LF  {s.source}: {s.text[:70]}")
    for s in report.unconfirmed_failures():
        print(f"  codegen  {s.source}: {s.text[:60]} [{s.error}]")
    print(f"report: {out / 'report.json'}")
    return 0 if report.clean else 2


def cmd_metrics(args) -> int:
    config = _config(args)
    report, _ = run_pipeline(config, write_artifacts=False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stage_stats = pipeline_metrics(report)
    check_stats = isolated_metrics(config)
    print(render_stage_table(stage_stats))
    print(render_check_table(check_stats))
    (out / "winnowing_stages.csv").write_text(stage_stats_csv(stage_stats),
                                              encoding="utf-8")
    (out / "check_effects.csv").write_text(check_stats_csv(check_stats),
                                           encoding="utf-8")
    if stage_stats:
        figures.plot_winnowing(stage_stats, out / "winnowing_stages.png",
                               title=report.corpus)
    if check_stats:
        figures.plot_check_effect(check_stats, out / "check_effects.png",
                                  title=report.corpus)
    print(f"wrote {out}/winnowing_stages.{{csv,png}} and "
          f"{out}/check_effects.{{csv,png}}")
    return 0


def cmd_ablate(args) -> int:
    config = _config(args)
    tables = []
    for mode in (args.ablate_modes or ["no_dictionary", "no_chunking"]):
        tables.append(ablate_np_labeling(config, mode))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["mode,sentences,increase,decrease,zero"]
    for t in tables:
        print(t.render(), end="")
        lines.append(f"{t.mode},{len(t.rows)},{t.increased},"
                     f"{t.decreased},{t.zeroed}")
    (out / "ablation.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    figures.plot_ablation(tables, out / "ablation.png")
    print(f"wrote {out}/ablation.{{csv,png}}")
    return 0


def cmd_rewrite(args) -> int:
    spec_text = Path(args.spec).read_text(encoding="utf-8")
    annotations = load_annotations(args.annotations) if args.annotations \
        else AnnotationFile()
    rewritten = apply_rewrites(spec_text, annotations)
    target = args.output or (Path(args.out) / (Path(args.spec).stem
                                               + "_rewritten.txt"))
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    Path(target).write_text(rewritten, encoding="utf-8")
    print(f"wrote {target}")
    return 0


def cmd_scenario(args) -> int:
    config = _config(args)
    report, program = run_pipeline(config, write_artifacts=False)
    if program is None:
        print("no program assembled", file=sys.stderr)
        return 2
    configs = scn.load_scenarios(args.scenarios)
    out = Path(args.out)
    results = scn.run_all(configs, program, out_dir=out, env=Environment())
    failed = 0
    for res in results:
        status = "pass" if res.ok else "FAIL"
        print(f"[{status}] {res.name}")
        for note in res.notes:
            print(f"    {note}")
        if not res.ok:
            failed += 1
    print(f"pcap and hex dumps in {out}/")
    return 0 if failed == 0 else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rfc2code",
        description="Compile RFC-style protocol prose into packet programs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline with ambiguity report")
    _add_common(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_met = sub.add_parser("metrics", help="winnowing statistics and figures")
    _add_common(p_met)
    p_met.set_defaults(fn=cmd_metrics)

    p_abl = sub.add_parser("ablate", help="NP-labeling ablation")
    _add_common(p_abl)
    p_abl.add_argument("--ablate-modes", nargs="*", default=None)
    p_abl.set_defaults(fn=cmd_ablate)

    p_rew = sub.add_parser("rewrite", help="apply rewrite annotations")
    p_rew.add_argument("--spec", type=Path, required=True)
    p_rew.add_argument("--annotations", type=Path, required=True)
    p_rew.add_argument("--out", type=Path, default=Path("out"))
    p_rew.add_argument("--output", type=Path, default=None)
    p_rew.set_defaults(fn=cmd_rewrite)

    p_scn = sub.add_parser("scenario", help="run message-exchange scenarios")
    _add_common(p_scn)
    p_scn.add_argument("--scenarios", type=Path,
                       default=DATA_DIR / "scenarios_icmp.json")
    p_scn.set_defaults(fn=cmd_scenario)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
