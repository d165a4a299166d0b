import pytest
from pathlib import Path

from rfc2code.harness import PipelineConfig, load_assets, run_pipeline

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::", 1)[1]
        _ACCEPTANCE_RESULTS.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS:
        label = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{label}  {name}")

DATA = Path(__file__).resolve().parents[1] / "src" / "rfc2code" / "data"

LEXICONS = {
    "icmp": [DATA / "lexicon_core.lex", DATA / "lexicon_icmp.lex"],
    "igmp": [DATA / "lexicon_core.lex", DATA / "lexicon_icmp.lex",
             DATA / "lexicon_igmp.lex"],
    "ntp": [DATA / "lexicon_core.lex", DATA / "lexicon_icmp.lex",
            DATA / "lexicon_ntp.lex"],
    "bfd": [DATA / "lexicon_core.lex", DATA / "lexicon_icmp.lex",
            DATA / "lexicon_bfd.lex"],
}
CHECKS = {
    "icmp": [DATA / "checks_icmp.rules"],
    "igmp": [DATA / "checks_icmp.rules", DATA / "checks_igmp.rules"],
    "ntp": [DATA / "checks_icmp.rules", DATA / "checks_ntp.rules"],
    "bfd": [DATA / "checks_icmp.rules", DATA / "checks_bfd.rules"],
}
ANNOTATIONS = {
    "icmp": DATA / "annotations_icmp.json",
    "igmp": DATA / "annotations_igmp.json",
    "ntp": DATA / "annotations_ntp.json",
    "bfd": DATA / "annotations_bfd.json",
}


def make_config(corpus: str, annotations: bool = True,
                mode: str = "full") -> PipelineConfig:
    proto = corpus.split("_")[0]
    return PipelineConfig(
        spec=DATA / "corpora" / f"{corpus}.txt",
        dictionary=DATA / "terms.dict",
        lexicons=LEXICONS[proto],
        checks=CHECKS[proto],
        context=DATA / f"static_context_{proto}.ctx",
        annotations=ANNOTATIONS[proto] if annotations else None,
        predicates=DATA / "predicates.txt",
        mode=mode,
    )


@pytest.fixture(scope="session")
def icmp_assets():
    return load_assets(make_config("icmp_original", annotations=False))


@pytest.fixture(scope="session")
def icmp_original_run():
    return run_pipeline(make_config("icmp_original", annotations=False),
                        write_artifacts=False)


@pytest.fixture(scope="session")
def icmp_rewritten_run():
    return run_pipeline(make_config("icmp_rewritten"), write_artifacts=False)


@pytest.fixture(scope="session")
def igmp_run():
    return run_pipeline(make_config("igmp"), write_artifacts=False)


@pytest.fixture(scope="session")
def ntp_run():
    return run_pipeline(make_config("ntp"), write_artifacts=False)


@pytest.fixture(scope="session")
def bfd_original_run():
    return run_pipeline(make_config("bfd_original", annotations=False),
                        write_artifacts=False)


@pytest.fixture(scope="session")
def bfd_rewritten_run():
    return run_pipeline(make_config("bfd_rewritten"), write_artifacts=False)
