import pytest
from hypothesis import given, strategies as st

from rfc2code.lexicon import (
    LexiconError,
    TermDictionary,
    Token,
    chunk_noun_phrases,
    load_term_dictionary,
    loads_lexicon,
    parse_lexicon_line,
)
from rfc2code.semantics import Num, Str

from conftest import DATA


# -- term dictionary ---------------------------------------------------------


def test_load_term_dictionary(tmp_path):
    f = tmp_path / "d.dict"
    f.write_text("checksum\necho reply message\n")
    d = load_term_dictionary(f)
    assert len(d) == 2
    assert "checksum" in d
    assert "Echo Reply Message" in d


def test_dictionary_dedup(tmp_path):
    f = tmp_path / "d.dict"
    f.write_text("checksum\nchecksum\n# comment\n")
    assert len(load_term_dictionary(f)) == 1


def test_shipped_dictionary_has_400_terms():
    d = load_term_dictionary(DATA / "terms.dict")
    assert len(d) >= 400


def test_empty_term_rejected():
    with pytest.raises(LexiconError):
        TermDictionary([" "])


# -- chunking ----------------------------------------------------------------


def test_chunking_merges_longest_match():
    d = TermDictionary(["echo reply", "echo reply message", "destination"])
    toks = chunk_noun_phrases("the destination of the echo reply message", d)
    norms = [t.norm for t in toks]
    assert "echo reply message" in norms
    assert "echo reply" not in norms


def test_chunking_poor_labeling_splits():
    d = TermDictionary(["echo reply", "message"])
    toks = chunk_noun_phrases("the destination of the echo reply message", d)
    norms = [t.norm for t in toks]
    assert "echo reply" in norms and "message" in norms


def test_chunking_no_hits_passthrough():
    d = TermDictionary(["checksum"])
    toks = chunk_noun_phrases("nothing matches here", d)
    assert [t.norm for t in toks] == ["nothing", "matches", "here"]
    assert not any(t.is_term for t in toks)


@given(st.text(alphabet=st.sampled_from(
    list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ,.=")),
    min_size=1, max_size=80))
def test_chunking_partition_property(sentence):
    # concatenating token raws reproduces the input exactly
    d = TermDictionary(["echo reply message", "checksum", "type code"])
    toks = chunk_noun_phrases(sentence, d)
    if not any(c.isalnum() or c in ",.=" for c in sentence):
        return
    assert "".join(t.raw for t in toks) == sentence


def test_chunking_deterministic():
    d = TermDictionary(["icmp message", "icmp", "message"])
    s = "the icmp message arrives"
    assert chunk_noun_phrases(s, d) == chunk_noun_phrases(s, d)


def test_dotted_state_variables_stay_one_token():
    d = TermDictionary(["bfd.sessionstate"])
    toks = chunk_noun_phrases("If bfd.SessionState is Up", d)
    assert any(t.norm == "bfd.sessionstate" and t.is_term for t in toks)


# -- lexicon format ----------------------------------------------------------


def test_parse_assignment_entry():
    entry = parse_lexicon_line(r"is |- (S\NP)/NP : \x.\y.@Is(y,x)")
    assert entry.surface == ("is",)
    assert str(entry.category) == "(S\\NP)/NP"


def test_parse_zero_arity_entry():
    entry = parse_lexicon_line("zero |- NP : @Num(0)")
    assert entry.surface == ("zero",)
    assert entry.semantics == Num(0)


def test_arity_mismatch_rejected():
    lex = loads_lexicon("")
    entry = parse_lexicon_line(r"is |- (S\NP)/NP : \x.@Is(x,x)")
    with pytest.raises(LexiconError):
        lex.add(entry)


def test_malformed_line_reports_position():
    with pytest.raises(LexiconError) as err:
        parse_lexicon_line("no separator here", lineno=7, path="f.lex")
    assert "f.lex:7" in str(err.value)


def test_lookup_explicit_and_default():
    lex = loads_lexicon("checksum |- NP : 'checksum'\n"
                        r"is |- (S\NP)/NP : \x.\y.@Is(y,x)")
    assert len(lex.lookup("checksum")) == 1
    assert len(lex.lookup("is")) >= 1
    assert lex.lookup("frobnicate") == []
    # NP-merged dictionary tokens fall back to a string-constant entry
    token = Token(raw="echo reply message ", norm="echo reply message",
                  is_term=True)
    entries = lex.lookup(token)
    assert len(entries) == 1
    assert entries[0].semantics == Str("echo_reply_message")


def test_serialize_roundtrip():
    src = ("checksum |- NP : 'checksum'\n"
           "is |- (S\\NP)/NP : \\x.\\y.@Is(y,x)\n"
           "zero |- NP : @Num(0)\n")
    lex = loads_lexicon(src)
    again = loads_lexicon(lex.serialize())
    assert sorted(map(str, again.entries())) == sorted(map(str, lex.entries()))


def test_shipped_lexicon_predicates_registered(icmp_assets):
    from rfc2code.semantics import iter_preds
    assert icmp_assets.registry is not None
    for entry in icmp_assets.lexicon.entries():
        for pred in iter_preds(entry.semantics):
            assert pred.name in icmp_assets.registry
