import random

import pytest

from rfc2code.semantics import (
    App,
    Lam,
    Num,
    Pred,
    PredicateRegistry,
    SemanticsError,
    Str,
    Var,
    beta_reduce,
    format_lf,
    is_closed_normal,
    parse_category,
    parse_lambda,
    parse_lf,
)


def test_category_parsing_roundtrip():
    for text in ["NP", "S", "N", "(S\\NP)/NP", "S/S", "(S/S)/NP",
                 "((S\\S)\\(S\\S))/(S\\S)", "NP/NP"]:
        cat = parse_category(text)
        assert parse_category(str(cat)) == cat


def test_category_arity():
    assert parse_category("NP").arity() == 0
    assert parse_category("(S\\NP)/NP").arity() == 2
    assert parse_category("((S/S)/NP)/NP").arity() == 3


def test_category_errors():
    with pytest.raises(SemanticsError):
        parse_category("(S\\NP")
    with pytest.raises(SemanticsError):
        parse_category("S!NP")


def test_lambda_parse_and_apply():
    # composing "is" with its arguments assigns the value to the subject
    is_sem = parse_lambda(r"\x.\y.@Is(y,x)")
    applied = beta_reduce(App(App(is_sem, Str("0")), Str("checksum")))
    assert applied == Pred("@Is", (Str("checksum"), Str("0")))


def test_num_literal():
    term = parse_lambda("@Num(0)")
    assert term == Num(0)
    assert str(term) == "@Num(0)"


def test_format_lf_matches_prefix_text_form():
    lf = Pred("@AdvBefore", (Pred("@Action", (Str("compute"), Str("checksum"))),
                             Pred("@Is", (Str("checksum_field"), Str("0")))))
    text = format_lf(lf)
    assert text == "@AdvBefore(@Action('compute','checksum'),@Is('checksum_field','0'))"
    assert parse_lf(text) == lf


def test_beta_reduce_identity_on_normal_terms():
    lf = parse_lf("@Is('checksum','0')")
    assert beta_reduce(lf) == lf


def _random_term(rng, depth=0):
    """Small random lambda terms built from K/I-style combinators and
    predicate shells; all such terms are strongly normalizing."""
    choice = rng.random()
    if depth > 3 or choice < 0.3:
        return rng.choice([Str("a"), Str("b"), Num(rng.randrange(5))])
    if choice < 0.55:
        param = rng.choice("xyz")
        body = rng.choice([Var(param), _random_term(rng, depth + 1)])
        return Lam(param, body)
    if choice < 0.8:
        fn = Lam("x", rng.choice([Var("x"), _random_term(rng, depth + 1)]))
        return App(fn, _random_term(rng, depth + 1))
    return Pred("@P", (_random_term(rng, depth + 1),
                       _random_term(rng, depth + 1)))


def test_reduction_order_independence():
    # normal-order and applicative-order reduction agree on these terms
    rng = random.Random(7)
    for _ in range(100):
        term = _random_term(rng)
        assert beta_reduce(term, "normal") == beta_reduce(term, "applicative")


def test_alpha_equivalent_terms_compare_equal():
    t1 = beta_reduce(Lam("x", App(Var("x"), Str("a"))))
    t2 = beta_reduce(Lam("y", App(Var("y"), Str("a"))))
    assert t1 == t2


def test_is_closed_normal():
    assert is_closed_normal(parse_lf("@Is('a','b')"))
    assert not is_closed_normal(Lam("x", Var("x")))
    assert not is_closed_normal(Var("x"))


def test_registry_arity_enforcement():
    reg = PredicateRegistry()
    reg.register("@Is", 2, 2)
    reg.validate(parse_lf("@Is('a','b')"))
    with pytest.raises(SemanticsError):
        reg.validate(Pred("@Is", (Str("a"),)))
    with pytest.raises(SemanticsError):
        reg.validate(Pred("@Unknown", ()))
