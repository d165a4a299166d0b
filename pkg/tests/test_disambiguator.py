import itertools

import pytest

from rfc2code.disambiguator import (
    CheckRuleSet,
    KindOracle,
    RuleError,
    apply_arg_order_checks,
    apply_associativity_check,
    apply_distributivity_check,
    apply_pred_order_checks,
    apply_type_checks,
    flatten_associative,
    isolated_check,
    load_check_rules,
    undistribute,
    winnow,
)
from rfc2code.semantics import Pred, Str, format_lf, parse_lf

from conftest import DATA


ORACLE = KindOracle(
    fields={"checksum", "checksum_field", "code", "type", "identifier"},
    functions={"compute", "recompute", "match"},
)

# the four readings the parser produces for the checksum advice sentence
LF1 = parse_lf("@AdvBefore(@Action('compute','0'),"
               "@Is(@And('checksum_field','checksum'),'0'))")
LF2 = parse_lf("@AdvBefore(@Action('compute','checksum'),"
               "@Is('checksum_field','0'))")
LF3 = parse_lf("@AdvBefore('0',"
               "@Is(@Action('compute',@And('checksum_field','checksum')),'0'))")
LF4 = parse_lf("@AdvBefore('0',"
               "@Is(@And('checksum_field',@Action('compute','checksum')),'0'))")


def shipped_rules():
    return load_check_rules(DATA / "checks_icmp.rules")


# -- type checks ---------------------------------------------------------------


def test_type_check_removes_numeric_action_operand():
    # a compute action needs an operand to compute, not a numeric constant
    rules = shipped_rules()
    kept = apply_type_checks([LF1, LF2], rules, ORACLE)
    assert kept == [LF2]


def test_type_check_removes_constant_advice_targets():
    rules = shipped_rules()
    kept = apply_type_checks([LF2, LF3, LF4], rules, ORACLE)
    assert kept == [LF2]


def test_type_check_empty_input():
    assert apply_type_checks([], shipped_rules(), ORACLE) == []


def test_type_check_idempotent():
    rules = shipped_rules()
    once = apply_type_checks([LF1, LF2, LF3, LF4], rules, ORACLE)
    twice = apply_type_checks(once, rules, ORACLE)
    assert once == twice


# -- argument ordering -----------------------------------------------------------


def test_arg_order_removes_inverted_conditional():
    rules = shipped_rules()
    good = parse_lf("@If(@Is('code','0'),@May(@Is('identifier','0')))")
    bad = parse_lf("@If(@May(@Is('identifier','0')),@Is('code','0'))")
    kept = apply_arg_order_checks([good, bad], rules, ORACLE)
    assert kept == [good]


def test_arg_order_keeps_canonical_conditional():
    rules = shipped_rules()
    good = parse_lf("@If(@Is('code','0'),@Action('compute','checksum'))")
    assert apply_arg_order_checks([good], rules, ORACLE) == [good]


def test_arg_order_no_conditionals_unchanged():
    rules = shipped_rules()
    lfs = [parse_lf("@Is('checksum','0')")]
    assert apply_arg_order_checks(lfs, rules, ORACLE) == lfs


# -- predicate ordering -----------------------------------------------------------


def test_pred_order_removes_is_under_of():
    rules = CheckRuleSet()
    rules.pred_order_rules.append(("@Of", "@Is", 2))
    bad = parse_lf("@Of('a',@Is('b','c'))")      # "A of (B is C)"
    good = parse_lf("@Is(@Of('a','b'),'c')")     # "(A of B) is C"
    kept = apply_pred_order_checks([bad, good], rules)
    assert kept == [good]


def test_pred_order_position_wildcard():
    rules = CheckRuleSet()
    rules.pred_order_rules.append(("@Of", "@StartsWith", None))
    bad = parse_lf("@Of(@StartsWith('m','t'),'x')")
    assert apply_pred_order_checks([bad], rules) == []


def test_pred_order_unrelated_unchanged():
    rules = shipped_rules()
    lfs = [parse_lf("@Is('checksum','0')")]
    assert apply_pred_order_checks(lfs, rules) == lfs


# -- distributivity -----------------------------------------------------------------


def test_distributivity_keeps_grouped_form():
    grouped = parse_lf("@Is(@And('a','b'),'c')")
    distributed = parse_lf("@And(@Is('a','c'),@Is('b','c'))")
    kept = apply_distributivity_check([grouped, distributed])
    assert kept == [grouped]


def test_distributivity_lone_form_unchanged():
    distributed = parse_lf("@And(@Is('a','c'),@Is('b','c'))")
    assert apply_distributivity_check([distributed]) == [distributed]


def test_distributivity_three_conjuncts():
    # derived by enumerating both forms for a three-conjunct sentence
    grouped = parse_lf("@Is(@And(@And('a','b'),'d'),'c')")
    distributed = parse_lf(
        "@And(@And(@Is('a','c'),@Is('b','c')),@Is('d','c'))")
    assert undistribute(distributed) == grouped
    kept = apply_distributivity_check([grouped, distributed])
    assert kept == [grouped]


# -- associativity --------------------------------------------------------------------


def bracketings(leaves):
    """All binary bracketings of a leaf sequence as @Of trees."""
    if len(leaves) == 1:
        yield leaves[0]
        return
    for i in range(1, len(leaves)):
        for left in bracketings(leaves[:i]):
            for right in bracketings(leaves[i:]):
                yield Pred("@Of", (left, right))


def test_associativity_merges_the_two_chain_groupings():
    g1 = parse_lf("@StartsWith(@Is('checksum',@Of(@Of('ones_complement',"
                  "'ones_complement_sum'),'icmp_message')),'icmp_type')")
    g2 = parse_lf("@StartsWith(@Is('checksum',@Of('ones_complement',"
                  "@Of('ones_complement_sum','icmp_message'))),'icmp_type')")
    merged = apply_associativity_check([g1, g2], {"@Of", "@And"})
    assert len(merged) == 1
    # the representative is the left-deep bracketing
    assert merged[0] == g1


def test_associativity_respects_non_associative_predicates():
    a = parse_lf("@In('x',@Of('y','z'))")
    b = parse_lf("@Of(@In('x','y'),'z')")
    merged = apply_associativity_check([a, b], {"@Of", "@And"})
    assert len(merged) == 2


def test_associativity_all_bracketings_of_four_leaf_chain():
    # derived: every binary bracketing of a 4-leaf @Of chain merges to one
    leaves = [Str(c) for c in "abcd"]
    lfs = list(bracketings(leaves))
    assert len(lfs) == 5  # catalan(3)
    merged = apply_associativity_check(lfs, {"@Of"})
    assert len(merged) == 1


def rebracket_oracle(tree, associative):
    """Brute force: enumerate all rebracketings of associative chains and
    return the full equivalence class."""
    if not isinstance(tree, Pred):
        return {tree}
    if tree.name in associative:
        def chain(t):
            if isinstance(t, Pred) and t.name == tree.name and len(t.args) == 2:
                return chain(t.args[0]) + chain(t.args[1])
            return [t]
        leaves = chain(tree)
        variants = set()
        subvariants = [list(rebracket_oracle(l, associative)) for l in leaves]
        for leaf_choice in itertools.product(*subvariants):
            def build(parts):
                if len(parts) == 1:
                    yield parts[0]
                    return
                for i in range(1, len(parts)):
                    for lt in build(parts[:i]):
                        for rt in build(parts[i:]):
                            yield Pred(tree.name, (lt, rt))
            variants.update(build(list(leaf_choice)))
        return variants
    out = set()
    arg_sets = [list(rebracket_oracle(a, associative)) for a in tree.args]
    for combo in itertools.product(*arg_sets):
        out.add(Pred(tree.name, combo))
    return out


@pytest.mark.parametrize("text", [
    "@Of(@Of('a','b'),@Of('c','d'))",
    "@Is(@Of('a',@Of('b','c')),'v')",
    "@And(@And('x','y'),@Of('a','b'))",
])
def test_flatten_matches_rebracketing_oracle(text):
    # trees are equivalent iff the brute-force rebracketing classes coincide
    tree = parse_lf(text)
    associative = {"@Of", "@And"}
    cls = rebracket_oracle(tree, associative)
    assert len(cls) >= 1
    canon = flatten_associative(tree, associative)
    for variant in cls:
        assert flatten_associative(variant, associative) == canon
    other = parse_lf("@Of('zzz','yyy')")
    assert flatten_associative(other, associative) != canon


# -- pipeline ---------------------------------------------------------------------------


def test_winnow_advice_sentence_to_bold_reading():
    rules = shipped_rules()
    outcome = winnow([LF1, LF2, LF3, LF4], rules, ORACLE)
    assert outcome.final == "unique"
    assert outcome.unique_lf == LF2
    counts = dict(outcome.stage_counts)
    assert counts["base"] == 4
    assert counts["associativity"] == 1


def test_winnow_records_non_increasing_counts():
    rules = shipped_rules()
    outcome = winnow([LF1, LF2, LF3, LF4], rules, ORACLE)
    values = [c for _, c in outcome.stage_counts]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_winnow_empty_and_ambiguous_classification():
    rules = shipped_rules()
    assert winnow([], rules, ORACLE).final == "empty"
    two = [parse_lf("@Is('checksum','1')"), parse_lf("@Is('checksum','2')")]
    out = winnow(two, rules, ORACLE)
    assert out.final == "ambiguous"
    assert len(out.lfs) == 2


def test_isolated_mode_matches_single_check():
    rules = shipped_rules()
    base = [LF1, LF2, LF3, LF4]
    via_isolated = isolated_check(base, "type", rules, ORACLE)
    direct = apply_type_checks(sorted(set(base), key=format_lf), rules, ORACLE)
    assert via_isolated == direct


def test_rule_file_parses_and_references_registered_predicates(icmp_assets):
    rules = icmp_assets.rules
    assert rules.type_rule_count >= 10
    assert rules.arg_order_rules
    assert rules.pred_order_rules
    assert rules.associative == {"@Of", "@And"}
    for name in rules.referenced_predicates():
        assert name in icmp_assets.registry


def test_unknown_rule_kind_rejected(tmp_path):
    f = tmp_path / "bad.rules"
    f.write_text("frobnicate @Is 1 field_name\n")
    with pytest.raises(RuleError):
        load_check_rules(f)
