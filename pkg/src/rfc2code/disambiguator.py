"""Winnow a sentence's logical-form set down to (ideally) one survivor.

Five checks run in pipeline order: type, argument ordering, predicate
ordering, distributivity, associativity.  The first four are eliminative
filters; associativity partitions the set into equivalence classes under
rebracketing of associative predicate chains and keeps one left-deep
representative per class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .semantics import Num, Pred, Str, Term, format_lf, iter_preds


class RuleError(Exception):
    pass


LEAF_KINDS = {"number", "string", "field_name", "function_name",
              "message_name"}


@dataclass
class KindOracle:
    """Classifies LF leaves for type/argument checks.

    A leaf is a function_name iff it appears in the static context's
    function table; a field_name iff it matches a header field or state
    variable; numeric literals are numbers; anything else is a string.
    """
    fields: set[str] = field(default_factory=set)
    functions: set[str] = field(default_factory=set)

    def classify(self, leaf: Term) -> set[str]:
        if isinstance(leaf, Num):
            return {"number"}
        if not isinstance(leaf, Str):
            return set()
        kinds: set[str] = set()
        value = leaf.value
        if value.replace("-", "").replace(".", "").isdigit():
            kinds.add("number")
        if value in self.functions:
            kinds.add("function_name")
        if value in self.fields:
            kinds.add("field_name")
        if not kinds:
            kinds.add("string")
        if value.endswith(("message", "messages")):
            kinds.add("message_name")
        return kinds


@dataclass
class CheckRuleSet:
    classes: dict[str, set[str]] = field(default_factory=dict)
    type_rules: dict[tuple[str, int], set[str]] = field(default_factory=dict)
    type_rule_count: int = 0
    arg_order_rules: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    pred_order_rules: list[tuple[str, str, Optional[int]]] = field(default_factory=list)
    associative: set[str] = field(default_factory=set)

    def merge(self, other: "CheckRuleSet") -> "CheckRuleSet":
        merged = CheckRuleSet()
        merged.classes = {k: set(v) for k, v in self.classes.items()}
        for k, v in other.classes.items():
            merged.classes.setdefault(k, set()).update(v)
        merged.type_rules = {k: set(v) for k, v in self.type_rules.items()}
        for k, v in other.type_rules.items():
            merged.type_rules.setdefault(k, set()).update(v)
        merged.type_rule_count = self.type_rule_count + other.type_rule_count
        merged.arg_order_rules = self.arg_order_rules + other.arg_order_rules
        merged.pred_order_rules = self.pred_order_rules + other.pred_order_rules
        merged.associative = self.associative | other.associative
        return merged

    def referenced_predicates(self) -> set[str]:
        names: set[str] = set()
        for preds in self.classes.values():
            names |= preds
        for pred, _pos in self.type_rules:
            names.add(pred)
        for pred, pats in self.arg_order_rules:
            names.add(pred)
            for p in pats:
                if p.startswith("predicate:"):
                    names.add(p.split(":", 1)[1])
                if p.startswith("contains:") and p.split(":", 1)[1] in self.classes:
                    names |= self.classes[p.split(":", 1)[1]]
        for parent, child, _ in self.pred_order_rules:
            names.update((parent, child))
        names |= self.associative
        return names

    # -- pattern matching ---------------------------------------------------

    def matches(self, pattern: str, arg: Term, oracle: KindOracle) -> bool:
        if pattern == "any":
            return True
        if pattern == "predicate":
            return isinstance(arg, Pred)
        if pattern.startswith("predicate:"):
            return isinstance(arg, Pred) and arg.name == pattern.split(":", 1)[1]
        if pattern.startswith("contains:"):
            name = pattern.split(":", 1)[1]
            if name not in self.classes:
                raise RuleError(f"unknown class {name!r}")
            targets = self.classes[name]
            return any(p.name in targets for p in iter_preds(arg))
        if pattern in self.classes:
            return isinstance(arg, Pred) and arg.name in self.classes[pattern]
        if pattern in LEAF_KINDS:
            return not isinstance(arg, Pred) and pattern in oracle.classify(arg)
        raise RuleError(f"unknown pattern {pattern!r}")


def load_check_rules(path) -> CheckRuleSet:
    rules = CheckRuleSet()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                _parse_rule_line(line, rules)
            except (RuleError, ValueError, IndexError) as exc:
                raise RuleError(f"{path}:{lineno}: {exc}") from exc
    return rules


def _parse_rule_line(line: str, rules: CheckRuleSet) -> None:
    parts = line.split()
    kind = parts[0]
    if kind == "class":
        # class action = @Action,@Invoke
        name = parts[1]
        rhs = line.split("=", 1)[1]
        rules.classes[name] = {p.strip() for p in rhs.split(",") if p.strip()}
    elif kind == "type":
        # type @Action 2 function_name,field_name
        pred, pos, allow = parts[1], int(parts[2]), parts[3]
        key = (pred, pos)
        rules.type_rules.setdefault(key, set()).update(
            a.strip() for a in allow.split(",") if a.strip())
        rules.type_rule_count += 1
    elif kind == "argorder":
        # argorder @If forbid(action,condition)
        pred = parts[1]
        inner = line.split("forbid(", 1)[1].rsplit(")", 1)[0]
        pats = tuple(p.strip() for p in inner.split(",") if p.strip())
        rules.arg_order_rules.append((pred, pats))
    elif kind == "predorder":
        # predorder forbid parent=@Of child=@Is pos=2
        kv = dict(p.split("=", 1) for p in parts[2:])
        if parts[1] != "forbid" or "parent" not in kv or "child" not in kv:
            raise RuleError(f"bad predorder rule: {line!r}")
        pos = int(kv["pos"]) if "pos" in kv else None
        rules.pred_order_rules.append((kv["parent"], kv["child"], pos))
    elif kind == "assoc":
        rules.associative.update(parts[1:])
    else:
        raise RuleError(f"unknown rule kind {kind!r}")


# ---------------------------------------------------------------------------
# The five checks
# ---------------------------------------------------------------------------


def apply_type_checks(lfs: Iterable[Term], rules: CheckRuleSet,
                      oracle: KindOracle) -> list[Term]:
    """Drop LFs with an argument whose kind violates the per-position allowlist."""
    out = []
    for lf in lfs:
        ok = True
        for node in iter_preds(lf):
            for pos, arg in enumerate(node.args, start=1):
                allow = rules.type_rules.get((node.name, pos))
                if allow is None:
                    continue
                if not any(rules.matches(p, arg, oracle) for p in allow):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(lf)
    return out


def apply_arg_order_checks(lfs: Iterable[Term], rules: CheckRuleSet,
                           oracle: KindOracle) -> list[Term]:
    """Drop LFs containing a forbidden argument pattern for a predicate."""
    out = []
    for lf in lfs:
        bad = False
        for node in iter_preds(lf):
            for pred, pats in rules.arg_order_rules:
                if node.name != pred or len(node.args) < len(pats):
                    continue
                if all(rules.matches(p, a, oracle)
                       for p, a in zip(pats, node.args)):
                    bad = True
                    break
            if bad:
                break
        if not bad:
            out.append(lf)
    return out


def apply_pred_order_checks(lfs: Iterable[Term],
                            rules: CheckRuleSet) -> list[Term]:
    """Drop LFs where a blocklisted (parent, child[, position]) nesting occurs."""
    out = []
    for lf in lfs:
        bad = False
        for node in iter_preds(lf):
            for parent, child, pos in rules.pred_order_rules:
                if node.name != parent:
                    continue
                if pos is None:
                    hit = any(isinstance(a, Pred) and a.name == child
                              for a in node.args)
                else:
                    hit = (len(node.args) >= pos
                           and isinstance(node.args[pos - 1], Pred)
                           and node.args[pos - 1].name == child)
                if hit:
                    bad = True
                    break
            if bad:
                break
        if not bad:
            out.append(lf)
    return out


def _collapse_distribution_step(term: Term) -> Optional[Term]:
    """One rewrite @And(P(..a..), P(..b..)) -> P(.. @And(a,b) ..), anywhere."""
    if isinstance(term, Pred):
        if term.name == "@And" and len(term.args) == 2:
            a, b = term.args
            if (isinstance(a, Pred) and isinstance(b, Pred)
                    and a.name == b.name and a.name != "@And"
                    and len(a.args) == len(b.args)):
                diff = [i for i in range(len(a.args)) if a.args[i] != b.args[i]]
                if len(diff) == 1:
                    i = diff[0]
                    args = list(a.args)
                    args[i] = Pred("@And", (a.args[i], b.args[i]))
                    return Pred(a.name, tuple(args))
        for i, arg in enumerate(term.args):
            step = _collapse_distribution_step(arg)
            if step is not None:
                args = list(term.args)
                args[i] = step
                return Pred(term.name, tuple(args))
    return None


def undistribute(term: Term) -> Term:
    """Rewrite distributed conjunctions to their grouped form, to fixpoint."""
    while True:
        step = _collapse_distribution_step(term)
        if step is None:
            return term
        term = step


def apply_distributivity_check(lfs: Iterable[Term]) -> list[Term]:
    """When a distributed form and its grouped counterpart coexist over the
    same leaves, keep only the grouped (non-distributive) form."""
    lfs = list(lfs)
    present = set(lfs)
    out = []
    for lf in lfs:
        grouped = undistribute(lf)
        if grouped != lf and grouped in present:
            continue
        out.append(lf)
    return out


def flatten_associative(term: Term, associative: set[str]) -> Term:
    """Canonical form: chains of one associative predicate rebuilt left-deep."""
    if not isinstance(term, Pred):
        return term
    args = tuple(flatten_associative(a, associative) for a in term.args)
    node = Pred(term.name, args)
    if term.name not in associative or len(args) != 2:
        return node

    def chain(t: Term) -> list[Term]:
        if isinstance(t, Pred) and t.name == term.name and len(t.args) == 2:
            return chain(t.args[0]) + chain(t.args[1])
        return [t]

    leaves = chain(node)
    acc = leaves[0]
    for leaf in leaves[1:]:
        acc = Pred(term.name, (acc, leaf))
    return acc


def apply_associativity_check(lfs: Iterable[Term],
                              associative: set[str]) -> list[Term]:
    """Merge LFs whose trees coincide after flattening associative chains;
    the left-deep canonical form represents each class."""
    out: list[Term] = []
    seen: set[Term] = set()
    for lf in lfs:
        canon = flatten_associative(lf, associative)
        if canon not in seen:
            seen.add(canon)
            out.append(canon)
    return out


# ---------------------------------------------------------------------------
# Winnowing pipeline
# ---------------------------------------------------------------------------

STAGES = ("type", "arg_order", "pred_order", "distributivity", "associativity")


@dataclass
class WinnowOutcome:
    final: str                         # "unique" | "ambiguous" | "empty"
    lfs: tuple[Term, ...]              # survivors (1 for unique)
    stage_counts: list[tuple[str, int]]

    @property
    def unique_lf(self) -> Optional[Term]:
        return self.lfs[0] if self.final == "unique" else None

    @property
    def lf_texts(self) -> list[str]:
        return [format_lf(lf) for lf in self.lfs]


def _stage_fn(stage: str, rules: CheckRuleSet,
              oracle: KindOracle) -> Callable[[list[Term]], list[Term]]:
    if stage == "type":
        return lambda lfs: apply_type_checks(lfs, rules, oracle)
    if stage == "arg_order":
        return lambda lfs: apply_arg_order_checks(lfs, rules, oracle)
    if stage == "pred_order":
        return lambda lfs: apply_pred_order_checks(lfs, rules)
    if stage == "distributivity":
        return apply_distributivity_check
    if stage == "associativity":
        return lambda lfs: apply_associativity_check(lfs, rules.associative)
    raise RuleError(f"unknown stage {stage!r}")


def winnow(lfs: Iterable[Term], rules: CheckRuleSet,
           oracle: KindOracle) -> WinnowOutcome:
    """Apply the five checks in pipeline order, recording per-stage counts."""
    current = sorted(set(lfs), key=format_lf)
    counts = [("base", len(current))]
    for stage in STAGES:
        current = _stage_fn(stage, rules, oracle)(current)
        counts.append((stage, len(current)))
    if not current:
        final = "empty"
    elif len(current) == 1:
        final = "unique"
    else:
        final = "ambiguous"
    return WinnowOutcome(final, tuple(current), counts)


def isolated_check(lfs: Iterable[Term], stage: str, rules: CheckRuleSet,
                   oracle: KindOracle) -> list[Term]:
    """Apply a single check to the base set (isolated-effect reporting)."""
    return _stage_fn(stage, rules, oracle)(sorted(set(lfs), key=format_lf))
