"""Syntactic categories, lambda terms, and the predicate registry.

The grammar couples each surface form with a category (N, NP, S or a
slash category) and a lambda-term template.  Composing adjacent
constituents beta-reduces the templates; a fully reduced, closed term
over predicate applications is a logical form.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterator, Optional


class SemanticsError(Exception):
    """Malformed category/lambda input or an ill-formed term."""


# ---------------------------------------------------------------------------
# Syntactic categories
# ---------------------------------------------------------------------------

PRIMITIVES = ("N", "NP", "S")

FORWARD = "/"
BACKWARD = "\\"


@dataclass(frozen=True)
class Category:
    """Primitive (name set, slash fields None) or complex category."""
    name: Optional[str] = None
    result: Optional["Category"] = None
    direction: Optional[str] = None
    argument: Optional["Category"] = None

    @property
    def is_primitive(self) -> bool:
        return self.name is not None

    def __str__(self) -> str:
        if self.is_primitive:
            return self.name
        left = str(self.result)
        if not self.result.is_primitive:
            left = f"({left})"
        right = str(self.argument)
        if not self.argument.is_primitive:
            right = f"({right})"
        return f"{left}{self.direction}{right}"

    def arity(self) -> int:
        """Number of argument slots (leading slashes)."""
        n = 0
        cat = self
        while not cat.is_primitive:
            n += 1
            cat = cat.result
        return n


N = Category(name="N")
NP = Category(name="NP")
S = Category(name="S")


def forward(result: Category, argument: Category) -> Category:
    return Category(result=result, direction=FORWARD, argument=argument)


def backward(result: Category, argument: Category) -> Category:
    return Category(result=result, direction=BACKWARD, argument=argument)


_CAT_TOKEN = re.compile(r"\s*([()/\\]|NP|N|S)")


def parse_category(text: str) -> Category:
    """Parse `NP`, `(S\\NP)/NP`, ... Left-associative without parens."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _CAT_TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise SemanticsError(f"bad category syntax: {text!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()

    def parse_seq(i: int) -> tuple[Category, int]:
        cat, i = parse_atom(i)
        while i < len(tokens) and tokens[i] in (FORWARD, BACKWARD):
            direction = tokens[i]
            arg, i = parse_atom(i + 1)
            cat = Category(result=cat, direction=direction, argument=arg)
        return cat, i

    def parse_atom(i: int) -> tuple[Category, int]:
        if i >= len(tokens):
            raise SemanticsError(f"truncated category: {text!r}")
        tok = tokens[i]
        if tok == "(":
            cat, i = parse_seq(i + 1)
            if i >= len(tokens) or tokens[i] != ")":
                raise SemanticsError(f"unbalanced parens in category: {text!r}")
            return cat, i + 1
        if tok in PRIMITIVES:
            return Category(name=tok), i + 1
        raise SemanticsError(f"unexpected {tok!r} in category: {text!r}")

    cat, i = parse_seq(0)
    if i != len(tokens):
        raise SemanticsError(f"trailing tokens in category: {text!r}")
    return cat


# ---------------------------------------------------------------------------
# Lambda terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Var(Term):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Str(Term):
    value: str

    def __str__(self) -> str:
        return f"'{self.value}'"


@dataclass(frozen=True)
class Num(Term):
    value: int

    def __str__(self) -> str:
        return f"@Num({self.value})"


@dataclass(frozen=True)
class Pred(Term):
    name: str                      # includes the leading '@'
    args: tuple[Term, ...]

    def __str__(self) -> str:
        inner = ",".join(str(a) for a in self.args)
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class Lam(Term):
    param: str
    body: Term

    def __str__(self) -> str:
        return f"\\{self.param}.{self.body}"


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term

    def __str__(self) -> str:
        return f"({self.fn} {self.arg})"


_fresh_counter = itertools.count()


def _fresh(name: str) -> str:
    return f"{name}_{next(_fresh_counter)}"


def free_vars(term: Term) -> set[str]:
    if isinstance(term, Var):
        return {term.name}
    if isinstance(term, (Str, Num)):
        return set()
    if isinstance(term, Pred):
        out: set[str] = set()
        for a in term.args:
            out |= free_vars(a)
        return out
    if isinstance(term, Lam):
        return free_vars(term.body) - {term.param}
    if isinstance(term, App):
        return free_vars(term.fn) | free_vars(term.arg)
    raise SemanticsError(f"unknown term {term!r}")


def substitute(term: Term, name: str, value: Term) -> Term:
    """Capture-avoiding substitution term[name := value]."""
    if isinstance(term, Var):
        return value if term.name == name else term
    if isinstance(term, (Str, Num)):
        return term
    if isinstance(term, Pred):
        return Pred(term.name, tuple(substitute(a, name, value) for a in term.args))
    if isinstance(term, App):
        return App(substitute(term.fn, name, value), substitute(term.arg, name, value))
    if isinstance(term, Lam):
        if term.param == name:
            return term
        if term.param in free_vars(value):
            renamed = _fresh(term.param)
            body = substitute(term.body, term.param, Var(renamed))
            return Lam(renamed, substitute(body, name, value))
        return Lam(term.param, substitute(term.body, name, value))
    raise SemanticsError(f"unknown term {term!r}")


def _reduce_once_normal(term: Term) -> Optional[Term]:
    """One leftmost-outermost step, or None when already normal."""
    if isinstance(term, App):
        if isinstance(term.fn, Lam):
            return substitute(term.fn.body, term.fn.param, term.arg)
        step = _reduce_once_normal(term.fn)
        if step is not None:
            return App(step, term.arg)
        step = _reduce_once_normal(term.arg)
        if step is not None:
            return App(term.fn, step)
        return None
    if isinstance(term, Lam):
        step = _reduce_once_normal(term.body)
        return Lam(term.param, step) if step is not None else None
    if isinstance(term, Pred):
        for i, a in enumerate(term.args):
            step = _reduce_once_normal(a)
            if step is not None:
                args = list(term.args)
                args[i] = step
                return Pred(term.name, tuple(args))
        return None
    return None


def _reduce_once_applicative(term: Term) -> Optional[Term]:
    """One innermost (rightmost-innermost-ish) step, or None."""
    if isinstance(term, App):
        step = _reduce_once_applicative(term.fn)
        if step is not None:
            return App(step, term.arg)
        step = _reduce_once_applicative(term.arg)
        if step is not None:
            return App(term.fn, step)
        if isinstance(term.fn, Lam):
            return substitute(term.fn.body, term.fn.param, term.arg)
        return None
    if isinstance(term, Lam):
        step = _reduce_once_applicative(term.body)
        return Lam(term.param, step) if step is not None else None
    if isinstance(term, Pred):
        for i, a in enumerate(term.args):
            step = _reduce_once_applicative(a)
            if step is not None:
                args = list(term.args)
                args[i] = step
                return Pred(term.name, tuple(args))
        return None
    return None


MAX_REDUCTION_STEPS = 10_000


def alpha_canonical(term: Term, env: Optional[dict] = None,
                    counter: Optional[list] = None) -> Term:
    """Rename bound variables to v0, v1, ... in traversal order so that
    alpha-equivalent terms compare (and hash) equal."""
    if env is None:
        env = {}
    if counter is None:
        counter = [0]
    if isinstance(term, Var):
        return Var(env.get(term.name, term.name))
    if isinstance(term, (Str, Num)):
        return term
    if isinstance(term, Pred):
        return Pred(term.name,
                    tuple(alpha_canonical(a, env, counter) for a in term.args))
    if isinstance(term, App):
        return App(alpha_canonical(term.fn, env, counter),
                   alpha_canonical(term.arg, env, counter))
    if isinstance(term, Lam):
        fresh = f"v{counter[0]}"
        counter[0] += 1
        inner = dict(env)
        inner[term.param] = fresh
        return Lam(fresh, alpha_canonical(term.body, inner, counter))
    raise SemanticsError(f"unknown term {term!r}")


def beta_reduce(term: Term, strategy: str = "normal") -> Term:
    """Reduce to alpha-canonical beta-normal form. Terminates on
    lexicon-built terms."""
    stepper = _reduce_once_normal if strategy == "normal" else _reduce_once_applicative
    for _ in range(MAX_REDUCTION_STEPS):
        nxt = stepper(term)
        if nxt is None:
            return alpha_canonical(term)
        term = nxt
    raise SemanticsError("beta reduction did not terminate")


def is_closed_normal(term: Term) -> bool:
    """True when the term is a reduced LF: no vars, lambdas, applications."""
    if isinstance(term, (Str, Num)):
        return True
    if isinstance(term, Pred):
        return all(is_closed_normal(a) for a in term.args)
    return False


# ---------------------------------------------------------------------------
# Lambda/LF text form
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""\s*(
        \\[A-Za-z_][A-Za-z0-9_]*\. |   # \x.
        @[A-Za-z_][A-Za-z0-9_]* |      # @Pred
        [A-Za-z_][A-Za-z0-9_]* |       # identifier (variable)
        '(?:[^'\\]|\\.)*' |            # 'string'
        -?[0-9]+ |                     # number
        [(),]
    )""",
    re.VERBOSE,
)


def _tokenize_lambda(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip():
                raise SemanticsError(f"bad lambda syntax at {text[pos:]!r}")
            break
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def parse_lambda(text: str) -> Term:
    """Parse `\\x.\\y.@Is(y,x)`, `@Num(0)`, `'checksum'`, `x(y)` forms."""
    tokens = _tokenize_lambda(text)

    def parse(i: int) -> tuple[Term, int]:
        if i >= len(tokens):
            raise SemanticsError(f"truncated lambda: {text!r}")
        tok = tokens[i]
        if tok.startswith("\\"):
            param = tok[1:-1]
            body, i = parse(i + 1)
            return Lam(param, body), i
        return parse_atom(i)

    def parse_atom(i: int) -> tuple[Term, int]:
        tok = tokens[i]
        if tok.startswith("@"):
            if tok == "@Num" and i + 1 < len(tokens) and tokens[i + 1] == "(":
                args, i = parse_args(i + 1)
                if len(args) != 1 or not isinstance(args[0], Num):
                    raise SemanticsError(f"@Num takes one numeric literal: {text!r}")
                return args[0], i
            if i + 1 < len(tokens) and tokens[i + 1] == "(":
                args, i = parse_args(i + 1)
                return Pred(tok, tuple(args)), i
            return Pred(tok, ()), i + 1
        if tok.startswith("'"):
            return Str(tok[1:-1].replace("\\'", "'")), i + 1
        if re.fullmatch(r"-?[0-9]+", tok):
            return Num(int(tok)), i + 1
        if tok == "(":
            term, i = parse(i + 1)
            if i >= len(tokens) or tokens[i] != ")":
                raise SemanticsError(f"unbalanced parens: {text!r}")
            return term, i + 1
        # identifier: variable, optionally applied to parenthesised args
        term: Term = Var(tok)
        i += 1
        while i < len(tokens) and tokens[i] == "(":
            args, i = parse_args(i)
            for a in args:
                term = App(term, a)
        return term, i

    def parse_args(i: int) -> tuple[list[Term], int]:
        # tokens[i] == "("
        args: list[Term] = []
        i += 1
        if i < len(tokens) and tokens[i] == ")":
            return args, i + 1
        while True:
            a, i = parse(i)
            args.append(a)
            if i >= len(tokens):
                raise SemanticsError(f"unbalanced parens: {text!r}")
            if tokens[i] == ")":
                return args, i + 1
            if tokens[i] != ",":
                raise SemanticsError(f"expected , or ) in {text!r}")
            i += 1

    term, i = parse(0)
    if i != len(tokens):
        raise SemanticsError(f"trailing tokens in lambda: {text!r}")
    return term


def format_lf(term: Term) -> str:
    """Prefix text form: @Pred(...) with single-quoted strings, bare numbers."""
    if isinstance(term, Str):
        return f"'{term.value}'"
    if isinstance(term, Num):
        return str(term.value)
    if isinstance(term, Pred):
        return f"{term.name}({','.join(format_lf(a) for a in term.args)})"
    raise SemanticsError(f"not a reduced LF: {term!r}")


def parse_lf(text: str) -> Term:
    """Inverse of format_lf (numbers come back as Str, matching the lexer)."""
    term = parse_lambda(text)
    if isinstance(term, Num):
        term = Str(str(term.value))
    term = _nums_to_strs(term)
    if not is_closed_normal(term):
        raise SemanticsError(f"not a closed LF: {text!r}")
    return term


def _nums_to_strs(term: Term) -> Term:
    if isinstance(term, Num):
        return Str(str(term.value))
    if isinstance(term, Pred):
        return Pred(term.name, tuple(_nums_to_strs(a) for a in term.args))
    return term


# ---------------------------------------------------------------------------
# Predicate registry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PredicateSignature:
    name: str
    min_arity: int
    max_arity: int


class PredicateRegistry:
    """Arity bounds for every predicate the lexicon or check rules may use."""

    def __init__(self) -> None:
        self._sigs: dict[str, PredicateSignature] = {}

    def register(self, name: str, min_arity: int, max_arity: int) -> None:
        if not name.startswith("@"):
            raise SemanticsError(f"predicate names start with '@': {name!r}")
        self._sigs[name] = PredicateSignature(name, min_arity, max_arity)

    def __contains__(self, name: str) -> bool:
        return name in self._sigs

    def get(self, name: str) -> PredicateSignature:
        if name not in self._sigs:
            raise SemanticsError(f"unregistered predicate {name}")
        return self._sigs[name]

    def names(self) -> list[str]:
        return sorted(self._sigs)

    def validate(self, term: Term) -> None:
        """Raise unless every Pred node respects its registered arity."""
        for node in iter_preds(term):
            sig = self.get(node.name)
            if not (sig.min_arity <= len(node.args) <= sig.max_arity):
                raise SemanticsError(
                    f"{node.name} used with arity {len(node.args)}, "
                    f"allowed {sig.min_arity}..{sig.max_arity}"
                )

    @classmethod
    def from_file(cls, path) -> "PredicateRegistry":
        reg = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2 or ".." not in parts[1]:
                    raise SemanticsError(f"{path}:{lineno}: expected '@Name lo..hi'")
                lo, hi = parts[1].split("..", 1)
                reg.register(parts[0], int(lo), int(hi))
        return reg


def iter_preds(term: Term) -> Iterator[Pred]:
    if isinstance(term, Pred):
        yield term
        for a in term.args:
            yield from iter_preds(a)
    elif isinstance(term, Lam):
        yield from iter_preds(term.body)
    elif isinstance(term, App):
        yield from iter_preds(term.fn)
        yield from iter_preds(term.arg)


def iter_leaves(term: Term) -> Iterator[Term]:
    """Str/Num leaves of a reduced LF, left to right."""
    if isinstance(term, (Str, Num)):
        yield term
    elif isinstance(term, Pred):
        for a in term.args:
            yield from iter_leaves(a)
