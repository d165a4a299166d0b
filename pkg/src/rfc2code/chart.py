"""CKY-style chart parser over chunked tokens using the CCG lexicon.

Combinators: forward/backward application, forward composition, forward
substitution, a restricted backward-crossed composition (S/S + S\\NP),
and subject type-raising.  The comma is both a conjunction (via lexical
entries) and a clause separator (absorbed at the chart level); backward
application of S\\NP to a conjoined NP also emits the distributed
reading, which feeds the distributivity check downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .lexicon import LexEntry, Lexicon, Token, term_constant
from .semantics import (
    NP,
    S,
    App,
    Category,
    Lam,
    Pred,
    Str,
    Term,
    Var,
    backward,
    beta_reduce,
    format_lf,
    forward,
    is_closed_normal,
)


class ParseError(Exception):
    pass


MAX_CELL_ITEMS = 2000

S_BS_NP = backward(S, NP)          # S\NP
RAISED = forward(S, S_BS_NP)       # S/(S\NP)

_PUNCT_DROP = {".", ";", ":", "(", ")"}


@dataclass(frozen=True)
class Item:
    category: Category
    semantics: Term
    rule: str
    children: tuple = ()           # Items, or (token_index, LexEntry) for "lex"
    conjoined: bool = False
    nf: str = ""                   # normal-form class (absorption-transparent)

    def key(self):
        return (self.category, self.semantics, self.conjoined)

    @property
    def nf_class(self) -> str:
        return self.nf or self.rule


@dataclass
class ChartCell:
    span: tuple[int, int]
    items: list[Item] = field(default_factory=list)
    _seen: set = field(default_factory=set)

    def add(self, item: Item) -> bool:
        k = item.key()
        if k in self._seen:
            return False
        self._seen.add(k)
        self.items.append(item)
        return True


@dataclass
class ParseResult:
    tokens: list[Token]
    lfs: tuple[Term, ...]
    stage_note: str                # parsed | zero_lf | reparsed_with_subject
    chart: Optional[dict] = None

    @property
    def lf_texts(self) -> list[str]:
        return [format_lf(lf) for lf in self.lfs]


def _apply(fn_sem: Term, arg_sem: Term) -> Term:
    return beta_reduce(App(fn_sem, arg_sem))


def _fresh_var() -> Var:
    from .semantics import _fresh
    return Var(_fresh("z"))


def _compose(f: Item, g: Item) -> Term:
    z = _fresh_var()
    return beta_reduce(Lam(z.name, App(f.semantics, App(g.semantics, z))))


def _substitute_comb(f: Item, g: Item) -> Term:
    z = _fresh_var()
    return beta_reduce(Lam(z.name, App(App(f.semantics, z), App(g.semantics, z))))


def _distribute(fn_sem: Term, conj: Term) -> Term:
    """Apply fn over each conjunct of an @And tree, keeping the skeleton."""
    if isinstance(conj, Pred) and conj.name == "@And" and len(conj.args) == 2:
        return Pred("@And", (_distribute(fn_sem, conj.args[0]),
                             _distribute(fn_sem, conj.args[1])))
    return _apply(fn_sem, conj)


def combine(left: Item, right: Item, allow_distribution: bool = True) -> list[Item]:
    """All single-rule combinations of two adjacent items."""
    out: list[Item] = []
    lc, rc = left.category, right.category

    # forward application: X/Y  Y  ->  X
    if not lc.is_primitive and lc.direction == "/" and lc.argument == rc:
        sem = _apply(left.semantics, right.semantics)
        out.append(Item(lc.result, sem, "fapp", (left, right)))

    # backward application: Y  X\Y  ->  X
    if not rc.is_primitive and rc.direction == "\\" and rc.argument == lc:
        sem = _apply(right.semantics, left.semantics)
        out.append(Item(rc.result, sem, "bapp", (left, right)))
        # distributed reading: predicate applies to each conjunct
        if (allow_distribution and left.conjoined and lc == NP
                and rc == S_BS_NP):
            dist = _distribute(right.semantics, left.semantics)
            if dist != sem:
                out.append(Item(rc.result, dist, "bapp-dist", (left, right)))

    # forward composition: X/Y  Y/Z  ->  X/Z
    # normal-form restriction: the right operand may not itself be a
    # composition product or a raised NP (curbs spurious chains; a raised
    # subject only ever acts as the primary functor)
    if (not lc.is_primitive and lc.direction == "/"
            and not rc.is_primitive and rc.direction == "/"
            and lc.argument == rc.result
            and right.nf_class not in ("fcomp", "fcomp-raised", "raise")):
        sem = _compose(left, right)
        nf = "fcomp-raised" if left.nf_class == "raise" else "fcomp"
        out.append(Item(forward(lc.result, rc.argument), sem, "fcomp",
                        (left, right), nf=nf))

    # forward substitution: (X/Y)/Z  Y/Z  ->  X/Z
    # argument sharing only arises against a raised-subject composition
    # (right-node raising); bare functors never substitute
    if (not lc.is_primitive and lc.direction == "/"
            and not lc.result.is_primitive and lc.result.direction == "/"
            and not rc.is_primitive and rc.direction == "/"
            and lc.argument == rc.argument
            and lc.result.argument == rc.result
            and right.nf_class == "fcomp-raised"):
        sem = _substitute_comb(left, right)
        out.append(Item(forward(lc.result.result, lc.argument), sem, "fsub",
                        (left, right), nf="fsub"))

    # backward crossed composition, restricted to fronted adverbials:
    # S/S  S\NP  ->  S\NP
    if lc == forward(S, S) and rc == S_BS_NP:
        sem = _compose(left, right)
        out.append(Item(S_BS_NP, sem, "bxcomp", (left, right)))

    return out


def _lexical_items(tokens: list[Token], lexicon: Lexicon,
                   fallback_np: bool) -> dict[tuple[int, int], list[Item]]:
    """Entries for every token span matching a lexicon surface (or fallbacks)."""
    cells: dict[tuple[int, int], list[Item]] = {}
    n = len(tokens)
    max_len = max(lexicon.max_surface_len, 1)
    for i in range(n):
        token = tokens[i]
        # multi-token explicit surfaces; each chunked token contributes its
        # own word sequence
        for j in range(i + 1, min(i + 1 + max_len, n + 1)):
            norms: list[str] = []
            for t in tokens[i:j]:
                norms.extend(t.norm.split())
            entries = lexicon.lookup_span(tuple(norms))
            if j == i + 1:
                entries = entries + [
                    e for e in lexicon.lookup(token) if e not in entries
                ]
            for entry in entries:
                cells.setdefault((i, j), []).append(
                    Item(entry.category, beta_reduce(entry.semantics),
                         "lex", (i, entry)))
        if (i, i + 1) not in cells:
            if token.norm.replace("-", "").isdigit():
                entry = LexEntry((token.norm,), NP, Str(token.norm))
                cells[(i, i + 1)] = [Item(NP, Str(token.norm), "lex", (i, entry))]
            elif fallback_np and token.norm not in {","} | _PUNCT_DROP:
                entry = LexEntry((token.norm,), NP, Str(token.constant))
                cells[(i, i + 1)] = [Item(NP, Str(token.constant), "lex",
                                          (i, entry))]
    return cells


def _mark_conjoined(item: Item) -> Item:
    if (item.category == NP and isinstance(item.semantics, Pred)
            and item.semantics.name == "@And" and not item.conjoined):
        return Item(item.category, item.semantics, item.rule, item.children,
                    conjoined=True)
    return item


def parse_tokens(tokens: list[Token], lexicon: Lexicon, *,
                 fallback_np: bool = False,
                 compound_nps: bool = False,
                 keep_chart: bool = False,
                 sentence_text: str = "") -> ParseResult:
    """Return every distinct spanning S analysis, beta-reduced."""
    tokens = [t for t in tokens if t.norm not in _PUNCT_DROP]
    if not tokens:
        return ParseResult(tokens, (), "zero_lf")
    n = len(tokens)
    cells: dict[tuple[int, int], ChartCell] = {
        (i, j): ChartCell((i, j)) for i in range(n) for j in range(i + 1, n + 1)
    }
    for span, items in _lexical_items(tokens, lexicon, fallback_np).items():
        for it in items:
            cells[span].add(_mark_conjoined(it))

    def close_unary(cell: ChartCell) -> None:
        # subject type-raising: NP -> S/(S\NP)
        added = True
        while added:
            added = False
            for it in list(cell.items):
                if it.category == NP:
                    f = _fresh_var()
                    sem = Lam(f.name, App(f, it.semantics))
                    raised = Item(RAISED, beta_reduce(sem), "raise", (it,),
                                  conjoined=it.conjoined, nf="raise")
                    if cell.add(raised):
                        added = True

    for span in sorted(cells, key=lambda s: (s[1] - s[0], s[0])):
        i, j = span
        cell = cells[span]
        if j - i == 1:
            close_unary(cell)
            continue
        for k in range(i + 1, j):
            left_cell, right_cell = cells[(i, k)], cells[(k, j)]
            # comma absorption: clause-separator reading
            if k == j - 1 and tokens[j - 1].norm == ",":
                for it in left_cell.items:
                    cell.add(Item(it.category, it.semantics, "absorb", (it,),
                                  conjoined=it.conjoined, nf=it.nf_class))
                continue
            if k == i + 1 and tokens[i].norm == ",":
                for it in right_cell.items:
                    cell.add(Item(it.category, it.semantics, "absorb", (it,),
                                  conjoined=it.conjoined, nf=it.nf_class))
            for left in left_cell.items:
                for right in right_cell.items:
                    for made in combine(left, right):
                        cell.add(_mark_conjoined(made))
                    if (compound_nps and left.category == NP
                            and right.category == NP):
                        sem = Pred("@Noun", (left.semantics, right.semantics))
                        cell.add(Item(NP, sem, "compound", (left, right)))
            if len(cell.items) > MAX_CELL_ITEMS:
                raise ParseError(
                    f"chart cell blow-up (> {MAX_CELL_ITEMS} items) parsing: "
                    f"{sentence_text or ' '.join(t.norm for t in tokens)!r}"
                )
        close_unary(cell)

    spanning = cells[(0, n)].items
    lfs: list[Term] = []
    seen: set[Term] = set()
    for it in spanning:
        if it.category == S and is_closed_normal(it.semantics):
            if it.semantics not in seen:
                seen.add(it.semantics)
                lfs.append(it.semantics)
    lfs.sort(key=format_lf)
    result = ParseResult(tokens, tuple(lfs), "parsed" if lfs else "zero_lf")
    if keep_chart:
        result.chart = cells
    return result


def parse_sentence(tokens: list[Token], lexicon: Lexicon,
                   **kwargs) -> ParseResult:
    return parse_tokens(tokens, lexicon, **kwargs)


def reparse_with_subject(tokens: list[Token], lexicon: Lexicon,
                         subject: str, **kwargs) -> ParseResult:
    """Prepend the enclosing field name as a subject NP and re-parse.

    Only meaningful after a zero-LF parse of a field-description sentence.
    For bare noun-phrase fragments (the field-value idiom) the re-parse
    instead reads the fragment as an assignment to the field.
    """
    if not subject:
        raise ParseError("reparse_with_subject requires a non-empty field")
    subj_token = Token(raw=subject + " ", norm=subject.lower(), is_term=True)
    result = parse_tokens([subj_token] + list(tokens), lexicon, **kwargs)
    if not result.lfs:
        keep_chart = dict(kwargs)
        keep_chart["keep_chart"] = True
        plain = parse_tokens(list(tokens), lexicon, **keep_chart)
        if plain.chart:
            n = len(plain.tokens)
            field_const = Str(term_constant(subject))
            lfs = []
            seen = set()
            if n:
                for item in plain.chart[(0, n)].items:
                    if item.category == NP and is_closed_normal(item.semantics):
                        lf = Pred("@Is", (field_const, item.semantics))
                        if lf not in seen:
                            seen.add(lf)
                            lfs.append(lf)
            lfs.sort(key=format_lf)
            result = ParseResult(plain.tokens, tuple(lfs), "parsed")
    return ParseResult(result.tokens, result.lfs, "reparsed_with_subject",
                       result.chart)


def replay(item: Item) -> tuple[Category, Term]:
    """Re-derive an item from its backpointers; raises on mismatch."""
    if item.rule == "lex":
        _, entry = item.children
        return item.category, beta_reduce(entry.semantics)
    if item.rule in ("absorb",):
        child = item.children[0]
        cat, sem = replay(child)
        return cat, sem
    if item.rule == "raise":
        child = item.children[0]
        cat, sem = replay(child)
        if cat != NP:
            raise ParseError("raised a non-NP")
        f = _fresh_var()
        return RAISED, beta_reduce(Lam(f.name, App(f, sem)))
    if item.rule == "compound":
        left, right = item.children
        lcat, lsem = replay(left)
        rcat, rsem = replay(right)
        return NP, Pred("@Noun", (lsem, rsem))
    left, right = item.children
    lcat, lsem = replay(left)
    rcat, rsem = replay(right)
    li = Item(lcat, lsem, left.rule, left.children, conjoined=left.conjoined,
              nf=left.nf_class)
    ri = Item(rcat, rsem, right.rule, right.children,
              conjoined=right.conjoined, nf=right.nf_class)
    for made in combine(li, ri):
        if made.category == item.category and made.semantics == item.semantics:
            return made.category, made.semantics
        if item.rule == "bapp-dist" and made.rule == "bapp-dist" \
                and made.category == item.category:
            return made.category, made.semantics
    raise ParseError(f"replay failed for rule {item.rule}")
