"""Domain term dictionary, noun-phrase chunking, and the CCG lexicon.

The dictionary holds multi-word domain terms; chunking greedily merges
the longest dictionary match into a single NP token.  The lexicon maps
surface forms (one or more tokens) to category + lambda template pairs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .semantics import (
    NP,
    Category,
    Lam,
    SemanticsError,
    Str,
    Term,
    parse_category,
    parse_lambda,
)


class LexiconError(Exception):
    pass


def normalize_phrase(text: str) -> str:
    """Lowercase, collapse whitespace; used for dictionary keys."""
    return re.sub(r"\s+", " ", text.strip().lower())


def term_constant(phrase: str) -> str:
    """LF leaf spelling of a surface phrase: lowercased, underscored."""
    cleaned = re.sub(r"[^a-z0-9]+", "_", phrase.lower())
    return cleaned.strip("_")


# ---------------------------------------------------------------------------
# Term dictionary
# ---------------------------------------------------------------------------


class TermDictionary:
    """Case-insensitive set of domain noun phrases."""

    def __init__(self, terms: Iterable[str] = ()) -> None:
        self._terms: set[str] = set()
        for t in terms:
            self.add(t)

    def add(self, term: str) -> None:
        norm = normalize_phrase(term)
        if not norm:
            raise LexiconError("empty dictionary term")
        self._terms.add(norm)

    def __contains__(self, phrase: str) -> bool:
        return normalize_phrase(phrase) in self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def terms(self) -> list[str]:
        return sorted(self._terms)

    @property
    def max_words(self) -> int:
        return max((t.count(" ") + 1 for t in self._terms), default=0)


def load_term_dictionary(path) -> TermDictionary:
    """One phrase per line; `#` starts a comment; duplicates collapse."""
    d = TermDictionary()
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                d.add(line)
    return d


# ---------------------------------------------------------------------------
# Tokenization and chunking
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    """A chunked token: `raw` is the exact source slice (with trailing
    whitespace) so that concatenating raws reproduces the sentence."""
    raw: str
    norm: str
    is_term: bool = False   # matched the term dictionary (NP-labeled)

    @property
    def constant(self) -> str:
        return term_constant(self.norm)


_WORD = re.compile(
    r"[A-Za-z0-9](?:[A-Za-z0-9'.\-]*[A-Za-z0-9'])?|=|[,.;:()]")


def _raw_tokens(sentence: str) -> list[tuple[str, str]]:
    """(raw, normalized-word) pairs; raws carry the surrounding gaps so
    that concatenating them reproduces the input."""
    raws: list[tuple[str, str]] = []
    cursor = 0
    for m in _WORD.finditer(sentence):
        raws.append((sentence[cursor:m.end()], m.group(0).lower()))
        cursor = m.end()
    if raws and cursor < len(sentence):
        raw, norm = raws[-1]
        raws[-1] = (raw + sentence[cursor:], norm)
    return raws


def chunk_noun_phrases(sentence: str, dictionary: TermDictionary) -> list[Token]:
    """Greedy longest-match over the dictionary; multi-word hits merge into
    one NP token, everything else passes through unchanged."""
    pairs = _raw_tokens(sentence)
    tokens: list[Token] = []
    i = 0
    limit = max(dictionary.max_words, 1)
    while i < len(pairs):
        matched = 0
        for width in range(min(limit, len(pairs) - i), 0, -1):
            phrase = " ".join(norm for _, norm in pairs[i:i + width])
            if phrase in dictionary:
                matched = width
                break
        if matched:
            raw = "".join(r for r, _ in pairs[i:i + matched])
            norm = " ".join(norm for _, norm in pairs[i:i + matched])
            tokens.append(Token(raw=raw, norm=norm, is_term=True))
            i += matched
        else:
            raw, norm = pairs[i]
            tokens.append(Token(raw=raw, norm=norm))
            i += 1
    return tokens


def plain_tokens(sentence: str) -> list[Token]:
    """Tokenize without any dictionary merging (ablation modes)."""
    return [Token(raw=r, norm=n) for r, n in _raw_tokens(sentence)]


# ---------------------------------------------------------------------------
# Lexicon
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LexEntry:
    surface: tuple[str, ...]        # normalized token sequence
    category: Category
    semantics: Term

    def __str__(self) -> str:
        return f"{' '.join(self.surface)} |- {self.category} : {self.semantics}"


def _leading_abstractions(term: Term) -> int:
    n = 0
    while isinstance(term, Lam):
        n += 1
        term = term.body
    return n


class Lexicon:
    def __init__(self) -> None:
        self._entries: dict[tuple[str, ...], list[LexEntry]] = {}

    def add(self, entry: LexEntry) -> None:
        if entry.semantics is not None:
            arity = _leading_abstractions(entry.semantics)
            slots = entry.category.arity()
            if arity != slots:
                raise LexiconError(
                    f"arity mismatch for {' '.join(entry.surface)!r}: "
                    f"category {entry.category} has {slots} slots, "
                    f"semantics binds {arity}"
                )
        bucket = self._entries.setdefault(entry.surface, [])
        if entry not in bucket:
            bucket.append(entry)

    def lookup(self, token: Token | str) -> list[LexEntry]:
        """Entries for one token. Dictionary-labeled tokens without an
        explicit entry fall back to {NP : '<token>'}."""
        if isinstance(token, str):
            key = (normalize_phrase(token),)
            is_term = False
            constant = term_constant(token)
        else:
            key = tuple(token.norm.split())
            is_term = token.is_term
            constant = token.constant
        explicit = list(self._entries.get(key, ()))
        if explicit:
            return explicit
        if is_term and constant:
            return [LexEntry(key, NP, Str(constant))]
        return []

    def lookup_span(self, norms: tuple[str, ...]) -> list[LexEntry]:
        """Explicit entries whose (multi-token) surface equals the span."""
        return list(self._entries.get(norms, ()))

    @property
    def max_surface_len(self) -> int:
        return max((len(k) for k in self._entries), default=1)

    def entries(self) -> list[LexEntry]:
        out = []
        for key in sorted(self._entries):
            out.extend(self._entries[key])
        return out

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def serialize(self) -> str:
        return "\n".join(str(e) for e in self.entries()) + "\n"


def parse_lexicon_line(line: str, lineno: int = 0, path: str = "<string>") -> LexEntry:
    if "|-" not in line:
        raise LexiconError(f"{path}:{lineno}: missing '|-' separator")
    surface_part, rest = line.split("|-", 1)
    if ":" not in rest:
        raise LexiconError(f"{path}:{lineno}: missing ':' before semantics")
    category_part, lambda_part = rest.split(":", 1)
    surface = tuple(normalize_phrase(surface_part).split())
    if not surface:
        raise LexiconError(f"{path}:{lineno}: empty surface form")
    try:
        category = parse_category(category_part.strip())
        semantics = parse_lambda(lambda_part.strip())
    except SemanticsError as exc:
        raise LexiconError(f"{path}:{lineno}: {exc}") from exc
    return LexEntry(surface, category, semantics)


def load_lexicon(path, registry=None) -> Lexicon:
    """Load `surface |- CATEGORY : lambda` lines; `#` comments allowed."""
    lex = Lexicon()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            entry = parse_lexicon_line(line, lineno, str(path))
            try:
                lex.add(entry)
            except LexiconError as exc:
                raise LexiconError(f"{path}:{lineno}: {exc}") from exc
            if registry is not None:
                from .semantics import iter_preds
                for pred in iter_preds(entry.semantics):
                    if pred.name not in registry:
                        raise LexiconError(
                            f"{path}:{lineno}: unregistered predicate {pred.name}"
                        )
    return lex


def loads_lexicon(text: str, registry=None) -> Lexicon:
    lex = Lexicon()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        lex.add(parse_lexicon_line(line, lineno))
    return lex
