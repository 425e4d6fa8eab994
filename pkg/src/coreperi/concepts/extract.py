"""Noun-phrase concepts from abstract text.

Pipeline: strip markup, tokenize, tag with the lexicon tagger, chunk maximal
``(ADJ|NOUN)* NOUN`` runs, drop stopword tokens, lemmatize nouns, rejoin,
remove the strip-set punctuation, lowercase, and discard phrases of two or
fewer characters or without letters. Each abstract yields a set, so
repeated phrases count once.
"""
from __future__ import annotations

import html
import re
import unicodedata
from dataclasses import dataclass
from functools import cache
from typing import Callable, Iterable, Protocol, Sequence

from .._data import bundled_lines, read_lines
from .lexicon import FUNCTION_TAGS, lexical_class, noun_lemma, verb_lemma

# characters removed from concept strings
STRIP_CHARS = "!'#$%&,.:;?@][`_{}~()-”/\"“‘’"
_STRIP_TABLE = str.maketrans({ch: " " for ch in STRIP_CHARS})

_TAG_RE = re.compile(r"<[^>]*>")
_TOKEN_RE = re.compile(r"['’]s\b|[^\W_]+|[^\w\s]|_")
_NOMINAL = frozenset({"NOUN", "ADJ", "AN", "NV", "NVs", "ED", "ING"})


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def normalize_text(text: str) -> str:
    """Drop html/xml tags, then unescape entities and collapse whitespace."""
    text = _TAG_RE.sub(" ", text)
    text = html.unescape(text)
    text = unicodedata.normalize("NFKC", text)
    return " ".join(text.split())


def tokenize(text: str) -> list[Token]:
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _glue_class(tokens: Sequence[Token], k: int) -> str | None:
    """Hyphens and possessive 's sitting between two word tokens do not break a phrase."""
    tok = tokens[k]
    if tok.text in ("-", "‐", "‑") and 0 < k < len(tokens) - 1:
        if tokens[k - 1].end == tok.start and tokens[k + 1].start == tok.end:
            return "HYPH"
    if tok.text.lower() in ("'s", "’s"):
        return "POS"
    return None


def tag_tokens(tokens: Sequence[Token]) -> list[str]:
    """Universal POS tags for ``tokens`` (NOUN, ADJ, VERB, ADV, DET, ...).

    Lexicon lookups give each word a class; ambiguous classes are resolved
    from the neighbouring classes only, so a phrase re-tagged on its own
    gets the same tags it had inside a sentence.
    """
    n = len(tokens)
    pre: list[str] = []
    for k, tok in enumerate(tokens):
        glue = _glue_class(tokens, k)
        if glue is not None:
            pre.append(glue)
        elif not tok.text[0].isalnum():
            pre.append("PUNCT")
        else:
            cap = tok.text[0].isupper() and k > 0 and tokens[k - 1].text not in ".!?"
            pre.append(lexical_class(tok.text.lower(), capitalized=cap))

    def prev_of(k: int) -> str | None:
        j = k - 1
        while j >= 0 and pre[j] in ("HYPH", "POS"):
            j -= 1
        return pre[j] if j >= 0 else None

    def next_of(k: int) -> str | None:
        j = k + 1
        while j < n and pre[j] in ("HYPH", "POS"):
            j += 1
        return pre[j] if j < n else None

    out = []
    for k, cls in enumerate(pre):
        prev, nxt = prev_of(k), next_of(k)
        if cls in ("NV", "NVs"):
            if prev in ("DET", "ADJ", "ADP", "NUM", "AN"):
                cls = "NOUN"
            elif nxt in ("DET", "PRON"):
                cls = "VERB"
            elif prev in ("PRON", "AUX", "ADV") or (prev == "PART" and cls == "NV"):
                cls = "VERB"
            else:
                cls = "NOUN"
        elif cls == "AN":
            cls = "ADJ" if (nxt in _NOMINAL or prev == "AUX") else "NOUN"
        elif cls == "ED":
            if prev in ("PRON", "AUX", "ADV", "PART"):
                cls = "VERB"
            else:
                cls = "ADJ" if nxt in _NOMINAL else "VERB"
        elif cls == "ING":
            if prev in ("AUX", "PRON") or nxt in ("DET", "PRON", "NUM"):
                cls = "VERB"
            else:
                cls = "ADJ" if nxt in _NOMINAL else "NOUN"
        out.append(cls)
    return out


class Chunker(Protocol):
    def __call__(self, text: str) -> list[list[tuple[str, str]]]: ...


def lexicon_chunks(text: str) -> list[list[tuple[str, str]]]:
    """Maximal ``(ADJ|NOUN)* NOUN`` runs as lists of ``(token, tag)``."""
    tokens = tokenize(text)
    tags = tag_tokens(tokens)
    chunks: list[list[tuple[str, str]]] = []
    run: list[tuple[str, str]] = []

    def flush() -> None:
        last = max((k for k, (_, t) in enumerate(run) if t == "NOUN"), default=-1)
        if last >= 0:
            chunks.append(run[:last + 1])
        run.clear()

    for tok, tag in zip(tokens, tags):
        if tag in ("NOUN", "ADJ"):
            run.append((tok.text, tag))
        elif tag in ("HYPH", "POS") and run:
            continue
        else:
            flush()
    flush()
    return chunks


@cache
def default_stopwords() -> frozenset[str]:
    return frozenset(w.lower() for w in bundled_lines("stopwords.txt"))


def load_stopwords(path: str | None = None, extra: Iterable[str] = ()) -> frozenset[str]:
    words = set(default_stopwords())
    if path is not None:
        words.update(w.strip().lower() for w in read_lines(path))
    words.update(w.lower() for w in extra)
    return frozenset(words)


def clean_phrase(phrase: str) -> str | None:
    """Strip punctuation, lowercase and apply the length/letter filters."""
    phrase = " ".join(phrase.translate(_STRIP_TABLE).lower().split())
    if len(phrase) <= 2 or not any(ch.isalpha() for ch in phrase):
        return None
    return phrase


def _token_lemma(token: str, tag: str) -> str:
    low = token.lower()
    return noun_lemma(low) if tag == "NOUN" else low


def extract_concepts(abstract: str, stopwords: frozenset[str] | None = None,
                     chunker: Callable[[str], list[list[tuple[str, str]]]] = lexicon_chunks) -> set[str]:
    """Deduplicated noun-phrase concepts of one abstract."""
    stop = default_stopwords() if stopwords is None else stopwords
    text = normalize_text(abstract)
    found: set[str] = set()
    for chunk in chunker(text):
        words = [_token_lemma(tok, tag) for tok, tag in chunk if tok.lower() not in stop]
        if not words:
            continue
        phrase = clean_phrase(" ".join(words))
        if phrase is not None:
            found.add(phrase)
    return found


def token_lemmas(text: str) -> list[tuple[str, str, set[str]]]:
    """``(token, tag, candidate lemmas)`` for every word token of ``text``."""
    tokens = tokenize(normalize_text(text))
    tags = tag_tokens(tokens)
    out = []
    for tok, tag in zip(tokens, tags):
        if not tok.text[0].isalnum():
            continue
        low = tok.text.lower()
        cands = {low, noun_lemma(low)}
        v = verb_lemma(low)
        if v is not None:
            cands.add(v)
        out.append((tok.text, tag, cands))
    return out
