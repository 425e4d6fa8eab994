"""Word classes and lemmas from the bundled lexicon tables.

Everything here is a pure function of the word and the data files, so
results are reproducible across machines.
"""
from __future__ import annotations

from functools import cache

from .._data import bundled_lines

FUNCTION_TAGS = frozenset({"DET", "PRON", "ADP", "CONJ", "AUX", "PART", "NUM", "ADV"})
_ADJ_SUFFIXES = ("ous", "ive", "able", "ible", "ical", "ful", "less", "ish", "ular", "ial", "ic")
_VERB_SUFFIXES = ("ize", "ise", "ify", "izes", "ises", "ifies")


@cache
def lexicon() -> dict[str, frozenset[str]]:
    table = {}
    for line in bundled_lines("lexicon.tsv"):
        word, tags = line.split("\t")
        table[word] = frozenset(tags.split(","))
    return table


@cache
def _exceptions() -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {"NOUN": {}, "VERB": {}}
    for line in bundled_lines("lemma_exceptions.tsv"):
        form, lemma, pos = line.split("\t")
        out[pos][form] = lemma
    return out


@cache
def noun_invariants() -> frozenset[str]:
    return frozenset(bundled_lines("noun_invariants.txt"))


def is_verb(word: str) -> bool:
    return "VERB" in lexicon().get(word, ())


def noun_lemma(word: str) -> str:
    """Singular form of a (lowercase) noun.

    Irregular plurals come from the exception table; otherwise -ies, -sses,
    -xes/-ches/-shes/-zzes and plain -s are stripped, leaving words in
    -ss/-us/-is and the invariant list untouched.
    """
    irregular = _exceptions()["NOUN"]
    if word in irregular:
        return irregular[word]
    if word in noun_invariants() or len(word) <= 3 or not word.isalpha():
        return word
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith(("xes", "ches", "shes", "zzes")):
        return word[:-2]
    if word.endswith(("ss", "us", "is")):
        return word
    if word.endswith("s"):
        return word[:-1]
    return word


def _undouble(stem: str) -> str:
    if len(stem) > 2 and stem[-1] == stem[-2] and stem[-1] not in "aeiouls":
        return stem[:-1]
    return stem


def verb_lemma(word: str) -> str | None:
    """Base form of an inflected verb, or ``None`` when no known verb fits.

    Candidates produced by suffix stripping are accepted only if the lexicon
    lists them as verbs, which keeps e.g. ``"coupled"`` from turning into an
    invented stem.
    """
    irregular = _exceptions()["VERB"]
    if word in irregular:
        return irregular[word]
    if is_verb(word):
        return word
    cands: list[str] = []
    if word.endswith("ies"):
        cands.append(word[:-3] + "y")
    elif word.endswith("es"):
        cands += [word[:-1], word[:-2]]
    elif word.endswith("s") and not word.endswith("ss"):
        cands.append(word[:-1])
    elif word.endswith("ied"):
        cands.append(word[:-3] + "y")
    elif word.endswith("ed"):
        cands += [word[:-1], word[:-2], _undouble(word[:-2])]
    elif word.endswith("ing") and len(word) > 4:
        stem = word[:-3]
        cands += [stem, stem + "e", _undouble(stem)]
    for cand in cands:
        if is_verb(cand):
            return cand
    return None


def lexical_class(word: str, capitalized: bool = False) -> str:
    """Context-free class of a word token.

    Returns a universal tag, or one of the ambiguity markers resolved by the
    tagger from context: ``NV`` (noun or verb), ``NVs`` (their -s form),
    ``AN`` (adjective or noun), ``ED`` and ``ING`` (participles).
    """
    lex = lexicon()
    tags = lex.get(word)
    if tags is not None:
        return _class_from_tags(tags)
    if word.isdigit():
        return "NUM"
    if not any(ch.isalpha() for ch in word):
        return "NUM"
    base = verb_lemma(word)
    if word in _exceptions()["VERB"]:
        return "ED"
    if word.endswith("s") and not word.endswith("ss"):
        nl = noun_lemma(word)
        if nl != word and nl in lex:
            cls = _class_from_tags(lex[nl])
            if cls == "NV":
                return "NVs"
            if cls in ("NOUN", "AN", "ADJ"):
                return "NOUN"
        if base is not None:
            return "VERB"
    if word.endswith("ing") and len(word) > 5:
        return "ING"
    if word.endswith("ed") and not word.endswith("eed") and len(word) > 4:
        return "ED"
    if capitalized:
        return "NOUN"
    if word.endswith("ly") and len(word) > 4:
        return "ADV"
    if word.endswith(_VERB_SUFFIXES):
        return "VERB"
    if word.endswith("al"):
        return "AN"
    if word.endswith(_ADJ_SUFFIXES):
        return "ADJ"
    return "NOUN"


def _class_from_tags(tags: frozenset[str]) -> str:
    if len(tags) == 1:
        return next(iter(tags))
    if "VERB" in tags and "NOUN" in tags:
        return "NV"
    if "ADJ" in tags and "NOUN" in tags:
        return "AN"
    return sorted(tags)[0]
