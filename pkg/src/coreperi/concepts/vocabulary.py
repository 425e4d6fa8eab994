"""Corpus-level concept vocabulary and per-concept profiles."""
from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .extract import extract_concepts

log = logging.getLogger(__name__)

THRESHOLD_MODES = ("proportional", "min_count")


@dataclass(frozen=True)
class ConceptVocabulary:
    """Concepts surviving the document-frequency thresholds.

    ``doc_freq`` covers the kept concepts only; ``total_abstracts`` is the
    number of abstracts the frequencies were counted over.
    """

    concepts: frozenset[str]
    doc_freq: Mapping[str, int]
    total_abstracts: int
    threshold_mode: str

    def __contains__(self, concept: str) -> bool:
        return concept in self.concepts

    def __len__(self) -> int:
        return len(self.concepts)

    def write(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# total_abstracts\t{self.total_abstracts}\n")
            fh.write(f"# threshold_mode\t{self.threshold_mode}\n")
            for c in sorted(self.concepts):
                fh.write(f"{c}\t{self.doc_freq[c]}\n")

    @classmethod
    def read(cls, path: str | Path) -> "ConceptVocabulary":
        meta: dict[str, str] = {}
        freq: dict[str, int] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("# "):
                    key, val = line[2:].split("\t")
                    meta[key] = val
                elif line:
                    c, df = line.split("\t")
                    freq[c] = int(df)
        return cls(frozenset(freq), freq, int(meta["total_abstracts"]), meta["threshold_mode"])


def extract_corpus(records: Iterable, stopwords: frozenset[str] | None = None) -> dict[str, frozenset[str]]:
    """Concept set per ``paper_id``."""
    return {r.paper_id: frozenset(extract_concepts(r.abstract, stopwords)) for r in records}


def build_vocabulary(records_or_concepts, mode: str = "proportional", *,
                     bounds: tuple[float, float] = (0.001, 0.01), min_count: int = 10,
                     stopwords: frozenset[str] | None = None) -> ConceptVocabulary:
    """Apply the document-frequency threshold over a whole corpus.

    ``records_or_concepts`` is either an iterable of paper records or a
    mapping ``paper_id -> concepts`` from :func:`extract_corpus`. In
    proportional mode a concept is kept when ``lo < df / n < hi`` (strict);
    in min_count mode when ``df >= min_count``.
    """
    if mode not in THRESHOLD_MODES:
        raise ValueError(f"unknown threshold mode {mode!r}; expected one of {THRESHOLD_MODES}")
    if isinstance(records_or_concepts, Mapping):
        per_doc = records_or_concepts.values()
    else:
        per_doc = extract_corpus(records_or_concepts, stopwords).values()
    counts: Counter[str] = Counter()
    n = 0
    for concepts in per_doc:
        n += 1
        counts.update(set(concepts))
    if n == 0:
        raise ValueError("build_vocabulary needs at least one record")
    if mode == "proportional":
        lo, hi = bounds
        keep = {c: df for c, df in counts.items() if lo < df / n < hi}
    else:
        keep = {c: df for c, df in counts.items() if df >= min_count}
    if not keep:
        log.warning("all %d concepts pruned by the %s threshold; vocabulary is empty", len(counts), mode)
    return ConceptVocabulary(frozenset(keep), dict(sorted(keep.items())), n, mode)


@dataclass(frozen=True)
class ConceptProfile:
    concept: str
    n_words: int
    n_chars: int
    n_digits: int
    n_subfields: int
    n_papers: int
    core_share: float

    @property
    def is_core(self) -> bool:
        return self.core_share > 0.5


def profile_concepts(vocab: ConceptVocabulary, assignments: Mapping[tuple[str, int], tuple]) -> list[ConceptProfile]:
    """String and usage properties of every concept seen in a detected network.

    ``assignments`` maps each cell ``(subfield, year)`` to its
    ``(ConceptNetwork, CpAssignment)`` pair. ``core_share`` is the fraction
    of the concept's cell appearances in which it was a core node.
    """
    seen: Counter[str] = Counter()
    core: Counter[str] = Counter()
    subfields: dict[str, set[str]] = defaultdict(set)
    for (subfield, _year), (net, asg) in assignments.items():
        for label, xi in zip(net.labels, asg.x):
            seen[label] += 1
            core[label] += int(xi)
            subfields[label].add(subfield)
    missing = [c for c in vocab.concepts if c not in seen]
    if missing:
        log.warning("%d vocabulary concepts never appear in a network; excluded from profiles", len(missing))
    out = []
    for c in sorted(seen):
        out.append(ConceptProfile(
            concept=c,
            n_words=c.count(" ") + 1,
            n_chars=sum(1 for ch in c if ch != " "),
            n_digits=sum(ch.isdigit() for ch in c),
            n_subfields=len(subfields[c]),
            n_papers=int(vocab.doc_freq.get(c, 0)),
            core_share=core[c] / seen[c],
        ))
    return out


def split_core_periphery(profiles: Iterable[ConceptProfile]) -> tuple[list[ConceptProfile], list[ConceptProfile]]:
    core, periphery = [], []
    for p in profiles:
        (core if p.is_core else periphery).append(p)
    return core, periphery
