"""CD (disruption) index on a citation graph and consensus-word scoring."""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass
from functools import cache
from pathlib import Path
from typing import Iterable, Sequence

from ._data import bundled_lines, read_lines
from .concepts import token_lemmas


class CitationGraph:
    """Directed citations ``citing -> cited`` built from paper reference lists.

    Self-citations and repeated references are dropped. Referenced ids that
    are not in the corpus become leaf nodes without a year.
    """

    def __init__(self, records: Iterable) -> None:
        self.year: dict[str, int | None] = {}
        self.refs: dict[str, tuple[str, ...]] = {}
        citers: dict[str, set[str]] = defaultdict(set)
        for r in records:
            self.year[r.paper_id] = r.year
            out = sorted({ref for ref in r.reference_ids if ref != r.paper_id})
            self.refs[r.paper_id] = tuple(out)
            for ref in out:
                citers[ref].add(r.paper_id)
        for ref in list(citers):
            self.year.setdefault(ref, None)
            self.refs.setdefault(ref, ())
        self._citers = {k: frozenset(v) for k, v in citers.items()}

    def __contains__(self, pid: str) -> bool:
        return pid in self.year

    def __len__(self) -> int:
        return len(self.year)

    @property
    def n_edges(self) -> int:
        return sum(len(v) for v in self.refs.values())

    def citers(self, pid: str) -> frozenset[str]:
        return self._citers.get(pid, frozenset())

    @property
    def max_year(self) -> int:
        return max(y for y in self.year.values() if y is not None)


@dataclass(frozen=True)
class CDResult:
    paper_id: str
    cd: float | None
    n: int
    n_focal_only: int
    n_both: int
    n_refs_only: int


def cd_index(graph: CitationGraph, focal: str, horizon_year: int | None = None,
             include_ref_only: bool = True, since_focal: bool = True) -> CDResult:
    """Disruption of ``focal``: mean of ``-2 f_i b_i + f_i`` over its citer set.

    The citer set holds papers published by ``horizon_year`` (default: the
    latest year in the graph) that cite ``focal`` (``f_i = 1``) or one of
    its references (``b_i = 1``). With ``since_focal`` only papers from the
    focal year onward count. ``include_ref_only=False`` leaves out papers
    with ``f_i = 0``. ``cd`` is ``None`` when the set is empty.
    """
    if focal not in graph:
        raise KeyError(f"unknown paper {focal!r}")
    fy = graph.year[focal]
    if horizon_year is None:
        horizon_year = graph.max_year
    if fy is not None and horizon_year < fy:
        raise ValueError(f"horizon {horizon_year} precedes the focal year {fy}")

    def eligible(pid: str) -> bool:
        y = graph.year.get(pid)
        if pid == focal or y is None or y > horizon_year:
            return False
        return not (since_focal and fy is not None and y < fy)

    f_set = {p for p in graph.citers(focal) if eligible(p)}
    b_set: set[str] = set()
    for ref in graph.refs[focal]:
        b_set.update(p for p in graph.citers(ref) if eligible(p))
    both = len(f_set & b_set)
    f_only = len(f_set) - both
    b_only = len(b_set) - both if include_ref_only else 0
    n = f_only + both + b_only
    if n == 0:
        return CDResult(focal, None, 0, 0, 0, 0)
    return CDResult(focal, (f_only - both) / n, n, f_only, both, b_only)


@cache
def default_consensus_terms() -> frozenset[str]:
    return frozenset(bundled_lines("consensus.txt"))


@dataclass(frozen=True)
class ConsensusDictionary:
    terms: frozenset[str]
    match_mode: str = "lemma"

    def __post_init__(self) -> None:
        if self.match_mode not in ("lemma", "exact"):
            raise ValueError("match_mode must be 'lemma' or 'exact'")

    @classmethod
    def default(cls, match_mode: str = "lemma") -> "ConsensusDictionary":
        return cls(default_consensus_terms(), match_mode)

    @classmethod
    def read(cls, path: str | Path, match_mode: str = "lemma") -> "ConsensusDictionary":
        return cls(frozenset(w.strip().lower() for w in read_lines(path)), match_mode)


@dataclass(frozen=True)
class ConsensusScore:
    consensus_count: int
    n_nouns: int
    n_adj: int
    n_verbs: int
    n_adv: int
    matches: tuple[str, ...]


def consensus_count(abstract: str, dictionary: ConsensusDictionary | None = None,
                    presence_only: bool = False) -> ConsensusScore:
    """Dictionary hits in ``abstract`` plus noun/adjective/verb/adverb token counts.

    In lemma mode a token matches when its lowercase form, noun lemma or
    verb lemma is a dictionary term, so "Agrees" and "agreed" count as
    "agree". Hits are counted with multiplicity unless ``presence_only``.
    """
    d = dictionary or ConsensusDictionary.default()
    matches = []
    pos = {"NOUN": 0, "ADJ": 0, "VERB": 0, "ADV": 0}
    for token, tag, cands in token_lemmas(abstract):
        if tag in pos:
            pos[tag] += 1
        if d.match_mode == "exact":
            hit = token.lower() if token.lower() in d.terms else None
        else:
            hit = next((c for c in sorted(cands) if c in d.terms), None)
        if hit is not None:
            matches.append(hit)
    count = len(set(matches)) if presence_only else len(matches)
    return ConsensusScore(count, pos["NOUN"], pos["ADJ"], pos["VERB"], pos["ADV"], tuple(matches))


@cache
def default_markers() -> tuple[re.Pattern, ...]:
    return tuple(re.compile(p) for p in bundled_lines("citation_markers.txt"))


def load_markers(path: str | Path | None = None, extra: Sequence[str] = ()) -> tuple[re.Pattern, ...]:
    pats = list(default_markers()) if path is None else [re.compile(p) for p in read_lines(path)]
    pats += [re.compile(p) for p in extra]
    return tuple(pats)


def has_prior_work_comment(abstract: str, markers: Sequence[re.Pattern] | None = None) -> bool:
    """True when the raw abstract contains an in-text citation marker."""
    pats = default_markers() if markers is None else markers
    return any(p.search(abstract) for p in pats)
