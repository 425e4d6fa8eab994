"""Planted core/periphery graphs and a synthetic corpus with known core turnover."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .concepts.lexicon import lexical_class, noun_lemma
from .ingest import PaperRecord
from .network import ConceptNetwork


def planted_blocks(blocks: Sequence[tuple[int, int]], noise: float = 0.0,
                   rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Adjacency of disjoint idealised blocks ``(n_core, n_periphery)`` plus noise.

    Every core node links to every other node of its block; periphery nodes
    do not link to each other. Each node pair is then flipped independently
    with probability ``noise``. Returns ``(adj, c_true, x_true)`` with
    structures numbered from 1.
    """
    c = np.concatenate([np.full(nc + npr, k + 1) for k, (nc, npr) in enumerate(blocks)])
    x = np.concatenate([np.r_[np.ones(nc, dtype=np.int64), np.zeros(npr, dtype=np.int64)]
                        for nc, npr in blocks])
    same = c[:, None] == c[None, :]
    adj = (same & ((x[:, None] + x[None, :]) > 0)).astype(np.int8)
    np.fill_diagonal(adj, 0)
    if noise > 0:
        rng = rng if rng is not None else np.random.default_rng()
        n = len(c)
        iu, ju = np.triu_indices(n, 1)
        flip = rng.random(len(iu)) < noise
        adj[iu[flip], ju[flip]] ^= 1
        adj[ju[flip], iu[flip]] = adj[iu[flip], ju[flip]]
    return adj, c, x


def planted_network(blocks: Sequence[tuple[int, int]], noise: float = 0.0,
                    rng: np.random.Generator | None = None) -> tuple[ConceptNetwork, np.ndarray, np.ndarray]:
    adj, c, x = planted_blocks(blocks, noise, rng)
    return ConceptNetwork.from_adjacency(adj), c, x


def er_network(n: int, p: float, rng: np.random.Generator) -> ConceptNetwork:
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return ConceptNetwork.from_edges(n, zip(iu[keep], ju[keep]))


_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z", "br", "dr", "gl", "kr", "pl", "tr", "st")
_VOWELS = ("a", "e", "i", "o", "u")
_CODAS = ("k", "m", "n", "p", "t", "x", "r", "nd", "rk", "mp")


def pseudo_words(n: int, rng: np.random.Generator) -> list[str]:
    """``n`` distinct invented nouns that the lexicon tagger reads as plain nouns."""
    out: list[str] = []
    seen: set[str] = set()
    while len(out) < n:
        k = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(k)) + _CODAS[rng.integers(len(_CODAS))]
        if w in seen or lexical_class(w) != "NOUN" or noun_lemma(w) != w:
            continue
        seen.add(w)
        out.append(w)
    return out


_TEMPLATES = (
    "We examine {} and {} in {}.",
    "We find that {} affects {} through {}.",
    "Here {} is linked to {} and {}.",
    "We report {}, {} and {}.",
    "We show that {} can explain {} in {}.",
)
_CONSENSUS = (
    "This is consistent with {} [{}].",
    "This agrees with {} [{}].",
    "We confirm {} as shown before [{}].",
    "This agrees with {} and is consistent with it [{}].",
    "See also {} [{}].",
)


@dataclass(frozen=True)
class DemoTruth:
    """Planted core sets per (subfield, year) and the per-year replacement counts."""

    cores: dict[tuple[str, int], frozenset[str]]
    replaced: dict[tuple[str, int], int]


def demo_corpus(n_papers: int = 200, subfields: Sequence[str] = ("alpha", "beta", "gamma"),
                years: Sequence[int] = tuple(range(2001, 2011)), core_size: int = 8,
                core_per_paper: int = 4, periphery_per_paper: int = 2, max_replaced: int = 4,
                seed: int = 0) -> tuple[list[PaperRecord], DemoTruth]:
    """A corpus whose per-subfield core concepts turn over less and less each year.

    Each subfield starts with ``core_size`` core concepts; in year ``k`` of
    the span, ``round(max_replaced * (1 - k / (K - 1)))`` of them are
    replaced by fresh concepts, so churn falls to zero by the last year.
    Every abstract names ``core_per_paper`` current core concepts and
    ``periphery_per_paper`` periphery concepts, each periphery concept being
    shared by two abstracts of the cell. Papers cite earlier papers and
    some abstracts contain consensus wording with a bracketed citation.
    """
    rng = np.random.default_rng(seed)
    years = list(years)
    cells = [(s, y) for y in years for s in subfields]
    per_cell = np.full(len(cells), n_papers // len(cells))
    per_cell[: n_papers - per_cell.sum()] += 1
    pool = iter(pseudo_words(n_papers * (core_per_paper + periphery_per_paper) + 1000, rng))

    cores: dict[tuple[str, int], frozenset[str]] = {}
    replaced: dict[tuple[str, int], int] = {}
    n_years = len(years)
    for s in subfields:
        current = [next(pool) for _ in range(core_size)]
        for k, y in enumerate(years):
            r = 0 if k == 0 else int(round(max_replaced * (1 - (k - 1) / max(n_years - 2, 1))))
            if r:
                drop = set(rng.choice(core_size, size=r, replace=False).tolist())
                current = [w for i, w in enumerate(current) if i not in drop] + [next(pool) for _ in range(r)]
            cores[(s, y)] = frozenset(current)
            replaced[(s, y)] = r

    records: list[PaperRecord] = []
    serial = 0
    for (s, y), n_cell in zip(cells, per_cell):
        core_list = sorted(cores[(s, y)])
        n_slots = n_cell * periphery_per_paper
        peri = [next(pool) for _ in range((n_slots + 1) // 2)]
        slots = (peri * 2)[:n_slots]
        rng.shuffle(slots)
        for j in range(n_cell):
            chosen = list(rng.choice(core_list, size=core_per_paper, replace=False))
            chosen += slots[j * periphery_per_paper:(j + 1) * periphery_per_paper]
            rng.shuffle(chosen)
            sentences = []
            n_sent = -(-len(chosen) // 3) + int(rng.integers(0, 2))
            for k in range(n_sent):
                group = chosen[3 * k:3 * k + 3]
                while len(group) < 3:
                    group.append(chosen[int(rng.integers(len(chosen)))])
                sentences.append(_TEMPLATES[int(rng.integers(len(_TEMPLATES)))].format(*group))
            if rng.random() < 0.4:
                tmpl = _CONSENSUS[int(rng.integers(len(_CONSENSUS)))]
                sentences.append(tmpl.format(chosen[0], int(rng.integers(1, 40))))
            serial += 1
            earlier = [r.paper_id for r in records if r.year < y]
            n_refs = min(len(earlier), int(rng.integers(0, 6)))
            refs = tuple(sorted(rng.choice(earlier, size=n_refs, replace=False).tolist())) if n_refs else ()
            fields = [s]
            if rng.random() < 0.1:
                fields.append(subfields[int(rng.integers(len(subfields)))])
            records.append(PaperRecord(f"P{serial:05d}", y, tuple(dict.fromkeys(fields)), " ".join(sentences),
                                       int(rng.integers(1, 9)), refs))
    return records, DemoTruth(cores, replaced)
