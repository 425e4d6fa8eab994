"""Concept co-occurrence networks for one (subfield, window) cell."""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

Cell = tuple[str, int]


class DegenerateNetworkError(ValueError):
    """Raised when a quantity is undefined for a network that is too small."""


@dataclass(frozen=True, eq=False)
class ConceptNetwork:
    """Undirected simple graph over concept labels.

    ``edges`` is an ``(M, 2)`` integer array with ``i < j`` per row, rows
    sorted. Node ``k`` carries label ``labels[k]``. ``weights`` holds raw
    co-occurrence counts and is metadata only; detection treats the graph
    as binary.
    """

    labels: tuple[str, ...]
    edges: np.ndarray
    cell: Cell | None = None
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            e = np.sort(e, axis=1)
            order = np.lexsort((e[:, 1], e[:, 0]))
            e = e[order]
            if np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise ValueError("parallel edges are not allowed")
            if e.min() < 0 or e.max() >= len(self.labels):
                raise ValueError("edge endpoint out of range")
            if self.weights is not None:
                object.__setattr__(self, "weights", np.asarray(self.weights)[order])
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_edges(cls, n_or_labels: int | Sequence[str], edges: Iterable[tuple[int, int]],
                   cell: Cell | None = None) -> "ConceptNetwork":
        if isinstance(n_or_labels, int):
            labels = tuple(str(i) for i in range(n_or_labels))
        else:
            labels = tuple(n_or_labels)
        arr = np.array(list(edges), dtype=np.int64).reshape(-1, 2)
        return cls(labels, arr, cell)

    @classmethod
    def from_adjacency(cls, adj: np.ndarray, labels: Sequence[str] | None = None,
                       cell: Cell | None = None) -> "ConceptNetwork":
        adj = np.asarray(adj)
        i, j = np.nonzero(np.triu(adj, k=1))
        n = adj.shape[0]
        return cls(tuple(labels) if labels is not None else tuple(str(k) for k in range(n)),
                   np.column_stack([i, j]), cell)

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    N = n_nodes
    M = n_edges

    @property
    def is_empty(self) -> bool:
        return self.n_nodes == 0

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_nodes).astype(np.int64)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` neighbour arrays, neighbours sorted per node."""
        n = self.n_nodes
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        order = np.lexsort((dst, src))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return indptr, dst[order].astype(np.int64)

    def neighbors(self, i: int) -> np.ndarray:
        indptr, indices = self.csr
        return indices[indptr[i]:indptr[i + 1]]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes), dtype=np.int8)
        a[self.edges[:, 0], self.edges[:, 1]] = 1
        a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.edges}

    def label_edges(self) -> set[frozenset[str]]:
        return {frozenset((self.labels[a], self.labels[b])) for a, b in self.edges}


def empty_network(cell: Cell | None = None) -> ConceptNetwork:
    return ConceptNetwork((), np.empty((0, 2), dtype=np.int64), cell)


def build_network(papers: Iterable, vocab, concepts: Mapping[str, Iterable[str]] | None = None,
                  cell: Cell | None = None) -> ConceptNetwork:
    """Link two vocabulary concepts whenever they share an abstract.

    ``concepts`` maps ``paper_id`` to that paper's extracted concepts; when
    omitted they are extracted from each abstract on the fly. Concepts with
    no co-occurring partner in the cell are dropped. An empty network is
    returned (``is_empty``) when nothing survives.
    """
    from .concepts import extract_concepts

    keep = vocab.concepts if hasattr(vocab, "concepts") else set(vocab)
    counts: Counter[tuple[str, str]] = Counter()
    n_papers = 0
    for paper in papers:
        n_papers += 1
        if concepts is not None:
            found = concepts.get(paper.paper_id, ())
        else:
            found = extract_concepts(paper.abstract)
        present = sorted(set(found) & keep)
        counts.update(combinations(present, 2))
    if n_papers == 0:
        raise ValueError("build_network needs at least one paper")
    if not counts:
        log.info("cell %s: no co-occurring vocabulary concepts, skipping", cell)
        return empty_network(cell)

    labels = sorted({c for pair in counts for c in pair})
    index = {c: k for k, c in enumerate(labels)}
    pairs = sorted(counts)
    edges = np.array([(index[a], index[b]) for a, b in pairs], dtype=np.int64)
    weights = np.array([counts[p] for p in pairs], dtype=np.int64)
    return ConceptNetwork(tuple(labels), edges, cell, weights)


def edge_density(net: ConceptNetwork) -> float:
    n = net.n_nodes
    if n < 2:
        raise DegenerateNetworkError(f"edge density undefined for N={n}")
    return net.n_edges / (n * (n - 1) / 2)


def write_edgelist(net: ConceptNetwork, path: str | Path) -> None:
    """Write ``concept_a<TAB>concept_b`` lines under a small ``#`` header."""
    cell = net.cell if net.cell is not None else ("", "")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# cell\t{cell[0]}\t{cell[1]}\n")
        fh.write(f"# N\t{net.n_nodes}\n# M\t{net.n_edges}\n")
        for a, b in net.edges:
            fh.write(f"{net.labels[a]}\t{net.labels[b]}\n")


def read_edgelist(path: str | Path) -> ConceptNetwork:
    header: dict[str, list[str]] = {}
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# "):
                key, *vals = line[2:].split("\t")
                header[key] = vals
                continue
            a, b = line.split("\t")
            pairs.append((a, b))
    labels = sorted({c for p in pairs for c in p})
    index = {c: k for k, c in enumerate(labels)}
    cell = None
    if "cell" in header and header["cell"][0]:
        cell = (header["cell"][0], int(header["cell"][1]))
    net = ConceptNetwork(tuple(labels), np.array([(index[a], index[b]) for a, b in pairs],
                                                 dtype=np.int64), cell)
    if "N" in header and int(header["N"][0]) != net.n_nodes:
        raise ValueError(f"{path}: header N={header['N'][0]} but edges span {net.n_nodes} nodes")
    if "M" in header and int(header["M"][0]) != net.n_edges:
        raise ValueError(f"{path}: header M={header['M'][0]} but found {net.n_edges} edges")
    return net
