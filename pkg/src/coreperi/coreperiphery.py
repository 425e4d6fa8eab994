"""Multiple core/periphery detection by label switching.

The objective for a labelling ``(c, x)`` of an undirected graph with ``N``
nodes, ``M`` edges and density ``p = M / P`` (``P = N(N-1)/2``) is

    Q(c, x) = sum_{i>j} (A_ij - p) (x_i + x_j - x_i x_j) delta(c_i, c_j)

Inside the solver every quantity is multiplied by ``P`` so increments are
exact integers (``P * edges - M * pairs``); floats only appear at the API
boundary.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from ._random import derive_seed
from .network import ConceptNetwork

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    n_restarts: int = 10
    rng_seed: int = 0
    sig_alpha: float = 0.05
    sig_samples: int = 100
    single_core_mode: bool = False
    significance: bool = True
    n_kicks: int = 1000
    merge_structures: bool = True

    def __post_init__(self) -> None:
        if self.n_restarts < 1:
            raise ConfigError("n_restarts must be >= 1")
        if self.n_kicks < 0:
            raise ConfigError("n_kicks must be >= 0")
        if not 0.0 < self.sig_alpha < 1.0:
            raise ConfigError("sig_alpha must lie in (0, 1)")
        if self.significance and self.sig_samples < 100:
            raise ConfigError("sig_samples must be >= 100 when significance testing is enabled")


@dataclass(frozen=True, eq=False)
class CpAssignment:
    """Per-node structure index ``c`` (1..C) and coreness ``x`` (0/1).

    Structures are numbered by descending size. ``structure_sig`` is empty
    until :func:`count_significant` has run; ``structure_quality`` holds each
    structure's additive share of ``qcp`` divided by its node count.
    """

    c: np.ndarray
    x: np.ndarray
    qcp: float
    structure_quality: np.ndarray = field(repr=False)
    structure_sig: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    null_threshold: float | None = None

    @property
    def n_structures(self) -> int:
        return int(self.c.max()) if len(self.c) else 0

    @property
    def n_significant(self) -> int:
        return int(np.count_nonzero(self.structure_sig))

    @property
    def n_nodes(self) -> int:
        return len(self.c)

    def structure_sizes(self) -> np.ndarray:
        return np.bincount(self.c, minlength=self.n_structures + 1)[1:]

    def core_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.x == 1)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.c == k)

    def same_as(self, other: "CpAssignment") -> bool:
        return (np.array_equal(self.c, other.c) and np.array_equal(self.x, other.x)
                and self.qcp == other.qcp and np.array_equal(self.structure_sig, other.structure_sig))


def ideal_block(c, x, i: int, j: int) -> int:
    """Idealised adjacency between ``i`` and ``j`` for the labelling."""
    if i == j:
        return 0
    if x[i] == 1 or x[j] == 1:
        return int(c[i] == c[j])
    return 0


def _pair_count(n: int) -> int:
    return n * (n - 1) // 2


def _structure_terms(net: ConceptNetwork, c: np.ndarray, x: np.ndarray):
    """Per-structure (matched edge count, idealised pair count)."""
    c = np.asarray(c, dtype=np.int64)
    x = np.asarray(x, dtype=np.int64)
    k = int(c.max()) + 1 if len(c) else 1
    e = net.edges
    same = c[e[:, 0]] == c[e[:, 1]]
    touched = (x[e[:, 0]] | x[e[:, 1]]).astype(bool)
    matched = np.bincount(c[e[:, 0]][same & touched], minlength=k)
    size = np.bincount(c, minlength=k)
    core = np.bincount(c, weights=x, minlength=k).astype(np.int64)
    per = size - core
    pairs = size * (size - 1) // 2 - per * (per - 1) // 2
    return matched.astype(np.int64), pairs.astype(np.int64)


def qcp_scaled(net: ConceptNetwork, c, x) -> int:
    """``P * Q(c, x)`` as an exact integer."""
    n, m = net.n_nodes, net.n_edges
    big_p = _pair_count(n)
    if big_p == 0:
        return 0
    matched, pairs = _structure_terms(net, c, x)
    return int(big_p * matched.sum() - m * pairs.sum())


def qcp(net: ConceptNetwork, c, x) -> float:
    big_p = _pair_count(net.n_nodes)
    if big_p == 0:
        return 0.0
    return qcp_scaled(net, c, x) / big_p


def structure_contributions(net: ConceptNetwork, c, x) -> np.ndarray:
    """Additive share of ``qcp`` per structure label (index = label)."""
    big_p = _pair_count(net.n_nodes)
    matched, pairs = _structure_terms(net, c, x)
    if big_p == 0:
        return np.zeros_like(matched, dtype=float)
    return (big_p * matched - net.n_edges * pairs) / big_p


def label_counts(net: ConceptNetwork, c, x, i: int):
    """Neighbour label counts ``d[(c, x)]`` of node ``i`` and global ``N[(c, x)]``."""
    d: dict[tuple[int, int], int] = {}
    for j in net.neighbors(i):
        key = (int(c[j]), int(x[j]))
        d[key] = d.get(key, 0) + 1
    counts: dict[tuple[int, int], int] = {}
    for ck, xk in zip(c, x):
        key = (int(ck), int(xk))
        counts[key] = counts.get(key, 0) + 1
    return d, counts


def increment(net: ConceptNetwork, c, x, i: int, new_c: int, new_x: int) -> float:
    """Closed-form change in ``qcp`` when node ``i`` moves to ``(new_c, new_x)``.

    Counts are taken with ``i`` still at its current label; the bracketed
    ``-delta(c, c')`` and ``-x`` terms remove ``i`` itself from them.
    """
    n = net.n_nodes
    p = net.n_edges / _pair_count(n)
    old_c, old_x = int(c[i]), int(x[i])
    if (old_c, old_x) == (new_c, new_x):
        return 0.0
    d, counts = label_counts(net, c, x, i)

    def dd(k, v):
        return d.get((k, v), 0)

    def nn(k, v):
        return counts.get((k, v), 0)

    gain = (dd(new_c, 1) + new_x * dd(new_c, 0)
            - p * (nn(new_c, 1) + new_x * nn(new_c, 0) - int(old_c == new_c)))
    loss = (dd(old_c, 1) + old_x * dd(old_c, 0)
            - p * (nn(old_c, 1) + old_x * nn(old_c, 0) - old_x))
    return gain - loss


@njit(cache=True)
def _seed_kernel(seed):
    np.random.seed(seed)


@njit(cache=True)
def _switch(indptr, indices, n, m, c, x, single_core):
    """Label switching sweeps until a full scan makes no move.

    Mutates ``c`` and ``x``; returns the summed (scaled) increments.
    """
    big_p = n * (n - 1) // 2
    n_core = np.zeros(n, dtype=np.int64)
    n_per = np.zeros(n, dtype=np.int64)
    for i in range(n):
        if x[i] == 1:
            n_core[c[i]] += 1
        else:
            n_per[c[i]] += 1
    d_core = np.zeros(n, dtype=np.int64)
    d_per = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=np.bool_)
    touched = np.empty(n + 1, dtype=np.int64)
    total_gain = 0
    while True:
        changed = False
        order = np.random.permutation(n)
        for i in order:
            ci = c[i]
            xi = x[i]
            k = 0
            for e in range(indptr[i], indptr[i + 1]):
                j = indices[e]
                cj = c[j]
                if not seen[cj]:
                    seen[cj] = True
                    touched[k] = cj
                    k += 1
                if x[j] == 1:
                    d_core[cj] += 1
                else:
                    d_per[cj] += 1
            if single_core and not seen[ci]:
                seen[ci] = True
                touched[k] = ci
                k += 1
            current = big_p * (d_core[ci] + xi * d_per[ci]) - m * (n_core[ci] + xi * n_per[ci] - xi)
            best = 0
            best_c = -1
            best_x = -1
            n_ties = 0
            for t in range(k):
                cc = touched[t]
                for xx in (1, 0):
                    if cc == ci and xx == xi:
                        continue
                    own = 1 if cc == ci else 0
                    cand = big_p * (d_core[cc] + xx * d_per[cc]) - m * (n_core[cc] + xx * n_per[cc] - own)
                    delta = cand - current
                    if delta > best:
                        best = delta
                        best_c = cc
                        best_x = xx
                        n_ties = 1
                    elif delta == best and best > 0:
                        # uniform choice among equally good moves (reservoir sampling)
                        n_ties += 1
                        if np.random.random() * n_ties < 1.0:
                            best_c = cc
                            best_x = xx
            for t in range(k):
                cc = touched[t]
                d_core[cc] = 0
                d_per[cc] = 0
                seen[cc] = False
            if best > 0:
                if xi == 1:
                    n_core[ci] -= 1
                else:
                    n_per[ci] -= 1
                if best_x == 1:
                    n_core[best_c] += 1
                else:
                    n_per[best_c] += 1
                c[i] = best_c
                x[i] = best_x
                total_gain += best
                changed = True
        if not changed:
            break
    return total_gain


@njit(cache=True)
def _score(indptr, indices, n, m, c, x):
    big_p = n * (n - 1) // 2
    matched = 0
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j > i and c[i] == c[j] and (x[i] == 1 or x[j] == 1):
                matched += 1
    size = np.zeros(n, dtype=np.int64)
    per = np.zeros(n, dtype=np.int64)
    for i in range(n):
        size[c[i]] += 1
        if x[i] == 0:
            per[c[i]] += 1
    pairs = 0
    for k in range(n):
        pairs += size[k] * (size[k] - 1) // 2 - per[k] * (per[k] - 1) // 2
    return big_p * matched - m * pairs


@njit(cache=True)
def _merge(indptr, indices, n, m, c, x):
    """One round of disjoint, strictly improving structure merges.

    Cores are kept as they are; the gain of merging ``a`` and ``b`` is
    ``P * E_ab - M * (n_a n_b - per_a per_b)`` with ``E_ab`` the edges between
    them that touch a core node. Returns the summed gain (0 if none).
    """
    big_p = n * (n - 1) // 2
    size = np.zeros(n, dtype=np.int64)
    per = np.zeros(n, dtype=np.int64)
    for i in range(n):
        size[c[i]] += 1
        if x[i] == 0:
            per[c[i]] += 1
    keys = np.empty(indptr[n], dtype=np.int64)
    cnt = 0
    for i in range(n):
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if j > i and c[i] != c[j] and (x[i] == 1 or x[j] == 1):
                a = min(c[i], c[j])
                b = max(c[i], c[j])
                keys[cnt] = a * n + b
                cnt += 1
    if cnt == 0:
        return 0
    keys = np.sort(keys[:cnt])
    gains = np.empty(cnt, dtype=np.int64)
    pa = np.empty(cnt, dtype=np.int64)
    pb = np.empty(cnt, dtype=np.int64)
    n_cand = 0
    start = 0
    while start < cnt:
        stop = start
        while stop < cnt and keys[stop] == keys[start]:
            stop += 1
        a = keys[start] // n
        b = keys[start] % n
        g = big_p * (stop - start) - m * (size[a] * size[b] - per[a] * per[b])
        if g > 0:
            gains[n_cand] = g
            pa[n_cand] = a
            pb[n_cand] = b
            n_cand += 1
        start = stop
    if n_cand == 0:
        return 0
    order = np.argsort(-gains[:n_cand], kind="mergesort")
    used = np.zeros(n, dtype=np.bool_)
    remap = np.arange(n)
    total = 0
    for t in order:
        a = pa[t]
        b = pb[t]
        if used[a] or used[b]:
            continue
        used[a] = True
        used[b] = True
        remap[b] = a
        total += gains[t]
    for i in range(n):
        c[i] = remap[c[i]]
    return total


@njit(cache=True)
def _local(indptr, indices, n, m, c, x, single_core, merge):
    total = _switch(indptr, indices, n, m, c, x, single_core)
    if merge and not single_core:
        while True:
            g = _merge(indptr, indices, n, m, c, x)
            if g == 0:
                break
            total += g
            total += _switch(indptr, indices, n, m, c, x, single_core)
    return total


@njit(cache=True)
def _restart(indptr, indices, n, m, seed, single_core, merge):
    np.random.seed(seed)
    c = np.zeros(n, dtype=np.int64)
    x = np.ones(n, dtype=np.int64)
    if not single_core:
        for i in range(n):
            c[i] = i
    # both starting labellings (singleton cores, or one all-core block) score 0
    gain = _local(indptr, indices, n, m, c, x, single_core, merge)
    return c, x, gain


@njit(cache=True)
def _kick(indptr, indices, n, m, seed, single_core, merge, c0, x0, score0, n_kicks):
    """Iterated local search: perturb a few nodes, re-optimise, keep if not worse."""
    np.random.seed(seed)
    cur_c = c0.copy()
    cur_x = x0.copy()
    cur = score0
    best_c = c0.copy()
    best_x = x0.copy()
    best = score0
    k_max = max(1, min(n // 2, 8))
    in_use = np.zeros(n, dtype=np.bool_)
    for _ in range(n_kicks):
        c = cur_c.copy()
        x = cur_x.copy()
        n_pert = np.random.randint(1, k_max + 1)
        for _p in range(n_pert):
            i = np.random.randint(n)
            r = np.random.random()
            deg = indptr[i + 1] - indptr[i]
            if single_core or (0.5 <= r < 0.75):
                x[i] = 1 - x[i]
            elif r < 0.5 and deg > 0:
                j = indices[indptr[i] + np.random.randint(deg)]
                c[i] = c[j]
                x[i] = np.random.randint(2)
            else:
                in_use[:] = False
                for v in range(n):
                    in_use[c[v]] = True
                for lab in range(n):
                    if not in_use[lab]:
                        c[i] = lab
                        x[i] = 1
                        break
        _local(indptr, indices, n, m, c, x, single_core, merge)
        s = _score(indptr, indices, n, m, c, x)
        if s >= cur:
            cur = s
            cur_c = c
            cur_x = x
        if s > best:
            best = s
            best_c = c.copy()
            best_x = x.copy()
    return best_c, best_x, best


def _canonical(c: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Compact labels to 1..C ordered by descending size, then first member."""
    labels, first, sizes = np.unique(c, return_index=True, return_counts=True)
    order = np.lexsort((first, -sizes))
    remap = np.empty(labels.max() + 1, dtype=np.int64)
    remap[labels[order]] = np.arange(1, len(labels) + 1)
    return remap[c], x.astype(np.int64)


def _solve(net: ConceptNetwork, cfg: SolverConfig, single_core: bool) -> CpAssignment:
    n, m = net.n_nodes, net.n_edges
    if n < 2:
        raise ValueError(f"detection needs N >= 2, got N={n}")
    indptr, indices = net.csr
    best = None
    for r in range(cfg.n_restarts):
        seed = derive_seed(cfg.rng_seed, "restart", r) % (2**32)
        c, x, gain = _restart(indptr, indices, n, m, seed, single_core, cfg.merge_structures)
        if best is None or gain > best[0]:
            best = (int(gain), c, x)
    score, c, x = best
    if cfg.n_kicks > 0:
        seed = derive_seed(cfg.rng_seed, "kicks") % (2**32)
        c, x, score = _kick(indptr, indices, n, m, seed, single_core, cfg.merge_structures,
                            c, x, score, cfg.n_kicks)
        score = int(score)
    c, x = _canonical(c, x)
    value = qcp_scaled(net, c, x)
    if value != score:
        raise AssertionError(f"label switching drifted: traced {score}, recomputed {value}")
    contrib = structure_contributions(net, c, x)[1:]
    sizes = np.bincount(c)[1:]
    return CpAssignment(c=c, x=x, qcp=value / _pair_count(n), structure_quality=contrib / sizes)


def detect(net: ConceptNetwork, cfg: SolverConfig | None = None) -> CpAssignment:
    """Maximise ``qcp`` over multiple core/periphery structures.

    Each restart starts from every node being its own core, scans nodes in
    a fresh random order and moves a node to the best ``(c_j, 1)`` or
    ``(c_j, 0)`` label among its neighbours when that strictly increases the
    objective; it stops after a full scan without moves. The best restart
    wins, earliest restart on ties.

    Single-node moves cannot reach every optimum (merging two structures
    can need several uphill-blocked steps), so by default two refinements
    follow: greedy merges of structure pairs with positive joint gain, and
    ``cfg.n_kicks`` rounds of iterated local search that perturb a few
    labels, re-run the switching and keep results that are not worse.
    ``n_kicks=0, merge_structures=False`` gives the bare heuristic.
    """
    cfg = cfg or SolverConfig()
    return _solve(net, cfg, single_core=cfg.single_core_mode)


def detect_single_core(net: ConceptNetwork, cfg: SolverConfig | None = None) -> CpAssignment:
    """Same heuristic with every node pinned to one structure; only ``x`` moves."""
    cfg = cfg or SolverConfig()
    return _solve(net, cfg, single_core=True)


# ---------------------------------------------------------------- significance

def random_graph(n: int, m: int, rng: np.random.Generator) -> ConceptNetwork:
    """Uniform simple graph with exactly ``n`` nodes and ``m`` edges."""
    iu, ju = np.triu_indices(n, k=1)
    picks = rng.choice(len(iu), size=m, replace=False)
    return ConceptNetwork(tuple(str(k) for k in range(n)), np.column_stack([iu[picks], ju[picks]]))


class NullDistributionCache:
    """Memoises pooled structure qualities of random graphs keyed by (N, M, config).

    Rewired replicates share N and M with the observed graph, so one random
    ensemble serves a whole null-model run.
    """

    def __init__(self) -> None:
        self._store: dict[tuple, np.ndarray] = {}

    def get(self, n: int, m: int, cfg: SolverConfig, single_core: bool) -> np.ndarray:
        key = (n, m, cfg.rng_seed, cfg.n_restarts, cfg.n_kicks, cfg.merge_structures,
               cfg.sig_samples, single_core)
        if key not in self._store:
            self._store[key] = _null_qualities(n, m, cfg, single_core)
        return self._store[key]

    def __len__(self) -> int:
        return len(self._store)


_default_cache = NullDistributionCache()


def _null_qualities(n: int, m: int, cfg: SolverConfig, single_core: bool) -> np.ndarray:
    pooled = []
    for s in range(cfg.sig_samples):
        rng = np.random.default_rng(derive_seed(cfg.rng_seed, "null-graph", n, m, s))
        g = random_graph(n, m, rng)
        sub = replace(cfg, rng_seed=derive_seed(cfg.rng_seed, "null-detect", n, m, s))
        asg = _solve(g, sub, single_core)
        pooled.append(asg.structure_quality)
    return np.concatenate(pooled)


def sidak_alpha(alpha: float, n_tests: int) -> float:
    return 1.0 - (1.0 - alpha) ** (1.0 / max(n_tests, 1))


def count_significant(net: ConceptNetwork, asg: CpAssignment, cfg: SolverConfig | None = None,
                      cache: NullDistributionCache | None = None) -> CpAssignment:
    """Flag structures whose size-normalised quality beats random graphs.

    The reference distribution pools every structure found by the same
    solver on ``sig_samples`` uniform random graphs with the observed N and
    M. A structure is significant when its quality exceeds the one-sided
    ``1 - alpha'`` quantile, ``alpha'`` being the Sidak-corrected level for
    the number of detected structures. Returns a copy of ``asg`` with
    ``structure_sig`` filled; ``n_significant`` on it is the core count.
    """
    cfg = cfg or SolverConfig()
    if cfg.sig_samples < 100:
        raise ConfigError("sig_samples must be >= 100")
    cache = cache if cache is not None else _default_cache
    pooled = cache.get(net.n_nodes, net.n_edges, cfg, cfg.single_core_mode)
    level = sidak_alpha(cfg.sig_alpha, asg.n_structures)
    threshold = float(np.quantile(pooled, 1.0 - level, method="higher"))
    sig = asg.structure_quality > threshold
    return replace(asg, structure_sig=sig, null_threshold=threshold)


def detect_and_test(net: ConceptNetwork, cfg: SolverConfig | None = None,
                    cache: NullDistributionCache | None = None) -> CpAssignment:
    cfg = cfg or SolverConfig()
    asg = detect(net, cfg)
    if cfg.significance:
        asg = count_significant(net, asg, cfg, cache)
    else:
        asg = replace(asg, structure_sig=np.ones(asg.n_structures, dtype=bool))
    return asg
