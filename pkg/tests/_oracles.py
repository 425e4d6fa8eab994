"""Independent reference computations used only by the test-suite.

Nothing here imports the code paths it checks: objectives are evaluated
with literal double loops and maxima by exhaustive enumeration.
"""
from __future__ import annotations

import itertools

import numpy as np


def qcp_literal(adj: np.ndarray, c, x) -> float:
    """Double-loop evaluation of the core/periphery objective."""
    n = adj.shape[0]
    m = adj[np.triu_indices(n, 1)].sum()
    p = m / (n * (n - 1) / 2)
    total = 0.0
    for i in range(n):
        for j in range(i):
            if c[i] != c[j]:
                continue
            total += (adj[i, j] - p) * (x[i] + x[j] - x[i] * x[j])
    return total


def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def qcp_max_enumerate(adj: np.ndarray) -> float:
    """Maximum over every (partition, coreness) labelling; feasible for N <= 6."""
    n = adj.shape[0]
    best = -np.inf
    for part in set_partitions(range(n)):
        c = np.empty(n, dtype=int)
        for k, block in enumerate(part):
            c[block] = k
        for bits in itertools.product((0, 1), repeat=n):
            best = max(best, qcp_literal(adj, c, bits))
    return best


def qcp_max_subset_dp(adj: np.ndarray) -> float:
    """Exact maximum via the block decomposition of the objective.

    The objective is a sum of independent per-structure terms, so the global
    maximum is the best set partition of the node set where each block
    scores its best core subset. Block scores are enumerated for every
    (block, core-subset) pair, then a subset DP picks the partition.
    """
    n = adj.shape[0]
    m = adj[np.triu_indices(n, 1)].sum()
    p = m / (n * (n - 1) / 2)
    iu, ju = np.triu_indices(n, 1)
    w = adj[iu, ju] - p
    full = 1 << n
    masks = np.arange(full)
    in_i = (masks[:, None] >> iu[None, :]) & 1
    in_j = (masks[:, None] >> ju[None, :]) & 1
    pair_in = (in_i & in_j).astype(bool)           # pair inside block S
    core_touch = (in_i | in_j).astype(bool)         # pair touches core set X
    block_best = np.full(full, -np.inf)
    for s in range(full):
        # enumerate X subset of S
        subs = []
        x = s
        while True:
            subs.append(x)
            if x == 0:
                break
            x = (x - 1) & s
        subs = np.array(subs)
        vals = ((pair_in[s][None, :] & core_touch[subs]) * w[None, :]).sum(axis=1)
        block_best[s] = vals.max()
    f = np.zeros(full)
    for u in range(1, full):
        low = u & -u
        rest = u ^ low
        best = -np.inf
        t = rest
        while True:
            s = t | low
            val = block_best[s] + f[u ^ s]
            if val > best:
                best = val
            if t == 0:
                break
            t = (t - 1) & rest
        f[u] = best
    return float(f[full - 1])


def random_simple_graph(n: int, density: float, rng: np.random.Generator) -> np.ndarray:
    adj = np.zeros((n, n), dtype=np.int8)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < density
    adj[iu[keep], ju[keep]] = 1
    adj[ju[keep], iu[keep]] = 1
    return adj


def cd_brute(adj: np.ndarray, focal: int, include: np.ndarray | None = None,
             include_ref_only: bool = True) -> float | None:
    """CD index from a dense citation matrix ``adj[i, j] = 1`` iff i cites j."""
    n = adj.shape[0]
    refs = [j for j in range(n) if adj[focal, j]]
    terms = []
    for i in range(n):
        if i == focal or (include is not None and not include[i]):
            continue
        f = int(adj[i, focal])
        b = int(any(adj[i, r] for r in refs))
        if f == 0 and b == 0:
            continue
        if f == 0 and not include_ref_only:
            continue
        terms.append(-2 * f * b + f)
    if not terms:
        return None
    return sum(terms) / len(terms)


# ------------------------------------------------------------ metric oracles
# exact rationals from explicit membership loops, converted to float once

from fractions import Fraction  # noqa: E402


def churn_oracle(core_t, core_prev):
    core_t = list(dict.fromkeys(core_t))
    if not core_t:
        return None
    new = sum(1 for a in core_t if a not in set(core_prev))
    return float(Fraction(new, len(core_t)))


def herfindahl_oracle(c, sig):
    """Shares over significant structures, counted node by node."""
    counts = {}
    for label in c:
        if sig[label - 1]:
            counts[label] = counts.get(label, 0) + 1
    total = sum(counts.values())
    if total == 0:
        return None
    return float(sum(Fraction(v, total) ** 2 for v in counts.values()))


def mobility_oracle(prev_class, cur_class):
    """``prev_class``/``cur_class`` map concept -> 'core' | 'periphery'."""
    out = []
    for src, same in (("core", "core"), ("periphery", "periphery")):
        members = [a for a, k in prev_class.items() if k == src]
        if not members:
            out += [None, None, None]
            continue
        stay = move = gone = 0
        for a in members:
            if a not in cur_class:
                gone += 1
            elif cur_class[a] == same:
                stay += 1
            else:
                move += 1
        n = len(members)
        out += [float(Fraction(stay, n)), float(Fraction(move, n)), float(Fraction(gone, n))]
    return tuple(out)


def percent_change_oracle(v0, v1, orientation):
    if v0 == 0:
        return None
    a, b = Fraction(v0), Fraction(v1)
    d = a - b if orientation == "decrease" else b - a
    return float(d * 100 / a)
