"""Degree-preserving rewiring and z-scores against rewired ensembles."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numba import njit

from ._random import derive_seed
from .coreperiphery import (CpAssignment, NullDistributionCache, SolverConfig, count_significant, detect,
                            detect_and_test)
from .metrics import churn, core_set, relative_core_size
from .network import ConceptNetwork

log = logging.getLogger(__name__)

METRICS = ("churn", "rel_core_size", "n_cores")


@njit(cache=True)
def _adjacent(indptr, nbr, x, y):
    # scan the shorter neighbour row
    if indptr[x + 1] - indptr[x] > indptr[y + 1] - indptr[y]:
        x, y = y, x
    for e in range(indptr[x], indptr[x + 1]):
        if nbr[e] == y:
            return True
    return False


@njit(cache=True)
def _replace(indptr, nbr, node, old, new):
    for e in range(indptr[node], indptr[node + 1]):
        if nbr[e] == old:
            nbr[e] = new
            return


@njit(cache=True)
def _swap_kernel(u, v, indptr, nbr, seed, budget, accepted_only, max_attempts):
    """Double-edge swaps in place on the edge arrays ``u``/``v``.

    Each attempt picks two distinct edges (a, b), (c, d) and one of the two
    rewirings (a, d)(c, b) or (a, c)(b, d); it is rejected if it creates a
    self-loop or an existing edge. Degrees never change, so each node keeps
    a fixed-length neighbour row in ``nbr`` for the membership checks.
    With ``accepted_only`` the loop runs until ``budget`` swaps succeed (or
    ``max_attempts`` is hit), otherwise ``budget`` counts attempts.
    Returns (attempts, accepted).
    """
    np.random.seed(seed)
    m = len(u)
    attempts = 0
    accepted = 0
    while True:
        if accepted_only:
            if accepted >= budget or attempts >= max_attempts:
                break
        elif attempts >= budget:
            break
        attempts += 1
        e1 = np.random.randint(m)
        e2 = np.random.randint(m - 1)
        if e2 >= e1:
            e2 += 1
        a, b = u[e1], v[e1]
        c, d = u[e2], v[e2]
        if np.random.random() < 0.5:
            c, d = d, c
        # proposal: (a, d) and (c, b)
        if a == d or c == b:
            continue
        if _adjacent(indptr, nbr, a, d) or _adjacent(indptr, nbr, c, b):
            continue
        _replace(indptr, nbr, a, b, d)
        _replace(indptr, nbr, b, a, c)
        _replace(indptr, nbr, c, d, b)
        _replace(indptr, nbr, d, c, a)
        u[e1], v[e1] = a, d
        u[e2], v[e2] = c, b
        accepted += 1
    return attempts, accepted


def rewire(net: ConceptNetwork, seed: int, swap_factor: int = 100, accepted_swaps: bool = False,
           return_counts: bool = False):
    """Randomise ``net`` by ``swap_factor * M`` double-edge swaps, keeping every degree.

    Rejected proposals count toward the budget unless ``accepted_swaps``.
    When no proposal can ever succeed (stars, complete graphs) the result
    is an unchanged copy and a warning is logged.
    """
    m = net.n_edges
    if m < 2:
        raise ValueError(f"rewiring needs at least 2 edges, got M={m}")
    u = net.edges[:, 0].copy()
    v = net.edges[:, 1].copy()
    budget = swap_factor * m
    indptr, nbr = net.csr
    attempts, accepted = _swap_kernel(u, v, indptr, nbr.copy(), seed % (2**32), budget, accepted_swaps,
                                      100 * budget)
    if accepted == 0:
        log.warning("no feasible double-edge swap in %d attempts (cell %s); returning a copy",
                    attempts, net.cell)
    elif accepted_swaps and accepted < budget:
        log.warning("only %d of %d swaps accepted before the attempt cap", accepted, budget)
    out = ConceptNetwork(net.labels, np.column_stack([u, v]), net.cell)
    if return_counts:
        return out, int(attempts), int(accepted)
    return out


@dataclass(frozen=True)
class NullEnsemble:
    """Observed cell plus its rewired replicates, each with a detected assignment."""

    cell: tuple[str, int] | None
    observed: tuple[ConceptNetwork, CpAssignment]
    replicates: tuple[tuple[ConceptNetwork, CpAssignment], ...]

    @property
    def n_replicates(self) -> int:
        return len(self.replicates)


def build_ensemble(net: ConceptNetwork, n_replicates: int = 100, seed: int = 0,
                   cfg: SolverConfig | None = None, *, observed: CpAssignment | None = None,
                   swap_factor: int = 100, accepted_swaps: bool = False,
                   cache: NullDistributionCache | None = None) -> NullEnsemble:
    """Rewire ``net`` ``n_replicates`` times and run detection on every replicate.

    Replicate ``r`` of a cell always uses the same derived seed, which is
    what pairs replicate ``r`` of year ``t`` with replicate ``r`` of
    ``t - 1`` for churn.
    """
    if n_replicates < 2:
        raise ValueError("n_replicates must be >= 2 for a standard deviation")
    cfg = cfg or SolverConfig()
    cache = cache if cache is not None else NullDistributionCache()
    if observed is None:
        observed = detect_and_test(net, cfg, cache)
    reps = []
    subfield = net.cell[0] if net.cell is not None else ""
    for r in range(n_replicates):
        g = rewire(net, derive_seed(seed, "rewire", subfield, r), swap_factor, accepted_swaps)
        if not np.array_equal(g.degrees, net.degrees):
            raise AssertionError("rewiring changed a node degree")
        # the detection seed varies per replicate; the significance reference
        # keeps the cell's seed so all replicates share one cached distribution
        asg = detect(g, replace(cfg, rng_seed=derive_seed(cfg.rng_seed, "replicate", subfield, r)))
        if cfg.significance:
            asg = count_significant(g, asg, cfg, cache)
        else:
            asg = replace(asg, structure_sig=np.ones(asg.n_structures, dtype=bool))
        reps.append((g, asg))
    return NullEnsemble(net.cell, (net, observed), tuple(reps))


@dataclass(frozen=True)
class NullEnsembleResult:
    cell: tuple[str, int] | None
    metric_name: str
    observed: float
    null_mean: float
    null_sd: float
    z: float | None
    n_replicates: int

    @property
    def z_defined(self) -> bool:
        return self.z is not None


def z_score(observed: float, null_values: Sequence[float]) -> tuple[float, float, float | None]:
    """``(mean, sd, z)`` with ``ddof=1``; ``z`` is ``None`` when the sd is zero."""
    vals = np.asarray(null_values, dtype=float)
    if len(vals) < 2:
        raise ValueError("need at least two null values")
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1))
    if sd == 0.0 or not math.isfinite(sd):
        return mean, sd, None
    return mean, sd, (observed - mean) / sd


def _metric(name: str, cur, prev) -> float | None:
    net, asg = cur
    if name == "rel_core_size":
        return relative_core_size(asg)
    if name == "n_cores":
        return float(asg.n_significant)
    if name == "churn":
        return churn(core_set(net, asg), core_set(*prev))
    raise ValueError(f"unknown metric {name!r}; choose from {METRICS}")


def null_compare(ens: NullEnsemble, metrics: Sequence[str] = ("rel_core_size", "n_cores"),
                 prev: NullEnsemble | None = None) -> list[NullEnsembleResult]:
    """z-score observed metrics against the replicate distribution.

    ``churn`` needs ``prev``, the ensemble of the same subfield one year
    earlier with the same replicate count; replicate ``r`` is compared
    with replicate ``r`` there. Replicates with undefined churn are dropped.
    """
    out = []
    for name in metrics:
        if name not in METRICS:
            raise ValueError(f"unknown metric {name!r}; choose from {METRICS}")
        if name == "churn":
            if prev is None:
                continue
            if prev.n_replicates != ens.n_replicates:
                raise ValueError("paired churn needs equal replicate counts")
            obs = _metric(name, ens.observed, prev.observed)
            null = [_metric(name, a, b) for a, b in zip(ens.replicates, prev.replicates)]
        else:
            obs = _metric(name, ens.observed, None)
            null = [_metric(name, a, None) for a in ens.replicates]
        null = [v for v in null if v is not None]
        if obs is None or len(null) < 2:
            continue
        mean, sd, z = z_score(obs, null)
        out.append(NullEnsembleResult(ens.cell, name, float(obs), mean, sd, z, len(null)))
    return out
