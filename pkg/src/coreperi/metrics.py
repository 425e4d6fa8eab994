"""Structural time series over detected core/periphery assignments.

Undefined values (first-year churn, empty classes, zero baselines) are
``None`` in Python and ``NA`` in CSV output.
"""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import astuple, dataclass, fields
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coreperiphery import CpAssignment
from .network import ConceptNetwork

log = logging.getLogger(__name__)

Cell = tuple[str, int]
CellResult = tuple[ConceptNetwork, CpAssignment]


def core_set(net: ConceptNetwork, asg: CpAssignment) -> set[str]:
    return {net.labels[i] for i in np.flatnonzero(asg.x == 1)}


def periphery_set(net: ConceptNetwork, asg: CpAssignment) -> set[str]:
    return {net.labels[i] for i in np.flatnonzero(asg.x == 0)}


def churn(core_t: set[str], core_prev: set[str]) -> float | None:
    """Share of this year's core concepts that were not core the year before."""
    if not core_t:
        return None
    # one division of exact integers keeps the result correctly rounded
    return (len(core_t) - len(core_t & core_prev)) / len(core_t)


def relative_core_size(asg: CpAssignment) -> float:
    if asg.n_nodes == 0:
        raise ValueError("relative core size needs at least one node")
    return int(np.count_nonzero(asg.x == 1)) / asg.n_nodes


def structure_shares(asg: CpAssignment, basis: str = "all", significant_only: bool = True) -> np.ndarray:
    """Shares of the (significant) structures, normalised to sum to one.

    ``basis="all"`` counts core and periphery members, ``"core"`` counts
    core members only.
    """
    sizes = _structure_counts(asg, basis, significant_only)
    total = sizes.sum()
    if total == 0:
        return np.zeros(0)
    return sizes / total


def _structure_counts(asg: CpAssignment, basis: str, significant_only: bool) -> np.ndarray:
    if basis not in ("all", "core"):
        raise ValueError("basis must be 'all' or 'core'")
    k = asg.n_structures
    if basis == "all":
        sizes = np.bincount(asg.c, minlength=k + 1)[1:]
    else:
        sizes = np.bincount(asg.c[asg.x == 1], minlength=k + 1)[1:]
    if significant_only and len(asg.structure_sig):
        sizes = sizes[asg.structure_sig]
    return sizes.astype(np.int64)


def herfindahl(asg: CpAssignment, basis: str = "all", significant_only: bool = True) -> float | None:
    """Sum of squared structure shares; 1 means one structure holds everything."""
    s = structure_shares(asg, basis, significant_only)
    if len(s) == 0:
        return None
    counts = _structure_counts(asg, basis, significant_only)
    return int(np.sum(counts * counts)) / int(counts.sum()) ** 2


@dataclass(frozen=True)
class MobilityRow:
    subfield_id: str
    year: int
    core_to_core: float | None
    core_to_periphery: float | None
    core_exit: float | None
    periphery_to_periphery: float | None
    periphery_to_core: float | None
    periphery_exit: float | None


def mobility_fractions(core_prev: set[str], periphery_prev: set[str],
                       core_t: set[str], periphery_t: set[str]) -> tuple:
    """Where last year's core and periphery concepts are this year.

    Returns ``(core->core, core->periphery, core exit, periphery->periphery,
    periphery->core, periphery exit)``; a triple is ``None`` when its prior
    class is empty.
    """
    def triple(prev: set[str], same: set[str], other: set[str]):
        if not prev:
            return (None, None, None)
        n = len(prev)
        stay = len(prev & same)
        move = len(prev & other)
        return (stay / n, move / n, (n - stay - move) / n)

    a = triple(core_prev, core_t, periphery_t)
    b = triple(periphery_prev, periphery_t, core_t)
    return a + b


def mobility(cur: CellResult, prev: CellResult, cell: Cell = ("", 0)) -> MobilityRow:
    fr = mobility_fractions(core_set(*prev), periphery_set(*prev), core_set(*cur), periphery_set(*cur))
    return MobilityRow(cell[0], cell[1], *fr)


@dataclass(frozen=True)
class StructureChurn:
    structure: int
    size: int
    churn: float
    is_largest: bool


def per_structure_churn(net: ConceptNetwork, asg: CpAssignment, core_prev_union: set[str],
                        significant_only: bool = True) -> list[StructureChurn]:
    """Churn of each structure's core against the union of last year's cores.

    The largest structure is flagged so callers can compare it with the rest.
    """
    sizes = asg.structure_sizes()
    ks = range(1, asg.n_structures + 1)
    if significant_only and len(asg.structure_sig):
        ks = [k for k in ks if asg.structure_sig[k - 1]]
    ks = list(ks)
    if not ks:
        return []
    largest = max(ks, key=lambda k: (sizes[k - 1], -k))
    out = []
    for k in ks:
        core_k = {net.labels[i] for i in np.flatnonzero((asg.c == k) & (asg.x == 1))}
        if not core_k:
            log.warning("structure %d has no core nodes; skipped", k)
            continue
        out.append(StructureChurn(k, int(sizes[k - 1]), churn(core_k, core_prev_union), k == largest))
    return out


def largest_vs_rest(rows: Iterable[StructureChurn]) -> tuple[list[float], list[float]]:
    """Split structure churns into (largest structures, all others) for a Welch test."""
    big, rest = [], []
    for r in rows:
        (big if r.is_largest else rest).append(r.churn)
    return big, rest


def percent_change(series: Mapping[int, float | None], y0: int, y1: int,
                   orientation: str = "decrease") -> float | None:
    """Percent change between two years.

    ``"decrease"`` gives ``(v0 - v1) / v0 * 100`` (positive for a decline),
    ``"increase"`` gives ``(v1 - v0) / v0 * 100``.
    """
    if orientation not in ("decrease", "increase"):
        raise ValueError("orientation must be 'decrease' or 'increase'")
    if y0 not in series or y1 not in series:
        raise KeyError(f"series lacks year {y0 if y0 not in series else y1}")
    v0, v1 = series[y0], series[y1]
    if v0 is None or v1 is None or v0 == 0:
        return None
    # exact rational arithmetic, rounded once
    a, b = Fraction(v0), Fraction(v1)
    if orientation == "decrease":
        return float((a - b) / a * 100)
    return float((b - a) / a * 100)


@dataclass(frozen=True)
class MetricRow:
    subfield_id: str
    year: int
    churn: float | None
    rel_core_size: float
    n_cores: int
    herfindahl: float | None
    n_nodes: int
    n_core_nodes: int
    n_structures: int


def metric_rows(results: Mapping[Cell, CellResult], herfindahl_basis: str = "all") -> list[MetricRow]:
    """One :class:`MetricRow` per cell; churn compares with the cell one year earlier."""
    rows = []
    for (sub, year) in sorted(results):
        net, asg = results[(sub, year)]
        prev = results.get((sub, year - 1))
        c = None if prev is None else churn(core_set(net, asg), core_set(*prev))
        n_core = int(np.count_nonzero(asg.x == 1))
        rows.append(MetricRow(sub, year, c, n_core / asg.n_nodes, asg.n_significant,
                              herfindahl(asg, herfindahl_basis), asg.n_nodes, n_core, asg.n_structures))
    return rows


def mobility_rows(results: Mapping[Cell, CellResult]) -> list[MobilityRow]:
    rows = []
    for (sub, year) in sorted(results):
        prev = results.get((sub, year - 1))
        if prev is not None:
            rows.append(mobility(results[(sub, year)], prev, (sub, year)))
    return rows


@dataclass(frozen=True)
class MesoRow:
    meso_id: str
    year: int
    churn: float | None
    rel_core_size: float | None
    n_cores: float | None
    herfindahl: float | None
    n_subfields: int


_MESO_METRICS = ("churn", "rel_core_size", "n_cores", "herfindahl")


def meso_average(rows: Sequence[MetricRow], scheme, concept_totals: Mapping[str, int] | None = None,
                 min_concepts: int = 100) -> list[MesoRow]:
    """Unweighted subfield means per (meso field, year).

    Subfields whose distinct concept count over the whole period
    (``concept_totals``) is below ``min_concepts`` are left out. Undefined
    subfield values are skipped; a metric with no defined value is ``None``.
    """
    excluded = set()
    if concept_totals is not None:
        excluded = {s for s, n in concept_totals.items() if n < min_concepts}
        if excluded:
            log.info("meso averages exclude %d small subfields: %s", len(excluded), sorted(excluded))
    groups: dict[tuple[str, int], list[MetricRow]] = defaultdict(list)
    for r in rows:
        if r.subfield_id in excluded:
            continue
        groups[(scheme.meso_of(r.subfield_id), r.year)].append(r)
    out = []
    for (meso, year) in sorted(groups):
        members = groups[(meso, year)]
        vals = {}
        for name in _MESO_METRICS:
            xs = [getattr(r, name) for r in members if getattr(r, name) is not None]
            vals[name] = float(np.mean(xs)) if xs else None
        out.append(MesoRow(meso, year, n_subfields=len(members), **vals))
    return out


def concept_totals(results: Mapping[Cell, CellResult]) -> dict[str, int]:
    """Distinct concepts per subfield over all years."""
    seen: dict[str, set[str]] = defaultdict(set)
    for (sub, _), (net, _asg) in results.items():
        seen[sub].update(net.labels)
    return {s: len(v) for s, v in sorted(seen.items())}


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(rows: Sequence, path: str | Path, row_type=None) -> None:
    """Write dataclass rows as CSV with ``NA`` for undefined values."""
    row_type = row_type or (type(rows[0]) if rows else None)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if row_type is not None:
            w.writerow([f.name for f in fields(row_type)])
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def parse_value(s: str) -> float | None:
    return None if s == "NA" else float(s)
