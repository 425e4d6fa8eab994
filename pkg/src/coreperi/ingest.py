"""Corpus reading, validation and (subfield, window) grouping."""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from ._data import data_path

log = logging.getLogger(__name__)

ASSIGNMENT_MODES = ("primary_only", "all_listed")
_MODE_ALIASES = {"primary": "primary_only", "all": "all_listed"}


class CorpusError(RuntimeError):
    """Fatal ingest failure (e.g. nothing survived validation)."""


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    year: int
    field_ids: tuple[str, ...]
    abstract: str
    author_count: int = 0
    reference_ids: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps({"id": self.paper_id, "year": self.year, "fields": list(self.field_ids),
                           "abstract": self.abstract, "n_authors": self.author_count,
                           "refs": list(self.reference_ids)}, ensure_ascii=False)


@dataclass(frozen=True)
class FieldScheme:
    """Subfield list, subfield -> meso map and the paper-to-subfield rule.

    ``normalize="pacs_top"`` maps a PACS code such as ``"05.45.-a"`` to its
    top-level digit. Subfields missing from ``meso_map`` are dropped unless
    ``unlisted_meso`` names a catch-all meso field for them.
    """

    meso_map: Mapping[str, str]
    assignment_mode: str = "primary_only"
    normalize: str | None = None
    unlisted_meso: str | None = None

    def __post_init__(self) -> None:
        mode = _MODE_ALIASES.get(self.assignment_mode, self.assignment_mode)
        if mode not in ASSIGNMENT_MODES:
            raise ValueError(f"unknown assignment mode {self.assignment_mode!r}")
        object.__setattr__(self, "assignment_mode", mode)
        object.__setattr__(self, "meso_map", dict(self.meso_map))

    @property
    def subfield_ids(self) -> list[str]:
        return list(self.meso_map)

    def with_mode(self, mode: str) -> "FieldScheme":
        return FieldScheme(self.meso_map, mode, self.normalize, self.unlisted_meso)

    def normalize_id(self, field_id: str) -> str:
        field_id = str(field_id).strip()
        if self.normalize == "pacs_top" and field_id[:1].isdigit():
            return field_id[0]
        return field_id

    def known(self, subfield: str) -> bool:
        return subfield in self.meso_map or self.unlisted_meso is not None

    def meso_of(self, subfield: str) -> str:
        if subfield in self.meso_map:
            return self.meso_map[subfield]
        if self.unlisted_meso is not None:
            return self.unlisted_meso
        raise KeyError(f"subfield {subfield!r} has no meso field in this scheme")

    def subfields_of(self, record: PaperRecord) -> list[str]:
        ids = [self.normalize_id(f) for f in record.field_ids]
        if self.assignment_mode == "primary_only":
            ids = ids[:1]
        out: list[str] = []
        for s in ids:
            if self.known(s) and s not in out:
                out.append(s)
        return out

    @classmethod
    def read(cls, path: str | Path, assignment_mode: str | None = None) -> "FieldScheme":
        """Read ``subfield<TAB>meso`` rows; ``# key<TAB>value`` lines set options."""
        opts: dict[str, str] = {}
        meso: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                if line.startswith("#"):
                    parts = line[1:].strip().split("\t")
                    if len(parts) == 2:
                        opts[parts[0]] = parts[1]
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'subfield<TAB>meso'")
                sub, m = parts
                if sub in meso and meso[sub] != m:
                    raise ValueError(f"{path}:{lineno}: subfield {sub!r} mapped twice")
                meso[sub] = m
        mode = assignment_mode or opts.get("mode", "primary_only")
        return cls(meso, mode, opts.get("normalize"), opts.get("unlisted"))

    @classmethod
    def bundled(cls, name: str, assignment_mode: str | None = None) -> "FieldScheme":
        """``"physics"`` (PACS top level) or ``"social"`` (WoS subject areas)."""
        return cls.read(data_path(f"scheme_{name}.tsv"), assignment_mode)


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    reasons: dict[str, int] = field(default_factory=dict)

    def reject(self, path, lineno: int, reason: str) -> None:
        self.rejected += 1
        key = reason.split(":")[0]
        self.reasons[key] = self.reasons.get(key, 0) + 1
        log.warning("%s:%d: rejected (%s)", path, lineno, reason)


def _parse(obj: object) -> PaperRecord:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for key in ("id", "year", "fields", "abstract"):
        if key not in obj:
            raise ValueError(f"missing field: {key}")
    pid = obj["id"]
    if not isinstance(pid, str) or not pid:
        raise ValueError("empty id")
    year = obj["year"]
    if isinstance(year, bool) or not isinstance(year, int):
        raise ValueError("bad year: not an integer")
    fields = obj["fields"]
    if not isinstance(fields, list) or not fields or not all(isinstance(f, (str, int)) for f in fields):
        raise ValueError("bad fields: need a nonempty list")
    abstract = obj["abstract"]
    if not isinstance(abstract, str) or not abstract.strip():
        raise ValueError("empty abstract")
    n_auth = obj.get("n_authors", 0)
    if isinstance(n_auth, bool) or not isinstance(n_auth, int) or n_auth < 0:
        raise ValueError("bad n_authors")
    refs = obj.get("refs", [])
    if not isinstance(refs, list) or not all(isinstance(r, str) for r in refs):
        raise ValueError("bad refs")
    return PaperRecord(pid, year, tuple(str(f) for f in fields), abstract, n_auth, tuple(refs))


def load_corpus(path: str | Path, scheme: FieldScheme, year_range: tuple[int, int] | None = None,
                report: IngestReport | None = None) -> Iterator[PaperRecord]:
    """Stream validated records from a JSON-lines corpus file.

    Bad lines are logged with their line number and skipped. Raises
    :class:`CorpusError` after the last line if nothing was accepted.
    Pass an :class:`IngestReport` to collect the counts.
    """
    report = report if report is not None else IngestReport()
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = _parse(json.loads(line))
            except (json.JSONDecodeError, ValueError) as exc:
                report.reject(path, lineno, str(exc) if not isinstance(exc, json.JSONDecodeError)
                              else f"malformed: {exc.msg}")
                continue
            if year_range is not None and not year_range[0] <= rec.year <= year_range[1]:
                report.reject(path, lineno, f"year out of range: {rec.year}")
                continue
            if rec.paper_id in seen:
                report.reject(path, lineno, f"duplicate id: {rec.paper_id}")
                continue
            if not scheme.subfields_of(rec):
                report.reject(path, lineno, f"no known subfield: {list(rec.field_ids)}")
                continue
            seen.add(rec.paper_id)
            report.accepted += 1
            yield rec
    log.info("%s: %d records accepted, %d rejected", path, report.accepted, report.rejected)
    if report.accepted == 0:
        raise CorpusError(f"{path}: no valid records ({report.rejected} rejected)")


def group_by_cell(records: Iterable[PaperRecord], scheme: FieldScheme, window: int = 1,
                  last_year: int | None = None) -> dict[tuple[str, int], list[PaperRecord]]:
    """Map ``(subfield, window_end_year)`` to the papers in that window.

    A paper from year ``y`` lands in the cells ending ``y .. y + window - 1``;
    end years beyond ``last_year`` (default: the latest paper year) are not
    emitted. Early windows are partial rather than dropped.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    records = list(records)
    if last_year is None:
        last_year = max((r.year for r in records), default=0)
    cells: dict[tuple[str, int], list[PaperRecord]] = defaultdict(list)
    for r in records:
        for sub in scheme.subfields_of(r):
            for end in range(r.year, min(r.year + window - 1, last_year) + 1):
                cells[(sub, end)].append(r)
    return {k: cells[k] for k in sorted(cells)}


def write_corpus(records: Iterable[PaperRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
