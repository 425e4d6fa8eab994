"""Command-line pipeline: ``coreperi <subcommand> --config <path> [overrides]``.

Stages and the artifacts they write under ``--out-dir``::

    extract       papers.jsonl concepts.tsv vocabulary.tsv cells.tsv
    build-net     networks.csv networks/*.tsv
    detect        assignments.csv structures.csv
    metrics       metrics.csv mobility.csv meso_metrics.csv structure_churn.csv schema.csv
    null-compare  nullmodel.csv
    cd-index      cd_index.csv
    consensus     consensus.csv
    regress       regression_report.txt regression_report.csv
    report        report.txt percent_change.csv

``run`` executes all nine in order and ``demo`` does the same on the
bundled synthetic corpus. Every stage appends an entry to
``manifest.json`` holding the sha256 of its inputs, config and outputs.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import metrics as mx
from ._data import data_path
from ._random import derive_seed
from .concepts import ConceptVocabulary, build_vocabulary, extract_concepts, load_stopwords
from .coreperiphery import CpAssignment, NullDistributionCache, SolverConfig, detect_and_test
from .ingest import FieldScheme, IngestReport, PaperRecord, group_by_cell, load_corpus, write_corpus
from .network import ConceptNetwork, build_network, read_edgelist, write_edgelist
from .nullmodel import build_ensemble, null_compare
from .scientometrics import (CitationGraph, ConsensusDictionary, cd_index, consensus_count,
                             has_prior_work_comment, load_markers)
from .stats import CollinearityError, ConvergenceError, ols_fe, poisson_fit

log = logging.getLogger("coreperi")

STAGES = ("extract", "build-net", "detect", "metrics", "null-compare", "cd-index", "consensus",
          "regress", "report")
UPSTREAM = {
    "extract": (),
    "build-net": ("extract",),
    "detect": ("build-net",),
    "metrics": ("detect",),
    "null-compare": ("detect",),
    "cd-index": ("extract",),
    "consensus": ("extract",),
    "regress": ("metrics", "cd-index", "consensus"),
    "report": ("metrics",),
}
MANIFEST = "manifest.json"


class PipelineError(RuntimeError):
    """User-facing failure; the message is printed and the exit status is 2."""


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class RunConfig:
    corpus: str = ""
    scheme: str = "social"
    year_start: int | None = None
    year_end: int | None = None
    window: int = 1
    assignment_mode: str | None = None
    threshold: str = "proportional"
    threshold_lo: float = 0.001
    threshold_hi: float = 0.01
    min_count: int = 10
    stopwords: str = ""
    restarts: int = 10
    kicks: int = 1000
    merge: bool = True
    seed: int = 0
    alpha: float = 0.05
    sig_samples: int = 100
    single_core: bool = False
    significance: bool = True
    replicates: int = 100
    swap_factor: int = 100
    accepted_swaps: bool = False
    herfindahl_basis: str = "all"
    meso_min_concepts: int = 100
    cd_horizon: int | None = None
    cd_include_ref_only: bool = True
    consensus_presence_only: bool = False
    consensus_dictionary: str = ""
    markers: str = ""
    change_start: int | None = None
    change_end: int | None = None
    out_dir: str = "coreperi_out"
    jobs: int = 1

    def solver(self) -> SolverConfig:
        return SolverConfig(n_restarts=self.restarts, rng_seed=self.seed, sig_alpha=self.alpha,
                            sig_samples=self.sig_samples, single_core_mode=self.single_core,
                            significance=self.significance, n_kicks=self.kicks, merge_structures=self.merge)

    def field_scheme(self) -> FieldScheme:
        if self.scheme in ("social", "physics"):
            return FieldScheme.bundled(self.scheme, self.assignment_mode)
        return FieldScheme.read(self.scheme, self.assignment_mode)

    def year_range(self) -> tuple[int, int] | None:
        if self.year_start is None and self.year_end is None:
            return None
        return (self.year_start if self.year_start is not None else -10**9,
                self.year_end if self.year_end is not None else 10**9)

    def digest(self) -> str:
        """Hash of everything that can change an artifact (not jobs or out_dir)."""
        d = {k: v for k, v in asdict(self).items() if k not in ("jobs", "out_dir")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def validate(self) -> None:
        if self.corpus and not Path(self.corpus).is_file():
            raise PipelineError(f"corpus file not found: {self.corpus}")
        for key in ("stopwords", "consensus_dictionary", "markers"):
            p = getattr(self, key)
            if p and not Path(p).is_file():
                raise PipelineError(f"{key} file not found: {p}")
        if self.scheme not in ("social", "physics") and not Path(self.scheme).is_file():
            raise PipelineError(f"field scheme not found: {self.scheme}")
        if self.threshold not in ("proportional", "min_count"):
            raise PipelineError(f"threshold must be proportional or min_count, got {self.threshold!r}")
        if self.window < 1:
            raise PipelineError("window must be >= 1")
        if self.jobs < 1:
            raise PipelineError("jobs must be >= 1")
        if self.herfindahl_basis not in ("all", "core"):
            raise PipelineError("herfindahl_basis must be 'all' or 'core'")
        try:
            self.solver()
        except ValueError as exc:
            raise PipelineError(str(exc)) from None


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_PATH_KEYS = ("corpus", "scheme", "stopwords", "consensus_dictionary", "markers", "out_dir")


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if raw in ("", "none", "None", "NA") and "None" in kind:
        return None
    if kind.startswith("bool"):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise PipelineError(f"{key}: expected a boolean, got {raw!r}")
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return float(raw)
    return raw


def read_config(path: str | Path) -> dict[str, object]:
    """Parse ``key = value`` (or ``key<TAB>value``) lines; ``#`` starts a comment.

    Relative paths are resolved against the config file's directory.
    """
    path = Path(path)
    out: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, val = (s.strip() for s in line.split("=", 1))
            elif "\t" in line:
                key, val = (s.strip() for s in line.split("\t", 1))
            else:
                raise PipelineError(f"{path}:{lineno}: expected 'key = value'")
            key = key.replace("-", "_")
            if key == "threshold" and val == "min10":
                out["min_count"] = 10
                val = "min_count"
            if key not in _FIELD_TYPES:
                raise PipelineError(f"{path}:{lineno}: unknown config key {key!r}")
            value = _coerce(key, val)
            if key in _PATH_KEYS and isinstance(value, str) and value and \
                    not (key == "scheme" and value in ("social", "physics")):
                value = str((path.parent / value).resolve()) if not Path(value).is_absolute() else value
            out[key] = value
    return out


def resolve_config(args: argparse.Namespace, env: dict[str, str] | None = None) -> RunConfig:
    """File values, then ``COREPERI_SEED``, then command-line flags."""
    env = os.environ if env is None else env
    values: dict[str, object] = {}
    if getattr(args, "config", None):
        if not Path(args.config).is_file():
            raise PipelineError(f"config file not found: {args.config}")
        values.update(read_config(args.config))
    if env.get("COREPERI_SEED"):
        values["seed"] = int(env["COREPERI_SEED"])
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if values.get("threshold") == "min10":
        values["threshold"] = "min_count"
        values.setdefault("min_count", 10)
    return RunConfig(**values)


# ---------------------------------------------------------------- manifest

def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    """``manifest.json``: one entry per stage with input, config and output hashes."""

    def __init__(self, out_dir: Path) -> None:
        self.path = out_dir / MANIFEST
        self.out_dir = out_dir
        self.stages: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                self.stages = json.load(fh).get("stages", {})

    def _rel(self, p: Path) -> str:
        try:
            return str(Path(p).resolve().relative_to(self.out_dir.resolve()))
        except ValueError:
            return str(p)

    def record(self, stage: str, cfg: RunConfig, inputs: Sequence[Path], outputs: Sequence[Path]) -> None:
        self.stages[stage] = {
            "config_sha256": cfg.digest(),
            "inputs": {self._rel(p): sha256_file(p) for p in sorted(inputs, key=str)},
            "outputs": {self._rel(p): sha256_file(p) for p in sorted(outputs, key=str)},
        }
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"stages": {k: self.stages[k] for k in STAGES if k in self.stages}}, fh,
                      indent=2)
            fh.write("\n")
        os.replace(tmp, self.path)

    def check_upstream(self, stage: str, cfg: RunConfig) -> None:
        """Fail when a prerequisite stage never ran; warn when its artifacts look stale."""
        for up in UPSTREAM[stage]:
            entry = self.stages.get(up)
            if entry is None:
                raise PipelineError(f"'{stage}' needs the outputs of '{up}'; run `coreperi {up}` first "
                                    f"(no {up} entry in {self.path})")
            for rel, digest in entry["outputs"].items():
                p = self.out_dir / rel
                if not p.exists():
                    raise PipelineError(f"'{stage}' needs {p}, written by '{up}'; run `coreperi {up}` again")
                if sha256_file(p) != digest:
                    log.warning("stale artifact: %s changed since '%s' wrote it", p, up)
            if entry["config_sha256"] != cfg.digest():
                log.warning("stale artifact: '%s' ran with a different config; rerun it to refresh", up)


# ------------------------------------------------------------------ helpers

def _cell_file(sub: str, year: int) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in sub)
    digest = hashlib.sha256(sub.encode()).hexdigest()[:8]
    return f"networks/{safe}__{digest}__{year}.tsv"


def _read_tsv_rows(path: Path) -> list[list[str]]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n").split("\t") for line in fh if line.strip() and not line.startswith("#")]


def _papers(out: Path) -> list[PaperRecord]:
    recs = []
    with open(out / "papers.jsonl", encoding="utf-8") as fh:
        for line in fh:
            o = json.loads(line)
            recs.append(PaperRecord(o["id"], o["year"], tuple(o["fields"]), o["abstract"], o["n_authors"],
                                    tuple(o["refs"])))
    return recs


def _load_networks(out: Path) -> dict[tuple[str, int], ConceptNetwork]:
    nets = {}
    for row in mx.read_csv(out / "networks.csv"):
        cell = (row["subfield_id"], int(row["year"]))
        net = read_edgelist(out / row["file"])
        nets[cell] = ConceptNetwork(net.labels, net.edges, cell)
    return nets


def _load_assignments(out: Path, nets: dict) -> dict[tuple[str, int], tuple[ConceptNetwork, CpAssignment]]:
    nodes: dict[tuple[str, int], dict[str, tuple[int, int]]] = defaultdict(dict)
    for row in mx.read_csv(out / "assignments.csv"):
        nodes[(row["subfield_id"], int(row["year"]))][row["concept"]] = (int(row["structure"]), int(row["core"]))
    structs: dict[tuple[str, int], list[dict]] = defaultdict(list)
    for row in mx.read_csv(out / "structures.csv"):
        structs[(row["subfield_id"], int(row["year"]))].append(row)
    results = {}
    for cell, net in nets.items():
        if cell not in nodes:
            continue
        lab = nodes[cell]
        c = np.array([lab[l][0] for l in net.labels], dtype=np.int64)
        x = np.array([lab[l][1] for l in net.labels], dtype=np.int64)
        rows = sorted(structs[cell], key=lambda r: int(r["structure"]))
        quality = np.array([float(r["quality"]) for r in rows])
        sig = np.array([r["significant"] == "1" for r in rows], dtype=bool)
        thr = mx.parse_value(rows[0]["null_threshold"]) if rows else None
        qcp_val = float(rows[0]["qcp"]) if rows else 0.0
        results[cell] = (net, CpAssignment(c, x, qcp_val, quality, sig, thr))
    return results


def _run_parallel(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([mx._fmt(v) for v in r])


def _primary_subfield(rec: PaperRecord, scheme: FieldScheme) -> str | None:
    subs = scheme.subfields_of(rec)
    return subs[0] if subs else None


# ------------------------------------------------------------------- stages

def stage_extract(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    if not cfg.corpus:
        raise PipelineError("no corpus given; set 'corpus' in the config or pass --corpus")
    scheme = cfg.field_scheme()
    report = IngestReport()
    records = list(load_corpus(cfg.corpus, scheme, cfg.year_range(), report))
    records.sort(key=lambda r: (r.year, r.paper_id))
    stop = load_stopwords(cfg.stopwords) if cfg.stopwords else None
    concepts = {r.paper_id: frozenset(extract_concepts(r.abstract, stop)) for r in records}
    vocab = build_vocabulary(concepts, cfg.threshold, bounds=(cfg.threshold_lo, cfg.threshold_hi),
                             min_count=cfg.min_count)
    write_corpus(records, out / "papers.jsonl")
    with open(out / "concepts.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.paper_id + "\t" + "|".join(sorted(concepts[r.paper_id])) + "\n")
    vocab.write(out / "vocabulary.tsv")
    cells = group_by_cell(records, scheme, cfg.window)
    with open(out / "cells.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for (sub, year), papers in cells.items():
            for p in papers:
                fh.write(f"{sub}\t{year}\t{p.paper_id}\n")
    log.info("extract: %d papers, %d vocabulary concepts, %d cells", len(records), len(vocab), len(cells))
    inputs = [Path(cfg.corpus)] + ([Path(cfg.scheme)] if Path(cfg.scheme).is_file() else [])
    return inputs, [out / "papers.jsonl", out / "concepts.tsv", out / "vocabulary.tsv", out / "cells.tsv"]


def stage_build_net(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    vocab = ConceptVocabulary.read(out / "vocabulary.tsv")
    concepts = {row[0]: frozenset(c for c in row[1].split("|") if c) if len(row) > 1 else frozenset()
                for row in _read_tsv_rows(out / "concepts.tsv")}
    papers = {r.paper_id: r for r in _papers(out)}
    cells: dict[tuple[str, int], list[PaperRecord]] = defaultdict(list)
    for sub, year, pid in _read_tsv_rows(out / "cells.tsv"):
        cells[(sub, int(year))].append(papers[pid])
    netdir = out / "networks"
    if netdir.exists():
        shutil.rmtree(netdir)
    netdir.mkdir()
    index, outputs = [], []
    for cell in sorted(cells):
        net = build_network(cells[cell], vocab, concepts, cell)
        if net.n_nodes < 2:
            log.info("cell %s: fewer than two linked concepts, skipped", cell)
            continue
        rel = _cell_file(*cell)
        write_edgelist(net, out / rel)
        outputs.append(out / rel)
        index.append((cell[0], cell[1], len(cells[cell]), net.n_nodes, net.n_edges, rel))
    _write_csv(out / "networks.csv", ("subfield_id", "year", "n_papers", "n_nodes", "n_edges", "file"), index)
    inputs = [out / "vocabulary.tsv", out / "concepts.tsv", out / "cells.tsv", out / "papers.jsonl"]
    return inputs, [out / "networks.csv"] + outputs


def _detect_cell(args):
    net, solver = args
    return detect_and_test(net, solver, NullDistributionCache())


def stage_detect(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    nets = _load_networks(out)
    cells = sorted(nets)
    solver = cfg.solver()
    asgs = _run_parallel(_detect_cell, [(nets[c], solver) for c in cells], cfg.jobs)
    node_rows, struct_rows = [], []
    for cell, asg in zip(cells, asgs):
        net = nets[cell]
        for label, ci, xi in sorted(zip(net.labels, asg.c, asg.x)):
            node_rows.append((cell[0], cell[1], label, int(ci), int(xi)))
        sizes = asg.structure_sizes()
        for k in range(asg.n_structures):
            n_core = int(np.count_nonzero((asg.c == k + 1) & (asg.x == 1)))
            struct_rows.append((cell[0], cell[1], k + 1, int(sizes[k]), n_core, float(asg.structure_quality[k]),
                                bool(asg.structure_sig[k]), asg.null_threshold, asg.qcp))
    _write_csv(out / "assignments.csv", ("subfield_id", "year", "concept", "structure", "core"), node_rows)
    _write_csv(out / "structures.csv", ("subfield_id", "year", "structure", "size", "n_core", "quality",
                                        "significant", "null_threshold", "qcp"), struct_rows)
    inputs = [out / "networks.csv"] + [out / _cell_file(*c) for c in cells]
    return inputs, [out / "assignments.csv", out / "structures.csv"]


SCHEMA = {
    "metrics.csv": [
        ("subfield_id", "subfield identifier"),
        ("year", "end year of the window"),
        ("churn", "share of this year's core concepts that were not core the year before; NA in the first year"),
        ("rel_core_size", "core nodes divided by all nodes"),
        ("n_cores", "number of significant core/periphery structures"),
        ("herfindahl", "sum of squared structure shares over significant structures; NA if none"),
        ("n_nodes", "concepts in the network"),
        ("n_core_nodes", "concepts labelled core"),
        ("n_structures", "structures found before the significance test"),
    ],
    "mobility.csv": [
        ("subfield_id", "subfield identifier"),
        ("year", "year t; transitions run from t-1 to t"),
        ("core_to_core", "share of t-1 core concepts still core at t"),
        ("core_to_periphery", "share of t-1 core concepts in the periphery at t"),
        ("core_exit", "share of t-1 core concepts absent at t"),
        ("periphery_to_periphery", "share of t-1 periphery concepts still periphery at t"),
        ("periphery_to_core", "share of t-1 periphery concepts core at t"),
        ("periphery_exit", "share of t-1 periphery concepts absent at t"),
    ],
    "meso_metrics.csv": [
        ("meso_id", "meso field"),
        ("year", "end year of the window"),
        ("churn", "unweighted mean over member subfields"),
        ("rel_core_size", "unweighted mean over member subfields"),
        ("n_cores", "unweighted mean over member subfields"),
        ("herfindahl", "unweighted mean over member subfields"),
        ("n_subfields", "member subfields with a row in this year"),
    ],
    "structure_churn.csv": [
        ("subfield_id", "subfield identifier"),
        ("year", "year t"),
        ("structure", "structure number at t (1 is the largest)"),
        ("size", "concepts in the structure, core and periphery"),
        ("churn", "share of the structure's core concepts outside every t-1 core"),
        ("is_largest", "1 for the largest significant structure"),
    ],
}


def stage_metrics(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    nets = _load_networks(out)
    results = _load_assignments(out, nets)
    rows = mx.metric_rows(results, cfg.herfindahl_basis)
    mx.write_rows(rows, out / "metrics.csv", mx.MetricRow)
    mx.write_rows(mx.mobility_rows(results), out / "mobility.csv", mx.MobilityRow)
    meso = mx.meso_average(rows, cfg.field_scheme(), mx.concept_totals(results), cfg.meso_min_concepts)
    mx.write_rows(meso, out / "meso_metrics.csv", mx.MesoRow)
    sc_rows = []
    for (sub, year) in sorted(results):
        prev = results.get((sub, year - 1))
        if prev is None:
            continue
        net, asg = results[(sub, year)]
        if asg.n_significant == 0:
            continue
        for r in mx.per_structure_churn(net, asg, mx.core_set(*prev)):
            sc_rows.append((sub, year, r.structure, r.size, r.churn, r.is_largest))
    _write_csv(out / "structure_churn.csv", [k for k, _ in SCHEMA["structure_churn.csv"]], sc_rows)
    _write_csv(out / "schema.csv", ("file", "column", "description"),
               [(f, col, desc) for f, cols in SCHEMA.items() for col, desc in cols])
    inputs = [out / "assignments.csv", out / "structures.csv", out / "networks.csv"]
    outs = ["metrics.csv", "mobility.csv", "meso_metrics.csv", "structure_churn.csv", "schema.csv"]
    return inputs, [out / f for f in outs]


def _null_subfield(args):
    cells, solver, cfg_tuple = args
    n_rep, swap_factor, accepted, seed = cfg_tuple
    cache = NullDistributionCache()
    rows = []
    prev_ens, prev_year = None, None
    for net, asg in cells:
        sub, year = net.cell
        try:
            ens = build_ensemble(net, n_rep, derive_seed(seed, "null"), solver, observed=asg,
                                 swap_factor=swap_factor, accepted_swaps=accepted, cache=cache)
        except ValueError as exc:
            log.warning("cell %s: null model skipped (%s)", net.cell, exc)
            prev_ens, prev_year = None, None
            continue
        prev = prev_ens if prev_year == year - 1 else None
        for r in null_compare(ens, ("churn", "rel_core_size", "n_cores"), prev=prev):
            rows.append((sub, year, r.metric_name, r.observed, r.null_mean, r.null_sd, r.z, r.n_replicates))
        prev_ens, prev_year = ens, year
    return rows


def stage_null_compare(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    nets = _load_networks(out)
    results = _load_assignments(out, nets)
    by_sub: dict[str, list] = defaultdict(list)
    for cell in sorted(results):
        by_sub[cell[0]].append(results[cell])
    solver = cfg.solver()
    params = (cfg.replicates, cfg.swap_factor, cfg.accepted_swaps, cfg.seed)
    chunks = _run_parallel(_null_subfield, [(by_sub[s], solver, params) for s in sorted(by_sub)], cfg.jobs)
    rows = [r for chunk in chunks for r in chunk]
    _write_csv(out / "nullmodel.csv", ("subfield_id", "year", "metric", "observed", "null_mean", "null_sd",
                                       "z", "n_replicates"), rows)
    return [out / "assignments.csv", out / "structures.csv", out / "networks.csv"], [out / "nullmodel.csv"]


def stage_cd_index(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    papers = _papers(out)
    graph = CitationGraph(papers)
    horizon = cfg.cd_horizon if cfg.cd_horizon is not None else graph.max_year
    rows = []
    for p in papers:
        if p.year > horizon:
            continue
        r = cd_index(graph, p.paper_id, horizon, include_ref_only=cfg.cd_include_ref_only)
        rows.append((p.paper_id, r.cd, r.n, r.n_focal_only, r.n_both, r.n_refs_only))
    _write_csv(out / "cd_index.csv", ("paper_id", "cd", "n", "n_focal_only", "n_both", "n_refs_only"), rows)
    return [out / "papers.jsonl"], [out / "cd_index.csv"]


def stage_consensus(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    dictionary = (ConsensusDictionary.read(cfg.consensus_dictionary) if cfg.consensus_dictionary
                  else ConsensusDictionary.default())
    markers = load_markers(cfg.markers or None)
    rows = []
    for p in _papers(out):
        s = consensus_count(p.abstract, dictionary, cfg.consensus_presence_only)
        rows.append((p.paper_id, s.consensus_count, s.n_nouns, s.n_adj, s.n_verbs, s.n_adv,
                     has_prior_work_comment(p.abstract, markers)))
    _write_csv(out / "consensus.csv", ("paper_id", "consensus_count", "n_nouns", "n_adj", "n_verbs", "n_adv",
                                       "has_prior_work_comment"), rows)
    inputs = [out / "papers.jsonl"] + [Path(p) for p in (cfg.consensus_dictionary, cfg.markers) if p]
    return inputs, [out / "consensus.csv"]


def _paper_table(out: Path, scheme: FieldScheme) -> list[dict]:
    """Paper rows joined with their primary subfield-year metrics."""
    metrics = {(r["subfield_id"], int(r["year"])): r for r in mx.read_csv(out / "metrics.csv")}
    cd = {r["paper_id"]: r for r in mx.read_csv(out / "cd_index.csv")}
    cons = {r["paper_id"]: r for r in mx.read_csv(out / "consensus.csv")}
    table = []
    for p in _papers(out):
        sub = _primary_subfield(p, scheme)
        m = metrics.get((sub, p.year))
        if m is None:
            continue
        ch, rel, nc = (mx.parse_value(m[k]) for k in ("churn", "rel_core_size", "n_cores"))
        if ch is None or rel is None or nc is None:
            continue
        table.append({"subfield": sub, "year": p.year, "churn": ch, "rel_core_size": rel,
                      "log_n_cores": math.log(nc + 1.0), "log_n_authors": math.log(max(p.author_count, 1)),
                      "cd": mx.parse_value(cd[p.paper_id]["cd"]) if p.paper_id in cd else None,
                      "consensus": int(cons[p.paper_id]["consensus_count"]),
                      "log_n_nouns": math.log(int(cons[p.paper_id]["n_nouns"]) + 1.0),
                      "prior_work": cons[p.paper_id]["has_prior_work_comment"] == "1"})
    return table


_CP_TERMS = ("churn", "rel_core_size", "log_n_cores")


def _fit_models(out: Path, scheme: FieldScheme) -> list[tuple[str, str, object]]:
    """``(name, description, result or error message)`` for each specification."""
    specs = []
    mrows = [r for r in mx.read_csv(out / "metrics.csv") if r["churn"] != "NA"]
    specs.append(("churn_trend_subfield", "OLS churn ~ year + subfield FE",
                  lambda: ols_fe([float(r["churn"]) for r in mrows], {"year": [float(r["year"]) for r in mrows]},
                                 {"subfield": [r["subfield_id"] for r in mrows]}, test=["year"])))
    meso = [r for r in mx.read_csv(out / "meso_metrics.csv") if r["churn"] != "NA"]
    fe = {"meso": [r["meso_id"] for r in meso]} if len({r["meso_id"] for r in meso}) > 1 else None
    specs.append(("churn_trend_meso", "OLS meso churn ~ year + meso FE",
                  lambda: ols_fe([float(r["churn"]) for r in meso], {"year": [float(r["year"]) for r in meso]},
                                 fe, test=["year"])))
    papers = _paper_table(out, scheme)
    cd_rows = [r for r in papers if r["cd"] is not None]
    specs.append(("cd_index", "OLS CD index ~ churn + rel_core_size + log(cores+1) + log(authors) + subfield FE",
                  lambda: ols_fe([r["cd"] for r in cd_rows],
                                 {k: [r[k] for r in cd_rows] for k in _CP_TERMS + ("log_n_authors",)},
                                 {"subfield": [r["subfield"] for r in cd_rows]}, test=list(_CP_TERMS))))
    cons_rows = [r for r in papers if r["prior_work"]]
    specs.append(("consensus", "Poisson consensus words ~ churn + rel_core_size + log(cores+1) + log(nouns+1)"
                  " + subfield FE, abstracts commenting on prior work",
                  lambda: poisson_fit([r["consensus"] for r in cons_rows],
                                      {k: [r[k] for r in cons_rows] for k in _CP_TERMS + ("log_n_nouns",)},
                                      {"subfield": [r["subfield"] for r in cons_rows]}, test=list(_CP_TERMS))))
    fitted = []
    for name, desc, fit in specs:
        try:
            fitted.append((name, desc, fit()))
        except (CollinearityError, ConvergenceError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("model %s not estimable: %s", name, exc)
            fitted.append((name, desc, f"not estimable: {exc}"))
    return fitted


def stage_regress(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    fitted = _fit_models(out, cfg.field_scheme())
    text, rows = [], []
    for name, desc, res in fitted:
        text.append(f"== {name}: {desc}")
        if isinstance(res, str):
            text.append(res)
        else:
            text.append(res.summary())
            for term, coef, se, stat, p in res.rows():
                rows.append((name, res.model, term, coef, se, stat, p, res.n_obs, res.test_kind,
                             res.test_stat, res.test_pvalue))
        text.append("")
    with open(out / "regression_report.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(text))
    _write_csv(out / "regression_report.csv", ("model", "kind", "term", "coef", "se", "stat", "p", "n_obs",
                                               "joint_test", "joint_stat", "joint_p"), rows)
    inputs = [out / f for f in ("metrics.csv", "meso_metrics.csv", "cd_index.csv", "consensus.csv", "papers.jsonl")]
    return inputs, [out / "regression_report.txt", out / "regression_report.csv"]


_ORIENTATION = {"churn": "decrease", "rel_core_size": "decrease", "n_cores": "increase", "herfindahl": "decrease"}


def stage_report(cfg: RunConfig, out: Path) -> tuple[list[Path], list[Path]]:
    meso = mx.read_csv(out / "meso_metrics.csv")
    sub = mx.read_csv(out / "metrics.csv")
    pc_rows = []
    lines = ["Core/periphery pipeline report", ""]
    for level, rows, key in (("meso", meso, "meso_id"), ("subfield", sub, "subfield_id")):
        series: dict[str, dict[str, dict[int, float | None]]] = defaultdict(lambda: defaultdict(dict))
        for r in rows:
            for metric in _ORIENTATION:
                series[r[key]][metric][int(r["year"])] = mx.parse_value(r[metric])
        for unit in sorted(series):
            for metric, orient in _ORIENTATION.items():
                s = series[unit][metric]
                defined = sorted(y for y, v in s.items() if v is not None)
                if len(defined) < 2:
                    continue
                y0 = cfg.change_start if cfg.change_start in s else defined[0]
                y1 = cfg.change_end if cfg.change_end in s else defined[-1]
                pc_rows.append((level, unit, metric, orient, y0, y1, s[y0], s[y1],
                                mx.percent_change(s, y0, y1, orient)))
    _write_csv(out / "percent_change.csv", ("level", "unit", "metric", "orientation", "year_start", "year_end",
                                            "value_start", "value_end", "percent_change"), pc_rows)
    lines.append(f"{'level':<9}{'unit':<28}{'metric':<15}{'years':<11}{'start':>10}{'end':>10}{'% change':>10}")
    for level, unit, metric, orient, y0, y1, v0, v1, pc in pc_rows:
        f = (lambda v: "NA" if v is None else f"{v:.4f}")
        pcs = "NA" if pc is None else f"{pc:.1f}"
        lines.append(f"{level:<9}{unit[:27]:<28}{metric:<15}{f'{y0}-{y1}':<11}{f(v0):>10}{f(v1):>10}{pcs:>10}")
    lines.append("")
    lines.append("Percent change is (start - end) / start * 100 for decreasing quantities "
                 "and (end - start) / start * 100 for core counts.")
    if (out / "regression_report.txt").exists():
        lines += ["", (out / "regression_report.txt").read_text(encoding="utf-8")]
    with open(out / "report.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines).rstrip("\n") + "\n")
    inputs = [out / "meso_metrics.csv", out / "metrics.csv"]
    if (out / "regression_report.txt").exists():
        inputs.append(out / "regression_report.txt")
    return inputs, [out / "report.txt", out / "percent_change.csv"]


STAGE_FUNCS = {
    "extract": stage_extract,
    "build-net": stage_build_net,
    "detect": stage_detect,
    "metrics": stage_metrics,
    "null-compare": stage_null_compare,
    "cd-index": stage_cd_index,
    "consensus": stage_consensus,
    "regress": stage_regress,
    "report": stage_report,
}


def run_stage(name: str, cfg: RunConfig) -> None:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out)
    manifest.check_upstream(name, cfg)
    t0 = time.perf_counter()
    inputs, outputs = STAGE_FUNCS[name](cfg, out)
    manifest.record(name, cfg, inputs, outputs)
    log.info("%s finished in %.1f s", name, time.perf_counter() - t0)


def run_pipeline(cfg: RunConfig, stages: Sequence[str] = STAGES) -> None:
    cfg.validate()
    for name in stages:
        run_stage(name, cfg)


# -------------------------------------------------------------------- parser

def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags override its values")
    p.add_argument("--out-dir", dest="out_dir", help="artifact directory (default coreperi_out)")
    p.add_argument("--corpus", help="JSON-lines corpus")
    p.add_argument("--scheme", help="'social', 'physics' or a field-scheme TSV path")
    p.add_argument("--assignment-mode", dest="assignment_mode", choices=("primary_only", "all_listed"))
    p.add_argument("--year-start", dest="year_start", type=int)
    p.add_argument("--year-end", dest="year_end", type=int)
    p.add_argument("--window", type=int, help="years per network window")
    p.add_argument("--threshold", choices=("proportional", "min_count", "min10"))
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--restarts", type=int, help="label-switching restarts")
    p.add_argument("--kicks", type=int, help="iterated local search rounds (0 = plain heuristic)")
    p.add_argument("--seed", type=int, help="global seed (also COREPERI_SEED)")
    p.add_argument("--alpha", type=float, help="significance level before the Sidak correction")
    p.add_argument("--sig-samples", dest="sig_samples", type=int)
    p.add_argument("--single-core", dest="single_core", action="store_const", const=True)
    p.add_argument("--no-significance", dest="significance", action="store_const", const=False)
    p.add_argument("--replicates", type=int, help="rewired replicates per cell")
    p.add_argument("--swap-factor", dest="swap_factor", type=int)
    p.add_argument("--accepted-swaps", dest="accepted_swaps", action="store_const", const=True)
    p.add_argument("--herfindahl-basis", dest="herfindahl_basis", choices=("all", "core"))
    p.add_argument("--jobs", type=int, help="worker processes across cells")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coreperi", description=__doc__.split("\n\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("run",):
        p = sub.add_parser(name, help="all stages in order" if name == "run" else f"run the {name} stage")
        _add_overrides(p)
    p = sub.add_parser("demo", help="write the bundled synthetic corpus and run every stage on it")
    _add_overrides(p)
    return parser


DEMO_FILES = ("demo_corpus.jsonl", "scheme_demo.tsv", "demo.cfg")


def _prepare_demo(args: argparse.Namespace) -> None:
    target = Path(args.out_dir or "coreperi_demo")
    inputs = target / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    for name in DEMO_FILES:
        shutil.copyfile(data_path(name), inputs / name)
    args.config = str(inputs / "demo.cfg")
    args.out_dir = str(target)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "demo":
            _prepare_demo(args)
        cfg = resolve_config(args)
        cfg.validate()
        if args.command in ("run", "demo"):
            run_pipeline(cfg)
            print(f"pipeline complete; artifacts in {cfg.out_dir}")
        else:
            run_stage(args.command, cfg)
    except PipelineError as exc:
        print(f"coreperi {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"coreperi {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
