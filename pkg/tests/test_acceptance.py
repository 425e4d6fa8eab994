"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line, printed in the
terminal summary and to stdout (visible with ``-s``).
"""
import itertools
import logging
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from _oracles import (churn_oracle, herfindahl_oracle, mobility_oracle, percent_change_oracle, qcp_literal,
                      qcp_max_subset_dp, random_simple_graph, cd_brute)
from conftest import ACCEPTANCE
from coreperi import cli
from coreperi import metrics as mx
from coreperi._data import data_path
from coreperi.coreperiphery import SolverConfig, detect, detect_and_test, increment, qcp
from coreperi.ingest import write_corpus
from coreperi.network import ConceptNetwork
from coreperi.nullmodel import build_ensemble, null_compare, rewire
from coreperi.scientometrics import cd_index, consensus_count, default_consensus_terms
from coreperi.stats import ols_fe, poisson_fit, welch_t
from coreperi.synthetic import demo_corpus, er_network, planted_blocks, planted_network
from test_metrics import cell
from test_scientometrics import S14, build_family_member, graph_from, constrained_family


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_criterion_01_global_optimum():
    rng = np.random.default_rng(2024)
    misses, elapsed = 0, 0.0
    for k in range(200):
        n = int(rng.integers(3, 10))
        adj = random_simple_graph(n, rng.uniform(0.1, 0.9), rng)
        if adj.sum() == 0:
            adj[0, 1] = adj[1, 0] = 1
        t0 = time.perf_counter()
        asg = detect(ConceptNetwork.from_adjacency(adj), SolverConfig(rng_seed=k, significance=False))
        elapsed += time.perf_counter() - t0
        best = qcp_max_subset_dp(adj)
        misses += abs(asg.qcp - best) > 1e-9 or abs(qcp_literal(adj, asg.c, asg.x) - best) > 1e-9
    verdict(1, misses == 0 and elapsed < 120, f"{200 - misses}/200 graphs at the exact maximum, detect {elapsed:.1f} s")


def test_criterion_02_increment():
    rng = np.random.default_rng(7)
    worst, moves = 0.0, 0
    for _ in range(50):
        n = int(rng.integers(2, 13))
        adj = random_simple_graph(n, rng.uniform(0.1, 0.9), rng)
        if adj.sum() == 0:
            adj[0, 1] = adj[1, 0] = 1
        net = ConceptNetwork.from_adjacency(adj)
        c = rng.integers(0, max(2, n // 3), size=n)
        x = rng.integers(0, 2, size=n)
        base = qcp_literal(adj, c, x)
        for i in range(n):
            # every existing label plus a fresh one, with both coreness values
            for new_c, new_x in itertools.product(range(int(c.max()) + 2), (0, 1)):
                c2, x2 = c.copy(), x.copy()
                c2[i], x2[i] = new_c, new_x
                worst = max(worst, abs(increment(net, c, x, i, new_c, new_x) - (qcp_literal(adj, c2, x2) - base)))
                moves += 1
    verdict(2, worst < 1e-9, f"{moves} moves on 50 graphs, max |error| {worst:.2e}")


def _accuracy(c_true, x_true, c, x):
    """Node accuracy under the best one-to-one matching of detected to planted structures."""
    labels = sorted(set(c.tolist()))
    truth = sorted(set(c_true.tolist()))
    best = 0
    for perm in itertools.permutations(truth + [None] * max(0, len(labels) - len(truth)), len(labels)):
        mapping = dict(zip(labels, perm))
        ok = sum(mapping[c[i]] == c_true[i] and x[i] == x_true[i] for i in range(len(c)))
        best = max(best, ok)
    return best / len(c)


def test_criterion_03_planted_recovery():
    accs, two = [], 0
    for seed in range(20):
        rng = np.random.default_rng(300 + seed)
        net, c_true, x_true = planted_network([(5, 15), (5, 15)], noise=0.05, rng=rng)
        asg = detect_and_test(net, SolverConfig(rng_seed=seed))
        accs.append(_accuracy(c_true, x_true, asg.c, asg.x))
        two += asg.n_significant == 2
    ok = min(accs) >= 0.95 and two >= 18
    verdict(3, ok, f"min accuracy {min(accs):.3f}, mean {np.mean(accs):.3f}; 2 significant in {two}/20 (5% noise)")


def test_criterion_04_idealized_value():
    worst = 0.0
    for nc, npr in [(1, 1), (1, 5), (3, 3), (4, 6), (6, 2), (10, 30), (25, 5)]:
        adj, c, x = planted_blocks([(nc, npr)])
        net = ConceptNetwork.from_adjacency(adj)
        n, m = net.n_nodes, net.n_edges
        p = m / (n * (n - 1) / 2)
        worst = max(worst, abs(qcp(net, c, x) - m * (1 - p)))
    verdict(4, worst < 1e-9, f"7 block shapes, max |qcp - M(1-p)| {worst:.2e}")


def test_criterion_05_metric_formulas():
    rng = np.random.default_rng(55)
    words = [f"c{k}" for k in range(30)]
    bad = 0
    for _ in range(100):
        labels_prev = sorted(rng.choice(words, size=int(rng.integers(3, 20)), replace=False))
        labels_cur = sorted(rng.choice(words, size=int(rng.integers(3, 20)), replace=False))
        prev = cell(labels_prev, rng.integers(1, 4, len(labels_prev)), rng.integers(0, 2, len(labels_prev)))
        c = np.unique(rng.integers(1, 4, len(labels_cur)), return_inverse=True)[1] + 1
        sig = rng.random(c.max()) < 0.7
        cur = cell(labels_cur, c, rng.integers(0, 2, len(labels_cur)), sig)
        pc = {labels_prev[i]: ("core" if prev[1].x[i] else "periphery") for i in range(len(labels_prev))}
        cc = {labels_cur[i]: ("core" if cur[1].x[i] else "periphery") for i in range(len(labels_cur))}
        core_t = [a for a, k in cc.items() if k == "core"]
        core_p = [a for a, k in pc.items() if k == "core"]
        rel = float(Fraction(len(core_t), len(cc)))
        got_rel = mx.relative_core_size(cur[1])
        v0, v1 = float(rng.uniform(0.01, 1)), float(rng.uniform(0, 1))
        checks = [
            mx.churn(mx.core_set(*cur), mx.core_set(*prev)) == churn_oracle(core_t, core_p),
            got_rel == rel,
            mx.herfindahl(cur[1]) == herfindahl_oracle(list(cur[1].c), list(sig)),
            mx.mobility_fractions(mx.core_set(*prev), mx.periphery_set(*prev),
                                  mx.core_set(*cur), mx.periphery_set(*cur)) == mobility_oracle(pc, cc),
            mx.percent_change({0: v0, 1: v1}, 0, 1, "decrease") == percent_change_oracle(v0, v1, "decrease"),
            mx.percent_change({0: v0, 1: v1}, 0, 1, "increase") == percent_change_oracle(v0, v1, "increase"),
        ]
        bad += not all(checks)
    verdict(5, bad == 0, f"{100 - bad}/100 randomized fixture pairs exact on all five metrics")


def _planted_core_dominant(rng):
    adj, _, _ = planted_blocks([(6, 2)] * 5, noise=0.01, rng=rng)
    return ConceptNetwork.from_adjacency(adj)


def test_criterion_06_null_model():
    rng = np.random.default_rng(60)
    fixtures = [er_network(int(rng.integers(10, 40)), float(rng.uniform(0.1, 0.5)), rng) for _ in range(5)]
    fixtures += [planted_network([(4, 8), (3, 9)], 0.05, rng)[0] for _ in range(5)]
    preserved = all(np.array_equal(rewire(g, seed).degrees, g.degrees)
                    for g in fixtures for seed in range(100))

    cfg = SolverConfig(n_kicks=200)
    pos = 0
    for s in range(20):
        net = _planted_core_dominant(np.random.default_rng(100 + s))
        ens = build_ensemble(net, 100, seed=s, cfg=replace(cfg, rng_seed=s))
        z = null_compare(ens, ["rel_core_size"])[0].z
        pos += z is not None and z > 1.645

    calm = {"rel_core_size": 0, "n_cores": 0, "churn": 0}
    for s in range(20):
        rng = np.random.default_rng(200 + s)
        g0 = ConceptNetwork.from_adjacency(random_simple_graph(40, 0.15, rng))
        g1 = ConceptNetwork.from_adjacency(random_simple_graph(40, 0.15, rng))
        e0 = build_ensemble(g0, 100, seed=s, cfg=replace(cfg, rng_seed=s))
        e1 = build_ensemble(g1, 100, seed=s + 1000, cfg=replace(cfg, rng_seed=s))
        for r in null_compare(e1, list(calm), prev=e0):
            # an undefined z (zero null spread) is not a departure from the null
            calm[r.metric_name] += r.z is None or abs(r.z) < 1.96
    ok = preserved and pos >= 18 and all(v >= 18 for v in calm.values())
    verdict(6, ok, f"degrees preserved={preserved}; planted z>1.645 in {pos}/20; ER |z|<1.96 in "
                   + ", ".join(f"{k} {v}/20" for k, v in calm.items()))


def test_criterion_07_cd_index():
    mismatches = count = 0
    for member in constrained_family():
        g, adj, focal, include = build_family_member(*member)
        for ref_only in (True, False):
            mismatches += cd_index(g, "f", include_ref_only=ref_only).cd != cd_brute(adj, focal, include, ref_only)
        count += 1
    rng = np.random.default_rng(70)
    out_of_range = 0
    for _ in range(1000):
        n = int(rng.integers(2, 30))
        years = {f"p{i}": int(y) for i, y in enumerate(np.sort(rng.integers(0, 10, n)))}
        refs = {f"p{i}": [f"p{j}" for j in range(i) if rng.random() < 0.3] for i in range(n)}
        g = graph_from(refs, years)
        for p in refs:
            v = cd_index(g, p).cd
            out_of_range += v is not None and not -1 <= v <= 1
    verdict(7, mismatches == 0 and out_of_range == 0,
            f"{count} exhaustive graphs x 2 modes, {mismatches} mismatches; {out_of_range} out of range on 1000 random")


CONSENSUS_WORDS = """acceptable accessible accordance account advantageous agree agreement apply archetypal
attributable base benefit compatible complement confirm connection consensus consistent consistently correct
correctly develop exemplify explainable fit highlight ideal illustrate implement inspire noteworthy perfect
reinforce relevant similar substantiate suitable support uniformly unify valid verify""".split()


def test_criterion_08_consensus():
    score = consensus_count(S14)
    terms = sorted(default_consensus_terms())
    ok = score.consensus_count >= 1 and "agreement" in score.matches and terms == CONSENSUS_WORDS
    verdict(8, ok, f"example sentence scores {score.consensus_count} ({', '.join(score.matches)}); "
                   f"dictionary {len(terms)} entries, verbatim={terms == CONSENSUS_WORDS}")


def test_criterion_09_directional_replication(tmp_path):
    logging.disable(logging.WARNING)
    try:
        recs, truth = demo_corpus(600, seed=0)
        write_corpus(recs, tmp_path / "corpus.jsonl")
        cfg = cli.RunConfig(corpus=str(tmp_path / "corpus.jsonl"), scheme=str(data_path("scheme_demo.tsv")),
                            threshold="min_count", min_count=2, meso_min_concepts=20, kicks=200, seed=0,
                            out_dir=str(tmp_path / "out"))
        cli.run_pipeline(cfg, ("extract", "build-net", "detect", "metrics"))
    finally:
        logging.disable(logging.NOTSET)
    meso = [r for r in mx.read_csv(tmp_path / "out" / "meso_metrics.csv") if r["churn"] != "NA"]
    res = ols_fe([float(r["churn"]) for r in meso], {"year": [float(r["year"]) for r in meso]},
                 {"meso": [r["meso_id"] for r in meso]})
    b, se = res.coefficient("year")
    p = res.pvalues[res.names.index("year")]
    verdict(9, b < 0 and p < 0.05, f"meso churn ~ year + meso FE: coefficient {b:.4f} (se {se:.4f}), p={p:.2e}")


def test_criterion_10_determinism(tmp_path):
    times = []
    for name in ("a", "b"):
        t0 = time.perf_counter()
        assert cli.main(["demo", "--out-dir", str(tmp_path / name)]) == 0
        times.append(time.perf_counter() - t0)
    csvs = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    differ = [str(p) for p in csvs if (tmp_path / "a" / p).read_bytes() != (tmp_path / "b" / p).read_bytes()]
    ok = not differ and len(csvs) >= 12 and max(times) < 300
    verdict(10, ok, f"{len(csvs)} CSV artifacts, {len(differ)} differ; demo runs {times[0]:.1f} s and {times[1]:.1f} s")


def test_criterion_11_stats_kernel():
    within = 0
    for seed in range(20):
        rng = np.random.default_rng(1100 + seed)
        n = 400
        x = rng.normal(size=n)
        z = rng.uniform(0, 5, size=n)
        g = rng.choice(list("abcd"), size=n)
        y = 2.0 + 0.7 * x - 0.3 * z + (g == "c") * 1.5 + rng.normal(0, 1, n)
        b, se = ols_fe(y, {"x": x, "z": z}, {"g": g}).coefficient("x")
        within += abs(b - 0.7) < 2 * se

    worst_ll = 0.0
    for seed in range(10):
        counts = np.random.default_rng(seed).poisson(np.random.default_rng(seed + 50).uniform(0.2, 20), 60)
        if counts.sum() == 0:
            continue
        worst_ll = max(worst_ll, abs(poisson_fit(counts).coef[0] - np.log(counts.mean())))

    rng = np.random.default_rng(111)
    anti = True
    for _ in range(500):
        a = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 10), int(rng.integers(2, 40)))
        b = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 10), int(rng.integers(2, 40)))
        r, s = welch_t(a, b), welch_t(b, a)
        anti &= r.t == -s.t and r.dof == s.dof and r.p == s.p
    ok = within >= 18 and worst_ll < 1e-6 and anti
    verdict(11, ok, f"OLS within 2 SE in {within}/20; Poisson max |b0 - ln(mean)| {worst_ll:.1e}; "
                    f"Welch antisymmetry exact={anti}")
