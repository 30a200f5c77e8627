"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary
(see conftest.py), so ``pytest -v`` shows the gate without ``-s``.
"""

from __future__ import annotations

import math
import random
import time

import pytest

from randdata import TAUS, rand_corpus, rand_query, rand_region, rand_records
from roisim import storage
from roisim.cli import main as cli_main
from roisim.datagen import gen_queries, gen_synthetic
from roisim.filter import Engine, EngineConfig, build_index, hybrid_filter_plus, sig_filter_plus
from roisim.gridtree import GridTree, node_id, parent
from roisim.hss import cut_error, hss_greedy, optimal_cut
from roisim.index import Bucketer, build_grid_index, build_hybrid_index, corpus_grid, probe, ProbeCounter
from roisim.model import Corpus, Region, brute_force_search, intersection_area, spatial_jaccard
from roisim.signature import (
    GridOrder,
    THRESHOLD_SLACK,
    GridPartition,
    effective_thresholds,
    grid_signature,
    select_prefix,
    suffix_bounds,
    textual_signature,
    thresholds,
)

RESULTS: list[str] = []


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    RESULTS.append(line)
    print(line)


def fixture_corpus() -> Corpus:
    return Corpus.from_records(
        [
            (0, Region(10, 10, 50, 50), ["t1", "t2"]),
            (1, Region(20, 20, 60, 60), ["t3", "t1", "t2"]),
            (2, Region(0, 0, 100, 100), ["t4"]),
        ]
    )


# -- 1 -----------------------------------------------------------------------

COMPLETENESS_CONFIGS = (
    EngineConfig("token"),
    EngineConfig("grid", granularity=4),
    EngineConfig("grid", granularity=16),
    EngineConfig("grid", granularity=64),
    EngineConfig("hybrid", granularity=16, buckets=16),
    EngineConfig("hybrid", granularity=16, buckets=None),
    EngineConfig("hierarchical", mt=2),
    EngineConfig("hierarchical", mt=4),
    EngineConfig("hierarchical", mt=16),
    EngineConfig("keyword-first"),
    EngineConfig("spatial-first", granularity=16),
)

# (corpus size, corpora, queries per corpus): 10,000 trials in total
COMPLETENESS_PLAN = ((10, 100, 40), (100, 40, 100), (1000, 4, 500))


def test_criterion_1_oracle_completeness():
    rng = random.Random(20240601)
    t0 = time.perf_counter()
    trials = mismatches = nonempty = 0
    first_bad = None
    for n, corpora, per in COMPLETENESS_PLAN:
        for _ in range(corpora):
            corpus = rand_corpus(rng, n)
            engines = [Engine(corpus, cfg) for cfg in COMPLETENESS_CONFIGS]
            for _ in range(per):
                q = rand_query(rng, corpus, TAUS)
                expected = brute_force_search(q, corpus).ids
                trials += 1
                nonempty += bool(expected)
                for e in engines:
                    got = e.search(q)[0].ids
                    if got != expected:
                        mismatches += 1
                        first_bad = first_bad or (e.config, q, expected, got)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and trials == 10_000 and elapsed < 300
    record(
        1,
        ok,
        f"{trials} trials x {len(COMPLETENESS_CONFIGS)} configs, {mismatches} mismatches, "
        f"{nonempty} trials with answers, {elapsed:.0f}s",
    )
    assert first_bad is None, first_bad
    assert trials == 10_000
    assert elapsed < 300


# -- 2 -----------------------------------------------------------------------

def test_criterion_2_worked_examples():
    checks = {}
    # the 1000/4400 spatial example
    q, o = Region(0, 0, 40, 60), Region(20, 10, 70, 70)
    checks["overlap 1000"] = intersection_area(q, o) == 1000.0
    checks["sim_R 0.227"] = round(spatial_jaccard(q, o), 3) == round(1000 / 4400, 3) == 0.227

    corpus = fixture_corpus()
    query = corpus.query(Region(10, 10, 50, 50), ["t1", "t2", "t3"], tau_r=0.25, tau_t=0.3)
    c_t, c_r = thresholds(query, corpus.table)
    checks["c_T 0.5729"] = math.isclose(c_t, 0.3 * (2 * math.log(3 / 2) + math.log(3)))
    checks["c_T rounds"] = round(c_t, 4) == 0.5729
    checks["c_R 400"] = c_r == 400.0
    ts = textual_signature(query.tokens, corpus.table)
    checks["textual prefix 2"] = select_prefix(ts, c_t) == 2
    checks["prefix starts t3"] = corpus.table.token(ts.elements[0]) == "t3"

    grid = GridPartition(corpus.space, 2)
    order = GridOrder.from_regions((x.region for x in corpus.objects), grid)
    sig_b = grid_signature(corpus.by_id[1].region, grid, order)
    checks["oB signature"] = sig_b.elements == (1, 2, 3, 0) and sig_b.weights == (300.0, 300.0, 100.0, 900.0)
    checks["oB bounds"] = suffix_bounds(sig_b) == [1600.0, 1300.0, 1000.0, 900.0]

    index = build_grid_index(corpus, grid, order)
    pl = index.lists[0]
    checks["list(c0)"] = pl.ids == [2, 0, 1] and pl.bound_r == [2500.0, 1600.0, 900.0]
    counter = ProbeCounter()
    hits = probe(index, 0, 1000.0, counter)
    checks["early stop"] = hits == [2, 0] and counter.postings == 3

    for method in ("token", "grid", "hybrid", "hierarchical"):
        ans, _ = Engine(corpus, EngineConfig(method, granularity=2)).search(query)
        checks[f"{method} answers"] = ans.ids == [0, 1]
    bad = [k for k, v in checks.items() if not v]
    record(2, not bad, f"{len(checks) - len(bad)}/{len(checks)} checks" + (f", failed {bad}" if bad else ""))
    assert not bad


# -- 3 -----------------------------------------------------------------------

def _region_pairs(rng: random.Random, count: int):
    for _ in range(count):
        yield rand_region(rng), rand_region(rng)


def test_criterion_3_bound_properties():
    rng = random.Random(7)
    space = Region(0, 0, 130, 130)
    grids = {p: GridPartition(space, p) for p in (1, 3, 4, 8, 16)}
    v1 = v2 = v3 = 0
    pairs = 100_000
    # spatial properties under a per-trial random grid order
    for qr, orr in _region_pairs(rng, pairs):
        grid = grids[rng.choice((1, 3, 4, 8, 16))]
        counts = {c: rng.randrange(5) for c in range(grid.num_cells)}
        order = GridOrder(counts)
        qs = grid_signature(qr, grid, order)
        os_ = grid_signature(orr, grid, order)
        overlap = intersection_area(qr, orr)
        qw, ow = qs.as_dict(), os_.as_dict()
        est = math.fsum(min(w, ow[g]) for g, w in qw.items() if g in ow)
        if est < overlap * (1 - 1e-12) - 1e-9:
            v1 += 1
        tau = rng.choice((0.1, 0.25, 0.4, 0.5, 1.0))
        c = tau * qr.area
        # probing uses the slackened threshold; cell areas can sum a few ulps short of |q.R|
        c_eff = c - THRESHOLD_SLACK * qr.area
        if c > 0 and overlap >= c:
            pre = set(qs.elements[: select_prefix(qs, c_eff)])
            if not pre & set(os_.elements):
                v2 += 1
        common = [g for g in os_.elements if g in qw]
        if common and c > 0:
            first = common[0]
            bound = suffix_bounds(os_)[os_.elements.index(first)]
            if bound < c_eff and overlap >= c:
                v3 += 1
    # textual properties on random token sets
    tpairs = 100_000
    for _ in range(tpairs // 1000):
        corpus = rand_corpus(rng, 60, vocab=25)
        objs = corpus.objects
        for _ in range(1000):
            a, b = rng.choice(objs), rng.choice(objs)
            q = corpus.query(a.region, [corpus.table.token(t) for t in a.tokens], 0.0, rng.choice(TAUS[1:]))
            sim_hits = brute_force_search(q, Corpus([b], corpus.table)).ids
            c_t, _ = effective_thresholds(q, corpus.table)
            if c_t <= 0 or not sim_hits:
                continue
            qs = textual_signature(q.tokens, corpus.table)
            bs = textual_signature(b.tokens, corpus.table)
            pre = set(qs.elements[: select_prefix(qs, c_t)])
            if not pre & set(bs.elements):
                v2 += 1
            first = next(t for t in bs.elements if t in set(qs.elements))
            if suffix_bounds(bs)[bs.elements.index(first)] < c_t:
                v3 += 1
    total = v1 + v2 + v3
    record(3, total == 0, f"{pairs} spatial + {tpairs} textual pairs; violations: lower bound {v1}, prefix necessity {v2}, bound pruning {v3}")
    assert total == 0


# -- 4 -----------------------------------------------------------------------

def test_criterion_4_refinement_monotonicity():
    rng = random.Random(11)
    space = Region(0, 0, 130, 130)
    parts = [GridPartition(space, p) for p in (2, 4, 8, 16)]
    violations = 0
    for _ in range(1000):
        qr, orr = rand_region(rng), rand_region(rng)
        overlap = intersection_area(qr, orr)
        ests = []
        for grid in parts:
            qa, oa = dict(grid.overlaps(qr)), dict(grid.overlaps(orr))
            ests.append(math.fsum(min(w, oa[g]) for g, w in qa.items() if g in oa))
        eps = 1e-9 * max(1.0, qr.area, orr.area)
        violations += sum(1 for a, b in zip(ests, ests[1:]) if b > a + eps)
        violations += sum(1 for e in ests if e < overlap - eps)
    record(4, violations == 0, f"1000 pairs over p in (2, 4, 8, 16), {violations} violations")
    assert violations == 0


# -- 5 -----------------------------------------------------------------------

def test_criterion_5_candidate_trend():
    records = gen_synthetic(10_000, seed=5)
    corpus = Corpus.from_records(records)
    queries = [
        corpus.query(Region(*d["mbr"]), d["tokens"], d["tau_r"], d["tau_t"])
        for d in gen_queries(records, 100, "small", seed=6)
    ]
    grid_means, hybrid_means = {}, {}
    for p in (16, 32, 64, 128, 256):
        grid, order = corpus_grid(corpus, p)
        gi = build_grid_index(corpus, grid, order)
        hi = build_hybrid_index(corpus, grid, Bucketer(None), order)
        grid_means[p] = sum(len(sig_filter_plus(q, gi, corpus)) for q in queries) / len(queries)
        hybrid_means[p] = sum(len(hybrid_filter_plus(q, hi, corpus)) for q in queries) / len(queries)
    ps = sorted(grid_means)
    trend = all(grid_means[b] <= grid_means[a] * 1.05 for a, b in zip(ps, ps[1:]))
    hybrid = all(hybrid_means[p] <= grid_means[p] for p in ps)
    detail = ", ".join(f"p={p}: grid {grid_means[p]:.2f} hybrid {hybrid_means[p]:.2f}" for p in ps)
    record(5, trend and hybrid, detail)
    assert trend, grid_means
    assert hybrid, (grid_means, hybrid_means)


# -- 6 -----------------------------------------------------------------------

def _is_tiling(tree: GridTree, nodes) -> bool:
    ids = {node_id(lv, c) for lv, c in nodes}
    if len(ids) != len(nodes):
        return False
    # antichain: no selected node has a selected ancestor
    for lv, c in nodes:
        while lv > 0:
            lv, c = parent(lv, c)
            if node_id(lv, c) in ids:
                return False
    # cover: the selected levels' leaf counts add up to the whole tree
    leaves = sum(4 ** (tree.height - lv) for lv, _ in nodes)
    return leaves == 4**tree.height


def test_criterion_6_hss_validity():
    rng = random.Random(13)
    space = Region(0, 0, 100, 100)
    bad = 0
    for i in range(1000):
        tree = GridTree(space, rng.choice((1, 2, 3, 4, 5)))
        regions = [rand_region(rng) for _ in range(rng.randint(1, 25))]
        m_t = rng.randint(2, 40)
        gset = hss_greedy(i, regions, m_t, tree)
        if len(gset) > m_t or not _is_tiling(tree, gset.nodes):
            bad += 1
    # greedy against the exhaustive optimum on depth-2 trees
    ratios = []
    tree = GridTree(space, 2)
    for i in range(200):
        regions = [rand_region(rng) for _ in range(rng.randint(1, 12))]
        m_t = rng.randint(2, 16)
        greedy = hss_greedy(i, regions, m_t, tree)
        g_err = cut_error(tree, greedy.nodes, regions)
        _, opt = optimal_cut(tree, regions, m_t)
        ratios.append(1.0 if g_err == opt == 0 else (g_err / opt if opt > 0 else float("inf")))
    finite = [r for r in ratios if math.isfinite(r)]
    mean = sum(finite) / len(finite)
    record(
        6,
        bad == 0,
        f"1000 sets, {bad} invalid; depth-2 greedy/optimal error ratio mean {mean:.3f} "
        f"max {max(finite):.3f}, {len(ratios) - len(finite)} nonzero against a zero optimum",
    )
    assert bad == 0


# -- 7 -----------------------------------------------------------------------

@pytest.mark.parametrize("method", ["token", "grid", "hybrid", "hierarchical"])
def test_criterion_7_persistence(method):
    rng = random.Random(f"persist-{method}")
    failures = 0
    for i in range(100):
        corpus = rand_corpus(rng, rng.randint(0, 60))
        cfg = EngineConfig(
            method,
            granularity=rng.choice((1, 2, 5, 16)),
            buckets=rng.choice((None, 7, 1024)),
            mt=rng.choice((2, 4, 16)),
            height=rng.choice((2, 5, 13)),
        )
        index = build_index(corpus, cfg)
        blob = storage.dumps(index)
        back = storage.loads(blob)
        same = back == index and storage.dumps(back) == blob
        if corpus.objects:
            before, after = Engine(corpus, cfg, index), Engine(corpus, cfg, back)
            for _ in range(5):
                q = rand_query(rng, corpus)
                same &= before.search(q)[0] == after.search(q)[0]
        failures += not same
    record(7, failures == 0, f"{method}: 100 indexes, {failures} round-trip failures")
    assert failures == 0


# -- 8 -----------------------------------------------------------------------

def _pipeline(root) -> tuple[bytes, list[tuple]]:
    root.mkdir()
    corpus, queries, index, out = (str(root / n) for n in ("c.jsonl", "q.jsonl", "h.idx", "b.csv"))
    assert cli_main(["gen", "--n", "500", "--seed", "42", "--out", corpus]) == 0
    assert cli_main(["gen-queries", "--corpus", corpus, "--count", "40", "--seed", "43", "--out", queries]) == 0
    assert cli_main(["build", "--corpus", corpus, "--method", "hierarchical", "--out", index]) == 0
    assert (
        cli_main(["bench", "--corpus", corpus, "--queries", queries, "--index", index, "--serial", "--check", "--out", out])
        == 0
    )
    rows = (root / "b.csv").read_text().splitlines()
    head = rows[0].split(",")
    keep = [head.index(k) for k in ("method", "query", "candidates", "answers", "postings")]
    cols = [tuple(r.split(",")[k] for k in keep) for r in rows[1:]]
    return (root / "c.jsonl").read_bytes() + (root / "h.idx").read_bytes(), cols


def test_criterion_8_determinism(tmp_path):
    a_bytes, a_cols = _pipeline(tmp_path / "a")
    b_bytes, b_cols = _pipeline(tmp_path / "b")
    ok = a_bytes == b_bytes and a_cols == b_cols and len(a_cols) == 40
    record(8, ok, f"corpus and index bytes equal: {a_bytes == b_bytes}; {len(a_cols)} CSV rows equal: {a_cols == b_cols}")
    assert ok
