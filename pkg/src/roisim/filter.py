"""Candidate generation, baselines and the filter-and-verify search entry point."""

from __future__ import annotations

import time
from dataclasses import dataclass

from .gridtree import DEFAULT_HEIGHT, GridTree
from .hss import build_hierarchical_index, object_node_weights
from .index import (
    GRID,
    HIERARCHICAL,
    HYBRID,
    TOKEN,
    Bucketer,
    DEFAULT_BUCKETS,
    InvertedIndex,
    ProbeCounter,
    build_grid_index,
    build_hybrid_index,
    build_token_index,
    corpus_grid,
    probe,
    probe_hybrid,
)
from .model import AnswerSet, Corpus, Query, intersection_area, spatial_jaccard, verify
from .storage import corpus_fingerprint
from .signature import (
    OrderedSignature,
    effective_thresholds,
    grid_signature,
    select_prefix,
    textual_signature,
)

METHODS = ("token", "grid", "hybrid", "hierarchical", "keyword-first", "spatial-first", "brute")


class ConfigError(ValueError):
    """Engine configuration does not match the method or the index."""


@dataclass
class CandidateSet:
    ids: frozenset[int]
    lists_probed: int = 0
    postings_scanned: int = 0
    full_scan: bool = False

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, oid: int) -> bool:
        return oid in self.ids


@dataclass
class SearchStats:
    method: str
    filter_us: float = 0.0
    verify_us: float = 0.0
    candidates: int = 0
    answers: int = 0
    lists_probed: int = 0
    postings_scanned: int = 0
    full_scan: bool = False


def _all(corpus: Corpus) -> CandidateSet:
    # a non-positive threshold admits every object
    return CandidateSet(frozenset(o.id for o in corpus.objects), full_scan=True)


def query_signature(q: Query, index: InvertedIndex, corpus: Corpus) -> OrderedSignature:
    if index.kind == TOKEN:
        return textual_signature(q.tokens, corpus.table)
    if index.kind == GRID:
        return grid_signature(q.region, index.grid, index.order)
    raise ConfigError(f"no single signature for a {index.kind} index")


def _object_weight(index: InvertedIndex, corpus: Corpus, oid: int, element: int) -> float:
    if index.kind == TOKEN:
        return corpus.table.weight(element)
    return intersection_area(index.grid.cell_region(element), corpus.by_id[oid].region)


def sig_filter(q: Query, index: InvertedIndex, corpus: Corpus) -> CandidateSet:
    """Reference filter: full lists, accumulated signature similarity >= c."""
    if index.kind not in (TOKEN, GRID):
        raise ConfigError(f"sig_filter needs a token or grid index, got {index.kind}")
    c_t, c_r = effective_thresholds(q, corpus.table)
    c = c_t if index.kind == TOKEN else c_r
    if c <= 0.0:
        return _all(corpus)
    sig = query_signature(q, index, corpus)
    acc: dict[int, float] = {}
    lists = postings = 0
    for e, wq in zip(sig.elements, sig.weights):
        pl = index.lists.get(e)
        if pl is None:
            continue
        lists += 1
        postings += len(pl)
        for oid in pl.ids:
            acc[oid] = acc.get(oid, 0.0) + min(wq, _object_weight(index, corpus, oid, e))
    ids = frozenset(oid for oid, s in acc.items() if s >= c)
    return CandidateSet(ids, lists, postings)


def sig_filter_plus(q: Query, index: InvertedIndex, corpus: Corpus) -> CandidateSet:
    """Prefix of the query signature, bound-pruned probes, union of hits."""
    if index.kind not in (TOKEN, GRID):
        raise ConfigError(f"sig_filter_plus needs a token or grid index, got {index.kind}")
    c_t, c_r = effective_thresholds(q, corpus.table)
    c = c_t if index.kind == TOKEN else c_r
    if c <= 0.0:
        return _all(corpus)
    sig = query_signature(q, index, corpus)
    counter = ProbeCounter()
    out: set[int] = set()
    for e in sig.elements[: select_prefix(sig, c)]:
        out.update(probe(index, e, c, counter))
    return CandidateSet(frozenset(out), counter.lists, counter.postings)


def hybrid_filter_plus(q: Query, index: InvertedIndex, corpus: Corpus) -> CandidateSet:
    if index.kind != HYBRID:
        raise ConfigError(f"hybrid filter needs a hybrid index, got {index.kind}")
    c_t, c_r = effective_thresholds(q, corpus.table)
    if c_t <= 0.0 or c_r <= 0.0:
        return _all(corpus)
    ts = textual_signature(q.tokens, corpus.table)
    gs = grid_signature(q.region, index.grid, index.order)
    t_pre = ts.elements[: select_prefix(ts, c_t)]
    g_pre = gs.elements[: select_prefix(gs, c_r)]
    bucket = index.bucketer
    counter = ProbeCounter()
    out: set[int] = set()
    probed = set()
    for t in t_pre:
        for g in g_pre:
            h = bucket(t, g)
            if h in probed:
                continue
            probed.add(h)
            out.update(probe_hybrid(index, h, c_t, c_r, counter))
    return CandidateSet(frozenset(out), counter.lists, counter.postings)


def hierarchical_filter_plus(q: Query, index: InvertedIndex, corpus: Corpus) -> CandidateSet:
    """Per prefix token: query weights over the token's grids, spatial prefix, probe."""
    if index.kind != HIERARCHICAL:
        raise ConfigError(f"hierarchical filter needs a hierarchical index, got {index.kind}")
    c_t, c_r = effective_thresholds(q, corpus.table)
    if c_t <= 0.0 or c_r <= 0.0:
        return _all(corpus)
    if index.tree is None:
        index.tree = GridTree(index.grid.space, index.tree_height)
    tree = index.tree
    ts = textual_signature(q.tokens, corpus.table)
    bucket = index.bucketer
    counter = ProbeCounter()
    out: set[int] = set()
    probed = set()
    for t in ts.elements[: select_prefix(ts, c_t)]:
        gset = index.token_grids.get(t)
        if gset is None:
            continue
        items = object_node_weights(tree, gset, q.region)
        sig = OrderedSignature(HIERARCHICAL, tuple(n for n, _ in items), tuple(w for _, w in items))
        for nid in sig.elements[: select_prefix(sig, c_r)]:
            h = bucket(t, nid)
            if h in probed:
                continue
            probed.add(h)
            out.update(probe_hybrid(index, h, c_t, c_r, counter))
    return CandidateSet(frozenset(out), counter.lists, counter.postings)


def _spatial_pass(q: Query, ids, corpus: Corpus) -> list[int]:
    return [oid for oid in ids if spatial_jaccard(q.region, corpus.by_id[oid].region) >= q.tau_r]


def keyword_first(q: Query, index: InvertedIndex, corpus: Corpus) -> tuple[AnswerSet, CandidateSet]:
    """Textual candidates from full token lists, then the exact spatial check."""
    cand = sig_filter(q, index, corpus)
    return verify(q, cand.ids, corpus), cand


def spatial_first(q: Query, index: InvertedIndex, corpus: Corpus) -> tuple[AnswerSet, CandidateSet]:
    """Grid candidates narrowed by exact sim_R, then the textual check."""
    cand = sig_filter(q, index, corpus)
    return verify(q, _spatial_pass(q, cand.ids, corpus), corpus), cand


@dataclass
class EngineConfig:
    method: str = "hierarchical"
    granularity: int = 64
    buckets: int | None = DEFAULT_BUCKETS
    mt: int = 16
    height: int = DEFAULT_HEIGHT

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.method in ("grid", "hybrid", "spatial-first") and self.granularity < 1:
            raise ConfigError("granularity must be a positive integer")
        if self.method in ("hybrid", "hierarchical") and self.buckets is not None and self.buckets < 1:
            raise ConfigError("bucket count must be positive")
        if self.method == "hierarchical" and self.mt < 1:
            raise ConfigError("m_t must be at least 1")
        if self.height < 0:
            raise ConfigError("tree height must be non-negative")

    def index_kind(self) -> str | None:
        return {
            "token": TOKEN,
            "keyword-first": TOKEN,
            "grid": GRID,
            "spatial-first": GRID,
            "hybrid": HYBRID,
            "hierarchical": HIERARCHICAL,
        }.get(self.method)


def build_index(corpus: Corpus, config: EngineConfig) -> InvertedIndex | None:
    index = _build(corpus, config)
    if index is not None:
        index.fingerprint = corpus_fingerprint(corpus)
    return index


def _build(corpus: Corpus, config: EngineConfig) -> InvertedIndex | None:
    config.validate()
    kind = config.index_kind()
    if kind is None:
        return None
    if kind == TOKEN:
        return build_token_index(corpus)
    if not corpus.objects:
        return InvertedIndex(kind, bucketer=Bucketer(config.buckets) if kind in (HYBRID, HIERARCHICAL) else None)
    if kind == GRID:
        grid, order = corpus_grid(corpus, config.granularity)
        return build_grid_index(corpus, grid, order)
    if kind == HYBRID:
        grid, order = corpus_grid(corpus, config.granularity)
        return build_hybrid_index(corpus, grid, Bucketer(config.buckets), order)
    return build_hierarchical_index(corpus, config.mt, Bucketer(config.buckets), config.height)


class Engine:
    """A corpus, one method and its index; answers queries by filter and verify."""

    def __init__(self, corpus: Corpus, config: EngineConfig, index: InvertedIndex | None = None):
        config.validate()
        self.corpus = corpus
        self.config = config
        if index is None:
            index = build_index(corpus, config)
        elif index.kind != config.index_kind():
            raise ConfigError(f"method {config.method!r} cannot use a {index.kind} index")
        self.index = index

    def candidates(self, q: Query) -> CandidateSet:
        m, idx, corpus = self.config.method, self.index, self.corpus
        if not corpus.objects:
            return CandidateSet(frozenset())
        if m == "brute":
            return _all(corpus)
        if m in ("token", "grid"):
            return sig_filter_plus(q, idx, corpus)
        if m == "hybrid":
            return hybrid_filter_plus(q, idx, corpus)
        if m == "hierarchical":
            return hierarchical_filter_plus(q, idx, corpus)
        return sig_filter(q, idx, corpus)

    def search(self, q: Query) -> tuple[AnswerSet, SearchStats]:
        stats = SearchStats(self.config.method)
        t0 = time.perf_counter()
        cand = self.candidates(q)
        t1 = time.perf_counter()
        ids = cand.ids
        if self.config.method == "spatial-first":
            ids = _spatial_pass(q, ids, self.corpus)
        answers = verify(q, ids, self.corpus)
        t2 = time.perf_counter()
        stats.filter_us = (t1 - t0) * 1e6
        stats.verify_us = (t2 - t1) * 1e6
        stats.candidates = len(cand)
        stats.answers = len(answers)
        stats.lists_probed = cand.lists_probed
        stats.postings_scanned = cand.postings_scanned
        stats.full_scan = cand.full_scan
        return answers, stats


def search(q: Query, engine: Engine) -> tuple[AnswerSet, SearchStats]:
    return engine.search(q)
