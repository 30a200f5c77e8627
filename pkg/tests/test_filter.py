import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randdata import TAUS, rand_corpus, rand_query
from roisim import Engine, EngineConfig, brute_force_search, search
from roisim.filter import (
    ConfigError,
    build_index,
    hierarchical_filter_plus,
    hybrid_filter_plus,
    sig_filter,
    sig_filter_plus,
)
from roisim.model import Corpus, Region, TokenTable


@pytest.fixture
def fixture():
    corpus = Corpus.from_records(
        [
            (0, Region(10, 10, 50, 50), ["t1", "t2"]),
            (1, Region(20, 20, 60, 60), ["t3", "t1", "t2"]),
            (2, Region(0, 0, 100, 100), ["t4"]),
        ]
    )
    q = corpus.query(Region(10, 10, 50, 50), ["t1", "t2", "t3"], tau_r=0.25, tau_t=0.3)
    return corpus, q


@pytest.mark.parametrize("method", ["token", "grid", "hybrid", "hierarchical", "keyword-first", "spatial-first", "brute"])
def test_fixture_answers(fixture, method):
    corpus, q = fixture
    answers, stats = search(q, Engine(corpus, EngineConfig(method, granularity=2)))
    assert answers.ids == [0, 1]
    assert stats.answers == 2 and stats.candidates >= 2
    m = {m.id: m for m in answers}
    assert m[0].sim_t == pytest.approx(0.42467, abs=5e-6)
    assert m[1].sim_r == pytest.approx(900 / 2300)


def test_prefix_filter_subset_of_full_filter(fixture):
    corpus, q = fixture
    for method in ("token", "grid"):
        index = build_index(corpus, EngineConfig(method, granularity=2))
        assert sig_filter_plus(q, index, corpus).ids <= sig_filter(q, index, corpus).ids


def test_zero_threshold_scans_everything(fixture):
    corpus, _ = fixture
    q = corpus.query(Region(200, 200, 201, 201), ["zzz"], 0.0, 0.0)
    for method in ("token", "grid", "hybrid", "hierarchical"):
        ans, stats = Engine(corpus, EngineConfig(method, granularity=2)).search(q)
        assert stats.full_scan
        assert ans.ids == [0, 1, 2]


def test_filters_reject_wrong_index(fixture):
    corpus, q = fixture
    tok = build_index(corpus, EngineConfig("token"))
    with pytest.raises(ConfigError):
        hybrid_filter_plus(q, tok, corpus)
    with pytest.raises(ConfigError):
        hierarchical_filter_plus(q, tok, corpus)
    hyb = build_index(corpus, EngineConfig("hybrid", granularity=2))
    with pytest.raises(ConfigError):
        sig_filter_plus(q, hyb, corpus)
    with pytest.raises(ConfigError):
        Engine(corpus, EngineConfig("grid"), tok)


@pytest.mark.parametrize(
    "cfg",
    [
        EngineConfig("nope"),
        EngineConfig("grid", granularity=0),
        EngineConfig("hybrid", buckets=0),
        EngineConfig("hierarchical", mt=0),
        EngineConfig("hierarchical", height=-1),
    ],
)
def test_config_validation(cfg):
    with pytest.raises(ConfigError):
        cfg.validate()


def test_empty_corpus():
    empty = Corpus([], TokenTable())
    q = empty.query(Region(0, 0, 1, 1), ["a"], 0.0, 0.0)
    for method in ("token", "grid", "hybrid", "hierarchical", "brute"):
        ans, _ = Engine(empty, EngineConfig(method)).search(q)
        assert len(ans) == 0


def test_pruning_is_effective():
    # with selective thresholds the filters touch far fewer than all objects
    corpus = rand_corpus(random.Random(4), 600)
    rng = random.Random(8)
    grid = Engine(corpus, EngineConfig("grid", granularity=32))
    hier = Engine(corpus, EngineConfig("hierarchical", mt=16))
    total_g = total_h = 0
    for _ in range(50):
        q = rand_query(rng, corpus, taus=(0.5,))
        total_g += len(grid.candidates(q))
        total_h += len(hier.candidates(q))
    assert total_g < 50 * 600 / 4
    assert total_h < 50 * 600 / 4


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 5, 30]))
def test_all_methods_agree_with_brute_force(seed, n):
    rng = random.Random(seed)
    corpus = rand_corpus(rng, n)
    engines = [
        Engine(corpus, cfg)
        for cfg in (
            EngineConfig("token"),
            EngineConfig("grid", granularity=rng.choice((1, 3, 16))),
            EngineConfig("hybrid", granularity=rng.choice((1, 4)), buckets=rng.choice((1, 16, None))),
            EngineConfig("hierarchical", mt=rng.choice((1, 2, 5, 16)), height=rng.choice((0, 3, 13))),
            EngineConfig("keyword-first"),
            EngineConfig("spatial-first", granularity=4),
        )
    ]
    for _ in range(10):
        q = rand_query(rng, corpus, TAUS)
        expected = brute_force_search(q, corpus).ids
        for e in engines:
            assert e.search(q)[0].ids == expected, e.config
