"""Cost-model selection of the uniform grid granularity."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

from .filter import sig_filter_plus
from .gridtree import DEFAULT_HEIGHT
from .index import build_grid_index
from .model import Corpus, Query, Region, intersection_area, verify
from .signature import GridOrder, GridPartition


@dataclass(frozen=True)
class CostModel:
    pi1: float = 1.0  # per posting retrieved and merged
    pi2: float = 10.0  # per candidate verified

    def __post_init__(self):
        if self.pi1 <= 0 or self.pi2 <= 0:
            raise ValueError("cost constants must be positive")


@dataclass(frozen=True)
class LevelCost:
    level: int
    filter_term: float
    verify_term: float

    @property
    def total(self) -> float:
        return self.filter_term + self.verify_term


def grid_probability(g: Region, workload: Sequence[Query]) -> float:
    """Fraction of workload queries whose region overlaps g with positive area."""
    if not workload:
        raise ValueError("empty workload")
    return sum(1 for q in workload if intersection_area(g, q.region) > 0.0) / len(workload)


def _level_grid(corpus: Corpus, level: int) -> GridPartition:
    space = corpus.space
    if space is None:
        raise ValueError("cannot tune over an empty corpus")
    return GridPartition(space, 1 << level)


def expected_cost(level: int, workload: Sequence[Query], corpus: Corpus, model: CostModel) -> LevelCost:
    """Worst-case list-size term plus the measured mean candidate count.

    The filter term is pi1 * sum_g P(g) |I(g)|, accumulated query by query
    over the cells each query region touches.
    """
    if not workload:
        raise ValueError("empty workload")
    grid = _level_grid(corpus, level)
    order = GridOrder.from_regions((o.region for o in corpus.objects), grid)
    index = build_grid_index(corpus, grid, order)
    touched = 0
    cands = 0
    for q in workload:
        touched += sum(order.counts.get(cid, 0) for cid, _ in grid.overlaps(q.region))
        cands += len(sig_filter_plus(q, index, corpus))
    n = len(workload)
    return LevelCost(level, model.pi1 * touched / n, model.pi2 * cands / n)


@dataclass(frozen=True)
class TuningResult:
    level: int
    costs: tuple[LevelCost, ...]

    @property
    def granularity(self) -> int:
        return 1 << self.level

    def rows(self) -> list[tuple]:
        """(level, filter term, verify term, total, benefit to next level)."""
        out = []
        for i, c in enumerate(self.costs):
            benefit = c.total - self.costs[i + 1].total if i + 1 < len(self.costs) else None
            out.append((c.level, c.filter_term, c.verify_term, c.total, benefit))
        return out


def select_granularity(
    workload: Sequence[Query],
    corpus: Corpus,
    model: CostModel,
    benefit_floor: float,
    max_level: int = DEFAULT_HEIGHT,
) -> TuningResult:
    """Walk down the grid tree until splitting one more level gains < benefit_floor."""
    if not workload:
        raise ValueError("empty workload")
    if benefit_floor <= 0:
        raise ValueError("benefit floor must be positive")
    costs = [expected_cost(0, workload, corpus, model)]
    for level in range(max_level):
        costs.append(expected_cost(level + 1, workload, corpus, model))
        if costs[level].total - costs[level + 1].total < benefit_floor:
            return TuningResult(level, tuple(costs))
    return TuningResult(max_level, tuple(costs))


def calibrate(workload: Sequence[Query], corpus: Corpus, level: int = 6) -> CostModel:
    """Fit pi1 and pi2 from measured per-posting and per-verification time."""
    grid = _level_grid(corpus, level)
    index = build_grid_index(corpus, grid)
    postings = cands = 0
    t_filter = t_verify = 0.0
    for q in workload:
        t0 = time.perf_counter()
        c = sig_filter_plus(q, index, corpus)
        t1 = time.perf_counter()
        verify(q, c.ids, corpus)
        t2 = time.perf_counter()
        postings += c.postings_scanned
        cands += len(c)
        t_filter += t1 - t0
        t_verify += t2 - t1
    pi1 = t_filter / postings if postings else 1.0
    pi2 = t_verify / cands if cands else 10.0
    return CostModel(max(pi1, 1e-12), max(pi2, 1e-12))
