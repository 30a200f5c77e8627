"""Synthetic corpora and query workloads."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Region


@dataclass(frozen=True)
class SynthParams:
    space: tuple[float, float, float, float] = (0.0, 0.0, 1000.0, 1000.0)
    # region sides are log-uniform in [min_side, max_side]
    min_side: float = 0.1
    max_side: float = 10.0
    vocab: int = 5000
    zipf_s: float = 1.0
    mean_tokens: float = 12.5

    def validate(self) -> None:
        x0, y0, x1, y1 = self.space
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"space {self.space} has no area")
        if not 0 < self.min_side <= self.max_side:
            raise ValueError("need 0 < min_side <= max_side")
        if self.vocab < 1:
            raise ValueError("vocabulary size must be at least 1")
        if self.zipf_s < 0:
            raise ValueError("Zipf exponent must be non-negative")
        if self.mean_tokens <= 0:
            raise ValueError("mean token count must be positive")


def token_counts(rng: np.random.Generator, n: int, mean: float, cap: int) -> np.ndarray:
    """Per-object token counts: Poisson around mean, at least 1, at most cap."""
    return np.clip(rng.poisson(mean, size=n), 1, cap)


class ZipfVocabulary:
    def __init__(self, size: int, s: float):
        ranks = np.arange(1, size + 1, dtype=float)
        p = ranks**-s
        self.cdf = np.cumsum(p / p.sum())
        self.cdf[-1] = 1.0
        self.size = size

    def sample_distinct(self, rng: np.random.Generator, k: int) -> list[int]:
        k = min(k, self.size)
        picked: dict[int, None] = {}
        while len(picked) < k:
            draws = np.searchsorted(self.cdf, rng.random(2 * (k - len(picked))), side="right")
            for d in draws.tolist():
                if len(picked) == k:
                    break
                picked.setdefault(min(d, self.size - 1))
        return list(picked)


def _sides(rng: np.random.Generator, n: int, lo: float, hi: float) -> np.ndarray:
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size=n))


def _box(cx: float, cy: float, w: float, h: float, space=None) -> Region:
    if space is None:
        return Region(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
    x0, y0, x1, y1 = space
    return Region(
        max(x0, cx - w / 2), max(y0, cy - h / 2), min(x1, cx + w / 2), min(y1, cy + h / 2)
    )


def gen_synthetic(n: int, params: SynthParams = SynthParams(), seed: int = 0) -> list[tuple[int, Region, list[str]]]:
    """n objects: uniform centres, log-uniform sides, Zipf-distributed tokens."""
    if n < 0:
        raise ValueError("object count must be non-negative")
    params.validate()
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = params.space
    cx = rng.uniform(x0, x1, size=n)
    cy = rng.uniform(y0, y1, size=n)
    w = _sides(rng, n, params.min_side, params.max_side)
    h = _sides(rng, n, params.min_side, params.max_side)
    counts = token_counts(rng, n, params.mean_tokens, params.vocab)
    vocab = ZipfVocabulary(params.vocab, params.zipf_s)
    out = []
    for i in range(n):
        toks = vocab.sample_distinct(rng, int(counts[i]))
        out.append((i, _box(cx[i], cy[i], w[i], h[i], params.space), [f"w{t}" for t in toks]))
    return out


# side ranges per query mode; large areas are ~100x the small ones
QUERY_SIDES = {"small": (0.5, 5.0), "large": (5.0, 50.0)}


def gen_queries(
    records: Sequence[tuple[int, Region, Sequence[str]]],
    count: int,
    mode: str = "small",
    seed: int = 0,
    tau_r: float = 0.4,
    tau_t: float = 0.4,
) -> list[dict]:
    """Queries anchored on random corpus objects.

    The region is centred near the anchor; small queries reuse the anchor's
    tokens, large ones a random half of them.
    """
    if mode not in QUERY_SIDES:
        raise ValueError(f"mode must be one of {sorted(QUERY_SIDES)}")
    if count < 0:
        raise ValueError("query count must be non-negative")
    if count and not records:
        raise ValueError("cannot anchor queries on an empty corpus")
    rng = np.random.default_rng(seed)
    lo, hi = QUERY_SIDES[mode]
    out = []
    for i in range(count):
        _, anchor, toks = records[int(rng.integers(len(records)))]
        w, h = _sides(rng, 2, lo, hi)
        cx = (anchor.xmin + anchor.xmax) / 2 + rng.normal(0.0, 0.25) * max(anchor.xmax - anchor.xmin, w)
        cy = (anchor.ymin + anchor.ymax) / 2 + rng.normal(0.0, 0.25) * max(anchor.ymax - anchor.ymin, h)
        region = _box(float(cx), float(cy), float(w), float(h))
        toks = list(toks)
        if mode == "large" and len(toks) > 1:
            keep = max(1, len(toks) // 2)
            toks = [toks[j] for j in sorted(rng.choice(len(toks), size=keep, replace=False).tolist())]
        out.append({"id": i, "mbr": list(region.as_tuple()), "tokens": toks, "tau_r": tau_r, "tau_t": tau_t})
    return out


def write_corpus(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for oid, region, toks in records:
            fh.write(json.dumps({"id": oid, "mbr": list(region.as_tuple()), "tokens": list(toks)}))
            fh.write("\n")


def write_queries(queries: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in queries:
            fh.write(json.dumps(q))
            fh.write("\n")
