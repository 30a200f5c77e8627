"""Signature generation: textual, uniform-grid, global orders and prefixes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .model import Query, Region, TokenTable

TOKEN = "token"
GRID = "grid"
HYBRID = "hybrid"

# Relative slack subtracted from signature thresholds so that rounding in
# area and weight sums can never prune a true answer.
THRESHOLD_SLACK = 1e-9


@dataclass(frozen=True)
class OrderedSignature:
    """Elements sorted by their kind's global order, with parallel weights."""

    kind: str
    elements: tuple[int, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.elements) != len(self.weights):
            raise ValueError("elements and weights differ in length")

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.elements, self.weights))

    def prefix(self, c: float) -> OrderedSignature:
        p = select_prefix(self, c)
        return OrderedSignature(self.kind, self.elements[:p], self.weights[:p])


def _axis_edges(lo: float, hi: float, p: int) -> list[float]:
    # edges shared by neighbouring cells; the last edge is exactly hi
    width = hi - lo
    edges = [lo + width * i / p for i in range(p)]
    edges.append(hi)
    return edges


class GridPartition:
    """p x p uniform partition of the indexed space; cell id = row * p + col."""

    def __init__(self, space: Region, p: int):
        if p < 1:
            raise ValueError(f"granularity must be positive, got {p}")
        self.space = space
        self.p = p
        self._xs = _axis_edges(space.xmin, space.xmax, p)
        self._ys = _axis_edges(space.ymin, space.ymax, p)

    def __eq__(self, other):
        return isinstance(other, GridPartition) and self.space == other.space and self.p == other.p

    def __repr__(self):
        return f"GridPartition({self.space!r}, p={self.p})"

    @property
    def num_cells(self) -> int:
        return self.p * self.p

    def cell_region(self, cid: int) -> Region:
        row, col = divmod(cid, self.p)
        return Region(self._xs[col], self._ys[row], self._xs[col + 1], self._ys[row + 1])

    def _span(self, lo: float, hi: float, origin: float, extent: float) -> range:
        p = self.p
        if extent <= 0.0:
            return range(0)
        a = int((lo - origin) / extent * p) - 1
        b = int((hi - origin) / extent * p) + 1
        return range(max(a, 0), min(b, p - 1) + 1)

    def overlaps(self, r: Region) -> list[tuple[int, float]]:
        """(cell id, |cell ∩ r|) for cells meeting r with positive area, by cell id."""
        sp = self.space
        x0, y0 = max(r.xmin, sp.xmin), max(r.ymin, sp.ymin)
        x1, y1 = min(r.xmax, sp.xmax), min(r.ymax, sp.ymax)
        if x1 <= x0 or y1 <= y0:
            return []
        xs, ys, p = self._xs, self._ys, self.p
        cols = []
        for c in self._span(x0, x1, sp.xmin, sp.xmax - sp.xmin):
            w = min(x1, xs[c + 1]) - max(x0, xs[c])
            if w > 0.0:
                cols.append((c, w))
        out = []
        for row in self._span(y0, y1, sp.ymin, sp.ymax - sp.ymin):
            h = min(y1, ys[row + 1]) - max(y0, ys[row])
            if h > 0.0:
                base = row * p
                for c, w in cols:
                    out.append((base + c, w * h))
        return out


@dataclass
class GridOrder:
    """Ascending count of intersecting corpus regions, ties by cell id."""

    counts: dict[int, int] = field(default_factory=dict)

    @classmethod
    def from_regions(cls, regions: Iterable[Region], grid: GridPartition) -> GridOrder:
        counts: dict[int, int] = {}
        for r in regions:
            for cid, _ in grid.overlaps(r):
                counts[cid] = counts.get(cid, 0) + 1
        return cls(counts)

    def key(self, cid: int) -> tuple[int, int]:
        return (self.counts.get(cid, 0), cid)

    def rank(self, cells: Iterable[int], num_cells: int) -> dict[int, int]:
        """Dense ranks over all num_cells cells (small grids only)."""
        order = sorted(range(num_cells), key=self.key)
        ranks = {cid: i for i, cid in enumerate(order)}
        return {c: ranks[c] for c in cells}


def textual_signature(tokens: Iterable[int], weights: TokenTable) -> OrderedSignature:
    """Tokens by descending idf, ties by ascending id.

    Zero-weight tokens and tokens absent from the corpus are left out: they
    can never add to the weight shared with a corpus object.
    """
    n = len(weights)
    items = [(t, weights.weight(t)) for t in tokens if 0 <= t < n]
    items = [(t, w) for t, w in items if w > 0.0]
    items.sort(key=lambda tw: (-tw[1], tw[0]))
    return OrderedSignature(TOKEN, tuple(t for t, _ in items), tuple(w for _, w in items))


def grid_signature(r: Region, grid: GridPartition, order: GridOrder) -> OrderedSignature:
    items = grid.overlaps(r)
    items.sort(key=lambda cw: order.key(cw[0]))
    return OrderedSignature(GRID, tuple(c for c, _ in items), tuple(w for _, w in items))


def select_prefix(sig: OrderedSignature, c: float) -> int:
    """Smallest p whose suffix weight (positions p+1..n) is strictly below c."""
    suffix = 0.0
    ws = sig.weights
    # walk backwards; the suffix after position i is sum(ws[i:])
    for i in range(len(ws), 0, -1):
        if suffix + ws[i - 1] >= c:
            return i
        suffix += ws[i - 1]
    return 0


def suffix_bounds(sig: OrderedSignature) -> list[float]:
    """Bound at position i = weight sum from i to the end; non-increasing."""
    out = [0.0] * len(sig.weights)
    acc = 0.0
    for i in range(len(sig.weights) - 1, -1, -1):
        acc += sig.weights[i]
        out[i] = acc
    return out


def signature_similarity(a: OrderedSignature, b: OrderedSignature) -> float:
    """Sum over shared elements of the smaller weight."""
    if a.kind != b.kind:
        raise ValueError(f"signature kind mismatch: {a.kind} vs {b.kind}")
    if len(a) > len(b):
        a, b = b, a
    bw = b.as_dict()
    return math.fsum(min(w, bw[e]) for e, w in zip(a.elements, a.weights) if e in bw)


def thresholds(q: Query, weights: TokenTable) -> tuple[float, float]:
    """(c_T, c_R): tau_T times the query's total idf, tau_R times its unclipped area."""
    c_t = q.tau_t * weights.total_weight(q.tokens)
    c_r = q.tau_r * q.region.area
    return c_t, c_r


def effective_thresholds(q: Query, weights: TokenTable) -> tuple[float, float]:
    """Thresholds with rounding slack; a value <= 0 means the dimension cannot prune."""
    total_t = weights.total_weight(q.tokens)
    area = q.region.area
    c_t, c_r = thresholds(q, weights)
    return c_t - THRESHOLD_SLACK * total_t, c_r - THRESHOLD_SLACK * area
