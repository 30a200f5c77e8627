"""Inverted indexes over signature elements with per-posting threshold bounds."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Corpus, TokenTable
from .signature import (
    GRID,
    HYBRID,
    TOKEN,
    GridOrder,
    GridPartition,
    grid_signature,
    suffix_bounds,
    textual_signature,
)

HIERARCHICAL = "hierarchical"
KINDS = (TOKEN, GRID, HYBRID, HIERARCHICAL)

MASK64 = (1 << 64) - 1
# splitmix64 finaliser; recorded in the index header so files stay portable
MIX_SHIFTS = (30, 27, 31)
MIX_MULTIPLIERS = (0xBF58476D1CE4E5B9, 0x94D049BB133111EB)
DEFAULT_BUCKETS = 1 << 20


def pack_pair(token: int, cell: int) -> int:
    if not (0 <= token < 1 << 32 and 0 <= cell < 1 << 32):
        raise ValueError(f"pair ({token}, {cell}) does not fit in 64 bits")
    return (token << 32) | cell


def mix64(x: int, multipliers=MIX_MULTIPLIERS, shifts=MIX_SHIFTS) -> int:
    x &= MASK64
    x = ((x ^ (x >> shifts[0])) * multipliers[0]) & MASK64
    x = ((x ^ (x >> shifts[1])) * multipliers[1]) & MASK64
    return x ^ (x >> shifts[2])


@dataclass(frozen=True)
class Bucketer:
    """Maps a (token id, grid id) pair to a hybrid element id.

    ``buckets=None`` is injective mode: the bucket is the packed pair itself.
    """

    buckets: int | None = DEFAULT_BUCKETS
    multipliers: tuple[int, int] = MIX_MULTIPLIERS
    shifts: tuple[int, int, int] = MIX_SHIFTS

    def __post_init__(self):
        if self.buckets is not None and self.buckets < 1:
            raise ValueError("bucket count must be positive")

    @property
    def injective(self) -> bool:
        return self.buckets is None

    def __call__(self, token: int, cell: int) -> int:
        key = pack_pair(token, cell)
        if self.buckets is None:
            return key
        return mix64(key, self.multipliers, self.shifts) % self.buckets


@dataclass
class PostingList:
    """Postings for one element, sorted by descending bound.

    Hybrid lists sort by bound_t, then bound_r, both descending, then id.
    """

    ids: list[int] = field(default_factory=list)
    bound_t: list[float] | None = None
    bound_r: list[float] | None = None

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class InvertedIndex:
    kind: str
    lists: dict[int, PostingList] = field(default_factory=dict)
    grid: GridPartition | None = None
    order: GridOrder | None = None
    bucketer: Bucketer | None = None
    # hierarchical indexes only
    tree_height: int = 0
    token_grids: dict = field(default_factory=dict)
    fingerprint: int = 0
    tree: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown index kind {self.kind!r}")

    @property
    def num_postings(self) -> int:
        return sum(len(pl) for pl in self.lists.values())


def _finish(raw: dict[int, list[tuple]], has_t: bool, has_r: bool) -> dict[int, PostingList]:
    lists = {}
    for elem in sorted(raw):
        rows = raw[elem]
        if has_t and has_r:
            rows.sort(key=lambda r: (-r[1], -r[2], r[0]))
        else:
            rows.sort(key=lambda r: (-r[1], r[0]))
        pl = PostingList([r[0] for r in rows])
        if has_t and has_r:
            pl.bound_t = [r[1] for r in rows]
            pl.bound_r = [r[2] for r in rows]
        elif has_t:
            pl.bound_t = [r[1] for r in rows]
        else:
            pl.bound_r = [r[1] for r in rows]
        lists[elem] = pl
    return lists


def build_token_index(corpus: Corpus) -> InvertedIndex:
    raw: dict[int, list[tuple]] = {}
    for o in corpus.objects:
        sig = textual_signature(o.tokens, corpus.table)
        for t, b in zip(sig.elements, suffix_bounds(sig)):
            raw.setdefault(t, []).append((o.id, b))
    return InvertedIndex(TOKEN, _finish(raw, True, False))


def corpus_grid(corpus: Corpus, p: int) -> tuple[GridPartition, GridOrder]:
    space = corpus.space
    if space is None:
        raise ValueError("cannot build a grid over an empty corpus")
    grid = GridPartition(space, p)
    return grid, GridOrder.from_regions((o.region for o in corpus.objects), grid)


def build_grid_index(corpus: Corpus, grid: GridPartition, order: GridOrder | None = None) -> InvertedIndex:
    if order is None:
        order = GridOrder.from_regions((o.region for o in corpus.objects), grid)
    raw: dict[int, list[tuple]] = {}
    for o in corpus.objects:
        sig = grid_signature(o.region, grid, order)
        for g, b in zip(sig.elements, suffix_bounds(sig)):
            raw.setdefault(g, []).append((o.id, b))
    return InvertedIndex(GRID, _finish(raw, False, True), grid=grid, order=order)


def _merge_max(slot: dict[int, tuple], bucket: int, bt: float, br: float) -> None:
    # colliding pairs of one object keep the per-dimension maximum
    prev = slot.get(bucket)
    if prev is None:
        slot[bucket] = (bt, br)
    else:
        slot[bucket] = (max(prev[0], bt), max(prev[1], br))


def build_hybrid_index(
    corpus: Corpus,
    grid: GridPartition,
    bucketer: Bucketer,
    order: GridOrder | None = None,
) -> InvertedIndex:
    table: TokenTable = corpus.table
    if order is None:
        order = GridOrder.from_regions((o.region for o in corpus.objects), grid)
    raw: dict[int, list[tuple]] = {}
    for o in corpus.objects:
        ts = textual_signature(o.tokens, table)
        if not ts:
            continue
        gs = grid_signature(o.region, grid, order)
        tb = suffix_bounds(ts)
        gb = suffix_bounds(gs)
        slot: dict[int, tuple] = {}
        for t, bt in zip(ts.elements, tb):
            for g, br in zip(gs.elements, gb):
                _merge_max(slot, bucketer(t, g), bt, br)
        for h, (bt, br) in slot.items():
            raw.setdefault(h, []).append((o.id, bt, br))
    return InvertedIndex(HYBRID, _finish(raw, True, True), grid=grid, order=order, bucketer=bucketer)


@dataclass
class ProbeCounter:
    lists: int = 0
    postings: int = 0


def probe(index: InvertedIndex, element: int, c: float, counter: ProbeCounter | None = None) -> list[int]:
    """Ids of postings with bound >= c, stopping at the first one below c."""
    pl = index.lists.get(element)
    if pl is None:
        return []
    bounds = pl.bound_t if pl.bound_t is not None else pl.bound_r
    n = 0
    for b in bounds:
        if b < c:
            break
        n += 1
    if counter is not None:
        counter.lists += 1
        counter.postings += min(n + 1, len(bounds))
    return pl.ids[:n]


def probe_hybrid(
    index: InvertedIndex,
    bucket: int,
    c_t: float,
    c_r: float,
    counter: ProbeCounter | None = None,
) -> list[int]:
    """Postings with bound_t >= c_t and bound_r >= c_r; early stop on bound_t."""
    pl = index.lists.get(bucket)
    if pl is None:
        return []
    out = []
    scanned = 0
    ids, br = pl.ids, pl.bound_r
    for i, bt in enumerate(pl.bound_t):
        scanned += 1
        if bt < c_t:
            break
        if br[i] >= c_r:
            out.append(ids[i])
    if counter is not None:
        counter.lists += 1
        counter.postings += scanned
    return out
