"""Hierarchical hybrid signatures: per-token grid selection on the grid tree."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

from .gridtree import DEFAULT_HEIGHT, GridTree, children, node_id
from .index import HIERARCHICAL, Bucketer, InvertedIndex, _finish, _merge_max
from .model import Corpus, Region, intersection_area
from .signature import suffix_bounds, textual_signature


@dataclass(frozen=True)
class TokenGridSet:
    """Selected tree nodes for one token, in hierarchical order.

    Order: ascending level, then ascending number of the token's object
    regions meeting the node, then cell id.
    """

    token: int
    nodes: tuple[tuple[int, int], ...]
    counts: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    def rank(self, level: int, cell: int) -> int:
        return self.nodes.index((level, cell))


def expected_list_size(g: Region, regions: Sequence[Region]) -> float:
    """Sum over regions of |g ∩ r| / |g|."""
    area = g.area
    if area <= 0.0:
        return 0.0
    return sum(intersection_area(g, r) for r in regions) / area


def _meeting(g: Region, regions: Sequence[Region]) -> list[Region]:
    return [r for r in regions if intersection_area(g, r) > 0.0]


def _expand(tree: GridTree, level: int, cell: int, regions: Sequence[Region]):
    """Expected size of the node, and (child, size, meeting regions) per child."""
    size = expected_list_size(tree.region(level, cell), regions)
    if tree.is_leaf(level):
        return size, []
    kids = []
    for cl, cc in children(level, cell):
        cr = tree.region(cl, cc)
        sub = _meeting(cr, regions)
        kids.append(((cl, cc), expected_list_size(cr, sub), sub))
    return size, kids


def node_error(tree: GridTree, level: int, cell: int, regions: Sequence[Region]) -> float:
    """Squared deviation of the four children's expected sizes from the node's."""
    size, kids = _expand(tree, level, cell, regions)
    return sum((size - ks) ** 2 for _, ks, _ in kids)


def finest_error(tree: GridTree, level: int, cell: int, regions: Sequence[Region]) -> float:
    """Error of a node measured against all tree leaves below it."""
    size = expected_list_size(tree.region(level, cell), regions)
    leaves = [(level, cell)]
    while leaves[0][0] < tree.height:
        leaves = [c for lc in leaves for c in children(*lc)]
    return sum((size - expected_list_size(tree.region(*lf), regions)) ** 2 for lf in leaves)


def _order(tree: GridTree, token: int, nodes, regions: Sequence[Region]) -> TokenGridSet:
    keyed = []
    for level, cell in nodes:
        cnt = len(_meeting(tree.region(level, cell), regions))
        keyed.append((level, cnt, cell))
    keyed.sort()
    return TokenGridSet(
        token,
        tuple((lv, c) for lv, _, c in keyed),
        tuple(cnt for _, cnt, _ in keyed),
    )


def root_only(tree: GridTree, token: int, regions: Sequence[Region]) -> TokenGridSet:
    return _order(tree, token, [(0, 0)], regions)


def hss_greedy(
    token: int,
    regions: Sequence[Region],
    m_t: int,
    tree: GridTree,
    trace: list | None = None,
) -> TokenGridSet:
    """Max-error-first splitting of the grid tree under a budget of m_t nodes.

    The budget test counts the dequeued node as still queued, so splitting
    is allowed only when |G_t| + |Q| + 4 - 1 <= m_t with n inside Q. When
    ``trace`` is given, each dequeue appends (popped error, queue maximum).
    """
    if m_t <= 1:
        raise ValueError(f"m_t must exceed 1, got {m_t}")
    regions = _meeting(tree.space, regions) if tree.space.area > 0 else []
    heap: list = []

    def push(level, cell, regs):
        size, kids = _expand(tree, level, cell, regs)
        err = sum((size - ks) ** 2 for _, ks, _ in kids)
        heapq.heappush(heap, (-err, level, cell, kids))

    push(0, 0, regions)
    selected = []
    while heap:
        queued = len(heap)
        if trace is not None:
            trace.append((-heap[0][0], max(-e[0] for e in heap)))
        negerr, level, cell, kids = heapq.heappop(heap)
        if not kids:
            selected.append((level, cell))
        elif len(selected) + queued + len(kids) - 1 > m_t:
            selected.append((level, cell))
        else:
            for (cl, cc), _, sub in kids:
                push(cl, cc, sub)
    return _order(tree, token, selected, regions)


def enumerate_cuts(tree: GridTree, level: int = 0, cell: int = 0) -> list[list[tuple[int, int]]]:
    """Every antichain cut of the subtree at (level, cell); small trees only."""
    own = [[(level, cell)]]
    if tree.is_leaf(level):
        return own
    per_child = [enumerate_cuts(tree, cl, cc) for cl, cc in children(level, cell)]
    for combo in itertools.product(*per_child):
        own.append([n for part in combo for n in part])
    return own


def cut_error(tree: GridTree, nodes, regions: Sequence[Region]) -> float:
    return sum(finest_error(tree, lv, c, regions) for lv, c in nodes)


def optimal_cut(tree: GridTree, regions: Sequence[Region], m_t: int) -> tuple[list, float]:
    """Exhaustive minimum-error cut with at most m_t nodes."""
    best, best_err = None, float("inf")
    for cut in enumerate_cuts(tree):
        if len(cut) > m_t:
            continue
        err = cut_error(tree, cut, regions)
        if err < best_err:
            best, best_err = cut, err
    return best, best_err


def token_regions(corpus: Corpus) -> dict[int, list[Region]]:
    """Regions of the objects holding each positive-weight token."""
    out: dict[int, list[Region]] = {}
    for o in corpus.objects:
        for t in textual_signature(o.tokens, corpus.table).elements:
            out.setdefault(t, []).append(o.region)
    return out


def uniform_budget(index_budget: int, num_tokens: int) -> int:
    """Uniform m_t so that the selected grids total about index_budget."""
    if num_tokens == 0:
        return 2
    return max(2, index_budget // num_tokens)


def select_token_grids(
    corpus: Corpus,
    m_t: int | Mapping[int, int],
    tree: GridTree,
) -> dict[int, TokenGridSet]:
    out = {}
    for t, regions in token_regions(corpus).items():
        budget = m_t if isinstance(m_t, int) else m_t.get(t, 1)
        if budget < 2:
            out[t] = root_only(tree, t, regions)
        else:
            out[t] = hss_greedy(t, regions, budget, tree)
    return out


def object_node_weights(tree: GridTree, gset: TokenGridSet, region: Region) -> list[tuple[int, float]]:
    """(global node id, |node ∩ region|) for selected nodes meeting region, in set order."""
    out = []
    for level, cell in gset.nodes:
        w = intersection_area(tree.region(level, cell), region)
        if w > 0.0:
            out.append((node_id(level, cell), w))
    return out


def build_hierarchical_index(
    corpus: Corpus,
    m_t: int | Mapping[int, int],
    bucketer: Bucketer,
    height: int = DEFAULT_HEIGHT,
    token_grids: dict[int, TokenGridSet] | None = None,
) -> InvertedIndex:
    space = corpus.space
    if space is None:
        raise ValueError("cannot build a hierarchical index over an empty corpus")
    tree = GridTree(space, height)
    if token_grids is None:
        token_grids = select_token_grids(corpus, m_t, tree)
    raw: dict[int, list[tuple]] = {}
    for o in corpus.objects:
        ts = textual_signature(o.tokens, corpus.table)
        slot: dict[int, tuple] = {}
        for t, bt in zip(ts.elements, suffix_bounds(ts)):
            items = object_node_weights(tree, token_grids[t], o.region)
            acc = 0.0
            bounds = [0.0] * len(items)
            for i in range(len(items) - 1, -1, -1):
                acc += items[i][1]
                bounds[i] = acc
            for (nid, _), br in zip(items, bounds):
                _merge_max(slot, bucketer(t, nid), bt, br)
        for h, (bt, br) in slot.items():
            raw.setdefault(h, []).append((o.id, bt, br))
    return InvertedIndex(
        HIERARCHICAL,
        _finish(raw, True, True),
        grid=tree.level(0),
        bucketer=bucketer,
        tree_height=height,
        token_grids=token_grids,
        tree=tree,
    )
