"""Binary index files.

Layout (little-endian throughout)::

    magic      4s   b"RSIX"
    version    u16
    kind       u8   0 token, 1 grid, 2 hybrid, 3 hierarchical
    flags      u8   bit0 grid params, bit1 bucketer, bit2 injective
    fingerprint u64 corpus fingerprint
    [grid]     xmin ymin xmax ymax f64, granularity u32, tree height u16
    [bucketer] buckets u64, multipliers 2 x u64, shifts 3 x u8
    grid order: n u64, then n x (cell u64, count u32) by ascending cell
    token grid sets: n u64, then per set token u64, k u32,
               k x (level u8, cell u64, count u32) in hierarchical order
    directory: n u64, then n x (element u64, offset u64, length u32)
    postings:  per list, length x (object id u64, bound f64 [, bound f64])

Hybrid and hierarchical postings carry (bound_t, bound_r); token postings
carry bound_t and grid postings bound_r. Offsets are byte offsets from the
start of the postings block.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

from .hss import TokenGridSet
from .index import GRID, HIERARCHICAL, HYBRID, KINDS, TOKEN, Bucketer, InvertedIndex, PostingList
from .model import Corpus, Region
from .signature import GridOrder, GridPartition

MAGIC = b"RSIX"
VERSION = 1

_HEADER = struct.Struct("<4sHBBQ")
_GRID = struct.Struct("<4dIH")
_BUCKETER = struct.Struct("<3Q3B")
_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")
_COUNT = struct.Struct("<QI")
_NODE = struct.Struct("<BQI")
_DIRENT = struct.Struct("<QQI")
_SET_HEAD = struct.Struct("<QI")

_FLAG_GRID, _FLAG_BUCKETER, _FLAG_INJECTIVE = 1, 2, 4


class IndexFormatError(ValueError):
    """An index file could not be decoded."""


class BadMagicError(IndexFormatError):
    pass


class VersionMismatchError(IndexFormatError):
    pass


class TruncatedIndexError(IndexFormatError):
    pass


def corpus_fingerprint(corpus: Corpus) -> int:
    h = hashlib.sha256()
    for o in corpus.objects:
        h.update(struct.pack("<Q4d", o.id, *o.region.as_tuple()))
        for tok in sorted(corpus.table.token(t) for t in o.tokens):
            h.update(tok.encode("utf-8"))
            h.update(b"\0")
        h.update(b"\n")
    return int.from_bytes(h.digest()[:8], "little")


def _posting_struct(kind: str) -> struct.Struct:
    return struct.Struct("<Qdd" if kind in (HYBRID, HIERARCHICAL) else "<Qd")


def dumps(index: InvertedIndex) -> bytes:
    kind = index.kind
    flags = 0
    if index.grid is not None:
        flags |= _FLAG_GRID
    if index.bucketer is not None:
        flags |= _FLAG_BUCKETER
        if index.bucketer.injective:
            flags |= _FLAG_INJECTIVE
    parts = [_HEADER.pack(MAGIC, VERSION, KINDS.index(kind), flags, index.fingerprint)]
    if index.grid is not None:
        parts.append(_GRID.pack(*index.grid.space.as_tuple(), index.grid.p, index.tree_height))
    if index.bucketer is not None:
        b = index.bucketer
        parts.append(_BUCKETER.pack(b.buckets or 0, *b.multipliers, *b.shifts))

    counts = index.order.counts if index.order is not None else {}
    parts.append(_U64.pack(len(counts)))
    parts.extend(_COUNT.pack(c, counts[c]) for c in sorted(counts))

    parts.append(_U64.pack(len(index.token_grids)))
    for t in sorted(index.token_grids):
        gs = index.token_grids[t]
        parts.append(_SET_HEAD.pack(t, len(gs.nodes)))
        parts.extend(_NODE.pack(lv, c, n) for (lv, c), n in zip(gs.nodes, gs.counts))

    ps = _posting_struct(kind)
    body = []
    directory = []
    offset = 0
    for elem in sorted(index.lists):
        pl = index.lists[elem]
        if kind in (HYBRID, HIERARCHICAL):
            chunk = b"".join(ps.pack(i, bt, br) for i, bt, br in zip(pl.ids, pl.bound_t, pl.bound_r))
        else:
            bounds = pl.bound_t if kind == TOKEN else pl.bound_r
            chunk = b"".join(ps.pack(i, b) for i, b in zip(pl.ids, bounds))
        directory.append(_DIRENT.pack(elem, offset, len(pl)))
        body.append(chunk)
        offset += len(chunk)
    parts.append(_U64.pack(len(directory)))
    parts.extend(directory)
    parts.extend(body)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, st: struct.Struct, what: str) -> tuple:
        end = self.pos + st.size
        if end > len(self.data):
            raise TruncatedIndexError(f"index file truncated while reading {what} at byte {self.pos}")
        out = st.unpack_from(self.data, self.pos)
        self.pos = end
        return out


def loads(data: bytes) -> InvertedIndex:
    r = _Reader(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"not an index file: magic {data[:4]!r}, expected {MAGIC!r}")
    magic, version, kind_code, flags, fingerprint = r.take(_HEADER, "header")
    if version != VERSION:
        raise VersionMismatchError(f"index format version {version}, this build reads {VERSION}")
    if kind_code >= len(KINDS):
        raise IndexFormatError(f"unknown index kind code {kind_code}")
    kind = KINDS[kind_code]

    grid = None
    height = 0
    if flags & _FLAG_GRID:
        *box, p, height = r.take(_GRID, "grid parameters")
        grid = GridPartition(Region(*box), p)
    bucketer = None
    if flags & _FLAG_BUCKETER:
        buckets, m0, m1, s0, s1, s2 = r.take(_BUCKETER, "bucketer parameters")
        bucketer = Bucketer(None if flags & _FLAG_INJECTIVE else buckets, (m0, m1), (s0, s1, s2))

    (n,) = r.take(_U64, "grid order size")
    counts = {}
    for _ in range(n):
        c, k = r.take(_COUNT, "grid order")
        counts[c] = k
    order = GridOrder(counts) if kind in (GRID, HYBRID) and grid is not None else None

    (n,) = r.take(_U64, "token grid set count")
    token_grids = {}
    for _ in range(n):
        t, k = r.take(_SET_HEAD, "token grid set")
        nodes, cnts = [], []
        for _ in range(k):
            lv, c, cnt = r.take(_NODE, "token grid node")
            nodes.append((lv, c))
            cnts.append(cnt)
        token_grids[t] = TokenGridSet(t, tuple(nodes), tuple(cnts))

    (n,) = r.take(_U64, "directory size")
    entries = [r.take(_DIRENT, "directory") for _ in range(n)]
    base = r.pos
    ps = _posting_struct(kind)
    lists = {}
    end = base
    for elem, offset, length in entries:
        start = base + offset
        stop = start + length * ps.size
        if stop > len(data):
            raise TruncatedIndexError(f"index file truncated inside posting list of element {elem}")
        rows = list(ps.iter_unpack(data[start:stop]))
        pl = PostingList([row[0] for row in rows])
        if kind in (HYBRID, HIERARCHICAL):
            pl.bound_t = [row[1] for row in rows]
            pl.bound_r = [row[2] for row in rows]
        elif kind == TOKEN:
            pl.bound_t = [row[1] for row in rows]
        else:
            pl.bound_r = [row[1] for row in rows]
        lists[elem] = pl
        end = max(end, stop)
    if end != len(data):
        raise IndexFormatError(f"{len(data) - end} unexpected trailing bytes after posting lists")
    return InvertedIndex(
        kind,
        lists,
        grid=grid,
        order=order,
        bucketer=bucketer,
        tree_height=height,
        token_grids=token_grids,
        fingerprint=fingerprint,
    )


def save(index: InvertedIndex, path) -> None:
    Path(path).write_bytes(dumps(index))


def load(path) -> InvertedIndex:
    return loads(Path(path).read_bytes())
