"""Domain types, exact similarity functions and verification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


class DataError(ValueError):
    """Malformed corpus or query input."""


@dataclass(frozen=True, slots=True)
class Region:
    """Axis-aligned minimum bounding rectangle."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin <= self.xmax and self.ymin <= self.ymax):
            raise DataError(f"invalid region {self.as_tuple()}: min corner exceeds max corner")
        for v in self.as_tuple():
            if not math.isfinite(v):
                raise DataError(f"invalid region {self.as_tuple()}: non-finite coordinate")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def clip(self, other: Region) -> Region | None:
        """Intersection rectangle with positive area, else None."""
        x0 = max(self.xmin, other.xmin)
        y0 = max(self.ymin, other.ymin)
        x1 = min(self.xmax, other.xmax)
        y1 = min(self.ymax, other.ymax)
        if x1 <= x0 or y1 <= y0:
            return None
        return Region(x0, y0, x1, y1)

    @classmethod
    def bounding(cls, regions: Iterable[Region]) -> Region:
        regions = list(regions)
        if not regions:
            raise ValueError("cannot bound an empty region list")
        return cls(
            min(r.xmin for r in regions),
            min(r.ymin for r in regions),
            max(r.xmax for r in regions),
            max(r.ymax for r in regions),
        )


def intersection_area(a: Region, b: Region) -> float:
    w = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    if w <= 0.0:
        return 0.0
    h = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if h <= 0.0:
        return 0.0
    return w * h


def spatial_jaccard(a: Region, b: Region) -> float:
    """Area Jaccard of two rectangles.

    Two zero-area regions are similar (1.0) only when their coordinates are
    identical; otherwise a zero union yields 0.0.
    """
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 1.0 if a == b else 0.0
    return inter / union


class TokenTable:
    """Token vocabulary with idf weights frozen at construction time.

    Ids are dense and assigned in first-seen order.
    """

    def __init__(self, token_lists: Iterable[Iterable[str]] = ()):
        self._ids: dict[str, int] = {}
        self._names: list[str] = []
        self._counts: list[int] = []
        n = 0
        for tokens in token_lists:
            n += 1
            seen = set()
            for tok in tokens:
                if tok in seen:
                    continue
                seen.add(tok)
                tid = self._ids.get(tok)
                if tid is None:
                    tid = len(self._names)
                    self._ids[tok] = tid
                    self._names.append(tok)
                    self._counts.append(0)
                self._counts[tid] += 1
        self.num_objects = n
        self._weights = [math.log(n / c) for c in self._counts]
        # weight of a query token never seen in the corpus (max idf)
        self.unknown_weight = math.log(n) if n > 0 else 0.0

    def __len__(self) -> int:
        return len(self._names)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def token_id(self, token: str) -> int | None:
        return self._ids.get(token)

    def token(self, tid: int) -> str:
        return self._names[tid]

    def count(self, tid: int) -> int:
        return self._counts[tid]

    def weight(self, tid: int) -> float:
        """idf weight; ids beyond the vocabulary get the unknown-token weight."""
        if 0 <= tid < len(self._weights):
            return self._weights[tid]
        return self.unknown_weight

    @property
    def weights(self) -> list[float]:
        return list(self._weights)

    def encode(self, tokens: Iterable[str]) -> frozenset[int]:
        """Map token strings to ids; unseen tokens get fresh ids past the vocabulary.

        Fresh ids are only meaningful within the returned set: they carry the
        unknown-token weight and can never match a corpus object.
        """
        out = set()
        extra: dict[str, int] = {}
        for tok in tokens:
            tid = self._ids.get(tok)
            if tid is None:
                tid = extra.setdefault(tok, len(self._names) + len(extra))
            out.add(tid)
        return frozenset(out)

    def total_weight(self, tids: Iterable[int]) -> float:
        return math.fsum(self.weight(t) for t in tids)


@dataclass(frozen=True, slots=True)
class STObject:
    id: int
    region: Region
    tokens: frozenset[int]


@dataclass(frozen=True, slots=True)
class Query:
    region: Region
    tokens: frozenset[int]
    tau_r: float = 0.4
    tau_t: float = 0.4

    def __post_init__(self):
        for name in ("tau_r", "tau_t"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name}={v} outside [0, 1]")


def textual_jaccard(a: Iterable[int], b: Iterable[int], weights: TokenTable) -> float:
    """Weighted Jaccard over idf weights.

    A zero-weight union (both sets empty, or only zero-idf tokens) follows
    the same identity rule as spatial_jaccard.
    """
    a = frozenset(a)
    b = frozenset(b)
    common = a & b
    num = math.fsum(weights.weight(t) for t in common)
    den = num + math.fsum(weights.weight(t) for t in a ^ b)
    if den <= 0.0:
        return 1.0 if a == b else 0.0
    return num / den


@dataclass(frozen=True, slots=True)
class Match:
    id: int
    sim_r: float
    sim_t: float


@dataclass(frozen=True)
class AnswerSet:
    matches: tuple[Match, ...] = ()

    @property
    def ids(self) -> list[int]:
        return [m.id for m in self.matches]

    def __len__(self) -> int:
        return len(self.matches)

    def __iter__(self) -> Iterator[Match]:
        return iter(self.matches)


@dataclass
class Corpus:
    """Objects plus the token table derived from them."""

    objects: list[STObject]
    table: TokenTable
    by_id: dict[int, STObject] = field(init=False, repr=False)
    _token_totals: dict[int, float] = field(init=False, repr=False)

    def __post_init__(self):
        self.by_id = {}
        for o in self.objects:
            if o.id in self.by_id:
                raise DataError(f"duplicate object id {o.id}")
            self.by_id[o.id] = o
        self._token_totals = {o.id: self.table.total_weight(o.tokens) for o in self.objects}

    @classmethod
    def from_records(cls, records: Sequence[tuple[int, Region, Sequence[str]]]) -> Corpus:
        table = TokenTable(r[2] for r in records)
        objects = [STObject(oid, region, table.encode(toks)) for oid, region, toks in records]
        return cls(objects, table)

    def __len__(self) -> int:
        return len(self.objects)

    def token_total(self, oid: int) -> float:
        return self._token_totals[oid]

    @property
    def space(self) -> Region | None:
        if not self.objects:
            return None
        return Region.bounding(o.region for o in self.objects)

    def query(self, region: Region, tokens: Iterable[str], tau_r: float = 0.4, tau_t: float = 0.4) -> Query:
        return Query(region, self.table.encode(tokens), tau_r, tau_t)


def verify(q: Query, candidates: Iterable[int], corpus: Corpus) -> AnswerSet:
    """Exact check of each candidate, in ascending id order."""
    out = []
    for oid in sorted(set(candidates)):
        o = corpus.by_id.get(oid)
        if o is None:
            raise KeyError(f"unknown object id {oid}")
        sim_r = spatial_jaccard(q.region, o.region)
        if sim_r < q.tau_r:
            continue
        sim_t = textual_jaccard(q.tokens, o.tokens, corpus.table)
        if sim_t < q.tau_t:
            continue
        out.append(Match(oid, sim_r, sim_t))
    return AnswerSet(tuple(out))


def brute_force_search(q: Query, corpus: Corpus) -> AnswerSet:
    """Linear scan straight from the definitions; the ground truth for tests."""
    out = []
    for o in sorted(corpus.objects, key=lambda o: o.id):
        sim_r = spatial_jaccard(q.region, o.region)
        sim_t = textual_jaccard(q.tokens, o.tokens, corpus.table)
        if sim_r >= q.tau_r and sim_t >= q.tau_t:
            out.append(Match(o.id, sim_r, sim_t))
    return AnswerSet(tuple(out))


# -- JSON lines I/O ---------------------------------------------------------

def _parse_mbr(value) -> Region:
    if not isinstance(value, list) or len(value) != 4:
        raise DataError("'mbr' must be a list of 4 numbers")
    try:
        return Region(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise DataError(f"bad 'mbr': {exc}") from None


def _parse_tokens(value) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(t, str) for t in value):
        raise DataError("'tokens' must be a list of strings")
    return value


def parse_object_line(line: str) -> tuple[int, Region, list[str]]:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(rec, dict):
        raise DataError("record is not a JSON object")
    for key in ("id", "mbr", "tokens"):
        if key not in rec:
            raise DataError(f"missing field {key!r}")
    oid = rec["id"]
    if not isinstance(oid, int) or isinstance(oid, bool) or oid < 0:
        raise DataError("'id' must be a non-negative integer")
    return oid, _parse_mbr(rec["mbr"]), _parse_tokens(rec["tokens"])


def parse_query_line(line: str, default_tau_r: float = 0.4, default_tau_t: float = 0.4) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc.msg}") from None
    if not isinstance(rec, dict):
        raise DataError("record is not a JSON object")
    for key in ("mbr", "tokens"):
        if key not in rec:
            raise DataError(f"missing field {key!r}")
    out = {
        "id": rec.get("id"),
        "region": _parse_mbr(rec["mbr"]),
        "tokens": _parse_tokens(rec["tokens"]),
        "tau_r": float(rec.get("tau_r", default_tau_r)),
        "tau_t": float(rec.get("tau_t", default_tau_t)),
    }
    for name in ("tau_r", "tau_t"):
        if not 0.0 <= out[name] <= 1.0:
            raise DataError(f"{name}={out[name]} outside [0, 1]")
    return out


def read_jsonl(path, parse):
    """Yield (line number, parsed record or DataError) for non-blank lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, parse(line)
            except DataError as exc:
                yield lineno, exc


def load_corpus(path) -> tuple[Corpus, list[tuple[int, DataError]]]:
    """Load a corpus file, skipping malformed lines and reporting them."""
    records, errors = [], []
    seen = set()
    for lineno, rec in read_jsonl(path, parse_object_line):
        if isinstance(rec, DataError):
            errors.append((lineno, rec))
        elif rec[0] in seen:
            errors.append((lineno, DataError(f"duplicate object id {rec[0]}")))
        else:
            seen.add(rec[0])
            records.append(rec)
    return Corpus.from_records(records), errors


def object_to_json(oid: int, region: Region, tokens: Sequence[str]) -> str:
    return json.dumps({"id": oid, "mbr": list(region.as_tuple()), "tokens": list(tokens)})
