"""Per-query benchmark rows and their CSV encoding.

CSV schema version 1, one row per (method, query) in method order then
query order::

    schema,method,query,tau_r,tau_t,filter_us,verify_us,candidates,answers,
    lists,postings,full_scan,mismatch

Times are wall-clock microseconds. ``mismatch`` is empty unless the run
was checked against brute force, then 0 or 1.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .filter import Engine
from .model import Query, brute_force_search

SCHEMA_VERSION = 1
COLUMNS = (
    "schema",
    "method",
    "query",
    "tau_r",
    "tau_t",
    "filter_us",
    "verify_us",
    "candidates",
    "answers",
    "lists",
    "postings",
    "full_scan",
    "mismatch",
)


@dataclass
class BenchRow:
    method: str
    query: int
    tau_r: float
    tau_t: float
    filter_us: float
    verify_us: float
    candidates: int
    answers: int
    lists: int
    postings: int
    full_scan: bool
    mismatch: bool | None = None

    def as_csv(self) -> list:
        return [
            SCHEMA_VERSION,
            self.method,
            self.query,
            self.tau_r,
            self.tau_t,
            f"{self.filter_us:.1f}",
            f"{self.verify_us:.1f}",
            self.candidates,
            self.answers,
            self.lists,
            self.postings,
            int(self.full_scan),
            "" if self.mismatch is None else int(self.mismatch),
        ]


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    @property
    def mismatches(self) -> int:
        return sum(1 for r in self.rows if r.mismatch)

    def means(self) -> dict[str, dict[str, float]]:
        """Per-method means of the timing and size columns."""
        out: dict[str, dict[str, float]] = {}
        for m in dict.fromkeys(r.method for r in self.rows):
            rows = [r for r in self.rows if r.method == m]
            n = len(rows)
            out[m] = {
                k: sum(getattr(r, k) for r in rows) / n
                for k in ("filter_us", "verify_us", "candidates", "answers", "postings")
            }
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(r.as_csv())
        return buf.getvalue()


def _run_one(engine: Engine, qid: int, q: Query, check: bool) -> BenchRow:
    answers, st = engine.search(q)
    mismatch = None
    if check:
        mismatch = answers.ids != brute_force_search(q, engine.corpus).ids
    return BenchRow(
        st.method,
        qid,
        q.tau_r,
        q.tau_t,
        st.filter_us,
        st.verify_us,
        st.candidates,
        st.answers,
        st.lists_probed,
        st.postings_scanned,
        st.full_scan,
        mismatch,
    )


def run_bench(
    engines: Sequence[Engine],
    queries: Sequence[tuple[int, Query]],
    check: bool = False,
    serial: bool = False,
    workers: int | None = None,
) -> BenchReport:
    """Run every query under every engine; row order never depends on scheduling."""
    report = BenchReport()
    for engine in engines:
        if serial:
            rows = [_run_one(engine, qid, q, check) for qid, q in queries]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(lambda item: _run_one(engine, item[0], item[1], check), queries))
        report.rows.extend(rows)
    return report
