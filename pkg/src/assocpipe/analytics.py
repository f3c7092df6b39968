"""Graph queries over an ingested edge-schema store."""
from __future__ import annotations

import ipaddress
import json
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import assoc
from .tablestore import TEDGE, TEDGE_DEG, TEDGE_T, Cell, Store

SEP = "|"


@dataclass
class QueryResult:
    packet_ids: list[str]
    cells: list[Cell] = field(default_factory=list)
    elapsed: float = 0.0

    def same_answer(self, other: "QueryResult") -> bool:
        return self.packet_ids == other.packet_ids and self.cells == other.cells

    def to_tsv(self) -> str:
        return "".join(f"{c.row}\t{c.col}\t{c.val}\n" for c in self.cells)

    def to_jsonl(self) -> str:
        return "".join(json.dumps({"row": c.row, "col": c.col, "val": c.val}) + "\n" for c in self.cells)


def _check_ip(ip: str) -> str:
    try:
        return str(ipaddress.IPv4Address(ip))
    except (ipaddress.AddressValueError, ValueError) as e:
        raise ValueError(f"not a dotted-quad IPv4 address: {ip!r}") from e


def endpoint_columns(ip: str) -> list[str]:
    ip = _check_ip(ip)
    return [f"ip.dst{SEP}{ip}", f"ip.src{SEP}{ip}"]


def connections_to(store: Store, ip: str) -> QueryResult:
    """Packets with ``ip`` as source or destination, with their full Tedge rows.

    Uses exact row lookups in TedgeT (a plain prefix scan for ``1.1.1.1``
    would also hit ``1.1.1.10``).
    """
    start = time.perf_counter()
    cols = endpoint_columns(ip)
    tedge_t = store.table(TEDGE_T)
    ids = sorted({c.col for key in cols for c in tedge_t.scan_row(key)})
    tedge = store.table(TEDGE)
    cells = [c for pid in ids for c in tedge.scan_row(pid)]
    return QueryResult(ids, cells, time.perf_counter() - start)


def query_via_array(e_files: Iterable[str | Path], ip: str) -> QueryResult:
    """The same query in array form: select the endpoint columns of each E file."""
    start = time.perf_counter()
    cols = endpoint_columns(ip)
    cells = []
    for path in e_files:
        E = assoc.load(path)
        hits = assoc.select(E, None, cols)
        if hits.is_empty():
            continue
        rows, cs, _ = assoc.find(assoc.select(E, hits.row_keys, None))
        cells.extend(Cell(r, c, "1") for r, c in zip(rows, cs))
    cells.sort()
    ids = sorted({c.row for c in cells})
    return QueryResult(ids, cells, time.perf_counter() - start)


def degrees(store: Store, field_name: str) -> list[tuple[str, int]]:
    """``(value, degree)`` for every value of ``field_name`` in TedgeDeg."""
    prefix = field_name + SEP
    out = []
    for c in store.table(TEDGE_DEG).scan_prefix(prefix):
        if c.col == "degree":
            out.append((c.row[len(prefix):], int(c.val)))
    return out


def top_k(store: Store, field_name: str, k: int) -> list[tuple[str, int]]:
    """The ``k`` highest-degree values; ties go to the smaller value string."""
    if k <= 0:
        return []
    return sorted(degrees(store, field_name), key=lambda vd: (-vd[1], vd[0]))[:k]


def degree_distribution(store: Store, field_name: str) -> dict[int, int]:
    """Histogram: degree -> number of values having that degree."""
    hist = Counter(d for _, d in degrees(store, field_name))
    return dict(sorted(hist.items()))


def pairs_to_tsv(pairs: Iterable[tuple]) -> str:
    return "".join("\t".join(str(x) for x in p) + "\n" for p in pairs)


def pairs_to_jsonl(pairs: Iterable[tuple], names: tuple[str, str]) -> str:
    return "".join(json.dumps(dict(zip(names, p))) + "\n" for p in pairs)
