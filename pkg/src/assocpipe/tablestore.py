"""Embedded sorted (row, col) -> value table store.

Each table is a directory of immutable sorted run files plus a ``MANIFEST``::

    <store>/<table>/MANIFEST          JSON: name, combiner, run list, markers
    <store>/<table>/run-NNNN.srt      sorted cells
    <store>/<table>/LOCK              flock target guarding MANIFEST updates

Writes land in an in-memory buffer; :meth:`Table.flush` turns the buffer into
a new run and :meth:`Table.compact` merges all runs into one.  Reads merge the
buffer and every run.  Plain tables resolve duplicate cells newest-wins; the
``sum`` combiner adds decimal strings, so its result does not depend on
insertion order, batching, flushes or compactions.

Concurrency contract:

* ``put_*`` calls are atomic per batch.  Inside one process a batch is
  visible to scans on the same handle as soon as the call returns.
* Across handles and processes a batch becomes visible once flushed; the
  manifest is replaced atomically under an exclusive ``flock``, so readers see
  either all of a run or none of it.
* Batches carrying a ``marker`` are written straight to a run and recorded in
  the manifest in the same locked update; replaying a marker is a no-op.

Run file layout: ``b"SRT1"``, u64 cell count, then per cell three
(u32 length, UTF-8 bytes) strings for row, column and value, sorted by
(row, column).
"""
from __future__ import annotations

import bisect
import contextlib
import fcntl
import heapq
import json
import os
import struct
import threading
import uuid
from decimal import Decimal
from pathlib import Path
from typing import IO, Iterable, Iterator, NamedTuple

RUN_MAGIC = b"SRT1"
MANIFEST_VERSION = 1
RESERVED = ("\x00", "\t", "\n")
COMBINERS = (None, "sum")
_HIGH = "\U0010ffff"

_COUNT = struct.Struct("<Q")
_LEN = struct.Struct("<I")


class SchemaError(ValueError):
    """Table exists with a different combiner, or is unknown."""


class Cell(NamedTuple):
    row: str
    col: str
    val: str


def decimal_sum(a: str, b: str) -> str:
    try:
        return str(int(a) + int(b))
    except ValueError:
        total = Decimal(a) + Decimal(b)
        return str(int(total)) if total == total.to_integral_value() else str(total.normalize())


def _check_key(s: str) -> None:
    if not isinstance(s, str):
        raise TypeError(f"keys and values must be strings, got {type(s).__name__}")
    for ch in RESERVED:
        if ch in s:
            raise ValueError(f"{s!r} contains reserved character {ch!r}")


def _write_run(path: Path, keys: list, vals: list) -> None:
    parts = [RUN_MAGIC, _COUNT.pack(len(keys))]
    pack = _LEN.pack
    for (r, c), v in zip(keys, vals):
        rb, cb, vb = r.encode(), c.encode(), v.encode()
        parts.append(pack(len(rb)) + rb + pack(len(cb)) + cb + pack(len(vb)) + vb)
    with open(path, "wb") as f:
        f.write(b"".join(parts))
        f.flush()
        os.fsync(f.fileno())


def _read_run(path: Path) -> tuple[list, list]:
    buf = path.read_bytes()
    if buf[:4] != RUN_MAGIC:
        raise ValueError(f"{path}: bad run magic")
    (n,) = _COUNT.unpack_from(buf, 4)
    pos = 12
    keys, vals = [], []
    unpack = _LEN.unpack_from
    for _ in range(n):
        out = []
        for _ in range(3):
            (ln,) = unpack(buf, pos)
            pos += 4
            out.append(buf[pos:pos + ln].decode())
            pos += ln
        keys.append((out[0], out[1]))
        vals.append(out[2])
    if pos != len(buf):
        raise ValueError(f"{path}: trailing bytes")
    return keys, vals


class Table:
    def __init__(self, directory: Path, name: str, combiner: str | None, buffer_limit: int = 500_000):
        self.dir = directory
        self.name = name
        self.combiner = combiner
        self.buffer_limit = buffer_limit
        self._buf: dict = {}
        self._lock = threading.RLock()
        self._runs: dict[str, tuple[list, list]] = {}

    def __repr__(self) -> str:
        return f"<Table {self.name} combiner={self.combiner}>"

    # -- manifest / locking -----------------------------------------------
    @contextlib.contextmanager
    def _flock(self, exclusive: bool) -> Iterator[None]:
        with open(self.dir / "LOCK", "a+b") as f:
            fcntl.flock(f, fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
            try:
                yield
            finally:
                fcntl.flock(f, fcntl.LOCK_UN)

    def _read_manifest(self) -> dict:
        return json.loads((self.dir / "MANIFEST").read_text())

    def _write_manifest(self, m: dict) -> None:
        tmp = self.dir / f"MANIFEST.{os.getpid()}.{threading.get_ident()}.tmp"
        tmp.write_text(json.dumps(m, indent=1, sort_keys=True))
        os.replace(tmp, self.dir / "MANIFEST")

    def markers(self) -> set[str]:
        with self._flock(False):
            return set(self._read_manifest()["markers"])

    def run_files(self) -> list[str]:
        with self._flock(False):
            return list(self._read_manifest()["runs"])

    # -- writes ------------------------------------------------------------
    def _merge_into(self, target: dict, cells: Iterable) -> int:
        n = 0
        if self.combiner == "sum":
            for r, c, v in cells:
                key = (r, c)
                old = target.get(key)
                target[key] = v if old is None else decimal_sum(old, v)
                n += 1
        else:
            for r, c, v in cells:
                target[(r, c)] = v
                n += 1
        return n

    def _validated(self, cells: Iterable) -> list:
        out = []
        for cell in cells:
            r, c, v = cell
            _check_key(r)
            _check_key(c)
            _check_key(v)
            if self.combiner == "sum":
                Decimal(v)
            out.append((r, c, v))
        return out

    def put_cells(self, cells: Iterable, marker: str | None = None) -> int:
        """Insert one batch of ``(row, col, val)`` cells.

        With a ``marker`` the batch goes straight to disk and is skipped if the
        marker was already applied; the return value is then 0.
        """
        cells = self._validated(cells)
        if marker is not None:
            return self._write_batch_run(cells, marker)
        with self._lock:
            n = self._merge_into(self._buf, cells)
            if len(self._buf) >= self.buffer_limit:
                self.flush()
        return n

    def put_array(self, e, value_override: str | None = None, marker: str | None = None) -> int:
        """Insert every entry of associative array ``e``.

        Numeric values are written as decimal text; ``value_override`` replaces
        all values (``"1"`` reproduces the edge-table convention).
        """
        if value_override is not None:
            cells = ((r, c, value_override) for (r, c), _ in e.items())
        else:
            cells = ((r, c, v if isinstance(v, str) else _num2str(v)) for (r, c), v in e.items())
        return self.put_cells(cells, marker)

    def _new_run_path(self, m: dict) -> tuple[str, dict]:
        name = f"run-{m['next_run']:04d}.srt"
        m = dict(m, next_run=m["next_run"] + 1)
        return name, m

    def _stage(self, data: dict) -> Path | None:
        if not data:
            return None
        keys = sorted(data)
        tmp = self.dir / f"staging-{uuid.uuid4().hex}.tmp"
        _write_run(tmp, keys, [data[k] for k in keys])
        return tmp

    def _write_batch_run(self, cells: list, marker: str) -> int:
        data: dict = {}
        self._merge_into(data, cells)
        staged = self._stage(data)
        try:
            with self._flock(True):
                m = self._read_manifest()
                if marker in m["markers"]:
                    return 0
                if staged is not None:
                    name, m = self._new_run_path(m)
                    os.replace(staged, self.dir / name)
                    staged = None
                    m["runs"] = m["runs"] + [name]
                m["markers"] = sorted(set(m["markers"]) | {marker})
                self._write_manifest(m)
        finally:
            if staged is not None:
                staged.unlink(missing_ok=True)
        return len(cells)

    def flush(self) -> None:
        """Persist the write buffer as a new sorted run."""
        with self._lock:
            if not self._buf:
                return
            staged = self._stage(self._buf)
            with self._flock(True):
                m = self._read_manifest()
                name, m = self._new_run_path(m)
                os.replace(staged, self.dir / name)
                m["runs"] = m["runs"] + [name]
                self._write_manifest(m)
            self._buf = {}

    def compact(self) -> None:
        """Fold the buffer and all runs into a single run."""
        with self._lock:
            self.flush()
            with self._flock(True):
                m = self._read_manifest()
                if len(m["runs"]) <= 1:
                    return
                self._load_runs(m["runs"])
                keys, vals = [], []
                for cell in self._merge([self._runs[r] for r in m["runs"]], None, None):
                    keys.append((cell.row, cell.col))
                    vals.append(cell.val)
                name, m = self._new_run_path(m)
                tmp = self.dir / f"staging-{uuid.uuid4().hex}.tmp"
                _write_run(tmp, keys, vals)
                os.replace(tmp, self.dir / name)
                old = m["runs"]
                m["runs"] = [name]
                self._write_manifest(m)
                for r in old:
                    (self.dir / r).unlink(missing_ok=True)
                    self._runs.pop(r, None)
                self._runs[name] = (keys, vals)

    # -- reads -------------------------------------------------------------
    def _load_runs(self, names: list[str]) -> None:
        for r in names:
            if r not in self._runs:
                self._runs[r] = _read_run(self.dir / r)
        for r in list(self._runs):
            if r not in names:
                del self._runs[r]

    def _sources(self) -> list[tuple[list, list]]:
        """Oldest-first sorted sources: every run, then the buffer."""
        with self._lock:
            with self._flock(False):
                names = self._read_manifest()["runs"]
                self._load_runs(names)
            sources = [self._runs[r] for r in names]
            if self._buf:
                keys = sorted(self._buf)
                sources.append((keys, [self._buf[k] for k in keys]))
        return sources

    def _merge(self, sources, lo, hi) -> Iterator[Cell]:
        """Merge key slices [lo, hi) of every source, applying the combiner."""
        iters = []
        for age, (keys, vals) in enumerate(sources):
            i = 0 if lo is None else bisect.bisect_left(keys, lo)
            j = len(keys) if hi is None else bisect.bisect_left(keys, hi)
            if i < j:
                iters.append(_tagged(keys, vals, age, i, j))
        cur_key = None
        cur_val = None
        summing = self.combiner == "sum"
        for key, _age, val in heapq.merge(*iters):
            if key == cur_key:
                cur_val = decimal_sum(cur_val, val) if summing else val
                continue
            if cur_key is not None:
                yield Cell(cur_key[0], cur_key[1], cur_val)
            cur_key, cur_val = key, val
        if cur_key is not None:
            yield Cell(cur_key[0], cur_key[1], cur_val)

    def scan_all(self) -> Iterator[Cell]:
        return self._merge(self._sources(), None, None)

    def scan_row(self, row: str) -> list[Cell]:
        return list(self._merge(self._sources(), (row, ""), (row + "\x00", "")))

    def scan_rows(self, lo: str | None = None, hi: str | None = None) -> list[Cell]:
        """Cells whose row lies in the inclusive range [lo, hi]."""
        return list(self._merge(self._sources(), None if lo is None else (lo, ""),
                                None if hi is None else (hi + "\x00", "")))

    def scan_prefix(self, prefix: str) -> list[Cell]:
        """Cells whose row key starts with ``prefix``."""
        return list(self._merge(self._sources(), (prefix, ""), (prefix + _HIGH, "")))

    def count(self) -> int:
        return sum(1 for _ in self.scan_all())

    def dump(self, out: IO[str]) -> int:
        n = 0
        for cell in self.scan_all():
            out.write(f"{cell.row}\t{cell.col}\t{cell.val}\n")
            n += 1
        return n


def _tagged(keys, vals, age, i, j):
    for k in range(i, j):
        yield keys[k], age, vals[k]


def _num2str(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


class Store:
    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._tables: dict[str, Table] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"<Store {self.dir}>"

    def create_table(self, name: str, combiner: str | None = None) -> Table:
        """Create ``name`` or open it if it already exists with the same combiner."""
        if combiner not in COMBINERS:
            raise SchemaError(f"unknown combiner {combiner!r}")
        _check_key(name)
        if "/" in name or name.startswith("."):
            raise ValueError(f"bad table name {name!r}")
        with self._lock:
            d = self.dir / name
            d.mkdir(exist_ok=True)
            t = Table(d, name, combiner)
            with t._flock(True):
                mpath = d / "MANIFEST"
                if mpath.exists():
                    m = t._read_manifest()
                    if m["combiner"] != combiner:
                        raise SchemaError(f"table {name} exists with combiner {m['combiner']!r}, not {combiner!r}")
                else:
                    t._write_manifest({"version": MANIFEST_VERSION, "name": name, "combiner": combiner,
                                       "next_run": 0, "runs": [], "markers": []})
            if name not in self._tables:
                self._tables[name] = t
            return self._tables[name]

    def table(self, name: str) -> Table:
        with self._lock:
            if name in self._tables:
                return self._tables[name]
        mpath = self.dir / name / "MANIFEST"
        if not mpath.exists():
            raise SchemaError(f"no table {name!r} in {self.dir}")
        combiner = json.loads(mpath.read_text())["combiner"]
        return self.create_table(name, combiner)

    def tables(self) -> list[str]:
        return sorted(p.parent.name for p in self.dir.glob("*/MANIFEST"))

    def flush(self) -> None:
        for t in list(self._tables.values()):
            t.flush()

    def compact(self) -> None:
        for name in self.tables():
            self.table(name).compact()


def open_store(directory: str | os.PathLike) -> Store:
    return Store(directory)


# Edge-schema table names.
TEDGE = "Tedge"
TEDGE_T = "TedgeT"
TEDGE_DEG = "TedgeDeg"


def open_edge_schema(directory: str | os.PathLike) -> tuple[Store, Table, Table, Table]:
    """Open (creating if needed) Tedge, TedgeT and the summing TedgeDeg."""
    store = open_store(directory)
    return (store, store.create_table(TEDGE), store.create_table(TEDGE_T),
            store.create_table(TEDGE_DEG, "sum"))


def scan_col(table_t: Table, col_prefix: str) -> list[Cell]:
    """Column query served from a transpose table.

    Returns cells in (row, col) orientation of the original table, i.e. with
    the transpose's row and column swapped back, sorted.
    """
    return sorted(Cell(c.col, c.row, c.val) for c in table_t.scan_prefix(col_prefix))
