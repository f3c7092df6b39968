"""Associative arrays: sparse 2-D arrays indexed by sorted string keys.

Entries are held in a dict keyed by ``(row_key, col_key)``.  The sorted key
lists are derived from the entries, so every label always has at least one
entry.  Arrays are immutable; every operation returns a new array.

Python ``str`` ordering is code-point order, which for UTF-8 is identical to
byte-lexicographic order, so plain ``sorted`` gives platform-stable keys.
"""
from __future__ import annotations

import bisect
import numbers
from typing import Any, Iterable, NamedTuple, Sequence

from .semiring import PLUS_TIMES, CollisionRule, Semiring

NUMERIC = "numeric"
STRING = "string"


class Triples(NamedTuple):
    rows: list
    cols: list
    vals: list


class Prefix(str):
    """Key selector matching every key that starts with the given text."""


class KeyRange(NamedTuple):
    """Inclusive key range selector; either end may be None (open)."""

    lo: str | None
    hi: str | None


def _is_zero(v) -> bool:
    return v == "" or (not isinstance(v, str) and v == 0)


def _kind_of(v) -> str:
    if isinstance(v, str):
        return STRING
    if isinstance(v, bool) or not isinstance(v, numbers.Real):
        raise TypeError(f"unsupported value type {type(v).__name__}: {v!r}")
    return NUMERIC


def _normalize_number(v):
    # numpy scalars and friends become plain int/float so equality and
    # serialization behave uniformly.
    if isinstance(v, numbers.Integral):
        return int(v)
    return float(v)


def _broadcast(x, n: int, what: str) -> list:
    if isinstance(x, (str, numbers.Number)):
        return [x] * n
    x = list(x)
    if len(x) != n:
        raise ValueError(f"{what} has length {len(x)}, expected {n}")
    return x


class AssociativeArray:
    __slots__ = ("_data", "_kind", "_rows", "_cols")

    def __init__(self, data: dict | None = None, kind: str | None = None):
        """Wrap an already-clean ``{(row, col): value}`` dict.

        Callers outside this module should use :func:`from_triples`.
        """
        data = data or {}
        if kind is None:
            kind = _kind_of(next(iter(data.values()))) if data else NUMERIC
        self._data = data
        self._kind = kind
        self._rows = None
        self._cols = None

    # -- basic accessors ---------------------------------------------------
    @property
    def value_kind(self) -> str:
        return self._kind

    @property
    def row_keys(self) -> list[str]:
        if self._rows is None:
            self._rows = sorted({r for r, _ in self._data})
        return self._rows

    @property
    def col_keys(self) -> list[str]:
        if self._cols is None:
            self._cols = sorted({c for _, c in self._data})
        return self._cols

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.row_keys), len(self.col_keys)

    @property
    def nnz(self) -> int:
        return len(self._data)

    @property
    def zero(self):
        return "" if self._kind == STRING else 0

    def is_empty(self) -> bool:
        return not self._data

    def items(self):
        """Unordered ``((row, col), value)`` pairs."""
        return self._data.items()

    def get(self, row: str, col: str):
        return self._data.get((row, col), self.zero)

    def __getitem__(self, key):
        if isinstance(key, tuple) and len(key) == 2 and all(isinstance(k, str) for k in key):
            return self.get(*key)
        row_spec, col_spec = key
        return select(self, row_spec, col_spec)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AssociativeArray):
            return NotImplemented
        if not self._data and not other._data:
            return True
        return self._kind == other._kind and self._data == other._data

    def __hash__(self):
        raise TypeError("AssociativeArray is unhashable")

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        m, n = self.shape
        return f"<AssociativeArray {m}x{n} nnz={self.nnz} {self._kind}>"

    def to_text(self) -> str:
        """D4M-style display: one ``(row,col)    value`` line per entry."""
        t = find(self)
        return "".join(f"({r},{c})     {v}\n" for r, c, v in zip(*t))

    # -- operator sugar ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __mul__(self, other):
        return element_mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "AssociativeArray":
        return transpose(self)


def empty(kind: str = NUMERIC) -> AssociativeArray:
    return AssociativeArray({}, kind)


def from_triples(rows, cols, vals, rule: CollisionRule | str = CollisionRule.MIN) -> AssociativeArray:
    """Build an array from parallel row/col/value lists.

    ``cols`` or ``vals`` may be a single scalar, which is broadcast.  Colliding
    (row, col) pairs are merged with ``rule``; zero values ("" or 0) are
    dropped after merging.
    """
    rule = CollisionRule.coerce(rule)
    rows = list(rows)
    n = len(rows)
    cols = _broadcast(cols, n, "cols")
    vals = _broadcast(vals, n, "vals")
    if n == 0:
        return empty()
    kind = _kind_of(vals[0])
    if kind == STRING and rule is CollisionRule.SUM:
        raise ValueError("sum collision rule is not defined for string values")
    data: dict = {}
    combine = rule.combine
    for r, c, v in zip(rows, cols, vals):
        if not isinstance(r, str) or not isinstance(c, str):
            raise TypeError(f"keys must be strings, got {r!r}, {c!r}")
        if _kind_of(v) != kind:
            raise TypeError("an array holds either numeric or string values, not both")
        if kind == NUMERIC:
            v = _normalize_number(v)
        key = (r, c)
        old = data.get(key)
        data[key] = v if old is None else combine(old, v)
    return AssociativeArray({k: v for k, v in data.items() if not _is_zero(v)}, kind)


def find(a: AssociativeArray) -> Triples:
    """Row-major sorted triples."""
    keys = sorted(a._data)
    data = a._data
    return Triples([k[0] for k in keys], [k[1] for k in keys], [data[k] for k in keys])


def _check_kinds(a: AssociativeArray, b: AssociativeArray) -> str:
    if a._data and b._data and a._kind != b._kind:
        raise TypeError(f"cannot combine {a._kind} and {b._kind} arrays")
    return a._kind if a._data else b._kind


def add(a: AssociativeArray, b: AssociativeArray, op: Semiring | CollisionRule | str | None = None) -> AssociativeArray:
    """Element-wise sum over the union of keys.

    Numeric arrays combine with ``op`` (a semiring, default plus.times, or a
    collision rule); string arrays combine with a collision rule (default min).
    """
    kind = _check_kinds(a, b)
    if op is None:
        op = CollisionRule.MIN if kind == STRING else PLUS_TIMES
    if isinstance(op, Semiring):
        if kind == STRING:
            raise TypeError("string arrays combine with a CollisionRule, not a semiring")
        combine = op.add
    else:
        rule = CollisionRule.coerce(op)
        if kind == STRING and rule is CollisionRule.SUM:
            raise ValueError("sum collision rule is not defined for string values")
        combine = rule.combine
    out = dict(a._data)
    for k, v in b._data.items():
        old = out.get(k)
        out[k] = v if old is None else combine(old, v)
    return AssociativeArray({k: v for k, v in out.items() if not _is_zero(v)}, kind)


def subtract(a: AssociativeArray, b: AssociativeArray) -> AssociativeArray:
    """Drop from ``a`` every coordinate that ``b`` stores, whatever its value."""
    _check_kinds(a, b)
    bd = b._data
    return AssociativeArray({k: v for k, v in a._data.items() if k not in bd}, a._kind)


def _require_numeric(*arrays: AssociativeArray) -> None:
    for x in arrays:
        if x._data and x._kind != "numeric":
            raise TypeError("operation requires numeric arrays")


def element_mul(a: AssociativeArray, b: AssociativeArray, s: Semiring = PLUS_TIMES) -> AssociativeArray:
    _require_numeric(a, b)
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    out = {}
    mul = s.mul
    for k in small._data:
        if k in big._data:
            v = mul(a._data[k], b._data[k])
            if not _is_zero(v) and v != s.zero:
                out[k] = v
    return AssociativeArray(out, NUMERIC)


def matmul(a: AssociativeArray, b: AssociativeArray, s: Semiring = PLUS_TIMES) -> AssociativeArray:
    """Array product; a's column keys are matched to b's row keys by string."""
    _require_numeric(a, b)
    b_rows: dict = {}
    for (r, c), v in b._data.items():
        b_rows.setdefault(r, []).append((c, v))
    acc: dict = {}
    add_, mul = s.add, s.mul
    for (i, k), av in a._data.items():
        for j, bv in b_rows.get(k, ()):
            p = mul(av, bv)
            key = (i, j)
            old = acc.get(key)
            acc[key] = p if old is None else add_(old, p)
    return AssociativeArray({k: v for k, v in acc.items() if not _is_zero(v) and v != s.zero}, NUMERIC)


def _check_sep(keys: Iterable[str], sep: str) -> None:
    for k in keys:
        if sep in k:
            raise ValueError(f"separator {sep!r} occurs inside key {k!r}; labels would be ambiguous")


def kron(a: AssociativeArray, b: AssociativeArray, s: Semiring = PLUS_TIMES, sep: str = ":") -> AssociativeArray:
    """Kronecker product with keys joined as ``a_key + sep + b_key``."""
    _require_numeric(a, b)
    for keys in (a.row_keys, a.col_keys, b.row_keys, b.col_keys):
        _check_sep(keys, sep)
    out = {}
    mul = s.mul
    for (i, j), av in a._data.items():
        for (k, l), bv in b._data.items():
            v = mul(av, bv)
            if not _is_zero(v) and v != s.zero:
                out[(i + sep + k, j + sep + l)] = v
    return AssociativeArray(out, NUMERIC)


def transpose(a: AssociativeArray) -> AssociativeArray:
    return AssociativeArray({(c, r): v for (r, c), v in a._data.items()}, a._kind)


def _key_matcher(spec, keys: list[str]):
    """Return the subset of sorted ``keys`` selected by ``spec``."""
    if spec is None or spec is Ellipsis or (isinstance(spec, slice) and spec == slice(None)):
        return None
    if isinstance(spec, str) and spec == ":":
        return None
    if isinstance(spec, Prefix):
        lo = bisect.bisect_left(keys, spec)
        hi = lo
        while hi < len(keys) and keys[hi].startswith(spec):
            hi += 1
        return set(keys[lo:hi])
    if isinstance(spec, KeyRange):
        lo = 0 if spec.lo is None else bisect.bisect_left(keys, spec.lo)
        hi = len(keys) if spec.hi is None else bisect.bisect_right(keys, spec.hi)
        return set(keys[lo:hi])
    if isinstance(spec, str):
        spec = parse_key_string(spec)
        if isinstance(spec, Prefix):
            return _key_matcher(spec, keys)
    wanted = set()
    for k in spec:
        if isinstance(k, Prefix):
            wanted |= _key_matcher(k, keys)
        else:
            wanted.add(k)
    return wanted


def parse_key_string(text: str):
    """Parse D4M-style key text such as ``"ip.src,ip.dst,"`` or ``"ip.*,"``.

    The last character is the separator.  A lone trailing ``*`` element marks
    a prefix.
    """
    sep = text[-1]
    parts = text[:-1].split(sep) if len(text) > 1 else []
    if len(parts) == 1 and parts[0].endswith("*"):
        return Prefix(parts[0][:-1])
    return [Prefix(p[:-1]) if p.endswith("*") else p for p in parts]


def select(a: AssociativeArray, row_spec=None, col_spec=None) -> AssociativeArray:
    """Sub-array restricted to rows/cols matching the specs.

    A spec is ``None``/``":"``/``...`` (everything), a list of keys, a
    :class:`Prefix`, a :class:`KeyRange`, or D4M key text like ``"a,b,"``.
    """
    rows = _key_matcher(row_spec, a.row_keys)
    cols = _key_matcher(col_spec, a.col_keys)
    if rows is None and cols is None:
        return a
    out = {
        k: v
        for k, v in a._data.items()
        if (rows is None or k[0] in rows) and (cols is None or k[1] in cols)
    }
    return AssociativeArray(out, a._kind)


def _relabel(old_keys: list[str], new_keys: Sequence[str], what: str) -> dict:
    new_keys = list(new_keys)
    if len(new_keys) != len(old_keys):
        raise ValueError(f"{what}: got {len(new_keys)} labels for {len(old_keys)} keys")
    if len(set(new_keys)) != len(new_keys):
        raise ValueError(f"{what}: new labels must be distinct")
    return dict(zip(old_keys, new_keys))


def put_row(a: AssociativeArray, new_rows: Sequence[str]) -> AssociativeArray:
    """Positionally relabel rows: the i-th sorted row key becomes new_rows[i]."""
    m = _relabel(a.row_keys, new_rows, "put_row")
    return AssociativeArray({(m[r], c): v for (r, c), v in a._data.items()}, a._kind)


def put_col(a: AssociativeArray, new_cols: Sequence[str]) -> AssociativeArray:
    m = _relabel(a.col_keys, new_cols, "put_col")
    return AssociativeArray({(r, m[c]): v for (r, c), v in a._data.items()}, a._kind)


def put_val(a: AssociativeArray, value: Any) -> AssociativeArray:
    """Replace every stored value with ``value`` (keeps the sparsity pattern)."""
    if _is_zero(value):
        return empty(_kind_of(value))
    kind = _kind_of(value)
    if kind == NUMERIC:
        value = _normalize_number(value)
    return AssociativeArray(dict.fromkeys(a._data, value), kind)


def cat_str(a: Sequence[str], sep: str, b: Sequence[str] | str) -> list[str]:
    """Element-wise ``a[i] + sep + b[i]``; a length-1 ``b`` is broadcast."""
    if isinstance(b, str):
        b = [b]
    b = list(b)
    if len(b) == 1:
        return [x + sep + b[0] for x in a]
    if len(b) != len(a):
        raise ValueError(f"cat_str: lengths {len(a)} and {len(b)} differ")
    return [x + sep + y for x, y in zip(a, b)]


def val2col(a: AssociativeArray, sep: str = "|") -> AssociativeArray:
    """Explode ``(r, c, v)`` into ``(r, c + sep + v, 1)``."""
    if not sep:
        raise ValueError("separator must be non-empty")
    if a._data and a._kind != STRING:
        raise TypeError("val2col requires a string-valued array")
    _check_sep(a.col_keys, sep)
    return AssociativeArray({(r, c + sep + v): 1 for (r, c), v in a._data.items()}, NUMERIC)


def col2val(e: AssociativeArray, sep: str = "|") -> AssociativeArray:
    """Inverse of :func:`val2col`; splits each column key at its first ``sep``."""
    if e._data and e._kind != NUMERIC:
        raise TypeError("col2val requires a numeric array")
    out = {}
    for (r, c), v in e._data.items():
        if v != 1:
            raise ValueError(f"col2val expects all values 1, got {v!r} at ({r}, {c})")
        field, found, value = c.partition(sep)
        if not found:
            raise ValueError(f"column key {c!r} has no separator {sep!r}")
        key = (r, field)
        if key in out:
            raise ValueError(f"row {r!r} has several columns with prefix {field + sep!r}")
        out[key] = value
    return AssociativeArray({k: v for k, v in out.items() if v != ""}, STRING)


def sum(a: AssociativeArray, dim: int, s: Semiring = PLUS_TIMES) -> AssociativeArray:  # noqa: A001
    """Collapse rows (dim=1, row key "1") or columns (dim=2, col key "1")."""
    if dim not in (1, 2):
        raise ValueError("dim must be 1 or 2")
    _require_numeric(a)
    acc: dict = {}
    add_ = s.add
    for (r, c), v in a._data.items():
        key = ("1", c) if dim == 1 else (r, "1")
        old = acc.get(key)
        acc[key] = v if old is None else add_(old, v)
    return AssociativeArray({k: v for k, v in acc.items() if not _is_zero(v) and v != s.zero}, NUMERIC)


def identity(keys: Iterable[str]) -> AssociativeArray:
    """Labeled identity over ``keys`` (plus.times one on the diagonal)."""
    return AssociativeArray({(k, k): 1 for k in keys}, NUMERIC)
