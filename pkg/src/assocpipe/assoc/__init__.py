from .array import (
    NUMERIC,
    STRING,
    AssociativeArray,
    KeyRange,
    Prefix,
    Triples,
    add,
    cat_str,
    col2val,
    element_mul,
    empty,
    find,
    from_triples,
    identity,
    kron,
    matmul,
    parse_key_string,
    put_col,
    put_row,
    put_val,
    select,
    subtract,
    sum,
    transpose,
    val2col,
)
from .semiring import MAX_MIN, MAX_PLUS, MIN_PLUS, PLUS_TIMES, SEMIRINGS, CollisionRule, Semiring
from .serialize import FormatError, dumps, load, loads, save

__all__ = [
    "NUMERIC", "STRING", "AssociativeArray", "KeyRange", "Prefix", "Triples",
    "add", "cat_str", "col2val", "element_mul", "empty", "find", "from_triples",
    "identity", "kron", "matmul", "parse_key_string", "put_col", "put_row",
    "put_val", "select", "subtract", "sum", "transpose", "val2col",
    "MAX_MIN", "MAX_PLUS", "MIN_PLUS", "PLUS_TIMES", "SEMIRINGS", "CollisionRule",
    "Semiring", "FormatError", "dumps", "load", "loads", "save",
]
