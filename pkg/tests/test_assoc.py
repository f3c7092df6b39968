import random
from collections import Counter

import hypothesis.strategies as st
import pytest
from hypothesis import given

from assocpipe import assoc
from assocpipe.assoc import (
    MIN_PLUS,
    AssociativeArray,
    CollisionRule,
    KeyRange,
    Prefix,
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
    put_col,
    put_row,
    select,
    subtract,
    transpose,
    val2col,
)

import oracles


def header_array(header):
    return from_triples(["PacketID"] * len(header), [f for f, _ in header], [v for _, v in header])


def exploded_header(header):
    return from_triples(["PacketID"] * len(header), [f"{f}|{v}" for f, v in header], 1)


def assert_sorted(a: AssociativeArray):
    for keys in (a.row_keys, a.col_keys):
        assert all(x < y for x, y in zip(keys, keys[1:]))


keys = st.text(alphabet="abcxy.|_0", min_size=1, max_size=4)
triples = st.lists(st.tuples(keys, keys, st.integers(-3, 3)), max_size=40)


# -- construction -------------------------------------------------------------

def test_from_triples_no_collisions():
    a = from_triples(["p1", "p2"], ["ip.src", "ip.src"], ["133.40.77.44", "63.237.205.194"])
    assert a.shape == (2, 1)
    assert a.get("p1", "ip.src") == "133.40.77.44"
    assert a.get("p2", "ip.src") == "63.237.205.194"


def test_from_triples_sample_header_is_one_row(sample_header):
    e = exploded_header(sample_header)
    assert e.shape == (1, 9)
    assert e.row_keys == ["PacketID"]


def test_duplicate_min_rule():
    a = from_triples(["p1", "p1"], ["ip.len", "ip.len"], [100, 100], rule="min")
    assert a.nnz == 1 and a.get("p1", "ip.len") == 100


@pytest.mark.parametrize("rule,expected", [("min", "abc"), ("max", "abd"), ("first", "abd")])
def test_string_collision_rules(rule, expected):
    a = from_triples(["r", "r"], ["c", "c"], ["abd", "abc"], rule=rule)
    assert a.get("r", "c") == expected


def test_sum_rule_numeric_and_rejected_for_strings():
    assert from_triples(["r", "r"], ["c", "c"], [2, 5], rule=CollisionRule.SUM).get("r", "c") == 7
    with pytest.raises(ValueError):
        from_triples(["r", "r"], ["c", "c"], ["a", "b"], rule="sum")


def test_zero_values_dropped():
    a = from_triples(["a", "b", "c"], ["x", "x", "x"], [0, 1, 0])
    assert a.row_keys == ["b"]
    s = from_triples(["a", "b"], ["x", "y"], ["", "v"])
    assert s.row_keys == ["b"] and s.col_keys == ["y"]


def test_length_mismatch():
    with pytest.raises(ValueError):
        from_triples(["a", "b"], ["x"] * 3, [1, 2])


def test_mixed_value_kinds_rejected():
    with pytest.raises(TypeError):
        from_triples(["a", "b"], ["x", "x"], [1, "s"])


@given(triples)
def test_invariants_after_construction(ts):
    a = from_triples([t[0] for t in ts], [t[1] for t in ts], [t[2] for t in ts], rule="sum")
    assert_sorted(a)
    assert all(v != 0 for _, v in a.items())
    used_rows = {r for (r, _), _ in a.items()}
    assert used_rows == set(a.row_keys)


@given(triples)
def test_find_round_trip(ts):
    a = from_triples([t[0] for t in ts], [t[1] for t in ts], [t[2] for t in ts], rule="max")
    t = find(a)
    assert list(zip(t.rows, t.cols)) == sorted(zip(t.rows, t.cols))
    assert from_triples(*t) == a


def test_find_empty_and_sample(sample_header):
    assert find(empty()) == ([], [], [])
    t = find(header_array(sample_header))
    assert len(t.rows) == 9
    assert t.cols == sorted(f for f, _ in sample_header)


# -- add / subtract -------------------------------------------------------------

def test_add_identity_and_scalar():
    a = from_triples(["r1"], ["c1"], [2])
    assert add(a, empty()) == a
    assert add(a, from_triples(["r1"], ["c1"], [3])).get("r1", "c1") == 5


def test_add_mixed_kinds():
    with pytest.raises(TypeError):
        add(from_triples(["r"], ["c"], [1]), from_triples(["r"], ["c"], ["x"]))


def test_add_matches_dense_oracle():
    rng = random.Random(11)
    for _ in range(50):
        a, b = oracles.random_array(rng, 10, 10), oracles.random_array(rng, 10, 10)
        assert oracles.as_dict(add(a, b)) == oracles.dense_add(a, b)


def test_string_add_uses_min_by_default():
    a = from_triples(["r", "r"], ["c", "d"], ["b", "x"])
    b = from_triples(["r"], ["c"], ["a"])
    assert add(a, b).get("r", "c") == "a"
    assert add(a, b, "max").get("r", "c") == "b"


def test_subtract_self_is_empty():
    rng = random.Random(3)
    a = oracles.random_array(rng)
    assert subtract(a, a).is_empty()


def test_subtract_then_add_replaces_column(sample_header):
    A = from_triples(["p1", "p1", "p2", "p2"], ["frame.time", "ip.src"] * 2,
                     ["2017 Apr 12 07:49:36.18828 EDT", "1.2.3.4", "2017 Apr 12 07:49:37.00000 EDT", "5.6.7.8"])
    At = from_triples(["p1", "p2"], "frame.time", ["2017-04-12 07:49:36.18828", "2017-04-12 07:49:37.00000"])
    B = (A - At) + At
    assert B.get("p1", "frame.time") == "2017-04-12 07:49:36.18828"
    assert B.get("p2", "frame.time") == "2017-04-12 07:49:37.00000"
    assert select(B, None, ["ip.src"]) == select(A, None, ["ip.src"])
    # plain add would have kept the lexicographic min, i.e. the old value
    assert add(A, At).get("p1", "frame.time") == "2017 Apr 12 07:49:36.18828 EDT"


def test_subtract_is_coordinate_set_difference():
    rng = random.Random(5)
    for _ in range(50):
        a, b = oracles.random_array(rng), oracles.random_array(rng)
        assert oracles.as_dict(subtract(a, b)) == oracles.coordinate_difference(a, b)


# -- element_mul / matmul / kron ---------------------------------------------------

def test_element_mul_basics():
    a = from_triples(["r"], ["c"], [2])
    assert element_mul(a, empty()).is_empty()
    assert element_mul(a, from_triples(["r"], ["c"], [3])).get("r", "c") == 6
    with pytest.raises(TypeError):
        element_mul(from_triples(["r"], ["c"], ["s"]), a)


def test_element_mul_matches_hadamard():
    rng = random.Random(8)
    for _ in range(50):
        a, b = oracles.random_array(rng), oracles.random_array(rng)
        assert oracles.as_dict(a * b) == oracles.dense_hadamard(a, b)


def test_matmul_identity():
    rng = random.Random(2)
    a = oracles.random_array(rng)
    assert matmul(a, identity(a.col_keys)) == a


def test_matmul_matches_dense():
    rng = random.Random(9)
    for _ in range(50):
        a = oracles.random_array(rng, col_pool="k")
        b = oracles.random_array(rng, row_pool="k")
        assert oracles.as_dict(a @ b) == oracles.dense_matmul(a, b)


def test_matmul_disjoint_inner_keys():
    a = from_triples(["r"], ["x"], [1])
    b = from_triples(["y"], ["c"], [1])
    assert matmul(a, b).is_empty()


def test_min_plus_path_matches_enumeration():
    # path a - b - c with weights 2 and 3, both directions
    w = {("a", "b"): 2, ("b", "a"): 2, ("b", "c"): 3, ("c", "b"): 3}
    A = from_triples([k[0] for k in w], [k[1] for k in w], list(w.values()))
    got = oracles.as_dict(matmul(A, A, MIN_PLUS))
    assert got == oracles.shortest_two_step(w)
    assert got[("a", "c")] == 5


def test_degree_via_matmul_equals_sum():
    rng = random.Random(4)
    E = val2col(oracles.random_string_array(rng), "|")
    ones = from_triples(E.row_keys, "1", 1)
    via_matmul = transpose(matmul(transpose(E), ones))
    via_sum = assoc.sum(E, 1)
    assert via_matmul == via_sum
    assert Counter(dict(oracles.column_counts(E))) == Counter({c: v for (_, c), v in via_sum.items()})


def test_kron_identity_like():
    a = from_triples(["r1", "r2"], ["c1", "c2"], [3, 4])
    k = kron(a, from_triples(["x"], ["y"], [1]))
    assert oracles.as_dict(k) == {("r1:x", "c1:y"): 3, ("r2:x", "c2:y"): 4}


def test_kron_matches_numpy():
    a = from_triples(["a", "a", "b"], ["p", "q", "q"], [1, 2, 3])
    b = from_triples(["x", "y", "y"], ["u", "u", "v"], [4, 5, 6])
    assert oracles.as_dict(kron(a, b)) == oracles.dense_kron(a, b)
    assert kron(a, b).nnz == a.nnz * b.nnz


def test_kron_empty_and_separator_clash():
    assert kron(empty(), from_triples(["a"], ["c"], [1])).is_empty()
    a = from_triples(["a:b"], ["c"], [1])
    with pytest.raises(ValueError, match="ambiguous"):
        kron(a, a)


# -- transpose / select ------------------------------------------------------------

def test_transpose(sample_header):
    a = header_array(sample_header)
    assert transpose(transpose(a)) == a
    assert transpose(a).shape == (9, 1)
    rng = random.Random(1)
    b = oracles.random_array(rng)
    assert oracles.as_dict(b.T) == {(c, r): v for (r, c), v in b.items()}


def test_select_specs(sample_header):
    a = header_array(sample_header)
    assert select(a, None, None) == a
    assert select(a, ":", ":") == a
    ip = select(a, None, Prefix("ip."))
    assert ip.col_keys == sorted(f for f, _ in sample_header if f.startswith("ip."))
    assert len(ip.col_keys) == 4
    assert select(a, None, "ip.*,") == ip
    assert select(a, None, ["frame.time"]).col_keys == ["frame.time"]
    assert select(a, None, "frame.time,tcp.flags,").col_keys == ["frame.time", "tcp.flags"]
    assert select(a, None, KeyRange("ip.len", "ip.src")).col_keys == ["ip.len", "ip.proto", "ip.src"]
    assert select(a, ["nope"], None).is_empty()
    assert a["PacketID", "ip.len"] == "1500"
    assert a[:, "ip.len,"].nnz == 1


# -- relabeling ----------------------------------------------------------------

def test_put_row_and_col():
    a = from_triples(["r1", "r2"], ["c", "c"], [1, 2])
    assert put_row(a, a.row_keys) == a
    b = put_row(a, ["z", "y"])
    assert oracles.as_dict(b) == {("z", "c"): 1, ("y", "c"): 2}
    assert b.row_keys == ["y", "z"]
    with pytest.raises(ValueError):
        put_row(a, ["x", "x"])
    with pytest.raises(ValueError):
        put_row(a, ["x"])
    assert put_col(a, ["degree"]).col_keys == ["degree"]


def test_cat_str():
    assert cat_str(["p0001"], ".", ["f03.A.mat"]) == ["p0001.f03.A.mat"]
    assert cat_str([], ".", []) == []
    assert cat_str(["a", "b"], ".", "x") == ["a.x", "b.x"]
    assert cat_str(["a", "b"], "-", ["x", "y"]) == ["a-x", "b-y"]
    with pytest.raises(ValueError):
        cat_str(["a", "b", "c"], ".", ["x", "y"])


# -- exploded schema -------------------------------------------------------------

def test_val2col_sample_header(sample_header):
    E = val2col(header_array(sample_header), "|")
    assert E == exploded_header(sample_header)
    assert E.get("PacketID", "ip.dst|63.237.205.194") == 1
    assert col2val(E, "|") == header_array(sample_header)


def test_val2col_errors_and_empty():
    assert val2col(empty(), "|").is_empty()
    with pytest.raises(ValueError):
        val2col(from_triples(["r"], ["a|b"], ["v"]), "|")
    with pytest.raises(TypeError):
        val2col(from_triples(["r"], ["c"], [1]), "|")
    with pytest.raises(ValueError):
        col2val(from_triples(["r", "r"], ["f|1", "f|2"], [1, 1]), "|")


def test_val2col_random_round_trip():
    rng = random.Random(6)
    for _ in range(30):
        a = oracles.random_string_array(rng)
        e = val2col(a, "|")
        assert e.nnz == a.nnz
        assert e.row_keys == a.row_keys
        assert oracles.as_dict(e) == {(r, f"{c}|{v}"): 1 for (r, c), v in a.items()}
        assert col2val(e, "|") == a


# -- reductions -------------------------------------------------------------------

def test_sum_counts_columns(sample_header):
    rows = ["p1", "p2", "p3"]
    A = from_triples(rows, "ip.src", ["1.1.1.1", "1.1.1.1", "2.2.2.2"])
    E = val2col(A, "|")
    s = assoc.sum(E, 1)
    assert s.row_keys == ["1"]
    assert s.get("1", "ip.src|1.1.1.1") == 2
    assert s.get("1", "ip.src|2.2.2.2") == 1
    assert assoc.sum(empty(), 2).is_empty()
    with pytest.raises(TypeError):
        assoc.sum(A, 1)


def test_sum_random_zero_one():
    rng = random.Random(12)
    for _ in range(30):
        a = oracles.random_array(rng, lo=1, hi=1)
        assert dict(assoc.sum(a, 1).items()) == {("1", c): n for c, n in oracles.column_counts(a).items()}
        assert dict(assoc.sum(a, 2).items()) == {(r, "1"): n for r, n in oracles.row_counts(a).items()}


def test_to_text_matches_display_shape(sample_header):
    text = exploded_header(sample_header).to_text()
    assert text.splitlines()[0] == "(PacketID,frame.time_relative|0.000000000)     1"
