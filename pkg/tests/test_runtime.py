import random

import pytest
from hypothesis import given, settings, strategies as st

from p4ifc.corpus import list_cases, lookup
from p4ifc.errors import ArgumentTypeMismatch, EvalError, MatchFailure, ParseError, UnknownAction, UnknownTable
from p4ifc.lattice import two_point
from p4ifc.runtime import (
    INT_MAX,
    INT_MIN,
    ActionCall,
    BitV,
    BoolV,
    ControlPlane,
    Entry,
    Exact,
    HeaderV,
    IntV,
    Lpm,
    RecordV,
    StackV,
    Store,
    StoreSpec,
    TableEntries,
    eval_binop,
    format_value,
    havoc_value,
    init_value,
    initial_values,
    load_entries,
    parse_path,
    parse_value,
    serialize_entries,
    table_match,
    value_has_type,
)
from p4ifc.syntax import parse_program, parse_type
from p4ifc.syntax.types import BitT, HeaderT, IntT, SType, StackT, TypeDefs

LAT = two_point()
DELTA = TypeDefs(LAT)


def ty(text: str) -> SType:
    return parse_type(text, LAT)


# -- canonical values --


def test_init_scalars():
    assert init_value(DELTA, ty("bit<8>")) == BitV(8, 0)
    assert init_value(DELTA, ty("bool")) == BoolV(False)
    assert init_value(DELTA, ty("int")) == IntV(0)


def test_init_header_is_valid_and_zeroed():
    h = SType(HeaderT((("a", SType(BitT(8), "low")), ("b", SType(IntT(), "high")))), "low")
    v = init_value(DELTA, h)
    assert v == HeaderV((("a", BitV(8, 0)), ("b", IntV(0))), True)
    assert v.valid


def test_init_stack():
    v = init_value(DELTA, ty("bit<4>[2]"))
    assert isinstance(v, StackV) and v.items == (BitV(4, 0), BitV(4, 0))


def test_init_resolves_typedefs():
    delta = DELTA.bind("T", ty("<bit<16>, high>"))
    assert init_value(delta, parse_type("T", LAT)) == BitV(16, 0)


@pytest.mark.parametrize("text", ["bit<8>", "bool", "int", "bit<3>[4]", "bit<1>[0]"])
def test_havoc_equals_init_and_is_typed(text):
    t = ty(text)
    assert havoc_value(DELTA, t) == init_value(DELTA, t)
    assert value_has_type(havoc_value(DELTA, t), t)


def test_bit_out_of_range_rejected():
    with pytest.raises(EvalError):
        BitV(4, 16)


# -- operators --


def test_bit_arithmetic_wraps():
    assert eval_binop("+", BitV(8, 250), BitV(8, 10)) == BitV(8, 4)
    assert eval_binop("-", BitV(8, 1), BitV(8, 2)) == BitV(8, 255)
    assert eval_binop("*", BitV(8, 16), BitV(8, 16)) == BitV(8, 0)


def test_int_arithmetic_wraps_at_64_bits():
    assert eval_binop("+", IntV(INT_MAX), IntV(1)) == IntV(INT_MIN)
    assert eval_binop("-", IntV(3), IntV(4)) == IntV(-1)


def test_comparisons_and_booleans():
    assert eval_binop("<", BitV(8, 1), BitV(8, 2)) == BoolV(True)
    assert eval_binop("==", IntV(5), IntV(6)) == BoolV(False)
    assert eval_binop("&&", BoolV(True), BoolV(False)) == BoolV(False)
    assert eval_binop("||", BoolV(True), BoolV(False)) == BoolV(True)


def test_shifts():
    assert eval_binop("<<", BitV(8, 0x81), BitV(8, 1)) == BitV(8, 0x02)
    assert eval_binop(">>", BitV(8, 0x81), IntV(7)) == BitV(8, 1)
    assert eval_binop("<<", BitV(8, 1), IntV(9)) == BitV(8, 0)
    assert eval_binop(">>", IntV(-8), IntV(1)) == IntV(-4)


def test_width_mismatch_is_an_error():
    with pytest.raises(EvalError):
        eval_binop("+", BitV(8, 1), BitV(16, 1))


@settings(max_examples=200, deadline=None)
@given(
    st.sampled_from(["+", "-", "*", "&", "|", "^", "<<", ">>"]),
    st.integers(1, 64),
    st.data(),
)
def test_bit_ops_are_closed(op, w, data):
    x = data.draw(st.integers(0, (1 << w) - 1))
    y = data.draw(st.integers(0, (1 << w) - 1))
    out = eval_binop(op, BitV(w, x), BitV(w, y))
    assert value_has_type(out, SType(BitT(w), "low"))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["+", "-", "*"]), st.integers(INT_MIN, INT_MAX), st.integers(INT_MIN, INT_MAX))
def test_int_ops_are_closed(op, x, y):
    assert value_has_type(eval_binop(op, IntV(x), IntV(y)), SType(IntT(), "low"))


# -- value text --


@pytest.mark.parametrize(
    "text, t, v",
    [
        ("7:8", "bit<8>", BitV(8, 7)),
        ("0x10", "bit<8>", BitV(8, 16)),
        ("10.0.0.1", "bit<32>", BitV(32, 0x0A000001)),
        ("-3", "int", IntV(-3)),
        ("true", "bool", BoolV(True)),
        ("[1:4, 2:4]", "bit<4>[2]", StackV(ty("bit<4>"), (BitV(4, 1), BitV(4, 2)))),
    ],
)
def test_parse_value(text, t, v):
    assert parse_value(text, ty(t)) == v


@pytest.mark.parametrize("text, t", [("256", "bit<8>"), ("7:16", "bit<8>"), ("yes", "bool"), ("[1:4]", "bit<4>[2]"), ("1.2.3", "bit<32>")])
def test_parse_value_errors(text, t):
    with pytest.raises(ParseError):
        parse_value(text, ty(t))


def test_record_literal_missing_fields_default():
    t = SType(HeaderT((("a", SType(BitT(8), "low")), ("b", SType(BitT(8), "low")))), "low")
    assert parse_value("{b = 3}", t) == HeaderV((("a", BitV(8, 0)), ("b", BitV(8, 3))), True)
    with pytest.raises(ParseError):
        parse_value("{c = 3}", t)


def test_format_round_trip():
    t = ty("bit<4>[3]")
    v = StackV(t.base.elem, (BitV(4, 1), BitV(4, 0), BitV(4, 15)))
    assert parse_value(format_value(v), t) == v


def test_paths():
    assert parse_path("hdr.ipv4.ttl") == ("hdr", ("ipv4", "ttl"))
    assert parse_path("s[2].f") == ("s", (2, "f"))
    with pytest.raises(ParseError):
        parse_path("hdr..ttl")


def test_store_spec_and_initial_values():
    spec = StoreSpec.parse("# comment\nx = 5:8\ns[1] = 2:4\n")
    vals = initial_values([("x", ty("bit<8>")), ("s", ty("bit<4>[2]")), ("b", ty("bool"))], spec)
    assert vals["x"] == BitV(8, 5)
    assert vals["s"].items == (BitV(4, 0), BitV(4, 2))
    assert vals["b"] == BoolV(False)
    with pytest.raises(ParseError):
        initial_values([("x", ty("bit<8>"))], StoreSpec.parse("y = 1\n"))
    with pytest.raises(ParseError):
        StoreSpec.parse("x 5\n")


def test_store_spec_from_values_round_trip():
    inputs = [("r", SType(HeaderT((("a", ty("bit<8>")), ("b", ty("bool")))), "low")), ("n", ty("int"))]
    vals = {"r": RecordV((("a", BitV(8, 9)), ("b", BoolV(True)))), "n": IntV(-2)}
    vals["r"] = HeaderV(vals["r"].fields, True)
    spec = StoreSpec.from_values(list(vals.items()))
    assert initial_values(inputs, StoreSpec.parse(spec.to_text())) == vals


def test_store_dangling():
    s = Store()
    loc = s.alloc(BitV(8, 1), ty("bit<8>"))
    assert s.read(loc) == BitV(8, 1)
    with pytest.raises(EvalError):
        s.read(loc + 1)
    with pytest.raises(EvalError):
        s.write(loc + 1, BitV(8, 0))


# -- control plane --


def test_load_cache_entries():
    case = lookup("cache", "fixed")
    cp = case.control_plane(case.program(), case.check())
    te = cp.get("fetch_from_cache")
    assert te.entries == (Entry((Exact(BitV(8, 7)),), ActionCall("cache_hit", (BitV(32, 99),))),)
    assert te.default == ActionCall("cache_miss")


def test_load_entries_errors():
    case = lookup("cache", "fixed")
    p, v = case.program(), case.check()
    with pytest.raises(UnknownAction):
        load_entries("fetch_from_cache: 7:8 -> nope()", p, v)
    with pytest.raises(UnknownTable):
        load_entries("missing: 7:8 -> cache_miss()", p, v)
    with pytest.raises(ArgumentTypeMismatch):
        load_entries("fetch_from_cache: 7:8 -> cache_hit()", p, v)
    with pytest.raises(ArgumentTypeMismatch):
        load_entries("fetch_from_cache: 7:8 -> cache_hit(true)", p, v)
    with pytest.raises(ParseError):
        load_entries("fetch_from_cache 7:8 cache_hit(1)", p, v)
    with pytest.raises(ParseError):
        load_entries("fetch_from_cache: 7:8/4 -> cache_miss()", p, v)


def test_lpm_pattern_parsed():
    case = lookup("topology", "fixed")
    cp = case.control_plane(case.program(), case.check())
    first = cp.get("ipv4_lpm_forward").entries[0]
    assert first.patterns == (Lpm(0x0A000000, 8, 32),)


def _lpm_cp():
    return ControlPlane(
        {
            "t": TableEntries(
                (
                    Entry((Lpm(0x0A000000, 8, 32),), ActionCall("short")),
                    Entry((Lpm(0x0A010000, 16, 32),), ActionCall("long")),
                ),
                None,
            )
        }
    )


def test_exact_match():
    cp = ControlPlane({"t": TableEntries((Entry((Exact(BitV(8, 7)),), ActionCall("hit")),), ActionCall("miss"))})
    assert table_match(cp, "t", [BitV(8, 7)]) == ActionCall("hit")
    assert table_match(cp, "t", [BitV(8, 8)]) == ActionCall("miss")


def test_longest_prefix_wins():
    cp = _lpm_cp()
    assert table_match(cp, "t", [BitV(32, 0x0A010203)]).action == "long"
    assert table_match(cp, "t", [BitV(32, 0x0A020203)]).action == "short"


def test_no_match_without_default_fails():
    with pytest.raises(MatchFailure):
        table_match(_lpm_cp(), "t", [BitV(32, 0x0B000000)])
    with pytest.raises(MatchFailure):
        table_match(ControlPlane(), "absent", [])


def test_zero_length_prefix_matches_everything():
    cp = ControlPlane({"t": TableEntries((Entry((Lpm(0, 0, 8),), ActionCall("any")),))})
    assert all(table_match(cp, "t", [BitV(8, x)]).action == "any" for x in range(256))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 255), unique=True, min_size=1, max_size=10), st.integers(0, 10_000), st.integers(0, 255))
def test_disjoint_exact_entries_commute(keys, seed, probe):
    entries = [Entry((Exact(BitV(8, k)),), ActionCall(f"a{k}")) for k in keys]
    shuffled = list(entries)
    random.Random(seed).shuffle(shuffled)
    cps = [ControlPlane({"t": TableEntries(tuple(es), ActionCall("miss"))}) for es in (entries, shuffled)]
    assert table_match(cps[0], "t", [BitV(8, probe)]) == table_match(cps[1], "t", [BitV(8, probe)])


@pytest.mark.parametrize("case", [c for c in list_cases() if c.entries], ids=lambda c: c.id)
def test_entries_serialize_round_trip(case):
    p, v = case.program(), case.check()
    cp = case.control_plane(p, v)
    assert load_entries(serialize_entries(cp), p, v) == cp


def test_value_has_type_rejects_wrong_shapes():
    assert not value_has_type(BitV(8, 1), ty("bit<16>"))
    assert not value_has_type(IntV(INT_MAX + 1), ty("int"))
    assert not value_has_type(StackV(ty("bit<4>"), (BitV(4, 0),)), SType(StackT(ty("bit<4>"), 2), "low"))


def test_program_with_lpm_on_non_32_bit_key_round_trips():
    src = """
    control C(inout bit<16> k) {
        action a() { }
        table t { key = { k: lpm; } actions = { a; } }
        apply { t.apply(); }
    }
    """
    p = parse_program(src, LAT)
    cp = load_entries("t: 0xab00/8 -> a()\n", p)
    assert cp.get("t").entries[0].patterns == (Lpm(0xAB00, 8, 16),)
    assert load_entries(serialize_entries(cp), p) == cp
