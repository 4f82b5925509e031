import pytest
from hypothesis import given, settings, strategies as st

from p4ifc.corpus import list_cases, lookup
from p4ifc.errors import EvalError
from p4ifc.interpreter import (
    Interpreter,
    LIndex,
    LVar,
    PropertyMonitor,
    copy_in_out,
    eval_declaration,
    eval_expression,
    eval_lvalue,
    eval_statement,
    run_program,
    write_lvalue,
)
from p4ifc.lattice import two_point
from p4ifc.runtime import (
    CONT,
    EXIT,
    BitV,
    BoolV,
    ControlPlane,
    FunClosure,
    IntV,
    Ret,
    StackV,
    Store,
    StoreSpec,
    UnitV,
    dump_state,
    load_entries,
)
from p4ifc.syntax import ast as A
from p4ifc.syntax import parse_expression, parse_program, parse_type
from p4ifc.syntax.types import Direction, TypeDefs

LAT = two_point()
DELTA = TypeDefs(LAT)
CP = ControlPlane()


def ty(text):
    return parse_type(text, LAT)


def expr(text):
    return parse_expression(text, LAT)


def items(src: str):
    p = parse_program(f"control C() {{ apply {{ {src} }} }}", LAT)
    return p.control.apply.items


def stmt(src: str):
    (s,) = items(src)
    return s


def state(**vars):
    """A store and environment holding the given (type text, value) pairs."""
    store, env = Store(), {}
    for name, (t, v) in vars.items():
        env[name] = store.alloc(v, ty(t))
    return store, env


def run(src: str, entries: str = "", spec: str = "", monitor=None):
    p = parse_program(src, LAT)
    cp = load_entries(entries, p) if entries else None
    return run_program(p, cp, StoreSpec.parse(spec) if spec else None, monitor)


def read(out, name):
    return out.store.read(out.env[name])


# -- expressions --


def test_int_addition():
    store, env = state()
    assert eval_expression(CP, DELTA, store, env, expr("3 + 4"))[1] == IntV(7)


def test_out_of_bounds_read_is_init():
    store, env = state(s=("bit<8>[4]", StackV(ty("bit<8>"), tuple(BitV(8, i + 1) for i in range(4)))))
    assert eval_expression(CP, DELTA, store, env, expr("s[5]"))[1] == BitV(8, 0)
    assert eval_expression(CP, DELTA, store, env, expr("s[2]"))[1] == BitV(8, 3)


def test_function_call_returns_value():
    out = run(
        """
        control C(inout int r) {
            function int inc(in int x) { return x + 1; }
            apply { r = inc(9); }
        }
        """
    )
    assert read(out, "r") == IntV(10)


def test_missing_return_yields_init():
    out = run(
        """
        control C(inout bit<8> r) {
            function bit<8> f() { bit<8> z = 5:8; }
            apply { r = 9:8; r = f(); }
        }
        """
    )
    assert read(out, "r") == BitV(8, 0)


def test_record_literal_and_member():
    store, env = state()
    assert eval_expression(CP, DELTA, store, env, expr("{a = 1:8, b = true}.b"))[1] == BoolV(True)


def test_unbound_variable():
    store, env = state()
    with pytest.raises(EvalError):
        eval_expression(CP, DELTA, store, env, expr("nope"))


# -- l-values --


def test_lvalue_index_evaluates_subexpressions():
    out = run(
        """
        control C(inout bit<8>[3] a, inout int calls) {
            function int f() { calls = calls + 1; return 2; }
            apply { a[f()] = 7:8; }
        }
        """
    )
    assert read(out, "a").items == (BitV(8, 0), BitV(8, 0), BitV(8, 7))
    assert read(out, "calls") == IntV(1)


def test_eval_lvalue_shapes():
    store, env = state(h=("bit<8>[2]", StackV(ty("bit<8>"), (BitV(8, 0), BitV(8, 0)))), i=("int", IntV(1)))
    assert eval_lvalue(CP, DELTA, store, env, expr("h[i]"))[1] == LIndex(LVar("h"), 1)
    with pytest.raises(EvalError):
        eval_lvalue(CP, DELTA, store, env, expr("1 + 2"))


def test_write_changes_only_target_location():
    stack = StackV(ty("bit<8>"), (BitV(8, 1), BitV(8, 2)))
    store, env = state(s=("bit<8>[2]", stack), x=("bit<8>", BitV(8, 9)))
    before = dict(store.values)
    write_lvalue(CP, DELTA, store, env, LIndex(LVar("s"), 0), BitV(8, 5))
    assert store.read(env["s"]).items == (BitV(8, 5), BitV(8, 2))
    assert {loc for loc in store.values if store.values[loc] != before[loc]} == {env["s"]}


def test_out_of_bounds_write_is_noop():
    stack = StackV(ty("bit<8>"), (BitV(8, 1), BitV(8, 2)))
    store, env = state(s=("bit<8>[2]", stack))
    write_lvalue(CP, DELTA, store, env, LIndex(LVar("s"), 7), BitV(8, 5))
    assert store.read(env["s"]) == stack


def test_nested_field_write():
    out = run(
        """
        struct inner { bit<8> a; bit<8> b; }
        struct outer { inner i; bool c; }
        control C(inout outer o) { apply { o.i.b = 3:8; } }
        """
    )
    assert read(out, "o").get("i").get("b") == BitV(8, 3)
    assert read(out, "o").get("i").get("a") == BitV(8, 0)


# -- copy-in / copy-out --


def test_copy_in_out_directions():
    store, env = state(a=("bit<8>", BitV(8, 1)), b=("bit<8>", BitV(8, 2)), c=("bit<8>", BitV(8, 3)))
    bindings = [
        (Direction.IN, "x", ty("bit<8>"), A.Var("a")),
        (Direction.OUT, "y", ty("bit<8>"), A.Var("b")),
        (Direction.INOUT, "z", ty("bit<8>"), A.Var("c")),
    ]
    store, frag, writebacks = copy_in_out(CP, DELTA, store, env, bindings)
    assert [store.read(frag[n]) for n in "xyz"] == [BitV(8, 1), BitV(8, 0), BitV(8, 3)]
    assert set(frag.values()).isdisjoint(env.values())
    assert writebacks == [(LVar("b"), frag["y"]), (LVar("c"), frag["z"])]


def test_out_and_inout_write_back_but_in_does_not():
    out = run(
        """
        control C(inout bit<8> a, inout bit<8> b, inout bit<8> c) {
            action f(in bit<8> x, out bit<8> y, inout bit<8> z) { x = 10:8; y = x + 1:8; z = z + 1:8; }
            apply { a = 1:8; b = 2:8; c = 3:8; f(a, b, c); }
        }
        """
    )
    assert [read(out, n) for n in "abc"] == [BitV(8, 1), BitV(8, 11), BitV(8, 4)]


def test_aliased_arguments_write_back_left_to_right():
    out = run(
        """
        control C(inout bit<8> a) {
            action f(out bit<8> x, out bit<8> y) { x = 1:8; y = 2:8; }
            apply { f(a, a); }
        }
        """
    )
    assert read(out, "a") == BitV(8, 2)


def test_value_argument_binding():
    i = Interpreter()
    store, env = state()
    frag, wb = i.copy_in_out(DELTA, DELTA, store, env, [(Direction.IN, "v", ty("bit<32>"), BitV(32, 5))])
    assert store.read(frag["v"]) == BitV(32, 5) and wb == []


# -- statements and declarations --


def test_return_stops_block():
    store, env = state(l=("bit<8>", BitV(8, 0)))
    out = eval_statement(CP, DELTA, store, env, stmt("{ return 1; l = 2:8; }"))
    assert out.signal == Ret(IntV(1))
    assert store.read(env["l"]) == BitV(8, 0)


def test_bare_return_is_unit():
    store, env = state()
    assert eval_statement(CP, DELTA, store, env, stmt("return;")).signal == Ret(UnitV())


def test_exit_signal():
    store, env = state(l=("bit<8>", BitV(8, 0)))
    out = eval_statement(CP, DELTA, store, env, stmt("{ exit; l = 2:8; }"))
    assert out.signal == EXIT
    assert store.read(env["l"]) == BitV(8, 0)


def test_if_picks_branch():
    store, env = state(b=("bool", BoolV(False)), l=("bit<8>", BitV(8, 0)))
    eval_statement(CP, DELTA, store, env, stmt("if (b) { l = 1:8; } else { l = 2:8; }"))
    assert store.read(env["l"]) == BitV(8, 2)


def test_var_decl_allocates_fresh_location():
    store, env = state(x=("bit<8>", BitV(8, 4)))
    (d,) = items("bit<8> y = x + 1:8;")
    out = eval_declaration(CP, DELTA, store, env, d.decl)
    assert out.signal == CONT
    assert out.env["y"] not in env.values()
    assert store.read(out.env["y"]) == BitV(8, 5)


def test_block_does_not_leak_bindings():
    store, env = state()
    out = eval_statement(CP, DELTA, store, env, stmt("{ bit<8> y = 1:8; }"))
    assert out.env == env


def test_closure_sees_later_mutation():
    out = run(
        """
        control C(inout bit<8> r) {
            bit<8> g = 1:8;
            function bit<8> get() { return g; }
            apply { g = 42:8; r = get(); }
        }
        """
    )
    assert read(out, "r") == BitV(8, 42)


def test_function_decl_binds_closure():
    store, env = state()
    p = parse_program("control C() { function bit<8> f() { return 1:8; } apply { } }", LAT)
    out = eval_declaration(CP, DELTA, store, env, p.control.decls[0])
    assert isinstance(store.read(out.env["f"]), FunClosure)


def test_typedef_declaration_extends_delta():
    p = parse_program("control C() { typedef bit<8> T; T x; apply { } }", LAT)
    store, env = state()
    out = eval_declaration(CP, DELTA, store, env, p.control.decls[0])
    assert "T" in out.delta.types and out.env == env


# -- whole programs --


def test_topology_fixed_writes_entry_argument():
    case = lookup("topology", "fixed")
    p, v = case.program(), case.check()
    out = run_program(p, case.control_plane(p, v), case.store_spec())
    hdr = read(out, "hdr")
    assert out.signal == CONT
    assert hdr.get("local_hdr").get("phys_dstAddr") == BitV(32, 3232235521)
    assert hdr.get("local_hdr").get("phys_ttl") == BitV(8, 7)
    assert hdr.get("eth").get("dstAddr") == BitV(48, 0x00AABBCCDD01)


def test_cache_hit_and_miss():
    case = lookup("cache", "fixed")
    p, v = case.program(), case.check()
    cp = case.control_plane(p, v)
    hit = run_program(p, cp, StoreSpec.parse("hdr.req.query = 7:8"))
    assert read(hit, "hdr").get("resp").get("value") == BitV(32, 99)
    miss = run_program(p, cp, StoreSpec.parse("hdr.req.query = 8:8"))
    assert read(miss, "hdr").get("resp").get("hit") == BoolV(False)


def test_empty_apply():
    out = run("control C(inout bit<8> x) { apply { } }", spec="x = 3:8")
    assert out.signal == CONT and read(out, "x") == BitV(8, 3)


def test_exit_in_action_propagates():
    out = run(
        """
        control C(inout bit<8> x) {
            action stop() { x = 1:8; exit; }
            apply { stop(); x = 2:8; }
        }
        """
    )
    assert out.signal == EXIT and read(out, "x") == BitV(8, 1)


def test_table_miss_without_default_exits():
    src = """
    control C(inout bit<8> k, inout bit<8> x) {
        action a() { x = 1:8; }
        table t { key = { k: exact; } actions = { a; } }
        apply { t.apply(); x = 5:8; }
    }
    """
    missed = run(src, entries="t: 3:8 -> a()", spec="k = 4:8")
    assert missed.signal == EXIT and read(missed, "x") == BitV(8, 0)
    hit = run(src, entries="t: 3:8 -> a()", spec="k = 3:8")
    assert hit.signal == CONT and read(hit, "x") == BitV(8, 5)


def test_table_passes_declared_arguments():
    out = run(
        """
        control C(inout bit<8> x, inout bit<8> y) {
            action a(inout bit<8> v; bit<8> c) { v = v + c; }
            table t { key = { } actions = { a(y); } }
            apply { y = 10:8; t.apply(); }
        }
        """,
        entries="default t -> a(5:8)",
    )
    assert read(out, "y") == BitV(8, 15) and read(out, "x") == BitV(8, 0)


def test_depth_limit():
    p = parse_program("control C(inout int x) { apply { x = 1 + (1 + (1 + (1 + 1))); } }", LAT)
    with pytest.raises(EvalError):
        Interpreter(max_depth=4).run(p)
    assert read(Interpreter(max_depth=50).run(p), "x") == IntV(5)


@pytest.mark.parametrize("case", [c for c in list_cases() if c.accepted], ids=lambda c: c.id)
def test_corpus_runs_cleanly(case):
    p, v = case.program(), case.check()
    m = PropertyMonitor()
    out = run_program(p, case.control_plane(p, v), case.store_spec(), m)
    assert m.violations == []
    assert m.steps > 0
    again = run_program(p, case.control_plane(p, v), case.store_spec())
    assert dump_state(out.store, out.env, out.signal) == dump_state(again.store, again.env, again.signal)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 255), st.integers(0, 255))
def test_bit_program_matches_python(x, y):
    out = run(
        "control C(inout bit<8> a, inout bit<8> b, inout bit<8> r) { apply { r = (a + b) ^ (a * 3:8); } }",
        spec=f"a = {x}:8\nb = {y}:8",
    )
    assert read(out, "r") == BitV(8, ((x + y) & 0xFF) ^ ((x * 3) & 0xFF))
