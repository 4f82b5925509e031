"""Dual-execution noninterference testing.

Pairs of input states that agree on everything an observer may see are run
side by side; any observable difference in the final states is a leak.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .errors import DomainMismatch, EvalError
from .interpreter import PropertyMonitor, run_program
from .lattice import Label, Lattice
from .runtime import (
    ActionCall,
    CLOSURES,
    BitV,
    BoolV,
    ControlPlane,
    Env,
    Exact,
    IntV,
    Lpm,
    Ret,
    Store,
    StoreSpec,
    Value,
    format_path,
    format_value,
    get_path,
    initial_values,
    leaf_paths,
    wrap_int,
)
from .syntax import ast as A
from .syntax.types import BitT, BoolT, FunctionT, HeaderT, IntT, RecordT, SType, StackT, TableT
from .typechecker import Verdict, check_program

DEFAULT_TRIALS = 200


def typed_leaves(t: SType, path: tuple = ()):
    """Yield (path, scalar leaf type) in field order."""
    match t.base:
        case RecordT(fields) | HeaderT(fields):
            for f, ft in fields:
                yield from typed_leaves(ft, path + (f,))
        case StackT(elem, size):
            for i in range(size):
                yield from typed_leaves(elem, path + (i,))
        case _:
            yield path, t


def observable(gamma: dict[str, SType]) -> list[tuple[str, SType]]:
    return [(x, t) for x, t in gamma.items() if not isinstance(t.base, (FunctionT, TableT))]


def _leaf_diffs(t: SType, v1: Value, v2: Value, lattice: Lattice, observer: Label, path: tuple = ()):
    """Value-level equivalence at observer, component-wise through aggregates."""
    match t.base:
        case RecordT(fields) | HeaderT(fields):
            for f, ft in fields:
                yield from _leaf_diffs(ft, v1.get(f), v2.get(f), lattice, observer, path + (f,))
        case StackT(elem, size):
            for i in range(size):
                yield from _leaf_diffs(elem, v1.items[i], v2.items[i], lattice, observer, path + (i,))
        case FunctionT() | TableT():
            # closures agree when they capture the same names
            if set(v1.env) != set(v2.env):
                yield path, v1, v2
        case _:
            if lattice.leq(t.label, observer) and v1 != v2:
                yield path, v1, v2


def low_differences(
    lattice: Lattice, observer: Label, left: tuple[Store, Env], right: tuple[Store, Env], gamma: dict[str, SType]
) -> list[tuple[str, Value, Value]]:
    """(path, left value, right value) for every observable disagreement."""
    (s1, e1), (s2, e2) = left, right
    out = []
    for name, t in gamma.items():
        if (name in e1) != (name in e2):
            raise DomainMismatch(f"{name!r} is bound in only one state")
        if name not in e1:
            continue
        for path, a, b in _leaf_diffs(t, s1.read(e1[name]), s2.read(e2[name]), lattice, observer):
            out.append((format_path(name, path), a, b))
    return out


def low_equivalent(lattice: Lattice, observer: Label, left, right, gamma) -> bool:
    return not low_differences(lattice, observer, left, right, gamma)


# -- input generation --


def _shape_key(t: SType):
    return type(t.base), getattr(t.base, "width", None)


def value_pool(inputs: list[tuple[str, SType]], cp: ControlPlane | None, base: StoreSpec | None) -> dict:
    """Scalar values worth trying, keyed by shape: entry keys, action args and base inputs."""
    pool: dict = {}

    def add(v: Value) -> None:
        for _, leaf in leaf_paths(v):
            match leaf:
                case BitV(w, x):
                    pool.setdefault((BitT, w), set()).add(x)
                case IntV(x):
                    pool.setdefault((IntT, None), set()).add(x)

    for tbl in (cp.tables.values() if cp else ()):
        calls: list[ActionCall] = [e.call for e in tbl.entries]
        if tbl.default is not None:
            calls.append(tbl.default)
        for e in tbl.entries:
            for p in e.patterns:
                match p:
                    case Exact(v):
                        add(v)
                    case Lpm(v, _, _):
                        add(v)
        for c in calls:
            for a in c.args:
                add(a)
    if base is not None:
        for v in initial_values(inputs, base).values():
            add(v)
    return {k: sorted(vs) for k, vs in pool.items()}


def _random_scalar(rng: random.Random, t: SType, pool: dict) -> Value:
    choices = pool.get(_shape_key(t))
    match t.base:
        case BoolT():
            return BoolV(rng.random() < 0.5)
        case BitT(w):
            if choices and rng.random() < 0.5:
                return BitV(w, rng.choice(choices))
            return BitV(w, rng.getrandbits(w))
        case IntT():
            if choices and rng.random() < 0.5:
                return IntV(rng.choice(choices))
            return IntV(rng.randrange(-(1 << 31), 1 << 31))
    raise EvalError(f"cannot generate a value of type {t}")


def _different(rng: random.Random, t: SType, v: Value, pool: dict) -> Value:
    if isinstance(t.base, BoolT):
        return BoolV(not v.value)
    for _ in range(64):
        w = _random_scalar(rng, t, pool)
        if w != v:
            return w
    return BitV(v.width, v.value ^ 1) if isinstance(v, BitV) else IntV(wrap_int(v.value + 1))


def generate_state_pair(
    inputs: list[tuple[str, SType]],
    lattice: Lattice,
    observer: Label,
    seed: int | str | random.Random = 0,
    pool: dict | None = None,
) -> tuple[StoreSpec, StoreSpec]:
    """Input states equal on leaves visible at observer, different on every other leaf."""
    rng = seed if isinstance(seed, random.Random) else random.Random(seed)
    pool = pool or {}
    left, right = [], []
    for name, t in inputs:
        for path, lt in typed_leaves(t):
            v1 = _random_scalar(rng, lt, pool)
            v2 = v1 if lattice.leq(lt.label, observer) else _different(rng, lt, v1, pool)
            p = format_path(name, path)
            left.append((p, format_value(v1)))
            right.append((p, format_value(v2)))
    return StoreSpec(tuple(left)), StoreSpec(tuple(right))


# -- reports --


@dataclass
class Counterexample:
    """One observed disagreement. kind is "variable", "signal" or "violation"."""

    observer: Label
    trial: int
    kind: str
    subject: str
    value_a: str
    value_b: str
    store_spec_a: str
    store_spec_b: str

    def to_dict(self) -> dict:
        return {
            "observer": self.observer,
            "trial": self.trial,
            self.kind: self.subject,
            "value_a": self.value_a,
            "value_b": self.value_b,
            "store_spec_a": self.store_spec_a,
            "store_spec_b": self.store_spec_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Counterexample":
        kind = next(k for k in ("variable", "signal", "violation") if k in d)
        return cls(
            d["observer"], d["trial"], kind, d[kind], d["value_a"], d["value_b"], d["store_spec_a"], d["store_spec_b"]
        )

    def key(self) -> tuple:
        return self.kind, self.subject, self.value_a, self.value_b


@dataclass
class NiReport:
    program: str
    observer: list[Label]
    trials: int
    seed: int
    failures: list[Counterexample] = field(default_factory=list)
    runs: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "program": self.program,
            "observer": list(self.observer),
            "trials": self.trials,
            "seed": self.seed,
            "failures": [c.to_dict() for c in self.failures],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary(self) -> str:
        lines = [f"{self.program}: {self.runs} runs, {len(self.failures)} failures"]
        for c in self.failures:
            lines.append(f"  observer {c.observer}, trial {c.trial}: {c.kind} {c.subject}: {c.value_a} vs {c.value_b}")
        return "\n".join(lines)


def _run(program: A.Program, cp: ControlPlane | None, spec: StoreSpec):
    mon = PropertyMonitor()
    try:
        out = run_program(program, cp, spec, mon)
    except EvalError as exc:
        return None, [f"evaluation error: {exc}"]
    return out, [f"monitor: {v}" for v in mon.violations]


def _snapshot(out) -> dict:
    return {x: format_value(out.store.read(loc)) for x, loc in out.env.items() if not _is_closure(out.store.read(loc))}


def _is_closure(v) -> bool:
    return isinstance(v, CLOSURES)


def check_pair(
    program: A.Program,
    gamma: dict[str, SType],
    cp: ControlPlane | None,
    observer: Label,
    spec_a: StoreSpec,
    spec_b: StoreSpec,
    trial: int = 0,
) -> list[Counterexample]:
    """Run both states and report every disagreement visible at observer."""
    found = []

    def cex(kind, subject, a, b):
        found.append(Counterexample(observer, trial, kind, subject, a, b, spec_a.to_text(), spec_b.to_text()))

    o1, r1 = _run(program, cp, spec_a)
    o2, r2 = _run(program, cp, spec_b)
    for r in r1:
        cex("violation", r, "", "")
    for r in r2:
        cex("violation", r, "", "")
    if o1 is None or o2 is None:
        return found
    if type(o1.signal) is not type(o2.signal) or (
        isinstance(o1.signal, Ret) and o1.signal.value != o2.signal.value
    ):
        cex("signal", "signal", str(o1.signal), str(o2.signal))
    for path, a, b in low_differences(program.lattice, observer, (o1.store, o1.env), (o2.store, o2.env), gamma):
        cex("variable", path, format_value(a), format_value(b))
    again, _ = _run(program, cp, spec_a)
    if again is not None and _snapshot(again) != _snapshot(o1):
        cex("violation", "evaluation is not deterministic", "", "")
    return found


def program_inputs(verdict: Verdict, program: A.Program) -> list[tuple[str, SType]]:
    return [(p.name, verdict.gamma[p.name]) for p in program.control.params if p.name in verdict.gamma]


def observed_gamma(verdict: Verdict) -> dict[str, SType]:
    """Top-level data variables; the outputs two runs are compared on."""
    return {x: t for x, t in verdict.gamma.items() if not isinstance(t.base, (FunctionT, TableT))}


def _low_inputs_agree(inputs, lattice: Lattice, observer: Label, a: StoreSpec, b: StoreSpec) -> bool:
    va, vb = initial_values(inputs, a), initial_values(inputs, b)
    for name, t in inputs:
        for path, lt in typed_leaves(t):
            if lattice.leq(lt.label, observer) and get_path(va[name], path) != get_path(vb[name], path):
                return False
    return True


def check_noninterference(
    program: A.Program,
    cp: ControlPlane | None = None,
    observer: Label | list[Label] | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    *,
    pc: Label | None = None,
    base: StoreSpec | None = None,
    name: str = "<program>",
    verdict: Verdict | None = None,
) -> NiReport:
    """Dual-execution trials for each observer (default: every lattice element)."""
    lattice = program.lattice
    verdict = verdict or check_program(program, lattice, pc)
    if observer is None:
        observers = list(lattice.elements)
    elif isinstance(observer, str):
        observers = [observer]
    else:
        observers = list(observer)
    for o in observers:
        lattice.require(o)
    inputs = program_inputs(verdict, program)
    gamma = observed_gamma(verdict)
    pool = value_pool(inputs, cp, base)
    report = NiReport(name, observers, trials, seed)
    for obs in observers:
        for trial in range(trials):
            a, b = generate_state_pair(inputs, lattice, obs, f"{seed}/{obs}/{trial}", pool)
            if not _low_inputs_agree(inputs, lattice, obs, a, b):
                raise AssertionError("generated pair is not low-equivalent")
            report.runs += 1
            report.failures.extend(check_pair(program, gamma, cp, obs, a, b, trial))
    return report


def replay(program: A.Program, cp: ControlPlane | None, cex: Counterexample, verdict: Verdict | None = None) -> list[Counterexample]:
    """Rerun a recorded pair; the result contains cex again when it reproduces."""
    verdict = verdict or check_program(program, program.lattice)
    return check_pair(
        program,
        observed_gamma(verdict),
        cp,
        cex.observer,
        StoreSpec.parse(cex.store_spec_a),
        StoreSpec.parse(cex.store_spec_b),
        cex.trial,
    )
