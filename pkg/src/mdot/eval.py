"""Small-step evaluation: the evaluation-context machine and the stack machine.

Both machines share the mutable store, which maps locations (natural numbers)
to variables. Locations are allocated smallest-unused-first, so every run is
reproducible.
"""
from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field

from .syntax import (
    AndDef, App, Asgn, Deref, FieldDef, FieldSel, Lam, Let, Loc, Obj, RefNew,
    Var, all_names, free_vars, fresh_name, is_value, subst,
)


# ----------------------------------------------------------------------
# Runtime environments


@dataclass(frozen=True)
class Store(Mapping):
    """Locations to variables."""

    items_: tuple = ()
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "items_", tuple(sorted(dict(self.items_).items())))
        object.__setattr__(self, "_index", dict(self.items_))

    def __getitem__(self, l):
        return self._index[l]

    def __iter__(self):
        return iter(self._index)

    def __len__(self):
        return len(self._index)

    def __hash__(self):
        return hash(self.items_)

    def __eq__(self, other):
        if isinstance(other, Mapping):
            return dict(self._index) == dict(other)
        return NotImplemented

    def set(self, l, x):
        return Store(tuple({**self._index, l: x}.items()))


@dataclass(frozen=True)
class Stack:
    """Ordered variable-to-value bindings; only ever extended."""

    bindings: tuple = ()

    def __iter__(self):
        return iter(self.bindings)

    def __len__(self):
        return len(self.bindings)

    def __contains__(self, x):
        return any(y == x for y, _ in self.bindings)

    def lookup(self, x):
        for y, v in reversed(self.bindings):
            if y == x:
                return v
        raise KeyError(x)

    def get(self, x, default=None):
        try:
            return self.lookup(x)
        except KeyError:
            return default

    def extend(self, x, v):
        return Stack(self.bindings + ((x, v),))

    def domain(self):
        return {x for x, _ in self.bindings}

    def prefix_of(self, other):
        return other.bindings[:len(self.bindings)] == self.bindings


@dataclass(frozen=True)
class MachineState:
    term: object
    store: Store = Store()
    stack: Stack = Stack()


# ----------------------------------------------------------------------
# Outcomes


@dataclass(frozen=True)
class Stepped:
    rule: str
    state: MachineState
    depth: int = 0
    alloc: tuple | None = None  # (location, declared type) on Ref steps


@dataclass(frozen=True)
class AnswerReached:
    state: MachineState


@dataclass(frozen=True)
class Stuck:
    reason: str
    detail: str
    state: MachineState

    def __str__(self):
        return f"stuck ({self.reason}): {self.detail}"


STUCK_REASONS = (
    "expected-lambda", "expected-object-with-field", "expected-location",
    "unbound-location", "unbound-variable", "not-core",
)


class BudgetExceeded(Exception):
    def __init__(self, result):
        super().__init__(f"no answer after {len(result.steps)} steps")
        self.result = result


@dataclass(frozen=True)
class RunResult:
    initial: MachineState
    steps: tuple
    outcome: object  # AnswerReached | Stuck | None when the budget ran out

    @property
    def final(self):
        return self.steps[-1].state if self.steps else self.initial

    @property
    def answered(self):
        return isinstance(self.outcome, AnswerReached)

    @property
    def answer(self):
        return reify_stack(self.final)

    @property
    def rules(self):
        return [s.rule for s in self.steps]


def is_answer(t) -> bool:
    match t:
        case Var():
            return True
        case Let(_, v, n) if is_value(v):
            return is_answer(n)
    return is_value(t)


def fresh_location(store) -> int:
    l = 0
    while l in store:
        l += 1
    return l


def reify_stack(s: MachineState):
    t = s.term
    for x, v in reversed(s.stack.bindings):
        t = Let(x, v, t)
    return t


def _field(d, a):
    match d:
        case FieldDef(b, t) if a == b:
            return t
        case AndDef(l, r):
            found = _field(l, a)
            return found if found is not None else _field(r, a)
    return None


def _project(v, x, a):
    """Body of field a of object v, with the self variable renamed to x."""
    if not isinstance(v, Obj):
        return None
    t = _field(v.defs, a)
    return None if t is None else subst(t, v.self_var, x)


# ----------------------------------------------------------------------
# Stack machine


def step_stack(s: MachineState):
    stack, store, t = s.stack, s.store, s.term

    def stuck(reason, detail):
        return Stuck(reason, detail, s)

    def lookup(x):
        return stack.get(x)

    match t:
        case Var() | Obj() | Lam() | Loc():
            return AnswerReached(s)
        case FieldSel(x, a):
            v = lookup(x)
            if v is None:
                return stuck("unbound-variable", x)
            body = _project(v, x, a)
            if body is None:
                return stuck("expected-object-with-field", f"{x} has no field {a}")
            return Stepped("Project", MachineState(body, store, stack))
        case App(x, y):
            v = lookup(x)
            if v is None:
                return stuck("unbound-variable", x)
            if not isinstance(v, Lam):
                return stuck("expected-lambda", f"{x} is not a function")
            return Stepped("Apply", MachineState(subst(v.body, v.var, y), store, stack))
        case Let(x, Var(y), u):
            return Stepped("Let-Var", MachineState(subst(u, x, y), store, stack))
        case Let(x, v, u) if is_value(v):
            dom = stack.domain()
            if x in dom:
                x2 = fresh_name(x, dom | all_names(u))
                u = subst(u, x, x2)
                x = x2
            return Stepped("Let-Value", MachineState(u, store, stack.extend(x, v)))
        case Let(x, s1, u):
            inner = step_stack(MachineState(s1, store, stack))
            if not isinstance(inner, Stepped):
                return inner if isinstance(inner, Stuck) else stuck("not-core", "answer in let head")
            st = inner.state
            return Stepped(inner.rule, MachineState(Let(x, st.term, u), st.store, st.stack),
                           inner.depth + 1, inner.alloc)
        case RefNew(x, T):
            if x not in stack:
                return stuck("unbound-variable", x)
            l = fresh_location(store)
            return Stepped("Ref", MachineState(Loc(l), store.set(l, x), stack), alloc=(l, T))
        case Asgn(x, y):
            v = lookup(x)
            if not isinstance(v, Loc):
                return stuck("expected-location", f"{x} is not a location")
            if v.addr not in store:
                return stuck("unbound-location", f"location {v.addr}")
            return Stepped("Store", MachineState(Var(y), store.set(v.addr, y), stack))
        case Deref(x):
            v = lookup(x)
            if not isinstance(v, Loc):
                return stuck("expected-location", f"{x} is not a location")
            if v.addr not in store:
                return stuck("unbound-location", f"location {v.addr}")
            return Stepped("Deref", MachineState(Var(store[v.addr]), store, stack))
    return stuck("not-core", type(t).__name__)


# ----------------------------------------------------------------------
# Evaluation-context machine


def decompose(t):
    """Split t into its value spine and the remaining term.

    Spine binders are made pairwise distinct (later duplicates are renamed),
    so every variable in the focus refers to exactly one spine binding.
    """
    spine, seen = [], set()
    while isinstance(t, Let) and is_value(t.bound):
        x, u = t.var, t.body
        if x in seen:
            x2 = fresh_name(x, seen | all_names(u))
            u, x = subst(u, x, x2), x2
        seen.add(x)
        spine.append((x, t.bound))
        t = u
    return spine, t


def recompose(spine, t):
    for x, v in reversed(spine):
        t = Let(x, v, t)
    return t


def _redex(focus, env, store):
    """Reduce a basic redex under the spine bindings in env."""
    match focus:
        case FieldSel(x, a):
            v = env.get(x)
            if v is None:
                return ("unbound-variable", x)
            body = _project(v, x, a)
            if body is None:
                return ("expected-object-with-field", f"{x} has no field {a}")
            return "Project", body, store, None
        case App(x, y):
            v = env.get(x)
            if v is None:
                return ("unbound-variable", x)
            if not isinstance(v, Lam):
                return ("expected-lambda", f"{x} is not a function")
            return "Apply", subst(v.body, v.var, y), store, None
        case RefNew(x, T):
            if x not in env:
                return ("unbound-variable", x)
            l = fresh_location(store)
            return "Ref", Loc(l), store.set(l, x), (l, T)
        case Asgn(x, _) | Deref(x):
            v = env.get(x)
            if not isinstance(v, Loc):
                return ("expected-location", f"{x} is not a location")
            if v.addr not in store:
                return ("unbound-location", f"location {v.addr}")
            if isinstance(focus, Asgn):
                return "Store", Var(focus.source), store.set(v.addr, focus.source), None
            return "Deref", Var(store[v.addr]), store, None
    return ("not-core", type(focus).__name__)


def step_context(s: MachineState):
    spine, focus = decompose(s.term)
    env = dict(spine)
    store = s.store

    def done(rule, term, store=store, alloc=None, depth=0):
        return Stepped(rule, MachineState(recompose(spine, term), store), depth, alloc)

    match focus:
        case Var() | Obj() | Lam() | Loc():
            return AnswerReached(s)
        case Let(x, Var(y), u):
            return done("Let-Var", subst(u, x, y))
        case Let(x, Let(y, s1, t1), u):
            if y in free_vars(u) or y == x:
                y2 = fresh_name(y, all_names(u) | all_names(t1) | {x} | set(env))
                t1, y = subst(t1, y, y2), y2
            return done("Let-Let", Let(y, s1, Let(x, t1, u)))
        case Let(x, s1, u):
            r = _redex(s1, env, store)
            if len(r) == 2:
                return Stuck(r[0], r[1], s)
            rule, t2, store2, alloc = r
            return done(rule, Let(x, t2, u), store2, alloc, 1)
    r = _redex(focus, env, store)
    if len(r) == 2:
        return Stuck(r[0], r[1], s)
    rule, t2, store2, alloc = r
    return done(rule, t2, store2, alloc)


# ----------------------------------------------------------------------
# Driver


def initial_state(t, semantics="stack"):
    return MachineState(t, Store(), Stack())


def run(t, semantics="stack", max_steps=10_000, raise_on_budget=True) -> RunResult:
    stepper = {"stack": step_stack, "context": step_context}[semantics]
    state = start = initial_state(t, semantics)
    steps = []
    for _ in range(max_steps + 1):
        out = stepper(state)
        if not isinstance(out, Stepped):
            return RunResult(start, tuple(steps), out)
        if len(steps) == max_steps:
            break
        steps.append(out)
        state = out.state
    result = RunResult(start, tuple(steps), None)
    if raise_on_budget:
        raise BudgetExceeded(result)
    return result


def sigma_along(result):
    """Store typings after each step: Σ grows by the declared type at Ref steps."""
    sigma, out = {}, []
    for st in result.steps:
        if st.alloc is not None:
            l, T = st.alloc
            sigma = {**sigma, l: T}
        out.append(sigma)
    return out


def trace_records(result):
    from .parser import pretty
    records = []
    for i, (st, sigma) in enumerate(zip(result.steps, sigma_along(result)), 1):
        s = st.state
        records.append({
            "step": i,
            "rule": st.rule,
            "term": pretty(s.term),
            "stack": [[x, pretty(v)] for x, v in s.stack],
            "store": {str(l): x for l, x in sorted(s.store.items())},
            "sigma": {str(l): pretty(T) for l, T in sorted(sigma.items())},
        })
    return records


def trace_jsonl(result) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in trace_records(result))
