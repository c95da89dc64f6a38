"""Executable metatheory: soundness checks along real traces, and fuzzing.

Progress and preservation are checked on every state of a stack-machine
run. The environment for a state is read off the stack (each value at its
precise type), and the store typing grows by the declared type at each Ref
step.
"""
from __future__ import annotations

import enum
import json
import random
from dataclasses import asdict, dataclass, field

from . import typecheck as tc
from .derivations import TypeEnv, validate_derivation
from .eval import (
    BudgetExceeded, MachineState, RunResult, Stepped, Stuck, is_answer,
    reify_stack, run, sigma_along, step_stack,
)
from .syntax import (
    All, And, AndDef, App, Asgn, Deref, FieldDecl, FieldDef, FieldSel, Lam,
    Let, Loc, Obj, Rec, RefNew, RefT, Sel, Top, TypeDecl, TypeDef, Var,
    alpha_eq, free_vars, is_value, size,
)


class Outcome(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    UNKNOWN = "unknown"


def _outcome(decision) -> Outcome:
    return {tc.Verdict.YES: Outcome.PASS, tc.Verdict.NO: Outcome.FAIL,
            tc.Verdict.UNKNOWN: Outcome.UNKNOWN}[decision.verdict]


@dataclass
class Certificates:
    """Tally of derivations re-checked by the independent validator."""
    checked: int = 0
    rejected: int = 0

    def add(self, *derivations):
        for d in derivations:
            if d is None:
                continue
            self.checked += 1
            if not validate_derivation(d):
                self.rejected += 1


@dataclass
class StepVerdict:
    index: int
    rule: str
    preservation: Outcome
    store: Outcome
    stack: Outcome
    scoping: Outcome
    sigma: dict
    detail: str = ""

    def verdicts(self):
        return {"preservation": self.preservation, "store": self.store,
                "stack": self.stack, "scoping": self.scoping}


@dataclass
class TraceReport:
    steps: list = field(default_factory=list)
    sigma_monotone: bool = True

    @property
    def counts(self):
        c = {o: 0 for o in Outcome}
        for s in self.steps:
            for v in s.verdicts().values():
                c[v] += 1
        if not self.sigma_monotone:
            c[Outcome.FAIL] += 1
        return c

    @property
    def ok(self):
        return self.counts[Outcome.FAIL] == 0

    def failures(self):
        return [(s.index, k, s.detail) for s in self.steps
                for k, v in s.verdicts().items() if v is Outcome.FAIL]

    @property
    def final_sigma(self):
        return self.steps[-1].sigma if self.steps else {}


def _env_from_stack(stack, sigma, fuel):
    """Γ for a state plus the precise-typing derivations it was built from."""
    env, evidence = TypeEnv(), []
    for x, v in stack:
        try:
            dec = tc.precise_type_value(env, sigma, v, fuel)
        except tc.UnknownLocation as e:
            dec = tc.Decision(tc.Verdict.NO, error=e)
        if not dec:
            return None, dec, evidence
        env = env.extend(x, dec.type)
        evidence.append(dec.derivation)
    return env, None, evidence


def _unsub(d):
    while d is not None and d.rule == "Sub":
        d = d.premises[0]
    return d


def _pushed_type(d, depth):
    """The type a Let-Value step's value had in the previous derivation.

    A lambda's precise type is not unique (its body may be typed by
    subsumption), so Γ takes the type the derivation actually used.
    """
    d = _unsub(d)
    for _ in range(depth + 1):
        if d is None or d.rule != "Let":
            return None
        d = _unsub(d.premises[0])
    if d is None or d.rule not in ("All-I", "{}-I", "Loc"):
        return None
    return d.type


def _extend_env(env, stack, sigma, fuel, prev_derivation, depth):
    """Γ for a state whose stack grew by one binding, or (None, reason)."""
    x, v = stack.bindings[-1]
    T = _pushed_type(prev_derivation, depth)
    if T is not None:
        return env.extend(x, T), None
    try:
        dec = tc.precise_type_value(env, sigma, v, fuel)
    except tc.UnknownLocation as e:
        dec = tc.Decision(tc.Verdict.NO, error=e)
    if not dec:
        return None, dec
    return env.extend(x, dec.type), None


def check_state(state: MachineState, sigma, T0, fuel=tc.DEFAULT_FUEL, certs=None,
                env=None):
    """Preservation, store typing, stack correspondence and scoping for one state.

    Returns the four outcomes, a detail string and the preservation decision.
    Γ defaults to the stack's most specific precise types.
    """
    detail = []
    if env is None:
        env, bad, _ = _env_from_stack(state.stack, sigma, fuel)
        if env is None:
            verdict = _outcome(bad)
            return verdict, verdict, verdict, Outcome.PASS, f"stack: {bad.reason}", bad
    stack_dec = tc.stack_corresponds(env, sigma, state.stack, fuel)
    stack_v = _outcome(stack_dec)
    if stack_v is not Outcome.PASS:
        detail.append(f"stack: {stack_dec.reason}")
    elif certs is not None:
        certs.add(*stack_dec.evidence)

    dom = {x for x, _ in state.stack}
    scoping = Outcome.PASS if set(state.store.values()) <= dom else Outcome.FAIL
    if scoping is Outcome.FAIL:
        detail.append(f"store range escapes the stack: {sorted(set(state.store.values()) - dom)}")

    try:
        store_dec = tc.well_typed_store(env, sigma, state.store, fuel)
    except tc.DanglingLocation as e:
        store_dec = tc.Decision(tc.Verdict.NO, error=e)
    store_v = _outcome(store_dec)
    if store_v is not Outcome.PASS:
        detail.append(f"store: {store_dec.reason}")
    elif certs is not None:
        certs.add(*store_dec.evidence)

    pres = tc.check_term(env, sigma, state.term, T0, fuel)
    pres_v = _outcome(pres)
    if pres_v is not Outcome.PASS:
        detail.append(f"preservation: {pres.reason}")
    elif certs is not None:
        certs.add(pres.derivation)
    return pres_v, store_v, stack_v, scoping, "; ".join(detail), pres


def check_trace_preservation(trace: RunResult, T0, fuel=tc.DEFAULT_FUEL, certs=None,
                             sigmas=None) -> TraceReport:
    """Re-type every successor state of a stack-machine run against T0.

    `sigmas` overrides the store typings (one per step); by default they are
    accumulated from the declared types of Ref redexes. Γ is threaded along
    the run: a binding pushed by Let-Value gets the type its value had in the
    previous state's derivation.
    """
    report = TraceReport()
    sigmas = sigma_along(trace) if sigmas is None else sigmas
    prev = {}
    env, _, _ = _env_from_stack(trace.initial.stack, {}, fuel)
    prev_d = tc.check_term(env, {}, trace.initial.term, T0, fuel).derivation if env is not None else None
    prev_stack = trace.initial.stack
    for i, (st, sigma) in enumerate(zip(trace.steps, sigmas), 1):
        if any(prev[l] != sigma.get(l) for l in prev):
            report.sigma_monotone = False
        prev = sigma
        stack = st.state.stack
        if env is not None and len(stack) == len(prev_stack) + 1:
            env, bad = _extend_env(env, stack, sigma, fuel, prev_d, st.depth)
        elif len(stack) != len(prev_stack):
            env = None
        if env is None:
            env, bad, _ = _env_from_stack(stack, sigma, fuel)
        if env is None:
            v = _outcome(bad)
            report.steps.append(StepVerdict(i, st.rule, v, v, v, Outcome.PASS, dict(sigma),
                                            f"stack: {bad.reason}"))
            prev_d, prev_stack = None, stack
            continue
        *verdicts, detail, pres = check_state(st.state, sigma, T0, fuel, certs, env)
        report.steps.append(StepVerdict(i, st.rule, *verdicts, dict(sigma), detail))
        prev_d, prev_stack = pres.derivation, stack
    return report


def check_progress(state: MachineState, fuel=tc.DEFAULT_FUEL) -> Outcome:
    if is_answer(reify_stack(state)):
        return Outcome.PASS
    return Outcome.PASS if isinstance(step_stack(state), Stepped) else Outcome.FAIL


def _focus(term, depth):
    for _ in range(depth):
        term = term.bound
    return term


def check_canonical_forms(trace: RunResult, fuel=tc.DEFAULT_FUEL) -> Outcome:
    """At each elimination step the stack holds a value of the matching shape.

    Apply: a lambda whose parameter type the argument satisfies. Project: an
    object defining the field. Deref and Store: a location bound in both the
    store and the store typing (and for Store, the new content has its type).
    """
    states = [trace.initial] + [s.state for s in trace.steps]
    sigmas = [{}] + sigma_along(trace)
    result = Outcome.PASS
    for i, st in enumerate(trace.steps):
        if st.rule not in ("Apply", "Project", "Deref", "Store"):
            continue
        before, sigma = states[i], sigmas[i]
        redex = _focus(before.term, st.depth)
        x = redex.fun if isinstance(redex, App) else (
            redex.target if isinstance(redex, Asgn) else redex.var)
        v = before.stack.get(x)
        env, _, _ = _env_from_stack(before.stack, sigma, fuel)
        if env is None:
            return Outcome.FAIL
        match st.rule, v:
            case "Apply", Lam(_, S, _):
                d = tc.check_var(env, sigma, redex.arg, S, fuel)
                if d.verdict is tc.Verdict.NO:
                    return Outcome.FAIL
                if d.verdict is tc.Verdict.UNKNOWN:
                    result = Outcome.UNKNOWN
            case "Project", Obj():
                from .eval import _field
                if _field(v.defs, redex.label) is None:
                    return Outcome.FAIL
            case "Deref", Loc(l):
                if l not in before.store or l not in sigma:
                    return Outcome.FAIL
            case "Store", Loc(l):
                if l not in before.store or l not in sigma:
                    return Outcome.FAIL
                d = tc.check_var(env, sigma, redex.source, sigma[l], fuel)
                if d.verdict is tc.Verdict.NO:
                    return Outcome.FAIL
                if d.verdict is tc.Verdict.UNKNOWN:
                    result = Outcome.UNKNOWN
            case _:
                return Outcome.FAIL
    return result


# ----------------------------------------------------------------------
# Differential testing


def _canonical(result: RunResult, semantics):
    """Answer term and store with locations renumbered by allocation order."""
    order = {}
    for st in result.steps:
        if st.alloc is not None and st.alloc[0] not in order:
            order[st.alloc[0]] = len(order)
    term = result.answer if semantics == "stack" else result.final.term
    spine, n = [], term
    while isinstance(n, Let) and is_value(n.bound):
        spine.append(n)
        n = n.body
    pos = {}
    for i, s in enumerate(spine):
        pos.setdefault(s.var, i)

    def reloc(t):
        match t:
            case Loc(l):
                return Loc(order.get(l, l))
            case Let(x, v, u):
                return Let(x, reloc(v), reloc(u))
        return t

    store = {order.get(l, l): pos.get(x, x) for l, x in result.final.store.items()}
    return reloc(term), store


def differential_run(t, max_steps=10_000) -> Outcome:
    results = {}
    for sem in ("stack", "context"):
        try:
            results[sem] = run(t, sem, max_steps)
        except BudgetExceeded:
            results[sem] = None
    a, b = results["stack"], results["context"]
    if a is None or b is None:
        return Outcome.PASS if a is None and b is None else Outcome.FAIL
    if not (a.answered and b.answered):
        both_stuck = isinstance(a.outcome, Stuck) and isinstance(b.outcome, Stuck)
        return Outcome.PASS if both_stuck and a.outcome.reason == b.outcome.reason else Outcome.FAIL
    ta, sa = _canonical(a, "stack")
    tb, sb = _canonical(b, "context")
    return Outcome.PASS if alpha_eq(ta, tb) and sa == sb else Outcome.FAIL


# ----------------------------------------------------------------------
# Generation of well-typed terms


class GenerationExhausted(Exception):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_size: int = 40
    refs: bool = True
    objects: bool = True
    fuel: int = tc.DEFAULT_FUEL
    attempts: int = 200


class _Gen:
    def __init__(self, cfg: GenConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.search = tc.Search(None, cfg.fuel)
        self.counter = 0

    def name(self, stem):
        self.counter += 1
        return f"{stem}{self.counter}"

    def synth(self, env, t):
        try:
            return self.search.synth(env, t).type
        except (tc.TypeCheckError, tc.FuelExhausted, LookupError):
            return None

    def reach(self, env, x):
        try:
            return [T for T, _ in self.search.reach(env, x)]
        except LookupError:
            return []

    def vars_of(self, env, T):
        out = []
        for y, _ in env:
            self.search.exhausted = False
            if self.search.var(env, y, T) is not None:
                out.append(y)
        return out

    # -- types

    def type_pool(self, env):
        pool = [Top()]
        for x, T in env:
            pool.append(T)
            for R in self.reach(env, x):
                if isinstance(R, TypeDecl):
                    pool.append(Sel(x, R.label))
                elif isinstance(R, (FieldDecl, All, RefT)):
                    pool.append(R)
        if self.cfg.refs:
            pool += [RefT(T) for T in pool[:6] if not isinstance(T, RefT)]
        return pool

    def pick_type(self, env):
        if self.rng.random() < 0.25:
            return Top()
        pool = self.type_pool(env)
        # favour recent entries, which are more specific
        k = len(pool)
        i = min(k - 1, int(k * self.rng.random() ** 0.5))
        return pool[i]

    # -- terms

    def leaf(self, env):
        if env and self.rng.random() < 0.8:
            return Var(self.rng.choice(env.bindings[-3:])[0])
        if self.cfg.objects and self.rng.random() < 0.5:
            s = self.name("s")
            T = self.pick_type(env)
            return Obj(s, TypeDecl("A", T, T), TypeDef("A", T))
        z = self.name("z")
        return Lam(z, self.pick_type(env), Var(z))

    def expr(self, env, budget):
        """A bound expression and its type, or None."""
        opts = ["lam", "lam", "alias", "app", "app", "app", "sel"]
        if self.cfg.objects:
            opts += ["obj", "obj"]
        if self.cfg.refs:
            opts += ["ref", "ref", "deref", "asgn"]
        if budget >= 3:
            opts.append("let")
        for _ in range(6):
            kind = self.rng.choice(opts)
            t = getattr(self, "gen_" + kind)(env, budget)
            if t is None:
                continue
            T = self.synth(env, t)
            if T is not None:
                return t, T
        return None

    def gen_lam(self, env, budget):
        z = self.name("z")
        S = self.pick_type(env)
        body = self.chain(env.extend(z, S), max(1, budget - 1))
        return None if body is None else Lam(z, S, body)

    def gen_alias(self, env, budget):
        return Var(self.rng.choice(env.bindings)[0]) if env else None

    def gen_let(self, env, budget):
        return self.chain(env, budget - 1, tail_op=True)

    def _pick(self, env, want):
        """Variables and matching exposed types, in scope order."""
        out = []
        for x, _ in env:
            for R in self.reach(env, x):
                if want(R):
                    out.append((x, R))
        return out

    def gen_app(self, env, budget):
        cands = self._pick(env, lambda R: isinstance(R, All))
        self.rng.shuffle(cands)
        for x, R in cands[:4]:
            args = self.vars_of(env, R.param)
            if args:
                return App(x, self.rng.choice(args))
        return None

    def gen_sel(self, env, budget):
        cands = self._pick(env, lambda R: isinstance(R, FieldDecl))
        if not cands:
            return None
        x, R = self.rng.choice(cands)
        return FieldSel(x, R.label)

    def gen_ref(self, env, budget):
        if not env:
            return None
        x = self.rng.choice(env.bindings)[0]
        choices = [R for R in self.reach(env, x) if not isinstance(R, (And, Rec))]
        choices.append(Top())
        return RefNew(x, self.rng.choice(choices))

    def gen_deref(self, env, budget):
        cands = self._pick(env, lambda R: isinstance(R, RefT))
        return Deref(self.rng.choice(cands)[0]) if cands else None

    def gen_asgn(self, env, budget):
        cands = self._pick(env, lambda R: isinstance(R, RefT))
        self.rng.shuffle(cands)
        for x, R in cands[:4]:
            ys = self.vars_of(env, R.type)
            if ys:
                return Asgn(x, self.rng.choice(ys))
        return None

    def gen_obj(self, env, budget):
        s = self.name("s")
        labels = iter("abcdefgh")
        members = []  # (def, decl) pairs
        for _ in range(self.rng.randint(1, 3)):
            r = self.rng.random()
            if r < 0.3:
                T = self.pick_type(env)
                A = "ABCDEFGH"[len(members)]
                members.append((TypeDef(A, T), TypeDecl(A, T, T)))
                continue
            a = next(labels)
            body = self.chain(env, max(1, min(budget - 1, 6)))
            if body is None:
                continue
            U = self.synth(env, body)
            if U is None or free_vars(U) - env.domain():
                continue
            if r < 0.65:
                # path-dependent: the field is typed through a type member of self
                A = "ABCDEFGH"[len(members)]
                members.append((TypeDef(A, U), TypeDecl(A, U, U)))
                members.append((FieldDef(a, body), FieldDecl(a, Sel(s, A))))
            else:
                members.append((FieldDef(a, body), FieldDecl(a, U)))
        fields = [(d, D) for d, D in members if isinstance(d, FieldDef)]
        if fields and self.rng.random() < 0.4:
            # a field that reads another field through self
            d, D = self.rng.choice(fields)
            b = next(labels)
            members.append((FieldDef(b, FieldSel(s, d.label)), FieldDecl(b, D.type)))
        if not members:
            return None
        d, T = members[0]
        for d2, T2 in members[1:]:
            d, T = AndDef(d, d2), And(T, T2)
        return Obj(s, T, d)

    def chain(self, env, budget, tail_op=False):
        """A let-chain of size at most `budget` ending in a variable or operation."""
        if budget < 1:
            return None
        if budget == 1:
            t = self.leaf(env)
            return t if size(t) <= budget else None
        binds = []
        cur = env
        remaining = budget - 1
        n = self.rng.randint(1, max(1, min(6, remaining)))
        for _ in range(n):
            if remaining < 2:
                break
            share = max(1, self.rng.randint(1, max(1, remaining // 2)))
            got = self.expr(cur, share)
            if got is None:
                continue
            t, T = got
            c = size(t) + 1
            if c > remaining:
                continue
            x = self.name("x")
            binds.append((x, t))
            cur = cur.extend(x, T)
            remaining -= c
        tail = None
        if remaining >= 1 and (tail_op or self.rng.random() < 0.5):
            kinds = ["sel"] + (["deref", "asgn", "ref"] if self.cfg.refs else [])
            self.rng.shuffle(kinds)
            kinds.insert(0, "app")
            for k in kinds:
                tail = getattr(self, "gen_" + k)(cur, remaining)
                if tail is not None:
                    break
        if tail is None:
            if not binds:
                return self.leaf(env)
            tail = Var(binds[-1][0] if self.rng.random() < 0.7
                       else self.rng.choice(binds)[0])
        t = tail
        for x, s in reversed(binds):
            t = Let(x, s, t)
        if size(t) > budget:
            return None
        return t if self.synth(env, t) is not None else self._retreat(env, binds, tail)

    def _retreat(self, env, binds, tail):
        # on escape, fall back to a prefix ending in a variable with a closed type
        for k in range(len(binds), 0, -1):
            for x, _ in reversed(binds[:k]):
                t = Var(x)
                for y, s in reversed(binds[:k]):
                    t = Let(y, s, t)
                if self.synth(env, t) is not None:
                    return t
        return None

    def program(self):
        env = TypeEnv()
        lo = max(1, self.cfg.max_size // 2)
        budget = self.rng.randint(lo, self.cfg.max_size)
        return self.chain(env, budget)


def generate_typed_term(cfg: GenConfig):
    """A closed, location-free term of size <= cfg.max_size and its type."""
    if cfg.max_size < 1:
        raise GenerationExhausted("size budget is zero")
    gen = _Gen(cfg)
    for _ in range(cfg.attempts):
        t = gen.program()
        if t is None or size(t) > cfg.max_size:
            continue
        dec = tc.synthesize(TypeEnv(), None, t, cfg.fuel)
        if dec:
            return t, dec.type
    raise GenerationExhausted(f"no well-typed term within {cfg.attempts} attempts")


# ----------------------------------------------------------------------
# Shrinking


def _shrinks(t):
    """Smaller variants of t: drop unused lets, hoist bodies, simplify types."""
    match t:
        case Let(x, s, u):
            if x not in free_vars(u):
                yield u
            for s2 in _shrinks(s):
                yield Let(x, s2, u)
            for u2 in _shrinks(u):
                yield Let(x, s, u2)
        case Lam(x, S, body):
            if not isinstance(S, Top):
                yield Lam(x, Top(), body)
            for b2 in _shrinks(body):
                yield Lam(x, S, b2)
        case RefNew(x, T) if not isinstance(T, Top):
            yield RefNew(x, Top())


def shrink(t, still_fails, limit=200):
    """Greedy shrinking: keep any smaller variant on which the failure persists."""
    for _ in range(limit):
        for c in _shrinks(t):
            if still_fails(c):
                t = c
                break
        else:
            return t
    return t


# ----------------------------------------------------------------------
# Fuzzing driver


@dataclass
class FuzzRecord:
    index: int
    seed: int
    size: int
    type: str
    steps: int
    outcome: str
    progress: str
    preservation: dict
    canonical: str
    differential: str | None = None
    failure: str = ""
    term: str = ""


@dataclass
class FuzzReport:
    records: list = field(default_factory=list)
    checks: int = 0
    unknown: int = 0
    failures: int = 0
    exhausted: int = 0
    certificates: Certificates = field(default_factory=Certificates)

    @property
    def ok(self):
        return self.failures == 0

    @property
    def unknown_rate(self):
        return self.unknown / self.checks if self.checks else 0.0

    def summary(self):
        return {"programs": len(self.records), "checks": self.checks,
                "failures": self.failures, "unknown": self.unknown,
                "unknown_rate": round(self.unknown_rate, 6),
                "generation_exhausted": self.exhausted,
                "certificates_checked": self.certificates.checked,
                "certificates_rejected": self.certificates.rejected}

    def jsonl(self):
        lines = [json.dumps(asdict(r), sort_keys=True) for r in self.records]
        lines.append(json.dumps({"summary": self.summary()}, sort_keys=True))
        return "\n".join(lines) + "\n"


def check_program(t, T0, max_steps=500, fuel=tc.DEFAULT_FUEL, certs=None,
                  differential=False):
    """Run t on the stack machine and check every state. Returns a dict of verdicts."""
    res = run(t, "stack", max_steps, raise_on_budget=False)
    report = check_trace_preservation(res, T0, fuel, certs)
    if res.outcome is None:
        progress = check_progress(res.final, fuel)
    else:
        progress = Outcome.FAIL if isinstance(res.outcome, Stuck) else Outcome.PASS
    canonical = check_canonical_forms(res, fuel)
    out = {"result": res, "report": report, "progress": progress,
           "canonical": canonical}
    if differential:
        out["differential"] = differential_run(t, max_steps)
    return out


def fuzz(cfg: GenConfig, count: int, max_steps=500, differential=False,
         certify=True, do_shrink=True) -> FuzzReport:
    from .parser import pretty
    report = FuzzReport()
    certs = report.certificates if certify else None
    for i in range(count):
        seed = cfg.seed * 1_000_003 + i
        try:
            t, T0 = generate_typed_term(GenConfig(seed, cfg.max_size, cfg.refs,
                                                  cfg.objects, cfg.fuel, cfg.attempts))
        except GenerationExhausted:
            report.exhausted += 1
            continue
        if certs is not None:
            certs.add(tc.synthesize(TypeEnv(), None, t, cfg.fuel).derivation)
        out = check_program(t, T0, max_steps, cfg.fuel, certs, differential)
        tr = out["report"]
        counts = tr.counts
        verdicts = [out["progress"], out["canonical"]]
        if differential:
            verdicts.append(out["differential"])
        n_fail = counts[Outcome.FAIL] + sum(v is Outcome.FAIL for v in verdicts)
        n_unknown = counts[Outcome.UNKNOWN] + sum(v is Outcome.UNKNOWN for v in verdicts)
        report.checks += sum(counts.values()) + len(verdicts)
        report.unknown += n_unknown
        report.failures += n_fail
        failure = ""
        if n_fail:
            failure = "; ".join(f"step {i}: {k}: {d}" for i, k, d in tr.failures())
            if do_shrink:
                def still(c):
                    dec = tc.synthesize(TypeEnv(), None, c, cfg.fuel)
                    if not dec:
                        return False
                    o = check_program(c, dec.type, max_steps, cfg.fuel, None, differential)
                    vs = [o["progress"], o["canonical"], o.get("differential")]
                    return not o["report"].ok or Outcome.FAIL in vs
                t = shrink(t, still)
        res = out["result"]
        report.records.append(FuzzRecord(
            index=i, seed=seed, size=size(t), type=pretty(T0), steps=len(res.steps),
            outcome=("answer" if res.answered else
                     "stuck" if isinstance(res.outcome, Stuck) else "budget"),
            progress=out["progress"].value,
            preservation={k.value: v for k, v in counts.items()},
            canonical=out["canonical"].value,
            differential=out["differential"].value if differential else None,
            failure=failure,
            term=pretty(t, parseable=True) if n_fail else ""))
    return report
