"""Algorithmic typing and subtyping that emits declarative derivations.

The declarative rules are not syntax-directed (Trans, Sub, Rec-I/E, &-I),
so they are run as a goal-directed search:

* each subtyping or variable-typing goal is memoized per query, keyed on
  (environment, goal);
* a goal that is already being solved further up the search is cut (a
  minimal derivation never repeats its own goal on a path);
* fuel bounds the nesting depth of non-syntax-directed goals. Running out
  yields Unknown, never No.

Every derivation returned inside a Yes can be re-checked with
`derivations.validate_derivation`.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

from .derivations import (
    Derivation, Judgment, StoreTyping, TypeEnv, as_env, as_sigma,
)
from .syntax import (
    All, And, AndDef, App, Asgn, Bot, Deref, FieldDecl, FieldDef, FieldSel,
    Lam, Let, Loc, Obj, Rec, RefNew, RefT, Sel, Top, TypeDecl, TypeDef, Var,
    all_names, alpha_eq, def_labels, free_vars, fresh_name, subst,
)

DEFAULT_FUEL = 256

#: Marker returned by `expose` for a variable whose type collapses to Bot.
BOTTOM = Bot()


class Verdict(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True, eq=False)
class Decision:
    verdict: Verdict
    derivation: Derivation | None = None
    error: Exception | None = None
    evidence: tuple = ()

    def __bool__(self):
        return self.verdict is Verdict.YES

    @property
    def type(self):
        return self.derivation.type if self.derivation is not None else None

    @property
    def reason(self):
        return str(self.error) if self.error is not None else ""


def _yes(d=None, evidence=()):
    return Decision(Verdict.YES, d, evidence=evidence)


class TypeCheckError(Exception):
    def __init__(self, node, reason):
        from .parser import pretty
        try:
            shown = pretty(node)
        except TypeError:
            shown = repr(node)
        super().__init__(f"{reason} (in {shown})")
        self.node = node
        self.reason = reason


class EscapeError(TypeCheckError):
    pass


class DuplicateLabel(TypeCheckError):
    pass


class UnboundVariable(LookupError):
    pass


class UnknownLocation(LookupError):
    pass


class DanglingLocation(LookupError):
    pass


class DomainMismatch(ValueError):
    pass


class FuelExhausted(Exception):
    pass


_NO = object()


class Search:
    """One query's worth of search state: memo tables and fuel accounting."""

    def __init__(self, sigma=None, fuel=DEFAULT_FUEL):
        self.sigma = as_sigma(sigma)
        self.fuel = fuel
        self.memo = {}
        self.active = set()
        self.reach_memo = {}
        self.reach_active = set()
        self.exhausted = False
        self.truncated = False
        self._cut = False

    # -- derivation helpers

    def tj(self, env, subject, T):
        return Judgment(env, self.sigma, subject, T)

    def sj(self, env, S, U):
        return Judgment(env, self.sigma, S, U, True)

    def trans(self, env, d1, d2):
        S, U = d1.conclusion.subject, d2.conclusion.type
        return Derivation("Trans", self.sj(env, S, U), (d1, d2))

    def subsume(self, env, dt, ds):
        return Derivation("Sub", self.tj(env, dt.conclusion.subject, ds.conclusion.type),
                          (dt, ds))

    def bot_to(self, env, dbot, T):
        """From a derivation of x : Bot, derive x : T."""
        return self.subsume(env, dbot, Derivation("Bot", self.sj(env, Bot(), T)))

    # -- memoized goals

    def _goal(self, key, fuel, solve):
        hit = self.memo.get(key)
        if hit is not None:
            return None if hit is _NO else hit
        if fuel <= 0:
            self.exhausted = True
            self._cut = True
            return None
        if key in self.active:
            self._cut = True
            return None
        outer_cut, self._cut = self._cut, False
        self.active.add(key)
        try:
            d = solve(fuel - 1)
        finally:
            self.active.discard(key)
        if d is not None:
            self.memo[key] = d
        elif not self._cut:
            self.memo[key] = _NO
        self._cut = self._cut or outer_cut
        return d

    def sub(self, env, S, U, fuel=None, pivot=True):
        """A derivation of `env |- S <: U`, or None.

        With pivot=False no transitivity through unrelated selections is
        tried; pivot subgoals run that way, so pivots never nest.
        """
        fuel = self.fuel if fuel is None else fuel
        return self._goal(("sub", pivot, env, S, U), fuel,
                          lambda f: self._sub(env, S, U, f, pivot))

    def var(self, env, x, T, fuel=None):
        """A derivation of `env |- x : T`, or None."""
        fuel = self.fuel if fuel is None else fuel
        return self._goal(("var", env, x, T), fuel,
                          lambda f: self._var(env, x, T, f))

    # -- exposure

    def reach(self, env, x):
        """Types derivable for x by unfolding, splitting and bound-climbing.

        Returns an ordered list of (type, derivation), starting with the
        declared type of x.
        """
        key = (env, x)
        hit = self.reach_memo.get(key)
        if hit is not None:
            return hit
        if x not in env:
            raise UnboundVariable(x)
        if key in self.reach_active:
            self._cut = True
            return []
        outer_cut, self._cut = self._cut, False
        self.reach_active.add(key)
        try:
            out = self._reach(env, x)
        finally:
            self.reach_active.discard(key)
        if not self._cut:
            self.reach_memo[key] = out
        self._cut = self._cut or outer_cut
        return out

    def _reach(self, env, x):
        T0 = env.lookup(x)
        queue = deque([(T0, Derivation("Var", self.tj(env, Var(x), T0)))])
        seen, out = set(), []
        while queue:
            T, d = queue.popleft()
            if T in seen:
                continue
            if len(out) >= self.fuel:
                self.exhausted = self._cut = True
                break
            seen.add(T)
            out.append((T, d))
            if isinstance(T, Rec):
                B = subst(T.body, T.var, x)
                queue.append((B, Derivation("Rec-E", self.tj(env, Var(x), B), (d,))))
            elif isinstance(T, And):
                for rule, part in (("And1-<:", T.left), ("And2-<:", T.right)):
                    ds = Derivation(rule, self.sj(env, T, part))
                    queue.append((part, self.subsume(env, d, ds)))
            elif isinstance(T, Sel):
                for lo, hi, dy in self.decls(env, T.var, T.label, Top(), Bot()):
                    ds = Derivation("Sel-<:", self.sj(env, T, hi), (dy,))
                    queue.append((hi, self.subsume(env, d, ds)))
        return out

    def decls(self, env, y, A, lo_hint, hi_hint):
        """Bounds (lo, hi, derivation of y : {A: lo..hi}) available for y.A."""
        out = []
        for T, d in self.reach(env, y):
            if isinstance(T, TypeDecl) and T.label == A:
                out.append((T.lower, T.upper, d))
            elif isinstance(T, Bot):
                decl = TypeDecl(A, lo_hint, hi_hint)
                out.append((lo_hint, hi_hint, self.bot_to(env, d, decl)))
        return out

    def bottom(self, env, x):
        for T, d in self.reach(env, x):
            if isinstance(T, Bot):
                return d
        return None

    # -- subtyping

    def _sub(self, env, S, U, fuel, pivot):
        sj = self.sj(env, S, U)
        if alpha_eq(S, U):
            return Derivation("Refl", sj)
        if isinstance(U, Top):
            return Derivation("Top", sj)
        if isinstance(S, Bot):
            return Derivation("Bot", sj)
        if isinstance(U, And):
            d1 = self.sub(env, S, U.left, fuel, pivot)
            if d1 is None:
                return None
            d2 = self.sub(env, S, U.right, fuel, pivot)
            if d2 is None:
                return None
            return Derivation("<:-And", sj, (d1, d2))

        d = self._structural(env, S, U, fuel, pivot)
        if d is not None:
            return d

        if isinstance(S, And):
            for rule, part in (("And1-<:", S.left), ("And2-<:", S.right)):
                elim = Derivation(rule, self.sj(env, S, part))
                if alpha_eq(part, U):
                    return elim
                d = self.sub(env, part, U, fuel, pivot)
                if d is not None:
                    return self.trans(env, elim, d)

        if isinstance(U, Sel):
            for lo, hi, dx in self.decls(env, U.var, U.label, S, Top()):
                intro = Derivation("<:-Sel", self.sj(env, lo, U), (dx,))
                if alpha_eq(lo, S):
                    return intro
                d = self.sub(env, S, lo, fuel, pivot)
                if d is not None:
                    return self.trans(env, d, intro)

        if isinstance(S, Sel):
            for lo, hi, dx in self.decls(env, S.var, S.label, Bot(), U):
                elim = Derivation("Sel-<:", self.sj(env, S, hi), (dx,))
                if alpha_eq(hi, U):
                    return elim
                d = self.sub(env, hi, U, fuel, pivot)
                if d is not None:
                    return self.trans(env, elim, d)

        return self._pivot(env, S, U, fuel) if pivot else None

    def _structural(self, env, S, U, fuel, pivot):
        sj = self.sj(env, S, U)
        match S, U:
            case FieldDecl(a, T1), FieldDecl(b, T2) if a == b:
                d = self.sub(env, T1, T2, fuel, pivot)
                return d and Derivation("Fld-<:-Fld", sj, (d,))
            case TypeDecl(A, S1, T1), TypeDecl(B, S2, T2) if A == B:
                d1 = self.sub(env, S2, S1, fuel, pivot)
                d2 = d1 and self.sub(env, T1, T2, fuel, pivot)
                return d2 and Derivation("Typ-<:-Typ", sj, (d1, d2))
            case All(x1, S1, T1), All(x2, S2, T2):
                d1 = self.sub(env, S2, S1, fuel, pivot)
                if d1 is None:
                    return None
                avoid = env.domain() | all_names(S) | all_names(U)
                ok = x1 not in env and (x1 == x2 or x1 not in free_vars(T2))
                x = x1 if ok else fresh_name(x1, avoid)
                inner = env.extend(x, S2)
                d2 = self.sub(inner, subst(T1, x1, x), subst(T2, x2, x), fuel, pivot)
                return d2 and Derivation("All-<:-All", sj, (d1, d2))
            case RefT(T1), RefT(T2):
                d1 = self.sub(env, T1, T2, fuel, pivot)
                d2 = d1 and self.sub(env, T2, T1, fuel, pivot)
                return d2 and Derivation("Ref-Sub", sj, (d1, d2))
        return None

    def _pivot(self, env, S, U, fuel):
        # S <: y.A <: U through any variable whose member A has usable bounds
        for y, _ in reversed(env.bindings):
            for T, dy in self.reach(env, y):
                if isinstance(T, Bot):
                    sel = Sel(y, "A")
                    decl = TypeDecl("A", S, U)
                    dx = self.bot_to(env, dy, decl)
                    return self.trans(
                        env,
                        Derivation("<:-Sel", self.sj(env, S, sel), (dx,)),
                        Derivation("Sel-<:", self.sj(env, sel, U), (dx,)))
                if not isinstance(T, TypeDecl):
                    continue
                if (isinstance(S, Sel) and S.var == y and S.label == T.label) or \
                        (isinstance(U, Sel) and U.var == y and U.label == T.label):
                    continue
                lo, hi, sel = T.lower, T.upper, Sel(y, T.label)
                d_lo = Derivation("Refl", self.sj(env, S, lo)) if alpha_eq(S, lo) \
                    else self.sub(env, S, lo, fuel, False)
                if d_lo is None:
                    continue
                d_hi = Derivation("Refl", self.sj(env, hi, U)) if alpha_eq(hi, U) \
                    else self.sub(env, hi, U, fuel, False)
                if d_hi is None:
                    continue
                up = Derivation("<:-Sel", self.sj(env, lo, sel), (dy,))
                down = Derivation("Sel-<:", self.sj(env, sel, hi), (dy,))
                left = up if d_lo.rule == "Refl" else self.trans(env, d_lo, up)
                right = down if d_hi.rule == "Refl" else self.trans(env, down, d_hi)
                return self.trans(env, left, right)
        return None

    # -- variable typing

    def _var(self, env, x, T, fuel):
        reach = self.reach(env, x)
        for R, d in reach:
            if alpha_eq(R, T):
                return d
        if isinstance(T, And):
            d1 = self.var(env, x, T.left, fuel)
            d2 = d1 and self.var(env, x, T.right, fuel)
            return d2 and Derivation("&-I", self.tj(env, Var(x), T), (d1, d2))
        if isinstance(T, Rec):
            d = self.var(env, x, subst(T.body, T.var, x), fuel)
            if d is not None:
                return Derivation("Rec-I", self.tj(env, Var(x), T), (d,))
        for R, d in reach:
            if isinstance(R, Bot):
                return self.bot_to(env, d, T)
        for R, d in reach:
            ds = self.sub(env, R, T, fuel)
            if ds is not None:
                return self.subsume(env, d, ds)
        if isinstance(T, Sel):
            # x : lo may need Rec-I or &-I before climbing into y.A
            for lo, _, dy in self.decls(env, T.var, T.label, Top(), Top()):
                dx = self.var(env, x, lo, fuel)
                if dx is not None:
                    return self.subsume(env, dx, Derivation("<:-Sel", self.sj(env, lo, T), (dy,)))
        return None

    # -- terms

    def require_var(self, env, x, T, node):
        if x not in env:
            raise TypeCheckError(node, f"unbound variable {x}")
        self.exhausted = False
        d = self.var(env, x, T)
        if d is None:
            if self.exhausted:
                raise FuelExhausted(f"fuel exhausted checking {x}")
            from .parser import pretty
            raise TypeCheckError(node, f"{x} does not have type {pretty(T)}")
        return d

    def require_sub(self, env, S, U, node):
        self.exhausted = False
        d = self.sub(env, S, U)
        if d is None:
            if self.exhausted:
                raise FuelExhausted("fuel exhausted in subtyping")
            from .parser import pretty
            raise TypeCheckError(node, f"{pretty(S)} is not a subtype of {pretty(U)}")
        return d

    def open(self, env, x, bodies, avoid=()):
        """Pick a binder name not bound in env; rename inside `bodies`."""
        if x not in env and x not in avoid:
            return x, bodies
        taken = env.domain() | set(avoid)
        for b in bodies:
            taken |= all_names(b)
        y = fresh_name(x, taken)
        return y, tuple(subst(b, x, y) for b in bodies)

    def _members(self, env, x, node):
        if x not in env:
            raise TypeCheckError(node, f"unbound variable {x}")
        self.exhausted = False
        out = self.reach(env, x)
        self.truncated = self.exhausted
        return out

    def _missing(self, node, reason):
        """No exposed member fits: a type error, unless exposure was cut short."""
        if self.truncated:
            return FuelExhausted(f"fuel exhausted exposing members ({reason})")
        return TypeCheckError(node, reason)

    def synth(self, env, t):
        """Most specific type derivation for t; raises TypeCheckError."""
        tj = self.tj
        match t:
            case Var(x):
                if x not in env:
                    raise TypeCheckError(t, f"unbound variable {x}")
                return Derivation("Var", tj(env, t, env.lookup(x)))
            case Loc(l):
                if l not in self.sigma:
                    raise UnknownLocation(l)
                return Derivation("Loc", tj(env, t, RefT(self.sigma.lookup(l))))
            case Lam(x, S, body):
                x2, (body2,) = self.open(env, x, (body,))
                db = self.synth(env.extend(x2, S), body2)
                return Derivation("All-I", tj(env, t, All(x2, S, db.type)), (db,))
            case Obj(x, T, d):
                x2, (T2, d2) = self.open(env, x, (T, d))
                dd = self.defs(env.extend(x2, T2), d2, T2)
                return Derivation("{}-I", tj(env, t, Rec(x2, T2)), (dd,))
            case FieldSel(x, a):
                for R, dR in self._members(env, x, t):
                    if isinstance(R, FieldDecl) and R.label == a:
                        return Derivation("{}-E", tj(env, t, R.type), (dR,))
                    if isinstance(R, Bot):
                        dx = self.bot_to(env, dR, FieldDecl(a, Bot()))
                        return Derivation("{}-E", tj(env, t, Bot()), (dx,))
                raise self._missing(t, f"{x} has no field {a}")
            case App(x, y):
                exhausted = False
                for R, dR in self._members(env, x, t):
                    if isinstance(R, Bot):
                        R, dR = All("z", Top(), Bot()), self.bot_to(env, dR, All("z", Top(), Bot()))
                    if not isinstance(R, All):
                        continue
                    try:
                        dy = self.require_var(env, y, R.param, t)
                    except FuelExhausted:
                        exhausted = True
                        continue
                    except TypeCheckError:
                        continue
                    res = subst(R.body, R.var, y)
                    return Derivation("All-E", tj(env, t, res), (dR, dy))
                if exhausted:
                    raise FuelExhausted(f"fuel exhausted applying {x}")
                raise self._missing(t, f"{x} is not a function accepting {y}")
            case Let(x, s, u):
                x2, (u2,) = self.open(env, x, (u,))
                ds, du = self._let(env, s, x2, u2, lambda e: self.synth(e, u2))
                if x2 in free_vars(du.type):
                    du = self._avoid_let(env.extend(x2, ds.type), x2, du, t)
                return Derivation("Let", tj(env, t, du.type), (ds, du))
            case RefNew(x, T):
                dx = self.require_var(env, x, T, t)
                return Derivation("Ref-I", tj(env, t, RefT(T)), (dx,))
            case Deref(x):
                for R, dR in self._members(env, x, t):
                    if isinstance(R, RefT):
                        return Derivation("Ref-E", tj(env, t, R.type), (dR,))
                    if isinstance(R, Bot):
                        dx = self.bot_to(env, dR, RefT(Bot()))
                        return Derivation("Ref-E", tj(env, t, Bot()), (dx,))
                raise self._missing(t, f"{x} is not a reference")
            case Asgn(x, y):
                exhausted = False
                for R, dR in self._members(env, x, t):
                    if isinstance(R, Bot):
                        if y not in env:
                            raise TypeCheckError(t, f"unbound variable {y}")
                        Y = env.lookup(y)
                        dx = self.bot_to(env, dR, RefT(Y))
                        dy = Derivation("Var", tj(env, Var(y), Y))
                        return Derivation("Asgn", tj(env, t, Y), (dx, dy))
                    if not isinstance(R, RefT):
                        continue
                    try:
                        dy = self.require_var(env, y, R.type, t)
                    except FuelExhausted:
                        exhausted = True
                        continue
                    except TypeCheckError:
                        continue
                    return Derivation("Asgn", tj(env, t, R.type), (dR, dy))
                if exhausted:
                    raise FuelExhausted(f"fuel exhausted assigning to {x}")
                raise self._missing(t, f"cannot assign {y} to {x}")
        raise TypeCheckError(t, "not a core term (desugar first)")

    def _avoid_let(self, env, x, du, node):
        """Subsume du to a type that does not mention x, or raise EscapeError.

        Selections x.A are replaced by an upper bound in covariant positions
        and a lower bound in contravariant ones; under Ref both must agree.
        """
        for U in self._avoid(env, x, du.type, 1):
            try:
                return self.subsume(env, du, self.require_sub(env, du.type, U, node))
            except TypeCheckError:
                continue
        from .parser import pretty
        raise EscapeError(node, f"let-bound {x} escapes in body type {pretty(du.type)}")

    def _avoid(self, env, x, T, pol):
        """Candidate types without x that T is below (pol 1) or above (pol -1)."""
        if x not in free_vars(T):
            return [T]
        match T:
            case Sel(y, A) if y == x:
                out = []
                for lo, hi, _ in self.decls(env, x, A, Top(), Bot()):
                    if pol == 0:
                        if alpha_eq(lo, hi):
                            out.extend(self._avoid(env, x, hi, 0))
                    else:
                        out.extend(self._avoid(env, x, hi if pol > 0 else lo, pol))
                return _dedupe(out)[:4]
            case FieldDecl(a, U):
                return [FieldDecl(a, U2) for U2 in self._avoid(env, x, U, pol)]
            case TypeDecl(A, S, U):
                return [TypeDecl(A, S2, U2) for S2 in self._avoid(env, x, S, -pol)
                        for U2 in self._avoid(env, x, U, pol)]
            case And(S, U):
                return [And(S2, U2) for S2 in self._avoid(env, x, S, pol)
                        for U2 in self._avoid(env, x, U, pol)]
            case Rec(z, U) if z != x:
                return [Rec(z, U2) for U2 in self._avoid(env, x, U, pol)]
            case All(z, S, U) if z != x:
                return [All(z, S2, U2) for S2 in self._avoid(env, x, S, -pol)
                        for U2 in self._avoid(env, x, U, pol)]
            case RefT(U):
                return [RefT(U2) for U2 in self._avoid(env, x, U, 0)]
        return []

    def _let(self, env, s, x, u, body, expected=None):
        """Derivations for a let head s and its body u (bound as x).

        The head is first given its synthesized type. If the body then fails,
        other types for the head are tried: for a variable, each type its
        exposure reaches; for a lambda, the function types the body mentions
        or one returning the expected type (keeping the lambda's own
        parameter).
        """
        ds = self.synth(env, s)
        try:
            return ds, body(env.extend(x, ds.type))
        except TypeCheckError as e:
            first = e
        seen = {ds.type}
        for dc in self._let_alternatives(env, s, u, expected):
            if dc.type in seen:
                continue
            seen.add(dc.type)
            try:
                return dc, body(env.extend(x, dc.type))
            except TypeCheckError:
                continue
        raise first

    def _let_alternatives(self, env, s, u, expected):
        match s:
            case Var(y):
                for _, d in self._members(env, y, s):
                    yield d
            case Lam():
                wanted = _function_types(u)
                if expected is not None:
                    wanted.append(All(fresh_name(s.var, all_names(expected)), s.param, expected))
                for D in wanted:
                    if not free_vars(D) <= env.domain():
                        continue
                    z = fresh_name(s.var, env.domain() | all_names(D) | all_names(s))
                    try:
                        dc = self.check(env, s, All(z, s.param, subst(D.body, D.var, z)))
                    except TypeCheckError:
                        continue
                    if dc.rule == "All-I":
                        yield dc

    def check(self, env, t, T):
        """A derivation of t : T; the expected type is pushed into let bodies."""
        match t:
            case Var(x):
                return self.require_var(env, x, T, t)
            case Let(x, s, Var(y)) if x == y:
                # let x = s in x: check s itself, so the expected type reaches it
                x2, _ = self.open(env, x, (), avoid=free_vars(T) | free_vars(s))
                try:
                    ds = self.check(env, s, T)
                except TypeCheckError:
                    pass
                else:
                    du = Derivation("Var", self.tj(env.extend(x2, T), Var(x2), T))
                    return Derivation("Let", self.tj(env, t, T), (ds, du))
            case _ if isinstance(T, Sel) and T.var in env:
                # through a lower bound of the selection
                for lo, _, dy in self.decls(env, T.var, T.label, Top(), Top()):
                    try:
                        dl = self.check(env, t, lo)
                    except TypeCheckError:
                        continue
                    return self.subsume(env, dl, Derivation("<:-Sel", self.sj(env, lo, T), (dy,)))
        match t:
            case Let(x, s, u):
                x2, (u2,) = self.open(env, x, (u,), avoid=free_vars(T))
                ds, du = self._let(env, s, x2, u2, lambda e: self.check(e, u2, T), T)
                return Derivation("Let", self.tj(env, t, T), (ds, du))
            case Lam(x, S, body) if isinstance(T, All):
                # push the declared result type into the body
                x2, (body2,) = self.open(env, x, (body,), avoid=free_vars(T) | free_vars(S))
                Tb = subst(T.body, T.var, x2)
                try:
                    db = self.check(env.extend(x2, S), body2, Tb)
                except TypeCheckError:
                    pass
                else:
                    d = Derivation("All-I", self.tj(env, t, All(x2, S, Tb)), (db,))
                    if alpha_eq(d.type, T):
                        return d
                    return self.subsume(env, d, self.require_sub(env, d.type, T, t))
        d = self.synth(env, t)
        if alpha_eq(d.type, T):
            return d
        return self.subsume(env, d, self.require_sub(env, d.type, T, t))

    def precise(self, env, v, T):
        """A derivation of v : T rooted at All-I, {}-I or Loc."""
        from .parser import pretty
        if isinstance(v, Lam) and isinstance(T, All) and alpha_eq(v.param, T.param):
            x2, (body2,) = self.open(env, v.var, (v.body,), avoid=free_vars(T))
            Tb = subst(T.body, T.var, x2)
            db = self.check(env.extend(x2, v.param), body2, Tb)
            d = Derivation("All-I", self.tj(env, v, All(x2, v.param, Tb)), (db,))
        else:
            d = self.synth(env, v)
        if not alpha_eq(d.type, T):
            raise TypeCheckError(v, f"{pretty(d.type)} is not {pretty(T)}")
        return d

    def defs(self, env, d, T=None):
        """Type definitions; with T, they must produce exactly T."""
        labels = def_labels(d)
        dup = {l for l in labels if labels.count(l) > 1}
        if dup:
            raise DuplicateLabel(d, f"duplicate labels {sorted(dup)}")
        return self._defs(env, d, T)

    def _defs(self, env, d, T):
        tj = self.tj
        match d, T:
            case AndDef(l, r), None:
                dl, dr = self._defs(env, l, None), self._defs(env, r, None)
                return Derivation("AndDef-I", tj(env, d, And(dl.type, dr.type)), (dl, dr))
            case AndDef(l, r), And(L, R):
                dl, dr = self._defs(env, l, L), self._defs(env, r, R)
                return Derivation("AndDef-I", tj(env, d, T), (dl, dr))
            case FieldDef(a, s), None:
                ds = self.synth(env, s)
                return Derivation("Fld-I", tj(env, d, FieldDecl(a, ds.type)), (ds,))
            case FieldDef(a, s), FieldDecl(b, U) if a == b:
                ds = self.check(env, s, U)
                return Derivation("Fld-I", tj(env, d, T), (ds,))
            case TypeDef(A, S), None:
                return Derivation("Typ-I", tj(env, d, TypeDecl(A, S, S)))
            case TypeDef(A, S), TypeDecl(B, lo, hi) if A == B:
                if not (alpha_eq(S, lo) and alpha_eq(S, hi)):
                    from .parser import pretty
                    raise TypeCheckError(d, f"type member {A} must be declared {{{A}: "
                                            f"{pretty(S)}..{pretty(S)}}}")
                return Derivation("Typ-I", tj(env, d, T))
        from .parser import pretty
        raise TypeCheckError(d, f"definitions do not match declared type {pretty(T)} "
                                "(members must appear in the same order and grouping)")


# ----------------------------------------------------------------------
# Public queries


def _dedupe(types):
    out = []
    for T in types:
        if not any(alpha_eq(T, U) for U in out):
            out.append(T)
    return out


def _function_types(t):
    """Function types written in the annotations of t, outermost first."""
    out, todo = [], [t]
    while todo:
        n = todo.pop(0)
        if isinstance(n, All):
            out.append(n)
        if hasattr(n, "__dataclass_fields__"):
            todo.extend(getattr(n, f) for f in n.__dataclass_fields__)
    return out


def _run(fn, sigma, fuel):
    s = Search(sigma, fuel)
    try:
        return _yes(fn(s))
    except FuelExhausted as e:
        return Decision(Verdict.UNKNOWN, error=e)
    except TypeCheckError as e:
        return Decision(Verdict.NO, error=e)


def _goal_decision(s, d, what):
    if d is not None:
        return _yes(d)
    if s.exhausted:
        return Decision(Verdict.UNKNOWN, error=FuelExhausted(what))
    return Decision(Verdict.NO)


def subtype(env, sigma, S, U, fuel=DEFAULT_FUEL) -> Decision:
    s = Search(sigma, fuel)
    env = as_env(env)
    return _goal_decision(s, s.sub(env, S, U), "subtyping")


def check_var(env, sigma, x, T, fuel=DEFAULT_FUEL) -> Decision:
    s = Search(sigma, fuel)
    env = as_env(env)
    if x not in env:
        raise UnboundVariable(x)
    return _goal_decision(s, s.var(env, x, T), "variable typing")


def expose(env, sigma, x, fuel=DEFAULT_FUEL) -> set:
    """Declaration-shaped types derivable for x (BOTTOM if x collapses)."""
    s = Search(sigma, fuel)
    env = as_env(env)
    if x not in env:
        raise UnboundVariable(x)
    shapes = (Top, Bot, FieldDecl, TypeDecl, All, RefT)
    return {T for T, _ in s.reach(env, x) if isinstance(T, shapes)}


def expose_derivations(env, sigma, x, fuel=DEFAULT_FUEL):
    s = Search(sigma, fuel)
    return s.reach(as_env(env), x)


def synthesize(env, sigma, t, fuel=DEFAULT_FUEL) -> Decision:
    env = as_env(env)
    return _run(lambda s: s.synth(env, t), sigma, fuel)


def check_term(env, sigma, t, T, fuel=DEFAULT_FUEL) -> Decision:
    env = as_env(env)
    return _run(lambda s: s.check(env, t, T), sigma, fuel)


def typecheck_defs(env, sigma, d, fuel=DEFAULT_FUEL, expected=None) -> Decision:
    env = as_env(env)
    return _run(lambda s: s.defs(env, d, expected), sigma, fuel)


def precise_type_value(env, sigma, v, fuel=DEFAULT_FUEL, expected=None) -> Decision:
    """Type a value with a derivation rooted at {}-I, All-I or Loc.

    Without `expected` the most specific such type is returned. With it, the
    answer is Yes iff some derivation with such a root concludes `expected`;
    only lambdas have a choice, since their body may be typed by subsumption.
    """
    if not isinstance(v, (Obj, Lam, Loc)):
        raise TypeError(f"not a value: {v!r}")
    env, sigma = as_env(env), as_sigma(sigma)
    if isinstance(v, Loc) and v.addr not in sigma:
        raise UnknownLocation(v.addr)
    if expected is None:
        return synthesize(env, sigma, v, fuel)
    return _run(lambda s: s.precise(env, v, expected), sigma, fuel)


def well_typed_store(env, sigma, store, fuel=DEFAULT_FUEL) -> Decision:
    """Every cell l |-> x satisfies env; sigma |- x : sigma(l)."""
    env, sigma = as_env(env), as_sigma(sigma)
    for l in store:
        if l not in sigma:
            raise DanglingLocation(l)
    s = Search(sigma, fuel)
    evidence = []
    for l, x in sorted(dict(store).items()):
        if x not in env:
            return Decision(Verdict.NO, error=TypeCheckError(Var(x), f"store variable {x} unbound"))
        s.exhausted = False
        d = s.var(env, x, sigma.lookup(l))
        if d is None:
            if s.exhausted:
                return Decision(Verdict.UNKNOWN, error=FuelExhausted(f"location {l}"))
            from .parser import pretty
            return Decision(Verdict.NO, error=TypeCheckError(
                Var(x), f"location {l} holds {x}, which is not a {pretty(sigma.lookup(l))}"))
        evidence.append(d)
    return _yes(evidence=tuple(evidence))


def stack_corresponds(env, sigma, stack, fuel=DEFAULT_FUEL) -> Decision:
    """Each stack value's precise type is exactly its environment entry."""
    env = as_env(env)
    stack = tuple(stack)
    if [x for x, _ in stack] != [x for x, _ in env]:
        raise DomainMismatch("stack and environment bind different variables")
    evidence = []
    for i, ((x, v), (_, T)) in enumerate(zip(stack, env)):
        try:
            dec = precise_type_value(TypeEnv(env.bindings[:i]), sigma, v, fuel, expected=T)
        except UnknownLocation as e:
            dec = Decision(Verdict.NO, error=e)
        if not dec:
            return dec
        evidence.append(dec.derivation)
    return _yes(evidence=tuple(evidence))


def env_of_stack(stack, sigma, fuel=DEFAULT_FUEL) -> TypeEnv:
    """The environment that corresponds to a stack (precise types, in order)."""
    env = TypeEnv()
    for x, v in stack:
        dec = precise_type_value(env, sigma, v, fuel)
        if not dec:
            raise TypeCheckError(v, f"stack value for {x} has no precise type: {dec.reason}")
        env = env.extend(x, dec.type)
    return env


__all__ = [
    "BOTTOM", "DEFAULT_FUEL", "Decision", "DanglingLocation", "DomainMismatch",
    "DuplicateLabel", "EscapeError", "FuelExhausted", "Search", "StoreTyping",
    "TypeCheckError", "TypeEnv", "UnboundVariable", "UnknownLocation", "Verdict",
    "check_term", "check_var", "env_of_stack", "expose", "expose_derivations",
    "precise_type_value", "stack_corresponds", "subtype", "synthesize",
    "typecheck_defs", "well_typed_store",
]
