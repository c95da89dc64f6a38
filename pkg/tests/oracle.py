"""Independent oracles for the test suite.

Nothing here reuses the checker's search: alpha-equivalence is decided by
renaming binders to canonical indices, and declarative derivability is
decided by exhaustive search up to a derivation depth over a finite type
universe (every rule of the subtyping and variable-typing fragments, with
Trans and Sub middles drawn from the universe).
"""
from functools import lru_cache

from mdot.syntax import (
    All, And, AndDef, App, Asgn, Bot, Deref, FieldDecl, FieldDef, FieldSel,
    Lam, Let, Loc, Obj, Rec, RefNew, RefT, Sel, Top, TypeDecl, TypeDef, Var,
)


# ----------------------------------------------------------------------
# canonical-index renaming


def canonical(t, env=None, depth=0):
    """Rename every bound variable to `#k`, k its binding depth."""
    env = env or {}

    def v(x):
        return env.get(x, x)

    def under(x, *bodies):
        inner = {**env, x: f"#{depth}"}
        return f"#{depth}", [canonical(b, inner, depth + 1) for b in bodies]

    match t:
        case Top() | Bot() | Loc():
            return t
        case Var(x):
            return Var(v(x))
        case Sel(x, A):
            return Sel(v(x), A)
        case FieldDecl(a, T):
            return FieldDecl(a, canonical(T, env, depth))
        case TypeDecl(A, S, U):
            return TypeDecl(A, canonical(S, env, depth), canonical(U, env, depth))
        case And(S, U):
            return And(canonical(S, env, depth), canonical(U, env, depth))
        case RefT(T):
            return RefT(canonical(T, env, depth))
        case Rec(x, T):
            y, (T2,) = under(x, T)
            return Rec(y, T2)
        case All(x, S, T):
            y, (T2,) = under(x, T)
            return All(y, canonical(S, env, depth), T2)
        case Lam(x, S, body):
            y, (b2,) = under(x, body)
            return Lam(y, canonical(S, env, depth), b2)
        case Obj(x, T, d):
            y, (T2, d2) = under(x, T, d)
            return Obj(y, T2, d2)
        case Let(x, s, u):
            y, (u2,) = under(x, u)
            return Let(y, canonical(s, env, depth), u2)
        case FieldSel(x, a):
            return FieldSel(v(x), a)
        case App(x, y):
            return App(v(x), v(y))
        case RefNew(x, T):
            return RefNew(v(x), canonical(T, env, depth))
        case Deref(x):
            return Deref(v(x))
        case Asgn(x, y):
            return Asgn(v(x), v(y))
        case FieldDef(a, s):
            return FieldDef(a, canonical(s, env, depth))
        case TypeDef(A, T):
            return TypeDef(A, canonical(T, env, depth))
        case AndDef(l, r):
            return AndDef(canonical(l, env, depth), canonical(r, env, depth))
    raise TypeError(t)


def alpha_eq_oracle(a, b):
    return canonical(a) == canonical(b)


# ----------------------------------------------------------------------
# bounded exhaustive declarative search


def _subterms(T, out):
    out.add(T)
    match T:
        case FieldDecl(_, U) | RefT(U):
            _subterms(U, out)
        case TypeDecl(_, S, U) | And(S, U):
            _subterms(S, out)
            _subterms(U, out)
        case Rec(_, U):
            _subterms(U, out)
        case All(_, S, U):
            _subterms(S, out)
            _subterms(U, out)


def _labels(T, out):
    match T:
        case Sel(_, A):
            out.add(A)
        case TypeDecl(A, S, U):
            out.add(A)
            _labels(S, out)
            _labels(U, out)
        case FieldDecl(_, U) | RefT(U) | Rec(_, U):
            _labels(U, out)
        case And(S, U) | All(_, S, U):
            _labels(S, out)
            _labels(U, out)


def _subst(T, x, y):
    from mdot.syntax import subst
    return subst(T, x, y)


class Declarative:
    """Derivability of `env |- S <: U` and `env |- x : T` up to a depth.

    Types are compared up to alpha-equivalence through `canonical`.
    """

    def __init__(self, env, extra_types=()):
        self.env0 = tuple(env)
        seeds = [T for _, T in self.env0] + list(extra_types)
        self.extra = tuple(seeds)

    def universe(self, env, goal_types):
        u, labels = set(), set()
        for T in list(goal_types) + [T for _, T in env] + list(self.extra):
            _subterms(T, u)
            _labels(T, labels)
        u |= {Top(), Bot()}
        for x, _ in env:
            for A in labels:
                u.add(Sel(x, A))
            # unfoldings of recursive types at each variable
            for T in list(u):
                if isinstance(T, Rec):
                    u.add(_subst(T.body, T.var, x))
        return frozenset(canonical(T) for T in u)

    def sub(self, S, U, depth, env=None):
        env = self.env0 if env is None else env
        return self._sub(env, canonical(S), canonical(U), depth)

    def var(self, x, T, depth, env=None):
        env = self.env0 if env is None else env
        return self._var(env, x, canonical(T), depth)

    @lru_cache(maxsize=None)
    def _univ(self, env, S, U):
        return self.universe(env, (S, U))

    @lru_cache(maxsize=None)
    def _sub(self, env, S, U, d):
        if d <= 0:
            return False
        if S == U or isinstance(U, Top) or isinstance(S, Bot):
            return True
        n = d - 1
        if isinstance(S, And) and (S.left == U or S.right == U):
            return True
        if isinstance(U, And) and self._sub(env, S, U.left, n) and self._sub(env, S, U.right, n):
            return True
        match S, U:
            case FieldDecl(a, T1), FieldDecl(b, T2) if a == b:
                if self._sub(env, T1, T2, n):
                    return True
            case TypeDecl(A, S1, T1), TypeDecl(B, S2, T2) if A == B:
                if self._sub(env, S2, S1, n) and self._sub(env, T1, T2, n):
                    return True
            case RefT(T1), RefT(T2):
                if self._sub(env, T1, T2, n) and self._sub(env, T2, T1, n):
                    return True
            case All(x1, S1, T1), All(x2, S2, T2):
                if self._sub(env, S2, S1, n):
                    z = "%z" + str(len(env))
                    inner = env + ((z, S2),)
                    if self._sub(inner, canonical(_subst(T1, x1, z)),
                                 canonical(_subst(T2, x2, z)), n):
                        return True
        # <:-Sel: S <: x.A from x : {A: S..T}
        if isinstance(U, Sel):
            for T in self._univ(env, S, U):
                if self._var(env, U.var, canonical(TypeDecl(U.label, S, T)), n):
                    return True
        if isinstance(S, Sel):
            for T in self._univ(env, S, U):
                if self._var(env, S.var, canonical(TypeDecl(S.label, T, U)), n):
                    return True
        for M in self._univ(env, S, U):
            if M in (S, U):
                continue
            if self._sub(env, S, M, n) and self._sub(env, M, U, n):
                return True
        return False

    @lru_cache(maxsize=None)
    def _var(self, env, x, T, d):
        if d <= 0:
            return False
        declared = dict(env).get(x)
        if declared is not None and canonical(declared) == T:
            return True
        n = d - 1
        if isinstance(T, And) and self._var(env, x, T.left, n) and self._var(env, x, T.right, n):
            return True
        if isinstance(T, Rec) and self._var(env, x, canonical(_subst(T.body, T.var, x)), n):
            return True
        univ = self._univ(env, T, T)
        for R in univ:
            if isinstance(R, Rec) and canonical(_subst(R.body, R.var, x)) == T:
                if self._var(env, x, R, n):
                    return True
        for M in univ:
            if M == T:
                continue
            if self._var(env, x, M, n) and self._sub(env, M, T, n):
                return True
        return False


def derivable_sub(env, S, U, depth=6):
    return Declarative(env, (S, U)).sub(S, U, depth)


def derivable_var(env, x, T, depth=6):
    return Declarative(env, (T,)).var(x, T, depth)
