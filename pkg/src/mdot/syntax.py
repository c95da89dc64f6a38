"""Abstract syntax of the calculus: types, terms, values and definitions.

Binders are kept as plain names. Substitution is capture-avoiding and
alpha-equivalence is decided by comparing binder positions, so the names
survive for printing while the operations behave as on a nameless
representation.

Surface sugar (application of arbitrary terms, sequencing, ...) has its own
node classes; `desugar` rewrites them into core terms in administrative
normal form.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Union

RESERVED_PREFIX = "%"


# ----------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class FieldDecl:
    label: str
    type: "Type"


@dataclass(frozen=True)
class TypeDecl:
    label: str
    lower: "Type"
    upper: "Type"


@dataclass(frozen=True)
class Sel:
    var: str
    label: str


@dataclass(frozen=True)
class And:
    left: "Type"
    right: "Type"


@dataclass(frozen=True)
class Rec:
    var: str
    body: "Type"


@dataclass(frozen=True)
class All:
    var: str
    param: "Type"
    body: "Type"


@dataclass(frozen=True)
class RefT:
    type: "Type"


Type = Union[Top, Bot, FieldDecl, TypeDecl, Sel, And, Rec, All, RefT]
TYPE_CLASSES = (Top, Bot, FieldDecl, TypeDecl, Sel, And, Rec, All, RefT)


# ----------------------------------------------------------------------
# Terms and values


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class FieldSel:
    var: str
    label: str


@dataclass(frozen=True)
class App:
    fun: str
    arg: str


@dataclass(frozen=True)
class Let:
    var: str
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class RefNew:
    var: str
    type: Type


@dataclass(frozen=True)
class Deref:
    var: str


@dataclass(frozen=True)
class Asgn:
    target: str
    source: str


@dataclass(frozen=True)
class Obj:
    self_var: str
    type: Type
    defs: "Def"


@dataclass(frozen=True)
class Lam:
    var: str
    param: Type
    body: "Term"


@dataclass(frozen=True)
class Loc:
    addr: int


Value = Union[Obj, Lam, Loc]
VALUE_CLASSES = (Obj, Lam, Loc)
Term = Union[Var, FieldSel, App, Let, RefNew, Deref, Asgn, Obj, Lam, Loc]


# ----------------------------------------------------------------------
# Definitions


@dataclass(frozen=True)
class FieldDef:
    label: str
    term: "Term"


@dataclass(frozen=True)
class TypeDef:
    label: str
    type: Type


@dataclass(frozen=True)
class AndDef:
    left: "Def"
    right: "Def"


Def = Union[FieldDef, TypeDef, AndDef]
DEF_CLASSES = (FieldDef, TypeDef, AndDef)


# ----------------------------------------------------------------------
# Surface sugar: operands may be arbitrary terms


@dataclass(frozen=True)
class SApp:
    fun: "Term"
    arg: "Term"


@dataclass(frozen=True)
class SSel:
    term: "Term"
    label: str


@dataclass(frozen=True)
class SRef:
    term: "Term"
    type: Type


@dataclass(frozen=True)
class SDeref:
    term: "Term"


@dataclass(frozen=True)
class SAsgn:
    target: "Term"
    source: "Term"


@dataclass(frozen=True)
class SSeq:
    first: "Term"
    second: "Term"


SURFACE_CLASSES = (SApp, SSel, SRef, SDeref, SAsgn, SSeq)


def _cached_hash(self):
    # syntax trees are immutable and hashed often (memo keys), so hash once
    try:
        return self.__dict__["_hash"]
    except KeyError:
        h = hash((type(self).__name__,) + tuple(self.__dict__.values()))
        object.__setattr__(self, "_hash", h)
        return h


def _fields_eq(self, other):
    if self is other:
        return True
    if type(self) is not type(other):
        return NotImplemented
    return all(getattr(self, f) == getattr(other, f) for f in self.__dataclass_fields__)


for _cls in TYPE_CLASSES + (Var, FieldSel, App, Let, RefNew, Deref, Asgn) \
        + VALUE_CLASSES + DEF_CLASSES + SURFACE_CLASSES:
    _cls.__hash__ = _cached_hash
    _cls.__eq__ = _fields_eq


def is_value(t) -> bool:
    return isinstance(t, VALUE_CLASSES)


def is_type(t) -> bool:
    return isinstance(t, TYPE_CLASSES)


def is_def(t) -> bool:
    return isinstance(t, DEF_CLASSES)


def def_labels(d: Def) -> list[str]:
    match d:
        case AndDef(l, r):
            return def_labels(l) + def_labels(r)
        case _:
            return [d.label]


def decl_conjuncts(t: Type) -> list[Type]:
    """Flatten nested intersections, left to right."""
    if isinstance(t, And):
        return decl_conjuncts(t.left) + decl_conjuncts(t.right)
    return [t]


# ----------------------------------------------------------------------
# Names


def is_reserved(name: str) -> bool:
    return name.startswith(RESERVED_PREFIX)


_TRAILING = re.compile(r"[0-9']+$")


def fresh_name(base: str, avoid) -> str:
    """A name derived from `base` that is not in `avoid`."""
    stem = _TRAILING.sub("", base) or "x"
    if stem == RESERVED_PREFIX:
        candidates = (f"{RESERVED_PREFIX}{i}" for i in itertools.count())
    else:
        candidates = (f"{stem}{i}" for i in itertools.count(1))
    for c in candidates:
        if c not in avoid:
            return c
    raise AssertionError("unreachable")


def free_vars(t) -> set[str]:
    """Free variables of a type, term or definition."""
    match t:
        case Top() | Bot() | Loc():
            return set()
        case Var(x) | Deref(x):
            return {x}
        case FieldSel(x, _) | Sel(x, _):
            return {x}
        case App(x, y) | Asgn(x, y):
            return {x, y}
        case RefNew(x, T):
            return {x} | free_vars(T)
        case FieldDecl(_, T) | RefT(T) | TypeDef(_, T):
            return free_vars(T)
        case TypeDecl(_, S, U) | And(S, U):
            return free_vars(S) | free_vars(U)
        case Rec(x, T):
            return free_vars(T) - {x}
        case All(x, S, T) | Lam(x, S, T):
            return free_vars(S) | (free_vars(T) - {x})
        case Let(x, s, u):
            return free_vars(s) | (free_vars(u) - {x})
        case Obj(x, T, d):
            return (free_vars(T) | free_vars(d)) - {x}
        case FieldDef(_, s):
            return free_vars(s)
        case AndDef(l, r):
            return free_vars(l) | free_vars(r)
        case SApp(a, b) | SAsgn(a, b) | SSeq(a, b):
            return free_vars(a) | free_vars(b)
        case SSel(s, _) | SDeref(s):
            return free_vars(s)
        case SRef(s, T):
            return free_vars(s) | free_vars(T)
    raise TypeError(f"not a syntax node: {t!r}")


def all_names(t) -> set[str]:
    """Every variable name occurring in `t`, free or binding."""
    match t:
        case Rec(x, T):
            return {x} | all_names(T)
        case All(x, S, T) | Lam(x, S, T):
            return {x} | all_names(S) | all_names(T)
        case Let(x, s, u):
            return {x} | all_names(s) | all_names(u)
        case Obj(x, T, d):
            return {x} | all_names(T) | all_names(d)
        case FieldDecl(_, T) | RefT(T) | TypeDef(_, T):
            return all_names(T)
        case TypeDecl(_, S, U) | And(S, U):
            return all_names(S) | all_names(U)
        case FieldDef(_, s) | SSel(s, _) | SDeref(s):
            return all_names(s)
        case AndDef(l, r) | SApp(l, r) | SAsgn(l, r) | SSeq(l, r):
            return all_names(l) | all_names(r)
        case SRef(s, T):
            return all_names(s) | all_names(T)
        case _:
            return free_vars(t)


# ----------------------------------------------------------------------
# Substitution


def subst(t, old: str, new: str):
    """Capture-avoiding replacement of free `old` by the variable `new`."""
    if old == new:
        return t
    return _subst(t, old, new)


def _sv(x, old, new):
    return new if x == old else x


def _under(binder, bodies, old, new):
    """Substitute inside the scope of `binder`; returns (binder, bodies)."""
    if binder == old:
        return binder, bodies
    if binder == new and any(old in free_vars(b) for b in bodies):
        avoid = {old, new}
        for b in bodies:
            avoid |= all_names(b)
        renamed = fresh_name(binder, avoid)
        bodies = tuple(_subst(b, binder, renamed) for b in bodies)
        binder = renamed
    return binder, tuple(_subst(b, old, new) for b in bodies)


def _subst(t, old, new):
    match t:
        case Top() | Bot() | Loc():
            return t
        case Var(x):
            return Var(new) if x == old else t
        case Sel(x, A):
            return Sel(new, A) if x == old else t
        case FieldSel(x, a):
            return FieldSel(_sv(x, old, new), a)
        case App(x, y):
            return App(_sv(x, old, new), _sv(y, old, new))
        case Asgn(x, y):
            return Asgn(_sv(x, old, new), _sv(y, old, new))
        case Deref(x):
            return Deref(_sv(x, old, new))
        case RefNew(x, T):
            return RefNew(_sv(x, old, new), _subst(T, old, new))
        case FieldDecl(a, T):
            return FieldDecl(a, _subst(T, old, new))
        case TypeDecl(A, S, U):
            return TypeDecl(A, _subst(S, old, new), _subst(U, old, new))
        case And(S, U):
            return And(_subst(S, old, new), _subst(U, old, new))
        case RefT(T):
            return RefT(_subst(T, old, new))
        case Rec(x, T):
            x2, (T2,) = _under(x, (T,), old, new)
            return Rec(x2, T2)
        case All(x, S, T):
            x2, (T2,) = _under(x, (T,), old, new)
            return All(x2, _subst(S, old, new), T2)
        case Lam(x, S, body):
            x2, (b2,) = _under(x, (body,), old, new)
            return Lam(x2, _subst(S, old, new), b2)
        case Let(x, s, u):
            x2, (u2,) = _under(x, (u,), old, new)
            return Let(x2, _subst(s, old, new), u2)
        case Obj(x, T, d):
            x2, (T2, d2) = _under(x, (T, d), old, new)
            return Obj(x2, T2, d2)
        case FieldDef(a, s):
            return FieldDef(a, _subst(s, old, new))
        case TypeDef(A, T):
            return TypeDef(A, _subst(T, old, new))
        case AndDef(l, r):
            return AndDef(_subst(l, old, new), _subst(r, old, new))
        case SApp(a, b):
            return SApp(_subst(a, old, new), _subst(b, old, new))
        case SAsgn(a, b):
            return SAsgn(_subst(a, old, new), _subst(b, old, new))
        case SSeq(a, b):
            return SSeq(_subst(a, old, new), _subst(b, old, new))
        case SSel(s, a):
            return SSel(_subst(s, old, new), a)
        case SDeref(s):
            return SDeref(_subst(s, old, new))
        case SRef(s, T):
            return SRef(_subst(s, old, new), _subst(T, old, new))
    raise TypeError(f"not a syntax node: {t!r}")


def subst_store_typing(sigma, old: str, new: str) -> dict:
    """Apply `subst` to every type in the range of a store typing."""
    return {l: subst(T, old, new) for l, T in dict(sigma).items()}


# ----------------------------------------------------------------------
# Alpha-equivalence


def alpha_eq(a, b) -> bool:
    return _aeq(a, b, {}, {}, 0)


def _name_eq(x, y, ea, eb):
    if x in ea or y in eb:
        return ea.get(x) == eb.get(y)
    return x == y


def _bind(x, y, ea, eb, n):
    return {**ea, x: n}, {**eb, y: n}, n + 1


def _aeq(a, b, ea, eb, n) -> bool:
    if type(a) is not type(b):
        return False
    match a:
        case Top() | Bot():
            return True
        case Loc(l):
            return l == b.addr
        case Var(x) | Deref(x):
            return _name_eq(x, b.name if isinstance(b, Var) else b.var, ea, eb)
        case Sel(x, A):
            return A == b.label and _name_eq(x, b.var, ea, eb)
        case FieldSel(x, a_):
            return a_ == b.label and _name_eq(x, b.var, ea, eb)
        case App(x, y):
            return _name_eq(x, b.fun, ea, eb) and _name_eq(y, b.arg, ea, eb)
        case Asgn(x, y):
            return _name_eq(x, b.target, ea, eb) and _name_eq(y, b.source, ea, eb)
        case RefNew(x, T):
            return _name_eq(x, b.var, ea, eb) and _aeq(T, b.type, ea, eb, n)
        case FieldDecl(l, T):
            return l == b.label and _aeq(T, b.type, ea, eb, n)
        case TypeDecl(l, S, U):
            return (l == b.label and _aeq(S, b.lower, ea, eb, n)
                    and _aeq(U, b.upper, ea, eb, n))
        case And(S, U):
            return _aeq(S, b.left, ea, eb, n) and _aeq(U, b.right, ea, eb, n)
        case RefT(T):
            return _aeq(T, b.type, ea, eb, n)
        case Rec(x, T):
            return _aeq(T, b.body, *_bind(x, b.var, ea, eb, n))
        case All(x, S, T):
            return (_aeq(S, b.param, ea, eb, n)
                    and _aeq(T, b.body, *_bind(x, b.var, ea, eb, n)))
        case Lam(x, S, body):
            return (_aeq(S, b.param, ea, eb, n)
                    and _aeq(body, b.body, *_bind(x, b.var, ea, eb, n)))
        case Let(x, s, u):
            return (_aeq(s, b.bound, ea, eb, n)
                    and _aeq(u, b.body, *_bind(x, b.var, ea, eb, n)))
        case Obj(x, T, d):
            ea2, eb2, n2 = _bind(x, b.self_var, ea, eb, n)
            return _aeq(T, b.type, ea2, eb2, n2) and _aeq(d, b.defs, ea2, eb2, n2)
        case FieldDef(l, s):
            return l == b.label and _aeq(s, b.term, ea, eb, n)
        case TypeDef(l, T):
            return l == b.label and _aeq(T, b.type, ea, eb, n)
        case AndDef(l, r):
            return _aeq(l, b.left, ea, eb, n) and _aeq(r, b.right, ea, eb, n)
        case SApp(f, x):
            return _aeq(f, b.fun, ea, eb, n) and _aeq(x, b.arg, ea, eb, n)
        case SAsgn(f, x):
            return _aeq(f, b.target, ea, eb, n) and _aeq(x, b.source, ea, eb, n)
        case SSeq(f, x):
            return _aeq(f, b.first, ea, eb, n) and _aeq(x, b.second, ea, eb, n)
        case SSel(s, l):
            return l == b.label and _aeq(s, b.term, ea, eb, n)
        case SDeref(s):
            return _aeq(s, b.term, ea, eb, n)
        case SRef(s, T):
            return _aeq(s, b.term, ea, eb, n) and _aeq(T, b.type, ea, eb, n)
    raise TypeError(f"not a syntax node: {a!r}")


# ----------------------------------------------------------------------
# Desugaring


def desugar(t):
    """Rewrite surface sugar into core terms.

    Operands that are not already variables are let-bound to fresh
    `%k` names, which the parser refuses, so they never clash with user
    names. Core terms come back unchanged.
    """
    taken = all_names(t)
    counter = itertools.count()

    def fresh():
        while True:
            name = f"{RESERVED_PREFIX}{next(counter)}"
            if name not in taken:
                taken.add(name)
                return name

    def bind(term, k):
        # let-bind a non-variable operand, hand the variable to k
        if isinstance(term, Var):
            return k(term.name)
        x = fresh()
        return Let(x, go(term), k(x))

    def go(t):
        match t:
            case Let(x, s, u):
                return Let(x, go(s), go(u))
            case Lam(x, S, body):
                return Lam(x, S, go(body))
            case Obj(x, T, d):
                return Obj(x, T, go(d))
            case FieldDef(a, s):
                return FieldDef(a, go(s))
            case AndDef(l, r):
                return AndDef(go(l), go(r))
            case SApp(f, a):
                return bind(f, lambda x: bind(a, lambda y: App(x, y)))
            case SSel(s, a):
                return bind(s, lambda x: FieldSel(x, a))
            case SRef(s, T):
                return bind(s, lambda x: RefNew(x, T))
            case SDeref(s):
                return bind(s, lambda x: Deref(x))
            case SAsgn(s, u):
                return bind(s, lambda x: bind(u, lambda y: Asgn(x, y)))
            case SSeq(s, u):
                x = fresh()
                return Let(x, go(s), go(u))
            case _:
                return t

    return go(t)


def is_core(t) -> bool:
    match t:
        case SApp() | SSel() | SRef() | SDeref() | SAsgn() | SSeq():
            return False
        case Let(_, s, u):
            return is_core(s) and is_core(u)
        case Lam(_, _, body):
            return is_core(body)
        case Obj(_, _, d):
            return is_core(d)
        case FieldDef(_, s):
            return is_core(s)
        case AndDef(l, r):
            return is_core(l) and is_core(r)
        case _:
            return True


def unreserve(t):
    """Alpha-rename every `%`-prefixed binder to an ordinary fresh name."""
    taken = all_names(t)

    def rename(x, bodies):
        if not is_reserved(x):
            return x, bodies
        y = fresh_name("t", taken)
        taken.add(y)
        return y, tuple(subst(b, x, y) for b in bodies)

    def go(t):
        match t:
            case Let(x, s, u):
                x2, (u2,) = rename(x, (u,))
                return Let(x2, go(s), go(u2))
            case Lam(x, S, body):
                x2, (b2,) = rename(x, (body,))
                return Lam(x2, go(S), go(b2))
            case Obj(x, T, d):
                x2, (T2, d2) = rename(x, (T, d))
                return Obj(x2, go(T2), go(d2))
            case Rec(x, T):
                x2, (T2,) = rename(x, (T,))
                return Rec(x2, go(T2))
            case All(x, S, T):
                x2, (T2,) = rename(x, (T,))
                return All(x2, go(S), go(T2))
            case FieldDef(a, s):
                return FieldDef(a, go(s))
            case AndDef(l, r):
                return AndDef(go(l), go(r))
            case FieldDecl(a, T):
                return FieldDecl(a, go(T))
            case TypeDecl(A, S, U):
                return TypeDecl(A, go(S), go(U))
            case And(S, U):
                return And(go(S), go(U))
            case RefT(T):
                return RefT(go(T))
            case RefNew(x, T):
                return RefNew(x, go(T))
            case SApp(a, b):
                return SApp(go(a), go(b))
            case SAsgn(a, b):
                return SAsgn(go(a), go(b))
            case SSeq(a, b):
                return SSeq(go(a), go(b))
            case SSel(s, a):
                return SSel(go(s), a)
            case SDeref(s):
                return SDeref(go(s))
            case SRef(s, T):
                return SRef(go(s), go(T))
            case _:
                return t

    return go(t)


def size(t) -> int:
    """Number of term nodes (types and definitions are not counted)."""
    match t:
        case Let(_, s, u):
            return 1 + size(s) + size(u)
        case Lam(_, _, body):
            return 1 + size(body)
        case Obj(_, _, d):
            return 1 + size(d)
        case FieldDef(_, s):
            return size(s)
        case TypeDef():
            return 0
        case AndDef(l, r):
            return size(l) + size(r)
        case SApp(a, b) | SAsgn(a, b) | SSeq(a, b):
            return 1 + size(a) + size(b)
        case SSel(s, _) | SDeref(s) | SRef(s, _):
            return 1 + size(s)
        case _:
            return 1
