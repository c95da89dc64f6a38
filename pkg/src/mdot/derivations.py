"""Typing contexts, judgments, derivation trees and their validator.

`validate_derivation` re-checks every node against the declarative rule
schemas. It depends only on the syntax operations, never on the search in
`typecheck`, so a Yes from the search is only as trustworthy as this check.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from . import syntax as sx
from .syntax import (
    All, And, AndDef, App, Asgn, Bot, Deref, FieldDecl, FieldDef, FieldSel,
    Lam, Let, Loc, Obj, Rec, RefNew, RefT, Sel, Top, TypeDecl, TypeDef, Var,
    alpha_eq, def_labels, free_vars, subst,
)

TYPING_RULES = (
    "Var", "Loc", "All-I", "All-E", "{}-I", "{}-E", "Let", "Rec-I", "Rec-E",
    "&-I", "Sub", "Fld-I", "Typ-I", "AndDef-I", "Ref-I", "Ref-E", "Asgn",
)
SUBTYPING_RULES = (
    "Top", "Bot", "Refl", "Trans", "And1-<:", "And2-<:", "<:-And", "<:-Sel",
    "Sel-<:", "Fld-<:-Fld", "Typ-<:-Typ", "All-<:-All", "Ref-Sub",
)


@dataclass(frozen=True)
class TypeEnv:
    """Ordered variable typings; later entries may mention earlier ones."""

    bindings: tuple = ()
    _index: dict = field(default=None, compare=False, repr=False, hash=False)
    _hash: int = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "bindings", tuple((x, T) for x, T in self.bindings))
        object.__setattr__(self, "_index", dict(self.bindings))
        if len(self._index) != len(self.bindings):
            raise ValueError("duplicate variable in type environment")
        object.__setattr__(self, "_hash", hash(self.bindings))

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        return (isinstance(other, TypeEnv) and self._hash == other._hash
                and self.bindings == other.bindings)

    def __contains__(self, x):
        return x in self._index

    def __len__(self):
        return len(self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def lookup(self, x):
        return self._index[x]

    def get(self, x, default=None):
        return self._index.get(x, default)

    def extend(self, x, T):
        return TypeEnv(self.bindings + ((x, T),))

    def domain(self):
        return set(self._index)

    def prefix_of(self, other):
        return other.bindings[:len(self.bindings)] == self.bindings


@dataclass(frozen=True)
class StoreTyping:
    """Locations to the type of the variables they hold."""

    items: tuple = ()
    _index: dict = field(default=None, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(sorted(dict(self.items).items())))
        object.__setattr__(self, "_index", dict(self.items))

    def __contains__(self, l):
        return l in self._index

    def __len__(self):
        return len(self.items)

    def lookup(self, l):
        return self._index[l]

    def get(self, l, default=None):
        return self._index.get(l, default)

    def extend(self, l, T):
        return StoreTyping(self.items + ((l, T),))

    def as_dict(self):
        return dict(self._index)

    def extends(self, other):
        """True if every entry of `other` is present here unchanged."""
        return all(l in self._index and self._index[l] == T for l, T in other.items)


def as_env(env) -> TypeEnv:
    if isinstance(env, TypeEnv):
        return env
    if env is None:
        return TypeEnv()
    if isinstance(env, dict):
        return TypeEnv(tuple(env.items()))
    return TypeEnv(tuple(env))


def as_sigma(sigma) -> StoreTyping:
    if isinstance(sigma, StoreTyping):
        return sigma
    if sigma is None:
        return StoreTyping()
    return StoreTyping(tuple(dict(sigma).items()))


@dataclass(frozen=True)
class Judgment:
    """`env; sigma |- subject : type`, or `subject <: type` when `sub`."""

    env: TypeEnv
    sigma: StoreTyping
    subject: object
    type: object
    sub: bool = False

    def __str__(self):
        from .parser import pretty
        rel = "<:" if self.sub else ":"
        return f"{pretty(self.subject)} {rel} {pretty(self.type)}"


@dataclass(frozen=True, eq=False)
class Derivation:
    rule: str
    conclusion: Judgment
    premises: tuple = ()

    @property
    def type(self):
        return self.conclusion.type

    def nodes(self):
        stack = [self]
        while stack:
            d = stack.pop()
            yield d
            stack.extend(reversed(d.premises))

    def size(self):
        return sum(1 for _ in self.nodes())

    def depth(self):
        return 1 + max((p.depth() for p in self.premises), default=0)


# ----------------------------------------------------------------------
# Validation


class _Bad(Exception):
    pass


def _need(cond, msg):
    if not cond:
        raise _Bad(msg)


def _prem(d, n):
    _need(len(d.premises) == n, f"expected {n} premise(s), got {len(d.premises)}")
    return d.premises


def _same_ctx(d, p):
    c, pc = d.conclusion, p.conclusion
    _need(pc.env == c.env and pc.sigma == c.sigma, "premise context differs")


def _typing(p, subject=None):
    c = p.conclusion
    _need(not c.sub, f"premise {p.rule} should be a typing judgment")
    if subject is not None:
        _need(alpha_eq(c.subject, subject), "premise subject mismatch")
    return c


def _subtyping(p):
    c = p.conclusion
    _need(c.sub, f"premise {p.rule} should be a subtyping judgment")
    return c


def _extended(d, p, binder_type):
    """Premise env is the conclusion env plus one fresh binder; return it."""
    c, pc = d.conclusion, p.conclusion
    _need(pc.sigma == c.sigma, "premise store typing differs")
    _need(len(pc.env) == len(c.env) + 1 and c.env.prefix_of(pc.env),
          "premise environment is not a one-binding extension")
    x, T = pc.env.bindings[-1]
    _need(x not in c.env, f"binder {x} already bound")
    _need(alpha_eq(T, binder_type), "binder type mismatch")
    return x


def _check_typing(d):
    c = d.conclusion
    s, T, rule = c.subject, c.type, d.rule
    if rule == "Var":
        _prem(d, 0)
        _need(isinstance(s, Var) and s.name in c.env, "Var needs a bound variable")
        _need(alpha_eq(c.env.lookup(s.name), T), "type differs from environment")
    elif rule == "Loc":
        _prem(d, 0)
        _need(isinstance(s, Loc) and s.addr in c.sigma, "Loc needs a typed location")
        _need(alpha_eq(RefT(c.sigma.lookup(s.addr)), T), "type is not Ref of store typing")
    elif rule == "All-I":
        (p,) = _prem(d, 1)
        _need(isinstance(s, Lam), "All-I subject must be a lambda")
        x = _extended(d, p, s.param)
        pc = _typing(p, subst(s.body, s.var, x))
        _need(x not in free_vars(s.param), "binder occurs in its parameter type")
        _need(alpha_eq(T, All(x, s.param, pc.type)), "conclusion is not the function type")
    elif rule == "All-E":
        p1, p2 = _prem(d, 2)
        _need(isinstance(s, App), "All-E subject must be an application")
        _same_ctx(d, p1), _same_ctx(d, p2)
        fc = _typing(p1, Var(s.fun))
        _need(isinstance(fc.type, All), "function premise must have a dependent function type")
        ac = _typing(p2, Var(s.arg))
        _need(alpha_eq(ac.type, fc.type.param), "argument type differs from parameter type")
        _need(alpha_eq(T, subst(fc.type.body, fc.type.var, s.arg)), "result type mismatch")
    elif rule == "{}-I":
        (p,) = _prem(d, 1)
        _need(isinstance(s, Obj), "{}-I subject must be an object")
        pc = p.conclusion
        _need(pc.env.bindings and pc.env.bindings[-1][0] not in c.env, "missing self binder")
        x = pc.env.bindings[-1][0]
        body_t = subst(s.type, s.self_var, x)
        _extended(d, p, body_t)
        _typing(p, subst(s.defs, s.self_var, x))
        _need(alpha_eq(pc.type, body_t), "definitions must have exactly the declared type")
        _need(alpha_eq(T, Rec(x, body_t)), "conclusion is not the recursive type")
    elif rule == "{}-E":
        (p,) = _prem(d, 1)
        _need(isinstance(s, FieldSel), "{}-E subject must be a selection")
        _same_ctx(d, p)
        pc = _typing(p, Var(s.var))
        _need(isinstance(pc.type, FieldDecl) and pc.type.label == s.label,
              "premise is not a declaration of the selected field")
        _need(alpha_eq(T, pc.type.type), "field type mismatch")
    elif rule == "Let":
        p1, p2 = _prem(d, 2)
        _need(isinstance(s, Let), "Let subject must be a let")
        _same_ctx(d, p1)
        bc = _typing(p1, s.bound)
        x = _extended(d, p2, bc.type)
        uc = _typing(p2, subst(s.body, s.var, x))
        _need(x not in free_vars(uc.type), "let-bound variable escapes in the body type")
        _need(alpha_eq(T, uc.type), "type differs from body type")
    elif rule == "Rec-I":
        (p,) = _prem(d, 1)
        _need(isinstance(s, Var) and isinstance(T, Rec), "Rec-I folds a variable")
        _same_ctx(d, p)
        pc = _typing(p, s)
        _need(alpha_eq(pc.type, subst(T.body, T.var, s.name)), "fold mismatch")
    elif rule == "Rec-E":
        (p,) = _prem(d, 1)
        _need(isinstance(s, Var), "Rec-E opens a variable")
        _same_ctx(d, p)
        pc = _typing(p, s)
        _need(isinstance(pc.type, Rec), "premise must be recursive")
        _need(alpha_eq(T, subst(pc.type.body, pc.type.var, s.name)), "unfold mismatch")
    elif rule == "&-I":
        p1, p2 = _prem(d, 2)
        _need(isinstance(s, Var) and isinstance(T, And), "&-I types a variable at an intersection")
        _same_ctx(d, p1), _same_ctx(d, p2)
        _need(alpha_eq(_typing(p1, s).type, T.left), "left conjunct mismatch")
        _need(alpha_eq(_typing(p2, s).type, T.right), "right conjunct mismatch")
    elif rule == "Sub":
        p1, p2 = _prem(d, 2)
        _need(not sx.is_def(s), "Sub does not apply to definitions")
        _same_ctx(d, p1), _same_ctx(d, p2)
        tc = _typing(p1, s)
        sc = _subtyping(p2)
        _need(alpha_eq(sc.subject, tc.type), "subtyping premise does not start at the term type")
        _need(alpha_eq(sc.type, T), "subtyping premise does not end at the conclusion type")
    elif rule == "Fld-I":
        (p,) = _prem(d, 1)
        _need(isinstance(s, FieldDef), "Fld-I subject must be a field definition")
        _same_ctx(d, p)
        pc = _typing(p, s.term)
        _need(alpha_eq(T, FieldDecl(s.label, pc.type)), "field declaration mismatch")
    elif rule == "Typ-I":
        _prem(d, 0)
        _need(isinstance(s, TypeDef), "Typ-I subject must be a type definition")
        _need(alpha_eq(T, TypeDecl(s.label, s.type, s.type)), "type declaration mismatch")
    elif rule == "AndDef-I":
        p1, p2 = _prem(d, 2)
        _need(isinstance(s, AndDef) and isinstance(T, And), "AndDef-I shape")
        _same_ctx(d, p1), _same_ctx(d, p2)
        _need(not set(def_labels(s.left)) & set(def_labels(s.right)), "labels not disjoint")
        _need(alpha_eq(_typing(p1, s.left).type, T.left), "left definition type mismatch")
        _need(alpha_eq(_typing(p2, s.right).type, T.right), "right definition type mismatch")
    elif rule == "Ref-I":
        (p,) = _prem(d, 1)
        _need(isinstance(s, RefNew), "Ref-I subject must be ref x T")
        _same_ctx(d, p)
        _need(alpha_eq(_typing(p, Var(s.var)).type, s.type), "initializer type mismatch")
        _need(alpha_eq(T, RefT(s.type)), "conclusion must be Ref T")
    elif rule == "Ref-E":
        (p,) = _prem(d, 1)
        _need(isinstance(s, Deref), "Ref-E subject must be !x")
        _same_ctx(d, p)
        pt = _typing(p, Var(s.var)).type
        _need(isinstance(pt, RefT) and alpha_eq(pt.type, T), "premise must be Ref T")
    elif rule == "Asgn":
        p1, p2 = _prem(d, 2)
        _need(isinstance(s, Asgn), "Asgn subject must be x := y")
        _same_ctx(d, p1), _same_ctx(d, p2)
        rt = _typing(p1, Var(s.target)).type
        _need(isinstance(rt, RefT) and alpha_eq(rt.type, T), "target must be Ref T")
        _need(alpha_eq(_typing(p2, Var(s.source)).type, T), "source must have type T")
    else:
        raise _Bad(f"unknown typing rule {rule!r}")


def _check_subtyping(d):
    c = d.conclusion
    S, U, rule = c.subject, c.type, d.rule
    if rule == "Top":
        _prem(d, 0)
        _need(isinstance(U, Top), "Top needs Top on the right")
    elif rule == "Bot":
        _prem(d, 0)
        _need(isinstance(S, Bot), "Bot needs Bot on the left")
    elif rule == "Refl":
        _prem(d, 0)
        _need(alpha_eq(S, U), "Refl needs equal types")
    elif rule == "Trans":
        p1, p2 = _prem(d, 2)
        _same_ctx(d, p1), _same_ctx(d, p2)
        a, b = _subtyping(p1), _subtyping(p2)
        _need(alpha_eq(a.subject, S) and alpha_eq(b.type, U), "Trans endpoints mismatch")
        _need(alpha_eq(a.type, b.subject), "Trans middle types differ")
    elif rule in ("And1-<:", "And2-<:"):
        _prem(d, 0)
        _need(isinstance(S, And), f"{rule} needs an intersection on the left")
        part = S.left if rule == "And1-<:" else S.right
        _need(alpha_eq(part, U), "conjunct mismatch")
    elif rule == "<:-And":
        p1, p2 = _prem(d, 2)
        _need(isinstance(U, And), "<:-And needs an intersection on the right")
        _same_ctx(d, p1), _same_ctx(d, p2)
        a, b = _subtyping(p1), _subtyping(p2)
        _need(alpha_eq(a.subject, S) and alpha_eq(b.subject, S), "<:-And left side mismatch")
        _need(alpha_eq(a.type, U.left) and alpha_eq(b.type, U.right), "<:-And conjunct mismatch")
    elif rule == "<:-Sel":
        (p,) = _prem(d, 1)
        _need(isinstance(U, Sel), "<:-Sel needs a selection on the right")
        _same_ctx(d, p)
        pt = _typing(p, Var(U.var)).type
        _need(isinstance(pt, TypeDecl) and pt.label == U.label, "premise must declare the member")
        _need(alpha_eq(pt.lower, S), "lower bound mismatch")
    elif rule == "Sel-<:":
        (p,) = _prem(d, 1)
        _need(isinstance(S, Sel), "Sel-<: needs a selection on the left")
        _same_ctx(d, p)
        pt = _typing(p, Var(S.var)).type
        _need(isinstance(pt, TypeDecl) and pt.label == S.label, "premise must declare the member")
        _need(alpha_eq(pt.upper, U), "upper bound mismatch")
    elif rule == "Fld-<:-Fld":
        (p,) = _prem(d, 1)
        _need(isinstance(S, FieldDecl) and isinstance(U, FieldDecl)
              and S.label == U.label, "Fld-<:-Fld shape")
        _same_ctx(d, p)
        a = _subtyping(p)
        _need(alpha_eq(a.subject, S.type) and alpha_eq(a.type, U.type), "field premise mismatch")
    elif rule == "Typ-<:-Typ":
        p1, p2 = _prem(d, 2)
        _need(isinstance(S, TypeDecl) and isinstance(U, TypeDecl)
              and S.label == U.label, "Typ-<:-Typ shape")
        _same_ctx(d, p1), _same_ctx(d, p2)
        a, b = _subtyping(p1), _subtyping(p2)
        _need(alpha_eq(a.subject, U.lower) and alpha_eq(a.type, S.lower), "lower bounds premise")
        _need(alpha_eq(b.subject, S.upper) and alpha_eq(b.type, U.upper), "upper bounds premise")
    elif rule == "All-<:-All":
        p1, p2 = _prem(d, 2)
        _need(isinstance(S, All) and isinstance(U, All), "All-<:-All shape")
        _same_ctx(d, p1)
        a = _subtyping(p1)
        _need(alpha_eq(a.subject, U.param) and alpha_eq(a.type, S.param), "parameter premise")
        x = _extended(d, p2, U.param)
        _need(x not in free_vars(S) | free_vars(U), "binder not fresh")
        b = _subtyping(p2)
        _need(alpha_eq(b.subject, subst(S.body, S.var, x))
              and alpha_eq(b.type, subst(U.body, U.var, x)), "result premise")
    elif rule == "Ref-Sub":
        p1, p2 = _prem(d, 2)
        _need(isinstance(S, RefT) and isinstance(U, RefT), "Ref-Sub shape")
        _same_ctx(d, p1), _same_ctx(d, p2)
        a, b = _subtyping(p1), _subtyping(p2)
        _need(alpha_eq(a.subject, S.type) and alpha_eq(a.type, U.type), "covariant premise")
        _need(alpha_eq(b.subject, U.type) and alpha_eq(b.type, S.type), "contravariant premise")
    else:
        raise _Bad(f"unknown subtyping rule {rule!r}")


def explain(d: Derivation) -> list[str]:
    """All schema violations in `d`, as `path: rule: message` strings."""
    problems = []
    seen = set()

    def walk(node, path):
        if id(node) in seen:
            return
        if not isinstance(node, Derivation):
            problems.append(f"{path}: not a derivation node: {node!r}")
            return
        try:
            if node.conclusion.sub:
                _check_subtyping(node)
            else:
                _check_typing(node)
        except _Bad as e:
            problems.append(f"{path}: {node.rule}: {e}")
        except (AttributeError, TypeError, KeyError, ValueError) as e:
            problems.append(f"{path}: {node.rule}: malformed node ({e})")
        seen.add(id(node))
        for i, p in enumerate(node.premises):
            walk(p, f"{path}.{i}")

    walk(d, "0")
    return problems


def validate_derivation(d: Derivation) -> bool:
    return not explain(d)


# ----------------------------------------------------------------------
# Serialization

_NODE_CLASSES = {cls.__name__: cls for cls in (
    *sx.TYPE_CLASSES, Var, FieldSel, App, Let, RefNew, Deref, Asgn, Obj, Lam, Loc,
    *sx.DEF_CLASSES, *sx.SURFACE_CLASSES,
)}


def syntax_to_json(t):
    out = {"node": type(t).__name__}
    for f in dataclasses.fields(t):
        v = getattr(t, f.name)
        out[f.name] = syntax_to_json(v) if dataclasses.is_dataclass(v) else v
    return out


def syntax_from_json(obj):
    cls = _NODE_CLASSES[obj["node"]]
    kwargs = {}
    for f in dataclasses.fields(cls):
        v = obj[f.name]
        kwargs[f.name] = syntax_from_json(v) if isinstance(v, dict) else v
    return cls(**kwargs)


def judgment_to_json(j: Judgment):
    return {
        "kind": "subtyping" if j.sub else "typing",
        "env": [[x, syntax_to_json(T)] for x, T in j.env],
        "sigma": [[l, syntax_to_json(T)] for l, T in j.sigma.items],
        "subject": syntax_to_json(j.subject),
        "type": syntax_to_json(j.type),
        "text": str(j),
    }


def judgment_from_json(obj):
    return Judgment(
        TypeEnv(tuple((x, syntax_from_json(T)) for x, T in obj["env"])),
        StoreTyping(tuple((l, syntax_from_json(T)) for l, T in obj["sigma"])),
        syntax_from_json(obj["subject"]),
        syntax_from_json(obj["type"]),
        obj["kind"] == "subtyping",
    )


def to_json(d: Derivation):
    return {
        "rule": d.rule,
        "conclusion": judgment_to_json(d.conclusion),
        "children": [to_json(p) for p in d.premises],
    }


def from_json(obj) -> Derivation:
    return Derivation(obj["rule"], judgment_from_json(obj["conclusion"]),
                      tuple(from_json(c) for c in obj["children"]))


def dumps(d: Derivation, **kw) -> str:
    return json.dumps(to_json(d), **kw)


def loads(text: str) -> Derivation:
    return from_json(json.loads(text))


def to_text(d: Derivation, indent: int = 0) -> str:
    """Indented rendering; environment growth is shown where it happens."""
    lines = []

    def walk(node, depth, parent_env):
        env = node.conclusion.env
        extra = ""
        if parent_env is not None and len(env) > len(parent_env):
            added = ", ".join(f"{x}: {_pp(T)}" for x, T in env.bindings[len(parent_env):])
            extra = f"   [+ {added}]"
        lines.append(f"{'  ' * depth}{node.rule}: {node.conclusion}{extra}")
        for p in node.premises:
            walk(p, depth + 1, env)

    walk(d, indent, None)
    return "\n".join(lines)


def _pp(T):
    from .parser import pretty
    return pretty(T)
