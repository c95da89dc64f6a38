"""Hypothesis strategies for raw (not necessarily well-typed) core syntax."""
from hypothesis import strategies as st

from mdot.syntax import (
    All, And, AndDef, App, Asgn, Bot, Deref, FieldDecl, FieldDef, FieldSel,
    Lam, Let, Obj, Rec, RefNew, RefT, Sel, Top, TypeDecl, TypeDef, Var,
)

NAMES = ("x", "y", "z", "w")
names = st.sampled_from(NAMES)
field_labels = st.sampled_from(("a", "b"))
type_labels = st.sampled_from(("A", "B"))


def _types(children):
    return st.one_of(
        st.builds(FieldDecl, field_labels, children),
        st.builds(TypeDecl, type_labels, children, children),
        st.builds(And, children, children),
        st.builds(Rec, names, children),
        st.builds(All, names, children, children),
        st.builds(RefT, children),
    )


types = st.recursive(
    st.one_of(st.just(Top()), st.just(Bot()), st.builds(Sel, names, type_labels)),
    _types, max_leaves=8)


def _defs(terms):
    fld = st.builds(FieldDef, st.just("a"), terms)
    typ = st.builds(TypeDef, st.just("A"), types)
    return st.one_of(fld, typ, st.builds(AndDef, fld, typ))


def _terms(children):
    return st.one_of(
        st.builds(Let, names, children, children),
        st.builds(Lam, names, types, children),
        st.builds(Obj, names, types, _defs(children)),
    )


terms = st.recursive(
    st.one_of(
        st.builds(Var, names),
        st.builds(FieldSel, names, field_labels),
        st.builds(App, names, names),
        st.builds(RefNew, names, types),
        st.builds(Deref, names),
        st.builds(Asgn, names, names),
    ),
    _terms, max_leaves=10)
