from hypothesis import given, settings, strategies as st

from mdot.parser import parse, parse_type
from mdot.syntax import (
    All, Bot, Lam, Let, RefNew, RefT, Sel, Top, TypeDecl, Var,
    alpha_eq, desugar, free_vars, fresh_name, is_core, subst,
    subst_store_typing,
)

from oracle import alpha_eq_oracle, canonical
from strategies import names, terms, types


# desugar


def test_desugar_ref_of_term_binds_reserved_name():
    core = desugar(parse("ref (lambda(x: Top) x) Top"))
    assert core == Let("%0", Lam("x", Top(), Var("x")), RefNew("%0", Top()))


def test_type_member_shorthand_has_full_bounds():
    assert parse_type("{A}") == TypeDecl("A", Bot(), Top())


def test_desugar_leaves_core_unchanged():
    t = parse("let x = lambda(y: Top) y in x")
    assert desugar(t) is t or desugar(t) == t


def test_desugar_sequence_binds_unused_name():
    core = desugar(parse("(lambda(x: Top) x); (lambda(y: Top) y)"))
    assert isinstance(core, Let) and core.var.startswith("%")
    assert core.var not in free_vars(core.body)


def test_desugar_application_of_terms_is_left_to_right():
    core = desugar(parse("(lambda(x: Top) x) (lambda(y: Top) y)"))
    assert is_core(core)
    assert isinstance(core, Let) and isinstance(core.body, Let)
    assert core.body.body.fun == core.var and core.body.body.arg == core.body.var


def test_desugar_idempotent_on_corpus(corpus):
    for _, t in corpus:
        core = desugar(t)
        assert alpha_eq(desugar(core), core)


# subst


def test_subst_variable():
    assert subst(Var("x"), "x", "y") == Var("y")


def test_subst_in_ref():
    assert subst(RefNew("x", Top()), "x", "y") == RefNew("y", Top())


def test_subst_stops_at_shadowing_binder():
    t = parse("let x = lambda(z: Top) z in x")
    assert subst(t, "x", "y") == t


def test_subst_renames_capturing_binder():
    out = subst(Lam("y", Top(), Var("x")), "x", "y")
    assert out.var != "y" and out.body == Var("y")
    assert alpha_eq(out, Lam("y1", Top(), Var("y")))
    assert alpha_eq_oracle(out, Lam("q", Top(), Var("y")))


# free_vars


def test_free_vars_selection():
    assert free_vars(Sel("x", "A")) == {"x"}


def test_free_vars_self_bound():
    assert free_vars(parse_type("mu(z: {A: z.A..Top})")) == set()


# binder field and the fields it scopes over, per binding node
_BINDERS = {"Rec": ("var", {"body"}), "All": ("var", {"body"}),
            "Lam": ("var", {"body"}), "Let": ("var", {"body"}),
            "Obj": ("self_var", {"type", "defs"})}
_OCCURRENCES = {"Var": ("name",), "Sel": ("var",), "FieldSel": ("var",),
                "App": ("fun", "arg"), "RefNew": ("var",), "Deref": ("var",),
                "Asgn": ("target", "source")}


def _brute_free(t, bound=frozenset()):
    kind = type(t).__name__
    out = {getattr(t, f) for f in _OCCURRENCES.get(kind, ())} - bound
    binder, scoped = _BINDERS.get(kind, (None, set()))
    for f in t.__dataclass_fields__:
        v = getattr(t, f)
        if hasattr(v, "__dataclass_fields__"):
            inner = bound | {getattr(t, binder)} if f in scoped else bound
            out |= _brute_free(v, inner)
    return out


def test_free_vars_quantifier_oracle():
    T = All("x", Sel("y", "A"), Sel("x", "B"))
    assert free_vars(T) == {"y"} == _brute_free(T)


@given(terms)
def test_free_vars_matches_brute_force(t):
    assert free_vars(t) == _brute_free(t)


# alpha_eq


def test_alpha_eq_examples():
    assert alpha_eq(Lam("x", Top(), Var("x")), Lam("y", Top(), Var("y")))
    assert not alpha_eq(Lam("x", Top(), Var("x")), Lam("x", Bot(), Var("x")))
    a = parse_type("mu(a: {A: a.A..Top})")
    b = parse_type("mu(b: {A: b.A..Top})")
    assert alpha_eq(a, b) and alpha_eq_oracle(a, b)


@given(terms, terms)
def test_alpha_eq_agrees_with_canonical_indices(a, b):
    assert alpha_eq(a, b) == alpha_eq_oracle(a, b)


@given(terms)
def test_alpha_eq_is_invariant_under_binder_renaming(t):
    assert alpha_eq(t, canonical(t))


@given(st.lists(terms, min_size=3, max_size=3))
def test_alpha_eq_is_an_equivalence(ts):
    a, b, c = ts
    assert alpha_eq(a, a)
    assert alpha_eq(a, b) == alpha_eq(b, a)
    if alpha_eq(a, b) and alpha_eq(b, c):
        assert alpha_eq(a, c)


# substitution properties


@given(terms, names)
def test_subst_identity(t, x):
    assert alpha_eq(subst(t, x, x), t)


@given(terms, names, names)
def test_subst_free_vars_bound(t, x, y):
    fv = free_vars(t)
    allowed = (fv - {x}) | ({y} if x in fv else set())
    assert free_vars(subst(t, x, y)) <= allowed


@given(terms, names, st.sampled_from(("v", "u")))
def test_subst_respects_alpha(t, x, y):
    assert alpha_eq(subst(canonical(t), x, y), subst(t, x, y))


@settings(max_examples=50)
@given(types, names, names)
def test_subst_into_types_is_capture_avoiding(T, x, y):
    out = subst(T, x, y)
    if x != y and x in free_vars(T):
        assert y in free_vars(out) and x not in free_vars(out)


def test_fresh_name_strips_suffix():
    assert fresh_name("y'", {"y", "y1"}) == "y2"
    assert fresh_name("%3", {"%0"}) == "%1"


# store typings


def test_subst_store_typing_examples():
    assert subst_store_typing({}, "x", "y") == {}
    assert subst_store_typing({0: Sel("x", "A")}, "x", "y") == {0: Sel("y", "A")}
    sigma = {1: RefT(Sel("x", "A")), 2: Top()}
    out = subst_store_typing(sigma, "x", "y")
    assert out == {l: subst(T, "x", "y") for l, T in sigma.items()}
    assert out == {1: RefT(Sel("y", "A")), 2: Top()}
