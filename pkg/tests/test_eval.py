import pytest
from hypothesis import given, settings, strategies as st

from mdot.eval import (
    AnswerReached, BudgetExceeded, MachineState, Stack, Store, Stepped, Stuck,
    fresh_location, is_answer, reify_stack, run, sigma_along, step_context,
    step_stack, trace_records,
)
from mdot.harness import GenConfig, generate_typed_term
from mdot.parser import parse
from mdot.syntax import (
    All, App, Asgn, Deref, Lam, Let, Loc, RefNew, Top, Var, alpha_eq, desugar,
)

from conftest import load

ID = Lam("x", Top(), Var("x"))


def state(term, stack=(), store=()):
    return MachineState(term, Store(tuple(store)), Stack(tuple(stack)))


# answers


def test_answers():
    assert is_answer(Var("x"))
    assert is_answer(Let("x", Lam("y", Top(), Var("y")), Var("x")))
    assert not is_answer(Let("x", Var("y"), Var("x")))
    assert not is_answer(App("f", "x"))


def test_fresh_location_takes_smallest_gap():
    assert fresh_location({}) == 0
    assert fresh_location({0: "x", 1: "y"}) == 2
    store = {0: "x", 2: "y"}
    assert fresh_location(store) == 1 == min(l for l in range(4) if l not in store)


def test_reify():
    t = App("f", "y")
    assert reify_stack(state(t)) == t
    assert reify_stack(state(t, [("f", ID)])) == Let("f", ID, t)


# stack machine rules


def test_let_value_moves_binding_to_stack():
    out = step_stack(state(Let("x", ID, Var("x"))))
    assert out.rule == "Let-Value"
    assert out.state.stack.bindings == (("x", ID),) and out.state.term == Var("x")


def test_let_value_renames_clashing_binder():
    out = step_stack(state(Let("x", ID, Var("x")), [("x", ID)]))
    (_, _), (x2, _) = out.state.stack.bindings
    assert x2 != "x" and out.state.term == Var(x2)


def test_ref_allocates_fresh_location():
    out = step_stack(state(RefNew("x", Top()), [("x", ID)], [(0, "x")]))
    assert out.rule == "Ref" and out.state.term == Loc(1)
    assert dict(out.state.store) == {0: "x", 1: "x"} and out.alloc == (1, Top())


def test_deref_reads_store():
    s = state(Deref("r"), [("r", Loc(0))], [(0, "y")])
    out = step_stack(s)
    assert out.rule == "Deref" and out.state.term == Var("y")
    assert out.state.store == s.store


def test_store_writes_the_source_variable():
    out = step_stack(state(Asgn("r", "z"), [("r", Loc(0))], [(0, "y")]))
    assert out.rule == "Store" and out.state.term == Var("z")
    assert dict(out.state.store) == {0: "z"}


def test_apply_substitutes_argument():
    out = step_stack(state(App("f", "a"), [("f", ID)]))
    assert out.rule == "Apply" and out.state.term == Var("a")


def test_project_renames_self():
    o = parse("nu(s: {a: all(x: Top) Top}) {a = lambda(x: Top) x}")
    out = step_stack(state(parse("o.a", scope=["o"]), [("o", o)]))
    assert out.rule == "Project" and alpha_eq(out.state.term, ID)


def test_ctx_steps_inside_let_head():
    out = step_stack(state(Let("y", App("f", "a"), Var("y")), [("f", ID)]))
    assert out.rule == "Apply" and out.depth == 1
    assert out.state.term == Let("y", Var("a"), Var("y"))


@pytest.mark.parametrize("term, stack, reason", [
    (App("r", "r"), [("r", Loc(0))], "expected-lambda"),
    (Deref("f"), [("f", ID)], "expected-location"),
    (Deref("r"), [("r", Loc(5))], "unbound-location"),
    (parse("f.a", scope=["f"]), [("f", ID)], "expected-object-with-field"),
])
def test_stuck_reasons(term, stack, reason):
    out = step_stack(state(term, stack, [(0, "r")]))
    assert isinstance(out, Stuck) and out.reason == reason


# context machine rules


def test_let_let_reassociates():
    t = Let("x", Let("y", App("f", "a"), Var("y")), Var("x"))
    out = step_context(state(Let("f", ID, t)))
    assert out.rule == "Let-Let"
    assert out.state.term == Let("f", ID, Let("y", App("f", "a"), Let("x", Var("y"), Var("x"))))


def test_context_apply_uses_enclosing_binding():
    out = step_context(state(Let("f", ID, Let("y", App("f", "a"), Var("y")))))
    assert out.rule == "Apply"
    assert out.state.term == Let("f", ID, Let("y", Var("a"), Var("y")))


def test_context_ref():
    out = step_context(state(Let("x", ID, RefNew("x", Top()))))
    assert out.rule == "Ref" and out.state.term == Let("x", ID, Loc(0))
    assert dict(out.state.store) == {0: "x"}


# whole runs


def test_value_is_an_answer_in_zero_steps():
    res = run(ID)
    assert res.answered and res.steps == ()


def test_fig6_run():
    res = run(desugar(load("fig6.mdot")))
    assert res.answered
    final = res.final
    assert final.term == Var("y")
    assert dict(final.store) == {0: "y"}
    assert [x for x, _ in final.stack] == ["f", "y", "r"]
    assert is_answer(res.answer)


def test_reference_program_run():
    res = run(desugar(load("id_ref.mdot")))
    assert res.final.term == Var("id'") and dict(res.final.store) == {0: "id'"}
    assert sigma_along(res)[-1] == {0: All("x", Top(), Top())}


def test_budget():
    t = desugar(parse("let f = lambda(x: Top) let g = x in g in f f"))
    with pytest.raises(BudgetExceeded):
        run(t, max_steps=1)
    res = run(t, max_steps=1, raise_on_budget=False)
    assert res.outcome is None and len(res.steps) == 1


def test_trace_records_are_complete():
    recs = trace_records(run(desugar(load("fig6.mdot"))))
    assert set(recs[0]) == {"step", "rule", "term", "stack", "store", "sigma"}
    assert recs[-1]["store"] == {"0": "y"} and recs[-1]["sigma"] == {"0": "Top"}


# invariants over generated programs

seeds = st.integers(0, 100_000)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_machine_invariants(seed):
    t, _ = generate_typed_term(GenConfig(seed=seed))
    res = run(t, max_steps=500, raise_on_budget=False)
    prev = res.initial
    for st_ in res.steps:
        s = st_.state
        # the stack only grows
        assert prev.stack.prefix_of(s.stack)
        # at most one store entry changes, and only at Ref or Store
        changed = {l for l in set(prev.store) | set(s.store)
                   if prev.store.get(l) != s.store.get(l)}
        assert len(changed) <= 1
        if changed:
            assert st_.rule in ("Ref", "Store")
        # the store only mentions stack variables
        assert set(s.store.values()) <= s.stack.domain()
        prev = s
    if res.answered:
        assert is_answer(res.answer)
        assert isinstance(step_stack(res.final), AnswerReached)


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from(["stack", "context"]))
def test_determinism(seed, semantics):
    t, _ = generate_typed_term(GenConfig(seed=seed))
    a = run(t, semantics, 500, raise_on_budget=False)
    b = run(t, semantics, 500, raise_on_budget=False)
    assert a.rules == b.rules and a.final == b.final
    for st_ in a.steps:
        assert isinstance(st_, Stepped)
