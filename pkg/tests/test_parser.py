import pytest
from hypothesis import given

from mdot.parser import (
    LocationLiteralError, MdotSyntaxError, ParseError, ScopeError, SourceFile,
    parse, parse_type, pretty,
)
from mdot.syntax import (
    All, Lam, Let, Loc, RefNew, Top, Var, alpha_eq, desugar,
)

from conftest import CORPUS
from strategies import NAMES, terms, types

PROGRAM_P = "let id = lambda(x: Top) x in ref id (all(x: Top) Top)"


def test_parses_reference_prefix():
    t = parse(PROGRAM_P)
    assert t == Let("id", Lam("x", Top(), Var("x")),
                    RefNew("id", All("x", Top(), Top())))


def test_definition_syntax_in_type_position_is_rejected():
    with pytest.raises(MdotSyntaxError) as e:
        parse("nu(a: {A = Top})")
    assert (e.value.line, e.value.col) == (1, 10)
    assert "':'" in e.value.expected


def test_unbound_variable_is_a_scope_error():
    with pytest.raises(ScopeError) as e:
        parse("!r")
    assert e.value.name == "r"


def test_location_literals_are_rejected():
    with pytest.raises(LocationLiteralError):
        parse("let x = <loc 3> in x")


def test_reserved_names_are_rejected():
    with pytest.raises(MdotSyntaxError):
        parse("let %0 = lambda(x: Top) x in %0")


def test_error_carries_origin():
    with pytest.raises(ParseError) as e:
        parse(SourceFile("let x = lambda(y: Top) y in", "prog.mdot"))
    assert str(e.value).startswith("prog.mdot:1:")


def test_comments_are_skipped():
    assert parse("// a comment\nlambda(x: Top) x") == Lam("x", Top(), Var("x"))


def test_pretty_leaves():
    assert pretty(Top()) == "Top"
    assert pretty(Loc(3)) == "<loc 3>"


def test_pretty_reparses_reference_program():
    t = parse((CORPUS / "id_ref.mdot").read_text())
    assert alpha_eq(parse(pretty(t)), t)


def test_corpus_parses(corpus):
    assert len(corpus) == 7


def test_corpus_round_trips(corpus):
    for _, t in corpus:
        assert alpha_eq(parse(pretty(t)), t)
        core = desugar(t)
        assert alpha_eq(parse(pretty(core, parseable=True)), core)


def test_primes_in_names():
    assert parse("let id' = lambda(x: Top) x in id'").var == "id'"


@given(terms)
def test_round_trip_raw_terms(t):
    assert alpha_eq(parse(pretty(t), scope=NAMES), t)


@given(types)
def test_round_trip_raw_types(T):
    assert alpha_eq(parse_type(pretty(T), scope=NAMES), T)
