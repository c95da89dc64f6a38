"""Concrete ASCII syntax: tokenizer, recursive-descent parser, printer.

The grammar is documented in docs/grammar.md. Type sugar ({A}, {A: T},
{A <: T}, {D1; D2}) expands while parsing; term sugar is kept as surface
nodes for `syntax.desugar`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    All, And, AndDef, App, Asgn, Bot, Deref, FieldDecl, FieldDef, FieldSel,
    Lam, Let, Loc, Obj, Rec, RefNew, RefT, SApp, SAsgn, SDeref, SRef, SSel,
    SSeq, Sel, Top, TypeDecl, TypeDef, Var, unreserve,
)

KEYWORDS = {"let", "in", "lambda", "nu", "mu", "all", "ref", "Ref", "Top", "Bot"}


class ParseError(Exception):
    def __init__(self, message, line=0, col=0, origin="<input>"):
        super().__init__(f"{origin}:{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.origin = origin


class MdotSyntaxError(ParseError):
    def __init__(self, message, line=0, col=0, origin="<input>", expected=()):
        super().__init__(message, line, col, origin)
        self.expected = frozenset(expected)


class ScopeError(ParseError):
    def __init__(self, name, line=0, col=0, origin="<input>"):
        super().__init__(f"unbound variable {name!r}", line, col, origin)
        self.name = name


class LocationLiteralError(ParseError):
    pass


@dataclass(frozen=True)
class SourceFile:
    text: str
    origin: str = "<repl>"

    @classmethod
    def read(cls, path):
        with open(path, encoding="utf-8") as f:
            return cls(f.read(), str(path))


@dataclass(frozen=True)
class Token:
    kind: str  # ident, sym, loc, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*)
  | (?P<loc><\s*loc\s+\d+\s*>)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\.\.|/\\|:=|<:|[(){}:=.;!])
""", re.VERBOSE)


def tokenize(text, origin="<input>"):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if ch == "%":
                raise MdotSyntaxError("names starting with '%' are reserved",
                                      line, col, origin)
            raise MdotSyntaxError(f"unexpected character {ch!r}", line, col, origin)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _is_field_label(s):
    return s[:1].islower()


def _is_type_label(s):
    return s[:1].isupper()


class Parser:
    def __init__(self, text, origin="<input>", scope=()):
        self.origin = origin
        self.toks = tokenize(text, origin)
        self.i = 0
        self.scope = list(scope)

    # -- token helpers

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, k=0):
        t = self.peek(k)
        return t.kind in ("sym", "ident") and t.text == text

    def advance(self):
        t = self.peek()
        self.i += 1
        return t

    def fail(self, expected, tok=None):
        tok = tok or self.peek()
        if tok.kind == "loc":
            raise LocationLiteralError("location literals cannot appear in source",
                                       tok.line, tok.col, self.origin)
        found = tok.text or "end of input"
        exp = sorted(expected)
        raise MdotSyntaxError(f"expected {' or '.join(exp)}, found {found!r}",
                              tok.line, tok.col, self.origin, exp)

    def expect(self, text):
        if not self.at(text):
            self.fail({repr(text)})
        return self.advance()

    def ident(self, what="identifier"):
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            self.fail({what})
        return self.advance()

    def var_ref(self):
        t = self.ident("variable")
        if t.text not in self.scope:
            raise ScopeError(t.text, t.line, t.col, self.origin)
        return t.text

    def binder(self):
        return self.ident("variable").text

    # -- entry points

    def parse_program(self):
        t = self.term()
        if self.peek().kind != "eof":
            self.fail({"end of input", "';'", "':='"})
        return t

    def parse_type_only(self):
        T = self.type_()
        if self.peek().kind != "eof":
            self.fail({"end of input", "'/\\'"})
        return T

    # -- types

    def type_(self):
        T = self.type_prefix()
        while self.at("/\\"):
            self.advance()
            T = And(T, self.type_prefix())
        return T

    def type_prefix(self):
        if self.at("Ref"):
            self.advance()
            return RefT(self.type_prefix())
        if self.at("all"):
            self.advance()
            self.expect("(")
            x = self.binder()
            self.expect(":")
            S = self.type_()
            self.expect(")")
            self.scope.append(x)
            T = self.type_prefix()
            self.scope.pop()
            return All(x, S, T)
        return self.type_atom()

    def type_atom(self):
        t = self.peek()
        if self.at("Top"):
            self.advance()
            return Top()
        if self.at("Bot"):
            self.advance()
            return Bot()
        if self.at("("):
            self.advance()
            T = self.type_()
            self.expect(")")
            return T
        if self.at("mu"):
            self.advance()
            self.expect("(")
            x = self.binder()
            self.expect(":")
            self.scope.append(x)
            T = self.type_()
            self.scope.pop()
            self.expect(")")
            return Rec(x, T)
        if self.at("{"):
            self.advance()
            T = self.decl()
            while self.at(";"):
                self.advance()
                T = And(T, self.decl())
            self.expect("}")
            return T
        if t.kind == "ident" and t.text not in KEYWORDS:
            x = self.var_ref()
            self.expect(".")
            A = self.ident("type label")
            if not _is_type_label(A.text):
                self.fail({"type label (uppercase)"}, A)
            return Sel(x, A.text)
        self.fail({"type"})

    def decl(self):
        lab = self.ident("label")
        if _is_field_label(lab.text):
            if not self.at(":"):
                self.fail({"':'"})
            self.advance()
            return FieldDecl(lab.text, self.type_())
        if not _is_type_label(lab.text):
            self.fail({"label"}, lab)
        A = lab.text
        if self.at(":"):
            self.advance()
            lo = self.type_()
            if self.at(".."):
                self.advance()
                return TypeDecl(A, lo, self.type_())
            return TypeDecl(A, lo, lo)
        if self.at("<:"):
            self.advance()
            return TypeDecl(A, Bot(), self.type_())
        if self.at("}") or self.at(";"):
            return TypeDecl(A, Bot(), Top())
        self.fail({"':'", "'<:'", "'}'"})

    # -- terms

    def term(self):
        t = self.asgn()
        # `; label =` continues a definition list, not a sequence
        if self.at(";") and not (self.peek(1).kind == "ident" and self.at("=", 2)):
            self.advance()
            return SSeq(t, self.term())
        return t

    def asgn(self):
        t = self.app()
        if self.at(":="):
            self.advance()
            u = self.app()
            if isinstance(t, Var) and isinstance(u, Var):
                return Asgn(t.name, u.name)
            return SAsgn(t, u)
        return t

    def _starts_atom(self):
        t = self.peek()
        if t.kind == "loc":
            return True
        if t.kind == "ident":
            return t.text not in KEYWORDS or t.text in ("let", "lambda", "nu", "ref")
        return t.text in ("(", "!")

    def app(self):
        f = self.postfix()
        while self._starts_atom():
            a = self.postfix()
            if isinstance(f, Var) and isinstance(a, Var):
                f = App(f.name, a.name)
            else:
                f = SApp(f, a)
        return f

    def postfix(self):
        t = self.unary()
        while self.at("."):
            self.advance()
            a = self.ident("field label")
            if not _is_field_label(a.text):
                self.fail({"field label (lowercase)"}, a)
            t = FieldSel(t.name, a.text) if isinstance(t, Var) else SSel(t, a.text)
        return t

    def unary(self):
        if self.at("!"):
            self.advance()
            t = self.unary()
            return Deref(t.name) if isinstance(t, Var) else SDeref(t)
        return self.atom()

    def atom(self):
        t = self.peek()
        if t.kind == "loc":
            self.fail(set())
        if self.at("("):
            self.advance()
            inner = self.term()
            self.expect(")")
            return inner
        if self.at("let"):
            self.advance()
            x = self.binder()
            self.expect("=")
            s = self.term()
            self.expect("in")
            self.scope.append(x)
            u = self.term()
            self.scope.pop()
            return Let(x, s, u)
        if self.at("lambda"):
            self.advance()
            self.expect("(")
            x = self.binder()
            self.expect(":")
            S = self.type_()
            self.expect(")")
            self.scope.append(x)
            body = self.term()
            self.scope.pop()
            return Lam(x, S, body)
        if self.at("nu"):
            self.advance()
            self.expect("(")
            x = self.binder()
            self.scope.append(x)
            T = None
            if self.at(":"):
                self.advance()
                T = self.type_()
            self.expect(")")
            d = self.defs()
            if T is None:
                self.expect(":")
                T = self.type_()
            self.scope.pop()
            return Obj(x, T, d)
        if self.at("ref"):
            self.advance()
            s = self.postfix()
            T = self.type_()
            return RefNew(s.name, T) if isinstance(s, Var) else SRef(s, T)
        if t.kind == "ident" and t.text not in KEYWORDS:
            return Var(self.var_ref())
        self.fail({"term"})

    def defs(self):
        d = self.def_atom()
        while self.at("/\\"):
            self.advance()
            d = AndDef(d, self.def_atom())
        return d

    def def_atom(self):
        if self.at("("):
            self.advance()
            d = self.defs()
            self.expect(")")
            return d
        self.expect("{")
        d = self.def_member()
        while self.at(";"):
            self.advance()
            d = AndDef(d, self.def_member())
        self.expect("}")
        return d

    def def_member(self):
        lab = self.ident("label")
        self.expect("=")
        if _is_field_label(lab.text):
            return FieldDef(lab.text, self.term())
        if _is_type_label(lab.text):
            return TypeDef(lab.text, self.type_())
        self.fail({"label"}, lab)


def parse(src, origin=None, scope=()):
    """Parse a program (a `SourceFile` or a string) into a surface term."""
    if isinstance(src, SourceFile):
        text, origin = src.text, src.origin
    else:
        text, origin = src, origin or "<input>"
    return Parser(text, origin, scope).parse_program()


def parse_type(text, scope=()):
    return Parser(text, "<type>", scope).parse_type_only()


# ----------------------------------------------------------------------
# Printing


def pretty(t, parseable=False) -> str:
    """Render a term, type or definition.

    Reserved `%k` binders are printed as-is unless `parseable` is set, in
    which case they are renamed so the output reparses.
    """
    if parseable:
        t = unreserve(t)
    if isinstance(t, (Top, Bot, FieldDecl, TypeDecl, Sel, And, Rec, All, RefT)):
        return _ty(t, 0)
    if isinstance(t, (FieldDef, TypeDef, AndDef)):
        return _defs(t)
    return _tm(t, 0)


def _paren(s, cond):
    return f"({s})" if cond else s


def _ty(T, prec):
    # prec: 0 intersection level, 1 prefix level, 2 atom
    match T:
        case Top():
            return "Top"
        case Bot():
            return "Bot"
        case FieldDecl(a, U):
            return f"{{{a}: {_ty(U, 0)}}}"
        case TypeDecl(A, S, U):
            return f"{{{A}: {_ty(S, 0)}..{_ty(U, 0)}}}"
        case Sel(x, A):
            return f"{x}.{A}"
        case And(S, U):
            return _paren(f"{_ty(S, 0)} /\\ {_ty(U, 1)}", prec > 0)
        case Rec(x, U):
            return f"mu({x}: {_ty(U, 0)})"
        case All(x, S, U):
            return _paren(f"all({x}: {_ty(S, 0)}) {_ty(U, 1)}", prec > 1)
        case RefT(U):
            return _paren(f"Ref {_ty(U, 1)}", prec > 1)
    raise TypeError(f"not a type: {T!r}")


def _defs(d, top=True):
    match d:
        case FieldDef(a, t):
            return f"{{{a} = {_tm(t, 0)}}}"
        case TypeDef(A, T):
            return f"{{{A} = {_ty(T, 0)}}}"
        case AndDef(l, r):
            right = _defs(r, False)
            if isinstance(r, AndDef):
                right = f"({right})"
            return f"{_defs(l, False)} /\\ {right}"
    raise TypeError(f"not a definition: {d!r}")


def _tm(t, prec):
    # prec: 0 sequence, 1 assignment, 2 application, 3 postfix, 4 atom
    match t:
        case Var(x):
            return x
        case Loc(l):
            return f"<loc {l}>"
        case FieldSel(x, a):
            return _paren(f"{x}.{a}", prec > 3)
        case App(x, y):
            return _paren(f"{x} {y}", prec > 2)
        case Deref(x):
            return f"!{x}"
        case Asgn(x, y):
            return _paren(f"{x} := {y}", prec > 1)
        case RefNew(x, T):
            return _paren(f"ref {x} {_ty(T, 0)}", prec > 0)
        case Let(x, s, u):
            return _paren(f"let {x} = {_tm(s, 0)} in {_tm(u, 0)}", prec > 0)
        case Lam(x, S, body):
            return _paren(f"lambda({x}: {_ty(S, 0)}) {_tm(body, 0)}", prec > 0)
        case Obj(x, T, d):
            return _paren(f"nu({x}: {_ty(T, 0)}) {_defs(d)}", prec > 0)
        case SApp(f, a):
            return _paren(f"{_tm(f, 2)} {_tm(a, 3)}", prec > 2)
        case SSel(s, a):
            return _paren(f"{_tm(s, 3)}.{a}", prec > 3)
        case SDeref(s):
            return f"!{_tm(s, 4)}"
        case SAsgn(s, u):
            return _paren(f"{_tm(s, 2)} := {_tm(u, 2)}", prec > 1)
        case SSeq(s, u):
            return _paren(f"{_tm(s, 1)}; {_tm(u, 0)}", prec > 0)
        case SRef(s, T):
            return _paren(f"ref {_tm(s, 3)} {_ty(T, 0)}", prec > 0)
    raise TypeError(f"not a term: {t!r}")

