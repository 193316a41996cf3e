"""Recursive-descent parser for sentences over a represented algebra.

Grammar (whitespace-insensitive, keywords case-sensitive)::

    sentence := quant* body
    quant    := ("sup" | "inf") IDENT ":" sort "."
    sort     := "ball1(A^" INT ")" | "posball1(A)"
    body     := quant body | bterm ("+" bterm)*
    bterm    := NUMBER ["*" batom] | batom
    batom    := "max(" body "," body ")" | "min(" body "," body ")"
              | "tsub(" body "," body ")" | "norm(" term ")" | "(" body ")"
    term     := prod ("+" prod)*
    prod     := factor ("*" factor)*
    factor   := NUMBER "*" factor | IDENT | "one" | "adj(" term ")"
              | "tuple(" term ("," term)* ")" | "sub(" term "," term ")"
              | "(" term ")"
"""

from __future__ import annotations

import re

from ..errors import ParseError, SortError, UnboundVariableError
from .ast import (
    Add, Adj, Affine, Ball, Max, Min, Mul, Norm, One, PosBall, Quant, Scale, Sub, TSub, TupleTerm, Var,
)

KEYWORDS = {"sup", "inf", "one", "adj", "tuple", "sub", "norm", "max", "min", "tsub"}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ball>ball1\s*\(\s*A\s*\^\s*(?P<n>\d+)\s*\))
  | (?P<pos>posball1\s*\(\s*A\s*\))
  | (?P<num>-?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[(),.:+*])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup if m.lastgroup != "n" else "ball"
        if m.group("ball") is not None:
            out.append(("sort", Ball(int(m.group("n"))), pos))
        elif m.group("pos") is not None:
            out.append(("sort", PosBall(), pos))
        elif kind == "num":
            out.append(("num", float(m.group("num")), pos))
        elif kind == "ident":
            out.append(("ident", m.group("ident"), pos))
        elif kind == "punct":
            out.append(("punct", m.group("punct"), pos))
        pos = m.end()
    out.append(("eof", None, len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # helpers -------------------------------------------------------------
    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, what: str):
        kind, val, pos = self.tok
        got = "end of input" if kind == "eof" else repr(val)
        raise ParseError(f"expected {what}, got {got}", pos)

    def at(self, kind, val=None) -> bool:
        k, v, _ = self.tok
        return k == kind and (val is None or v == val)

    def take(self, kind, val=None, what=None):
        if not self.at(kind, val):
            self.error(what or (repr(val) if val is not None else kind))
        t = self.tok
        self.i += 1
        return t

    def keyword(self, word) -> bool:
        return self.at("ident", word) and self.toks[self.i + 1][:2] == ("punct", "(")

    # formulas --------------------------------------------------------------
    def body(self):
        if self.at("ident", "sup") or self.at("ident", "inf"):
            kind = self.take("ident")[1]
            name_tok = self.take("ident", what="variable name")
            name = name_tok[1]
            if name in KEYWORDS:
                raise ParseError(f"keyword {name!r} used as a variable", name_tok[2])
            self.take("punct", ":")
            sort = self.take("sort", what="sort")[1]
            self.take("punct", ".")
            return Quant(kind, name, sort, self.body())
        items = [self.bterm()]
        while self.at("punct", "+"):
            self.i += 1
            items.append(self.bterm())
        if len(items) == 1 and items[0][0] == "bare":
            return items[0][1]
        terms, const = [], 0.0
        for tag, payload in items:
            if tag == "const":
                const += payload
            elif tag == "bare":
                terms.append((1.0, payload))
            else:
                terms.append(payload)
        return Affine(tuple(terms), const)

    def bterm(self):
        if self.at("num"):
            c = self.take("num")[1]
            if self.at("punct", "*"):
                self.i += 1
                return ("scaled", (c, self.batom()))
            return ("const", c)
        return ("bare", self.batom())

    def batom(self):
        for word, ctor in (("max", Max), ("min", Min), ("tsub", TSub)):
            if self.keyword(word):
                self.i += 2
                left = self.body()
                self.take("punct", ",")
                right = self.body()
                self.take("punct", ")")
                return ctor(left, right)
        if self.keyword("norm"):
            self.i += 2
            t = self.term()
            self.take("punct", ")")
            return Norm(t)
        if self.at("punct", "("):
            self.i += 1
            f = self.body()
            self.take("punct", ")")
            return f
        self.error("formula")

    # terms -----------------------------------------------------------------
    def term(self):
        t = self.prod()
        while self.at("punct", "+"):
            self.i += 1
            t = Add(t, self.prod())
        return t

    def prod(self):
        t = self.factor()
        while self.at("punct", "*"):
            self.i += 1
            t = Mul(t, self.factor())
        return t

    def factor(self):
        if self.at("num"):
            c = self.take("num")[1]
            self.take("punct", "*")
            return Scale(c, self.factor())
        if self.at("punct", "("):
            self.i += 1
            t = self.term()
            self.take("punct", ")")
            return t
        if self.keyword("adj"):
            self.i += 2
            t = self.term()
            self.take("punct", ")")
            return Adj(t)
        if self.keyword("sub"):
            self.i += 2
            left = self.term()
            self.take("punct", ",")
            right = self.term()
            self.take("punct", ")")
            return Sub(left, right)
        if self.keyword("tuple"):
            self.i += 2
            items = [self.term()]
            while self.at("punct", ","):
                self.i += 1
                items.append(self.term())
            self.take("punct", ")")
            return TupleTerm(tuple(items))
        if self.at("ident", "one"):
            self.i += 1
            return One()
        if self.at("ident"):
            name = self.tok[1]
            if name in KEYWORDS:
                self.error("term")
            self.i += 1
            return Var(name)
        self.error("term")


# ------------------------------------------------------------------ checking


def term_shape(t, scope: dict) -> tuple:
    """Block shape ``(rows, cols)`` of a term, in units of A."""
    if isinstance(t, Var):
        if t.name not in scope:
            raise UnboundVariableError(f"variable {t.name!r} is not bound")
        sort = scope[t.name]
        return (sort.n, 1) if isinstance(sort, Ball) else (1, 1)
    if isinstance(t, One):
        return (1, 1)
    if isinstance(t, (Add, Sub)):
        a, b = term_shape(t.left, scope), term_shape(t.right, scope)
        if a != b:
            raise SortError(f"cannot add shapes {a} and {b}")
        return a
    if isinstance(t, Scale):
        return term_shape(t.term, scope)
    if isinstance(t, Mul):
        a, b = term_shape(t.left, scope), term_shape(t.right, scope)
        if a[1] != b[0]:
            raise SortError(f"cannot multiply shapes {a} and {b}")
        return (a[0], b[1])
    if isinstance(t, Adj):
        r, c = term_shape(t.term, scope)
        return (c, r)
    if isinstance(t, TupleTerm):
        for item in t.items:
            if term_shape(item, scope) != (1, 1):
                raise SortError("tuple entries must be elements of A")
        return (len(t.items), 1)
    raise TypeError(f"not a term: {t!r}")


def check_formula(f, scope: dict | None = None) -> None:
    scope = dict(scope or {})
    if isinstance(f, Quant):
        if f.var in scope:
            raise SortError(f"variable {f.var!r} is bound twice")
        if isinstance(f.sort, Ball) and f.sort.n < 1:
            raise SortError("ball width must be at least 1")
        scope[f.var] = f.sort
        check_formula(f.body, scope)
    elif isinstance(f, Norm):
        term_shape(f.term, scope)
    elif isinstance(f, (Max, Min, TSub)):
        check_formula(f.left, scope)
        check_formula(f.right, scope)
    elif isinstance(f, Affine):
        for _, g in f.terms:
            check_formula(g, scope)
    else:
        raise TypeError(f"not a formula: {f!r}")


def parse_formula(text: str):
    p = _Parser(text)
    f = p.body()
    if not p.at("eof"):
        p.error("end of input")
    check_formula(f)
    return f
