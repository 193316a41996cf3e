"""Terms and formulas of the metric-structure language, plus a printer.

The printer emits the canonical concrete syntax accepted by
:func:`srkit.logic.parser.parse_formula`; ``parse(to_text(f)) == f`` for
every well-formed AST.
"""

from __future__ import annotations

from dataclasses import dataclass

# --------------------------------------------------------------------- sorts


@dataclass(frozen=True)
class Ball:
    """Unit ball of A^n."""

    n: int = 1

    def __str__(self):
        return f"ball1(A^{self.n})"


@dataclass(frozen=True)
class PosBall:
    """Positive part of the unit ball of A."""

    def __str__(self):
        return "posball1(A)"


# --------------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class One:
    pass


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Scale:
    coef: float
    term: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Adj:
    term: object


@dataclass(frozen=True)
class TupleTerm:
    items: tuple


TERMS = (Var, One, Add, Sub, Scale, Mul, Adj, TupleTerm)

# ------------------------------------------------------------------ formulas


@dataclass(frozen=True)
class Norm:
    term: object


@dataclass(frozen=True)
class Max:
    left: object
    right: object


@dataclass(frozen=True)
class Min:
    left: object
    right: object


@dataclass(frozen=True)
class TSub:
    """Truncated subtraction ``max(left - right, 0)``."""

    left: object
    right: object


@dataclass(frozen=True)
class Affine:
    """``sum(coef * formula) + const``."""

    terms: tuple  # of (float, formula)
    const: float = 0.0


@dataclass(frozen=True)
class Quant:
    kind: str  # "sup" | "inf"
    var: str
    sort: object
    body: object


# ------------------------------------------------------------------- printer


def _num(c: float) -> str:
    return repr(float(c))


def term_text(t, level: int = 1) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, One):
        return "one"
    if isinstance(t, Adj):
        return f"adj({term_text(t.term)})"
    if isinstance(t, Sub):
        return f"sub({term_text(t.left)}, {term_text(t.right)})"
    if isinstance(t, TupleTerm):
        return "tuple(" + ", ".join(term_text(i) for i in t.items) + ")"
    if isinstance(t, Add):
        out = f"{term_text(t.left, 1)} + {term_text(t.right, 2)}"
        return out if level <= 1 else f"({out})"
    if isinstance(t, Mul):
        out = f"{term_text(t.left, 2)} * {term_text(t.right, 3)}"
        return out if level <= 2 else f"({out})"
    if isinstance(t, Scale):
        out = f"{_num(t.coef)} * {term_text(t.term, 3)}"
        return out if level <= 2 else f"({out})"
    raise TypeError(f"not a term: {t!r}")


def to_text(f, nested: bool = False) -> str:
    if isinstance(f, Quant):
        out = f"{f.kind} {f.var}:{f.sort}. {to_text(f.body)}"
        return f"({out})" if nested else out
    if isinstance(f, Norm):
        return f"norm({term_text(f.term)})"
    if isinstance(f, Max):
        return f"max({to_text(f.left)}, {to_text(f.right)})"
    if isinstance(f, Min):
        return f"min({to_text(f.left)}, {to_text(f.right)})"
    if isinstance(f, TSub):
        return f"tsub({to_text(f.left)}, {to_text(f.right)})"
    if isinstance(f, Affine):
        parts = [f"{_num(c)} * {to_text(g, nested=True)}" for c, g in f.terms]
        if f.const != 0.0 or not parts:
            parts.append(_num(f.const))
        out = " + ".join(parts)
        return f"({out})" if nested else out
    raise TypeError(f"not a formula: {f!r}")


def free_variables(node, bound=frozenset()) -> set:
    if isinstance(node, Var):
        return set() if node.name in bound else {node.name}
    if isinstance(node, Quant):
        return free_variables(node.body, bound | {node.var})
    if isinstance(node, (One,)):
        return set()
    if isinstance(node, Affine):
        out = set()
        for _, g in node.terms:
            out |= free_variables(g, bound)
        return out
    if isinstance(node, TupleTerm):
        out = set()
        for i in node.items:
            out |= free_variables(i, bound)
        return out
    out = set()
    for attr in ("term", "left", "right"):
        if hasattr(node, attr):
            out |= free_variables(getattr(node, attr), bound)
    return out


def rename_bound(f, mapping=None, counter=None):
    """Alpha-normalise: bound variables become ``_0, _1, ...`` in binding order."""
    mapping = dict(mapping or {})
    counter = counter if counter is not None else [0]
    if isinstance(f, Quant):
        new = f"_{counter[0]}"
        counter[0] += 1
        inner = dict(mapping)
        inner[f.var] = new
        return Quant(f.kind, new, f.sort, rename_bound(f.body, inner, counter))
    if isinstance(f, Var):
        return Var(mapping.get(f.name, f.name))
    if isinstance(f, One):
        return f
    if isinstance(f, Scale):
        return Scale(f.coef, rename_bound(f.term, mapping, counter))
    if isinstance(f, (Adj, Norm)):
        return type(f)(rename_bound(f.term, mapping, counter))
    if isinstance(f, TupleTerm):
        return TupleTerm(tuple(rename_bound(i, mapping, counter) for i in f.items))
    if isinstance(f, Affine):
        return Affine(tuple((c, rename_bound(g, mapping, counter)) for c, g in f.terms), f.const)
    return type(f)(rename_bound(f.left, mapping, counter), rename_bound(f.right, mapping, counter))
