"""Sentences of continuous logic over represented algebras."""

from .ast import (
    Add, Adj, Affine, Ball, Max, Min, Mul, Norm, One, PosBall, Quant, Scale, Sub, TSub, TupleTerm, Var,
    free_variables, rename_bound, to_text,
)
from .evaluate import (
    EvalResult, Interval, build_phi_n, eval_formula, evaluate_at, inner_inf_candidate, match_phi_n,
    phi_body_value,
)
from .parser import parse_formula, tokenize

__all__ = [
    "Add", "Adj", "Affine", "Ball", "EvalResult", "Interval", "Max", "Min", "Mul", "Norm", "One",
    "PosBall", "Quant", "Scale", "Sub", "TSub", "TupleTerm", "Var", "build_phi_n", "eval_formula",
    "evaluate_at", "free_variables", "inner_inf_candidate", "match_phi_n", "parse_formula",
    "phi_body_value", "rename_bound", "to_text", "tokenize",
]
