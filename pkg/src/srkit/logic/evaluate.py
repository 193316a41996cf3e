"""Budgeted interval evaluation of sentences over a represented algebra.

A quantifier-free formula is evaluated to an interval that contains its
true value.  On matrix algebras the interval is a point.  On sampled
fields the variables stand for piecewise-linear interpolants, products are
not piecewise linear, and every term carries a slack bounding the distance
between the true function and the interpolant of its vertex values.

Quantifiers are searched by multistart coordinate descent.  A point found
for a ``sup`` certifies a lower bound and a point found for an ``inf``
certifies an upper bound, provided the body's own bound on that side is
certified; the other side is a heuristic estimate and is flagged as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import linalg
from ..algebra import Algebra, Tuple, boundary_obstruction
from ..errors import BudgetError, ContractViolation, UnboundVariableError
from ..linalg import Profile, dagger
from ..stablerank import isometric_part, repair_directions
from .ast import (
    Add, Adj, Affine, Ball, Max, Min, Mul, Norm, One, PosBall, Quant, Scale, Sub, TSub, TupleTerm, Var,
    free_variables, rename_bound,
)

DEFAULT_STARTS = 32
MIN_INNER_BUDGET = 4
SORT_TOL = 1e-9
INNER_TOL = 1e-3  # inner search stops this close to the certified floor


# ------------------------------------------------------------------ intervals


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_certified: bool = True
    hi_certified: bool = True


@dataclass
class _TermVal:
    arr: np.ndarray  # (F, r k, c k)
    slack: float = 0.0
    _jumps: np.ndarray | None = None
    _bound: float | None = None

    def bound(self) -> float:
        if self._bound is None:
            self._bound = float(np.max(np.atleast_1d(linalg.op_norm(self.arr))))
        return self._bound

    def jumps(self, mesh) -> np.ndarray:
        if self._jumps is None:
            e0, e1 = _edge_index(mesh)
            diff = np.take(self.arr, e1, axis=0) - np.take(self.arr, e0, axis=0)
            self._jumps = np.atleast_1d(linalg.op_norm(diff))
        return self._jumps


_EDGE_CACHE: dict = {}


def _edge_index(mesh):
    key = id(mesh)
    hit = _EDGE_CACHE.get(key)
    if hit is None or hit[0] is not mesh:
        hit = (mesh, np.ascontiguousarray(mesh.edges[:, 0]), np.ascontiguousarray(mesh.edges[:, 1]))
        _EDGE_CACHE[key] = hit
    return hit[1], hit[2]


class _Counter:
    def __init__(self):
        self.count = 0


def _eval_term(t, alg: Algebra, env: dict) -> _TermVal:
    if isinstance(t, Var):
        if t.name not in env:
            raise UnboundVariableError(f"variable {t.name!r} has no value")
        return _TermVal(env[t.name])
    if isinstance(t, One):
        return _TermVal(alg.one())
    if isinstance(t, (Add, Sub)):
        a, b = _eval_term(t.left, alg, env), _eval_term(t.right, alg, env)
        arr = a.arr + b.arr if isinstance(t, Add) else a.arr - b.arr
        return _TermVal(arr, a.slack + b.slack)
    if isinstance(t, Scale):
        a = _eval_term(t.term, alg, env)
        return _TermVal(t.coef * a.arr, abs(t.coef) * a.slack)
    if isinstance(t, Adj):
        a = _eval_term(t.term, alg, env)
        return _TermVal(dagger(a.arr), a.slack)
    if isinstance(t, TupleTerm):
        vals = [_eval_term(i, alg, env) for i in t.items]
        return _TermVal(np.concatenate([v.arr for v in vals], axis=1), math.sqrt(sum(v.slack**2 for v in vals)))
    if isinstance(t, Mul):
        a, b = _eval_term(t.left, alg, env), _eval_term(t.right, alg, env)
        arr = a.arr @ b.arr
        if not alg.is_field:
            return _TermVal(arr)
        mesh = alg.mesh
        defect = mesh.interpolation_constant * float(np.max(a.jumps(mesh) * b.jumps(mesh), initial=0.0))
        slack = defect + a.bound() * b.slack + a.slack * b.bound() + a.slack * b.slack
        return _TermVal(arr, slack)
    raise TypeError(f"not a term: {t!r}")


def _eval_qf(f, alg: Algebra, env: dict) -> Interval:
    """Interval value of a quantifier-free formula."""
    if isinstance(f, Norm):
        v = _eval_term(f.term, alg, env)
        m = v.bound()
        return Interval(m, m + v.slack)
    if isinstance(f, (Max, Min)):
        a, b = _eval_qf(f.left, alg, env), _eval_qf(f.right, alg, env)
        op = max if isinstance(f, Max) else min
        return Interval(op(a.lo, b.lo), op(a.hi, b.hi), a.lo_certified and b.lo_certified,
                        a.hi_certified and b.hi_certified)
    if isinstance(f, TSub):
        a, b = _eval_qf(f.left, alg, env), _eval_qf(f.right, alg, env)
        return _tsub(a, b)
    if isinstance(f, Affine):
        return _affine(f, [_eval_qf(g, alg, env) for _, g in f.terms])
    raise TypeError(f"not quantifier-free: {f!r}")


def _tsub(a: Interval, b: Interval) -> Interval:
    return Interval(max(a.lo - b.hi, 0.0), max(a.hi - b.lo, 0.0), a.lo_certified and b.hi_certified,
                    a.hi_certified and b.lo_certified)


def _affine(f: Affine, vals) -> Interval:
    lo = hi = f.const
    lo_c = hi_c = True
    for (c, _), v in zip(f.terms, vals):
        if c >= 0:
            lo, hi = lo + c * v.lo, hi + c * v.hi
            lo_c, hi_c = lo_c and v.lo_certified, hi_c and v.hi_certified
        else:
            lo, hi = lo + c * v.hi, hi + c * v.lo
            lo_c, hi_c = lo_c and v.hi_certified, hi_c and v.lo_certified
    return Interval(lo, hi, lo_c, hi_c)


# ------------------------------------------------------------------ sorts


def project_ball(alg: Algebra, arr: np.ndarray) -> np.ndarray:
    arr = alg.project(arr) if arr.ndim == 4 else arr
    nrm = float(np.max(np.atleast_1d(linalg.op_norm(arr.reshape(arr.shape[0], -1, arr.shape[-1])))))
    return arr / nrm if nrm > 1.0 else arr


def project_posball(alg: Algebra, arr: np.ndarray) -> np.ndarray:
    """Hermitian part followed by clipping the spectrum to [0, 1]."""
    h = 0.5 * (arr + dagger(arr))
    eig = linalg.herm_eig(h)
    w = np.clip(eig.eigenvalues, 0.0, 1.0)
    u = eig.eigenvectors
    return (u * w[..., None, :]) @ dagger(u)


def check_sort(alg: Algebra, sort, value: np.ndarray) -> None:
    """Raise if ``value`` (stacked) lies outside the sort."""
    k = alg.k
    if isinstance(sort, Ball):
        if value.shape != (alg.n_fibers, sort.n * k, k):
            raise ContractViolation(f"value shape {value.shape} does not match {sort}", "sort shape")
        nrm = float(np.max(np.atleast_1d(linalg.op_norm(value))))
        if nrm > 1 + SORT_TOL:
            raise ContractViolation(f"norm {nrm} exceeds 1 for sort {sort}", "unit ball")
        return
    if value.shape != (alg.n_fibers, k, k):
        raise ContractViolation(f"value shape {value.shape} does not match {sort}", "sort shape")
    if np.max(np.abs(value - dagger(value))) > SORT_TOL:
        raise ContractViolation("value is not Hermitian", "positive part of the unit ball")
    w = linalg.herm_eig(0.5 * (value + dagger(value))).eigenvalues
    if w.min() < -SORT_TOL or w.max() > 1 + SORT_TOL:
        raise ContractViolation("spectrum leaves [0, 1]", "positive part of the unit ball")


def _as_value(alg: Algebra, sort, value) -> np.ndarray:
    if isinstance(value, Tuple):
        return value.stacked()
    arr = np.asarray(value, dtype=np.complex128)
    if isinstance(sort, Ball) and arr.ndim == 4:
        return arr.reshape(arr.shape[0], -1, arr.shape[-1])
    return arr


# ------------------------------------------------------------------ results


@dataclass
class EvalResult:
    lower: float
    upper: float
    lower_certified: bool
    upper_certified: bool
    witnesses: dict = field(default_factory=dict)  # {"lower": {var: array}, "upper": {...}}
    budget_used: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def interval(self) -> tuple:
        return (self.lower, self.upper)

    def in_band(self, lo: float = 0.15, hi: float = 0.85) -> bool:
        """True when the estimate interval meets the forbidden band ``[lo, hi]``."""
        return self.lower <= hi and self.upper >= lo

    def to_doc(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_certified": self.lower_certified,
            "upper_certified": self.upper_certified,
            "budget_used": self.budget_used,
            "notes": self.notes,
        }


def evaluate_at(alg: Algebra, f, assignment: dict) -> Interval:
    """Evaluate a quantifier-free formula at an explicit assignment.

    ``assignment`` maps variable names to ``(sort, value)`` pairs; values
    are checked against their sorts.
    """
    env = {}
    for name, (sort, value) in assignment.items():
        arr = _as_value(alg, sort, value)
        check_sort(alg, sort, arr)
        env[name] = arr
    return _eval_qf(f, alg, env)


# ------------------------------------------------------------------ search


def _directions(alg: Algebra, sort, rng: np.random.Generator, cap: int = 48) -> list:
    """Search directions in the ambient space of a sort, normalised."""
    k = alg.k
    rows = sort.n * k if isinstance(sort, Ball) else k
    dirs = []
    if alg.is_field:
        for _ in range(min(cap, 12)):
            raw = alg.random_raw(rng, rows // k)
            dirs.append(raw.reshape(alg.n_fibers, rows, k))
    else:
        for r in range(rows):
            for c in range(k):
                for ph in (1.0, 1j):
                    d = np.zeros((alg.n_fibers, rows, k), dtype=np.complex128)
                    d[:, r, c] = ph
                    dirs.append(d)
        if hasattr(alg, "basis"):
            dirs = []
            for b in alg.basis:
                for ph in (1.0, 1j):
                    d = np.zeros((1, rows, k), dtype=np.complex128)
                    for blk in range(rows // k):
                        d[0, blk * k:(blk + 1) * k] = ph * b
                    dirs.append(d)
    out = []
    for d in dirs:
        if isinstance(sort, Ball):
            d = alg.project(d.reshape(alg.n_fibers, rows // k, k, k)).reshape(alg.n_fibers, rows, k)
        else:
            d = alg.project(d[:, None]).reshape(alg.n_fibers, k, k)
        nrm = float(np.max(np.atleast_1d(linalg.op_norm(d))))
        if nrm > 1e-12:
            out.append(d / nrm)
    if len(out) > cap:
        idx = rng.choice(len(out), size=cap, replace=False)
        out = [out[i] for i in sorted(idx)]
    return out


def starts_shape(alg: Algebra, sort) -> tuple:
    rows = sort.n * alg.k if isinstance(sort, Ball) else alg.k
    return (alg.n_fibers, rows, alg.k)


def _starts(alg: Algebra, sort, count: int, seed: int, depth: int) -> list:
    k = alg.k
    out = []
    if isinstance(sort, Ball):
        for _, tup in alg.catalog(sort.n):
            out.append(project_ball(alg, tup.stacked()))
    else:
        one = alg.one()
        out.extend([np.zeros_like(one), one, 0.5 * one])
    i = 0
    while len(out) < count:
        rng = np.random.default_rng([seed, depth, i])
        i += 1
        if isinstance(sort, Ball):
            raw = alg.random_raw(rng, sort.n).reshape(alg.n_fibers, sort.n * k, k)
            nrm = float(np.max(np.atleast_1d(linalg.op_norm(raw))))
            out.append(raw / nrm if nrm > 0 else raw)
        else:
            out.append(project_posball(alg, alg.random_raw(rng, 1)[:, 0]))
    return out[:count]


class _Evaluator:
    def __init__(self, alg: Algebra, seed: int):
        self.alg = alg
        self.seed = seed
        self.counter = _Counter()

    def project(self, sort, arr):
        if isinstance(sort, Ball):
            n = sort.n
            return project_ball(self.alg, arr.reshape(arr.shape[0], n, self.alg.k, self.alg.k)).reshape(arr.shape)
        return project_posball(self.alg, arr)

    def eval(self, f, env: dict, budget: int, depth: int = 0):
        """Return ``(Interval, lower_chain, upper_chain)``."""
        if isinstance(f, Quant):
            return self.quant(f, env, budget, depth)
        if not _has_quantifier(f):
            self.counter.count += 1
            return _eval_qf(f, self.alg, env), {}, {}
        if isinstance(f, (Max, Min, TSub)):
            a, la, ua = self.eval(f.left, env, budget, depth + 1)
            b, lb, ub = self.eval(f.right, env, budget, depth + 1)
            if isinstance(f, TSub):
                return _tsub(a, b), {**la, **ub}, {**ua, **lb}
            op = max if isinstance(f, Max) else min
            iv = Interval(op(a.lo, b.lo), op(a.hi, b.hi), a.lo_certified and b.lo_certified,
                          a.hi_certified and b.hi_certified)
            return iv, {**la, **lb}, {**ua, **ub}
        if isinstance(f, Affine):
            vals, lch, uch = [], {}, {}
            for c, g in f.terms:
                v, lg, ug = self.eval(g, env, budget, depth + 1)
                vals.append(v)
                lch.update(lg if c >= 0 else ug)
                uch.update(ug if c >= 0 else lg)
            return _affine(f, vals), lch, uch
        raise TypeError(f"cannot evaluate {f!r}")

    def quant(self, q: Quant, env: dict, budget: int, depth: int):
        maximize = q.kind == "sup"
        n_starts = min(DEFAULT_STARTS, budget)
        per_start = max(1, budget // n_starts)
        inner = max(MIN_INNER_BUDGET, per_start)
        # for an inf, values already bound in the environment are natural candidates (e.g. y = x)
        shape = starts_shape(self.alg, q.sort)
        bound = [] if maximize else [self.project(q.sort, v) for v in env.values() if v.shape == shape]
        starts = (bound + _starts(self.alg, q.sort, n_starts, self.seed, depth))[:n_starts]
        dir_rng = np.random.default_rng([self.seed, depth, 10_000])
        dirs = _directions(self.alg, q.sort, dir_rng)

        best_lo = best_hi = None  # (Interval, point, lower_chain, upper_chain)
        lo_vals, hi_vals = [], []

        def run(point):
            nonlocal best_lo, best_hi
            local = dict(env)
            local[q.var] = point
            iv, lch, uch = self.eval(q.body, local, inner, depth + 1)
            lo_vals.append(iv.lo)
            hi_vals.append(iv.hi)
            if best_lo is None or (iv.lo > best_lo[0].lo if maximize else iv.lo < best_lo[0].lo):
                best_lo = (iv, point, lch, uch)
            if best_hi is None or (iv.hi > best_hi[0].hi if maximize else iv.hi < best_hi[0].hi):
                best_hi = (iv, point, lch, uch)
            return iv.lo if maximize else iv.hi

        for x0 in starts:
            x = x0
            score = run(x)
            evals = 1
            step = 0.25
            while evals < per_start and step > 1e-4:
                improved = False
                for d in dirs:
                    for sgn in (1.0, -1.0):
                        if evals >= per_start:
                            break
                        cand = self.project(q.sort, x + sgn * step * d)
                        s = run(cand)
                        evals += 1
                        if (s > score) if maximize else (s < score):
                            x, score, improved = cand, s, True
                            break
                    if evals >= per_start:
                        break
                if not improved:
                    step *= 0.5

        if maximize:
            # any point certifies the lower side of a sup
            iv_lo, iv_hi = best_lo[0], best_hi[0]
            out = Interval(iv_lo.lo, max(iv_hi.hi, iv_lo.lo), iv_lo.lo_certified, False)
            lchain = {q.var: (q.sort, best_lo[1]), **best_lo[2]}
            uchain = {q.var: (q.sort, best_hi[1]), **best_hi[3]}
        else:
            iv_lo, iv_hi = best_lo[0], best_hi[0]
            out = Interval(min(iv_lo.lo, iv_hi.hi), iv_hi.hi, False, iv_hi.hi_certified)
            lchain = {q.var: (q.sort, best_lo[1]), **best_lo[2]}
            uchain = {q.var: (q.sort, best_hi[1]), **best_hi[3]}
        return out, lchain, uchain


def _has_quantifier(f) -> bool:
    if isinstance(f, Quant):
        return True
    if isinstance(f, (Max, Min, TSub)):
        return _has_quantifier(f.left) or _has_quantifier(f.right)
    if isinstance(f, Affine):
        return any(_has_quantifier(g) for _, g in f.terms)
    return False


# ------------------------------------------------------------------ phi_n


def build_phi_n(n: int) -> Quant:
    """``sup_x inf_v inf_y max(||x - v y||, ||v* v - 1||)`` over A^n."""
    if n < 1:
        raise ContractViolation("n must be at least 1", "n >= 1")
    x, v, y = Var("x"), Var("v"), Var("y")
    body = Max(Norm(Sub(x, Mul(v, y))), Norm(Sub(Mul(Adj(v), v), One())))
    return Quant("sup", "x", Ball(n), Quant("inf", "v", Ball(n), Quant("inf", "y", PosBall(), body)))


def match_phi_n(f) -> int | None:
    """Width ``n`` if ``f`` is phi_n up to renaming of bound variables."""
    if not (isinstance(f, Quant) and isinstance(f.sort, Ball)):
        return None
    n = f.sort.n
    return n if rename_bound(f) == rename_bound(build_phi_n(n)) else None


def inner_inf_candidate(x: Tuple, eps: float = 1e-3):
    """Warm start ``(v, y)`` for the inner infimum of phi_n at ``x``.

    ``y = |x|`` clipped to the unit ball and ``v = x |x|^{-1}`` regularised
    below ``eps``; when ``|x| >= eps`` this is an exact decomposition.
    """
    v = linalg.right_mult_calc(x, Profile.reg_sign(eps))
    y = linalg.modulus_calc(x.stacked(), Profile.clip(0.0, 1.0))
    return v, y


def phi_body_value(alg: Algebra, n: int, x, v, y) -> Interval:
    body = build_phi_n(n).body.body.body
    return evaluate_at(alg, body, {"x": (Ball(n), x), "v": (Ball(n), v), "y": (PosBall(), y)})


_MU_LADDER = (1e-4, 1e-3, 3e-3, 0.01, 0.02, 0.03, 0.045, 0.06, 0.08, 0.1, 0.15, 0.2, 0.3, 0.5)


class _PhiInner:
    """Certified upper bounds for ``inf_v inf_y`` at a fixed ``x``."""

    def __init__(self, alg: Algebra, n: int):
        self.alg = alg
        self.n = n
        self.body = build_phi_n(n).body.body.body
        self.dirs = repair_directions(alg, n)
        self.evals = 0

    def value(self, x: np.ndarray, v: np.ndarray, y: np.ndarray) -> Interval:
        self.evals += 1
        return _eval_qf(self.body, self.alg, {"x": x, "v": v, "y": y})

    def consider(self, best, x, v, y, how):
        v = project_ball(self.alg, v.reshape(v.shape[0], self.n, self.alg.k, self.alg.k)).reshape(v.shape)
        iv = self.value(x, v, y)
        if best is None or iv.hi < best[0].hi:
            best = (iv, v, y, how)
        self.last = iv.hi
        return best

    def polar_candidate(self, x: np.ndarray, g: np.ndarray):
        smin = linalg.singular_extremes(g)[1]
        if np.min(smin) <= 1e-9:
            return None
        v = isometric_part(Tuple(self.alg, g.reshape(g.shape[0], self.n, self.alg.k, self.alg.k))).stacked()
        y = project_posball(self.alg, dagger(v) @ x)
        return v, y

    def search(self, x: np.ndarray, floor: float = 0.0):
        """Best certified ``(v, y)``; stops once within ``INNER_TOL`` of ``floor``."""
        target = floor + INNER_TOL
        for best in self._candidates(x):
            if best[0].hi <= target:
                break
        return best

    def _candidates(self, x: np.ndarray):
        alg, n, k = self.alg, self.n, self.alg.k
        one = alg.one()
        best = self.consider(None, x, np.zeros_like(x), np.zeros_like(one), "zero")
        yield best
        best = self.consider(best, x, alg.unit_tuple(n).stacked(), np.zeros_like(one), "unit")
        yield best
        xt = Tuple(alg, x.reshape(x.shape[0], n, k, k))
        for eps in (1e-3, 1e-2, 1e-1):
            v, y = inner_inf_candidate(xt, eps)
            best = self.consider(best, x, v.stacked(), y, f"warm:{eps:g}")
            yield best
        for name, d in self.dirs:
            ds = d.stacked()
            row = []
            for mu in _MU_LADDER:
                cand = self.polar_candidate(x, x + mu * ds)
                if cand is None:
                    row.append(math.inf)
                    continue
                best = self.consider(best, x, cand[0], cand[1], f"polar:{name}:{mu:g}")
                yield best
                row.append(self.last)
                if len(row) >= 3 and row[-1] > 2.0 * min(row) and row[-2] > min(row):
                    break  # past the minimum along this direction
            # refine the repair size around the best ladder point
            j = int(np.argmin(row))
            if math.isfinite(row[j]):
                lo = _MU_LADDER[max(j - 1, 0)]
                hi = _MU_LADDER[min(j + 1, len(_MU_LADDER) - 1)]
                for mu in np.geomspace(lo, hi, 6)[1:-1]:
                    cand = self.polar_candidate(x, x + mu * ds)
                    if cand is not None:
                        best = self.consider(best, x, cand[0], cand[1], f"polar:{name}:{mu:.4g}")
                        yield best


def _phi_lower_at(alg: Algebra, n: int, x: np.ndarray) -> tuple:
    """Certified lower bound on ``inf_v inf_y`` at ``x``.

    If the inner value were below ``min(1, d)`` with ``d = dist(x, Lg_n)``,
    then ``||v* v - 1|| < 1`` makes ``v`` left-invertible and
    ``v (y + t 1)`` would be a left-invertible tuple closer to ``x`` than
    ``d``.  The boundary winding number bounds ``d`` from below.
    """
    if not alg.supports_winding(n):
        return 0.0, "trivial-zero"
    obs = boundary_obstruction(Tuple(alg, x.reshape(x.shape[0], n, alg.k, alg.k)))
    if obs is None or obs.winding == 0:
        return 0.0, "trivial-zero"
    return min(1.0, obs.rho), "winding"


def _eval_phi(alg: Algebra, n: int, budget: int, seed: int) -> EvalResult:
    n_starts = min(DEFAULT_STARTS, budget)
    per_start = max(1, budget // n_starts)
    starts = _starts(alg, Ball(n), n_starts, seed, 0)
    inner = _PhiInner(alg, n)
    dirs = _directions(alg, Ball(n), np.random.default_rng([seed, 0, 10_000]))
    best_lower = (-1.0, None, "")
    best_upper = (-1.0, None)
    outer = 0

    def visit(x):
        nonlocal best_lower, best_upper, outer
        outer += 1
        lo, method = _phi_lower_at(alg, n, x)
        if lo > best_lower[0]:
            best_lower = (lo, x, method)
        res = inner.search(x, lo)
        if res[0].hi > best_upper[0]:
            best_upper = (res[0].hi, (x, res))
        return res[0].hi

    for x0 in starts:
        x = x0
        score = visit(x)
        evals, step = 1, 0.25
        while evals < per_start and step > 1e-3:
            improved = False
            for d in dirs:
                if evals >= per_start:
                    break
                cand = project_ball(alg, (x + step * d).reshape(x.shape[0], n, alg.k, alg.k)).reshape(x.shape)
                s = visit(cand)
                evals += 1
                if s > score:
                    x, score, improved = cand, s, True
                    break
            if not improved:
                step *= 0.5

    lower, lx, method = best_lower
    upper, (ux, res) = best_upper
    iv, v, y, how = res
    upper = max(upper, lower)
    return EvalResult(
        lower,
        upper,
        True,
        False,
        {"lower": {"x": lx}, "upper": {"x": ux, "v": v, "y": y}},
        outer,
        {"structure": f"phi_{n}", "lower_method": method, "inner_method": how,
         "inner_evaluations": inner.evals},
    )


# ------------------------------------------------------------------ entry


def eval_formula(alg: Algebra, f, budget: int = 32, *, seed: int = 0, specialize: bool = True) -> EvalResult:
    """Interval estimate of a sentence's value in ``alg``."""
    if budget is None or int(budget) <= 0:
        raise BudgetError("budget must be positive")
    budget = int(budget)
    free = free_variables(f)
    if free:
        raise UnboundVariableError(f"formula has free variables {sorted(free)}")
    n = match_phi_n(f) if specialize else None
    if n is not None:
        return _eval_phi(alg, n, budget, seed)
    ev = _Evaluator(alg, seed)
    iv, lch, uch = ev.eval(f, {}, budget)
    return EvalResult(
        iv.lo, max(iv.hi, iv.lo), iv.lo_certified, iv.hi_certified,
        {"lower": {k: v for k, (_, v) in _outer(f, lch).items()},
         "upper": {k: v for k, (_, v) in _outer(f, uch).items()}},
        ev.counter.count,
        {"structure": "generic"},
    )


def _outer(f, chain: dict) -> dict:
    names = []
    g = f
    while isinstance(g, Quant):
        names.append(g.var)
        g = g.body
    return {k: chain[k] for k in names if k in chain}
