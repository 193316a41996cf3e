"""Kadison-Kastler distance between subalgebras of M_d and the stability experiment.

``d_KK(A, B)`` is the Hausdorff distance between the unit balls.  The
inner problem ``inf_{y in B_1} ||x - y||`` is convex; projected subgradient
descent gives a feasible ``y`` (an upper bound) and a trace-class dual
vector ``G`` gives the certified lower bound
``Re<G, x> - ||P_B G||_1``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .algebra import Algebra, DirectSum, FullMatrix, SampledField, Tuple
from .errors import ContractViolation, PreconditionError
from .linalg import dagger, matrix_from_doc, matrix_to_doc

GRAM_TOL = 1e-10
CLOSURE_TOL = 1e-8
SPAN_TOL = 1e-12


def _ip(a: np.ndarray, b: np.ndarray) -> complex:
    """Trace inner product ``tr(a* b)``."""
    return complex(np.vdot(a, b))


class Subalgebra(Algebra):
    """A *-subalgebra of M_d given by a trace-orthonormal basis."""

    kind = "Subalgebra"

    def __init__(self, basis, *, contains_unit: bool = True, conjugator=None, parent_key=None, check: bool = True):
        basis = np.asarray(basis, dtype=np.complex128)
        if basis.ndim != 3 or basis.shape[1] != basis.shape[2] or basis.shape[0] == 0:
            raise ContractViolation(f"basis has shape {basis.shape}", "basis of d x d matrices")
        self.basis = basis
        self.d = self.k = int(basis.shape[1])
        self.contains_unit = bool(contains_unit)
        self.conjugator = None if conjugator is None else np.asarray(conjugator, dtype=np.complex128)
        self.parent_key = parent_key
        self._flat = basis.reshape(basis.shape[0], -1)
        if check:
            self.validate()

    def __repr__(self):
        return f"Subalgebra(d={self.d}, dim={self.dim})"

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def key(self) -> str:
        return hashlib.sha256(np.round(self.span_projector(), 12).tobytes()).hexdigest()[:16]

    def span_projector(self) -> np.ndarray:
        f = self._flat
        return f.T @ f.conj()

    def coords(self, arr: np.ndarray) -> np.ndarray:
        flat = np.asarray(arr, dtype=np.complex128).reshape(arr.shape[:-2] + (self.d * self.d,))
        return flat @ self._flat.conj().T

    def from_coords(self, c: np.ndarray) -> np.ndarray:
        return (c @ self._flat).reshape(c.shape[:-1] + (self.d, self.d))

    def project(self, arr):
        return self.from_coords(self.coords(arr))

    def residual(self, m: np.ndarray) -> float:
        return float(np.linalg.norm(m - self.project(m)))

    def validate(self) -> None:
        f = self._flat
        gram = f.conj() @ f.T
        err = float(np.abs(gram - np.eye(self.dim)).max())
        if err > GRAM_TOL:
            raise ContractViolation(f"basis Gram matrix deviates from identity by {err:.3e}", "orthonormal basis")
        adj = max(self.residual(dagger(b)) for b in self.basis)
        if adj > CLOSURE_TOL:
            raise ContractViolation(f"basis is not closed under adjoint (defect {adj:.3e})", "adjoint closure")
        prods = np.einsum("iab,jbc->ijac", self.basis, self.basis).reshape(-1, self.d, self.d)
        defect = float(np.linalg.norm(prods - self.project(prods), axis=(1, 2)).max())
        if defect > CLOSURE_TOL:
            raise ContractViolation(f"product-closure defect {defect:.3e}", "product closure")
        if self.contains_unit and self.residual(np.eye(self.d)) > CLOSURE_TOL:
            raise ContractViolation("unit flag set but identity not in span", "unit in span")

    def one(self):
        return np.eye(self.d, dtype=np.complex128)[None].copy()

    def catalog(self, n):
        out = super().catalog(n)
        for i, b in enumerate(self.basis[:6]):
            data = np.zeros((1, n, self.d, self.d), dtype=np.complex128)
            data[0, 0] = b / linalg.op_norm(b)
            out.append((f"basis-{i}", Tuple(self, data)))
        return out

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "d": self.d,
            "unit": self.contains_unit,
            "basis": [matrix_to_doc(b) for b in self.basis],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Subalgebra":
        basis = [matrix_from_doc(b) for b in doc["basis"]]
        sub = cls(basis, contains_unit=bool(doc.get("unit", True)))
        if "d" in doc and int(doc["d"]) != sub.d:
            raise ContractViolation("declared ambient dimension does not match basis", "ambient dimension")
        return sub

    @classmethod
    def from_algebra(cls, alg: Algebra) -> "Subalgebra":
        """Matrix-unit basis of a FullMatrix or DirectSum algebra."""
        if isinstance(alg, Subalgebra):
            return alg
        if not isinstance(alg, (FullMatrix, DirectSum)):
            raise ContractViolation(f"cannot embed {alg!r} as a subalgebra of M_d", "finite-dimensional algebra")
        k = alg.k
        mask = alg.project(np.ones((k, k), dtype=np.complex128)) != 0
        basis = []
        for i, j in zip(*np.nonzero(mask)):
            e = np.zeros((k, k), dtype=np.complex128)
            e[i, j] = 1.0
            basis.append(e)
        return cls(basis)

    def conjugated(self, u: np.ndarray) -> "Subalgebra":
        u = np.asarray(u, dtype=np.complex128)
        new = u[None] @ self.basis @ dagger(u)[None]
        # symmetric re-orthonormalisation keeps each element next to its conjugate
        flat = new.reshape(self.dim, -1)
        gram = flat.conj() @ flat.T
        w = linalg.func_calc(gram.T, linalg.Profile.inv_sqrt())
        basis = (w @ flat).reshape(self.dim, self.d, self.d)
        return Subalgebra(basis, contains_unit=self.contains_unit, conjugator=u, parent_key=self.key)


def perturb_algebra(alg: Subalgebra, eps: float, seed) -> Subalgebra:
    """``u A u*`` with ``u = exp(i eps H)`` for a random Hermitian ``H``, ``||H|| = 1``."""
    if eps < 0:
        raise PreconditionError("eps must be nonnegative", "eps >= 0")
    alg = Subalgebra.from_algebra(alg)
    rng = np.random.default_rng(seed)
    h = linalg.random_hermitian(rng, alg.d)
    h = h / linalg.op_norm(h)
    u = linalg.expm_hermitian(h, 1j * eps)
    return alg.conjugated(u)


def conjugate_field(fld: SampledField, eps: float, seed) -> SampledField:
    """Pointwise conjugation by ``u(p) = exp(i eps H(p))`` with ``H`` affine in the coordinates."""
    rng = np.random.default_rng(seed)
    k = fld.k
    h0, h1, h2 = (linalg.random_hermitian(rng, k) for _ in range(3))
    xy = fld.coords()
    hs = h0[None] + xy[:, 0, None, None] * h1[None] + xy[:, 1, None, None] * h2[None]
    hs = hs / max(float(np.max(np.atleast_1d(linalg.op_norm(hs)))), 1e-300)
    u = linalg.expm_hermitian(hs, 1j * eps)
    frame = u if fld.frame is None else u @ fld.frame
    return SampledField(fld.mesh, k, shape=fld.shape, frame=frame)


# ---------------------------------------------------------------------------
# distance


@dataclass(frozen=True)
class KkCertificate:
    lower: float
    upper: float
    pair: tuple | None = None  # (x, y) attaining the lower bound
    upper_method: str = "unit-ball"
    estimate: float | None = None  # heuristic value of the outer sup
    evaluations: int = 0
    notes: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "upper_method": self.upper_method,
            "estimate": self.estimate,
            "evaluations": self.evaluations,
        }


def _top_pair(r: np.ndarray):
    u, s, vh = np.linalg.svd(r)
    return float(s[0]), np.outer(u[:, 0], vh[0].conj())


def _clip_ball(y: np.ndarray) -> np.ndarray:
    nrm = float(np.linalg.norm(y, 2))
    return y / nrm if nrm > 1.0 else y


def inner_distance(x: np.ndarray, target: Subalgebra, iterations: int = 150):
    """Bounds on ``inf_{y in B_1} ||x - y||``: ``(lower, upper, y, G)``."""
    y = _clip_ball(target.project(x[None])[0])
    best_val, g = _top_pair(x - y)
    best_y, best_g = y, g
    val = best_val
    stale = 0
    for t in range(iterations):
        if val <= 1e-15 or stale >= 25:
            break
        step = 0.5 * best_val / math.sqrt(t + 1.0)
        y = _clip_ball(y + step * target.project(g[None])[0])
        val, g = _top_pair(x - y)
        if val < best_val - 1e-12:
            best_val, best_y, best_g = val, y, g
            stale = 0
        else:
            stale += 1
    if best_val > 1.0:
        best_val, best_y = float(linalg.op_norm(x)), np.zeros_like(x)
        _, best_g = _top_pair(x)
    lower = _dual_bound(x, best_g, target)
    return max(lower, 0.0), best_val, best_y, best_g


def _dual_bound(x: np.ndarray, g: np.ndarray, target: Subalgebra) -> float:
    """``Re<G, x> - ||P_B G||_1`` for ``||G||_1 <= 1``."""
    tn = linalg.trace_norm(g)
    if tn > 1.0:
        g = g / tn
    pg = target.project(g[None])[0]
    return float(np.real(_ip(g, x)) - linalg.trace_norm(pg))


def _outer_starts(src: Subalgebra, count: int, seed: int) -> list:
    out = []
    for b in src.basis:
        out.append(b / linalg.op_norm(b))
    i = 0
    while len(out) < count + src.dim:
        rng = np.random.default_rng([seed, i])
        i += 1
        z = src.project((rng.standard_normal((1, src.d, src.d)) + 1j * rng.standard_normal((1, src.d, src.d))))[0]
        if i % 2:
            h = 0.5 * (z + dagger(z))
            out.append(linalg.expm_hermitian(h, 1j * math.pi))  # unitary of the algebra
        else:
            out.append(z / linalg.op_norm(z))
    return out


def _directed(src: Subalgebra, dst: Subalgebra, budget: int, seed: int):
    n_starts = min(32, budget)
    best = (-1.0, None, None)
    est = 0.0
    for x in _outer_starts(src, n_starts, seed)[: src.dim + n_starts]:
        lo, up, y, _ = inner_distance(x, dst)
        est = max(est, up)
        if lo > best[0]:
            best = (lo, x, y)
    return best, est


def same_span(a: Subalgebra, b: Subalgebra) -> bool:
    return all(b.residual(m) <= SPAN_TOL * max(1.0, np.linalg.norm(m)) for m in a.basis) and all(
        a.residual(m) <= SPAN_TOL * max(1.0, np.linalg.norm(m)) for m in b.basis
    )


def conjugation_bound(a: Subalgebra, b: Subalgebra) -> float | None:
    """``2 ||u - 1||`` when one algebra was produced from the other by conjugation with ``u``."""
    if b.conjugator is not None and b.parent_key == a.key:
        u = b.conjugator
    elif a.conjugator is not None and a.parent_key == b.key:
        u = a.conjugator
    else:
        return None
    return 2.0 * float(linalg.op_norm(u - np.eye(u.shape[0])))


def kk_distance(a: Algebra, b: Algebra, budget: int = 64, *, seed: int = 0) -> KkCertificate:
    a, b = Subalgebra.from_algebra(a), Subalgebra.from_algebra(b)
    if a.d != b.d:
        raise ContractViolation(f"ambient dimensions differ ({a.d} vs {b.d})", "same ambient dimension")
    if same_span(a, b):
        return KkCertificate(0.0, 0.0, None, "identical", 0.0)
    # canonical order makes the result independent of argument order
    first, second = sorted((a, b), key=lambda s: s.key)
    (lo1, x1, y1), e1 = _directed(first, second, budget, seed)
    (lo2, x2, y2), e2 = _directed(second, first, budget, seed)
    lower, pair = (lo1, (x1, y1)) if lo1 >= lo2 else (lo2, (x2, y2))
    upper, method = 1.0, "unit-ball"  # inf_y ||x - y|| <= ||x - 0|| <= 1
    cb = conjugation_bound(a, b)
    if cb is not None and cb < upper:
        upper, method = cb, "conjugation"
    lower = min(max(lower, 0.0), upper)
    evals = 2 * min(32, budget)
    return KkCertificate(lower, upper, pair, method, max(e1, e2), evals)


# ---------------------------------------------------------------------------
# stability experiment


def _field_kk_upper(a: SampledField, b: SampledField) -> tuple:
    if a.mesh is not b.mesh and a.mesh.name != b.mesh.name:
        raise ContractViolation("fields live on different meshes", "same mesh")
    if a.k == 1:
        return 0.0, "scalar-fibres"  # conjugation by a phase is the identity
    ua = np.eye(a.k) if a.frame is None else a.frame
    ub = np.eye(b.k) if b.frame is None else b.frame
    rel = ub @ dagger(ua)
    return 2.0 * float(np.max(linalg.op_norm(rel - np.eye(a.k)))), "conjugation"


def sr_stability_experiment(pairs, n: int = 2, *, budget: int = 16, seed: int = 0, threshold: float | None = None):
    """Estimate sr on both members of each pair and report agreement."""
    from .stablerank import estimate_sr

    rows = []
    for idx, item in enumerate(pairs):
        a, b = item[0], item[1]
        meta = dict(item[2]) if len(item) > 2 else {}
        if isinstance(a, SampledField):
            kk_lo, (kk_up, method) = 0.0, _field_kk_upper(a, b)
        else:
            cert = kk_distance(a, b, budget=8, seed=seed + idx)
            kk_lo, kk_up, method = cert.lower, cert.upper, cert.upper_method
        sa = estimate_sr(a, n, budget, seed=seed)
        sb = estimate_sr(b, n, budget, seed=seed)
        rows.append({
            "index": idx,
            "kind": type(a).__name__,
            "eps": meta.get("eps"),
            "kk_lower": kk_lo,
            "kk_upper": kk_up,
            "kk_method": method,
            "below_threshold": None if threshold is None else bool(kk_up <= threshold),
            "sr_a": sa.label,
            "sr_b": sb.label,
            "agree": sa.label == sb.label or (sa.value is None and sb.value is None),
        })
    disagreements = [r["index"] for r in rows if not r["agree"]]
    return {
        "n": n,
        "budget": budget,
        "seed": seed,
        "pairs": len(rows),
        "agreements": len(rows) - len(disagreements),
        "disagreements": len(disagreements),
        "disagreeing_pairs": disagreements,
        "rows": rows,
    }


CSV_FIELDS = ("index", "kind", "eps", "kk_lower", "kk_upper", "kk_method", "below_threshold", "sr_a", "sr_b", "agree")


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in report["rows"]:
        w.writerow({k: row.get(k) for k in CSV_FIELDS})
    return buf.getvalue()


def matrix_pairs(count: int, eps: float, seed: int = 0) -> list:
    """Pairs ``(A, uAu*)`` over a rotating family of small matrix algebras."""
    family = [FullMatrix(2), FullMatrix(3), DirectSum([1, 1]), DirectSum([1, 2]), DirectSum([2, 2])]
    out = []
    for i in range(count):
        base = Subalgebra.from_algebra(family[i % len(family)])
        out.append((base, perturb_algebra(base, eps, [seed, i]), {"eps": eps}))
    return out


def disk_pairs(count: int, eps: float, resolution: int = 64, seed: int = 0) -> list:
    from .algebra import disk_field

    base = disk_field(resolution)
    return [(base, conjugate_field(base, eps, [seed, i]), {"eps": eps}) for i in range(count)]
