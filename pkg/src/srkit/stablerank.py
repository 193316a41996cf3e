"""Distance to left-invertible tuples and the constructions behind it.

The operations here follow the chain: shifting a tuple into Lg_n along
the isometric part of a nearby left-invertible tuple, building a tuple in
Lg_n that agrees with the polar part of ``a`` above a spectral level,
bounding ``dist(a, Lg_n)`` from both sides, and rescaling an element
with positive distance into one of norm and distance one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .algebra import Algebra, Tuple, boundary_obstruction, is_lg
from .errors import CertificateError, GapError, PreconditionError
from .linalg import DEFAULT_GAP, Profile, dagger

LG_MARGIN = 1e-12


def _pointwise_lg(b: Tuple, margin: float) -> bool:
    w = linalg.herm_eig(b.gram()).eigenvalues[..., 0]
    return bool(np.min(w) > margin)


def _require_lg(b: Tuple, margin: float, pointwise: bool) -> None:
    ok = _pointwise_lg(b, margin) if pointwise else is_lg(b, margin).member
    if not ok:
        raise CertificateError("tuple is not certified left-invertible", "b in Lg_n")


def isometric_part(b: Tuple) -> Tuple:
    """``w = b (b* b)^{-1/2}`` for a left-invertible ``b``."""
    return linalg.right_mult_calc(b, Profile.sign())


def shift_into_lg(a: Tuple, b: Tuple, beta: float, *, margin: float = LG_MARGIN, pointwise: bool = False) -> Tuple:
    """Return ``a + beta w`` where ``b = w |b|``; it lies in Lg_n whenever ``beta > ||a - b||``."""
    _require_lg(b, margin, pointwise)
    gap = (a - b).norm()
    if not beta > gap:
        raise PreconditionError(f"beta={beta!r} must exceed ||a - b|| = {gap!r}", "beta > ||a - b||")
    return a + beta * isometric_part(b)


@dataclass(frozen=True)
class Section:
    s: Tuple
    beta: float
    residual: float  # max over checked fibres of ||(1 - f_gamma)(v - s)||
    fiber_residuals: np.ndarray | None = None
    checked: np.ndarray | None = None  # fibres whose spectrum clears the gap


def section_at_level(
    a: Tuple,
    gamma: float,
    b: Tuple,
    *,
    delta: float = DEFAULT_GAP,
    margin: float = LG_MARGIN,
    check: bool = True,
    pointwise: bool | None = None,
) -> Section:
    """Tuple ``s`` in Lg_n with ``(1 - f_gamma) v = (1 - f_gamma) s``.

    ``s = (a + beta w)(1 + beta psi(|a|) v* w)^{-1} phi(|a|)`` with
    ``phi(t) = min(1/gamma, 1/t)``, ``psi(t) = min(t/gamma^2, 1/t)`` and
    ``beta`` the midpoint of ``(||a - b||, gamma)``.  The factor
    ``v psi(|a|)`` is formed as ``a q(|a|)`` so ``v`` itself is never needed.

    On sampled fields (``pointwise``) the construction is vertexwise and
    fibres whose spectrum meets the exclusion band around ``gamma`` are
    skipped in the residual instead of raising.
    """
    if pointwise is None:
        pointwise = a.algebra.is_field
    dist_ab = (a - b).norm()
    if not dist_ab < gamma:
        raise PreconditionError(f"||a - b|| = {dist_ab!r} must be below gamma = {gamma!r}", "||a - b|| < gamma")
    _require_lg(b, margin, pointwise)
    beta = 0.5 * (dist_ab + gamma)
    w = isometric_part(b).stacked()
    vpsi = linalg.right_mult_calc(a.stacked(), Profile.psi(gamma))
    k = a.k
    middle = np.eye(k) + beta * (dagger(vpsi) @ w)
    phi_a = linalg.modulus_calc(a.stacked(), Profile.phi(gamma))
    s_stacked = (a.stacked() + beta * w) @ np.linalg.inv(middle) @ phi_a
    s = a.with_stacked(s_stacked)
    if pointwise:
        if not _pointwise_lg(s, margin):
            raise CertificateError("section is not left-invertible", "s in Lg_n")
    elif not is_lg(s, margin).member:
        raise CertificateError("section is not left-invertible", "s in Lg_n")
    if not check:
        return Section(s, beta, float("nan"))
    res, ok = section_residuals(a, s, gamma, delta)
    if not pointwise and not np.all(ok):
        # re-run the strict projection to raise with the offending eigenvalue
        linalg.spectral_proj_leq(linalg.abs_adjoint(a.stacked()), gamma, delta)
    checked = res[ok]
    return Section(s, beta, float(checked.max(initial=0.0)), res, ok)


def section_residuals(a: Tuple, s: Tuple, gamma: float, delta: float = DEFAULT_GAP):
    """Per-fibre ``||(1 - f_gamma)(v - s)||`` and the gap mask."""
    abs_adj = linalg.abs_adjoint(a.stacked())
    f_gamma, ok, _ = linalg.spectral_proj_leq_masked(abs_adj, gamma, delta)
    v = linalg.polar(a.stacked()).partial_isometry
    m = abs_adj.shape[-1]
    diff = (np.eye(m) - f_gamma) @ (v - s.stacked())
    res = np.atleast_1d(linalg.op_norm(diff))
    return res, np.atleast_1d(ok)


def dist_upper_candidate(a: Tuple, lam: float):
    """``c = (|a*| - lam)_+ v`` computed as ``a q(|a|)``; returns ``(c, ||a - c||)``."""
    if lam < 0:
        raise PreconditionError("level must be nonnegative", "lambda >= 0")
    c = linalg.right_mult_calc(a, Profile.pos_part(lam))
    return c, (a - c).norm()


@dataclass(frozen=True)
class DistanceCertificate:
    lower: float
    upper: float
    upper_witness: Tuple
    lower_method: str  # "winding" | "trivial-zero" | "norm-bound"
    upper_method: str = "trivial"
    winding: int | None = None
    evaluations: int = 0
    notes: dict = field(default_factory=dict)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_doc(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "lower_method": self.lower_method,
            "upper_method": self.upper_method,
            "winding": self.winding,
            "evaluations": self.evaluations,
            "witness_norm": self.upper_witness.norm(),
        }

    def scaled(self, t: float, a_scaled: Tuple | None = None) -> "DistanceCertificate":
        return DistanceCertificate(
            t * self.lower, t * self.upper, t * self.upper_witness, self.lower_method,
            self.upper_method, self.winding, self.evaluations,
        )


def repair_directions(algebra: Algebra, n: int) -> list:
    """Constant unit tuples used to push a tuple into Lg_n."""
    dirs = []
    for j in range(n):
        for c in (1.0, 1j):
            coeff = np.zeros(n, dtype=np.complex128)
            coeff[j] = c
            dirs.append((f"e{j}*{'i' if c == 1j else '1'}", algebra.unit_tuple(n, coeff)))
    if n > 1:
        dirs.append(("spread", algebra.unit_tuple(n, np.full(n, 1 / math.sqrt(n)))))
        phases = np.exp(2j * math.pi * np.arange(n) / (n + 1)) / math.sqrt(n)
        dirs.append(("phased", algebra.unit_tuple(n, phases)))
    else:
        dirs.append(("diag", algebra.unit_tuple(1, [np.exp(0.25j * math.pi)])))
    return dirs


class _Search:
    def __init__(self, a: Tuple, budget: int, margin: float):
        self.a = a
        self.budget = budget
        self.used = 0
        self.margin = margin
        self.best = None
        self.best_d = math.inf
        self.best_method = "trivial"

    @property
    def exhausted(self) -> bool:
        return self.used >= self.budget

    def consider(self, g: Tuple, method: str) -> bool:
        if self.exhausted:
            return False
        self.used += 1
        if not is_lg(g, self.margin).member:
            return False
        d = (self.a - g).norm()
        if d < self.best_d:
            self.best, self.best_d, self.best_method = g, d, method
        return True


def dist_to_lg(a: Tuple, budget: int = 256, *, margin_rel: float = 1e-12, levels: int = 32) -> DistanceCertificate:
    """Certified interval for ``dist(a, Lg_n(A))``.

    Upper side: explicit tuples certified in Lg_n (the tuple itself,
    constant-direction repairs of ``a`` and of the level candidates
    ``(|a*| - lam)_+ v``, then a bisection on the repair size).  Lower side:
    the boundary winding obstruction on disk fields, otherwise 0.  Running
    out of budget returns whatever has been established.
    """
    alg = a.algebra
    n = a.n
    norm_a = a.norm()
    eps_triv = 1e-10 * min(1.0, norm_a) if norm_a > 0 else 1e-12
    trivial = eps_triv * alg.unit_tuple(n)
    search = _Search(a, max(int(budget), 1), margin_rel * max(norm_a, 1e-300) ** 2)
    search.best, search.best_d = trivial, (a - trivial).norm()

    lower, lower_method, winding = 0.0, "trivial-zero", None
    obs = boundary_obstruction(a)
    if obs is not None:
        winding = obs.winding
        if obs.winding != 0:
            lower, lower_method = obs.rho, "winding"

    if norm_a > 0:
        if not search.consider(a, "self"):
            ladder = norm_a * np.logspace(-6, 0, 13)
            dirs = repair_directions(alg, n)
            found = {}
            for name, d in dirs:
                for mu in ladder:
                    if search.exhausted:
                        break
                    if mu >= search.best_d:
                        break
                    if search.consider(a + mu * d, f"repair:{name}"):
                        found[name] = mu
                        break
            _refine(search, a, dirs, found, ladder)
            if lower_method != "winding":
                _level_sweep(search, a, dirs, norm_a, levels)
    upper = search.best_d
    if lower > upper + 1e-12:
        raise CertificateError(f"lower bound {lower} exceeds upper bound {upper}", "lower <= upper")
    return DistanceCertificate(
        lower, upper, search.best, lower_method, search.best_method, winding, search.used,
    )


def _refine(search: _Search, base: Tuple, dirs, found: dict, ladder) -> None:
    """Bisect each successful repair size down towards the last failure."""
    names = dict(dirs)
    for name, mu in sorted(found.items(), key=lambda kv: kv[1]):
        idx = int(np.searchsorted(ladder, mu))
        lo = ladder[idx - 1] if idx > 0 else 0.0
        hi = mu
        for _ in range(8):
            if search.exhausted:
                return
            mid = 0.5 * (lo + hi)
            if search.consider(base + mid * names[name], f"repair:{name}"):
                hi = mid
            else:
                lo = mid


def _level_sweep(search: _Search, a: Tuple, dirs, norm_a: float, levels: int) -> None:
    lams = norm_a * np.logspace(-3, 0, levels)
    for lam in lams:
        if search.exhausted or lam >= search.best_d:
            return
        c, bound = dist_upper_candidate(a, float(lam))
        for name, d in dirs[:2]:
            for mu in (0.1 * lam, 0.5 * lam, lam):
                if search.exhausted or bound + mu >= search.best_d:
                    break
                if search.consider(c + mu * d, f"level:{name}"):
                    break


def transfer_lower_bound(cert: DistanceCertificate, a: Tuple, b: Tuple) -> float:
    """``dist(b, Lg_n) >= dist(a, Lg_n) - ||a - b||``."""
    return max(0.0, cert.lower - (a - b).norm())


def max_distance_witness(a: Tuple, cert: DistanceCertificate, gamma: float | None = None) -> Tuple:
    """Rescale ``a`` to ``b = v h(|a|)`` with ``h(t) = min(t/gamma, 1)``.

    ``gamma`` defaults to the certificate midpoint.  Needs a positive
    certified lower bound on ``dist(a, Lg_n)``.
    """
    if not cert.lower > 0:
        raise PreconditionError("distance certificate has zero lower bound", "dist(a, Lg_n) > 0")
    g = cert.midpoint if gamma is None else float(gamma)
    if not g > 0:
        raise PreconditionError("gamma must be positive", "gamma > 0")
    b = linalg.right_mult_calc(a, Profile.cutoff(g))
    nb = b.norm()
    if nb > 1 + 1e-9:
        raise CertificateError(f"witness norm {nb} exceeds 1", "||b|| <= 1")
    if nb > 1.0:
        # h <= 1 exactly; strip the rounding excess so ||b|| <= 1 holds in floating point
        b = b * ((1.0 - 4 * np.finfo(float).eps) / nb)
    return b


SR_THRESHOLD = 0.1
_SR_CACHE: dict = {}


@dataclass(frozen=True)
class SrEstimate:
    value: int | None  # None means "> n_max"
    n_max: int
    estimates: tuple  # EvalResult per n tried, in order

    @property
    def label(self) -> str:
        return str(self.value) if self.value is not None else f"> {self.n_max}"

    def to_doc(self) -> dict:
        return {
            "sr": self.label,
            "phi": [dict(r.to_doc(), n=i + 1) for i, r in enumerate(self.estimates)],
        }


def _fingerprint(alg: Algebra) -> tuple:
    import hashlib
    import json

    h = hashlib.sha256(json.dumps(alg.to_doc(), sort_keys=True, default=str).encode())
    for attr in ("frame", "basis"):
        if attr == "frame" and alg.k == 1:
            continue  # conjugating scalar fibres changes nothing
        val = getattr(alg, attr, None)
        if val is not None:
            h.update(np.ascontiguousarray(np.asarray(val, dtype=np.complex128)).tobytes())
    return (type(alg).__name__, h.hexdigest())


def estimate_sr(alg: Algebra, n_max: int = 3, budget: int = 32, *, seed: int = 0) -> SrEstimate:
    """Smallest ``n <= n_max`` whose phi_n estimate is at most ``SR_THRESHOLD``."""
    from .logic import build_phi_n, eval_formula

    if n_max < 1:
        raise PreconditionError("n_max must be at least 1", "n_max >= 1")
    key = (_fingerprint(alg), int(n_max), int(budget), int(seed))
    if key in _SR_CACHE:
        return _SR_CACHE[key]
    results = []
    value = None
    for n in range(1, n_max + 1):
        r = eval_formula(alg, build_phi_n(n), budget, seed=seed)
        results.append(r)
        if r.upper <= SR_THRESHOLD:
            value = n
            break
    out = SrEstimate(value, int(n_max), tuple(results))
    _SR_CACHE[key] = out
    return out


__all__ = [
    "SrEstimate",
    "estimate_sr",
    "DistanceCertificate",
    "GapError",
    "Section",
    "dist_to_lg",
    "dist_upper_candidate",
    "isometric_part",
    "max_distance_witness",
    "section_at_level",
    "section_residuals",
    "shift_into_lg",
    "transfer_lower_bound",
]
