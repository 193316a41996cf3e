"""Dense complex linear algebra on (batches of) small matrices.

Everything here accepts either a single matrix of shape ``(m, k)`` or a
stack of shape ``(..., m, k)``; batched inputs are how sampled fields are
handled (one matrix per mesh vertex).  The Hermitian eigensolver is a
cyclic Jacobi iteration vectorised across the batch axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DomainError, GapError, PreconditionError

HERMITIAN_TOL = 1e-10
DEFAULT_GAP = 1e-6
_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# ComplexMatrix helpers


def as_matrix(x, *, batch=False) -> np.ndarray:
    """Return ``x`` as a complex128 array, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim < 2 or (not batch and arr.ndim != 2):
        raise ContractViolation(f"expected a matrix, got shape {arr.shape}", "matrix shape")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation("matrix has non-finite entries", "finite entries")
    return arr


def matrix_to_doc(m) -> dict:
    m = as_matrix(m)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(v) for v in m.real.ravel()],
        "im": [float(v) for v in m.imag.ravel()],
    }


def matrix_from_doc(doc) -> np.ndarray:
    rows, cols = int(doc["rows"]), int(doc["cols"])
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc.get("im", [0.0] * (rows * cols)), dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise ContractViolation(
            f"matrix document has {re.size}/{im.size} entries, expected {rows * cols}",
            "entries length equals rows x cols",
        )
    return as_matrix((re + 1j * im).reshape(rows, cols))


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


# ---------------------------------------------------------------------------
# Hermitian eigensolver


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # (..., k), ascending
    eigenvectors: np.ndarray  # (..., k, k), columns

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues[..., None, :]) @ dagger(u)


def _check_hermitian(h: np.ndarray) -> None:
    if h.shape[-1] != h.shape[-2]:
        raise ContractViolation(f"matrix is not square: {h.shape}", "square input")
    dev = np.abs(h - dagger(h)).max(initial=0.0)
    scale = np.abs(h).max(initial=0.0)
    if dev > HERMITIAN_TOL * max(scale, 1.0):
        raise ContractViolation(
            f"matrix is not Hermitian (asymmetry {dev:.3e})", "Hermitian input"
        )


def herm_eig(h, *, max_sweeps: int = 60) -> EigenDecomposition:
    """Eigendecomposition of Hermitian matrices by Jacobi rotations.

    Each sweep runs the round-robin ordering: a round annihilates a set of
    disjoint off-diagonal pairs at once, and the ``k - 1`` rounds of a sweep
    (``k`` rounded up to even) visit every pair exactly once.  Eigenvalues
    are returned in ascending order; ties keep the order of the diagonal
    positions they converged to.  The iteration is fully deterministic.
    """
    h = as_matrix(h, batch=True)
    _check_hermitian(h)
    lead = h.shape[:-2]
    k = h.shape[-1]
    a = h.reshape((-1, k, k)).copy()
    a = 0.5 * (a + dagger(a))
    nb = a.shape[0]
    v = np.broadcast_to(np.eye(k, dtype=np.complex128), (nb, k, k)).copy()

    if k > 1:
        scale = np.sqrt(np.sum(np.abs(a) ** 2, axis=(1, 2)))
        offmask = ~np.eye(k, dtype=bool)
        rounds = _round_robin(k)
        for _ in range(max_sweeps):
            off = np.sqrt(np.sum(np.abs(a[:, offmask]) ** 2, axis=1))
            if np.all(off <= _EPS * scale):
                break
            for ps, qs in rounds:
                _rotate(a, v, ps, qs)
        else:  # pragma: no cover - Jacobi converges quadratically
            raise ContractViolation("Jacobi iteration did not converge", "eigensolver convergence")

    w = np.real(np.diagonal(a, axis1=1, axis2=2)).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return EigenDecomposition(w.reshape(lead + (k,)), v.reshape(lead + (k, k)))


_ROUNDS: dict = {}


def _round_robin(k: int) -> list:
    """Tournament schedule: lists of disjoint index pairs covering all pairs once."""
    if k in _ROUNDS:
        return _ROUNDS[k]
    m = k + (k % 2)
    players = list(range(m))
    out = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p < k and q < k]
        out.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    _ROUNDS[k] = out
    return out


def _rotate(a: np.ndarray, v: np.ndarray, ps: np.ndarray, qs: np.ndarray) -> None:
    """Annihilate ``a[:, p, q]`` for every disjoint pair ``(p, q)`` in one step."""
    apq = a[:, ps, qs]
    mag = np.abs(apq)
    active = mag > 0.0
    if not np.any(active):
        return
    safe = np.where(active, mag, 1.0)
    phase = np.where(active, apq / safe, 1.0)
    app = a[:, ps, ps].real
    aqq = a[:, qs, qs].real
    theta = (aqq - app) / (2.0 * safe)
    sgn = np.where(theta >= 0.0, 1.0, -1.0)
    t = sgn / (np.abs(theta) + np.hypot(theta, 1.0))
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c
    pc = np.conj(phase)
    # columns: [P Q] <- [P Q] [[c, s], [-s conj(phase), c conj(phase)]]
    colp, colq = a[:, :, ps], a[:, :, qs]
    cc, ss, pp = c[:, None, :], s[:, None, :], pc[:, None, :]
    a[:, :, ps] = cc * colp - ss * pp * colq
    a[:, :, qs] = ss * colp + cc * pp * colq
    vp, vq = v[:, :, ps], v[:, :, qs]
    v[:, :, ps] = cc * vp - ss * pp * vq
    v[:, :, qs] = ss * vp + cc * pp * vq
    # rows: apply the adjoint from the left
    rowp, rowq = a[:, ps, :], a[:, qs, :]
    cr, sr, ph = c[:, :, None], s[:, :, None], phase[:, :, None]
    a[:, ps, :] = cr * rowp - sr * ph * rowq
    a[:, qs, :] = sr * rowp + cr * ph * rowq
    a[:, ps, qs] = 0.0
    a[:, qs, ps] = 0.0
    a[:, ps, ps] = a[:, ps, ps].real
    a[:, qs, qs] = a[:, qs, qs].real


# ---------------------------------------------------------------------------
# Named scalar profiles for the functional calculus


@dataclass(frozen=True)
class Profile:
    """A closed-form scalar function used in the functional calculus.

    ``f`` is the function itself; ``q`` is ``f(t)/t`` extended continuously
    to ``t = 0`` when that extension exists (it is what right multiplication
    needs).  ``positive_only`` marks profiles only defined for ``t > 0``.
    """

    name: str
    params: tuple = ()

    def _p(self, i):
        return self.params[i]

    @property
    def positive_only(self) -> bool:
        return self.name in ("inverse", "inv_sqrt", "sign")

    def f(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        name = self.name
        with np.errstate(divide="ignore", invalid="ignore"):
            if name == "identity":
                return t.copy()
            if name == "one":
                return np.ones_like(t)
            if name == "sqrt":
                return np.sqrt(t)
            if name == "phi":
                g = self._p(0)
                return np.where(t > g, 1.0 / np.where(t > 0, t, 1.0), 1.0 / g)
            if name == "psi":
                g = self._p(0)
                return np.where(t > g, 1.0 / np.where(t > 0, t, 1.0), t / g**2)
            if name == "cutoff":
                g = self._p(0)
                return np.minimum(t / g, 1.0)
            if name == "pos_part":
                return np.maximum(t - self._p(0), 0.0)
            if name == "reg_sign":
                return t / np.maximum(t, self._p(0))
            if name == "clip":
                return np.clip(t, self._p(0), self._p(1))
            if name == "inverse":
                return 1.0 / t
            if name == "inv_sqrt":
                return 1.0 / np.sqrt(t)
            if name == "sign":
                return np.ones_like(t)
        raise DomainError(f"unknown profile {name!r}")

    def q(self, t: np.ndarray) -> np.ndarray:
        """``f(t)/t`` with its continuous extension at zero."""
        t = np.asarray(t, dtype=float)
        name = self.name
        pos = t > 0
        tt = np.where(pos, t, 1.0)
        if name == "identity":
            return np.ones_like(t)
        if name == "psi":
            g = self._p(0)
            return np.minimum(1.0 / g**2, np.where(pos, 1.0 / tt**2, np.inf))
        if name == "cutoff":
            g = self._p(0)
            return np.minimum(1.0 / g, np.where(pos, 1.0 / tt, np.inf))
        if name == "pos_part":
            lam = self._p(0)
            if lam == 0:
                return np.ones_like(t)
            return np.where(pos, np.maximum(1.0 - lam / tt, 0.0), 0.0)
        if name == "reg_sign":
            return 1.0 / np.maximum(t, self._p(0))
        if name == "sign":
            return 1.0 / tt
        raise DomainError(f"profile {self!r} has no bounded quotient f(t)/t near 0")

    @property
    def has_bounded_quotient(self) -> bool:
        return self.name in ("identity", "psi", "cutoff", "pos_part", "reg_sign", "sign")

    # constructors -------------------------------------------------------
    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def one(cls):
        return cls("one")

    @classmethod
    def sqrt(cls):
        return cls("sqrt")

    @classmethod
    def phi(cls, gamma: float):
        """t -> min(1/gamma, 1/t)."""
        return cls("phi", (float(gamma),))

    @classmethod
    def psi(cls, gamma: float):
        """t -> min(t/gamma^2, 1/t)."""
        return cls("psi", (float(gamma),))

    @classmethod
    def cutoff(cls, gamma: float):
        """t -> min(t/gamma, 1)."""
        return cls("cutoff", (float(gamma),))

    @classmethod
    def pos_part(cls, lam: float):
        """t -> max(t - lam, 0)."""
        return cls("pos_part", (float(lam),))

    @classmethod
    def reg_sign(cls, eps: float):
        """t -> t / max(t, eps)."""
        return cls("reg_sign", (float(eps),))

    @classmethod
    def clip(cls, lo: float, hi: float):
        return cls("clip", (float(lo), float(hi)))

    @classmethod
    def inverse(cls):
        return cls("inverse")

    @classmethod
    def inv_sqrt(cls):
        return cls("inv_sqrt")

    @classmethod
    def sign(cls):
        """The constant 1 on (0, inf); right multiplication gives ``a |a|^-1``."""
        return cls("sign")


def _psd_spectrum(w: np.ndarray, *, what="matrix") -> np.ndarray:
    scale = np.abs(w).max(initial=0.0)
    if w.size and w.min() < -HERMITIAN_TOL * max(scale, 1.0):
        raise DomainError(f"{what} is not positive semidefinite (eigenvalue {w.min():.3e})")
    return np.maximum(w, 0.0)


def _check_domain(profile: Profile, w: np.ndarray) -> None:
    if profile.positive_only and w.size and not (w.min() > 0.0):
        raise DomainError(
            f"profile {profile.name} is undefined at spectral point {w.min():.3e}",
            "profile domain",
        )


def func_calc(h, profile: Profile) -> np.ndarray:
    """Apply ``profile`` to a positive semidefinite matrix (or stack)."""
    h = as_matrix(h, batch=True)
    eig = herm_eig(h)
    w = _psd_spectrum(eig.eigenvalues)
    _check_domain(profile, w)
    fw = profile.f(w)
    if not np.all(np.isfinite(fw)):
        raise DomainError(f"profile {profile.name} is not finite on the spectrum")
    u = eig.eigenvectors
    return (u * fw[..., None, :]) @ dagger(u)


def pos_part(h, lam: float) -> np.ndarray:
    """``(h - lam)_+`` for a positive matrix ``h``."""
    if lam < 0:
        raise PreconditionError(f"level must be nonnegative, got {lam}", "lambda >= 0")
    return func_calc(h, Profile.pos_part(lam))


def spectral_proj_leq_masked(h, lam: float, delta: float = DEFAULT_GAP):
    """Projection onto the spectral subspace ``[0, lam]`` for every matrix in a stack.

    Returns ``(P, ok)`` where ``ok`` flags the matrices whose spectrum keeps
    a distance of at least ``delta`` from ``lam``.
    """
    h = as_matrix(h, batch=True)
    eig = herm_eig(h)
    w = eig.eigenvalues
    sel = (w <= lam).astype(float)
    ok = ~np.any(np.abs(w - lam) < delta, axis=-1)
    u = eig.eigenvectors
    p = (u * sel[..., None, :]) @ dagger(u)
    return p, ok, w


def spectral_proj_leq(h, lam: float, delta: float = DEFAULT_GAP) -> np.ndarray:
    """Orthogonal projection ``1_{[0, lam]}(h)``; raises GapError near a cut."""
    p, ok, w = spectral_proj_leq_masked(h, lam, delta)
    if not np.all(ok):
        flat_ok = np.atleast_1d(ok).ravel()
        flat_w = w.reshape((-1, w.shape[-1]))
        fiber = int(np.argmin(flat_ok))
        bad = flat_w[fiber][np.argmin(np.abs(flat_w[fiber] - lam))]
        raise GapError(float(bad), lam, delta, fiber if flat_ok.size > 1 else None)
    return p


# ---------------------------------------------------------------------------
# Polar decomposition and right multipliers


@dataclass(frozen=True)
class PolarParts:
    partial_isometry: np.ndarray
    modulus: np.ndarray


def polar(a, tau: float | None = None) -> PolarParts:
    """Truncated polar decomposition ``a = v |a|``.

    Singular values at or below ``tau`` (default ``1e-10 * ||a||``) are
    treated as zero, so ``v`` vanishes on those directions.
    """
    a = as_matrix(a, batch=True)
    eig = herm_eig(dagger(a) @ a)
    u = eig.eigenvectors
    # sqrt of the eigenvalues of a*a cannot resolve s below ~1e-8 ||a||; the
    # eigenvectors are accurate, so read the singular values off ||a u_j||
    s = np.linalg.norm(a @ u, axis=-2)
    if tau is None:
        tau = 1e-10 * float(s.max(initial=0.0))
    elif tau <= 0:
        raise PreconditionError("rank threshold must be positive", "tau > 0")
    keep = s > tau
    inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    v = a @ ((u * inv[..., None, :]) @ dagger(u))
    mod = (u * s[..., None, :]) @ dagger(u)
    return PolarParts(v, mod)


def right_mult_calc(a, profile: Profile):
    """Compute ``v profile(|a|)`` as ``a q(|a|)`` with ``q(t) = profile(t)/t``.

    Only ``a`` and functions of ``a*a`` appear, so the result stays in the
    algebra generated by the entries of ``a``.  Accepts a raw stacked array
    or any object exposing ``stacked()`` / ``with_stacked()``.
    """
    if hasattr(a, "stacked"):
        return a.with_stacked(right_mult_calc(a.stacked(), profile))
    a = as_matrix(a, batch=True)
    if not profile.has_bounded_quotient:
        raise DomainError(
            f"profile {profile.name}: f(t)/t is unbounded near 0", "bounded quotient"
        )
    eig = herm_eig(dagger(a) @ a)
    s = np.sqrt(_psd_spectrum(eig.eigenvalues))
    _check_domain(profile, s)
    qs = profile.q(s)
    if not np.all(np.isfinite(qs)):
        raise DomainError(f"profile {profile.name}: f(t)/t is not finite on the spectrum")
    u = eig.eigenvectors
    return a @ ((u * qs[..., None, :]) @ dagger(u))


def modulus_calc(a, profile: Profile) -> np.ndarray:
    """``profile(|a|)`` computed from a single eigendecomposition of ``a* a``."""
    a = as_matrix(a, batch=True)
    eig = herm_eig(dagger(a) @ a)
    s = np.sqrt(_psd_spectrum(eig.eigenvalues))
    _check_domain(profile, s)
    fs = profile.f(s)
    if not np.all(np.isfinite(fs)):
        raise DomainError(f"profile {profile.name} is not finite on the spectrum")
    u = eig.eigenvectors
    return (u * fs[..., None, :]) @ dagger(u)


def abs_adjoint(a) -> np.ndarray:
    """``|a*| = (a a*)^{1/2}``."""
    a = as_matrix(a, batch=True)
    return func_calc(a @ dagger(a), Profile.sqrt())


# ---------------------------------------------------------------------------
# Norms


def singular_extremes(a):
    """Largest and smallest singular values of each matrix in a stack.

    The smallest value refers to ``a*a`` (column space), which is the
    left-invertibility quantity for a tall tuple.
    """
    a = as_matrix(a, batch=True)
    w = _psd_spectrum(herm_eig(dagger(a) @ a).eigenvalues)
    return np.sqrt(w[..., -1]), np.sqrt(w[..., 0])


def op_norm(a):
    """Operator norm of a matrix, or of each matrix in a stack."""
    a = as_matrix(a, batch=True)
    m, k = a.shape[-2:]
    if min(m, k) == 1:
        # a row or column: the operator norm is the Euclidean length
        flat = np.ascontiguousarray(a, dtype=np.complex128).reshape(a.shape[:-2] + (m * k,))
        flat = flat.view(np.float64)
        out = np.sqrt(np.einsum("...i,...i->...", flat, flat))
        return float(out) if out.ndim == 0 else out
    gram = dagger(a) @ a if m >= k else a @ dagger(a)
    w = herm_eig(gram).eigenvalues[..., -1]
    out = np.sqrt(np.maximum(w, 0.0))
    return float(out) if out.ndim == 0 else out


def trace_norm(a):
    a = as_matrix(a, batch=True)
    w = _psd_spectrum(herm_eig(dagger(a) @ a).eigenvalues)
    out = np.sqrt(w).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def expm_hermitian(h, t: complex = 1j) -> np.ndarray:
    """``exp(t h)`` for Hermitian ``h`` via its eigendecomposition."""
    eig = herm_eig(h)
    u = eig.eigenvectors
    return (u * np.exp(t * eig.eigenvalues)[..., None, :]) @ dagger(u)


def random_hermitian(rng: np.random.Generator, k: int) -> np.ndarray:
    g = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    return 0.5 * (g + dagger(g))


def char_poly_eigs_2x2(h) -> tuple[float, float]:
    """Closed-form eigenvalues of a 2x2 Hermitian matrix."""
    h = as_matrix(h)
    a, d = h[0, 0].real, h[1, 1].real
    b = abs(h[0, 1])
    mid = 0.5 * (a + d)
    rad = math.hypot(0.5 * (a - d), b)
    return mid - rad, mid + rad
