"""Represented algebras, tuples in A^n, and left-invertibility certificates.

Every algebra is stored fibrewise: an element is an array of shape
``(F, k, k)`` and an n-tuple is ``(F, n, k, k)``.  Matrix algebras have a
single fibre; a sampled field over a mesh has one fibre per vertex and an
element stands for the piecewise-linear interpolant of its vertex values.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import ContractViolation, UncertifiableLoop
from .linalg import dagger
from .mesh import SimplicialMesh, disk_mesh, interval_mesh


class Algebra:
    """Base class: a unital C*-algebra represented fibrewise on C^k."""

    kind = "abstract"
    k: int = 1
    mesh: SimplicialMesh | None = None

    @property
    def n_fibers(self) -> int:
        return 1

    @property
    def is_field(self) -> bool:
        return self.mesh is not None

    def project(self, arr: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ambient fibre values onto the algebra."""
        return arr

    def one(self) -> np.ndarray:
        return np.broadcast_to(np.eye(self.k, dtype=np.complex128), (self.n_fibers, self.k, self.k)).copy()

    def zeros(self, n: int = 1) -> "Tuple":
        return Tuple(self, np.zeros((self.n_fibers, n, self.k, self.k), dtype=np.complex128))

    def unit_tuple(self, n: int, coeffs=None) -> "Tuple":
        """Constant tuple ``(c_1 1, ..., c_n 1)``; default ``(1, 0, ..., 0)``."""
        if coeffs is None:
            coeffs = np.zeros(n, dtype=np.complex128)
            coeffs[0] = 1.0
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        data = coeffs[None, :, None, None] * self.one()[:, None, :, :]
        return Tuple(self, data)

    def random_raw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        shape = (self.n_fibers, n, self.k, self.k)
        g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
        return self.project(g)

    def catalog(self, n: int) -> list:
        """Structured elements of the unit ball of A^n used as search starts."""
        one = self.unit_tuple(n)
        out = [("zero", self.zeros(n)), ("unit", one)]
        if n > 1:
            out.append(("spread", self.unit_tuple(n, np.full(n, 1.0 / math.sqrt(n)))))
        return out

    def to_doc(self) -> dict:  # pragma: no cover - overridden
        raise NotImplementedError

    def supports_winding(self, n: int) -> bool:
        return False


class FullMatrix(Algebra):
    kind = "FullMatrix"

    def __init__(self, k: int):
        if k < 1:
            raise ContractViolation("fiber size must be >= 1", "k >= 1")
        self.k = int(k)

    def __repr__(self):
        return f"FullMatrix({self.k})"

    def to_doc(self):
        return {"kind": self.kind, "k": self.k}

    def catalog(self, n):
        out = super().catalog(n)
        k = self.k
        if k > 1:
            e11 = np.zeros((1, n, k, k), dtype=np.complex128)
            e11[0, 0, 0, 0] = 1.0
            out.append(("matrix-unit-11", Tuple(self, e11)))
            nil = np.zeros((1, n, k, k), dtype=np.complex128)
            nil[0, 0, 0, k - 1] = 1.0
            out.append(("nilpotent", Tuple(self, nil)))
            shift = np.zeros((1, n, k, k), dtype=np.complex128)
            for i in range(k - 1):
                shift[0, 0, i + 1, i] = 1.0
            out.append(("shift", Tuple(self, shift)))
        return out


class DirectSum(Algebra):
    kind = "DirectSum"

    def __init__(self, blocks):
        blocks = [int(b) for b in blocks]
        if not blocks or min(blocks) < 1:
            raise ContractViolation("every block size must be >= 1", "k >= 1")
        self.blocks = blocks
        self.k = sum(blocks)
        mask = np.zeros((self.k, self.k), dtype=bool)
        start = 0
        for b in blocks:
            mask[start:start + b, start:start + b] = True
            start += b
        self._mask = mask

    def __repr__(self):
        return f"DirectSum({self.blocks})"

    def project(self, arr):
        return np.where(self._mask, arr, 0.0)

    def to_doc(self):
        return {"kind": self.kind, "blocks": list(self.blocks)}

    def catalog(self, n):
        out = super().catalog(n)
        start = 0
        for idx, b in enumerate(self.blocks):
            p = np.zeros((1, n, self.k, self.k), dtype=np.complex128)
            p[0, 0, start:start + b, start:start + b] = np.eye(b)
            out.append((f"block-unit-{idx}", Tuple(self, p)))
            start += b
        return out


class SampledField(Algebra):
    """Continuous M_k-valued functions on a mesh, sampled at the vertices."""

    kind = "SampledField"

    def __init__(self, mesh: SimplicialMesh, k: int = 1, *, shape: str | None = None, frame=None):
        if k < 1:
            raise ContractViolation("fiber size must be >= 1", "k >= 1")
        self.mesh = mesh
        self.k = int(k)
        self.shape = shape or mesh.name.split("-")[0]
        # optional pointwise unitary frame: elements are u(p) a(p) u(p)*
        self.frame = None if frame is None else np.asarray(frame, dtype=np.complex128)

    def __repr__(self):
        return f"SampledField({self.mesh.name}, k={self.k})"

    @property
    def n_fibers(self):
        return self.mesh.n_vertices

    @property
    def resolution(self) -> int:
        try:
            return int(self.mesh.name.split("-")[1])
        except (IndexError, ValueError):
            return -1

    def to_doc(self):
        doc = {"kind": self.kind, "k": self.k, "shape": self.shape}
        if self.shape in ("disk", "interval") and self.resolution > 0:
            doc["resolution"] = self.resolution
        else:
            doc["mesh"] = self.mesh.to_doc()
        return doc

    def coords(self) -> np.ndarray:
        return self.mesh.vertices

    def scalar_field(self, values) -> np.ndarray:
        """Broadcast vertex scalars to ``(F, k, k)`` multiples of the identity."""
        values = np.asarray(values, dtype=np.complex128)
        elem = values[:, None, None] * np.eye(self.k)[None]
        return self._framed(elem)

    def _framed(self, elem):
        if self.frame is None:
            return elem
        u = self.frame if elem.ndim == 3 else self.frame[:, None]
        return u @ elem @ dagger(u)

    def coordinate(self) -> np.ndarray:
        xy = self.coords()
        if self.shape == "interval":
            return self.scalar_field(xy[:, 0])
        return self.scalar_field(xy[:, 0] + 1j * xy[:, 1])

    def random_raw(self, rng, n):
        # low-order (quadratic) interpolation keeps the Lipschitz constant modest
        xy = self.coords()
        x, y = xy[:, 0], xy[:, 1]
        basis = np.stack([np.ones_like(x), x, y, x * x - y * y, x * y], axis=0)
        if self.shape == "interval":
            basis = np.stack([np.ones_like(x), x - 0.5, (x - 0.5) ** 2], axis=0)
        nb = basis.shape[0]
        shape = (nb, n, self.k, self.k)
        coef = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0 * nb)
        vals = np.einsum("bv,bnij->vnij", basis, coef)
        return self._framed(vals)

    def catalog(self, n):
        out = super().catalog(n)
        z = self.coordinate()
        if self.shape == "interval":
            z = 2.0 * (z - 0.5 * self.one())
        zc = dagger(z)
        zero = np.zeros_like(z)

        def tup(*entries):
            entries = list(entries) + [zero] * (n - len(entries))
            return Tuple(self, np.stack(entries[:n], axis=1))

        out.append(("coordinate", tup(z)))
        out.append(("conj-coordinate", tup(zc)))
        if n > 1:
            out.append(("coordinate-pair", tup(z / math.sqrt(2), zc / math.sqrt(2))))
            out.append(("coordinate-diag", tup(z / math.sqrt(2), z / math.sqrt(2))))
        return out

    def supports_winding(self, n):
        return self.shape == "disk" and self.k == 1 and n == 1 and len(self.mesh.boundary_cycle) > 2


def algebra_from_doc(doc: dict) -> Algebra:
    kind = doc.get("kind")
    if kind == "FullMatrix":
        return FullMatrix(int(doc["k"]))
    if kind == "DirectSum":
        return DirectSum(doc["blocks"])
    if kind == "SampledField":
        k = int(doc.get("k", 1))
        if "mesh" in doc:
            return SampledField(SimplicialMesh.from_doc(doc["mesh"]), k)
        shape = doc.get("shape", "disk")
        res = int(doc.get("resolution", 64))
        if shape == "disk":
            return SampledField(disk_mesh(res), k)
        if shape == "interval":
            return SampledField(interval_mesh(res), k)
        raise ContractViolation(f"unknown field shape {shape!r}", "algebra spec")
    if kind == "Subalgebra":
        from .kk import Subalgebra

        return Subalgebra.from_doc(doc)
    raise ContractViolation(f"unknown algebra kind {kind!r}", "algebra spec")


def disk_field(resolution: int = 64, k: int = 1) -> SampledField:
    return SampledField(disk_mesh(resolution), k)


def interval_field(resolution: int = 64, k: int = 1) -> SampledField:
    return SampledField(interval_mesh(resolution), k)


# ---------------------------------------------------------------------------
# Tuples


@dataclass(frozen=True, eq=False)
class Tuple:
    """An element of A^n, identified with a column in M_{n,1}(A)."""

    algebra: Algebra
    data: np.ndarray  # (F, n, k, k)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.complex128)
        if d.ndim != 4 or d.shape[0] != self.algebra.n_fibers or d.shape[2:] != (self.algebra.k,) * 2:
            raise ContractViolation(f"tuple data has shape {d.shape}", "tuple shape")
        if not np.all(np.isfinite(d)):
            raise ContractViolation("tuple has non-finite entries", "finite entries")
        object.__setattr__(self, "data", d)

    @classmethod
    def from_elements(cls, algebra: Algebra, *elements) -> "Tuple":
        return cls(algebra, np.stack([np.asarray(e, dtype=np.complex128) for e in elements], axis=1))

    @property
    def n(self) -> int:
        return int(self.data.shape[1])

    @property
    def k(self) -> int:
        return int(self.data.shape[2])

    def entry(self, i: int) -> np.ndarray:
        return self.data[:, i]

    def stacked(self) -> np.ndarray:
        f, n, k, _ = self.data.shape
        return self.data.reshape(f, n * k, k)

    def with_stacked(self, arr) -> "Tuple":
        f, n, k, _ = self.data.shape
        return Tuple(self.algebra, np.asarray(arr).reshape(f, n, k, k))

    def gram(self) -> np.ndarray:
        """``a* a = sum_i a_i* a_i`` fibrewise."""
        s = self.stacked()
        return dagger(s) @ s

    def fiber_norms(self) -> np.ndarray:
        return np.atleast_1d(linalg.op_norm(self.stacked()))

    def norm(self) -> float:
        return float(self.fiber_norms().max())

    def right_mul(self, elem) -> "Tuple":
        return Tuple(self.algebra, self.data @ np.asarray(elem)[:, None, :, :])

    def __add__(self, other):
        return Tuple(self.algebra, self.data + other.data)

    def __sub__(self, other):
        return Tuple(self.algebra, self.data - other.data)

    def __neg__(self):
        return Tuple(self.algebra, -self.data)

    def __mul__(self, c):
        return Tuple(self.algebra, complex(c) * self.data)

    __rmul__ = __mul__

    def edge_jumps(self) -> np.ndarray:
        """Operator norms of ``a(u) - a(w)`` across every mesh edge."""
        mesh = self.algebra.mesh
        if mesh is None:
            return np.zeros(0)
        s = self.stacked()
        diff = s[mesh.edges[:, 1]] - s[mesh.edges[:, 0]]
        return np.atleast_1d(linalg.op_norm(diff))

    @property
    def lipschitz_bound(self) -> float:
        """Slope bound of the piecewise-linear interpolant (0 off a mesh)."""
        mesh = self.algebra.mesh
        if mesh is None:
            return 0.0
        return float((self.edge_jumps() / mesh.edge_lengths).max(initial=0.0))

    def oscillation(self) -> float:
        return float(self.edge_jumps().max(initial=0.0))


def tuple_norm(a: Tuple) -> float:
    """``||a|| = ||a* a||^{1/2}``, maximised over fibres."""
    return a.norm()


def product_lipschitz(la: float, norm_a: float, lb: float, norm_b: float) -> float:
    """Lipschitz budget of a product: ``L_ab <= L_a ||b|| + ||a|| L_b``."""
    return la * norm_b + norm_a * lb


@dataclass(frozen=True)
class LgCertificate:
    member: bool
    sigma_min: float  # smallest eigenvalue of a*a over all fibres
    margin: float  # effective threshold that sigma_min was compared to


def is_lg(a: Tuple, margin: float = 1e-12) -> LgCertificate:
    """Certify ``a in Lg_n(A)`` by a uniform lower bound on ``a* a``.

    On a sampled field the bound has to survive interpolation: along any
    simplex the smallest singular value drops by at most the largest jump of
    ``a`` across an edge, so the effective margin is raised to that jump
    squared.
    """
    if margin <= 0:
        raise ContractViolation("margin must be positive", "margin > 0")
    w = linalg.herm_eig(a.gram()).eigenvalues[..., 0]
    smin = float(np.min(w))
    eff = float(margin)
    if a.algebra.is_field:
        eff = max(eff, a.oscillation() ** 2)
    return LgCertificate(bool(smin > eff), smin, eff)


def random_element(algebra: Algebra, n: int, seed, scale: float = 1.0) -> Tuple:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return Tuple(algebra, scale * algebra.random_raw(rng, n))


# ---------------------------------------------------------------------------
# Winding numbers and the boundary obstruction


def winding_number(loop) -> int:
    """Winding number about 0 of a closed polygonal loop of complex samples.

    Each step must satisfy ``|w_{j+1} - w_j| < |w_j|``; then the straight
    segment between the samples avoids 0 and turns by less than pi/2, so the
    summed principal arguments are exact.
    """
    w = np.asarray(loop, dtype=np.complex128).ravel()
    if w.size == 0:
        raise UncertifiableLoop("empty loop", "nonempty loop")
    nxt = np.roll(w, -1)
    step = np.abs(nxt - w)
    mod = np.abs(w)
    bad = np.nonzero(~(step < mod))[0]
    if bad.size:
        j = int(bad[0])
        raise UncertifiableLoop(
            f"sample {j}: step {step[j]:.3e} not below modulus {mod[j]:.3e}",
            "|w_{j+1} - w_j| < |w_j|",
        )
    total = float(np.sum(np.angle(nxt / w)))
    m = round(total / (2.0 * math.pi))
    if abs(total - 2.0 * math.pi * m) > 1e-6:  # pragma: no cover - impossible under the precondition
        raise UncertifiableLoop("argument sum is not a multiple of 2 pi", "integral winding")
    return int(m)


def _segment_distance_to_origin(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    d = q - p
    dd = np.abs(d) ** 2
    t = np.where(dd > 0, -np.real(np.conj(p) * d) / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(p + t * d)


@dataclass(frozen=True)
class BoundaryObstruction:
    winding: int
    rho: float  # min of |a| over the (piecewise-linear) boundary loop


def boundary_obstruction(a: Tuple) -> BoundaryObstruction | None:
    """Winding data of a scalar element on the boundary of a disk field.

    Returns None if the algebra has no usable boundary or the loop is not
    certifiable.  When the winding is nonzero, every invertible ``g`` has
    ``||a - g|| >= rho``.
    """
    alg = a.algebra
    if not alg.supports_winding(a.n):
        return None
    cyc = np.asarray(alg.mesh.boundary_cycle)
    w = a.data[cyc, 0, 0, 0]
    try:
        m = winding_number(w)
    except UncertifiableLoop:
        return None
    rho = float(_segment_distance_to_origin(w, np.roll(w, -1)).min())
    return BoundaryObstruction(m, rho)


def cmath_loop(order: int, samples: int) -> np.ndarray:
    """Samples of ``exp(i order theta)`` around the circle."""
    return np.array([cmath.exp(1j * order * 2 * math.pi * j / samples) for j in range(samples)])
