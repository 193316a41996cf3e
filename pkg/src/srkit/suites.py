"""Randomised verification suites for the shift, section and distance constructions.

Each instance draws its own RNG stream from ``(seed, index)``, so results do
not depend on execution order.  Pass/fail is decided by an oracle that does
not share code with the construction: numpy's LAPACK eigensolver and SVD.
"""

from __future__ import annotations

import numpy as np

from .algebra import FullMatrix, Tuple, is_lg
from .errors import GapError
from .linalg import DEFAULT_GAP
from .stablerank import dist_to_lg, dist_upper_candidate, section_at_level, shift_into_lg

LAMBDA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


def _random_tuple(rng, k: int, n: int, scale: float = 1.0) -> Tuple:
    g = (rng.standard_normal((1, n, k, k)) + 1j * rng.standard_normal((1, n, k, k))) / np.sqrt(2 * k)
    return Tuple(FullMatrix(k), scale * g)


def _oracle_sigma_min_sq(t: Tuple) -> float:
    s = t.stacked()[0]
    return float(np.linalg.eigvalsh(s.conj().T @ s)[0])


def _oracle_norm(t: Tuple) -> float:
    return float(np.linalg.norm(t.stacked()[0], 2))


def shift_suite(instances: int = 1000, seed: int = 0, *, margin: float = 1e-8) -> dict:
    passed = 0
    failures = []
    for i in range(instances):
        rng = np.random.default_rng([seed, 1, i])
        k = int(rng.integers(1, 6))
        n = int(rng.integers(1, 4))
        a = _random_tuple(rng, k, n)
        while True:
            b = a + _random_tuple(rng, k, n, 0.5)
            if is_lg(b, margin).member:
                break
        beta = (a - b).norm() + 0.1
        out = shift_into_lg(a, b, beta)
        ok = is_lg(out, margin).member and _oracle_sigma_min_sq(out) > margin
        passed += ok
        if not ok:
            failures.append(i)
    return {"suite": "shift", "instances": instances, "passed": passed, "failures": failures[:20]}


def _oracle_section_residual(a: Tuple, s: Tuple, gamma: float) -> float:
    m = a.stacked()[0]
    u, sv, vh = np.linalg.svd(m, full_matrices=False)
    keep = sv > 1e-10 * max(sv.max(), 1e-300)
    v = (u[:, keep]) @ vh[keep]
    w, q = np.linalg.eigh(m @ m.conj().T)
    absadj = np.sqrt(np.maximum(w, 0.0))
    high = q[:, absadj > gamma]
    proj = high @ high.conj().T  # 1 - f_gamma
    return float(np.linalg.norm(proj @ (v - s.stacked()[0]), 2))


def _gap_level(rng, a: Tuple, delta: float):
    sv = np.sqrt(np.maximum(np.linalg.eigvalsh(a.stacked()[0] @ a.stacked()[0].conj().T), 0.0))
    sv = np.unique(np.round(sv, 12))
    gaps = [(lo, hi) for lo, hi in zip(sv[:-1], sv[1:]) if hi - lo > 20 * delta and hi > 1e-3]
    if not gaps:
        return None
    lo, hi = gaps[int(rng.integers(len(gaps)))]
    return float(lo + (hi - lo) * rng.uniform(0.3, 0.7))


def section_suite(instances: int = 500, seed: int = 0, *, tol: float = 1e-7, delta: float = DEFAULT_GAP) -> dict:
    passed = 0
    worst = 0.0
    failures = []
    for i in range(instances):
        rng = np.random.default_rng([seed, 2, i])
        while True:
            k = int(rng.integers(2, 6))
            n = int(rng.integers(1, 4))
            a = _random_tuple(rng, k, n)
            gamma = _gap_level(rng, a, delta)
            if gamma is None:
                continue
            b = a + _random_tuple(rng, k, n, 0.01 * gamma)
            if (a - b).norm() < gamma and is_lg(b, 1e-12).member:
                break
        sec = section_at_level(a, gamma, b, delta=delta)
        res = _oracle_section_residual(a, sec.s, gamma)
        worst = max(worst, res, sec.residual)
        ok = res <= tol and sec.residual <= tol and is_lg(sec.s, 1e-12).member
        passed += ok
        if not ok:
            failures.append(i)
    return {
        "suite": "section", "instances": instances, "passed": passed, "worst_residual": worst,
        "failures": failures[:20],
    }


def distance_suite(instances: int = 500, seed: int = 0, *, tol: float = 1e-8, delta: float = DEFAULT_GAP) -> dict:
    """Candidate bound ``||a - c(lam)|| <= lam`` and consistency with sections."""
    bound_ok = 0
    checks = 0
    section_hits = 0
    section_ok = 0
    failures = []
    for i in range(instances):
        rng = np.random.default_rng([seed, 3, i])
        k = int(rng.integers(1, 5))
        n = int(rng.integers(1, 4))
        a = _random_tuple(rng, k, n)
        a = a * (1.0 / _oracle_norm(a))
        if rng.uniform() < 0.5 and k > 1:
            # rank-deficient tuples make the sections non-trivial
            m = a.stacked()[0]
            u, sv, vh = np.linalg.svd(m, full_matrices=False)
            sv[-1] = 0.0
            a = a.with_stacked((u * sv) @ vh)
        cert = dist_to_lg(a, budget=64)
        inst_ok = True
        for lam in LAMBDA_GRID:
            c, _ = dist_upper_candidate(a, lam)
            checks += 1
            achieved = _oracle_norm(a - c)
            if achieved <= lam + tol:
                bound_ok += 1
            else:
                inst_ok = False
            b = a + (0.5 * lam) * a.algebra.unit_tuple(n)
            if not is_lg(b, 1e-12).member or not (a - b).norm() < lam:
                continue
            try:
                section_at_level(a, lam, b, delta=delta)
            except GapError:
                continue
            section_hits += 1
            if cert.upper <= lam + 1e-6:
                section_ok += 1
            else:
                inst_ok = False
        if not inst_ok:
            failures.append(i)
    return {
        "suite": "distance",
        "instances": instances,
        "bound_checks": checks,
        "bound_passed": bound_ok,
        "section_levels": section_hits,
        "section_consistent": section_ok,
        "failures": failures[:20],
    }
