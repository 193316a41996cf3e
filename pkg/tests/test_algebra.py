import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srkit.algebra import (
    DirectSum, FullMatrix, SampledField, Tuple, algebra_from_doc, boundary_obstruction, cmath_loop, disk_field,
    interval_field, is_lg, random_element, tuple_norm, winding_number,
)
from srkit.errors import ContractViolation, UncertifiableLoop
from srkit.mesh import SimplicialMesh, build_mesh, disk_mesh, interval_mesh

# ------------------------------------------------------------------ meshes


def test_interval_mesh_shape():
    m = interval_mesh(16)
    assert m.n_vertices == 17 and len(m.edges) == 16 and m.dimension == 1
    assert m.max_edge_length == pytest.approx(1 / 16)


@pytest.mark.parametrize("res", [1, 4, 16, 32])
def test_disk_mesh_counts_and_euler(res):
    m = disk_mesh(res)
    v = 1 + 3 * res * (res + 1)
    assert m.n_vertices == v
    # closed disk has Euler characteristic 1
    assert m.n_vertices - len(m.edges) + len(m.triangles) == 1
    assert len(m.boundary_cycle) == 6 * res
    assert np.allclose(np.linalg.norm(m.vertices[list(m.boundary_cycle)], axis=1), 1.0)


def test_disk_boundary_is_counter_clockwise():
    m = disk_mesh(8)
    z = m.vertices[list(m.boundary_cycle)] @ np.array([1.0, 1j])
    assert winding_number(z) == 1


def test_mesh_round_trip(tmp_path):
    m = disk_mesh(5)
    path = tmp_path / "mesh.json"
    m.save(path)
    back = SimplicialMesh.load(path)
    assert np.array_equal(back.triangles, m.triangles)
    assert np.array_equal(back.edges, m.edges)
    assert back.boundary_cycle == m.boundary_cycle
    assert np.array_equal(back.vertices, m.vertices)


def test_mesh_rejects_disconnected():
    with pytest.raises(ContractViolation):
        build_mesh([[0, 0], [1, 0], [2, 0], [3, 0]], [[0, 1], [2, 3]], np.zeros((0, 3)))


def test_mesh_rejects_missing_triangle_edge():
    with pytest.raises(ContractViolation):
        build_mesh([[0, 0], [1, 0], [0, 1]], [[0, 1], [1, 2]], [[0, 1, 2]], (0, 1, 2))


def test_mesh_rejects_bad_boundary_cycle():
    verts = [[0, 0], [1, 0], [0, 1], [1, 1]]
    tris = [[0, 1, 2], [1, 2, 3]]
    edges = [[0, 1], [0, 2], [1, 2], [1, 3], [2, 3]]
    build_mesh(verts, edges, tris, (0, 1, 3, 2))
    with pytest.raises(ContractViolation):
        build_mesh(verts, edges, tris, (0, 1, 2, 3))


# ------------------------------------------------------------------ tuple norm


def test_tuple_norm_trivial_examples():
    c = FullMatrix(1)
    assert tuple_norm(Tuple(c, np.array([1.0, 0.0]).reshape(1, 2, 1, 1))) == 1.0
    assert tuple_norm(c.zeros(3)) == 0.0


def test_tuple_norm_is_stacked_largest_singular_value():
    t = random_element(FullMatrix(3), 2, 7)
    s = t.stacked()[0]
    assert s.shape == (6, 3)
    assert tuple_norm(t) == pytest.approx(np.linalg.svd(s, compute_uv=False)[0], rel=1e-12)
    gram = s.conj().T @ s
    assert tuple_norm(t) == pytest.approx(math.sqrt(np.linalg.norm(gram, 2)), rel=1e-12)


def test_tuple_norm_field_is_max_over_vertices():
    alg = disk_field(6)
    z = dict(alg.catalog(1))["coordinate"]
    assert tuple_norm(z) == pytest.approx(1.0)
    assert tuple_norm(z * 0.5) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**31 - 1), st.floats(-3, 3))
def test_tuple_norm_is_a_norm(k, n, seed, c):
    alg = FullMatrix(k)
    a, b = random_element(alg, n, [seed, 0]), random_element(alg, n, [seed, 1])
    assert tuple_norm(a + b) <= tuple_norm(a) + tuple_norm(b) + 1e-10
    assert tuple_norm(a * c) == pytest.approx(abs(c) * tuple_norm(a), rel=1e-10, abs=1e-12)
    assert tuple_norm(a * 1j) == pytest.approx(tuple_norm(a), rel=1e-12)


# ------------------------------------------------------------------ Lg membership


def test_is_lg_trivial_examples():
    alg = FullMatrix(2)
    cert = is_lg(alg.unit_tuple(1))
    assert cert.member and cert.sigma_min == pytest.approx(1.0)
    assert not is_lg(alg.zeros(1)).member
    with pytest.raises(ContractViolation):
        is_lg(alg.unit_tuple(1), 0.0)


def test_is_lg_disk_coordinate_is_not_member():
    alg = disk_field(8)
    assert not is_lg(dict(alg.catalog(1))["coordinate"]).member


def test_is_lg_field_margin_accounts_for_oscillation():
    alg = interval_field(4)
    # vertex values 0.3 .. 1.3: sigma_min 0.09 but the jump 0.25 makes margin 0.0625
    vals = alg.scalar_field(0.3 + alg.coords()[:, 0])
    cert = is_lg(Tuple(alg, vals[:, None]))
    assert cert.margin == pytest.approx(0.0625)
    assert cert.member
    coarse = interval_field(1)
    vals = coarse.scalar_field(np.array([0.3, 1.3]))
    assert not is_lg(Tuple(coarse, vals[:, None])).member


def test_random_matrix_tuples_are_members():
    alg = FullMatrix(4)
    assert all(is_lg(random_element(alg, 1, s), 1e-12).member for s in range(100))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**31 - 1), st.floats(1e-14, 1.0), st.floats(0.0, 1.0))
def test_is_lg_monotone_in_margin(k, n, seed, m1, frac):
    a = random_element(FullMatrix(k), n, seed, 0.3)
    m2 = m1 * frac + 1e-16
    if is_lg(a, m1).member:
        assert is_lg(a, m2).member


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 2**31 - 1))
def test_matrix_tuples_have_frequency_one(k, n, seed):
    assert is_lg(random_element(FullMatrix(k), n, seed)).member


# ------------------------------------------------------------------ random elements and algebras


def test_random_element_determinism_and_scale():
    alg = DirectSum([1, 2])
    a, b = random_element(alg, 2, 3), random_element(alg, 2, 3)
    assert np.array_equal(a.data, b.data)
    assert tuple_norm(random_element(alg, 2, 3, 0.0)) == 0.0


def test_direct_sum_projection_is_block_diagonal():
    alg = DirectSum([1, 2])
    d = random_element(alg, 1, 0).data[0, 0]
    assert np.allclose(d[0, 1:], 0) and np.allclose(d[1:, 0], 0)


def test_field_random_element_has_finite_lipschitz():
    t = random_element(disk_field(16), 1, 0)
    assert 0 < t.lipschitz_bound < 10


@pytest.mark.parametrize("alg", [FullMatrix(3), DirectSum([1, 2]), disk_field(8), interval_field(16)])
def test_algebra_doc_round_trip(alg):
    back = algebra_from_doc(alg.to_doc())
    assert back.to_doc() == alg.to_doc()
    assert back.n_fibers == alg.n_fibers and back.k == alg.k


def test_algebra_doc_with_explicit_mesh():
    mesh = interval_mesh(3)
    alg = SampledField(mesh, 1, shape="custom")
    back = algebra_from_doc(alg.to_doc())
    assert np.array_equal(back.mesh.vertices, mesh.vertices)


# ------------------------------------------------------------------ winding


def test_winding_examples():
    assert winding_number(cmath_loop(1, 64)) == 1
    assert winding_number(np.ones(8)) == 0
    # oracle: the argument of exp(2 i theta) advances by 4 pi over the loop
    assert winding_number(cmath_loop(2, 64)) == 2
    assert winding_number(cmath_loop(-3, 64)) == -3


def test_winding_rejects_coarse_loop():
    with pytest.raises(UncertifiableLoop):
        winding_number(cmath_loop(2, 4))


@settings(max_examples=40, deadline=None)
@given(st.integers(-4, 4), st.integers(0, 200), st.floats(0.2, 3.0))
def test_winding_rotation_and_reversal(order, shift, radius):
    loop = radius * cmath_loop(order, 64)
    m = winding_number(loop)
    assert m == order
    assert winding_number(np.roll(loop, shift)) == m
    assert winding_number(loop[::-1]) == -m


def test_boundary_obstruction_matches_chord_distance():
    res = 64
    obs = boundary_obstruction(dict(disk_field(res).catalog(1))["coordinate"])
    assert obs.winding == 1
    # closest point of a chord subtending 2 pi / (6 res) on the unit circle
    assert obs.rho == pytest.approx(math.cos(math.pi / (6 * res)), abs=1e-12)
    assert obs.rho == pytest.approx(0.99996653391, abs=1e-10)


def test_boundary_obstruction_absent_off_disk():
    assert boundary_obstruction(FullMatrix(2).unit_tuple(1)) is None
    assert boundary_obstruction(disk_field(4).unit_tuple(2)) is None
