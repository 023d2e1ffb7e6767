import json

import numpy as np
import pytest

from derham.assembly import (BrokenSpace, assemble_d, assemble_space,
                             containment_residual, dim_formula, dof_savings,
                             family_row, homogeneous_row_report,
                             interpolation_split_residual, mixed_sequence,
                             rank_of, restrict_homogeneous, space_equal,
                             verify_exactness, verify_row, complex_residual,
                             verify_decomposition)
from derham.elements import p_min
from derham.mesh import cube_center_fan_grid


# -- assembled dimensions vs closed forms ----------------------------------------

FAMILY_CASES_2D = [(1, k) for k in range(3)] + [(0, k) for k in range(3)] + \
                  [(2, k) for k in range(3)]
FAMILY_CASES_3D = [(1, k) for k in range(4)] + [(2, k) for k in range(4)] + \
                  [("hz", 2), ("minus", 2)]


@pytest.mark.parametrize("r,k", FAMILY_CASES_2D)
def test_dims_match_formula_2d(meshes, r, k):
    for name in ("tri", "square", "tri3", "split", "annulus"):
        m = meshes[name]
        p0 = p_min(r, k, 2)
        for p in (p0, p0 + 1):
            s = assemble_space(m, r, p, k)
            assert s.dim == dim_formula(r, p, k, 2, m.counts), (name, r, p, k)


@pytest.mark.parametrize("r,k", FAMILY_CASES_3D)
def test_dims_match_formula_3d(meshes, r, k):
    for name in ("tet", "tet2", "tet3"):
        m = meshes[name]
        p0 = p_min(r, k, 3)
        for p in (p0, p0 + 1):
            s = assemble_space(m, r, p, k)
            assert s.dim == dim_formula(r, p, k, 3, m.counts), (name, r, p, k)


def test_known_dimension_examples(meshes):
    assert assemble_space(meshes["square"], 1, 3, 0).dim == 14
    assert assemble_space(meshes["tri"], 1, 2, 1).dim == 12
    assert assemble_space(meshes["tet"], 2, 3, 2).dim == 60
    assert assemble_space(meshes["tet"], "hz", 2, 2).dim == 30
    assert assemble_space(meshes["tet"], 2, 4, 1).dim == 105
    # r=1, k=2, n=2 global dimension is C(p+2,2) per cell
    sq = meshes["square"]
    assert assemble_space(sq, 1, 2, 2).dim == 6 * 2


def test_1d_dims(meshes):
    m = meshes["interval"]
    assert assemble_space(m, 1, 3, 0).dim == 2 * 4 + 0 * 3
    assert assemble_space(m, 1, 2, 1).dim == 4 + 1 * 3


# -- operators ---------------------------------------------------------------------

def test_grad_rank_1d(meshes):
    m = meshes["interval"]
    src = assemble_space(m, 1, 4, 0)
    dst = assemble_space(m, 1, 3, 1)
    D = assemble_d(src, dst)
    assert rank_of(D.array) == src.dim - 1


def test_dd_zero_2d(meshes):
    _, spaces, ops = verify_row(meshes["square"], family_row(2, 1, 2))
    assert complex_residual(ops[1], ops[0]) < 1e-10


def test_div_onto_2d(meshes):
    m = meshes["square"]
    src = assemble_space(m, 1, 3, 1)
    dst = assemble_space(m, 1, 2, 2)
    D = assemble_d(src, dst)
    assert rank_of(D.array) == dst.dim


def test_containment_residual_small(meshes):
    m = meshes["square"]
    src = assemble_space(m, 1, 3, 0)
    dst = assemble_space(m, 1, 2, 1)
    assert containment_residual(src, dst) < 1e-8


def test_wrong_pairing_rejected(meshes):
    m = meshes["square"]
    src = assemble_space(m, 1, 4, 0)
    dst = assemble_space(m, 1, 2, 1)   # degree too low for the gradient image
    with pytest.raises(ValueError, match="wrong family pairing"):
        assemble_d(src, dst)
    # continuity violation: gradients of merely-C0 functions have two-valued
    # vertex data, which the cross-cell consistency check rejects
    lag = assemble_space(m, 0, 3, 0)
    sten = assemble_space(m, 1, 2, 1)
    with pytest.raises(RuntimeError, match="disagrees"):
        assemble_d(lag, sten)


def test_export_coo_format(meshes):
    m = meshes["interval"]
    D = assemble_d(assemble_space(m, 1, 3, 0), assemble_space(m, 1, 2, 1))
    text = D.export_coo()
    lines = text.strip().split("\n")
    rows, cols, nnz = (int(x) for x in lines[0].split())
    assert rows == D.array.shape[0] and cols == D.array.shape[1]
    assert nnz == len(lines) - 1 == np.count_nonzero(D.array)
    i, j, v = lines[1].split()
    assert D.array[int(i), int(j)] == float(v)


# -- exactness ----------------------------------------------------------------------

@pytest.mark.parametrize("name,r,p", [
    ("interval", 0, 2), ("interval", 1, 2), ("interval", 1, 3), ("interval", 2, 5),
    ("square", 0, 2), ("square", 1, 1), ("square", 1, 2), ("tri3", 1, 1),
    ("square", 2, 2), ("tri", 2, 2), ("split", 2, 2),
])
def test_exactness_contractible(meshes, name, r, p):
    rep = verify_exactness(meshes[name], r, p)
    assert rep.passed, rep.to_json()
    assert rep.surjective_end


def test_exactness_classical_3d(meshes):
    assert verify_exactness(meshes["tet2"], 0, 3).passed


def test_exactness_moderate_mesh():
    # eight cells: exercises shared-DoF identification beyond tiny meshes
    from derham.mesh import triangle_grid
    m = triangle_grid(2)
    assert m.counts == (9, 16, 8, 0)
    rep = verify_exactness(m, 1, 2)
    assert rep.passed
    rep2 = verify_exactness(m, 2, 2)
    assert rep2.passed


def test_row_with_containment_check(meshes):
    rep, _, _ = verify_row(meshes["square"], family_row(2, 1, 2),
                           check_containment=True)
    assert rep.passed


def test_exactness_3d_rows(meshes):
    rep = verify_exactness(meshes["tet"], 1, 0)
    assert rep.passed
    rep = verify_exactness(meshes["tet2"], 1, 0)
    assert rep.passed
    rep = verify_exactness(meshes["tet"], 2, 2)
    assert rep.passed
    # next degree window of the same family
    rep = verify_exactness(meshes["tet"], 2, 3)
    assert rep.passed and rep.dims == [84, 168, 105, 20]


def test_annulus_harmonic_class(meshes):
    rep = verify_exactness(meshes["annulus"], 1, 1, expected_betti=[1, 1, 0])
    assert rep.betti == [1, 1, 0]
    assert rep.passed


def test_circle_harmonic_class():
    from derham.mesh import SimplicialMesh
    circle = SimplicialMesh([[0.0], [1.0], [2.0]], [(0, 1), (1, 2), (0, 2)])
    rep = verify_exactness(circle, 1, 3, expected_betti=[1, 1])
    assert rep.betti == [1, 1] and rep.passed


def test_report_json_round_trip(meshes):
    rep = verify_exactness(meshes["square"], 1, 1)
    data = json.loads(rep.to_json())
    assert data["pass"] is True
    assert data["dims"] == rep.dims


def test_mixed_sequence(meshes):
    for p in (3, 4):
        rep = mixed_sequence(meshes["tet"], p)
        assert rep.passed, rep.to_json()
    rep = mixed_sequence(meshes["tet2"], 3)
    assert rep.passed


# -- homogeneous boundary conditions ---------------------------------------------

def test_homogeneous_counts_square(meshes):
    m = meshes["square"]
    rep = homogeneous_row_report(m, 2, m.classify_boundary())
    assert rep["dims"] == rep["formulas"]
    assert rep["alternating"] == 0
    assert rep["exact"] and rep["image_homogeneous"]


def test_homogeneous_counts_split_edge(meshes):
    m = meshes["split"]
    cls = m.classify_boundary()
    rep = homogeneous_row_report(m, 2, cls)
    assert rep["dims"] == rep["formulas"]
    assert rep["alternating"] == 0
    # one non-corner boundary vertex retains one extra DoF in each slot
    sq = meshes["square"]
    all_corner = homogeneous_row_report(sq, 2, sq.classify_boundary())
    base0 = assemble_space(sq, 1, 4, 0).dim
    split0 = assemble_space(m, 1, 4, 0).dim
    # compare removal counts rather than dims (the meshes differ)
    removed_allcorner = base0 - all_corner["dims"][0]
    removed_split = split0 - rep["dims"][0]
    E0_sq, E0_sp = 4, 5
    assert removed_allcorner == (4 - 3) * E0_sq + 3 * 4
    assert removed_split == (4 - 3) * E0_sp + 3 * 5 - 1


def test_homogeneous_3d_scalar_consistency(meshes):
    import math
    # every entity of a single tet is a boundary corner entity, so only the
    # interior moments survive; the two-tet mesh adds its interior face
    tet = meshes["tet"]
    cls = tet.classify_boundary()
    for p in (5, 6):
        hom = restrict_homogeneous(assemble_space(tet, 2, p, 0), cls)
        assert hom.dim == math.comb(p - 1, 3)
    two = meshes["tet2"]
    cls2 = two.classify_boundary()
    for p in (5, 6):
        hom = restrict_homogeneous(assemble_space(two, 2, p, 0), cls2)
        expected = 2 * math.comb(p - 1, 3) + (math.comb(p - 4, 2) if p >= 6 else 0)
        assert hom.dim == expected


def test_homogeneous_3d_noncorner_vertex():
    import math
    from derham.mesh import SimplicialMesh
    # square base fanned around its center with one apex: the center is a
    # non-corner boundary vertex (keeps 4 of 10 vertex DoFs), its four base
    # edges are non-corner (keep p-4 each), and the center-apex edge is
    # interior (keeps all 3p-13 edge DoFs)
    m = SimplicialMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
                        [0.5, 0.5, 0], [0.5, 0.5, 1.0]],
                       [(0, 1, 4, 5), (1, 2, 4, 5), (2, 3, 4, 5), (0, 3, 4, 5)])
    cls = m.classify_boundary()
    assert cls.noncorner_boundary_vertices == {4}
    assert len(cls.noncorner_boundary_edges) == 4
    for p in (5, 6):
        hom = restrict_homogeneous(assemble_space(m, 2, p, 0), cls)
        expected = (4 * math.comb(p - 1, 3)
                    + 4 * (math.comb(p - 4, 2) if p >= 6 else 0)
                    + 4 + 4 * (p - 4)
                    + 2 * (p - 4) + max(p - 5, 0))
        assert hom.dim == expected


def test_homogeneous_3d_noncorner_edge():
    import math
    from derham.mesh import SimplicialMesh
    # two tets over a split square base with a shared apex: the diagonal base
    # edge sits in two coplanar boundary faces, so its out-of-plane normal
    # derivative moments stay free (p - 4 of them)
    m = SimplicialMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0],
                        [0.4, 0.4, 1.0]],
                       [(0, 1, 2, 4), (1, 3, 2, 4)])
    cls = m.classify_boundary()
    assert len(cls.noncorner_boundary_edges) == 1
    for p in (5, 6):
        hom = restrict_homogeneous(assemble_space(m, 2, p, 0), cls)
        expected = (2 * math.comb(p - 1, 3)
                    + (math.comb(p - 4, 2) if p >= 6 else 0) + (p - 4))
        assert hom.dim == expected


# -- space equality ---------------------------------------------------------------

def test_box_identities(meshes):
    two = meshes["tet2"]
    sq = meshes["square"]
    eq, _ = space_equal(assemble_space(two, 1, 2, 2), assemble_space(two, 0, 2, 2))
    assert eq
    eq, _ = space_equal(assemble_space(two, 1, 1, 3), assemble_space(two, 0, 1, 3))
    assert eq
    eq, _ = space_equal(assemble_space(sq, 1, 1, 2), assemble_space(sq, 0, 1, 2))
    assert eq
    eq, info = space_equal(assemble_space(sq, 1, 2, 1), assemble_space(sq, 0, 2, 1))
    assert not eq
    assert info["dims"][0] != info["dims"][1]


# -- decompositions ----------------------------------------------------------------

@pytest.mark.parametrize("p", [2, 3])
def test_decomposition_2d(meshes, p):
    rep = verify_decomposition(2, p, meshes["square"])
    assert rep["equal"]
    assert rep["continuous_strictly_smaller"]


def test_decomposition_3d(meshes):
    rep = verify_decomposition(3, 4, meshes["tet"])
    assert rep["equal"]
    rep = verify_decomposition(3, 4, meshes["tet2"])
    assert rep["equal"]
    assert rep["continuous_strictly_smaller"]


def test_interpolation_split(meshes):
    res = interpolation_split_residual(meshes["tet2"], 4)
    assert res < 1e-6


# -- savings and frames -------------------------------------------------------------

def test_dof_savings_assembly_matches_closed_forms():
    g = cube_center_fan_grid(1, 1, 1)
    rep = dof_savings(4, g)
    assert rep["dim_classical"] == rep["closed_classical"]
    assert rep["dim_nodal"] == rep["closed_nodal"]
    assert rep["per_tet_estimate_classical"] == 170.0
    assert rep["per_tet_estimate_nodal"] == 30.5
    assert rep["per_tet_estimate_difference"] == 139.5


def test_frame_independence(meshes):
    m = meshes["tet2"]
    rotated = m.with_rotated_edge_normals(99)
    # the rotation must actually change the normal pair
    assert not np.allclose(m.frame(1, 0).normals, rotated.frame(1, 0).normals)
    a = assemble_space(m, "hz", 3, 2)
    b = assemble_space(rotated, "hz", 3, 2)
    assert a.dim == b.dim
    da = assemble_d(a, assemble_space(m, 0, 2, 3))
    db = assemble_d(b, assemble_space(rotated, 0, 2, 3))
    assert rank_of(da.array) == rank_of(db.array)


def test_frame_independence_derivative_dofs(meshes):
    # the C2-vertex scalar family carries edge normal-derivative DoFs
    m = meshes["tet2"]
    rotated = m.with_rotated_edge_normals(7)
    a = assemble_space(m, 2, 5, 0)
    b = assemble_space(rotated, 2, 5, 0)
    assert a.dim == b.dim
    da = assemble_d(a, assemble_space(m, 2, 4, 1))
    db = assemble_d(b, assemble_space(rotated, 2, 4, 1))
    assert rank_of(da.array) == rank_of(db.array) == a.dim - 1


def test_boundary_derivative_resolution(meshes):
    from derham.assembly import boundary_derivative_resolution
    m = meshes["square"]
    A = boundary_derivative_resolution(m, 0)
    # the two boundary edges at the origin are axis aligned, so the axis
    # derivatives resolve directly onto the edge-tangential ones
    assert np.abs(np.abs(A) - np.eye(2)).max() < 1e-12
    split = meshes["split"]
    (nc,) = split.classify_boundary().noncorner_boundary_vertices
    with pytest.raises(ValueError, match="non-corner"):
        boundary_derivative_resolution(split, nc)


def test_broken_space_rank_of_global(meshes):
    m = meshes["square"]
    s = assemble_space(m, 1, 2, 1)
    br = BrokenSpace(m, 2, 1)
    mat = br.matrix_of_space(s)
    assert rank_of(mat) == s.dim
