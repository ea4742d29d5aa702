import numpy as np
import pytest

from demcrack.fracture import compute_cell_fields
from demcrack.material import antiplane, from_young_poisson
from demcrack.mesh import CRACKED, INTERIOR, MeshError, rectangle_tags
from demcrack.reconstruction import (
    DIRICHLET_EVAL,
    DegenerateStencilError,
    INTERIOR_SYMMETRIC,
    NEUMANN_BARYCENTRIC,
    ReconstructionPlan,
    StalePlanError,
    barycentric_weights,
    build_dirichlet_value,
    build_interior_stencil,
    build_neumann_stencil,
    cell_gradient,
    connected_cells,
    p1_cell_reconstruction,
    reconstruct_facet_values,
)
from demcrack.system import DirichletBC, LoadSpec, NeumannBC, StiffnessAssembly, dirichlet_data
from oracles import jittered_square, random_splits, single_triangle

A = np.array([[0.3, -1.2], [0.7, 2.0]])
b = np.array([0.5, -0.25])


def affine(x):
    return x @ A.T + b


def test_barycentric_weights_reproduce_point():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    x = np.array([0.2, 0.3])
    w = barycentric_weights(pts, x, 1.0)
    assert np.isclose(w.sum(), 1.0) and np.allclose(w @ pts, x)
    assert np.allclose(barycentric_weights(pts, pts[1], 1.0), [0, 1, 0])
    assert barycentric_weights(np.array([[0, 0], [1, 0], [2, 0.0]]), x, 1.0) is None


def test_symmetric_stencil_structure(jittered):
    for f in np.flatnonzero(jittered.status == INTERIOR):
        st = build_interior_stencil(jittered, f)
        assert st.kind == INTERIOR_SYMMETRIC
        wm, wp = st.weights[:st.n_minus], st.weights[st.n_minus:]
        assert np.isclose(wm.sum(), 0.5) and np.isclose(wp.sum(), 0.5)
        x = jittered.cell_barycenters[st.cells]
        h = jittered.facet_lengths[f]
        assert np.allclose(2 * wm @ x[:st.n_minus], jittered.facet_barycenters[f], atol=1e-12 * h)
        if not st.fallback:
            assert not set(st.cells[:st.n_minus]) & set(st.cells[st.n_minus:])


def test_centroid_gives_one_sixth_weights():
    # x_F at the centroid of both triangles: every symmetric weight is 1/2 * 1/3
    tri_m = np.array([[-1.0, -1.0], [2.0, 0.0], [-1.0, 1.0]])
    tri_p = np.array([[1.0, 1.0], [-2.0, 0.5], [1.0, -1.5]])
    x = tri_m.mean(axis=0)
    assert np.allclose(x, tri_p.mean(axis=0))
    w = 0.5 * np.concatenate([barycentric_weights(tri_m, x, 1.0),
                              barycentric_weights(tri_p, x, 1.0)])
    assert np.allclose(w, 1 / 6)


def test_interior_stencil_reproduces_affine(jittered):
    for f in np.flatnonzero(jittered.status == INTERIOR):
        st = build_interior_stencil(jittered, f)
        got = st.apply(affine(jittered.cell_barycenters))
        assert np.allclose(got, affine(jittered.facet_barycenters[f]), atol=1e-12)


def test_neumann_stencil_interpolates_own_barycentre():
    m = jittered_square(4, seed=2)
    f = int(np.flatnonzero(m.on_outer_boundary)[0])
    st = build_neumann_stencil(m, f)
    assert st.kind == NEUMANN_BARYCENTRIC and len(st.cells) >= 3
    assert np.isclose(st.weights.sum(), 1.0)
    # weights at one of the barycentres are the unit vector
    pts = m.cell_barycenters[st.cells]
    w = barycentric_weights(pts[:3], pts[1], 1.0)
    assert np.allclose(w, [0, 1, 0])


def test_neumann_fallback_on_two_triangle_square(square):
    # the two barycentres cannot reproduce a boundary midpoint: the enlarged
    # fallback is tried and the failure names the facet
    f = int(np.flatnonzero(square.on_outer_boundary)[0])
    with pytest.raises(DegenerateStencilError) as exc:
        build_neumann_stencil(square, f)
    assert exc.value.entity == ("facet", f)


def test_interior_facet_of_square_uses_two_cell_fallback(square):
    f = int(np.flatnonzero(square.status == INTERIOR)[0])
    st = build_interior_stencil(square, f)
    assert st.fallback
    assert np.allclose(st.apply(affine(square.cell_barycenters)),
                       affine(square.facet_barycenters[f]), atol=1e-12)


def test_single_triangle_is_degenerate():
    m = single_triangle()
    with pytest.raises(MeshError, match="facet 0"):
        build_neumann_stencil(m, 0)


def test_interior_stencil_requires_interior_facet(square):
    f = int(np.flatnonzero(square.on_outer_boundary)[0])
    with pytest.raises(MeshError):
        build_interior_stencil(square, f)


def test_dirichlet_values():
    m = jittered_square(2)
    assert np.allclose(build_dirichlet_value(m, 0, lambda x, t, n: 0 * x, 1.0), 0.0)
    got = build_dirichlet_value(m, 3, lambda x, t, n: t * x, 1.0)
    assert np.allclose(got, m.facet_barycenters[3])
    got = build_dirichlet_value(m, 3, lambda x, t, n: x, 1.0, mask=[False, True])
    assert got[0] == 0.0 and got[1] == m.facet_barycenters[3, 1]


def _plan(mesh, dim=2, mask=(True, True)):
    loads = LoadSpec(dirichlet=[DirichletBC("left", lambda x, t, n: affine(x)[:, :dim], mask)],
                     neumann=[NeumannBC(t) for t in ("right", "top", "bottom")])
    m = loads.apply_to_mesh(mesh, dim)
    return ReconstructionPlan(mesh, dim, m), loads


@pytest.mark.parametrize("mask", [(True, True), (False, True)])
def test_affine_patch_exactness(jittered, mask):
    plan, loads = _plan(jittered, mask=mask)
    v = affine(jittered.cell_barycenters)
    g = dirichlet_data(jittered, loads, 1.0, 2)
    Y = reconstruct_facet_values(plan, v, g)
    exact = affine(jittered.facet_barycenters)
    for f in range(jittered.n_facets):
        assert np.abs(Y[f, 0] - exact[f]).max() <= 1e-11 * np.abs(exact).max()
    G = cell_gradient(jittered, Y)
    assert np.abs(G - A).max() <= 1e-11 * np.abs(A).max()


def test_affine_exactness_after_cracks(jittered, rng):
    plan, loads = _plan(jittered)
    cracked = random_splits(jittered, rng, 6)
    for f in cracked:
        jittered.split_facet(f)
        plan.rebuild_after_crack(f)
    v = affine(jittered.cell_barycenters)
    Y = reconstruct_facet_values(plan, v, dirichlet_data(jittered, loads, 1.0, 2))
    exact = affine(jittered.facet_barycenters)
    for f in cracked:
        assert np.allclose(Y[f, 0], exact[f], atol=1e-11) and np.allclose(Y[f, 1], exact[f], atol=1e-11)
    assert np.allclose(cell_gradient(jittered, Y), A, atol=1e-10)


def test_constant_field_partition_of_unity(jittered):
    loads = LoadSpec(neumann=[NeumannBC(t) for t in ("left", "right", "top", "bottom")])
    plan = ReconstructionPlan(jittered, 2, loads.apply_to_mesh(jittered, 2))
    c = np.array([0.7, -3.0])
    Y = reconstruct_facet_values(plan, np.tile(c, (jittered.n_cells, 1)))
    assert np.allclose(Y[:, 0], c, atol=1e-12)
    assert np.allclose(reconstruct_facet_values(plan, np.zeros(2 * jittered.n_cells)), 0.0)
    for st in plan.stencils.values():
        assert np.isclose(st.weights.sum(), 1.0, atol=1e-12)


def test_stencils_do_not_cross_cracks(jittered, rng):
    plan, _ = _plan(jittered)
    for f in random_splits(jittered, rng, 30):
        jittered.split_facet(f)
        plan.rebuild_after_crack(f)
    everything = range(jittered.n_cells)
    for (f, side), st in plan.stencils.items():
        if st.kind == DIRICHLET_EVAL and len(st.cells) == 0:
            continue
        owners = jittered.facet_cells[f]
        if jittered.status[f] == INTERIOR:
            reach = set(connected_cells(jittered, owners[0], everything))
        else:
            reach = set(connected_cells(jittered, owners[side], everything))
        assert set(st.cells.tolist()) <= reach


def test_rebuild_is_local_and_drops_far_side():
    from demcrack.mesh import generate_structured_strip
    m = generate_structured_strip(2.0, 1.0, 0.25, "right", tagging=rectangle_tags(0, 0, 2, 1))
    plan = ReconstructionPlan(m, 1)
    before = {k: (s.cells.copy(), s.weights.copy()) for k, s in plan.stencils.items()}
    f = int(np.argmin(np.hypot(*(m.facet_barycenters - [0.25, 0.5]).T)
                      + 10 * (m.status != INTERIOR)))
    m.split_facet(f)
    changed = set(plan.rebuild_after_crack(f))
    far = [k for k in before if np.hypot(*(m.facet_barycenters[k[0]] - [1.75, 0.5])) < 0.3]
    for k in far:
        assert k not in changed
        assert np.array_equal(plan.stencils[k].cells, before[k][0])
        assert np.array_equal(plan.stencils[k].weights, before[k][1])
    cm, cp = m.facet_cells[f]
    for k in changed:
        st = plan.stencils[k]
        if m.status[k[0]] == INTERIOR and cm in st.cells:
            # a stencil that still uses c- may not use c+ through the crack
            assert cp not in st.cells or st.fallback


def test_stale_plan_raises(jittered):
    plan = ReconstructionPlan(jittered, 2)
    jittered.split_facet(int(np.flatnonzero(jittered.status == INTERIOR)[0]))
    with pytest.raises(StalePlanError):
        reconstruct_facet_values(plan, np.zeros(2 * jittered.n_cells))


def test_gradient_of_identity_on_reference_triangle():
    m = single_triangle()
    Y = m.facet_barycenters.copy()
    assert np.allclose(cell_gradient(m, Y)[0], np.eye(2))
    assert np.allclose(cell_gradient(m, np.ones((3, 2))), 0.0)
    assert np.allclose(cell_gradient(m, m.facet_barycenters[:, :1])[0], [[1.0, 0.0]])


def test_cell_fields_match_material_law(jittered):
    plan, loads = _plan(jittered)
    mat = from_young_poisson(1.0, 0.25, 1.0)
    asm = StiffnessAssembly(jittered, plan, mat)
    f = compute_cell_fields(asm, affine(jittered.cell_barycenters).ravel(),
                            dirichlet_data(jittered, loads, 1.0, 2))
    eps = 0.5 * (A + A.T)
    sig = mat.lam * np.trace(eps) * np.eye(2) + 2 * mat.mu * eps
    assert np.allclose(f.strain, eps) and np.allclose(f.stress, sig)


def test_antiplane_fields(jittered):
    plan, loads = _plan(jittered, dim=1, mask=(True,))
    asm = StiffnessAssembly(jittered, plan, antiplane(0.2))
    u = affine(jittered.cell_barycenters)[:, :1]
    f = compute_cell_fields(asm, u, dirichlet_data(jittered, loads, 1.0, 1))
    assert np.allclose(f.gradient[:, 0], A[0])
    assert np.allclose(f.stress[:, 0], 0.2 * A[0])


def test_p1_reconstruction():
    m = single_triangle()
    xc = m.cell_barycenters[0]
    assert np.allclose(p1_cell_reconstruction(m, 0, [1.0, 0.0], np.eye(2), xc), [1, 0])
    assert np.allclose(p1_cell_reconstruction(m, 0, [1.0, 0.0], np.eye(2), xc + [0, 1]), [1, 1])
    x = np.array([[3.0, -2.0], [0.1, 0.4]])
    assert np.allclose(p1_cell_reconstruction(m, 0, affine(xc), A, x), affine(x))


def test_crack_gets_two_one_sided_stencils(jittered):
    plan = ReconstructionPlan(jittered, 1)
    f = int(random_splits(jittered, np.random.default_rng(0), 1)[0])
    jittered.split_facet(f)
    plan.rebuild_after_crack(f)
    assert jittered.status[f] == CRACKED
    for side in (0, 1):
        st = plan.slot_stencil(f, side)
        assert st.kind == NEUMANN_BARYCENTRIC and st.side == side
        assert jittered.facet_cells[f, side] in st.cells
        assert jittered.facet_cells[f, 1 - side] not in st.cells
