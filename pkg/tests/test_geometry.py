"""Mesh, level sets, classification, ghost faces, DoF map, ball files."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mfcutfem.geometry import (
    BallUnionLevelSet,
    CartesianMesh,
    GhostFace,
    HalfSpaceLevelSet,
    Label,
    SphereLevelSet,
    box_mesh,
    build_dofmap,
    cell_weight,
    classify_cells,
    gather_face_patch,
    generate_balls,
    ghost_faces,
    load_balls,
    save_balls,
    scatter_add_face_patch,
)
from mfcutfem.sumfac import TensorField


# ---------------------------------------------------------------------------
# mesh


def test_box_mesh_spacing_and_boxes():
    mesh = box_mesh([-1.26, -1.26], [1.26, 1.26], [6, 6])
    assert mesh.dim == 2
    assert mesh.n_cells == 36
    assert_allclose(mesh.spacing, [0.42, 0.42])
    lo, hi = mesh.cell_box(np.array([0, 0]))
    assert_allclose(lo, [-1.26, -1.26])
    assert_allclose(hi, [-0.84, -0.84])


def test_mesh_flat_index_axis0_fastest():
    mesh = box_mesh([0, 0, 0], [1, 1, 1], [2, 3, 4])
    multi = np.array([1, 2, 3])
    flat = mesh.cell_flat(multi)
    assert flat == 1 + 2 * 2 + 6 * 3
    assert_allclose(mesh.cell_multi(flat), multi)


def test_mesh_validation():
    with pytest.raises(ValueError):
        CartesianMesh((0.0,), (4,), (0.1,))  # 1D unsupported
    with pytest.raises(ValueError):
        box_mesh([0, 0], [1, 1], [0, 4])
    with pytest.raises(ValueError):
        box_mesh([0, 0], [0, 1], [4, 4])  # zero extent gives zero spacing


# ---------------------------------------------------------------------------
# level sets


def test_sphere_level_set_values_and_gradient():
    ls = SphereLevelSet([1.0, 0.0], 2.0)
    assert_allclose(ls.value(np.array([1.0, 0.0])), 2.0)
    assert_allclose(ls.value(np.array([[3.0, 0.0], [1.0, 3.0]])), [0.0, -1.0])
    g = ls.gradient(np.array([4.0, 0.0]))
    assert_allclose(g, [-1.0, 0.0])


def test_ball_union_matches_max_of_spheres(rng):
    centers = rng.uniform(-1, 1, size=(5, 3))
    radii = rng.uniform(0.2, 0.7, size=5)
    union = BallUnionLevelSet(centers, radii)
    x = rng.uniform(-1.5, 1.5, size=(40, 3))
    singles = np.stack([SphereLevelSet(c, r).value(x) for c, r in zip(centers, radii)])
    assert_allclose(union.value(x), singles.max(axis=0), atol=1e-14)


def test_half_space_level_set():
    ls = HalfSpaceLevelSet([1.0, 0.0], 0.3)
    assert ls.value(np.array([0.0, 9.0])) > 0
    assert ls.value(np.array([1.0, 0.0])) < 0
    assert_allclose(ls.gradient(np.array([[0.5, 0.5]])), [[-1.0, 0.0]])


# ---------------------------------------------------------------------------
# classification


def test_classify_all_inside_for_huge_sphere():
    mesh = box_mesh([-1, -1], [1, 1], [4, 4])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 10.0), 4)
    assert cls.count(Label.INSIDE) == 16
    assert cls.cut_fraction == 0.0


def test_classify_half_space_single_cell_cut():
    mesh = box_mesh([0, 0], [1, 1], [1, 1])
    cls = classify_cells(mesh, HalfSpaceLevelSet([1.0, 0.0], 0.5), 3)
    assert cls.labels[0] == Label.CUT


def test_classify_zero_counts_as_inside():
    # interface exactly on the shared face: left cell fully inside, right cut
    mesh = box_mesh([0, 0], [2, 1], [2, 1])
    cls = classify_cells(mesh, HalfSpaceLevelSet([1.0, 0.0], 1.0), 3)
    assert cls.labels[0] == Label.INSIDE
    assert cls.labels[1] == Label.CUT


def test_classify_circle_matches_dense_sampling_oracle():
    mesh = box_mesh([-1.26, -1.26], [1.26, 1.26], [6, 6])
    ls = SphereLevelSet([0.0, 0.0], 1.0)
    cls = classify_cells(mesh, ls, 4)
    t = np.linspace(0.0, 1.0, 100)
    for c in range(mesh.n_cells):
        lo, hi = mesh.cell_box(mesh.cell_multi(c))
        xx, yy = np.meshgrid(lo[0] + t * (hi[0] - lo[0]), lo[1] + t * (hi[1] - lo[1]))
        vals = ls.value(np.stack([xx, yy], axis=-1))
        if np.all(vals >= 0):
            expect = Label.INSIDE
        elif np.all(vals < 0):
            expect = Label.OUTSIDE
        else:
            expect = Label.CUT
        assert cls.labels[c] == expect, f"cell {c}"


def test_cut_fraction_range_over_random_balls(rng):
    mesh = box_mesh([-1.26] * 2, [1.26] * 2, [8, 8])
    for seed in range(5):
        centers, radii = generate_balls(3, seed, [-1.26] * 2, [1.26] * 2)
        cls = classify_cells(mesh, BallUnionLevelSet(centers, radii), 4)
        assert 0.0 <= cls.cut_fraction <= 1.0


# ---------------------------------------------------------------------------
# ghost faces


def _classification_from_labels(mesh, labels):
    from mfcutfem.geometry import CellClassification

    return CellClassification(mesh, np.asarray(labels, dtype=np.int8))


def test_ghost_faces_empty_when_all_inside():
    mesh = box_mesh([-1, -1], [1, 1], [3, 3])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 10.0), 3)
    assert ghost_faces(cls) == []


def test_ghost_faces_center_cut_cell():
    mesh = box_mesh([0, 0], [3, 3], [3, 3])
    labels = np.full(9, Label.INSIDE, dtype=np.int8)
    labels[4] = Label.CUT  # center cell (1, 1)
    faces = ghost_faces(_classification_from_labels(mesh, labels))
    assert len(faces) == 4
    assert set((f.lower_cell, f.axis) for f in faces) == {
        ((0, 1), 0),
        ((1, 1), 0),
        ((1, 0), 1),
        ((1, 1), 1),
    }


def test_ghost_faces_skip_outside_neighbors():
    mesh = box_mesh([0, 0], [2, 2], [2, 2])
    labels = np.array([Label.CUT, Label.OUTSIDE, Label.INSIDE, Label.OUTSIDE], dtype=np.int8)
    faces = ghost_faces(_classification_from_labels(mesh, labels))
    # cut cell (0,0): right neighbor outside, upper neighbor (0,1) inside
    assert [(f.lower_cell, f.axis) for f in faces] == [((0, 0), 1)]


def test_ghost_faces_ordering_and_uniqueness():
    mesh = box_mesh([-1.26] * 2, [1.26] * 2, [12, 12])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 1.0), 4)
    faces = ghost_faces(cls)
    keys = [(f.axis, np.ravel_multi_index(f.lower_cell, (12, 12), order="F")) for f in faces]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)
    labels = cls.labels
    for f in faces:
        pair = (
            labels[mesh.cell_flat(np.asarray(f.lower_cell))],
            labels[mesh.cell_flat(np.asarray(f.upper_cell()))],
        )
        assert Label.CUT in pair
        assert Label.OUTSIDE not in pair


def test_ghost_face_count_growth_rate():
    # faces ~ h^(1-d) = h^-1 in 2D: fitted exponent within +/- 0.3
    ls = SphereLevelSet([0.0, 0.0], 1.0)
    counts = []
    for level in range(4):
        cells = 6 * 2**level
        mesh = box_mesh([-1.26] * 2, [1.26] * 2, [cells] * 2)
        counts.append(len(ghost_faces(classify_cells(mesh, ls, 4))))
    rates = np.log2(np.array(counts[1:]) / np.array(counts[:-1]))
    assert abs(np.mean(rates) - 1.0) < 0.3


def test_cell_weight_table():
    assert cell_weight(Label.INSIDE, 3, 3) == 1
    assert cell_weight(Label.CUT, 3, 3) == 9
    assert cell_weight(Label.CUT, 2, 2) == 2
    assert cell_weight(Label.OUTSIDE, 3, 3) == 0


# ---------------------------------------------------------------------------
# DoF map


def test_dofmap_counts_single_cell():
    mesh = box_mesh([0, 0], [1, 1], [1, 1])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 10.0), 3)
    dm = build_dofmap(mesh, 1, cls)
    assert dm.n_active == 4


def test_dofmap_counts_two_cells_quadratic():
    mesh = box_mesh([0, 0], [2, 1], [2, 1])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 10.0), 4)
    dm = build_dofmap(mesh, 2, cls)
    assert dm.extents == (5, 3)
    assert dm.n_active == 15


def test_dofmap_outside_cell_excluded():
    mesh = box_mesh([0, 0], [2, 1], [2, 1])
    labels = np.array([Label.INSIDE, Label.OUTSIDE], dtype=np.int8)
    dm = build_dofmap(mesh, 2, _classification_from_labels(mesh, labels))
    assert dm.n_active == 9
    active_coords = dm.dof_coordinates()
    assert np.all(active_coords[:, 0] <= 1.0 + 1e-12)


def test_dofmap_compact_contiguous():
    mesh = box_mesh([-1.26] * 2, [1.26] * 2, [6, 6])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 1.0), 4)
    dm = build_dofmap(mesh, 2, cls)
    compact_active = dm.compact[dm.active]
    assert_allclose(np.sort(compact_active), np.arange(dm.n_active))
    assert np.all(dm.compact[~dm.active] == -1)


def test_cell_dofs_lexicographic_single_cell():
    mesh = box_mesh([0, 0], [2, 2], [2, 2])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 10.0), 3)
    dm = build_dofmap(mesh, 1, cls)
    # global grid is 3x3; cell (1,1) covers dofs {1,2} x {1,2}
    assert list(dm.cell_dofs(np.array([3]))[0]) == [4, 5, 7, 8]


def test_dof_coordinates_tensor_lobatto():
    mesh = box_mesh([0, 0], [1, 1], [1, 1])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 10.0), 4)
    dm = build_dofmap(mesh, 2, cls)
    pts = dm.dof_coordinates()
    expect_1d = [0.0, 0.5, 1.0]
    expect = [(x, y) for y in expect_1d for x in expect_1d]
    assert_allclose(pts, expect, atol=1e-14)


def test_dofmap_active_monotone_under_outside_flip():
    mesh = box_mesh([-1.26] * 2, [1.26] * 2, [6, 6])
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 1.0), 4)
    dm = build_dofmap(mesh, 2, cls)
    inside = cls.cells_with(Label.INSIDE)
    labels = cls.labels.copy()
    labels[inside[0]] = Label.OUTSIDE
    dm_flipped = build_dofmap(mesh, 2, _classification_from_labels(mesh, labels))
    assert dm_flipped.n_active <= dm.n_active


# ---------------------------------------------------------------------------
# face patches


def _patch_oracle(dm, face):
    """Brute-force global indices of the 2-cell patch via index arithmetic."""
    k = dm.degree
    mesh = dm.mesh
    lower = np.asarray(face.lower_cell)
    ranges = []
    for a in range(mesh.dim):
        start = k * lower[a]
        width = 2 * k + 1 if a == face.axis else k + 1
        ranges.append(range(start, start + width))
    idx = []
    if mesh.dim == 2:
        for j in ranges[1]:
            for i in ranges[0]:
                idx.append(i + dm.extents[0] * j)
    else:
        for l in ranges[2]:
            for j in ranges[1]:
                for i in ranges[0]:
                    idx.append(i + dm.extents[0] * (j + dm.extents[1] * l))
    return np.array(idx)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_face_patch_matches_index_oracle(dim, k):
    mesh = box_mesh([-1.26] * dim, [1.26] * dim, [4] * dim)
    cls = classify_cells(mesh, SphereLevelSet([0.0] * dim, 1.0), k + 2)
    dm = build_dofmap(mesh, k, cls)
    faces = ghost_faces(cls)
    assert faces, "expected ghost faces on a cut disk"
    for face in faces[:: max(1, len(faces) // 6)]:
        assert_allclose(dm.face_patch_dofs(face), _patch_oracle(dm, face))


def test_patch_extents_and_grid_shape():
    mesh = box_mesh([-1.26] * 2, [1.26] * 2, [4] * 2)
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 1.0), 3)
    dm = build_dofmap(mesh, 1, cls)
    face = next(f for f in ghost_faces(cls) if f.axis == 1)
    assert dm.patch_extents(1) == (2, 3)
    patch = gather_face_patch(np.zeros(dm.n_active), face, dm)
    assert patch.as_grid().shape == (3, 2)  # normal axis varies slowest in the view


def test_gather_scatter_roundtrip(rng):
    mesh = box_mesh([-1.26] * 2, [1.26] * 2, [6] * 2)
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 1.0), 4)
    dm = build_dofmap(mesh, 2, cls)
    face = ghost_faces(cls)[3]
    u = rng.standard_normal(dm.n_active)
    patch = gather_face_patch(u, face, dm)
    w = np.zeros(dm.n_active)
    scatter_add_face_patch(patch, face, dm, w)
    idx = dm.compact_face_patch_dofs(face)
    expect = np.zeros(dm.n_active)
    np.add.at(expect, idx, u[idx])
    assert_allclose(w, expect)
    # identity round trip touches each patch slot exactly once
    assert_allclose(w[idx], u[idx])


def test_gather_scatter_zero_kernel_leaves_vector_unchanged(rng):
    mesh = box_mesh([-1.26] * 2, [1.26] * 2, [6] * 2)
    cls = classify_cells(mesh, SphereLevelSet([0.0, 0.0], 1.0), 4)
    dm = build_dofmap(mesh, 1, cls)
    face = ghost_faces(cls)[0]
    w = rng.standard_normal(dm.n_active)
    before = w.copy()
    ext = dm.patch_extents(face.axis)
    zero_patch = TensorField(ext, np.zeros(int(np.prod(ext))))
    scatter_add_face_patch(zero_patch, face, dm, w)
    assert_allclose(w, before)


def test_face_patch_rejects_outside_cell():
    mesh = box_mesh([0, 0], [2, 2], [2, 2])
    labels = np.array([Label.CUT, Label.OUTSIDE, Label.INSIDE, Label.OUTSIDE], dtype=np.int8)
    cls = _classification_from_labels(mesh, labels)
    dm = build_dofmap(mesh, 1, cls)
    with pytest.raises(ValueError):
        dm.face_patch_dofs(GhostFace((0, 0), 0))


# ---------------------------------------------------------------------------
# ball generation and serialization


def test_generate_balls_radius_and_bounds():
    centers, radii = generate_balls(4, 7, [-1.26] * 3, [1.26] * 3, r0=1.0)
    assert centers.shape == (4, 3)
    assert_allclose(radii, 0.25)
    assert np.all(centers >= -1.26 + 0.25 - 1e-12)
    assert np.all(centers <= 1.26 - 0.25 + 1e-12)


def test_generate_balls_seeded_reproducible():
    a = generate_balls(5, 42, [-1, -1], [1, 1])
    b = generate_balls(5, 42, [-1, -1], [1, 1])
    assert_allclose(a[0], b[0])
    c = generate_balls(5, 43, [-1, -1], [1, 1])
    assert not np.allclose(a[0], c[0])


def test_generate_balls_tiny_box_degenerates_to_center():
    centers, radii = generate_balls(1, 0, [0, 0], [1, 1], r0=5.0)
    assert_allclose(centers[0], [0.5, 0.5])
    assert_allclose(radii[0], 5.0)


def test_ball_file_roundtrip_bit_exact(tmp_path, rng):
    centers = rng.uniform(-1, 1, size=(6, 3))
    radii = rng.uniform(0.1, 0.5, size=6)
    path = tmp_path / "balls.txt"
    save_balls(path, centers, radii)
    loaded_c, loaded_r = load_balls(path)
    assert np.array_equal(loaded_c, centers)
    assert np.array_equal(loaded_r, radii)


def test_load_balls_rejects_malformed(tmp_path):
    path = tmp_path / "balls.txt"
    path.write_text("1.0 2.0\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_balls(path)
