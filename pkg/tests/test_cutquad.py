"""Quadrature on implicitly defined cell subsets.

Closed-form oracles: sub-box volumes for axis-aligned planar interfaces,
Dirichlet integrals on corner simplices for tilted ones, circle/sphere
measures, and the antiderivative-based circle/box intersection area.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from mfcutfem.cutquad import (
    CutCellQuadrature,
    cut_cell_quadrature,
    dump_quadrature_csv,
    interior_quadrature,
    surface_quadrature,
)
from mfcutfem.geometry import (
    HalfSpaceLevelSet,
    Label,
    SphereLevelSet,
    box_mesh,
    classify_cells,
)
from mfcutfem.tensor1d import gauss_rule

from oracles import circle_box_area, simplex_monomial_integral


class SaddleLevelSet:
    """phi(x, y) = x * y: no height axis qualifies near the origin."""

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x[..., 0] * x[..., 1]

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([x[..., 1], x[..., 0]], axis=-1)


def check_rule_invariants(rule: CutCellQuadrature, phi, lo, hi):
    """Point/weight/normal invariants every regularly constructed rule obeys."""
    eps_geo = 1e-10 * np.linalg.norm(np.asarray(hi) - np.asarray(lo))
    if rule.interior_points.size:
        assert phi.value(rule.interior_points).min() >= -eps_geo
    assert (rule.interior_weights >= 0).all()
    assert (rule.surface_weights >= 0).all()
    if rule.surface_points.size:
        assert np.abs(phi.value(rule.surface_points)).max() <= eps_geo
        lengths = np.linalg.norm(rule.surface_normals, axis=1)
        assert_allclose(lengths, 1.0, atol=1e-12)
        # normals point out of {phi > 0}
        grads = phi.gradient(rule.surface_points)
        assert ((rule.surface_normals * grads).sum(axis=1) < 0).all()


def domain_measures(dim, cells, q, radius=1.0):
    """Total volume, surface measure and surface flux of F = x/d for the
    ball of given radius on the harness box, cell by cell."""
    mesh = box_mesh([-1.26] * dim, [1.26] * dim, [cells] * dim)
    phi = SphereLevelSet([0.0] * dim, radius)
    classification = classify_cells(mesh, phi, max(q + 1, 3))
    h = mesh.spacing[0]
    volume = surface = flux = 0.0
    for c in range(mesh.n_cells):
        label = classification.labels[c]
        if label == Label.INSIDE:
            volume += h**dim
        elif label == Label.CUT:
            lo, hi = mesh.cell_box(mesh.cell_multi(c))
            rule = cut_cell_quadrature(lo, hi, phi, q)
            assert rule.fallback_count == 0
            check_rule_invariants(rule, phi, lo, hi)
            volume += rule.interior_weights.sum()
            surface += rule.surface_weights.sum()
            flux += (
                rule.surface_weights
                * (rule.surface_normals * rule.surface_points).sum(axis=1)
            ).sum() / dim
    return volume, surface, flux


# ---------------------------------------------------------------------------
# planar interfaces: exact geometry


def test_halfspace_interior_weight_is_half():
    phi = HalfSpaceLevelSet([1.0, 0.0], 0.5)  # phi = 0.5 - x, inside x < 0.5
    pts, wts = interior_quadrature([0.0, 0.0], [1.0, 1.0], phi, 3)
    assert abs(wts.sum() - 0.5) <= 1e-14
    assert pts[:, 0].max() < 0.5
    assert (wts > 0).all()


def test_halfspace_surface_flat_interface():
    phi = HalfSpaceLevelSet([1.0, 0.0], 0.5)
    pts, wts, normals = surface_quadrature([0.0, 0.0], [1.0, 1.0], phi, 3)
    assert abs(wts.sum() - 1.0) <= 1e-14
    assert_allclose(pts[:, 0], 0.5, atol=1e-13)
    assert_allclose(normals, np.broadcast_to([1.0, 0.0], normals.shape), atol=1e-14)


def test_halfspace_3d():
    phi = HalfSpaceLevelSet([1.0, 0.0, 0.0], 0.5)
    rule = cut_cell_quadrature([0.0] * 3, [1.0] * 3, phi, 3)
    assert abs(rule.interior_weights.sum() - 0.5) <= 1e-14
    assert abs(rule.surface_weights.sum() - 1.0) <= 1e-14
    assert_allclose(
        rule.surface_normals,
        np.broadcast_to([1.0, 0.0, 0.0], rule.surface_normals.shape),
        atol=1e-14,
    )
    check_rule_invariants(rule, phi, [0.0] * 3, [1.0] * 3)


def test_uncut_inside_cell_is_plain_gauss():
    phi = HalfSpaceLevelSet([1.0, 0.0], 10.0)  # whole cell inside
    rule = cut_cell_quadrature([0.0, 0.0], [2.0, 3.0], phi, 4)
    assert abs(rule.interior_weights.sum() - 6.0) <= 1e-13
    assert rule.surface_points.shape == (0, 2)
    gx, _ = gauss_rule(4)
    expected_x = np.sort(np.unique(np.round(2.0 * gx, 12)))
    assert_allclose(np.unique(np.round(rule.interior_points[:, 0], 12)), expected_x)


def test_outside_cell_is_empty():
    phi = HalfSpaceLevelSet([1.0, 0.0], -10.0)  # whole cell outside
    rule = cut_cell_quadrature([0.0, 0.0], [1.0, 1.0], phi, 3)
    assert rule.interior_points.shape == (0, 2)
    assert rule.interior_weights.shape == (0,)
    assert rule.surface_points.shape == (0, 2)
    assert rule.surface_normals.shape == (0, 2)


@pytest.mark.parametrize("q", [2, 3])
def test_axis_aligned_cut_exact_per_axis_monomials(q):
    a = 0.537
    phi = HalfSpaceLevelSet([1.0, 0.0], a)
    pts, wts = interior_quadrature([0.0, 0.0], [1.0, 1.0], phi, q)
    for i in range(2 * q):
        for j in range(2 * q):
            approx = (wts * pts[:, 0] ** i * pts[:, 1] ** j).sum()
            exact = a ** (i + 1) / (i + 1) / (j + 1)
            assert abs(approx - exact) <= 1e-12 * abs(exact)


def test_axis_aligned_cut_exact_3d():
    a = 0.713
    phi = HalfSpaceLevelSet([0.0, 0.0, 1.0], a)  # inside z < a
    pts, wts = interior_quadrature([0.0] * 3, [1.0] * 3, phi, 2)
    for exps in [(0, 0, 0), (3, 0, 0), (0, 3, 3), (1, 2, 3), (3, 3, 3)]:
        i, j, l = exps
        approx = (wts * pts[:, 0] ** i * pts[:, 1] ** j * pts[:, 2] ** l).sum()
        exact = a ** (l + 1) / (l + 1) / (i + 1) / (j + 1)
        assert abs(approx - exact) <= 1e-12 * abs(exact)


@pytest.mark.parametrize("q", [2, 3, 4])
def test_tilted_plane_simplex_exact(q):
    c = 0.537
    phi = HalfSpaceLevelSet([1.0, 1.0], c)  # inside x + y < c
    rule = cut_cell_quadrature([0.0, 0.0], [1.0, 1.0], phi, q)
    for i in range(2 * q - 1):
        for j in range(2 * q - 1 - i):
            approx = (
                rule.interior_weights
                * rule.interior_points[:, 0] ** i
                * rule.interior_points[:, 1] ** j
            ).sum()
            exact = simplex_monomial_integral((i, j), c)
            assert abs(approx - exact) <= 1e-12 * abs(exact)
    assert abs(rule.surface_weights.sum() - c * math.sqrt(2)) <= 1e-13
    assert_allclose(
        rule.surface_normals,
        np.broadcast_to(np.array([1.0, 1.0]) / math.sqrt(2), rule.surface_normals.shape),
        atol=1e-13,
    )
    check_rule_invariants(rule, phi, [0.0, 0.0], [1.0, 1.0])


def test_tilted_plane_simplex_exact_3d():
    c = 0.6
    q = 3
    phi = HalfSpaceLevelSet([1.0, 1.0, 1.0], c)  # inside x + y + z < c
    rule = cut_cell_quadrature([0.0] * 3, [1.0] * 3, phi, q)
    # the height reduction adds one polynomial degree per recursion level, so
    # a tilted plane in 3D is exact for total degree <= 2q - 3
    for exps in [(0, 0, 0), (1, 1, 1), (2, 1, 0), (0, 0, 3), (3, 0, 0), (0, 2, 1)]:
        approx = (
            rule.interior_weights
            * np.prod(rule.interior_points ** np.asarray(exps), axis=1)
        ).sum()
        exact = simplex_monomial_integral(exps, c)
        assert abs(approx - exact) <= 1e-12 * abs(exact)
    assert abs(rule.surface_weights.sum() - c * c * math.sqrt(3) / 2) <= 1e-12


# ---------------------------------------------------------------------------
# curved interfaces: circle and sphere


def test_circle_segment_cell_area():
    phi = SphereLevelSet([0.0, 0.0], 1.0)
    # cell crossed by the unit circle; closed form from the antiderivative
    pts, wts = interior_quadrature([0.6, 0.0], [1.2, 0.6], phi, 5)
    exact = circle_box_area(0.6, 1.2, 0.0, 0.6)
    assert abs(wts.sum() - exact) <= 1e-8
    # cell entirely inside the disk: plain Gauss, no surface part
    rule = cut_cell_quadrature([0.0, 0.0], [0.6, 0.6], phi, 5)
    assert abs(rule.interior_weights.sum() - circle_box_area(0.0, 0.6, 0.0, 0.6)) <= 1e-14
    assert rule.surface_points.shape == (0, 2)


def test_circle_measures_12x12():
    volume, surface, flux = domain_measures(2, 12, 5)
    assert abs(volume - math.pi) <= 1e-8
    assert abs(surface - 2 * math.pi) <= 1e-8
    # divergence theorem: flux of F = x/2 through the boundary equals the area
    assert abs(flux - volume) <= 1e-6 * volume


def test_sphere_measures_6x6x6():
    volume, surface, flux = domain_measures(3, 6, 5)
    assert abs(volume - 4 * math.pi / 3) <= 1e-5
    assert abs(surface - 4 * math.pi) <= 1e-4
    assert abs(flux - volume) <= 1e-5 * volume


def test_circle_measure_convergence_order_q3():
    cells = [6, 12, 24]
    vol_errors, surf_errors = [], []
    for n in cells:
        volume, surface, _ = domain_measures(2, n, 3)
        vol_errors.append(abs(volume - math.pi))
        surf_errors.append(abs(surface - 2 * math.pi))
    log_h = np.log(1.0 / np.asarray(cells, dtype=float))
    vol_order = np.polyfit(log_h, np.log(vol_errors), 1)[0]
    surf_order = np.polyfit(log_h, np.log(surf_errors), 1)[0]
    assert vol_order >= 4.0
    assert surf_order >= 4.0


# ---------------------------------------------------------------------------
# subdivision fallback and validation


def test_saddle_triggers_fallback_counter():
    rule = cut_cell_quadrature([-1.0, -1.0], [1.0, 1.0], SaddleLevelSet(), 2, max_depth=2)
    assert rule.fallback_count > 0
    # {x*y > 0} covers the two diagonal quadrants: area 2 despite the fallback
    assert abs(rule.interior_weights.sum() - 2.0) <= 1e-12


def test_smooth_cut_has_no_fallback():
    phi = SphereLevelSet([0.0, 0.0], 1.0)
    rule = cut_cell_quadrature([0.6, 0.0], [1.2, 0.6], phi, 3)
    assert rule.fallback_count == 0


def test_validation_errors():
    phi = HalfSpaceLevelSet([1.0, 0.0], 0.5)
    with pytest.raises(ValueError):
        cut_cell_quadrature([0.0, 0.0], [1.0, 1.0], phi, 0)
    with pytest.raises(ValueError):
        cut_cell_quadrature([0.0, 0.0], [1.0, 1.0], phi, 3, max_depth=-1)
    with pytest.raises(ValueError):
        cut_cell_quadrature([0.0, 0.0], [0.0, 1.0], phi, 3)
    with pytest.raises(ValueError):
        cut_cell_quadrature([0.0, 0.0, 0.0], [1.0, 1.0], phi, 3)


# ---------------------------------------------------------------------------
# CSV debug dump


def test_dump_quadrature_csv(tmp_path):
    phi = SphereLevelSet([0.0, 0.0], 1.0)
    rules = {
        5: cut_cell_quadrature([0.6, 0.0], [1.2, 0.6], phi, 2),
        9: cut_cell_quadrature([0.0, 0.0], [0.5, 0.5], phi, 2),
    }
    path = tmp_path / "rules.csv"
    dump_quadrature_csv(path, rules)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "cell_index,kind,x,y,w,nx,ny"
    n_expected = sum(
        len(r.interior_weights) + len(r.surface_weights) for r in rules.values()
    )
    assert len(lines) - 1 == n_expected
    for line in lines[1:]:
        cell, kind, x, y, w, nx, ny = line.split(",")
        assert int(cell) in rules
        assert kind in ("I", "S")
        if kind == "I":
            assert nx == "" and ny == ""
        else:
            assert abs(float(nx) ** 2 + float(ny) ** 2 - 1.0) <= 1e-12
    # weights written with full round-trip precision
    first_interior = lines[1].split(",")
    assert float(first_interior[4]) == rules[5].interior_weights[0]
