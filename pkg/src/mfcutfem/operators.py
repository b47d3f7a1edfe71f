"""Matrix-free application of the stabilized cut Poisson operator.

``vmult`` applies  A = A_volume + A_nitsche + gamma_A * A_ghost  to a compact
vector of active DoFs without assembling anything:

* interior (uncut) cells use the sum-factorized cell Laplacian,
* cut cells integrate the same weak form over their precomputed volume rule
  and add the symmetric Nitsche boundary terms
  -(dn u, v) - (u, dn v) + (gamma_D / h)(u, v) on the embedded surface,
* ghost-penalty faces apply gamma_A * (hM1 x ... x G1(h) x ... x hM1), the
  Kronecker product of 1D factors with G1 on the face-normal axis.

Cells, cut-cell quadrature points and faces are processed in fixed-order
batches; all reductions are single-threaded with a fixed summation order, so
repeated applications are bitwise reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from math import prod

import numpy as np

from . import cutquad, geometry, sumfac, tensor1d
from .geometry import CartesianMesh, GhostFace, Label
from .sumfac import TensorField, contract_axis

_CELL_CHUNK = 4096
_POINT_CHUNK = 1 << 15


@dataclass
class Parameters:
    """Discretization parameters; None picks the degree-based default."""

    degree: int
    gamma_ghost: float = 0.5
    gamma_dirichlet: float | None = None  # default 30 k (k+1)
    cell_quad_order: int | None = None    # default k+1
    cut_quad_order: int | None = None     # default k+1
    error_quad_order: int | None = None   # default k+2
    max_quad_depth: int = 8

    def __post_init__(self):
        if not 1 <= self.degree:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if self.gamma_ghost < 0:
            raise ValueError("gamma_ghost must be >= 0")
        k = self.degree
        if self.gamma_dirichlet is None:
            self.gamma_dirichlet = 30.0 * k * (k + 1)
        if self.cell_quad_order is None:
            self.cell_quad_order = k + 1
        if self.cut_quad_order is None:
            self.cut_quad_order = k + 1
        if self.error_quad_order is None:
            self.error_quad_order = k + 2


@dataclass
class _PointBlock:
    """Concatenated per-point data of all cut cells, grouped cell by cell."""

    points: np.ndarray   # (N, d) physical coordinates
    weights: np.ndarray  # (N,)
    cell: np.ndarray     # (N,) position in the cut-cell list
    ptr: np.ndarray      # (n_cut + 1,) CSR offsets
    vals: np.ndarray     # (N, d, k+1) 1D basis values at the reference coords
    grads: np.ndarray    # (N, d, k+1) 1D basis derivatives (reference)
    normals: np.ndarray | None = None  # (N, d) for surface blocks


@dataclass
class OperatorContext:
    """Everything vmult needs, precomputed once per (mesh, level set, k)."""

    mesh: CartesianMesh
    levelset: object
    params: Parameters
    elem: tensor1d.ReferenceElement1D
    classification: geometry.CellClassification
    dofmap: geometry.DofMap
    faces: list[GhostFace]
    mass_1d: np.ndarray
    scaled_mass: list[np.ndarray]   # h_a * M1 per axis
    ghost_1d: list[np.ndarray]      # G1(h_a) per axis
    inside_cells: np.ndarray
    cut_cells: np.ndarray
    inside_dofs: np.ndarray         # (n_inside, nloc) compact indices
    cut_dofs: np.ndarray            # (n_cut, nloc)
    inside_lower: np.ndarray        # (n_inside, d) cell corners
    face_dofs: dict[int, np.ndarray]  # axis -> (n_faces, patch size)
    volume: _PointBlock
    surface: _PointBlock
    cut_rules: dict[int, cutquad.CutCellQuadrature]
    fallback_count: int
    timers: dict[str, float] = field(default_factory=dict)
    _error_blocks: dict[int, _PointBlock] = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return self.dofmap.n_active

    @property
    def h_min(self) -> float:
        return min(self.mesh.spacing)

    def local_extents(self) -> tuple[int, ...]:
        return (self.elem.degree + 1,) * self.mesh.dim


def reset_timers(ctx: OperatorContext) -> None:
    ctx.timers = {
        "interior": 0.0,
        "intersected": 0.0,
        "ghost_penalty": 0.0,
        "scatter_other": 0.0,
        "total": 0.0,
        "applications": 0,
    }


def _tabulate(elem, mesh, points, cells_flat) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis 1D basis values/derivatives at arbitrary physical points."""
    n = elem.degree + 1
    d = mesh.dim
    vals = np.empty((len(points), d, n))
    grads = np.empty((len(points), d, n))
    multi = mesh.cell_multi(cells_flat)
    for a in range(d):
        xi = (points[:, a] - (mesh.origin[a] + multi[:, a] * mesh.spacing[a])) / mesh.spacing[a]
        vals[:, a] = elem.evaluate(xi)
        grads[:, a] = elem.evaluate(xi, deriv=1)
    return vals, grads


def _build_point_block(mesh, elem, cut_cells, rules, surface: bool) -> _PointBlock:
    pts, wts, cell_of, normals = [], [], [], []
    for j, c in enumerate(cut_cells):
        r = rules[int(c)]
        p = r.surface_points if surface else r.interior_points
        w = r.surface_weights if surface else r.interior_weights
        pts.append(p)
        wts.append(w)
        cell_of.append(np.full(len(w), j, dtype=np.int64))
        if surface:
            normals.append(r.surface_normals)
    d = mesh.dim
    pts = np.concatenate(pts) if pts else np.empty((0, d))
    wts = np.concatenate(wts) if wts else np.empty(0)
    cell_of = np.concatenate(cell_of) if cell_of else np.empty(0, dtype=np.int64)
    ptr = np.zeros(len(cut_cells) + 1, dtype=np.int64)
    np.add.at(ptr, cell_of + 1, 1)
    ptr = np.cumsum(ptr)
    vals, grads = _tabulate(elem, mesh, pts, cut_cells[cell_of] if len(cell_of) else cell_of)
    nrm = (np.concatenate(normals) if normals else np.empty((0, d))) if surface else None
    return _PointBlock(pts, wts, cell_of, ptr, vals, grads, nrm)


def build_context(mesh: CartesianMesh, levelset, params: Parameters) -> OperatorContext:
    """Classify, enumerate DoFs and ghost faces, build and tabulate cut rules."""
    k = params.degree
    elem = tensor1d.build_reference_element(k, params.cell_quad_order)
    classification = geometry.classify_cells(mesh, levelset, k + 2)
    dofmap = geometry.build_dofmap(mesh, k, classification)
    faces = geometry.ghost_faces(classification)

    mass = tensor1d.mass_matrix_1d(elem)
    scaled_mass = [h * mass for h in mesh.spacing]
    ghost_1d = [tensor1d.ghost_matrix_1d(elem, h) for h in mesh.spacing]

    inside_cells = classification.cells_with(Label.INSIDE)
    cut_cells = classification.cells_with(Label.CUT)
    inside_dofs = dofmap.compact_cell_dofs(inside_cells) if len(inside_cells) else np.empty((0, (k + 1) ** mesh.dim), dtype=np.int64)
    cut_dofs = dofmap.compact_cell_dofs(cut_cells) if len(cut_cells) else np.empty((0, (k + 1) ** mesh.dim), dtype=np.int64)
    inside_lower = mesh.cell_box(mesh.cell_multi(inside_cells))[0] if len(inside_cells) else np.empty((0, mesh.dim))

    face_dofs: dict[int, np.ndarray] = {}
    for axis in range(mesh.dim):
        axis_faces = [f for f in faces if f.axis == axis]
        if axis_faces:
            face_dofs[axis] = np.stack([dofmap.compact_face_patch_dofs(f) for f in axis_faces])

    rules: dict[int, cutquad.CutCellQuadrature] = {}
    fallbacks = 0
    for c in cut_cells:
        lo, hi = mesh.cell_box(mesh.cell_multi(int(c)))
        try:
            rule = cutquad.cut_cell_quadrature(lo, hi, levelset, params.cut_quad_order, params.max_quad_depth)
        except cutquad.QuadratureError as exc:
            raise cutquad.QuadratureError(f"cell {int(c)}: {exc}") from exc
        rules[int(c)] = rule
        fallbacks += rule.fallback_count

    ctx = OperatorContext(
        mesh=mesh,
        levelset=levelset,
        params=params,
        elem=elem,
        classification=classification,
        dofmap=dofmap,
        faces=faces,
        mass_1d=mass,
        scaled_mass=scaled_mass,
        ghost_1d=ghost_1d,
        inside_cells=inside_cells,
        cut_cells=cut_cells,
        inside_dofs=inside_dofs,
        cut_dofs=cut_dofs,
        inside_lower=inside_lower,
        face_dofs=face_dofs,
        volume=_build_point_block(mesh, elem, cut_cells, rules, surface=False),
        surface=_build_point_block(mesh, elem, cut_cells, rules, surface=True),
        cut_rules=rules,
        fallback_count=fallbacks,
    )
    reset_timers(ctx)
    return ctx


# ---------------------------------------------------------------------------
# batched kernels


def _grid_shape(n: int, d: int) -> tuple[int, ...]:
    return (n,) * d


def _interior_apply(elem: tensor1d.ReferenceElement1D, spacing, u_cells: np.ndarray) -> np.ndarray:
    """Sum-factorized weak Laplacian on a batch of uncut cells, (C, nloc)."""
    d = len(spacing)
    n = elem.degree + 1
    q = len(elem.quad_points)
    sv = elem.shape_values.T  # (q, n)
    sg = elem.shape_grads.T
    h = spacing
    jac = prod(h)
    wgrid = sumfac.reference_weight_grid(elem.quad_weights, d).reshape(_grid_shape(q, d))

    c = u_cells.shape[0]
    grid = u_cells.reshape((c,) + _grid_shape(n, d))
    out = np.zeros_like(grid)
    for a in range(d):
        t = grid
        for b in range(d):
            t = contract_axis(sg if b == a else sv, t, t.ndim - 1 - b)
        t = t * wgrid * (jac / h[a] ** 2)
        for b in range(d):
            t = contract_axis((sg if b == a else sv).T, t, t.ndim - 1 - b)
        out += t
    return out.reshape(c, -1)


def _point_contract(up: np.ndarray, tabs: list[np.ndarray]) -> np.ndarray:
    """Per-point tensor contraction: up (P, n^d grid), tabs d arrays (P, n)."""
    d = len(tabs)
    if d == 2:
        t = np.einsum("pji,pi->pj", up, tabs[0])
        return np.einsum("pj,pj->p", t, tabs[1])
    t = np.einsum("pkji,pi->pkj", up, tabs[0])
    t = np.einsum("pkj,pj->pk", t, tabs[1])
    return np.einsum("pk,pk->p", t, tabs[2])


def _point_outer(coef: np.ndarray, tabs: list[np.ndarray]) -> np.ndarray:
    """Rank-1 test-function contributions, flattened to (P, nloc)."""
    d = len(tabs)
    if d == 2:
        out = np.einsum("p,pi,pj->pji", coef, tabs[0], tabs[1])
    else:
        out = np.einsum("p,pi,pj,pk->pkji", coef, tabs[0], tabs[1], tabs[2])
    return out.reshape(coef.shape[0], -1)


def _select_tabs(block: _PointBlock, sl: slice, deriv_axis: int | None) -> list[np.ndarray]:
    d = block.vals.shape[1]
    return [
        (block.grads if a == deriv_axis else block.vals)[sl, a, :]
        for a in range(d)
    ]


def _cut_volume_apply(ctx: OperatorContext, u3: np.ndarray, out: np.ndarray) -> None:
    """grad-grad term over all cut-cell volume points, accumulated into out."""
    blk = ctx.volume
    h = ctx.mesh.spacing
    d = ctx.mesh.dim
    nloc = out.shape[1]
    for start in range(0, len(blk.weights), _POINT_CHUNK):
        sl = slice(start, min(start + _POINT_CHUNK, len(blk.weights)))
        cells = blk.cell[sl]
        up = u3[cells]
        acc = None
        for a in range(d):
            tabs = _select_tabs(blk, sl, a)
            z = _point_contract(up, tabs) * blk.weights[sl] / h[a] ** 2
            contrib = _point_outer(z, tabs)
            acc = contrib if acc is None else acc + contrib
        flat = (cells[:, None] * nloc + np.arange(nloc, dtype=np.int64)).ravel()
        out.ravel()[:] += np.bincount(flat, weights=acc.ravel(), minlength=out.size)


def _cut_surface_apply(ctx: OperatorContext, u3: np.ndarray, out: np.ndarray) -> None:
    """Symmetric Nitsche terms over all embedded-surface points."""
    blk = ctx.surface
    if blk.weights.size == 0:
        return
    h = ctx.mesh.spacing
    d = ctx.mesh.dim
    nloc = out.shape[1]
    penalty = ctx.params.gamma_dirichlet / ctx.h_min
    for start in range(0, len(blk.weights), _POINT_CHUNK):
        sl = slice(start, min(start + _POINT_CHUNK, len(blk.weights)))
        cells = blk.cell[sl]
        up = u3[cells]
        w = blk.weights[sl]
        nrm = blk.normals[sl]
        val_tabs = _select_tabs(blk, sl, None)
        u_val = _point_contract(up, val_tabs)
        g_n = np.zeros_like(u_val)
        grad_ref = []
        for a in range(d):
            g_a = _point_contract(up, _select_tabs(blk, sl, a))
            grad_ref.append(g_a)
            g_n += nrm[:, a] * g_a / h[a]
        acc = _point_outer((-g_n + penalty * u_val) * w, val_tabs)
        for a in range(d):
            beta = -u_val * w * nrm[:, a] / h[a]
            acc += _point_outer(beta, _select_tabs(blk, sl, a))
        flat = (cells[:, None] * nloc + np.arange(nloc, dtype=np.int64)).ravel()
        out.ravel()[:] += np.bincount(flat, weights=acc.ravel(), minlength=out.size)


def _kron_batch(mats: list[np.ndarray], ext: tuple[int, ...], u: np.ndarray) -> np.ndarray:
    """Apply one 1D matrix per tensor axis to a batch of flat fields (B, prod ext)."""
    grid = u.reshape((u.shape[0],) + tuple(ext[::-1]))
    for b, a_mat in enumerate(mats):
        grid = contract_axis(a_mat, grid, grid.ndim - 1 - b)
    return grid.reshape(u.shape[0], -1)


def _ghost_apply_batch(ctx: OperatorContext, axis: int, u_patch: np.ndarray) -> np.ndarray:
    """gamma_A * (hM1 x ... x G1 x ... x hM1) on a batch of face patches."""
    mats = [
        ctx.ghost_1d[axis] if b == axis else ctx.scaled_mass[b]
        for b in range(ctx.mesh.dim)
    ]
    out = _kron_batch(mats, ctx.dofmap.patch_extents(axis), u_patch)
    return ctx.params.gamma_ghost * out


# ---------------------------------------------------------------------------
# public operator actions


def vmult(ctx: OperatorContext, u: np.ndarray) -> np.ndarray:
    """Apply the full operator; per-component timings accumulate on ctx."""
    u = np.asarray(u, dtype=float)
    if u.shape != (ctx.n_dofs,):
        raise ValueError(f"expected vector of length {ctx.n_dofs}, got {u.shape}")
    t_start = time.perf_counter()
    jobs = []

    t0 = time.perf_counter()
    if len(ctx.inside_cells):
        jobs.append((ctx.inside_dofs, _interior_apply(ctx.elem, ctx.mesh.spacing, u[ctx.inside_dofs])))
    ctx.timers["interior"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    if len(ctx.cut_cells):
        u3 = u[ctx.cut_dofs].reshape((len(ctx.cut_cells),) + _grid_shape(ctx.elem.degree + 1, ctx.mesh.dim))
        w_cut = np.zeros((len(ctx.cut_cells), u3[0].size))
        _cut_volume_apply(ctx, u3, w_cut)
        _cut_surface_apply(ctx, u3, w_cut)
        jobs.append((ctx.cut_dofs, w_cut))
    ctx.timers["intersected"] += time.perf_counter() - t0

    t0 = time.perf_counter()
    if ctx.params.gamma_ghost != 0.0:
        for axis in sorted(ctx.face_dofs):
            idx = ctx.face_dofs[axis]
            jobs.append((idx, _ghost_apply_batch(ctx, axis, u[idx])))
    ctx.timers["ghost_penalty"] += time.perf_counter() - t0

    w = np.zeros_like(u)
    for idx, val in jobs:
        w += np.bincount(idx.ravel(), weights=val.ravel(), minlength=ctx.n_dofs)

    total = time.perf_counter() - t_start
    ctx.timers["total"] += total
    ctx.timers["scatter_other"] = ctx.timers["total"] - (
        ctx.timers["interior"] + ctx.timers["intersected"] + ctx.timers["ghost_penalty"]
    )
    ctx.timers["applications"] += 1
    return w


def apply_ghost_penalty(ctx: OperatorContext, u: np.ndarray) -> np.ndarray:
    """Only the ghost-penalty part gamma_A * A_ghost (zero when gamma_A = 0)."""
    u = np.asarray(u, dtype=float)
    w = np.zeros_like(u)
    if ctx.params.gamma_ghost == 0.0:
        return w
    for axis in sorted(ctx.face_dofs):
        idx = ctx.face_dofs[axis]
        w += np.bincount(idx.ravel(), weights=_ghost_apply_batch(ctx, axis, u[idx]).ravel(), minlength=ctx.n_dofs)
    return w


def ghost_face_apply(ctx: OperatorContext, face: GhostFace, u_patch: TensorField) -> TensorField:
    """One face: gamma_A times tangential scaled masses and G1 on the normal."""
    mats = [
        ctx.ghost_1d[face.axis] if b == face.axis else ctx.scaled_mass[b]
        for b in range(ctx.mesh.dim)
    ]
    out = sumfac.kron_apply(mats, u_patch)
    return TensorField(out.extents, ctx.params.gamma_ghost * out.data)


def _cut_index(ctx: OperatorContext, cell_flat: int) -> int:
    j = int(np.searchsorted(ctx.cut_cells, cell_flat))
    if j >= len(ctx.cut_cells) or ctx.cut_cells[j] != cell_flat:
        raise ValueError(f"cell {cell_flat} is not a cut cell")
    return j


def cut_cell_volume_apply(ctx: OperatorContext, cell_flat: int, u_local: TensorField) -> TensorField:
    """grad-grad part of one cut cell (no boundary terms)."""
    j = _cut_index(ctx, cell_flat)
    blk = ctx.volume
    sl = slice(int(blk.ptr[j]), int(blk.ptr[j + 1]))
    d = ctx.mesh.dim
    h = ctx.mesh.spacing
    n_pts = sl.stop - sl.start
    up = np.broadcast_to(u_local.as_grid(), (n_pts,) + u_local.as_grid().shape)
    w = np.zeros(u_local.data.size)
    for a in range(d):
        tabs = _select_tabs(blk, sl, a)
        z = _point_contract(up, tabs) * blk.weights[sl] / h[a] ** 2
        w += _point_outer(z, tabs).sum(axis=0)
    return TensorField(u_local.extents, w)


def cut_cell_surface_apply(ctx: OperatorContext, cell_flat: int, u_local: TensorField) -> TensorField:
    """Nitsche boundary terms of one cut cell."""
    j = _cut_index(ctx, cell_flat)
    blk = ctx.surface
    sl = slice(int(blk.ptr[j]), int(blk.ptr[j + 1]))
    d = ctx.mesh.dim
    h = ctx.mesh.spacing
    w = np.zeros(u_local.data.size)
    n_pts = sl.stop - sl.start
    if n_pts == 0:
        return TensorField(u_local.extents, w)
    up = np.broadcast_to(u_local.as_grid(), (n_pts,) + u_local.as_grid().shape)
    wq = blk.weights[sl]
    nrm = blk.normals[sl]
    penalty = ctx.params.gamma_dirichlet / ctx.h_min
    val_tabs = _select_tabs(blk, sl, None)
    u_val = _point_contract(up, val_tabs)
    g_n = np.zeros_like(u_val)
    for a in range(d):
        g_n += nrm[:, a] * _point_contract(up, _select_tabs(blk, sl, a)) / h[a]
    w += _point_outer((-g_n + penalty * u_val) * wq, val_tabs).sum(axis=0)
    for a in range(d):
        w += _point_outer(-u_val * wq * nrm[:, a] / h[a], _select_tabs(blk, sl, a)).sum(axis=0)
    return TensorField(u_local.extents, w)


def cut_cell_apply(ctx: OperatorContext, cell_flat: int, u_local: TensorField) -> TensorField:
    """Volume plus Nitsche contribution of one cut cell."""
    vol = cut_cell_volume_apply(ctx, cell_flat, u_local)
    surf = cut_cell_surface_apply(ctx, cell_flat, u_local)
    return TensorField(vol.extents, vol.data + surf.data)


def _interior_quad_points(ctx: OperatorContext, lowers: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Physical tensor quadrature grid per cell: (C, q, ..., q, d)."""
    d = ctx.mesh.dim
    q = len(gx)
    c = lowers.shape[0]
    pts = np.empty((c,) + _grid_shape(q, d) + (d,))
    for a in range(d):
        shape = [1] * d
        shape[d - 1 - a] = q
        pts[..., a] = lowers[:, a].reshape((c,) + (1,) * d) + (gx * ctx.mesh.spacing[a]).reshape(shape)
    return pts


def assemble_rhs(ctx: OperatorContext, f) -> np.ndarray:
    """Right-hand side b_i = int_{Omega} f phi_i over interior and cut cells."""
    d = ctx.mesh.dim
    q = len(ctx.elem.quad_points)
    sv = ctx.elem.shape_values.T
    jac = prod(ctx.mesh.spacing)
    wgrid = sumfac.reference_weight_grid(ctx.elem.quad_weights, d).reshape(_grid_shape(q, d)) * jac
    b = np.zeros(ctx.n_dofs)

    for start in range(0, len(ctx.inside_cells), _CELL_CHUNK):
        sl = slice(start, min(start + _CELL_CHUNK, len(ctx.inside_cells)))
        pts = _interior_quad_points(ctx, ctx.inside_lower[sl], ctx.elem.quad_points)
        t = np.asarray(f(pts), dtype=float) * wgrid
        for a in range(d):
            t = contract_axis(sv.T, t, t.ndim - 1 - a)
        b += np.bincount(ctx.inside_dofs[sl].ravel(), weights=t.reshape(t.shape[0], -1).ravel(), minlength=ctx.n_dofs)

    blk = ctx.volume
    if blk.weights.size:
        nloc = (ctx.elem.degree + 1) ** d
        acc = np.zeros(len(ctx.cut_cells) * nloc)
        for start in range(0, len(blk.weights), _POINT_CHUNK):
            sl = slice(start, min(start + _POINT_CHUNK, len(blk.weights)))
            fw = np.asarray(f(blk.points[sl]), dtype=float) * blk.weights[sl]
            contrib = _point_outer(fw, _select_tabs(blk, sl, None))
            flat = (blk.cell[sl][:, None] * nloc + np.arange(nloc, dtype=np.int64)).ravel()
            acc += np.bincount(flat, weights=contrib.ravel(), minlength=acc.size)
        b += np.bincount(ctx.cut_dofs.ravel(), weights=acc, minlength=ctx.n_dofs)
    return b


def error_point_block(ctx: OperatorContext, order: int) -> _PointBlock:
    """Cut-cell volume rules at an elevated order (cached per order)."""
    if order not in ctx._error_blocks:
        rules = {}
        for c in ctx.cut_cells:
            lo, hi = ctx.mesh.cell_box(ctx.mesh.cell_multi(int(c)))
            rules[int(c)] = cutquad.cut_cell_quadrature(lo, hi, ctx.levelset, order, ctx.params.max_quad_depth)
        ctx._error_blocks[order] = _build_point_block(ctx.mesh, ctx.elem, ctx.cut_cells, rules, surface=False)
    return ctx._error_blocks[order]


def breakdown_report(ctx: OperatorContext) -> list[tuple[str, float, float]]:
    """(component, seconds, percent) rows for the accumulated vmult timings."""
    total = ctx.timers["total"]
    rows = []
    for name in ("interior", "intersected", "ghost_penalty", "scatter_other"):
        seconds = ctx.timers[name]
        rows.append((name, seconds, 100.0 * seconds / total if total > 0 else 0.0))
    return rows
