"""Background Cartesian mesh, level-set domains, cell classification and DoFs.

The domain is the open set {phi > 0} for a user-supplied level set phi; the
mesh never conforms to it.  Cells are classified by sign sampling into
INSIDE / OUTSIDE / CUT, ghost-penalty faces are the interior mesh faces that
touch at least one CUT cell and no OUTSIDE cell, and degrees of freedom are
the tensor-product Lagrange nodes supported on at least one non-OUTSIDE cell.

Conventions: flat cell index = c1 + c2*n1 + c3*n1*n2, flat DoF grid index
likewise with extents (k*n1+1, ...); axis numbering is 0-based with axis 0
the fastest-varying direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from math import prod

import numpy as np

from .sumfac import TensorField
from .tensor1d import gauss_lobatto_nodes


class Label(IntEnum):
    OUTSIDE = 0
    INSIDE = 1
    CUT = 2


@dataclass(frozen=True)
class CartesianMesh:
    """Axis-aligned tensor mesh: origin corner, cell counts and spacings per axis."""

    origin: tuple[float, ...]
    cells_per_axis: tuple[int, ...]
    spacing: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "cells_per_axis", tuple(int(n) for n in self.cells_per_axis))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        if not (len(self.origin) == len(self.cells_per_axis) == len(self.spacing)):
            raise ValueError("origin, cells_per_axis and spacing must agree in length")
        if self.dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dim}")
        if any(n < 1 for n in self.cells_per_axis):
            raise ValueError(f"cell counts must be positive, got {self.cells_per_axis}")
        if any(h <= 0 for h in self.spacing):
            raise ValueError(f"spacings must be positive, got {self.spacing}")

    @property
    def dim(self) -> int:
        return len(self.cells_per_axis)

    @property
    def n_cells(self) -> int:
        return prod(self.cells_per_axis)

    @property
    def cell_strides(self) -> tuple[int, ...]:
        s, out = 1, []
        for n in self.cells_per_axis:
            out.append(s)
            s *= n
        return tuple(out)

    def cell_multi(self, flat) -> np.ndarray:
        """Multi-indices (..., d) of flat cell indices."""
        flat = np.asarray(flat)
        out = np.empty(flat.shape + (self.dim,), dtype=np.int64)
        for a, (n, s) in enumerate(zip(self.cells_per_axis, self.cell_strides)):
            out[..., a] = (flat // s) % n
        return out

    def cell_flat(self, multi) -> np.ndarray:
        multi = np.asarray(multi)
        return multi @ np.asarray(self.cell_strides, dtype=np.int64)

    def cell_box(self, multi) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of a cell given by its multi-index."""
        multi = np.asarray(multi, dtype=float)
        lo = np.asarray(self.origin) + multi * np.asarray(self.spacing)
        return lo, lo + np.asarray(self.spacing)


def box_mesh(lo, hi, cells_per_axis) -> CartesianMesh:
    """Mesh of a box [lo, hi] with the given number of cells per axis."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = np.asarray(cells_per_axis, dtype=int)
    if np.any(n < 1):
        raise ValueError(f"cells_per_axis must be positive, got {cells_per_axis}")
    return CartesianMesh(tuple(lo), tuple(n), tuple((hi - lo) / n))


# ---------------------------------------------------------------------------
# level sets: phi > 0 inside the domain, vectorized over leading point axes


class SphereLevelSet:
    """phi(x) = r - |x - c|, positive inside the ball."""

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("radius must be positive")

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.radius - np.linalg.norm(x - self.center, axis=-1)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diff = x - self.center
        dist = np.linalg.norm(diff, axis=-1, keepdims=True)
        return -diff / np.where(dist == 0.0, 1.0, dist)


class BallUnionLevelSet:
    """phi(x) = max_i (r_i - |x - c_i|); gradient follows the argmax ball."""

    def __init__(self, centers, radii):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.radii = np.atleast_1d(np.asarray(radii, dtype=float))
        if self.centers.shape[0] != self.radii.shape[0]:
            raise ValueError("need one radius per center")
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")

    def _best(self, x) -> tuple[np.ndarray, np.ndarray]:
        # loop over balls to keep memory at one scalar field per point
        x = np.asarray(x, dtype=float)
        best_val = np.full(x.shape[:-1], -np.inf)
        best_idx = np.zeros(x.shape[:-1], dtype=np.int64)
        for i, (c, r) in enumerate(zip(self.centers, self.radii)):
            v = r - np.linalg.norm(x - c, axis=-1)
            better = v > best_val
            best_val = np.where(better, v, best_val)
            best_idx = np.where(better, i, best_idx)
        return best_val, best_idx

    def value(self, x) -> np.ndarray:
        return self._best(x)[0]

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _, best = self._best(x)
        diff = x - self.centers[best]
        dist = np.linalg.norm(diff, axis=-1, keepdims=True)
        return -diff / np.where(dist == 0.0, 1.0, dist)


class HalfSpaceLevelSet:
    """phi(x) = offset - n . x, positive on the n-negative side."""

    def __init__(self, normal, offset: float):
        self.normal = np.asarray(normal, dtype=float)
        self.offset = float(offset)
        if np.linalg.norm(self.normal) == 0:
            raise ValueError("normal must be nonzero")

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.offset - x @ self.normal

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(-self.normal, x.shape).copy()


# ---------------------------------------------------------------------------
# classification


@dataclass
class CellClassification:
    mesh: CartesianMesh
    labels: np.ndarray  # (n_cells,), int8 with Label values

    def count(self, label: Label) -> int:
        return int(np.count_nonzero(self.labels == label))

    def cells_with(self, label: Label) -> np.ndarray:
        return np.flatnonzero(self.labels == label).astype(np.int64)

    @property
    def cut_fraction(self) -> float:
        """Cut cells as a fraction of all non-OUTSIDE cells."""
        active = self.count(Label.INSIDE) + self.count(Label.CUT)
        return self.count(Label.CUT) / active if active else 0.0


def classify_cells(mesh: CartesianMesh, phi, samples_per_axis: int) -> CellClassification:
    """Label every cell by the signs of phi on a tensor sample grid.

    The grid has samples_per_axis points per direction including the cell
    corners.  Zero values count as inside, so: all samples >= 0 -> INSIDE,
    all < 0 -> OUTSIDE, otherwise CUT.  Callers should sample at least at
    k+2 points per axis for a degree-k discretization.
    """
    if samples_per_axis < 2:
        raise ValueError(f"need at least 2 samples per axis, got {samples_per_axis}")
    d = mesh.dim
    s = samples_per_axis
    frac = np.linspace(0.0, 1.0, s)
    # per-axis sample coordinates (n_a, s), then one big tensor evaluation
    coords = [
        mesh.origin[a] + (np.arange(mesh.cells_per_axis[a])[:, None] + frac) * mesh.spacing[a]
        for a in range(d)
    ]
    axes = [c.ravel() for c in coords]
    # grid shaped (n_d*s, ..., n_1*s) so the flattened cell order is lexicographic
    mesh_pts = np.stack(np.meshgrid(*axes[::-1], indexing="ij")[::-1], axis=-1)
    vals = phi.value(mesh_pts)
    # split each numpy axis into (cell, sample) and pull samples to the back
    vals = vals.reshape(tuple(t for a in reversed(range(d)) for t in (mesh.cells_per_axis[a], s)))
    vals = vals.transpose(*range(0, 2 * d, 2), *range(1, 2 * d, 2))
    vals = vals.reshape(tuple(mesh.cells_per_axis[::-1]) + (s ** d,))
    has_nonneg = (vals >= 0.0).any(axis=-1)
    has_neg = (vals < 0.0).any(axis=-1)
    labels = np.where(
        has_nonneg & has_neg,
        np.int8(Label.CUT),
        np.where(has_nonneg, np.int8(Label.INSIDE), np.int8(Label.OUTSIDE)),
    )
    # labels is laid out (n_d, ..., n_1); C-order ravel is lexicographic
    return CellClassification(mesh, labels.ravel().astype(np.int8))


# ---------------------------------------------------------------------------
# ghost faces


@dataclass(frozen=True)
class GhostFace:
    """Interior mesh face between lower_cell and lower_cell + e_axis."""

    lower_cell: tuple[int, ...]
    axis: int

    def upper_cell(self) -> tuple[int, ...]:
        up = list(self.lower_cell)
        up[self.axis] += 1
        return tuple(up)


def ghost_faces(classification: CellClassification) -> list[GhostFace]:
    """Faces needing ghost stabilization: both neighbors non-OUTSIDE, at
    least one CUT.  Ordered by axis, then by flat lower-cell index."""
    mesh = classification.mesh
    labels = classification.labels
    faces: list[GhostFace] = []
    strides = mesh.cell_strides
    for axis in range(mesh.dim):
        n_axis = mesh.cells_per_axis[axis]
        if n_axis < 2:
            continue
        flat = np.arange(mesh.n_cells, dtype=np.int64)
        coord = (flat // strides[axis]) % n_axis
        lower = flat[coord < n_axis - 1]
        upper = lower + strides[axis]
        ll, lu = labels[lower], labels[upper]
        keep = (ll != Label.OUTSIDE) & (lu != Label.OUTSIDE) & ((ll == Label.CUT) | (lu == Label.CUT))
        for c in lower[keep]:
            faces.append(GhostFace(tuple(int(v) for v in mesh.cell_multi(c)), axis))
    return faces


def cell_weight(label: Label, k: int, d: int) -> int:
    """Relative work estimate of one cell: 0 outside, 1 inside, k^(d-1) cut."""
    if label == Label.OUTSIDE:
        return 0
    if label == Label.INSIDE:
        return 1
    return k ** (d - 1)


# ---------------------------------------------------------------------------
# degrees of freedom


@dataclass
class DofMap:
    """Active tensor-product Lagrange DoFs of degree k over the mesh.

    ``compact`` maps the flat DoF-grid index to 0..n_active-1 (or -1 when
    the DoF has no supporting non-OUTSIDE cell).  Per-cell and per-patch
    index lists come out in local lexicographic order.
    """

    mesh: CartesianMesh
    degree: int
    classification: CellClassification
    extents: tuple[int, ...]
    active: np.ndarray = field(repr=False)
    compact: np.ndarray = field(repr=False)
    n_active: int = 0
    node_pattern: np.ndarray = field(default=None, repr=False)

    @property
    def strides(self) -> tuple[int, ...]:
        s, out = 1, []
        for n in self.extents:
            out.append(s)
            s *= n
        return tuple(out)

    def _local_offsets(self, extent_axis: int = -1) -> np.ndarray:
        """Flat-grid offsets of one cell's (or patch's) DoFs, lexicographic.

        extent_axis >= 0 turns that axis into the 2k+1 wide patch range."""
        k = self.degree
        sizes = [2 * k + 1 if a == extent_axis else k + 1 for a in range(self.mesh.dim)]
        strides = self.strides
        off = np.zeros(1, dtype=np.int64)
        for a, n in enumerate(sizes):
            # later axes vary slower, keeping axis 0 fastest in the flat order
            off = (off[None, :] + (np.arange(n, dtype=np.int64) * strides[a])[:, None]).ravel()
        return off

    def cell_dofs(self, cells) -> np.ndarray:
        """Flat DoF-grid indices of each cell's DoFs, shape (m, (k+1)^d)."""
        cells = np.atleast_1d(np.asarray(cells, dtype=np.int64))
        multi = self.mesh.cell_multi(cells)
        base = (self.degree * multi) @ np.asarray(self.strides, dtype=np.int64)
        return base[:, None] + self._local_offsets()[None, :]

    def compact_cell_dofs(self, cells) -> np.ndarray:
        return self.compact[self.cell_dofs(cells)]

    def patch_extents(self, axis: int) -> tuple[int, ...]:
        k = self.degree
        return tuple(2 * k + 1 if a == axis else k + 1 for a in range(self.mesh.dim))

    def face_patch_dofs(self, face: GhostFace) -> np.ndarray:
        """Flat DoF-grid indices of the two-cell patch, patch-lexicographic."""
        labels = self.classification.labels
        for cell in (face.lower_cell, face.upper_cell()):
            if labels[self.mesh.cell_flat(np.asarray(cell))] == Label.OUTSIDE:
                raise ValueError(f"face patch touches OUTSIDE cell {cell}")
        base = (self.degree * np.asarray(face.lower_cell, dtype=np.int64)) @ np.asarray(
            self.strides, dtype=np.int64
        )
        return base + self._local_offsets(extent_axis=face.axis)

    def compact_face_patch_dofs(self, face: GhostFace) -> np.ndarray:
        return self.compact[self.face_patch_dofs(face)]

    def dof_coordinates(self) -> np.ndarray:
        """Physical coordinates of the active DoFs, shape (n_active, d)."""
        k = self.degree
        pts = np.empty((self.n_active, self.mesh.dim))
        flat = np.flatnonzero(self.active)
        for a in range(self.mesh.dim):
            g = (flat // self.strides[a]) % self.extents[a]
            pts[:, a] = self.mesh.origin[a] + (g // k + self.node_pattern[g % k]) * self.mesh.spacing[a]
        return pts


def build_dofmap(mesh: CartesianMesh, k: int, classification: CellClassification) -> DofMap:
    """Mark a DoF active when at least one cell supporting it is non-OUTSIDE."""
    if k < 1:
        raise ValueError(f"degree must be >= 1, got {k}")
    extents = tuple(k * n + 1 for n in mesh.cells_per_axis)
    dm = DofMap(
        mesh=mesh,
        degree=k,
        classification=classification,
        extents=extents,
        active=np.zeros(prod(extents), dtype=bool),
        compact=np.full(prod(extents), -1, dtype=np.int64),
        node_pattern=gauss_lobatto_nodes(k),
    )
    keep = np.flatnonzero(classification.labels != Label.OUTSIDE).astype(np.int64)
    if keep.size:
        dm.active[dm.cell_dofs(keep).ravel()] = True
    dm.n_active = int(np.count_nonzero(dm.active))
    dm.compact[dm.active] = np.arange(dm.n_active, dtype=np.int64)
    return dm


def gather_face_patch(u: np.ndarray, face: GhostFace, dofmap: DofMap) -> TensorField:
    """Extract the 2-cell patch values of a compact DoF vector as a TensorField."""
    idx = dofmap.compact_face_patch_dofs(face)
    if np.any(idx < 0):
        raise ValueError(f"face {face} touches inactive DoFs")
    return TensorField(dofmap.patch_extents(face.axis), u[idx])


def scatter_add_face_patch(w_patch: TensorField, face: GhostFace, dofmap: DofMap, w: np.ndarray) -> None:
    """Add patch-local values into a compact DoF vector in place."""
    idx = dofmap.compact_face_patch_dofs(face)
    if np.any(idx < 0):
        raise ValueError(f"face {face} touches inactive DoFs")
    np.add.at(w, idx, w_patch.data)


# ---------------------------------------------------------------------------
# ball configuration files


def generate_balls(n: int, seed: int, box_lo, box_hi, r0: float = 1.0):
    """n random balls of radius r0/n with centers uniform in the box shrunk
    by one radius (degenerating to the box center when the box is too small)."""
    if n < 1:
        raise ValueError("need at least one ball")
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    r = r0 / n
    rng = np.random.default_rng(seed)
    slo, shi = lo + r, hi - r
    mid = 0.5 * (lo + hi)
    empty = slo >= shi
    slo = np.where(empty, mid, slo)
    shi = np.where(empty, mid, shi)
    centers = rng.uniform(slo, shi, size=(n, lo.size))
    return centers, np.full(n, r)


def save_balls(path, centers, radii) -> None:
    """One line per ball: center coordinates then radius, round-trip exact."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for c, r in zip(centers, radii):
            f.write(" ".join(repr(float(v)) for v in c) + f" {float(r)!r}\n")


def load_balls(path):
    centers, radii = [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if len(parts) not in (3, 4):
                raise ValueError(f"expected 'cx cy [cz] r', got {line!r}")
            vals = [float(p) for p in parts]
            centers.append(vals[:-1])
            radii.append(vals[-1])
    return np.array(centers), np.array(radii)
