"""Sum-factorized application of tensor-product operators.

A ``TensorField`` stores cell- or patch-local coefficients as a flat vector
in lexicographic order: for extents (n1, ..., nd) the flat index of the
multi-index (i1, ..., id) is i1 + i2*n1 + i3*n1*n2, i.e. axis 0 varies
fastest.  Applying a dense matrix along a single axis (``apply_axis``) costs
m_out * m_in * prod(other extents) multiply-adds; composing it over all axes
(``kron_apply``) realizes the action of the Kronecker matrix
A_d x ... x A_1 without ever forming it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np

# running multiply-add counter for the sum-factorization complexity checks
_madds = 0


def reset_madd_count() -> None:
    global _madds
    _madds = 0


def madd_count() -> int:
    return _madds


@dataclass
class TensorField:
    """Flat lexicographic coefficient vector with tensor extents (d = 2 or 3)."""

    extents: tuple[int, ...]
    data: np.ndarray

    def __post_init__(self):
        self.extents = tuple(int(n) for n in self.extents)
        if len(self.extents) not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {len(self.extents)}")
        if any(n < 1 for n in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (prod(self.extents),):
            raise ValueError(
                f"data length {self.data.shape} does not match extents {self.extents}"
            )

    def as_grid(self) -> np.ndarray:
        """View with numpy shape (nd, ..., n1); the last numpy axis is axis 0."""
        return self.data.reshape(self.extents[::-1])

    @classmethod
    def from_grid(cls, grid: np.ndarray) -> "TensorField":
        return cls(tuple(grid.shape[::-1]), np.ascontiguousarray(grid).ravel())


def _is_identity(a) -> bool:
    if a is None:
        return True
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and np.array_equal(a, np.eye(a.shape[0]))


def contract_axis(a: np.ndarray, grid: np.ndarray, np_axis: int) -> np.ndarray:
    """Contract matrix a (m_out, m_in) with one numpy axis of an nd array."""
    moved = np.moveaxis(grid, np_axis, -1)
    out = moved @ a.T
    return np.moveaxis(out, -1, np_axis)


def apply_axis(a: np.ndarray, u: TensorField, axis: int) -> TensorField:
    """Apply matrix a along one tensor axis (0-based, axis 0 fastest-varying).

    out[..., j, ...] = sum_i a[j, i] * u[..., i, ...] along ``axis``.
    """
    a = np.asarray(a, dtype=float)
    d = len(u.extents)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {a.shape}")
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} outside 0..{d - 1}")
    m_out, m_in = a.shape
    if u.extents[axis] != m_in:
        raise ValueError(
            f"extent {u.extents[axis]} along axis {axis} does not match matrix width {m_in}"
        )
    out = contract_axis(a, u.as_grid(), d - 1 - axis)
    global _madds
    _madds += m_out * m_in * prod(n for ax, n in enumerate(u.extents) if ax != axis)
    extents = list(u.extents)
    extents[axis] = m_out
    return TensorField(tuple(extents), np.ascontiguousarray(out).ravel())


def kron_apply(mats, u: TensorField) -> TensorField:
    """Apply one matrix per axis in sequence (the Kronecker-product action).

    ``mats[axis]`` may be None or an identity matrix, in which case that
    axis is skipped without copying the data.
    """
    if len(mats) != len(u.extents):
        raise ValueError(f"need {len(u.extents)} matrices, got {len(mats)}")
    out = u
    for axis, a in enumerate(mats):
        if _is_identity(a):
            continue
        out = apply_axis(a, out, axis)
    return out


def reference_weight_grid(weights, d: int) -> np.ndarray:
    """Tensor-product quadrature weights as a flat lexicographic vector."""
    w = np.asarray(weights, dtype=float)
    grid = np.array(1.0)
    for _ in range(d):
        # prepend each new axis so that axis 0 ends up fastest-varying
        grid = np.multiply.outer(w, grid)
    return grid.ravel()


def cell_laplacian(elem, spacing, u: TensorField) -> TensorField:
    """Weak Laplacian of one uncut axis-aligned cell, sum-factorized.

    Computes w_i = int_K grad(u) . grad(phi_i) with the cell mapped from
    [0,1]^d by per-axis spacings.  Three stages per direction: interpolate
    the reference-coordinate derivative to the quadrature grid, scale by the
    quadrature weight times J / h_a^2, and integrate back with the
    transposed matrices.
    """
    d = len(u.extents)
    n = elem.degree + 1
    spacing = np.asarray(spacing, dtype=float)
    if spacing.shape != (d,):
        raise ValueError(f"expected {d} spacings, got {spacing.shape}")
    if any(ext != n for ext in u.extents):
        raise ValueError(f"extents {u.extents} do not match degree {elem.degree}")

    sv = elem.shape_values.T  # (q, n), interpolation to quadrature points
    sg = elem.shape_grads.T
    jac = float(np.prod(spacing))
    wflat = reference_weight_grid(elem.quad_weights, d) * jac

    acc = np.zeros(n ** d)
    for a in range(d):
        fwd = [sg if b == a else sv for b in range(d)]
        g = kron_apply(fwd, u)
        t = TensorField(g.extents, g.data * wflat / spacing[a] ** 2)
        bwd = [m.T for m in fwd]
        acc += kron_apply(bwd, t).data
    return TensorField(u.extents, acc)
