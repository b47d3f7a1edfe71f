"""One-dimensional reference element and ghost-penalty building blocks.

Everything in this module lives either on the unit interval [0, 1] (a single
reference cell) or on the two-cell reference patch [0, 1] u [1, 2].  The
higher-dimensional operators are assembled purely as tensor (Kronecker)
products of the small dense matrices produced here:

* ``mass_matrix_1d``  -- the (k+1) x (k+1) cell mass matrix M1,
* ``jump_vector``     -- the jump of the m-th normal derivative across the
  shared patch point x = 1, expressed in the 2k+1 patch basis functions,
* ``ghost_matrix_1d`` -- G1(h) = h^-1 sum_m (1/m!)^2 j_m j_m^T, the 1D
  normal-direction factor of the ghost-penalty face operator.

The nodal basis uses Gauss-Lobatto support points so that cell endpoints
carry exactly one shared degree of freedom per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre
from numpy.polynomial import polynomial as npoly


def gauss_lobatto_nodes(k: int) -> np.ndarray:
    """Return the k+1 Gauss-Lobatto points on [0, 1], endpoints included."""
    if k < 1:
        raise ValueError(f"degree must be >= 1, got {k}")
    if k == 1:
        return np.array([0.0, 1.0])
    # interior points are the roots of P_k', with P_k the Legendre polynomial
    coeffs = np.zeros(k + 1)
    coeffs[k] = 1.0
    interior = legendre.legroots(legendre.legder(coeffs))
    nodes = np.concatenate(([-1.0], interior, [1.0]))
    return 0.5 * (nodes + 1.0)


def gauss_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """q-point Gauss-Legendre rule mapped to [0, 1] (weights sum to 1)."""
    if q < 1:
        raise ValueError(f"need at least one quadrature point, got {q}")
    x, w = legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass
class ReferenceElement1D:
    """Nodal Lagrange basis of degree k on [0, 1] with a Gauss quadrature.

    ``shape_values[i, q]`` and ``shape_grads[i, q]`` tabulate basis function i
    at quadrature point q.  ``endpoint_derivs[m, i, side]`` holds the m-th
    derivative of basis i at the endpoint ``side`` (0 -> x=0, 1 -> x=1) for
    m = 0..k.  Arbitrary-point evaluation goes through ``evaluate``.
    """

    degree: int
    nodes: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray
    shape_values: np.ndarray = field(repr=False)
    shape_grads: np.ndarray = field(repr=False)
    endpoint_derivs: np.ndarray = field(repr=False)
    # monomial coefficients of every basis function and its derivatives;
    # _deriv_coeffs[m][j, i] is the x^j coefficient of phi_i^(m)
    _deriv_coeffs: list[np.ndarray] = field(repr=False)

    def evaluate(self, x, deriv: int = 0) -> np.ndarray:
        """Values of all basis functions (or a derivative) at points x.

        Returns an array of shape ``x.shape + (k+1,)``.
        """
        if not 0 <= deriv <= self.degree:
            raise ValueError(f"derivative order {deriv} outside 0..{self.degree}")
        x = np.asarray(x, dtype=float)
        vals = npoly.polyval(x, self._deriv_coeffs[deriv])  # (k+1,) + x.shape
        return np.moveaxis(vals, 0, -1)


def build_reference_element(k: int, q: int | None = None) -> ReferenceElement1D:
    """Build the degree-k reference element with a q-point Gauss rule.

    q defaults to k+1, which integrates products of two basis functions
    exactly; q < k+1 is rejected because every consumer here relies on the
    mass matrix being exact.
    """
    if k < 1:
        raise ValueError(f"degree must be >= 1, got {k}")
    if q is None:
        q = k + 1
    if q < k + 1:
        raise ValueError(f"quadrature order {q} too low for degree {k}")

    nodes = gauss_lobatto_nodes(k)
    qx, qw = gauss_rule(q)

    # Lagrange basis in monomial form via the inverse Vandermonde matrix:
    # column i of V^-1 holds the coefficients of phi_i.  Fine for the small
    # degrees used here (k <= 4 in practice, stable well beyond that).
    vander = np.vander(nodes, increasing=True)
    coeffs = np.linalg.inv(vander)
    deriv_coeffs = [coeffs]
    for _ in range(k):
        deriv_coeffs.append(npoly.polyder(deriv_coeffs[-1]))

    elem = ReferenceElement1D(
        degree=k,
        nodes=nodes,
        quad_points=qx,
        quad_weights=qw,
        shape_values=np.empty(0),
        shape_grads=np.empty(0),
        endpoint_derivs=np.empty(0),
        _deriv_coeffs=deriv_coeffs,
    )
    elem.shape_values = elem.evaluate(qx).T  # (k+1, q)
    elem.shape_grads = elem.evaluate(qx, deriv=1).T
    ends = np.array([0.0, 1.0])
    elem.endpoint_derivs = np.stack(
        [elem.evaluate(ends, deriv=m).T for m in range(k + 1)]
    )  # (k+1, k+1, 2)
    return elem


def mass_matrix_1d(elem: ReferenceElement1D) -> np.ndarray:
    """Reference cell mass matrix M1[i, j] = int_0^1 phi_i phi_j dx."""
    sv = elem.shape_values  # (k+1, q)
    return (sv * elem.quad_weights) @ sv.T


def patch_nodes(elem: ReferenceElement1D) -> np.ndarray:
    """The 2k+1 nodal points of the two-cell patch [0, 1] u [1, 2]."""
    return np.concatenate((elem.nodes, 1.0 + elem.nodes[1:]))


def jump_vector(elem: ReferenceElement1D, m: int) -> np.ndarray:
    """Jump of the m-th derivative at x=1 for each of the 2k+1 patch basis
    functions (value from the right cell minus value from the left cell).

    Patch functions are numbered lexicographically: the k+1 nodal functions
    of the left cell first, then the k remaining nodal functions of the
    right cell; the shared node at x=1 appears once, at index k.
    """
    k = elem.degree
    if not 0 <= m <= k:
        raise ValueError(f"jump order {m} outside 0..{k}")
    e = elem.endpoint_derivs  # (m, i, side)
    j = np.zeros(2 * k + 1)
    j[:k] = -e[m, :k, 1]                 # supported on the left cell only
    j[k] = e[m, 0, 0] - e[m, k, 1]       # shared node: phi_0 right, phi_k left
    j[k + 1:] = e[m, 1:, 0]              # supported on the right cell only
    return j


def ghost_matrix_1d(elem: ReferenceElement1D, h: float) -> np.ndarray:
    """Normal-direction ghost-penalty factor on a patch of two cells of size h.

    G1(h) = h^-1 sum_{m=1}^{k} (1/m!)^2 j_m j_m^T.  The m = 0 term vanishes
    identically (the nodal basis is continuous across the shared node), so
    the sum starts at 1.  Scaling: the m-th derivative jump of a function on
    physical cells picks up h^-m per order and the face weight contributes
    h^(2m-1), leaving the single global factor h^-1.
    """
    if h <= 0:
        raise ValueError(f"cell size must be positive, got {h}")
    k = elem.degree
    g = np.zeros((2 * k + 1, 2 * k + 1))
    for m in range(1, k + 1):
        j = jump_vector(elem, m)
        g += np.outer(j, j) / math.factorial(m) ** 2
    return g / h


@dataclass
class GhostPenalty1D:
    """Precomputed 1D factors for one mesh axis: G1(h) plus the scaled
    tangential mass h*M1 used on the remaining axes of a face patch."""

    h: float
    ghost: np.ndarray        # (2k+1, 2k+1)
    scaled_mass: np.ndarray  # (k+1, k+1), equals h * M1


def ghost_penalty_1d(elem: ReferenceElement1D, h: float) -> GhostPenalty1D:
    return GhostPenalty1D(
        h=h,
        ghost=ghost_matrix_1d(elem, h),
        scaled_mass=h * mass_matrix_1d(elem),
    )
