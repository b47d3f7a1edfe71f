"""Conjugate-gradient solve over active DoFs and L2 error evaluation.

The solver is a plain unpreconditioned CG with x0 = 0 stopping at
||r|| <= tol_rel * ||b||.  All reductions run in a fixed order, so solves are
bitwise reproducible for a fixed operator.  Errors are integrated with
elevated-order rules: tensor Gauss on uncut cells and regenerated cut-cell
rules on intersected cells, so the measurement resolves rates up to k+1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import prod

import numpy as np

from . import sumfac
from .operators import (
    OperatorContext,
    _grid_shape,
    _interior_quad_points,
    _point_contract,
    _select_tabs,
    error_point_block,
    vmult,
)
from .sumfac import contract_axis
from .tensor1d import gauss_rule

_CELL_CHUNK = 4096


@dataclass
class SolveReport:
    """Outcome of a CG solve; carries the full residual-norm history."""

    solution: np.ndarray
    iterations: int
    converged: bool
    relative_residual: float
    residual_history: np.ndarray
    wall_time: float


def cg_solve(apply, b: np.ndarray, tol_rel: float = 1e-8, max_iter: int | None = None) -> SolveReport:
    """Unpreconditioned CG from x0 = 0 for a symmetric positive operator.

    ``apply`` is either a callable ``v -> A v`` or an OperatorContext.  On
    non-convergence the report has converged=False and the residual history
    shows how far the solve got; no exception is raised.
    """
    if isinstance(apply, OperatorContext):
        ctx = apply
        apply = lambda v: vmult(ctx, v)
    b = np.asarray(b, dtype=float)
    if not np.isfinite(b).all():
        raise ValueError("right-hand side contains non-finite entries")
    n = b.size
    if max_iter is None:
        max_iter = int(20 * np.sqrt(n)) + 1000

    t0 = time.perf_counter()
    x = np.zeros_like(b)
    r = b.copy()
    norm_b = float(np.linalg.norm(r))
    history = [norm_b]
    if norm_b == 0.0:
        return SolveReport(x, 0, True, 0.0, np.array(history), time.perf_counter() - t0)

    p = r.copy()
    rs = float(r @ r)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        ap = apply(p)
        p_ap = float(p @ ap)
        if p_ap <= 0.0:
            # loss of positivity in finite precision; report what we have
            iterations -= 1
            break
        alpha = rs / p_ap
        x += alpha * p
        r -= alpha * ap
        rn = float(np.linalg.norm(r))
        history.append(rn)
        if rn <= tol_rel * norm_b:
            converged = True
            break
        rs_new = float(r @ r)
        p = r + (rs_new / rs) * p
        rs = rs_new

    return SolveReport(
        solution=x,
        iterations=iterations,
        converged=converged,
        relative_residual=history[-1] / norm_b,
        residual_history=np.array(history),
        wall_time=time.perf_counter() - t0,
    )


def l2_error(ctx: OperatorContext, u_h: np.ndarray, u_exact) -> float:
    """sqrt of the integral of (u_h - u_exact)^2 over the physical domain.

    Uncut cells use a tensor Gauss rule of the configured error order; cut
    cells use freshly generated interior rules at that order (cached on ctx).
    """
    u_h = np.asarray(u_h, dtype=float)
    if u_h.shape != (ctx.n_dofs,):
        raise ValueError(f"expected vector of length {ctx.n_dofs}, got {u_h.shape}")
    order = ctx.params.error_quad_order
    d = ctx.mesh.dim
    n = ctx.elem.degree + 1
    gx, gw = gauss_rule(order)
    sv = ctx.elem.evaluate(gx)  # (order, n): coefficients -> point values
    jac = prod(ctx.mesh.spacing)
    wgrid = sumfac.reference_weight_grid(gw, d).reshape(_grid_shape(order, d)) * jac

    err2 = 0.0
    for start in range(0, len(ctx.inside_cells), _CELL_CHUNK):
        sl = slice(start, min(start + _CELL_CHUNK, len(ctx.inside_cells)))
        grid = u_h[ctx.inside_dofs[sl]].reshape((-1,) + _grid_shape(n, d))
        t = grid
        for a in range(d):
            t = contract_axis(sv, t, t.ndim - 1 - a)
        pts = _interior_quad_points(ctx, ctx.inside_lower[sl], gx)
        diff = t - np.asarray(u_exact(pts), dtype=float)
        err2 += float(np.sum(diff * diff * wgrid))

    if len(ctx.cut_cells):
        blk = error_point_block(ctx, order)
        if blk.weights.size:
            u3 = u_h[ctx.cut_dofs].reshape((-1,) + _grid_shape(n, d))
            vals = _point_contract(u3[blk.cell], _select_tabs(blk, slice(None), None))
            diff = vals - np.asarray(u_exact(blk.points), dtype=float)
            err2 += float(np.sum(diff * diff * blk.weights))
    return float(np.sqrt(err2))


def manufactured_problem(d: int):
    """Quadratic exact solution u = (2/d)(1 - |x|^2), zero on the unit sphere.

    Returns (u_exact, f) with f = -Laplacian(u) = 4 in any dimension.  The
    solution lies in the trial space for k >= 2, which makes it a sharp
    consistency check but useless for measuring convergence rates.
    """
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")

    def u_exact(x):
        x = np.asarray(x, dtype=float)
        return (2.0 / d) * (1.0 - np.sum(x * x, axis=-1))

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape[:-1], 4.0)

    return u_exact, f


def radial_cosine_problem(d: int):
    """Non-polynomial exact solution u = cos(pi |x|^2 / 2), zero on |x| = 1.

    Returns (u_exact, f) with f = pi^2 |x|^2 cos(pi |x|^2 / 2)
    + d pi sin(pi |x|^2 / 2).  Lying outside every Q_k space, it exercises
    genuine discretization error at all degrees.
    """
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")

    def u_exact(x):
        x = np.asarray(x, dtype=float)
        return np.cos(0.5 * np.pi * np.sum(x * x, axis=-1))

    def f(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        return np.pi**2 * r2 * np.cos(0.5 * np.pi * r2) + d * np.pi * np.sin(0.5 * np.pi * r2)

    return u_exact, f
