"""High-order quadrature on implicitly bounded cell fractions.

Given a box K and a level set phi, builds Gauss-type rules for the volume
K n {phi > 0} and the surface K n {phi = 0} by dimension reduction: pick a
height axis along which d(phi)/dx_a has uniform sign, integrate the other
axes with a recursively built base rule that is split at the zeros of phi
restricted to the bottom/top faces, and resolve each vertical line by root
finding (sign scan, bisection, one Newton polish).

When no axis qualifies the box is bisected into 2^d sub-boxes up to
``max_depth``; below that a sign-of-center fallback fires and is counted.
The construction is sampling-based, not certified: interfaces that oscillate
below the sample resolution can be missed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor1d import gauss_rule

# an axis qualifies as height direction when |d(phi)/dx_a| is at least this
# fraction of the largest component at every sample point, with uniform sign
DERIVATIVE_DOMINANCE = 1e-3
BISECTION_STEPS = 48  # fixed count, resolves to ~4e-15 of the segment length


class QuadratureError(RuntimeError):
    pass


class _NeedSubdivision(Exception):
    pass


@dataclass
class CutCellQuadrature:
    """Volume and surface rules of one cut cell (physical points/weights).

    Surface normals point out of {phi > 0}; ``fallback_count`` counts
    sign-of-center fallbacks that fired during construction."""

    interior_points: np.ndarray
    interior_weights: np.ndarray
    surface_points: np.ndarray
    surface_weights: np.ndarray
    surface_normals: np.ndarray
    fallback_count: int = 0


class _Slice:
    """A level-set-like function with one coordinate pinned."""

    def __init__(self, parent, axis: int, coord: float):
        self.parent = parent
        self.axis = axis
        self.coord = coord

    def _lift(self, x):
        x = np.asarray(x, dtype=float)
        return np.insert(x, self.axis, self.coord, axis=-1)

    def value(self, x):
        return self.parent.value(self._lift(x))

    def gradient(self, x):
        g = self.parent.gradient(self._lift(x))
        return np.delete(g, self.axis, axis=-1)


def _sample_grid(lo, hi, per_axis: int) -> np.ndarray:
    """Tensor sample grid including the box corners, shape (per_axis^m, m)."""
    axes = [np.linspace(l, h, per_axis) for l, h in zip(lo, hi)]
    if len(axes) == 1:
        return axes[0][:, None]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def _tensor_rule(lo, hi, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Plain tensor-product Gauss rule over the whole box."""
    gx, gw = gauss_rule(q)
    pts_1d = [l + gx * (h - l) for l, h in zip(lo, hi)]
    wts_1d = [gw * (h - l) for l, h in zip(lo, hi)]
    grids = np.meshgrid(*pts_1d, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wts = np.ones(1)
    for w in wts_1d:
        wts = np.multiply.outer(wts, w).ravel()
    return pts, wts


def _has_sign_change(vals: np.ndarray) -> bool:
    return bool((vals > 0).any() and (vals < 0).any()) or bool((vals == 0.0).any())


def _pick_height_axis(funcs, lo, hi, samples: int) -> int:
    """Axis with sign-uniform, everywhere-dominant partial derivative for
    every function in ``funcs``; raises _NeedSubdivision when none exists."""
    m = len(lo)
    pts = _sample_grid(lo, hi, samples)
    grads = [np.atleast_2d(f.gradient(pts)) for f in funcs]
    best_axis, best_score = -1, 0.0
    for a in range(m):
        ok = True
        score = np.inf
        for g in grads:
            ga = g[:, a]
            mag = np.abs(g).max(axis=1)
            if not ((ga > 0).all() or (ga < 0).all()):
                ok = False
                break
            if (np.abs(ga) < DERIVATIVE_DOMINANCE * mag).any():
                ok = False
                break
            score = min(score, np.abs(ga).min())
        if ok and score > best_score:
            best_axis, best_score = a, score
    if best_axis < 0:
        raise _NeedSubdivision
    return best_axis


def _line_points(base_pts: np.ndarray, axis: int, t: np.ndarray) -> np.ndarray:
    """Combine base points (B, m-1) with height coordinates (B, T) -> (B, T, m)."""
    b, t_count = t.shape
    out = np.empty((b, t_count, base_pts.shape[1] + 1))
    out[..., axis] = t
    rest = [a for a in range(base_pts.shape[1] + 1) if a != axis]
    out[..., rest] = base_pts[:, None, :]
    return out


def _roots_on_lines(f, base_pts: np.ndarray, axis: int, lo_a: float, hi_a: float, q: int):
    """All roots of t -> f(..., t, ...) on [lo_a, hi_a] for every base point.

    Scans q+3 equal sub-intervals for sign changes, bisects each bracket a
    fixed number of steps, then applies one Newton polish clipped to the
    bracket.  Returns (line_index, root) arrays, unsorted across lines but
    ascending within each line's scan order.
    """
    n_lines = base_pts.shape[0]
    ts = np.linspace(lo_a, hi_a, q + 4)
    vals = f.value(_line_points(base_pts, axis, np.broadcast_to(ts, (n_lines, ts.size))))

    exact = np.argwhere(vals == 0.0)
    exact_lines = exact[:, 0]
    exact_roots = ts[exact[:, 1]]

    sign_change = vals[:, :-1] * vals[:, 1:] < 0.0
    line_idx, seg_idx = np.nonzero(sign_change)
    t_lo = ts[seg_idx].astype(float)
    t_hi = ts[seg_idx + 1].astype(float)
    f_lo = vals[line_idx, seg_idx]
    if line_idx.size:
        for _ in range(BISECTION_STEPS):
            mid = 0.5 * (t_lo + t_hi)
            fm = f.value(_line_points(base_pts[line_idx], axis, mid[:, None]))[:, 0]
            left = (fm > 0) == (f_lo > 0)
            t_lo = np.where(left, mid, t_lo)
            f_lo = np.where(left, fm, f_lo)
            t_hi = np.where(left, t_hi, mid)
        root = 0.5 * (t_lo + t_hi)
        # one Newton step with the height-direction derivative
        x = _line_points(base_pts[line_idx], axis, root[:, None])
        fr = f.value(x)[:, 0]
        dr = f.gradient(x)[:, 0, axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(np.abs(dr) > 0, fr / dr, 0.0)
        root = np.clip(root - step, t_lo, t_hi)
        scale = np.abs(vals).max() if vals.size else 1.0
        res = np.abs(f.value(_line_points(base_pts[line_idx], axis, root[:, None]))[:, 0])
        if scale > 0 and (res > 1e-6 * scale).any():
            raise QuadratureError("root finding did not converge")
    else:
        root = np.empty(0)

    lines = np.concatenate([exact_lines, line_idx])
    roots = np.concatenate([exact_roots, root])
    return lines.astype(np.int64), roots


def _merge_roots(roots: np.ndarray, span: float) -> np.ndarray:
    """Sort and deduplicate roots that coincide to within the bisection width."""
    if roots.size == 0:
        return roots
    roots = np.sort(roots)
    keep = np.concatenate([[True], np.diff(roots) > 1e-12 * span])
    return roots[keep]


def _box_rule(lo, hi, funcs, q: int, samples: int):
    """Quadrature covering the WHOLE box, with Gauss pieces split so that no
    piece straddles a zero of any function in ``funcs``."""
    m = len(lo)
    if funcs:
        pts = _sample_grid(lo, hi, samples)
        funcs = [f for f in funcs if _has_sign_change(np.atleast_1d(f.value(pts)))]
    if not funcs:
        return _tensor_rule(lo, hi, q)

    gx, gw = gauss_rule(q)
    if m == 1:
        base = np.zeros((1, 0))
        axis = 0
        base_w = np.ones(1)
    else:
        axis = _pick_height_axis(funcs, lo, hi, samples)
        sub_lo = [v for a, v in enumerate(lo) if a != axis]
        sub_hi = [v for a, v in enumerate(hi) if a != axis]
        base_funcs = [_Slice(f, axis, lo[axis]) for f in funcs]
        base_funcs += [_Slice(f, axis, hi[axis]) for f in funcs]
        base, base_w = _box_rule(sub_lo, sub_hi, base_funcs, q, samples)

    span = hi[axis] - lo[axis]
    all_lines = []
    all_roots = []
    for f in funcs:
        li, rt = _roots_on_lines(f, base, axis, lo[axis], hi[axis], q)
        all_lines.append(li)
        all_roots.append(rt)
    lines = np.concatenate(all_lines)
    roots = np.concatenate(all_roots)

    pts_out, wts_out = [], []
    for b in range(base.shape[0]):
        bp = _merge_roots(roots[lines == b], span)
        breaks = np.concatenate([[lo[axis]], bp, [hi[axis]]])
        for t0, t1 in zip(breaks[:-1], breaks[1:]):
            seg = t1 - t0
            t_pts = t0 + gx * seg
            full = _line_points(base[b : b + 1], axis, t_pts[None, :])[0]
            pts_out.append(full)
            wts_out.append(base_w[b] * gw * seg)
    return np.concatenate(pts_out), np.concatenate(wts_out)


def _empty(d: int):
    return (
        np.empty((0, d)),
        np.empty(0),
        np.empty((0, d)),
        np.empty(0),
        np.empty((0, d)),
    )


def _cut_rule(lo, hi, phi, q: int, depth: int, counter: list):
    """Volume + surface rule of one box; recursive subdivision entry point."""
    d = len(lo)
    samples = max(q + 1, 3)
    pts = _sample_grid(lo, hi, samples)
    vals = phi.value(pts)
    if (vals >= 0).all():
        ipts, iwts = _tensor_rule(lo, hi, q)
        return ipts, iwts, *_empty(d)[2:]
    if (vals < 0).all():
        return _empty(d)

    try:
        axis = _pick_height_axis([phi], lo, hi, samples)
        sub_lo = [v for a, v in enumerate(lo) if a != axis]
        sub_hi = [v for a, v in enumerate(hi) if a != axis]
        base_funcs = [_Slice(phi, axis, lo[axis]), _Slice(phi, axis, hi[axis])]
        base, base_w = _box_rule(sub_lo, sub_hi, base_funcs, q, samples)
    except _NeedSubdivision:
        if depth <= 0:
            counter[0] += 1
            center = 0.5 * (np.asarray(lo) + np.asarray(hi))
            if phi.value(center[None, :])[0] >= 0:
                ipts, iwts = _tensor_rule(lo, hi, q)
                return ipts, iwts, *_empty(d)[2:]
            return _empty(d)
        mids = 0.5 * (np.asarray(lo) + np.asarray(hi))
        parts = [_empty(d)]
        for corner in range(2 ** d):
            slo, shi = [], []
            for a in range(d):
                if corner >> a & 1:
                    slo.append(mids[a])
                    shi.append(hi[a])
                else:
                    slo.append(lo[a])
                    shi.append(mids[a])
            parts.append(_cut_rule(slo, shi, phi, q, depth - 1, counter))
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(5))

    gx, gw = gauss_rule(q)
    span = hi[axis] - lo[axis]
    lines, roots = _roots_on_lines(phi, base, axis, lo[axis], hi[axis], q)

    ipts, iwts = [], []
    spts, swts, snrm = [], [], []
    for b in range(base.shape[0]):
        bp = _merge_roots(roots[lines == b], span)
        breaks = np.concatenate([[lo[axis]], bp, [hi[axis]]])
        mids = 0.5 * (breaks[:-1] + breaks[1:])
        mid_vals = phi.value(_line_points(base[b : b + 1], axis, mids[None, :]))[0]
        for t0, t1, v in zip(breaks[:-1], breaks[1:], mid_vals):
            if v <= 0:
                continue
            seg = t1 - t0
            ipts.append(_line_points(base[b : b + 1], axis, (t0 + gx * seg)[None, :])[0])
            iwts.append(base_w[b] * gw * seg)
        if bp.size:
            x = _line_points(base[b : b + 1], axis, bp[None, :])[0]
            g = np.atleast_2d(phi.gradient(x))
            norm = np.linalg.norm(g, axis=-1)
            ga = np.abs(g[:, axis])
            spts.append(x)
            swts.append(base_w[b] * norm / ga)
            snrm.append(-g / norm[:, None])

    cat = lambda parts, d_: np.concatenate(parts) if parts else np.empty((0, d_) if d_ else 0)
    return (
        cat(ipts, d),
        cat(iwts, 0),
        cat(spts, d),
        cat(swts, 0),
        cat(snrm, d),
    )


def cut_cell_quadrature(lo, hi, phi, q: int, max_depth: int = 8) -> CutCellQuadrature:
    """Build the combined volume/surface rule of one (possibly cut) box."""
    if q < 1:
        raise ValueError(f"need at least one quadrature point, got {q}")
    if max_depth < 0:
        raise ValueError(f"max_depth must be >= 0, got {max_depth}")
    lo = [float(v) for v in np.asarray(lo).ravel()]
    hi = [float(v) for v in np.asarray(hi).ravel()]
    if len(lo) != len(hi) or any(l >= h for l, h in zip(lo, hi)):
        raise ValueError("invalid box")
    counter = [0]
    ipts, iwts, spts, swts, snrm = _cut_rule(lo, hi, phi, q, max_depth, counter)
    return CutCellQuadrature(ipts, iwts, spts, swts, snrm, counter[0])


def interior_quadrature(lo, hi, phi, q: int, max_depth: int = 8):
    """Points and weights for int_{K n {phi>0}}; plain Gauss when uncut."""
    rule = cut_cell_quadrature(lo, hi, phi, q, max_depth)
    return rule.interior_points, rule.interior_weights


def surface_quadrature(lo, hi, phi, q: int, max_depth: int = 8):
    """Points, weights and outward normals for int_{K n {phi=0}}."""
    rule = cut_cell_quadrature(lo, hi, phi, q, max_depth)
    return rule.surface_points, rule.surface_weights, rule.surface_normals


def dump_quadrature_csv(path, rules: dict) -> None:
    """Debug dump: cell_index, kind (I volume / S surface), coords, weight,
    and for surface rows the normal components."""
    first = next(iter(rules.values()), None)
    d = first.interior_points.shape[1] if first is not None else 3
    coord_names = ["x", "y", "z"][:d]
    norm_names = ["nx", "ny", "nz"][:d]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(["cell_index", "kind", *coord_names, "w", *norm_names]) + "\n")
        for cell, rule in rules.items():
            for p, w in zip(rule.interior_points, rule.interior_weights):
                row = [str(cell), "I", *(repr(float(v)) for v in p), repr(float(w))]
                f.write(",".join(row + [""] * d) + "\n")
            for p, w, n in zip(rule.surface_points, rule.surface_weights, rule.surface_normals):
                row = [str(cell), "S", *(repr(float(v)) for v in p), repr(float(w))]
                f.write(",".join(row + [repr(float(v)) for v in n]) + "\n")
