"""Derivative-free nested-grid search over boxes and probability polytopes.

All searches are batched: a problem family with B independent instances is
solved at once, each instance owning its own box.  Objectives receive an
array of candidate points of shape (B, P, d) and return values of shape
(B, P) in the extended reals.  Ties go to the lexicographically smallest
grid index, so results are bit-for-bit reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .core import MARGINAL_TOL, check_no_nan, snap
from .info import entropy

BatchObjective = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 33
    depth: int = 4
    shrink: float = 0.2
    tol_feas: float = 1e-9
    # caps the points per level for boxes of dimension > 2
    max_points: int = 40_000

    def __post_init__(self):
        if self.resolution < 3:
            raise ValueError("grid resolution must be at least 3")
        if self.depth < 1:
            raise ValueError("refinement depth must be at least 1")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")

    def points_per_axis(self, dim: int) -> int:
        if dim <= 2:
            return self.resolution
        return max(3, min(self.resolution, int(self.max_points ** (1.0 / dim))))


def unit_grid(dim: int, per_axis: int) -> np.ndarray:
    """Lexicographically ordered grid of [0,1]^dim, shape (per_axis**dim, dim)."""
    if dim == 0:
        return np.zeros((1, 0))
    axis = np.linspace(0.0, 1.0, per_axis)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _place(lo: np.ndarray, hi: np.ndarray, s: np.ndarray) -> np.ndarray:
    # (1-s)*lo + s*hi reproduces both endpoints exactly
    return (1.0 - s)[None] * lo[:, None, :] + s[None] * hi[:, None, :]


def _as_batch(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    single = lo.ndim == 1
    if single:
        lo, hi = lo[None], hi[None]
    if lo.shape != hi.shape:
        raise ValueError("box bounds disagree in shape")
    if (hi < lo).any():
        raise ValueError("empty box")
    return lo, hi, single


def refine_batch(objective: BatchObjective, lo, hi, spec: GridSpec, maximize: bool = False,
                 anchor=None, record_levels: bool = False):
    """Nested grid search; returns (argopt (B,d), value (B,)) [+ per-level values].

    The coarse grid is followed by ``spec.depth`` refinements; each one
    shrinks the box around the incumbent best point by ``spec.shrink``
    (staying inside the original box) and evaluates a full grid on it.  ``anchor`` points (B,d) are evaluated first and
    seed the incumbent.
    """
    lo0, hi0, _ = _as_batch(lo, hi)
    B, d = lo0.shape
    sign = -1.0 if maximize else 1.0
    best_x = np.zeros((B, d))
    best_v = np.full(B, np.inf)
    if anchor is not None:
        a = np.asarray(anchor, dtype=float).reshape(B, 1, d)
        va = sign * check_no_nan(objective(a), "objective")[:, 0]
        best_x, best_v = a[:, 0].copy(), va
    grid = unit_grid(d, spec.points_per_axis(d))
    cur_lo, cur_hi = lo0.copy(), hi0.copy()
    history = []
    rows = np.arange(B)
    for level in range(spec.depth + 1 if d > 0 else 1):
        pts = _place(cur_lo, cur_hi, grid)
        vals = sign * check_no_nan(objective(pts), "objective")
        idx = np.argmin(vals, axis=1)
        v = vals[rows, idx]
        better = v < best_v
        best_v = np.where(better, v, best_v)
        best_x = np.where(better[:, None], pts[rows, idx], best_x)
        history.append(sign * best_v.copy())
        if d == 0:
            break
        width = (cur_hi - cur_lo) * spec.shrink
        new_lo = np.maximum(best_x - width / 2, lo0)
        new_hi = np.minimum(new_lo + width, hi0)
        new_lo = np.maximum(new_hi - width, lo0)
        cur_lo, cur_hi = new_lo, new_hi
    out = (best_x, sign * best_v)
    if record_levels:
        return out + (history,)
    return out


def refine_search(objective: Callable[[np.ndarray], np.ndarray], lo, hi, spec: GridSpec,
                  maximize: bool = False, anchor=None):
    """Single-instance nested grid search: objective maps (P,d) -> (P,)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    anc = None if anchor is None else np.atleast_1d(np.asarray(anchor, dtype=float))[None]
    x, v = refine_batch(lambda p: objective(p[0])[None], lo[None], hi[None], spec, maximize, anc)
    return x[0], float(v[0])


def _bisect_boundary(constraint, threshold, x_in, x_out, iters: int = 60):
    """Largest step along x_in -> x_out keeping constraint <= threshold (batched)."""
    a = np.zeros(x_in.shape[0])
    b = np.ones(x_in.shape[0])
    for _ in range(iters):
        m = 0.5 * (a + b)
        pt = x_in + m[:, None] * (x_out - x_in)
        ok = constraint(pt[:, None, :])[:, 0] <= threshold
        a = np.where(ok, m, a)
        b = np.where(ok, b, m)
    return x_in + a[:, None] * (x_out - x_in)


def constrained_batch(objective: BatchObjective, constraint: BatchObjective, threshold, lo, hi,
                      spec: GridSpec, anchor=None, maximize: bool = True):
    """Optimize ``objective`` subject to ``constraint <= threshold + tol_feas``.

    Grid refinement runs on the penalized objective.  Afterwards the best
    infeasible grid point that beats the incumbent (found on a final
    unconstrained sweep of the last box) is approached by bisection along the
    segment from the incumbent; the boundary point replaces the incumbent when
    it is better.
    """
    lo0, hi0, _ = _as_batch(lo, hi)
    B, d = lo0.shape
    thr = np.broadcast_to(np.asarray(threshold, dtype=float), (B,)) + spec.tol_feas
    bad = -np.inf if maximize else np.inf
    sign = 1.0 if maximize else -1.0

    def penalized(p):
        v = objective(p)
        ok = constraint(p) <= thr[:, None]
        return np.where(ok, v, bad)

    grid = unit_grid(d, spec.points_per_axis(d))
    if anchor is None:
        coarse_ok = constraint(_place(lo0, hi0, grid)) <= thr[:, None]
        if not coarse_ok.any(axis=1).all():
            raise ValueError("no feasible point on the coarse grid and no anchor supplied")
    x, v = refine_batch(penalized, lo0, hi0, spec, maximize=maximize, anchor=anchor)
    if d == 0:
        return x, v
    rows = np.arange(B)
    width = (hi0 - lo0) * spec.shrink ** spec.depth
    sl = np.maximum(x - width / 2, lo0)
    sh = np.minimum(sl + width, hi0)
    sl = np.maximum(sh - width, lo0)
    # infeasible improvers: one next to the incumbent, one anywhere in the box
    for box_lo, box_hi in ((sl, sh), (lo0, hi0)):
        pts = _place(box_lo, box_hi, grid)
        raw = sign * objective(pts)
        raw = np.where(constraint(pts) <= thr[:, None], -np.inf, raw)
        j = np.argmax(raw, axis=1)
        improver = raw[rows, j] > sign * v
        if not improver.any():
            continue
        edge = _bisect_boundary(constraint, thr, x, pts[rows, j])
        ev = objective(edge[:, None, :])[:, 0]
        take = improver & (constraint(edge[:, None, :])[:, 0] <= thr) & (sign * ev > sign * v)
        x = np.where(take[:, None], edge, x)
        v = np.where(take, ev, v)
    return x, v


def constrained_max(objective, constraint, threshold, lo, hi, spec: GridSpec, anchor=None):
    """Single-instance constrained maximization: callables map (P,d) -> (P,)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    anc = None if anchor is None else np.atleast_1d(np.asarray(anchor, dtype=float))[None]
    x, v = constrained_batch(lambda p: objective(p[0])[None], lambda p: constraint(p[0])[None],
                             threshold, lo[None], hi[None], spec, anc, maximize=True)
    return x[0], float(v[0])


# ---------------------------------------------------------------------------
# polytope parametrizations


class TransportFamily:
    """Joints with fixed row marginal ``row`` and (batched) column marginals ``col``.

    Coordinates are perturbations of the product coupling along the basis
    e_i e_j^T - e_i e_b^T - e_a e_j^T + e_a e_b^T (i < a-1, j < b-1, with the
    last symbol as pivot).  The box is the exact range of each coordinate taken
    alone; points outside the polytope map to joints with negative entries and
    are reported by :meth:`feasible`.  For 2 x 2 alphabets the box is exactly
    the polytope.
    """

    def __init__(self, row, col):
        self.row = np.asarray(row, dtype=float)
        col = np.asarray(col, dtype=float)
        self.single = col.ndim == 1
        self.col = col[None] if self.single else col
        self.a = self.row.size
        self.b = self.col.shape[1]
        self.product = self.row[None, :, None] * self.col[:, None, :]
        self.dim = (self.a - 1) * (self.b - 1)
        p = self.product
        a, b = self.a - 1, self.b - 1
        lo = -np.minimum(p[:, :a, :b], p[:, a:, b:])
        hi = np.minimum(p[:, :a, b:], p[:, a:, :b])
        self.lo = lo.reshape(len(p), -1)
        self.hi = hi.reshape(len(p), -1)

        # with both marginals fixed, I(J) = H(row) + H(col) - H(J)
        self.h_marg = entropy(self.row) + entropy(self.col)
        self._last = (None, None)

    def mutual_info(self, joints: np.ndarray) -> np.ndarray:
        j = np.where(joints > 0, joints, 1.0)
        h = -(j * np.log(j)).sum(axis=(-2, -1))
        mi = self.h_marg.reshape(self.h_marg.shape + (1,) * (h.ndim - 1)) - h
        return np.maximum(mi, 0.0)

    @property
    def anchor(self) -> np.ndarray:
        return np.zeros((len(self.product), self.dim))

    def joints(self, theta: np.ndarray) -> np.ndarray:
        """theta (B,P,d) -> joints (B,P,a,b)."""
        if self._last[0] is theta:
            return self._last[1]
        a, b = self.a - 1, self.b - 1
        B, P, _ = theta.shape
        t = theta.reshape(B, P, a, b)
        j = np.broadcast_to(self.product[:, None], (B, P, self.a, self.b)).copy()
        j[:, :, :a, :b] += t
        j[:, :, :a, b] -= t.sum(axis=3)
        j[:, :, a, :b] -= t.sum(axis=2)
        j[:, :, a, b] += t.sum(axis=(2, 3))
        j = snap(j)
        self._last = (theta, j)
        return j

    def feasible(self, joints: np.ndarray) -> np.ndarray:
        return (joints >= 0).all(axis=(-2, -1))


def iterate_transport_polytope(qx, spec: GridSpec) -> Iterator[np.ndarray]:
    """Yield members of Q(Q_X) on the grid of the product-centred family.

    For a binary alphabet this is the exact one-parameter family, sampled at
    ``spec.resolution`` points from the vertex with the least diagonal mass to
    the diagonal coupling.  Larger alphabets are sampled on the clipped box of
    the affine family and infeasible (negative) points are skipped.
    """
    qx = np.asarray(qx, dtype=float)
    fam = TransportFamily(qx, qx)
    if fam.dim == 0 or np.allclose(fam.lo, fam.hi):
        yield fam.product[0]
        return
    grid = unit_grid(fam.dim, spec.points_per_axis(fam.dim))
    joints = fam.joints(_place(fam.lo, fam.hi, grid))[0]
    for q in joints:
        if (q >= 0).all() and np.allclose(q.sum(0), qx, atol=MARGINAL_TOL) and \
                np.allclose(q.sum(1), qx, atol=MARGINAL_TOL):
            yield q
