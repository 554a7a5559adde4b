"""Brute-force reference values for the z-channel with Q_X = (1/2, 1/2).

Written against plain numpy only, sharing no code with the package's
optimizers.  The outer family is Q_XX' = [[a, 1/2 - a], [1/2 - a, a]] on a
step-1e-3 grid of ``a`` (plus the exact constraint boundary points); the
output conditionals are exhaustive grids; the coupling problems behind
alpha and beta are solved by a fine grid followed by a zoomed second grid.

For the z-channel, y = 1 is impossible after x = 0, so only V(1|1,0) and
V(1|1,1) are free.  Conditionals whose Q_X'Y charges the forbidden cell
(x' = 0, y = 1) have an infinite clip term whatever alpha is, so alpha and
beta are only solved at the output distributions of the remaining points.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

EPS = 0.001
W = np.array([[1.0, 0.0], [EPS, 1.0 - EPS]])
with np.errstate(divide="ignore"):
    C = np.log(W)
QSTEPS = 1000
VSTEPS = 200
TGRID = 401
TZOOM = 201
TOL = 1e-9


def xlogy_sum(p, q):
    """sum p log(p/q) over the last two axes with 0 log 0 = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, p * np.log(p / q), 0.0)
    return t.sum(axis=(-2, -1))


def metric(j):
    """<j, ln W> with 0 * (-inf) = 0."""
    fin = np.where(np.isfinite(C), C, 0.0)
    val = (j * fin).sum(axis=(-2, -1))
    banned = ((j > 0) & ~np.isfinite(C)).any(axis=(-2, -1))
    return np.where(banned, -np.inf, val)


def mi(j):
    ra = j.sum(axis=-1, keepdims=True)
    cb = j.sum(axis=-2, keepdims=True)
    return np.maximum(xlogy_sum(j, ra * cb), 0.0)


def _couplings(qy1, t):
    """Couplings of Q_X = (1/2,1/2) and Q_Y = (1-qy1, qy1) at offsets t (shape (B,T))."""
    p0 = 0.5 * (1 - qy1)[:, None]
    p1 = 0.5 * qy1[:, None]
    j = np.empty(t.shape + (2, 2))
    j[..., 0, 0] = p0 + t
    j[..., 0, 1] = p1 - t
    j[..., 1, 0] = p0 - t
    j[..., 1, 1] = p1 + t
    return np.where(np.abs(j) < 1e-15, 0.0, j)


def _coupling_max(qy1, value_fn, limit):
    """max over couplings of value_fn(J, I(J)) s.t. I(J) <= limit (None: unconstrained).

    With both marginals fixed, I(J) = H(X) + H(Y) - H(J).
    """
    qy1 = np.asarray(qy1, dtype=float)
    lo = -np.minimum(0.5 * (1 - qy1), 0.5 * qy1)
    hi = np.minimum(0.5 * qy1, 0.5 * (1 - qy1))

    with np.errstate(divide="ignore", invalid="ignore"):
        hy = -np.where(qy1 > 0, qy1 * np.log(qy1), 0.0) - np.where(qy1 < 1, (1 - qy1) * np.log(1 - qy1), 0.0)
    h_marg = (np.log(2.0) + hy)[:, None]

    def evaluate(t):
        j = _couplings(qy1, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            hj = -np.where(j > 0, j * np.log(j), 0.0).sum(axis=(-2, -1))
        info = np.maximum(h_marg - hj, 0.0)
        v = value_fn(j, info)
        ok = (j >= 0).all(axis=(-2, -1))
        if limit is not None:
            ok &= info <= limit + TOL
        return np.where(ok, v, -np.inf)

    s = np.linspace(0.0, 1.0, TGRID)
    t = lo[:, None] + s[None] * (hi - lo)[:, None]
    t[:, TGRID // 2] = 0.0          # product coupling
    v = evaluate(t)
    k = np.argmax(v, axis=1)
    best = v[np.arange(len(qy1)), k]
    h = (hi - lo) / (TGRID - 1)
    c = t[np.arange(len(qy1)), k]
    s2 = np.linspace(-1.0, 1.0, TZOOM)
    t2 = np.clip(c[:, None] + s2[None] * h[:, None], lo[:, None], hi[:, None])
    v2 = evaluate(t2)
    return np.maximum(best, v2.max(axis=1))


def alpha_values(qy1, r, chunk=2000):
    out = np.empty(len(qy1))
    for s in range(0, len(qy1), chunk):
        q = qy1[s:s + chunk]
        out[s:s + chunk] = r + _coupling_max(q, lambda j, i: metric(j) - i, r)
    return out


def beta_values(qy1, r, chunk=2000):
    out = np.empty(len(qy1))
    for s in range(0, len(qy1), chunk):
        q = qy1[s:s + chunk]
        g = _coupling_max(q, lambda j, i: metric(j), None)
        h = _coupling_max(q, lambda j, i: metric(j) - i, None)
        out[s:s + chunk] = np.maximum(g, h + r)
    return out


class Oracle:
    """Gamma / Lambda over the outer grid at one rate, memoized per point."""

    def __init__(self, r: float, with_lambda: bool = False):
        self.r = r
        self.with_lambda = with_lambda
        v = np.arange(VSTEPS + 1) / VSTEPS
        self.v10, self.v11 = [m.ravel() for m in np.meshgrid(v, v, indexing="ij")]
        self.a_grid = np.arange(QSTEPS // 2 + 1) / QSTEPS
        self._cache = {}

    def _pieces(self, a):
        b = 0.5 - a
        v10, v11 = self.v10, self.v11
        t = np.zeros((len(v10), 2, 2, 2))          # [x, x', y]
        t[:, 0, 0, 0] = a
        t[:, 0, 1, 0] = b
        t[:, 1, 0, 0] = b * (1 - v10)
        t[:, 1, 0, 1] = b * v10
        t[:, 1, 1, 0] = a * (1 - v11)
        t[:, 1, 1, 1] = a * v11
        qxy = t.sum(axis=2)
        qxpy = t.sum(axis=1)
        qy1 = b * v10 + a * v11
        d = xlogy_sum(qxy, 0.5 * W[None])
        qxx = np.array([[a, b], [b, a]])
        ref = qxx[None, :, :, None] * qxy[:, :, None, :] / 0.5
        with np.errstate(divide="ignore", invalid="ignore"):
            icond = np.where(t > 0, t * np.log(t / ref), 0.0).sum(axis=(1, 2, 3))
        return d + icond, metric(qxy), metric(qxpy), qy1

    def values(self, a):
        """(Gamma, Lambda or None) at Q_XX' with diagonal entries a."""
        key = round(float(a), 15)
        if key in self._cache:
            return self._cache[key]
        base, gxy, gxpy, qy1 = self._pieces(a)
        live = gxpy > -np.inf
        base, gxy, gxpy = base[live], gxy[live], gxpy[live]
        uniq, inv = np.unique(qy1[live], return_inverse=True)
        al = alpha_values(uniq, self.r)[inv]
        gam = float((base + np.maximum(np.maximum(gxy, al) - gxpy, 0.0)).min())
        lam = None
        if self.with_lambda:
            be = beta_values(uniq, self.r)[inv]
            lam = float((base + np.maximum(be - gxpy, 0.0)).min())
        self._cache[key] = (gam, lam)
        return gam, lam


def outer_mi(a):
    q = np.array([[a, 0.5 - a], [0.5 - a, a]])
    return float(mi(q[None])[0])


def boundary_points(limit):
    """Diagonal entries a where I(Q_XX') = limit (I is 0 at a = 1/4, ln 2 at the ends)."""
    pts = []
    if limit <= 0:
        return [0.25]
    for lo, hi in ((0.0, 0.25), (0.25, 0.5)):
        f = lambda a: outer_mi(a) - limit
        if f(lo) * f(hi) < 0:
            pts.append(brentq(f, lo, hi, xtol=1e-15))
    return pts


def outer_min(orc: Oracle, kind: str, objective, limit):
    """min over the outer grid (plus boundary points) of objective(F, I)."""
    pts = list(orc.a_grid)
    if limit is not None:
        pts += boundary_points(limit)
    best = np.inf
    for a in pts:
        i = outer_mi(a)
        if limit is not None and i > limit + TOL:
            continue
        gam, lam = orc.values(a)
        f = gam if kind == "gamma" else lam
        best = min(best, objective(f, i))
    return best


def e_trc(orc):
    return outer_min(orc, "gamma", lambda f, i: f + i - orc.r, 2 * orc.r)


def e_ex(orc):
    return outer_min(orc, "gamma", lambda f, i: f + i - orc.r, orc.r)


def e_tilde(orc):
    return outer_min(orc, "lambda", lambda f, i: f + i - orc.r, 2 * orc.r)


def e0_min(orc):
    return outer_min(orc, "gamma", lambda f, i: f - max(2 * orc.r - i, 0.0) + orc.r, None)


def e_r(r, steps=200001):
    """min over V(1|1) = v of D + [I - R]_+ (V(.|0) is pinned to the channel row)."""
    v = np.linspace(0.0, 1.0, steps)
    j = np.zeros((steps, 2, 2))
    j[:, 0, 0] = 0.5
    j[:, 1, 0] = 0.5 * (1 - v)
    j[:, 1, 1] = 0.5 * v
    d = xlogy_sum(j, 0.5 * W[None])
    return float((d + np.maximum(mi(j) - r, 0.0)).min())


def bhattacharyya_zero_rate(eps=EPS):
    """E_ex(0) for Q_X = (1/2,1/2): half of the Bhattacharyya distance -ln sqrt(eps)."""
    return 2 * 0.25 * (-np.log(np.sqrt(eps)))


_ORACLES: dict = {}


def get_oracle(r: float, with_lambda: bool = False) -> Oracle:
    """Session-wide memo so several tests can share one brute-force table."""
    key = float(r)
    if key not in _ORACLES or (with_lambda and not _ORACLES[key].with_lambda):
        _ORACLES[key] = Oracle(r, with_lambda)
    return _ORACLES[key]


def lt_upper(orc: Oracle, e0: float) -> float:
    """min of [I - 2R]_+ over the outer grid points with [2R - I]_+ >= Gamma + R - e0."""
    r = orc.r
    best = np.inf
    for a in orc.a_grid:
        i = outer_mi(a)
        gam, _ = orc.values(a)
        if max(2 * r - i, 0.0) >= gam + r - e0 - TOL:
            best = min(best, max(i - 2 * r, 0.0))
    return best
