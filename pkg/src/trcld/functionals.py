"""Inner variational functionals alpha, beta, a, Gamma and Lambda.

The coupling problems behind alpha / beta / a are solved in batch over many
output distributions at once, because Gamma and Lambda need them at every
candidate conditional Q_{Y|XX'} of their own search.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import channel_matrix, in_transport_polytope, prob_vec
from .gld import GldMetric, eval_metric, parse_metric
from .info import cond_mutual_info, joint_divergence, mi_pair_vs_one, mutual_info
from .optimizer import GridSpec, TransportFamily, constrained_batch, refine_batch


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """Channel, input composition, decoding metric and search settings.

    ``grid`` drives the outer searches over Q_XX', ``mid_grid`` the
    minimizations over output conditionals and ``inner_grid`` the coupling
    problems of alpha, beta and a.
    """

    channel: np.ndarray
    qx: np.ndarray
    metric: GldMetric
    grid: GridSpec = field(default_factory=GridSpec)
    mid_grid: GridSpec = field(default_factory=GridSpec)
    inner_grid: GridSpec = field(default_factory=lambda: GridSpec(depth=6))

    def __post_init__(self):
        w = channel_matrix(self.channel, tol=1e-9)
        qx = prob_vec(self.qx, tol=1e-9)
        if w.shape[0] != qx.size:
            raise ValueError("input distribution and channel disagree on |X|")
        if self.metric.coef.shape != w.shape:
            raise ValueError("metric and channel disagree in shape")
        for arr in (w, qx):
            arr.setflags(write=False)
        object.__setattr__(self, "channel", w)
        object.__setattr__(self, "qx", qx)
        loglik = GldMetric.log_likelihood(w)
        object.__setattr__(self, "_loglik", loglik)

    @classmethod
    def create(cls, channel, qx, metric: str | GldMetric = "ml-log", **grids) -> "ModelConfig":
        w = np.asarray(channel, dtype=float)
        g = parse_metric(metric, w) if isinstance(metric, str) else metric
        return cls(w, np.asarray(qx, dtype=float), g, **grids)

    @property
    def loglik(self) -> GldMetric:
        return self._loglik

    def with_grids(self, **kw) -> "ModelConfig":
        return replace(self, **kw)

    def key(self) -> tuple:
        return (self.channel.tobytes(), self.channel.shape, self.qx.tobytes(), self.metric.key(),
                self.grid, self.mid_grid, self.inner_grid)


@dataclass
class FunctionalValue:
    value: float
    argopt: np.ndarray | None = None


# ---------------------------------------------------------------------------
# coupling problems over Q_{X~|Y} with Q_X~ = Q_X


def _coupling_setup(cfg: ModelConfig, qy):
    qy = np.atleast_2d(np.asarray(qy, dtype=float))
    uniq, inv = np.unique(qy, axis=0, return_inverse=True)
    return TransportFamily(cfg.qx, uniq), inv.reshape(-1)


def _linear_minus_mi(fam: TransportFamily, g: GldMetric, with_mi: bool):
    def objective(theta):
        j = fam.joints(theta)
        val = eval_metric(g, j)
        if with_mi:
            val = val - fam.mutual_info(j)
        return np.where(fam.feasible(j), val, -np.inf)
    return objective


def _mi_constraint(fam: TransportFamily):
    def constraint(theta):
        j = fam.joints(theta)
        return np.where(fam.feasible(j), fam.mutual_info(j), np.inf)
    return constraint


BISECT_ITERS = 64


def _cells_2x2(fam: TransportFamily, t: np.ndarray):
    p = fam.product
    return p[:, 0, 0] + t, p[:, 0, 1] - t, p[:, 1, 0] - t, p[:, 1, 1] + t


def _mi_2x2(fam: TransportFamily, t: np.ndarray) -> np.ndarray:
    h = 0.0
    for c in _cells_2x2(fam, t):
        c = np.where(c > 0, c, 1.0)
        h = h - c * np.log(c)
    return np.maximum(fam.h_marg - h, 0.0)


def _edge_2x2(fam, bound, thr):
    """Point between 0 and ``bound`` (per instance) where I first reaches ``thr``.

    I is convex along the segment and vanishes at 0, so bisection is exact.
    """
    inside = _mi_2x2(fam, bound) <= thr
    a, b = np.zeros_like(bound), bound.copy()
    for _ in range(BISECT_ITERS):
        m = 0.5 * (a + b)
        ok = _mi_2x2(fam, m) <= thr
        a = np.where(ok, m, a)
        b = np.where(ok, b, m)
    return np.where(inside, bound, a)


def _stationary_2x2(fam, delta, lo, hi):
    """Maximizer of theta * delta - I(theta) over [lo, hi].

    dI/dtheta = ln(J00 J11 / (J01 J10)) increases from -inf to +inf, so the
    stationarity equation has a unique root found by bisection.
    """
    a, b = lo.copy(), hi.copy()
    d = np.where(np.isnan(delta), 0.0, delta)
    for _ in range(BISECT_ITERS):
        m = 0.5 * (a + b)
        j00, j01, j10, j11 = _cells_2x2(fam, m)
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.log(j00 * j11) - np.log(j01 * j10) < d
        a = np.where(up, m, a)
        b = np.where(up, b, m)
    root = 0.5 * (a + b)
    root = np.where(delta == np.inf, hi, root)
    return np.where(delta == -np.inf, lo, root)


def _coupling_max_2x2(fam: TransportFamily, g: GldMetric, with_mi: bool, limit, tol: float):
    """Exact max over 2 x 2 couplings of g - [with_mi] I subject to I <= limit.

    Along the one-parameter family g is affine and I convex, so the objective
    is concave on the interval where it is finite; the constrained maximizer
    is the unconstrained one clipped to the feasible interval.  The interval
    endpoints are kept as candidates as well, which covers metrics with -inf
    cells whose finite region collapses to an endpoint.
    """
    lo, hi = fam.lo[:, 0], fam.hi[:, 0]
    if limit is None:
        t_lo, t_hi = lo, hi
    else:
        thr = limit + tol
        t_lo, t_hi = _edge_2x2(fam, lo, thr), _edge_2x2(fam, hi, thr)
    c = g.coef
    with np.errstate(invalid="ignore"):
        delta = np.full(len(lo), c[0, 0] + c[1, 1] - c[0, 1] - c[1, 0])
    cands = [t_lo, t_hi]
    if with_mi:
        cands.append(np.clip(_stationary_2x2(fam, delta, lo, hi), t_lo, t_hi))
    pts = np.stack(cands, axis=1)[:, :, None]
    j = fam.joints(pts)
    val = eval_metric(g, j)
    if with_mi:
        val = val - fam.mutual_info(j)
    ok = fam.feasible(j)
    if limit is not None:
        ok &= fam.mutual_info(j) <= limit + tol
    val = np.where(ok, val, -np.inf)
    k = np.argmax(val, axis=1)
    rows = np.arange(len(lo))
    return pts[rows, k], val[rows, k]


def _is_2x2(fam: TransportFamily) -> bool:
    return fam.a == 2 and fam.b == 2


def _alpha_like(r: float, qy, cfg: ModelConfig, g: GldMetric, with_mi: bool, exact: bool = True):
    fam, inv = _coupling_setup(cfg, qy)
    if fam.dim == 0:
        j = fam.product
        v = eval_metric(g, j) - (mutual_info(j) if with_mi else 0.0)
        return np.atleast_1d(v)[inv]
    if exact and _is_2x2(fam):
        _, v = _coupling_max_2x2(fam, g, with_mi, r, cfg.inner_grid.tol_feas)
        return v[inv]
    _, v = constrained_batch(_linear_minus_mi(fam, g, with_mi), _mi_constraint(fam), r,
                             fam.lo, fam.hi, cfg.inner_grid, anchor=fam.anchor)
    return v[inv]


def alpha_batch(r: float, qy, cfg: ModelConfig, exact: bool = True) -> np.ndarray:
    """alpha(R, Q_Y) for each row of ``qy``.

    Binary-by-binary couplings are solved exactly; ``exact=False`` forces
    the generic grid search (used for cross-checks).
    """
    return _alpha_like(r, qy, cfg, cfg.metric, True, exact) + r


def a_ml_batch(r: float, qy, cfg: ModelConfig, exact: bool = True) -> np.ndarray:
    """a(R, Q_Y): best expected log-likelihood over the alpha-feasible couplings."""
    return _alpha_like(r, qy, cfg, cfg.loglik, False, exact)


def beta_batch(r: float, qy, cfg: ModelConfig, exact: bool = True) -> np.ndarray:
    """beta(R, Q_Y) = max over couplings of g + [R - I]_+.

    g + [R - I]_+ = max(g, g + R - I), so beta is the larger of two concave
    maximizations, each solved on its own.
    """
    fam, inv = _coupling_setup(cfg, qy)
    if fam.dim == 0:
        j = fam.product
        v = eval_metric(cfg.metric, j) + max(r - mutual_info(j[0]), 0.0)
        return np.atleast_1d(v)[inv]
    if exact and _is_2x2(fam):
        tol = cfg.inner_grid.tol_feas
        _, top_g = _coupling_max_2x2(fam, cfg.metric, False, None, tol)
        _, top_h = _coupling_max_2x2(fam, cfg.metric, True, None, tol)
    else:
        _, top_g = refine_batch(_linear_minus_mi(fam, cfg.metric, False), fam.lo, fam.hi,
                                cfg.inner_grid, maximize=True, anchor=fam.anchor)
        _, top_h = refine_batch(_linear_minus_mi(fam, cfg.metric, True), fam.lo, fam.hi,
                                cfg.inner_grid, maximize=True, anchor=fam.anchor)
    return np.maximum(top_g, top_h + r)[inv]


def alpha(r: float, qy, cfg: ModelConfig) -> float:
    return float(alpha_batch(r, qy, cfg)[0])


def beta_fn(r: float, qy, cfg: ModelConfig) -> float:
    return float(beta_batch(r, qy, cfg)[0])


def a_ml(r: float, qy, cfg: ModelConfig) -> float:
    return float(a_ml_batch(r, qy, cfg)[0])


# ---------------------------------------------------------------------------
# conditionals Q_{Y|XX'} restricted to the channel support


class CondFamily:
    """Box coordinates for the output conditionals of the cells with positive mass.

    Cell ``k`` of ``weights`` (a 2-D array over (x, x') or 1-D over x) gets a
    conditional over ``supp W(.|x)``; any mass outside it makes the conditional
    divergence infinite, so those outputs are pinned to zero.  Each conditional
    with support size s uses s - 1 coordinates in [0, 1]; the first supported
    output takes the remainder and the point is infeasible if that is negative.
    """

    def __init__(self, weights: np.ndarray, w: np.ndarray):
        self.weights = np.asarray(weights, dtype=float)
        self.w = w
        self.cells = [idx for idx in np.ndindex(self.weights.shape) if self.weights[idx] > 0]
        self.supports = [np.flatnonzero(w[idx[0]] > 0) for idx in self.cells]
        self.slices = []
        start = 0
        for s in self.supports:
            self.slices.append(slice(start, start + len(s) - 1))
            start += len(s) - 1
        self.dim = start
        # cells without mass carry the channel row so every output is defined
        base = np.broadcast_to(w.reshape((w.shape[0],) + (1,) * (self.weights.ndim - 1) + (w.shape[1],)),
                               self.weights.shape + (w.shape[1],))
        self.base = np.array(base)
        for idx in self.cells:
            self.base[idx] = 0.0

    @property
    def lo(self):
        return np.zeros(self.dim)

    @property
    def hi(self):
        return np.ones(self.dim)

    def conds(self, u: np.ndarray) -> np.ndarray:
        """u (P, d) -> conditionals (P, *weights.shape, |Y|)."""
        P = u.shape[0]
        v = np.broadcast_to(self.base, (P,) + self.base.shape).copy()
        for idx, supp, sl in zip(self.cells, self.supports, self.slices):
            free = u[:, sl]
            sel = (slice(None),) + idx
            v[sel + (supp[0],)] = 1.0 - free.sum(axis=1)
            if len(supp) > 1:
                v[sel + (supp[1:],)] = free
        return np.where(np.abs(v) < 1e-15, 0.0, v)

    def point_of(self, cond: np.ndarray) -> np.ndarray:
        u = np.empty(self.dim)
        for idx, supp, sl in zip(self.cells, self.supports, self.slices):
            u[sl] = cond[idx][supp[1:]]
        return u


def _clip_term(top, g_other):
    """[top - g_other]_+ with the infeasibility rule for -inf on both sides."""
    with np.errstate(invalid="ignore"):
        diff = top - g_other
    out = np.where(diff > 0, diff, 0.0)
    return np.where(g_other == -np.inf, np.inf, out)


def _triple_pieces(qxx, conds, w):
    t = qxx[None, :, :, None] * conds
    qxy = t.sum(axis=2)
    qxpy = t.sum(axis=1)
    qy = t.sum(axis=(1, 2))
    return t, qxy, qxpy, qy


def gamma_objective(qxx, conds, r: float, cfg: ModelConfig) -> np.ndarray:
    """Gamma's objective at a batch of conditionals (P, a, a, |Y|)."""
    t, qxy, qxpy, qy = _triple_pieces(qxx, conds, cfg.channel)
    feasible = (conds >= 0).all(axis=(1, 2, 3))
    d = joint_divergence(qxy, cfg.channel)
    icond = cond_mutual_info(t)
    gxy = eval_metric(cfg.metric, qxy)
    gxpy = eval_metric(cfg.metric, qxpy)
    al = alpha_batch(r, np.where(qy > 0, qy, 0.0), cfg)
    val = d + icond + _clip_term(np.maximum(gxy, al), gxpy)
    return np.where(feasible, val, np.inf)


def lambda_objective(qxx, conds, r: float, cfg: ModelConfig) -> np.ndarray:
    """Lambda's objective at a batch of conditionals (P, a, a, |Y|)."""
    t, qxy, qxpy, qy = _triple_pieces(qxx, conds, cfg.channel)
    feasible = (conds >= 0).all(axis=(1, 2, 3))
    d = joint_divergence(qxy, cfg.channel)
    icond = cond_mutual_info(t)
    gxpy = eval_metric(cfg.metric, qxpy)
    be = beta_batch(r, np.where(qy > 0, qy, 0.0), cfg)
    val = d + icond + _clip_term(be, gxpy)
    # beta >= g(Q_X'Y) always holds, so the clip never binds when both are finite
    return np.where(feasible, val, np.inf)


def _check_qxx(qxx, cfg):
    qxx = np.asarray(qxx, dtype=float)
    if qxx.shape != (cfg.qx.size, cfg.qx.size):
        raise ValueError(f"Q_XX' must be a {cfg.qx.size} x {cfg.qx.size} matrix")
    if not in_transport_polytope(qxx, cfg.qx):
        raise ValueError("Q_XX' must have both marginals equal to Q_X")
    return np.where(qxx > 0, qxx, 0.0)


def _min_over_conds(qxx, r, cfg, objective) -> FunctionalValue:
    fam = CondFamily(qxx, cfg.channel)

    def batch(u):
        return objective(qxx, fam.conds(u[0]), r, cfg)[None]

    if fam.dim == 0:
        conds = fam.conds(np.zeros((1, 0)))
        return FunctionalValue(float(objective(qxx, conds, r, cfg)[0]), conds[0])
    # the channel itself, V(y|x,x') = W(y|x), seeds the search
    anchor = fam.point_of(np.broadcast_to(cfg.channel[:, None, :], qxx.shape + cfg.channel.shape[1:]))
    x, v = refine_batch(batch, fam.lo[None], fam.hi[None], cfg.mid_grid, anchor=anchor[None])
    return FunctionalValue(float(v[0]), fam.conds(x)[0])


def gamma_fn(qxx, r: float, cfg: ModelConfig) -> FunctionalValue:
    """Gamma(Q_XX', R) with its minimizing Q_{Y|XX'} (indexed [x, x', y])."""
    return _min_over_conds(_check_qxx(qxx, cfg), r, cfg, gamma_objective)


def lambda_fn(qxx, r: float, cfg: ModelConfig) -> FunctionalValue:
    """Lambda(Q_XX', R) with its minimizing Q_{Y|XX'}."""
    return _min_over_conds(_check_qxx(qxx, cfg), r, cfg, lambda_objective)


def evaluate_witness(kind: str, qxx, cond, r: float, cfg: ModelConfig) -> float:
    """Re-evaluate Gamma's or Lambda's objective at a stored conditional."""
    fn = {"gamma": gamma_objective, "lambda": lambda_objective}[kind]
    return float(fn(_check_qxx(qxx, cfg), np.asarray(cond, dtype=float)[None], r, cfg)[0])


def trc_ml_objective(qxx, conds, r: float, cfg: ModelConfig) -> np.ndarray:
    """D + I(X,Y;X') - R over the ML-feasible conditionals, +inf elsewhere."""
    t, qxy, qxpy, qy = _triple_pieces(qxx, conds, cfg.channel)
    feasible = (conds >= 0).all(axis=(1, 2, 3))
    d = joint_divergence(qxy, cfg.channel)
    ll_true = eval_metric(cfg.loglik, qxy)
    ll_other = eval_metric(cfg.loglik, qxpy)
    a = a_ml_batch(r, np.where(qy > 0, qy, 0.0), cfg)
    tol = cfg.mid_grid.tol_feas
    ok = feasible & (ll_other > -np.inf) & (ll_other >= np.maximum(ll_true, a) - tol)
    return np.where(ok, d + mi_pair_vs_one(t) - r, np.inf)


def trc_ml_inner(qxx, r: float, cfg: ModelConfig) -> FunctionalValue:
    return _min_over_conds(_check_qxx(qxx, cfg), r, cfg, trc_ml_objective)
