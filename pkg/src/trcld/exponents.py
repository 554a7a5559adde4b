"""Error exponents of constant-composition codes and the tail rate functions.

Everything at a fixed rate R is organised around a :class:`Landscape`: the
outer search space Q(Q_X) together with memoized values of Gamma and Lambda
on it.  The curve exponents (TRC, expurgated, E-tilde, E_0^min) are refined
minimizations over that space; the tail exponents are read off a dense
sampled profile that always contains the refined minimizers, so that their
phase-transition thresholds agree with the curve exponents.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .core import in_transport_polytope
from .functionals import (CondFamily, FunctionalValue, ModelConfig, gamma_fn, lambda_fn,
                          trc_ml_inner)
from .info import joint_divergence, mutual_info
from .optimizer import TransportFamily, constrained_batch, refine_batch, unit_grid

INF = math.inf


@dataclass
class ExponentResult:
    value: float
    witness: dict = field(default_factory=dict)
    feasible: bool = True

    def __float__(self):
        return float(self.value)


@dataclass
class ExponentCurve:
    grid: np.ndarray
    values: list

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if (np.diff(self.grid) <= 0).any():
            raise ValueError("curve abscissae must be strictly increasing")

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])


def _key(q: np.ndarray) -> bytes:
    return np.ascontiguousarray(q).tobytes()


class Landscape:
    """Gamma / Lambda over Q(Q_X) at one rate, memoized by coupling."""

    def __init__(self, r: float, cfg: ModelConfig):
        if r < 0:
            raise ValueError("rate must be nonnegative")
        self.r = float(r)
        self.cfg = cfg
        self.family = TransportFamily(cfg.qx, cfg.qx)
        self._gamma: dict[bytes, FunctionalValue] = {}
        self._lambda: dict[bytes, FunctionalValue] = {}
        self._results: dict[str, ExponentResult] = {}
        self._profile = None

    # -- memoized functionals ------------------------------------------------
    def gamma(self, q) -> FunctionalValue:
        k = _key(q)
        if k not in self._gamma:
            self._gamma[k] = gamma_fn(q, self.r, self.cfg)
        return self._gamma[k]

    def lam(self, q) -> FunctionalValue:
        k = _key(q)
        if k not in self._lambda:
            self._lambda[k] = lambda_fn(q, self.r, self.cfg)
        return self._lambda[k]

    def joints(self, theta: np.ndarray) -> np.ndarray:
        return self.family.joints(np.asarray(theta, dtype=float).reshape(1, -1, self.family.dim))[0]

    def _values(self, theta, kind: str) -> np.ndarray:
        """theta (1,P,d) -> functional values (1,P); +inf outside the polytope."""
        qs = self.family.joints(theta)[0]
        fn = self.gamma if kind == "gamma" else self.lam
        out = np.full(len(qs), INF)
        for i, q in enumerate(qs):
            if (q >= 0).all():
                out[i] = fn(q).value
        return out[None]

    def _mi_theta(self, theta) -> np.ndarray:
        qs = self.family.joints(theta)
        return np.where(self.family.feasible(qs), self.family.mutual_info(qs), INF)

    # -- refined minimizations ----------------------------------------------
    def _minimize(self, name: str, kind: str, objective, limit: float | None) -> ExponentResult:
        """min over Q(Q_X) of objective(F(q), I(q)) with I(q) <= limit (None: no limit)."""
        if name in self._results:
            return self._results[name]
        fam, spec = self.family, self.cfg.grid

        def obj(theta):
            vals = self._values(theta, kind)
            with np.errstate(invalid="ignore"):
                out = objective(vals, self._mi_theta(theta))
            return np.where(np.isnan(out), INF, out)

        if fam.dim == 0:
            x = np.zeros((1, 0))
            v = obj(x[:, None, :])[0]
        elif limit is None:
            x, v = refine_batch(obj, fam.lo, fam.hi, spec, anchor=fam.anchor)
        else:
            x, v = constrained_batch(obj, self._mi_theta, limit, fam.lo, fam.hi, spec,
                                     anchor=fam.anchor, maximize=False)
        q = self.joints(x[0])[0]
        fv = self.gamma(q) if kind == "gamma" else self.lam(q)
        res = ExponentResult(float(v[0]), {"qxx": q, "cond": fv.argopt, "theta": x[0]})
        self._results[name] = res
        return res

    def e_trc(self) -> ExponentResult:
        r = self.r
        return self._minimize("trc", "gamma", lambda f, i: f + i - r, 2 * r)

    def e_ex(self) -> ExponentResult:
        r = self.r
        return self._minimize("ex", "gamma", lambda f, i: f + i - r, r)

    def e_tilde(self) -> ExponentResult:
        r = self.r
        return self._minimize("tilde", "lambda", lambda f, i: f + i - r, 2 * r)

    def e0_min(self) -> ExponentResult:
        r = self.r
        return self._minimize("e0min", "gamma", lambda f, i: f - np.maximum(2 * r - i, 0.0) + r, None)

    # -- sampled profile for the tail exponents -------------------------------
    def profile(self, density: int = 8):
        """Dense samples (I, Gamma, Lambda) over Q(Q_X), including all refined witnesses."""
        if self._profile is not None:
            return self._profile
        fam = self.family
        witnesses = [self.e_trc(), self.e_ex(), self.e_tilde(), self.e0_min()]
        if fam.dim == 0:
            thetas = np.zeros((1, 0))
        else:
            per_axis = (self.cfg.grid.points_per_axis(fam.dim) - 1) * density + 1
            if fam.dim > 1:
                per_axis = self.cfg.grid.points_per_axis(fam.dim)
            base = unit_grid(fam.dim, per_axis)
            thetas = (1 - base) * fam.lo[0] + base * fam.hi[0]
            thetas = np.vstack([thetas] + [w.witness["theta"][None] for w in witnesses])
        qs = self.family.joints(thetas[None])[0]
        keep = self.family.feasible(qs[None])[0]
        qs, thetas = qs[keep], thetas[keep]
        # same I as the refined searches' constraint, so thresholds agree exactly
        mi = self.family.mutual_info(qs[None])[0]
        gam = np.array([self.gamma(q).value for q in qs])
        lam = np.array([self.lam(q).value for q in qs])
        self._profile = {"theta": thetas, "qxx": qs, "mi": np.atleast_1d(mi), "gamma": gam, "lambda": lam}
        self._polish()
        return self._profile

    def _polish(self):
        """Let profile samples improve the refined minima (keeps thresholds consistent)."""
        p, r = self._profile, self.r
        cands = {
            "trc": (p["gamma"] + p["mi"] - r, p["mi"] <= 2 * r + self.cfg.grid.tol_feas),
            "ex": (p["gamma"] + p["mi"] - r, p["mi"] <= r + self.cfg.grid.tol_feas),
            "tilde": (p["lambda"] + p["mi"] - r, p["mi"] <= 2 * r + self.cfg.grid.tol_feas),
            "e0min": (p["gamma"] - np.maximum(2 * r - p["mi"], 0.0) + r, np.ones(len(p["mi"]), bool)),
        }
        for name, (vals, ok) in cands.items():
            vals = np.where(ok, vals, INF)
            i = int(np.argmin(vals))
            res = self._results[name]
            if vals[i] < res.value:
                q = p["qxx"][i]
                kind = "lambda" if name == "tilde" else "gamma"
                fv = self.gamma(q) if kind == "gamma" else self.lam(q)
                self._results[name] = ExponentResult(float(vals[i]),
                                                     {"qxx": q, "cond": fv.argopt, "theta": p["theta"][i]})


_CACHE: "OrderedDict[tuple, Landscape]" = OrderedDict()
_CACHE_SIZE = 64


def landscape(r: float, cfg: ModelConfig) -> Landscape:
    key = (float(r), cfg.key())
    if key in _CACHE:
        _CACHE.move_to_end(key)
        return _CACHE[key]
    land = Landscape(r, cfg)
    _CACHE[key] = land
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return land


def clear_cache():
    _CACHE.clear()


# ---------------------------------------------------------------------------
# curve exponents


def random_coding_exponent(r: float, cfg: ModelConfig) -> ExponentResult:
    """min over Q_{Y|X} of D(Q_{Y|X}||W|Q_X) + [I_Q(X;Y) - R]_+ (ML decoding)."""
    if r < 0:
        raise ValueError("rate must be nonnegative")
    w, qx = cfg.channel, cfg.qx
    fam = CondFamily(qx, w)

    def obj(u):
        v = fam.conds(u[0])
        qxy = qx[None, :, None] * v
        val = joint_divergence(qxy, w) + np.maximum(mutual_info(qxy) - r, 0.0)
        return np.where((v >= 0).all(axis=(1, 2)), val, INF)[None]

    if fam.dim == 0:
        u = np.zeros((1, 0))
        val = obj(u[None])[0]
    else:
        u, val = refine_batch(obj, fam.lo[None], fam.hi[None], cfg.mid_grid,
                              anchor=fam.point_of(np.broadcast_to(w, (len(qx),) + w.shape[1:]))[None])
        # the objective is smooth away from the kink, so a local polish removes the grid error
        if np.isfinite(val[0]):
            res = minimize(lambda p: float(obj(p[None, None])[0, 0]), u[0], method="Powell",
                           bounds=list(zip(fam.lo, fam.hi)), options={"xtol": 1e-12, "ftol": 1e-15})
            if res.fun < val[0]:
                u, val = res.x[None], np.array([res.fun])
    # D and [I - R]_+ are nonnegative; clip roundoff below zero
    return ExponentResult(max(float(val[0]), 0.0), {"cond": fam.conds(u)[0]})


def trc_exponent(r: float, cfg: ModelConfig) -> ExponentResult:
    return landscape(r, cfg).e_trc()


def expurgated_exponent(r: float, cfg: ModelConfig) -> ExponentResult:
    return landscape(r, cfg).e_ex()


def e_tilde(r: float, cfg: ModelConfig) -> ExponentResult:
    return landscape(r, cfg).e_tilde()


def e0_min(r: float, cfg: ModelConfig) -> ExponentResult:
    return landscape(r, cfg).e0_min()


def exponent_curve(fn, rates, cfg: ModelConfig) -> ExponentCurve:
    """Evaluate an exponent function at every rate of a strictly increasing grid."""
    rates = np.asarray(rates, dtype=float)
    return ExponentCurve(rates, [fn(float(r), cfg) for r in rates])


def trc_exponent_ml(r: float, cfg: ModelConfig) -> ExponentResult:
    """TRC exponent through the ML particularization: min over the set A(R)."""
    if r < 0:
        raise ValueError("rate must be nonnegative")
    fam = TransportFamily(cfg.qx, cfg.qx)
    memo: dict[bytes, FunctionalValue] = {}

    def inner(q):
        k = _key(q)
        if k not in memo:
            memo[k] = trc_ml_inner(q, r, cfg)
        return memo[k]

    def obj(theta):
        qs = fam.joints(theta)[0]
        out = np.full(len(qs), INF)
        for i, q in enumerate(qs):
            if (q >= 0).all():
                out[i] = inner(q).value
        return out[None]

    def con(theta):
        qs = fam.joints(theta)
        return np.where(fam.feasible(qs), fam.mutual_info(qs), INF)

    if fam.dim == 0:
        q = fam.product[0]
        fv = inner(q)
        return ExponentResult(fv.value, {"qxx": q, "cond": fv.argopt}, fv.value < INF)
    x, v = constrained_batch(obj, con, 2 * r, fam.lo, fam.hi, cfg.grid, anchor=fam.anchor,
                             maximize=False)
    q = fam.joints(x[None])[0, 0]
    return ExponentResult(float(v[0]), {"qxx": q, "cond": inner(q).argopt}, bool(v[0] < INF))


# ---------------------------------------------------------------------------
# tail exponents


def _slack(cfg: ModelConfig) -> float:
    return cfg.grid.tol_feas


def lt_upper(r: float, e0: float, cfg: ModelConfig) -> ExponentResult:
    """Lower-tail exponent upper bound: min over L(R,E0) of [I - 2R]_+."""
    return _lower_tail(r, e0, cfg, "gamma")


def lt_lower(r: float, e0: float, cfg: ModelConfig) -> ExponentResult:
    """Lower-tail exponent lower bound: min over M(R,E0) of [I - 2R]_+."""
    return _lower_tail(r, e0, cfg, "lambda")


def _lower_tail(r, e0, cfg, kind):
    p = landscape(r, cfg).profile()
    f = p[kind]
    with np.errstate(invalid="ignore"):
        psi = f + r - e0
    member = np.maximum(2 * r - p["mi"], 0.0) >= psi - _slack(cfg)
    if not member.any():
        return ExponentResult(INF, {}, feasible=False)
    # I within the feasibility slack of 2R counts as I <= 2R
    vals = np.where(member, np.maximum(p["mi"] - 2 * r - _slack(cfg), 0.0), INF)
    i = int(np.argmin(vals))
    return ExponentResult(float(vals[i]), {"qxx": p["qxx"][i]})


def ut_upper(r: float, e0: float, cfg: ModelConfig) -> ExponentResult:
    """Upper-tail double-exponential rate, upper bound: max over V(R,E0)."""
    p = landscape(r, cfg).profile()
    tol = _slack(cfg)
    mi, lam = p["mi"], p["lambda"]
    member = (mi <= 2 * r + tol) & (lam + mi - r <= e0 + tol)
    if not member.any():
        return ExponentResult(0.0, {}, feasible=False)
    with np.errstate(invalid="ignore"):
        vals = np.minimum(np.minimum(2 * r - mi, e0 - lam - mi + r), r)
    vals = np.where(member, np.maximum(vals, 0.0), -INF)
    i = int(np.argmax(vals))
    return ExponentResult(float(vals[i]), {"qxx": p["qxx"][i]})


def ut_lower(r: float, e0: float, cfg: ModelConfig) -> ExponentResult:
    """Upper-tail double-exponential rate, lower bound: max over U(R,E0) of 2R - I.

    The bound is only claimed on (E_trc(R), E_ex(R)); ``witness['in_window']``
    reports whether ``e0`` lies there.
    """
    land = landscape(r, cfg)
    p = land.profile()
    tol = _slack(cfg)
    mi, gam = p["mi"], p["gamma"]
    member = (mi <= 2 * r + tol) & (gam + mi - r <= e0 + tol)
    window = land.e_trc().value < e0 < land.e_ex().value
    if not member.any():
        return ExponentResult(0.0, {"in_window": window}, feasible=False)
    vals = np.where(member, np.maximum(2 * r - mi, 0.0), -INF)
    i = int(np.argmax(vals))
    return ExponentResult(float(vals[i]), {"qxx": p["qxx"][i], "in_window": window})


def ut_saturation_threshold(r: float, cfg: ModelConfig, tol: float = 1e-6) -> float:
    """Smallest E0 at which the upper-tail upper bound reaches its cap R (bisection)."""
    lo, hi = e_tilde(r, cfg).value, e_tilde(r, cfg).value + 1.0
    while ut_upper(r, hi, cfg).value < r - 1e-12:
        lo, hi = hi, hi + 1.0
        if hi > 100:
            return INF
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ut_upper(r, mid, cfg).value >= r - 1e-12:
            hi = mid
        else:
            lo = mid
    return hi


def enumerator_ld_rate(r: float, qxx, s: float, qx=None) -> float:
    """Exponential rate of P{N(Q_XX') >= e^{ns}}: [I - 2R]_+ or +inf."""
    qxx = np.asarray(qxx, dtype=float)
    if qx is not None and not in_transport_polytope(qxx, qx):
        raise ValueError("Q_XX' must have both marginals equal to Q_X")
    i = mutual_info(qxx)
    if max(2 * r - i, 0.0) >= s:
        return max(i - 2 * r, 0.0)
    return INF


def moment_envelope(s: float, q, j: int) -> float:
    """Per-letter log of the k-th moment envelope: j (S - I) if I < S, else S - I."""
    if j < 1:
        raise ValueError("moment order must be a positive integer")
    i = mutual_info(np.asarray(q, dtype=float))
    return j * (s - i) if i < s else s - i
