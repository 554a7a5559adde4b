"""Linear decoding metrics and the generalized likelihood decoder posterior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ExtRealError, read_matrix_text


@dataclass(frozen=True, eq=False)
class GldMetric:
    """g(Q_XY) = sum_{x,y} Q_XY(x,y) c(x,y) with coefficients in [-inf, inf).

    Cells with ``c = -inf`` rule out any joint that puts mass on them.
    """

    coef: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        c = np.array(self.coef, dtype=float)
        if c.ndim != 2:
            raise ValueError("metric coefficients must form a matrix")
        if np.isnan(c).any() or (c == np.inf).any():
            raise ValueError("metric coefficients must be finite or -inf")
        c.setflags(write=False)
        object.__setattr__(self, "coef", c)

    @classmethod
    def log_likelihood(cls, w) -> "GldMetric":
        return cls.scaled_likelihood(w, 1.0, name="ml-log")

    @classmethod
    def scaled_likelihood(cls, w, beta: float, name: str | None = None) -> "GldMetric":
        if not beta > 0:
            raise ValueError("likelihood scale must be positive")
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore"):
            c = np.where(w > 0, beta * np.log(np.where(w > 0, w, 1.0)), -np.inf)
        return cls(c, name or f"scaled:{beta:g}")

    @classmethod
    def zero(cls, shape) -> "GldMetric":
        return cls(np.zeros(shape), "zero")

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.coef)

    def __call__(self, q) -> np.ndarray | float:
        return eval_metric(self, q)

    def key(self) -> tuple:
        return (self.name, self.coef.shape, self.coef.tobytes())


def eval_metric(g: GldMetric, q) -> np.ndarray | float:
    """<q, c> over the last two axes with the convention 0 * (-inf) = 0."""
    q = np.asarray(q, dtype=float)
    c = g.coef
    terms = np.where(q > 0, q * np.where(np.isfinite(c), c, 0.0), 0.0)
    val = terms.sum(axis=(-2, -1))
    banned = ((q > 0) & ~np.isfinite(c)).any(axis=(-2, -1))
    val = np.where(banned, -np.inf, val)
    return float(val) if val.ndim == 0 else val


def sequence_scores(g: GldMetric, codewords, y) -> np.ndarray:
    """n * g(P_{x_m y}) for every codeword row, i.e. sum_t c(x_mt, y_t)."""
    cw = np.asarray(codewords, dtype=int)
    y = np.asarray(y, dtype=int)
    return g.coef[cw, y].sum(axis=-1)


def gld_posterior(scores, n: int = 1) -> np.ndarray:
    """Posterior over messages proportional to exp{n * score_m}.

    ``scores`` may carry leading batch axes; the message axis is the last one.
    A message scoring ``-inf`` gets probability exactly zero.
    """
    s = np.asarray(scores, dtype=float) * n
    if np.isnan(s).any() or (s == np.inf).any():
        raise ExtRealError("scores must be finite or -inf")
    top = s.max(axis=-1, keepdims=True)
    if (top == -np.inf).any():
        raise ValueError("posterior undefined: every message scores -inf")
    e = np.exp(s - top)
    return e / e.sum(axis=-1, keepdims=True)


def parse_metric(spec: str, w: np.ndarray) -> GldMetric:
    """Build a metric from the CLI forms ml-log, scaled:B, zero, file:PATH."""
    if spec == "ml-log":
        return GldMetric.log_likelihood(w)
    if spec == "zero":
        return GldMetric.zero(np.shape(w))
    if spec.startswith("scaled:"):
        return GldMetric.scaled_likelihood(w, float(spec.split(":", 1)[1]))
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        c = read_matrix_text(path, allow_neg_inf=True)
        if c.shape != np.shape(w):
            raise ValueError(f"metric file shape {c.shape} does not match channel {np.shape(w)}")
        return GldMetric(c, f"file:{path}")
    raise ValueError(f"unknown metric spec {spec!r}")
