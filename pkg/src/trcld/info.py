"""Information measures in nats, vectorized over leading batch axes.

Every function accepts arrays with arbitrary leading batch dimensions; the
trailing one (entropy) or two/three (joints) axes carry the alphabets.
Zero-mass cells contribute nothing; a positive mass against a zero reference
gives ``+inf``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import entr, rel_entr


def _kl_terms(q, *logs):
    """q * (ln q - sum(logs)) cellwise with 0 ln 0 = 0, in log space so tiny masses cannot underflow."""
    pos = q > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ref = sum(logs)
        t = np.where(pos, q * (np.log(np.where(pos, q, 1.0)) - ref), 0.0)
    return t


def _log(p):
    with np.errstate(divide="ignore"):
        return np.log(p)


def entropy(p) -> np.ndarray | float:
    p = np.asarray(p, dtype=float)
    h = entr(p).sum(axis=-1)
    return float(h) if h.ndim == 0 else h


def mutual_info(q) -> np.ndarray | float:
    """I(A;B) of a joint over the last two axes."""
    q = np.asarray(q, dtype=float)
    qa = q.sum(axis=-1, keepdims=True)
    qb = q.sum(axis=-2, keepdims=True)
    i = _kl_terms(q, _log(qa), _log(qb)).sum(axis=(-2, -1))
    i = np.maximum(i, 0.0)
    return float(i) if i.ndim == 0 else i


def cond_mutual_info(q) -> np.ndarray | float:
    """I(X';Y|X) of a triple joint indexed [x, x', y] on the last three axes."""
    q = np.asarray(q, dtype=float)
    qx = q.sum(axis=(-2, -1), keepdims=True)
    qxx = q.sum(axis=-1, keepdims=True)
    qxy = q.sum(axis=-2, keepdims=True)
    i = _kl_terms(q, _log(qxx), _log(qxy), -_log(qx)).sum(axis=(-3, -2, -1))
    i = np.maximum(i, 0.0)
    return float(i) if i.ndim == 0 else i


def mi_pair_vs_one(q) -> np.ndarray | float:
    """I(X,Y;X') of a triple joint indexed [x, x', y]."""
    q = np.asarray(q, dtype=float)
    # regroup as a joint of (X,Y) against X'
    pair = np.moveaxis(q, -2, -1)
    pair = pair.reshape(pair.shape[:-3] + (q.shape[-3] * q.shape[-1], q.shape[-2]))
    return mutual_info(pair)


def cond_divergence(qyx, w, qx) -> np.ndarray | float:
    """D(Q_{Y|X} || W | Q_X); ``qyx`` may carry leading batch axes."""
    qyx = np.asarray(qyx, dtype=float)
    w = np.asarray(w, dtype=float)
    qx = np.asarray(qx, dtype=float)
    per_x = rel_entr(qyx, w).sum(axis=-1)
    # rows with Q_X(x) = 0 do not count, even if they are infinite
    d = (qx * np.where(qx > 0, per_x, 0.0)).sum(axis=-1)
    return float(d) if np.ndim(d) == 0 else d


def joint_divergence(qxy, w) -> np.ndarray | float:
    """D(Q_{Y|X} || W | Q_X) written directly on the joint Q_XY."""
    qxy = np.asarray(qxy, dtype=float)
    qx = qxy.sum(axis=-1, keepdims=True)
    d = _kl_terms(qxy, _log(qx), _log(w)).sum(axis=(-2, -1))
    return float(d) if np.ndim(d) == 0 else d
