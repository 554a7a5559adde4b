"""Finite-alphabet probability objects and method-of-types helpers.

Distributions are plain numpy arrays.  The validators below check the
invariants once at the boundary so that the numerical kernels can work on
raw arrays without re-checking.  Extended reals are ordinary floats with
``+inf``/``-inf``; the helpers here pin down the conventions that numpy
does not give for free (``0 * inf = 0``, ``inf - inf`` is an error).
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

NORM_TOL = 1e-12
MARGINAL_TOL = 1e-9
# entries this small are produced by cancellation on a polytope face
SNAP_TOL = 1e-14

INF = math.inf


class ExtRealError(ArithmeticError):
    """Raised for undefined extended-real operations such as inf + (-inf)."""


class DistributionError(ValueError):
    """Raised when an array violates a probability invariant."""


# ---------------------------------------------------------------------------
# extended reals


def xadd(a: float, b: float) -> float:
    if (a == INF and b == -INF) or (a == -INF and b == INF):
        raise ExtRealError("inf + (-inf) is undefined")
    return a + b


def xmul(a: float, b: float) -> float:
    """Product with the measure-theoretic convention 0 * (+-inf) = 0."""
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def pos(t):
    """[t]_+ = max(0, t); works on scalars and arrays, keeps +inf."""
    if np.ndim(t) == 0:
        return max(0.0, float(t))
    return np.maximum(t, 0.0)


def check_no_nan(arr: np.ndarray, what: str) -> np.ndarray:
    if np.isnan(arr).any():
        raise ExtRealError(f"undefined extended-real value in {what}")
    return arr


# ---------------------------------------------------------------------------
# validated constructors


def prob_vec(p: Sequence[float], tol: float = NORM_TOL) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DistributionError("probability vector must be a non-empty 1-D array")
    if (arr < 0).any():
        raise DistributionError("probability vector has a negative entry")
    if abs(arr.sum() - 1.0) > tol:
        raise DistributionError(f"probability vector sums to {arr.sum()!r}, not 1")
    return arr


def channel_matrix(w, tol: float = NORM_TOL) -> np.ndarray:
    """Validate a row-stochastic |X| x |Y| matrix W(y|x)."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DistributionError("channel must be a 2-D matrix")
    if (arr < 0).any():
        raise DistributionError("channel has a negative transition probability")
    bad = np.abs(arr.sum(axis=1) - 1.0) > tol
    if bad.any():
        raise DistributionError(f"channel rows {np.flatnonzero(bad).tolist()} do not sum to 1")
    return arr


def joint(q, tol: float = NORM_TOL) -> np.ndarray:
    arr = np.asarray(q, dtype=float)
    if (arr < 0).any():
        raise DistributionError("joint distribution has a negative entry")
    if abs(arr.sum() - 1.0) > tol:
        raise DistributionError(f"joint distribution sums to {arr.sum()!r}, not 1")
    return arr


def conditional(v, axis: int = -1, tol: float = NORM_TOL) -> np.ndarray:
    """Validate a conditional array normalized along ``axis``."""
    arr = np.asarray(v, dtype=float)
    if (arr < 0).any():
        raise DistributionError("conditional distribution has a negative entry")
    if (np.abs(arr.sum(axis=axis) - 1.0) > tol).any():
        raise DistributionError("conditional distribution is not normalized")
    return arr


def in_transport_polytope(qxx: np.ndarray, qx: np.ndarray, tol: float = MARGINAL_TOL) -> bool:
    """Membership of Q_XX' in the set of joints with both marginals equal to Q_X."""
    qxx = np.asarray(qxx, dtype=float)
    return bool(
        (qxx >= -tol).all()
        and np.allclose(qxx.sum(axis=1), qx, atol=tol, rtol=0)
        and np.allclose(qxx.sum(axis=0), qx, atol=tol, rtol=0)
    )


def snap(arr: np.ndarray) -> np.ndarray:
    """Zero out cancellation noise so that polytope faces are hit exactly."""
    return np.where(np.abs(arr) < SNAP_TOL, 0.0, arr)


# ---------------------------------------------------------------------------
# method of types


def empirical_joint(seq_x, seq_y, nx: int = 2, ny: int = 2) -> np.ndarray:
    """Joint empirical distribution of a pair of equal-length sequences."""
    sx = np.asarray(seq_x, dtype=int)
    sy = np.asarray(seq_y, dtype=int)
    if sx.ndim != 1 or sx.shape != sy.shape:
        raise ValueError("sequences must be 1-D and of equal length")
    if sx.size == 0:
        raise ValueError("sequences must be non-empty")
    if sx.min() < 0 or sx.max() >= nx or sy.min() < 0 or sy.max() >= ny:
        raise ValueError("symbol outside the alphabet")
    counts = np.zeros((nx, ny))
    np.add.at(counts, (sx, sy), 1.0)
    return counts / sx.size


def composition(qx: Sequence[float], n: int) -> list[int]:
    """Integer symbol counts n * Q_X; raises if Q_X is not an n-type."""
    counts = []
    for p in qx:
        c = n * float(p)
        k = round(c)
        if abs(c - k) > 1e-9:
            raise ValueError(f"n * Q_X = {c!r} is not integral at n = {n}")
        counts.append(int(k))
    if sum(counts) != n:
        raise ValueError("composition does not sum to n")
    return counts


def type_class_size(qx: Sequence[float], n: int) -> int:
    """|T(Q_X)| = n! / prod_x (n Q_X(x))!"""
    size = math.factorial(n)
    for k in composition(qx, n):
        size //= math.factorial(k)
    return size


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All nonnegative integer vectors of length ``parts`` summing to n, lexicographic."""
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def enumerate_rational_joint_types(n: int, shape: tuple[int, int] = (2, 2)) -> list[np.ndarray]:
    """Every joint type with denominator n on an ``shape`` alphabet pair."""
    if n < 1:
        raise ValueError("block length must be positive")
    cells = shape[0] * shape[1]
    return [np.array(c, dtype=float).reshape(shape) / n for c in _compositions(n, cells)]


def count_types(n: int, cells: int) -> int:
    return math.comb(n + cells - 1, cells - 1)


def marginalize(q: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    """Sum out every axis not listed in ``keep`` (order of ``keep`` is preserved)."""
    q = np.asarray(q, dtype=float)
    drop = tuple(ax for ax in range(q.ndim) if ax not in keep)
    out = q.sum(axis=drop)
    kept_sorted = sorted(keep)
    if list(keep) != kept_sorted:
        out = np.transpose(out, [kept_sorted.index(k) for k in keep])
    return out / out.sum()


def _multiset_perms(counts: list[int], n: int) -> Iterator[tuple[int, ...]]:
    if n == 0:
        yield ()
        return
    for sym, k in enumerate(counts):
        if k:
            counts[sym] -= 1
            for rest in _multiset_perms(counts, n - 1):
                yield (sym,) + rest
            counts[sym] += 1


def sequences_of_type(qx: Sequence[float], n: int) -> np.ndarray:
    """All members of T(Q_X) as rows, in lexicographic order."""
    counts = composition(qx, n)
    rows = list(_multiset_perms(list(counts), n))
    return np.array(rows, dtype=int).reshape(len(rows), n)


# ---------------------------------------------------------------------------
# matrix text files


def read_matrix_text(path, allow_neg_inf: bool = False) -> np.ndarray:
    """Read the ``rows cols`` header + whitespace matrix format ('#' comments)."""
    lines = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    try:
        rows, cols = (int(tok) for tok in lines[0].split())
    except ValueError as exc:
        raise ValueError(f"{path}: bad header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != rows:
        raise ValueError(f"{path}: expected {rows} rows, found {len(body)}")
    data = []
    for i, line in enumerate(body):
        toks = line.split()
        if len(toks) != cols:
            raise ValueError(f"{path}: row {i} has {len(toks)} entries, expected {cols}")
        vals = [float(t) for t in toks]
        if any(math.isnan(v) or v == INF for v in vals):
            raise ValueError(f"{path}: row {i} contains nan or +inf")
        if not allow_neg_inf and any(v == -INF for v in vals):
            raise ValueError(f"{path}: row {i} contains -inf")
        data.append(vals)
    return np.array(data, dtype=float)


def read_channel(path) -> np.ndarray:
    return channel_matrix(read_matrix_text(path), tol=1e-9)


def format_matrix_text(m: np.ndarray) -> str:
    m = np.asarray(m, dtype=float)
    out = [f"{m.shape[0]} {m.shape[1]}"]
    for row in m:
        out.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


def z_channel(crossover: float = 0.001) -> np.ndarray:
    """Binary z-channel: 0 is received noiselessly, 1 flips to 0 w.p. ``crossover``."""
    return np.array([[1.0, 0.0], [crossover, 1.0 - crossover]])


def bsc(crossover: float) -> np.ndarray:
    return np.array([[1.0 - crossover, crossover], [crossover, 1.0 - crossover]])
