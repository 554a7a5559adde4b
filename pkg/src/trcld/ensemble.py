"""Desk-scale random-coding experiments for constant-composition ensembles.

Codebooks are drawn uniformly from a type class, error probabilities of the
GLD are computed exactly by enumerating every output sequence, and the
type-class enumerators N(Q_XX') are counted, simulated and (for tiny
parameters) enumerated exhaustively with rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.stats import norm

from .core import composition, enumerate_rational_joint_types, sequences_of_type
from .functionals import ModelConfig
from .gld import GldMetric, sequence_scores

PE_BUDGET = 10**8
ENUM_BUDGET = 10**7
# output sequences processed per block in exact_error_prob
Y_BLOCK = 4096


class BudgetExceeded(RuntimeError):
    def __init__(self, what: str, terms: int, budget: int):
        super().__init__(f"{what} needs {terms} terms, budget is {budget}")
        self.terms = terms
        self.budget = budget


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (master seed, trial index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


@dataclass
class Codebook:
    n: int
    codewords: np.ndarray
    qx: np.ndarray = None

    def __post_init__(self):
        cw = np.asarray(self.codewords, dtype=int)
        if cw.ndim != 2 or cw.shape[1] != self.n:
            raise ValueError("codewords must form an (M, n) array")
        self.codewords = cw
        if self.qx is not None:
            self.qx = np.asarray(self.qx, dtype=float)
            counts = composition(self.qx, self.n)
            for x, k in enumerate(counts):
                if not ((cw == x).sum(axis=1) == k).all():
                    raise ValueError("codeword outside the type class")

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @property
    def rate(self) -> float:
        return math.log(self.size) / self.n


def sample_codebook(n: int, m: int, qx, seed: int, trial: int = 0) -> Codebook:
    """M independent uniform draws from T(Q_X) (random permutations of the composition)."""
    if m < 1:
        raise ValueError("codebook needs at least one codeword")
    counts = composition(qx, n)
    base = np.repeat(np.arange(len(counts)), counts)
    rng = trial_rng(seed, trial)
    cw = rng.permuted(np.tile(base, (m, 1)), axis=1)
    return Codebook(n, cw, np.asarray(qx, dtype=float))


def _output_block(ny: int, n: int, start: int, stop: int) -> np.ndarray:
    """Rows start..stop-1 of the lexicographic list of all ny-ary sequences."""
    idx = np.arange(start, stop)
    digits = np.empty((len(idx), n), dtype=int)
    for t in range(n - 1, -1, -1):
        digits[:, t] = idx % ny
        idx //= ny
    return digits


def exact_error_prob(cb: Codebook, w, g: GldMetric, budget: int = PE_BUDGET) -> float:
    """Exact GLD error probability by summing over every y in Y^n."""
    w = np.asarray(w, dtype=float)
    cw = cb.codewords
    m, n = cw.shape
    ny = w.shape[1]
    total = ny ** n
    if total * m * m > budget:
        raise BudgetExceeded("exact error probability", total * m * m, budget)
    if m == 1:
        return 0.0
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    off = ~np.eye(m, dtype=bool)
    pe = 0.0
    for start in range(0, total, Y_BLOCK):
        ys = _output_block(ny, n, start, min(start + Y_BLOCK, total))
        lik = np.exp(logw[cw[:, None, :], ys[None]].sum(axis=-1))      # (M, Y)
        scores = g.coef[cw[:, None, :], ys[None]].sum(axis=-1)          # (M, Y)
        live = lik.sum(axis=0) > 0
        if not live.any():
            continue
        s, lik = scores[:, live], lik[:, live]
        top = s.max(axis=0)
        if (top == -np.inf).any():
            raise ValueError("GLD posterior undefined: every codeword scores -inf on a reachable output")
        e = np.exp(s - top)
        denom = e.sum(axis=0)
        # wrong-message mass sum_{m' != m} e_m' computed directly, without 1 - posterior
        wrong = (off[:, :, None] * e[None]).sum(axis=1) / denom
        pe += float((lik * wrong).sum())
    return min(max(pe / m, 0.0), 1.0)


def pair_enumerator(cb: Codebook, qxx, nx: int = 2) -> int:
    """N(Q_XX'): ordered pairs m != m' whose joint empirical type is ``qxx``."""
    target = np.rint(np.asarray(qxx, dtype=float) * cb.n).astype(int)
    if not np.allclose(target, np.asarray(qxx) * cb.n, atol=1e-9):
        raise ValueError("joint type must have denominator n")
    cw = cb.codewords
    count = 0
    for a in range(cb.size):
        for b in range(cb.size):
            if a != b and (_pair_counts(cw[a], cw[b], nx) == target).all():
                count += 1
    return count


def _pair_counts(xa, xb, nx: int) -> np.ndarray:
    c = np.zeros((nx, nx), dtype=int)
    np.add.at(c, (xa, xb), 1)
    return c


@dataclass
class EnumeratorReport:
    """Type-class enumerators of one codebook (and optionally one output y).

    ``pair_counts`` maps each joint type (as an integer count matrix in
    bytes-free tuple form) to N(Q_XX'); ``output_counts`` maps joint types of
    (x_m, y) to N_y(Q_XY); ``z`` holds Z_m(y) = sum_{m~ != m} exp{n g(P_{x_m~ y})}.
    """

    n: int
    m: int
    pair_counts: dict = field(default_factory=dict)
    output_counts: dict = field(default_factory=dict)
    z: np.ndarray | None = None

    def rows(self):
        """(type_id, q00, q01, q10, q11, count) over every 2 x 2 joint type in lexicographic order."""
        out = []
        for k, q in enumerate(enumerate_rational_joint_types(self.n, (2, 2))):
            key = tuple(np.rint(q * self.n).astype(int).ravel())
            out.append((k, *q.ravel(), self.pair_counts.get(key, 0)))
        return out


def enumerator_report(cb: Codebook, nx: int = 2, y=None, g: GldMetric | None = None,
                      ny: int = 2) -> EnumeratorReport:
    cw = cb.codewords
    rep = EnumeratorReport(cb.n, cb.size)
    for a in range(cb.size):
        for b in range(cb.size):
            if a != b:
                key = tuple(_pair_counts(cw[a], cw[b], nx).ravel())
                rep.pair_counts[key] = rep.pair_counts.get(key, 0) + 1
    if y is not None:
        y = np.asarray(y, dtype=int)
        for a in range(cb.size):
            c = np.zeros((nx, ny), dtype=int)
            np.add.at(c, (cw[a], y), 1)
            key = tuple(c.ravel())
            rep.output_counts[key] = rep.output_counts.get(key, 0) + 1
        if g is not None:
            e = np.exp(sequence_scores(g, cw, y))
            rep.z = e.sum() - e
    return rep


def type_pairs_count(n: int, qx, qxx) -> int:
    """|{(x, x') in T(Q_X)^2 : joint type of (x, x') is qxx}|."""
    seqs = sequences_of_type(qx, n)
    target = np.asarray(qxx, dtype=float)
    nx = target.shape[0]
    match = _type_match_matrix(seqs, target, nx)
    return int(match.sum())


def _type_match_matrix(seqs: np.ndarray, qxx: np.ndarray, nx: int) -> np.ndarray:
    n = seqs.shape[1]
    target = np.rint(qxx * n).astype(int)
    t = len(seqs)
    # joint counts for all pairs at once: cnt[i, j, a, b]
    cnt = np.zeros((t, t, nx, nx), dtype=int)
    for a in range(nx):
        for b in range(nx):
            cnt[:, :, a, b] = ((seqs[:, None, :] == a) & (seqs[None, :, :] == b)).sum(axis=-1)
    return (cnt == target).all(axis=(-2, -1))


def _all_tuples(t: int, m: int, budget: int):
    total = t ** m
    if total > budget:
        raise BudgetExceeded("codebook enumeration", total, budget)
    return np.array(list(itertools.product(range(t), repeat=m)), dtype=int).reshape(total, m)


def exact_enumerator_hit_prob(n: int, m: int, qx, qxx, budget: int = ENUM_BUDGET) -> Fraction:
    """P{N(qxx) >= 1} exactly, by enumerating every codebook of M draws."""
    seqs = sequences_of_type(qx, n)
    t = len(seqs)
    if t ** m > budget:
        raise BudgetExceeded("codebook enumeration", t ** m, budget)
    if m < 2:
        return Fraction(0)
    match = _type_match_matrix(seqs, np.asarray(qxx, dtype=float), len(qx))
    hits = 0
    for first in range(t):
        rest = _all_tuples(t, m - 1, budget)
        tup = np.hstack([np.full((len(rest), 1), first), rest])
        hit = np.zeros(len(tup), dtype=bool)
        for a in range(m):
            for b in range(m):
                if a != b:
                    hit |= match[tup[:, a], tup[:, b]]
        hits += int(hit.sum())
    return Fraction(hits, t ** m)


def exact_enumerator_moment(n: int, m: int, qx, qxx, k: int, budget: int = ENUM_BUDGET) -> Fraction:
    """E[N(qxx)^k] exactly, by enumerating every codebook of M draws."""
    seqs = sequences_of_type(qx, n)
    t = len(seqs)
    match = _type_match_matrix(seqs, np.asarray(qxx, dtype=float), len(qx))
    tup = _all_tuples(t, m, budget)
    cnt = np.zeros(len(tup), dtype=np.int64)
    for a in range(m):
        for b in range(m):
            if a != b:
                cnt += match[tup[:, a], tup[:, b]]
    return Fraction(int((cnt.astype(object) ** k).sum()), t ** m)


def exact_pair_indicator_product(n: int, qx, qxx) -> Fraction:
    """E[1{type(x_0,x_1)=Q} 1{type(x_0,x_2)=Q}] over three independent draws."""
    seqs = sequences_of_type(qx, n)
    match = _type_match_matrix(seqs, np.asarray(qxx, dtype=float), len(qx)).astype(np.int64)
    t = len(seqs)
    # sum over x_0 of (number of partners)^2
    return Fraction(int((match.sum(axis=1) ** 2).sum()), t ** 3)


@dataclass
class MomentEstimate:
    mean: float
    half_width: float
    trials: int


def moment_estimate(n: int, m: int, qx, qxx, k: int, trials: int, seed: int) -> MomentEstimate:
    """Monte Carlo mean of N(qxx)^k with a normal 99% confidence half-width."""
    if trials < 100:
        raise ValueError("moment estimates need at least 100 trials")
    if k < 1:
        raise ValueError("moment order must be positive")
    vals = np.empty(trials)
    for i in range(trials):
        cb = sample_codebook(n, m, qx, seed, i)
        vals[i] = float(pair_enumerator(cb, qxx, len(qx))) ** k
    sd = vals.std(ddof=1)
    return MomentEstimate(float(vals.mean()), float(norm.ppf(0.995) * sd / math.sqrt(trials)), trials)


@dataclass
class TrialResult:
    trial: int
    seed: int
    pe: float
    n: int

    @property
    def exponent(self) -> float:
        return math.inf if self.pe <= 0 else -math.log(self.pe) / self.n


@dataclass
class TailReport:
    n: int
    m: int
    trials: list
    exponents: np.ndarray          # sorted finite values
    zero_pe: int                   # trials with P_e = 0 (exponent +inf)
    median: float
    lower_mass: dict = field(default_factory=dict)
    upper_mass: dict = field(default_factory=dict)

    @property
    def iqr(self) -> float:
        if len(self.exponents) == 0:
            return math.nan
        q1, q3 = np.quantile(self.exponents, [0.25, 0.75])
        return float(q3 - q1)

    def lower_tail(self, e0: float) -> float:
        """Empirical P{E <= e0} among all trials (infinite exponents never count)."""
        return float((self.exponents <= e0).sum()) / len(self.trials)

    def upper_tail(self, e0: float) -> float:
        return 1.0 - float((self.exponents < e0).sum()) / len(self.trials)


def run_trial(n: int, m: int, cfg: ModelConfig, seed: int, trial: int,
              budget: int = PE_BUDGET) -> TrialResult:
    cb = sample_codebook(n, m, cfg.qx, seed, trial)
    pe = exact_error_prob(cb, cfg.channel, cfg.metric, budget)
    return TrialResult(trial, seed, pe, n)


def tail_experiment(n: int, m: int, cfg: ModelConfig, trials: int, seed: int,
                    thresholds=(), budget: int = PE_BUDGET) -> TailReport:
    """Draw ``trials`` codebooks and summarize the empirical law of -ln(P_e)/n."""
    ny = cfg.channel.shape[1]
    if ny ** n * m * m > budget:
        raise BudgetExceeded("exact error probability", ny ** n * m * m, budget)
    results = [run_trial(n, m, cfg, seed, i, budget) for i in range(trials)]
    return summarize_trials(n, m, results, thresholds)


def summarize_trials(n: int, m: int, results: list, thresholds=()) -> TailReport:
    ex = np.array([r.exponent for r in results])
    finite = np.sort(ex[np.isfinite(ex)])
    med = float(np.median(finite)) if len(finite) else math.inf
    rep = TailReport(n, m, results, finite, int((~np.isfinite(ex)).sum()), med)
    for e0 in thresholds:
        rep.lower_mass[e0] = rep.lower_tail(e0)
        rep.upper_mass[e0] = rep.upper_tail(e0)
    return rep
