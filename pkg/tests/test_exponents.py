import math

import numpy as np
import pytest

import oracles
from trcld.core import z_channel
from trcld.exponents import (ExponentCurve, clear_cache, e0_min, e_tilde, enumerator_ld_rate,
                             exponent_curve, expurgated_exponent, landscape, lt_lower, lt_upper,
                             moment_envelope, random_coding_exponent, trc_exponent,
                             trc_exponent_ml, ut_lower, ut_upper)
from trcld.functionals import ModelConfig, evaluate_witness, lambda_fn
from trcld.info import mutual_info
from trcld.optimizer import GridSpec

COARSE = GridSpec(resolution=9, depth=2)
QX = np.array([0.5, 0.5])


def outer(a):
    return np.array([[a, 0.5 - a], [0.5 - a, a]])


@pytest.fixture(scope="module")
def coarse_cfg():
    return ModelConfig.create(z_channel(), QX, grid=COARSE, mid_grid=COARSE)


@pytest.fixture(scope="module")
def coarse_zero():
    return ModelConfig.create(z_channel(), QX, "zero", grid=COARSE, mid_grid=COARSE)


# -- closed-form helpers ------------------------------------------------------

def test_enumerator_ld_rate_examples():
    q = outer(0.4)
    i = mutual_info(q)
    assert enumerator_ld_rate(i, q, 0.5 * i) == 0.0
    q = outer(0.45)
    i = mutual_info(q)
    r = (i - 0.1) / 2
    assert enumerator_ld_rate(r, q, -1.0) == pytest.approx(0.1, abs=1e-12)
    assert enumerator_ld_rate(i / 2, q, 0.01) == math.inf
    with pytest.raises(ValueError):
        enumerator_ld_rate(0.1, np.array([[0.6, 0.1], [0.1, 0.2]]), 0.0, qx=QX)


def test_moment_envelope_examples():
    q = outer(0.4)
    i = mutual_info(q)
    assert moment_envelope(i - 0.2, q, 2) == pytest.approx(-0.2, abs=1e-12)
    assert moment_envelope(i + 0.3, q, 3) == pytest.approx(0.9, abs=1e-12)
    assert moment_envelope(i + 0.3, q, 1) == pytest.approx(0.3, abs=1e-12)
    with pytest.raises(ValueError):
        moment_envelope(0.1, q, 0)


def test_exponent_curve_validation(coarse_cfg):
    with pytest.raises(ValueError):
        ExponentCurve([0.1, 0.1], [1, 2])
    curve = exponent_curve(random_coding_exponent, [0.0, 0.3, 0.6], coarse_cfg)
    vals = curve.as_array()
    assert vals.shape == (3,) and (np.diff(vals) <= 1e-12).all()


# -- random coding exponent ---------------------------------------------------

def test_random_coding_values(zcfg):
    assert random_coding_exponent(0.0, zcfg).value == pytest.approx(0.662014394, abs=1e-3)
    assert random_coding_exponent(0.3, zcfg).value == pytest.approx(0.362014394, abs=5e-3)
    for r in (0.0, 0.2, 0.5):
        assert random_coding_exponent(r, zcfg).value == pytest.approx(oracles.e_r(r), abs=1e-6)


def test_random_coding_vanishes_at_capacity(zcfg):
    for r in (0.689193, 0.69, 0.8):
        v = random_coding_exponent(r, zcfg).value
        assert 0.0 <= v <= 1e-4
    vals = [random_coding_exponent(r, zcfg).value for r in np.linspace(0, 0.7, 15)]
    assert (np.diff(vals) <= 1e-12).all()
    with pytest.raises(ValueError):
        random_coding_exponent(-0.1, zcfg)


# -- zero metric --------------------------------------------------------------

def test_zero_metric(coarse_zero):
    for a in (0.1, 0.25, 0.5):
        assert lambda_fn(outer(a), 0.2, coarse_zero).value == pytest.approx(0.2, abs=1e-9)
    # Lambda = R gives E-tilde = min over I <= 2R of I, i.e. 0 at the product coupling
    assert e_tilde(0.2, coarse_zero).value == pytest.approx(0.0, abs=1e-9)
    assert trc_exponent(0.2, coarse_zero).value == pytest.approx(0.0, abs=1e-9)
    assert e0_min(0.2, coarse_zero).value == pytest.approx(0.0, abs=1e-9)


# -- curve exponents (production grid, shared with the acceptance suite) -------

@pytest.mark.parametrize("r", [0.0, 0.1, 0.3])
def test_ordering_chain(zcfg, r):
    er = random_coding_exponent(r, zcfg).value
    trc = trc_exponent(r, zcfg).value
    ex = expurgated_exponent(r, zcfg).value
    til = e_tilde(r, zcfg).value
    e0 = e0_min(r, zcfg).value
    slack = 1e-6
    assert er <= trc + slack and trc <= ex + slack
    assert e0 <= trc + slack and trc <= til + slack


def test_e0_min_examples(zcfg):
    assert e0_min(0.0, zcfg).value == pytest.approx(0.0, abs=1e-9)
    assert e0_min(0.2, zcfg).value == pytest.approx(0.2, abs=5e-3)
    assert e0_min(0.5, zcfg).value == pytest.approx(0.162021571, abs=5e-3)


@pytest.mark.parametrize("r", [0.0, 0.1])
def test_witness_is_consistent(zcfg, r):
    res = trc_exponent(r, zcfg)
    q = res.witness["qxx"]
    assert np.allclose(q.sum(0), QX, atol=1e-9) and np.allclose(q.sum(1), QX, atol=1e-9)
    i = mutual_info(q)
    assert i <= 2 * r + zcfg.grid.tol_feas + 1e-15
    gam = evaluate_witness("gamma", q, res.witness["cond"], r, zcfg)
    assert gam + i - r == pytest.approx(res.value, abs=1e-8)


def test_landscape_cache(zcfg):
    assert landscape(0.1, zcfg) is landscape(0.1, zcfg)
    with pytest.raises(ValueError):
        landscape(-0.1, zcfg)


def test_deterministic_rerun(coarse_cfg):
    a = trc_exponent(0.15, coarse_cfg)
    clear_cache()
    b = trc_exponent(0.15, coarse_cfg)
    assert a.value == b.value
    assert np.array_equal(a.witness["qxx"], b.witness["qxx"])


@pytest.mark.parametrize("r", [0.0, 0.3])
def test_ml_particularization_agrees(zcfg, r):
    ml = trc_exponent_ml(r, zcfg)
    assert ml.feasible
    assert ml.value == pytest.approx(trc_exponent(r, zcfg).value, abs=5e-3)


def test_ml_identity_channel():
    cfg = ModelConfig.create(np.eye(2), QX, grid=COARSE, mid_grid=COARSE)
    res = trc_exponent_ml(0.0, cfg)
    # X' must equal Y = X, which the product coupling forbids
    assert res.value >= math.log(2) - 1e-9
    assert res.value == math.inf and not res.feasible


def test_curves_monotone(coarse_cfg):
    rates = np.linspace(0.0, 0.6, 7)
    for fn in (trc_exponent, expurgated_exponent, e_tilde):
        vals = exponent_curve(fn, rates, coarse_cfg).as_array()
        assert (np.diff(vals) <= 1e-9).all(), fn.__name__


# -- tails at R = 0.2 ---------------------------------------------------------

def test_lower_tail_examples(zcfg):
    r = 0.2
    trc = trc_exponent(r, zcfg).value
    assert lt_upper(r, trc + 0.01, zcfg).value == 0.0
    res = lt_upper(r, 0.15, zcfg)
    assert res.value == math.inf and not res.feasible
    mid = 0.5 * (0.2 + trc)
    v = lt_upper(r, mid, zcfg).value
    assert 0 < v < math.inf
    ref = oracles.lt_upper(oracles.get_oracle(r), mid)
    assert v == pytest.approx(ref, abs=5e-3)
    assert lt_lower(r, mid, zcfg).value >= v - 1e-6
    assert lt_lower(r, e_tilde(r, zcfg).value + 1e-3, zcfg).value == 0.0


def test_upper_tail_examples(zcfg):
    r = 0.2
    trc = trc_exponent(r, zcfg).value
    ex = expurgated_exponent(r, zcfg).value
    assert ut_lower(r, trc - 0.01, zcfg).value == 0.0
    assert ut_upper(r, trc - 0.01, zcfg).value == 0.0
    w = ut_lower(r, ex - 1e-3, zcfg)
    assert w.witness["in_window"]
    assert 0 < w.value <= r + 1e-9
    for e0 in np.linspace(0, 1.5, 16):
        up = ut_upper(r, e0, zcfg)
        assert 0 <= up.value <= r
        lo = ut_lower(r, e0, zcfg)
        if lo.witness["in_window"]:
            assert up.value <= lo.value + 1e-6
            assert lo.value <= r + 1e-9
