"""Mesh, binomial pdf and slack parameters against extended-precision oracles.

Reference values were computed once with mpmath at 50 digits and frozen here.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from guessbound.meshlp import LpParams, bpdf, build_mesh, derive_eps3, eps2_from_delta, log_bpdf
from guessbound.meshlp.numerics import _log_binom

mp.dps = 40

EPS3_Q1002_N1E5 = (
    0.012075303212572728,
    0.018169286308624283,
    0.022253349040472126,
    0.024917714848718879,
    0.027383582767774944,
)
EPS2_N1E5 = (
    0.0068248446457168565,
    0.013198287220680022,
    0.016902002960921368,
    0.022536229314695641,
    0.028995628526490336,
)
DELTA4 = (0.00009, 0.000165, 0.00175, 0.00175, 0.0012)
MULT = (7.0, 11.0, 14.0, 16.3, 18.5)


@pytest.mark.parametrize(
    "n,q,l",
    [(10**5, 1.05, 425), (10**5, 1.002, 10372), (69301337, 1.002, 13646), (100, 1.1, 145)],
)
def test_mesh_size(n, q, l):
    m = build_mesh(n, q)
    assert m.l == l
    assert m.x_l == pytest.approx(1 / (1e4 * n), rel=1e-15)
    assert m.values[0] <= 1.0 < m.values[0] * q


def test_mesh_is_geometric_and_decreasing():
    m = build_mesh(1000, 1.05)
    ratios = m.values[:-1] / m.values[1:]
    assert np.allclose(ratios, 1.05, rtol=1e-12)


def test_mesh_snaps_exact_powers():
    # 1/x_l = 1e4 * 2**10 / 1e4 ... choose q with q^k == 1e4 n exactly
    m = build_mesh(1, 10.0)
    assert m.l == 5
    assert m.values[0] == pytest.approx(1.0)


def test_mesh_rejects_bad_args():
    with pytest.raises(ValueError):
        build_mesh(0, 1.1)
    with pytest.raises(ValueError):
        build_mesh(10, 1.0)


@pytest.mark.parametrize("n", [10, 100, 1000])
@pytest.mark.parametrize("x", [1e-6, 0.3, 0.99])
def test_bpdf_normalises(n, x):
    total = sum(bpdf(i, n, x) for i in range(n + 1))
    assert abs(total - 1.0) <= 1e-9


def test_bpdf_zero_count_large_n():
    oracle = 0.36787943933204510807
    assert bpdf(0, 10**8, 1e-8) == pytest.approx(oracle, rel=1e-6)


@pytest.mark.parametrize(
    "i,n,x,oracle",
    [
        (3, 1000, 0.3, 1.6392848963603367e-148),
        (5, 100000, 4e-5, 0.15629657780813779),
    ],
)
def test_bpdf_against_oracle(i, n, x, oracle):
    assert bpdf(i, n, x) == pytest.approx(oracle, rel=1e-10)


def test_bpdf_underflow_flushes_to_zero():
    assert bpdf(500, 1000, 1e-6) == 0.0
    assert log_bpdf(500, 1000, 1e-6) < -700


def test_bpdf_edges():
    assert bpdf(0, 10, 0.0) == 1.0
    assert bpdf(3, 10, 0.0) == 0.0
    assert bpdf(10, 10, 1.0) == 1.0
    with pytest.raises(ValueError):
        bpdf(1, 10, 1.5)


def test_bpdf_vectorised():
    xs = np.array([1e-3, 1e-2, 0.1])
    got = bpdf(2, 50, xs)
    assert got.shape == (3,)
    for x, g in zip(xs, got):
        assert g == pytest.approx(bpdf(2, 50, float(x)), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10**7), st.integers(0, 200))
def test_log_binom_matches_mpmath(n, i):
    i = min(i, n)
    ref = float(mp.log(mp.binomial(n, i)))
    assert _log_binom(n, i) == pytest.approx(ref, rel=1e-12, abs=1e-9)


def test_eps3_schedule_values():
    n = 10**5
    for i, (m, want) in enumerate(zip(MULT, EPS3_Q1002_N1E5)):
        assert derive_eps3(1.002, m / n, n, i) == pytest.approx(want, rel=1e-9)


def test_eps3_out_of_range_messages():
    with pytest.raises(ValueError, match="smaller xhat"):
        derive_eps3(1.1, 11 / 3000, 3000, 1)
    with pytest.raises(ValueError, match="at least"):
        derive_eps3(1.002, 1e-9, 10**5, 0)
    with pytest.raises(ValueError, match="q\\*xhat"):
        derive_eps3(1.5, 0.9, 10, 0)


def test_eps2_schedule_values():
    for i, (d, want) in enumerate(zip(DELTA4, EPS2_N1E5)):
        assert eps2_from_delta(10**5, i, d) == pytest.approx(want, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(10, 10**8), st.integers(0, 6), st.floats(1e-8, 0.5))
def test_eps2_inverts_its_exponential(n, i, delta):
    e = eps2_from_delta(n, i, delta)
    back = math.exp(-2 * (n - i) ** 2 * e * e / (n * (i + 1) ** 2))
    assert back == pytest.approx(delta, rel=1e-12)


def test_lp_params_delta_is_twice_band_sum():
    p = LpParams.from_deltas(10**5, 1.002, DELTA4, MULT)
    assert p.delta == pytest.approx(2 * sum(DELTA4), rel=1e-12)
    assert p.i_max == 4 and p.has_rounding
    plain = LpParams.from_deltas(10**5, None, DELTA4)
    assert not plain.has_rounding


def test_lp_params_validation():
    with pytest.raises(ValueError):
        LpParams(10, ())
    with pytest.raises(ValueError):
        LpParams(3, (0.1, 0.1, 0.1))
    with pytest.raises(ValueError):
        LpParams(100, (0.1,), xhat3=(0.1, 0.2))
