import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from mpmath import mp, mpf

from guessbound import (
    BoundPoint,
    GuessingCurve,
    ModelGuessList,
    SampleCorpus,
    SplitBoundParams,
    frequency_encoding,
    frequency_ub,
    h_count,
    load_guess_list,
    mcdiarmid_epsilon,
    partition,
    prior_lb,
    prior_lb_best,
    sampling_lb,
    slack_t,
)
from guessbound.bounds import extended_counts, extended_lb, extended_lb_curve, model_curve, prior_slack_t

mp.dps = 40


def test_epsilon_at_large_n():
    assert mcdiarmid_epsilon(69301337, 0.00009) == pytest.approx(2.5925190917214128e-4, rel=1e-12)


def test_slack_t_schedule_value():
    assert slack_t(25000, 0.01 - 0.00009) == pytest.approx(240.16168852046949, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 10**9), st.floats(1e-12, 0.999))
def test_closed_forms_invert(n, delta):
    e = mcdiarmid_epsilon(n, delta)
    assert float(mp.exp(-2 * n * mpf(e) ** 2)) == pytest.approx(delta, rel=1e-12)
    t = slack_t(n, delta)
    assert float(mp.exp(-2 * mpf(t) ** 2 / n)) == pytest.approx(delta, rel=1e-12)
    tj = prior_slack_t(n, 3, delta)
    assert float(mp.exp(-2 * mpf(tj) ** 2 / (n * 9))) == pytest.approx(delta, rel=1e-12)


def test_closed_forms_reject_bad_delta():
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            mcdiarmid_epsilon(10, bad)
        with pytest.raises(ValueError):
            slack_t(10, bad)


def test_boundpoint_rules():
    p = BoundPoint.make(5, -0.2, "lower", "sampling_lb", 0.01, "distribution_lambda")
    assert p.value == 0.0 and p.raw_value == -0.2
    assert not p.violated_by(0.0)
    q = BoundPoint.make(5, 0.4, "upper", "frequency_ub", 0.01, "distribution_lambda")
    assert q.violated_by(0.41) and not q.violated_by(0.4)
    with pytest.raises(ValueError):
        BoundPoint(1, 0.5, "sideways", "best", 0.0)
    with pytest.raises(ValueError):
        BoundPoint(1, 0.5, "lower", "best", 1.5)
    with pytest.raises(ValueError):
        BoundPoint(1, 0.5, "lower", "magic", 0.1)


def test_curve_rules():
    a = BoundPoint(4, 0.3, "lower", "sampling_lb", 0.01)
    b = BoundPoint(2, 0.1, "lower", "sampling_lb", 0.01)
    c = GuessingCurve((a, b))
    assert list(c.g) == [2, 4] and c.at(4) is a
    with pytest.raises(ValueError):
        GuessingCurve((a, a))
    with pytest.raises(ValueError):
        GuessingCurve((a, BoundPoint(1, 0.3, "upper", "frequency_ub", 0.01)))


def test_guess_list(tmp_path):
    with pytest.raises(ValueError):
        ModelGuessList(("a", "a"))
    m = ModelGuessList.from_iterable(["a", "b", "a"], "m")
    assert m.guesses == ("a", "b")
    f = tmp_path / "g.txt"
    f.write_bytes(b"# source: markov\nx\ny\nx\n")
    g = load_guess_list(f)
    assert g.source_label == "markov" and g.guesses == (b"x", b"y")
    with pytest.raises(ValueError):
        load_guess_list(f, dedupe=False)


def _corpus(seed=0, n=400, k=60):
    rng = np.random.default_rng(seed)
    p = 1.0 / np.arange(1, k + 1)
    return SampleCorpus.from_tokens([f"t{i:03d}" for i in rng.choice(k, size=n, p=p / p.sum())])


def test_frequency_ub():
    c = _corpus()
    t = c.frequency_table()
    counts = sorted(Counter(c.samples).values(), reverse=True)
    p = frequency_ub(t, 3, 0.01)
    assert p.raw_value == pytest.approx(sum(counts[:3]) / c.n + math.sqrt(math.log(100) / (2 * c.n)))
    s = frequency_ub(t, 3, 0.01, target="sample_lambda")
    assert s.delta == 0.0 and s.value == pytest.approx(sum(counts[:3]) / c.n)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 399))
def test_h_count_brute_force(seed, d):
    c = _corpus(seed % 50)
    part = partition(c, d, seed=seed)
    d1 = part.d1
    for g in (0, 1, 5, 20, d1.distinct, d1.distinct + 5):
        top = set(d1.ids[:g].tolist())
        assert h_count(part, g) == sum(1 for i in part.d2.ids if int(i) in top)


def test_sampling_lb_formula():
    c = _corpus()
    part = partition(c, 100, seed=3)
    params = SplitBoundParams.from_delta(100, 0.05)
    p = sampling_lb(part, 10, params)
    assert p.raw_value == pytest.approx((h_count(part, 10) - params.t) / 100)
    assert p.delta == pytest.approx(0.05)
    s = sampling_lb(part, 10, params, target="sample_lambda", delta_eps=0.01)
    assert s.raw_value == pytest.approx(p.raw_value - mcdiarmid_epsilon(c.n, 0.01))
    assert s.delta == pytest.approx(0.06)
    with pytest.raises(ValueError):
        sampling_lb(part, 10, SplitBoundParams(99, 1.0))
    with pytest.raises(ValueError):
        sampling_lb(part, 10, params, target="sample_lambda")


def test_prior_lb_formula():
    enc = frequency_encoding(_corpus(n=1000))
    n = enc.n
    p = prior_lb(enc, 2.0, 5, 10.0, delta_eps=0.001)
    head = enc.mass_at_least(5)
    penalty = n / (math.factorial(4) * 2.0 ** 4)
    eps = mcdiarmid_epsilon(n, 0.001)
    assert p.raw_value == pytest.approx((head - penalty - 10.0) / n - eps)
    assert p.g == 2 * n
    assert p.delta == pytest.approx(math.exp(-2 * 100 / (n * 25)) + 0.001)


def test_prior_lb_best_is_max_over_j():
    enc = frequency_encoding(_corpus(n=5000, k=200))
    best = prior_lb_best(enc, 1.0, delta_t=0.01, delta_eps=0.001, j_range=(2, 40))
    brute = max(
        (prior_lb(enc, 1.0, j, prior_slack_t(enc.n, j, 0.01), 0.001).raw_value, -j) for j in range(2, 41)
    )
    assert best.raw_value == pytest.approx(brute[0], rel=1e-12)
    assert best.provenance["j"] == -brute[1]
    assert best.delta == pytest.approx(0.011)


def test_prior_lb_args():
    enc = frequency_encoding(_corpus())
    with pytest.raises(ValueError):
        prior_lb(enc, 0.5, 3, 1.0, 0.01)
    with pytest.raises(ValueError):
        prior_lb(enc, 1.0, 1, 1.0, 0.01)
    with pytest.raises(ValueError):
        prior_lb_best(enc, 1.0, delta_t=0.01, t=3.0, delta_eps=0.01)


def _brute_extended(part, model, g):
    order = part.d1.tokens
    seen = set(order)
    guesses = order[:g] + [x for x in model.guesses if x not in seen][: max(0, g - len(order))]
    gs = set(guesses)
    return sum(1 for x in part.d2.samples if x in gs)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.permutations(list(range(80))))
def test_extended_counts_brute_force(seed, perm):
    c = _corpus(seed % 30)
    part = partition(c, 150, seed=seed)
    model = ModelGuessList(tuple(f"t{i:03d}" for i in perm[:70]))
    gs = [0, 1, 10, part.d1.distinct, part.d1.distinct + 3, part.d1.distinct + 40, 500]
    got = extended_counts(part, model, gs)
    assert got.tolist() == [_brute_extended(part, model, g) for g in gs]


def test_extended_lb_dominates_sampling_lb():
    c = _corpus(1)
    part = partition(c, 150, seed=2)
    params = SplitBoundParams.from_delta(150, 0.01)
    model = ModelGuessList(tuple(f"t{i:03d}" for i in range(60)))
    gs = [1, 5, 30, 60, 100]
    curve = extended_lb_curve(part, model, gs, params)
    for g, p in zip(gs, curve):
        assert p.raw_value >= sampling_lb(part, g, params).raw_value
        assert p == extended_lb(part, model, g, params)


def test_model_curve_brute_force():
    d2 = SampleCorpus.from_tokens(["a", "b", "a", "c", "z"])
    model = ModelGuessList(("c", "a", "q", "b"))
    got = model_curve(d2, model, [0, 1, 2, 3, 4, 10])
    assert got.tolist() == [0.0, 0.2, 0.6, 0.6, 0.8, 0.8]


def test_model_curve_matches_bytes_and_str():
    d2 = SampleCorpus.from_tokens([b"a", b"b"])
    assert model_curve(d2, ModelGuessList(("a", "b")), [2]).tolist() == [1.0]
