import numpy as np
import pytest
from scipy import stats

from guessbound import derive_schedule, Schedule
from guessbound.meshlp import build_mesh
from guessbound.oracle import (
    CoverageReport,
    KnownDistribution,
    aligned_histogram,
    cdf_zipf,
    coverage_trial,
    exact_lambda,
    make_mesh_aligned,
    make_uniform,
    make_zipf,
    round_to_mesh,
    sample,
    sample_counts,
)


def test_constructors():
    z = make_zipf(1000, 0.8)
    assert z.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(z.probs) <= 0)
    assert exact_lambda(z, 0) == 0.0 and exact_lambda(z, 5000) == 1.0
    assert exact_lambda(z, 3) == pytest.approx(z.probs[:3].sum())
    with pytest.raises(ValueError):
        KnownDistribution(np.array([0.3, 0.7]))
    with pytest.raises(ValueError):
        KnownDistribution(np.array([0.5, 0.4]))


@pytest.mark.parametrize("draw", [sample, sample_counts])
def test_sampler_law(draw):
    d = make_zipf(50, 1.1)
    t = draw(d, 200_000, seed=3)
    t = t.frequency_table() if hasattr(t, "frequency_table") else t
    counts = np.zeros(d.k)
    for tok, c in t.counts.items():
        counts[d.labels.id_of(tok)] = c
    _, pval = stats.chisquare(counts, d.probs * counts.sum())
    assert pval > 1e-4


def test_sampler_seeded():
    d = make_uniform(10)
    assert np.array_equal(sample(d, 100, seed=1).ids, sample(d, 100, seed=1).ids)


def test_round_to_mesh():
    mesh = build_mesh(1000, 1.1)
    d = make_zipf(5000, 1.0)
    h_down, tail_down = round_to_mesh(d, mesh, "down")
    assert np.dot(h_down, mesh.values) <= 1.0 - tail_down + 1e-12
    assert np.dot(h_down, mesh.values) * mesh.q >= 1.0 - tail_down - 1e-12
    h_up, tail_up = round_to_mesh(d, mesh, "up")
    assert np.dot(h_up, mesh.values) >= 1.0 - tail_up - 1e-12
    assert np.dot(h_up, mesh.values) <= mesh.q * (1.0 - tail_up) + 1e-12
    with pytest.raises(ValueError):
        round_to_mesh(d, mesh, "sideways")


def test_mesh_aligned_round_trip():
    mesh = build_mesh(1000, 1.1)
    h = aligned_histogram(mesh, make_zipf(3000, 0.9))
    d = make_mesh_aligned(mesh, h)
    assert np.array_equal(d.histogram(mesh), h)
    with pytest.raises(ValueError):
        make_mesh_aligned(mesh, h * 2)
    with pytest.raises(ValueError):
        make_zipf(10, 1.0).histogram(mesh)


def test_cdf_zipf():
    assert cdf_zipf(0.0374, 0.1872, 1) == pytest.approx(0.0374)
    assert cdf_zipf(0.5, 0.5, 10**6) == 1.0
    with pytest.raises(ValueError):
        cdf_zipf(0.1, 0.2, 0)


def test_coverage_small_run():
    sch = Schedule(d=500)
    rep = coverage_trial(make_uniform(100), 2000, [1, 10, 50, 100, 400], trials=30, base_seed=5, schedule=sch)
    assert isinstance(rep, CoverageReport)
    assert rep.seeds == list(range(5, 35))
    for m in ("frequency_ub", "sampling_lb", "prior_lb"):
        assert rep.passed(m)
        assert rep.threshold(m) > rep.deltas[m]
    assert len(list(rep.summary_lines())) == 3
    again = coverage_trial(make_uniform(100), 2000, [1, 10, 50, 100, 400], trials=30, base_seed=5, schedule=sch)
    assert rep.to_json() == again.to_json()


def test_coverage_with_lp_bracket():
    sch = Schedule(q=1.05, d=1000)
    rep = coverage_trial(make_zipf(2000, 0.8), 3000, [10, 1000, 10000], methods=["lp_lb", "lp_ub"],
                         trials=3, schedule=sch)
    assert "lp_bracket" in rep.violations
    assert rep.deltas["lp_bracket"] == pytest.approx(2 * derive_schedule(3000, sch).lp.delta)
    assert all(w >= 0 for w in rep.bracket_widths.values())


def test_coverage_validation():
    with pytest.raises(ValueError):
        coverage_trial(make_uniform(10), 100, [1], trials=0)
    with pytest.raises(ValueError):
        coverage_trial(make_uniform(10), 100, [1], methods=["best"])
