import pytest

from guessbound import Schedule, default_schedule, derive_schedule

N_LARGE = 69301337


def test_defaults():
    s = Schedule()
    assert s.delta1 == 0.00009 and s.d == 25000 and s.q == 1.002 and s.i_max == 4
    assert s.delta3 == pytest.approx(0.01 - 0.00009)
    assert s.delta4 == (0.00009, 0.000165, 0.00175, 0.00175, 0.0012)
    assert s.xhat3_multipliers == (7.0, 11.0, 14.0, 16.3, 18.5)
    assert s.prior_j_range == (2, 1000)


def test_audit_within_budget():
    totals = Schedule().check()
    assert totals["frequency_ub"] == 0.00009
    assert totals["sampling_lb"] == pytest.approx(0.00991)
    assert totals["lp_lb"] == pytest.approx(0.00991)
    assert totals["prior_lb"] == pytest.approx(0.01)
    assert all(v <= 0.01 + 1e-12 for v in totals.values())


def test_over_budget_rejected():
    with pytest.raises(ValueError, match="budget"):
        Schedule(delta3=0.02).check()
    with pytest.raises(ValueError):
        derive_schedule(10**5, Schedule(delta4=(0.01,) * 5))


def test_large_n_derivation():
    ds = default_schedule(N_LARGE)
    assert ds.epsilon1 == pytest.approx(2.5925190917214128e-4, rel=1e-12)
    assert ds.split.t == pytest.approx(240.16168852046949, rel=1e-12)
    assert ds.lp.eps2[0] == pytest.approx(2.5925190917214128e-4, rel=1e-12)
    assert all(0 < e < 1 for e in ds.lp.eps3)
    assert ds.lp.delta == pytest.approx(0.00991)


def test_split_fallback_note():
    ds = derive_schedule(1000)
    assert ds.split.d == 250 and ds.notes


def test_eps3_error_is_actionable():
    with pytest.raises(ValueError, match="smaller xhat"):
        derive_schedule(600, Schedule(q=1.05))
    ds = derive_schedule(600, Schedule(q=1.05), need_lp=False)
    assert ds.lp is None and any("LP" in n for n in ds.notes)


def test_overrides():
    s = Schedule().with_overrides(i_max=6, q=None)
    assert len(s.delta4) == 7 and s.q == 1.002
    with pytest.raises(ValueError):
        Schedule(i_max=2)
    with pytest.raises(ValueError):
        Schedule(q=1.0)


def test_summary_is_plain_data():
    import json

    json.dumps(default_schedule(10**5).summary())
