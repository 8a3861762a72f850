import highspy
import numpy as np
import pytest

from guessbound import Schedule, derive_schedule, frequency_encoding
from guessbound.meshlp import (
    HighsSolver,
    InconsistentSampleError,
    LpParams,
    LpTemplate,
    ScipySolver,
    build_lp_lower,
    build_lp_upper,
    check_iid_consistency,
    lp1_bound,
    lp_lower_bound,
    lp_upper_bound,
    sweep_template,
    write_lp,
)
from guessbound.meshlp.solvers import INFEASIBLE, OPTIMAL
from guessbound.oracle import aligned_histogram, exact_lambda, make_mesh_aligned, make_zipf, sample

N = 3000


@pytest.fixture(scope="module")
def setup():
    ds = derive_schedule(N, Schedule(q=1.05, d=1000))
    dist = make_zipf(2000, 0.8)
    enc = frequency_encoding(sample(dist, N, seed=2).frequency_table())
    return ds, dist, enc


def test_shapes(setup):
    ds, _, enc = setup
    l, k = ds.mesh.l, ds.lp.i_max + 1
    plain = LpParams.from_deltas(N, None, ds.schedule.delta4)
    lp1 = LpTemplate("lp1", 100, ds.mesh, enc, plain).problem(3)
    assert lp1.num_cols == l + 1
    # guess row, one ranged row per band and the mass row, plus the link row
    assert lp1.num_rows == k + 3
    lower = LpTemplate("lower", 100, ds.mesh, enc, ds.lp).problem(3)
    assert lower.num_cols == l + 2 and lower.num_rows == 2 * k + 4
    assert lower.sense == "min" and build_lp_upper(100, ds.mesh, enc, 3, ds.lp).sense == "max"


def test_template_validation(setup):
    ds, _, enc = setup
    plain = LpParams.from_deltas(N, None, ds.schedule.delta4)
    with pytest.raises(ValueError):
        LpTemplate("lower", 10, ds.mesh, enc, plain)
    with pytest.raises(ValueError):
        LpTemplate("middle", 10, ds.mesh, enc, ds.lp)
    with pytest.raises(ValueError):
        LpTemplate("lp1", 10, ds.mesh, enc, plain, b=0)


@pytest.mark.parametrize("task", ["lower", "upper"])
def test_warm_sweep_matches_fresh_solves(setup, task):
    ds, _, enc = setup
    t = LpTemplate(task, 100, ds.mesh, enc, ds.lp)
    idxs = list(range(1, ds.mesh.l + 2, 9))
    warm = HighsSolver().sweep(t, idxs)
    ref = ScipySolver()
    for idx, w in zip(idxs, warm):
        f = ref.solve(t.problem(idx))
        assert w.status == f.status, idx
        if w.status == OPTIMAL:
            assert w.value == pytest.approx(f.value, abs=1e-8), idx
            assert t.problem(idx).violation(w.solution) < 1e-6


def test_capacity_pruning_is_sound(setup):
    ds, _, enc = setup
    t = LpTemplate("lower", 2000, ds.mesh, enc, ds.lp)
    pruned = [i for i in t.idx_range if t.exceeds_capacity(i)]
    assert pruned
    for idx in pruned[-1:] + pruned[:: max(1, len(pruned) // 4)]:
        assert ScipySolver().solve(t.problem(idx)).status == INFEASIBLE


def test_infeasible_outcome_carries_rows(setup):
    ds, _, enc = setup
    t = LpTemplate("lower", 2000, ds.mesh, enc, ds.lp)
    idx = next(i for i in t.idx_range if t.exceeds_capacity(i))
    out = HighsSolver().solve(t.problem(idx))
    assert out.status == INFEASIBLE
    assert out.info.get("infeasible_rows")


def test_write_lp_round_trip(setup, tmp_path):
    ds, _, enc = setup
    problem = build_lp_lower(300, ds.mesh, enc, 150, ds.lp)
    path = tmp_path / "m.lp"
    with open(path, "w") as fh:
        write_lp(problem, fh)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    # the reader drops coefficients below 1e-9 (with a warning); the optimum barely moves
    assert h.readModel(str(path)) in (highspy.HighsStatus.kOk, highspy.HighsStatus.kWarning)
    h.run()
    assert h.getModelStatus() == highspy.HighsModelStatus.kOptimal
    ours = HighsSolver().solve(problem)
    assert h.getInfo().objective_function_value == pytest.approx(ours.value, abs=1e-6)


def test_lp_bounds_bracket_truth(setup):
    ds, dist, enc = setup
    for g in (1, 30, 300, 3000, 30000):
        lo = lp_lower_bound(g, ds.mesh, enc, ds.lp)
        hi = lp_upper_bound(g, ds.mesh, enc, ds.lp)
        truth = exact_lambda(dist, g)
        assert lo.value <= truth <= hi.value
        assert lo.delta == pytest.approx(2 * sum(ds.schedule.delta4))
        assert lo.provenance["idx"] is not None


def test_lp_bound_sample_target_and_zero(setup):
    ds, _, enc = setup
    a = lp_lower_bound(300, ds.mesh, enc, ds.lp)
    b = lp_lower_bound(300, ds.mesh, enc, ds.lp, target="sample_lambda", delta_eps=0.001)
    assert b.raw_value < a.raw_value and b.delta == pytest.approx(a.delta + 0.001)
    assert lp_lower_bound(0, ds.mesh, enc, ds.lp).value == 0.0
    with pytest.raises(ValueError):
        lp_lower_bound(300, ds.mesh, enc, ds.lp, target="sample_lambda")


def test_sweep_threads_agree(setup):
    ds, _, enc = setup
    t = LpTemplate("upper", 200, ds.mesh, enc, ds.lp)
    one = sweep_template(t, workers=1)
    two = sweep_template(t, workers=2)
    assert one.keys() == two.keys()
    for i in one:
        assert one[i].status == two[i].status
        if one[i].status == OPTIMAL:
            assert one[i].value == pytest.approx(two[i].value, abs=1e-8)


def test_iid_check(setup):
    ds, _, enc = setup
    assert check_iid_consistency(enc, ds.mesh, ds.lp)
    big = frequency_encoding(sample(make_zipf(10**5, 0.8), 10**5, seed=4).frequency_table())
    dup = big.duplicated(3)
    dds = derive_schedule(dup.n, Schedule(q=1.05))
    verdict = check_iid_consistency(dup, dds.mesh, dds.lp)
    assert not verdict
    assert verdict.report["programs"]["lower"]["status"] == INFEASIBLE


def test_inconsistent_sample_raises():
    big = frequency_encoding(sample(make_zipf(10**5, 0.8), 10**5, seed=4).frequency_table())
    dup = big.duplicated(3)
    dds = derive_schedule(dup.n, Schedule(q=1.05))
    with pytest.raises(InconsistentSampleError):
        lp_lower_bound(1000, dds.mesh, dup, dds.lp)


def test_lp1_on_mesh_aligned_data():
    ds = derive_schedule(N, Schedule(q=1.05, d=1000))
    dist = make_mesh_aligned(ds.mesh, aligned_histogram(ds.mesh, make_zipf(2000, 0.8)))
    enc = frequency_encoding(sample(dist, N, seed=0).frequency_table())
    plain = LpParams.from_deltas(N, None, ds.schedule.delta4)
    for g in (100, 1000):
        lo, _ = lp1_bound(g, 1, ds.mesh, enc, plain)
        hi, _ = lp1_bound(g, -1, ds.mesh, enc, plain)
        assert lo <= exact_lambda(dist, g) + 1e-9 <= hi + 2e-9
