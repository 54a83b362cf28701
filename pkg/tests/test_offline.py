import numpy as np
import pytest

from conftest import random_general, random_uniform
from voltsched.model import GeneralInstance, Job, UniformInstance, validate_schedule
from voltsched.offline import (
    PlanEntry,
    brute_force_opt,
    normalized_plan,
    opt_energy,
    plan_schedule,
    yds,
    yds_optimal,
)
from voltsched.online import avr, oa


def test_single_job():
    s = yds_optimal(UniformInstance([1.0], 2))
    assert s.total.segments() == [(0.0, 2.0, 0.5, 0.5)]


def test_two_jobs_run_at_constant_speed():
    s = yds_optimal(UniformInstance([1.0, 2.0], 2))
    assert s.total.simplify().segments() == [(0.0, 3.0, 1.0, 1.0)]
    assert s.energy(3) == pytest.approx(3.0)


def test_avr_lower_bound_instance_is_flat():
    a = (1 - 2 / 4) * 1
    s = yds_optimal(GeneralInstance((Job(0, 1, 1), Job(a, a + 1, 1))))
    total = s.total.simplify()
    assert len(total) == 1
    assert total.segments()[0] == pytest.approx((0.0, 1.5, 4 / 3, 4 / 3))


def test_phases_have_decreasing_speed(rng):
    for _ in range(20):
        res = yds(random_general(rng))
        speeds = [p.speed for p in res.phases]
        assert all(a >= b * (1 - 1e-12) for a, b in zip(speeds, speeds[1:]))


def test_nested_critical_interval():
    # a dense job inside a sparse one: the sparse job runs around it
    inst = GeneralInstance.from_jobs([Job(0, 4, 2), Job(1, 2, 3)])
    s = yds_optimal(inst)
    assert s.per_job[1].segments() == [(1.0, 2.0, 3.0, 3.0)]
    assert s.per_job[0].total_work() == pytest.approx(2.0)
    assert s.per_job[0](0.5) == pytest.approx(2 / 3)
    assert s.per_job[0](1.5) == 0.0
    assert s.energy(2) == pytest.approx(9 + 3 * (2 / 3) ** 2)


def test_yds_feasible_and_not_beaten(rng):
    for _ in range(30):
        inst = random_uniform(rng)
        s = yds_optimal(inst)
        assert validate_schedule(s, inst).ok
        for alpha in (2.0, 3.0):
            opt = s.energy(alpha)
            assert opt <= avr(inst).energy(alpha) + 1e-9
            assert opt <= oa(inst).energy(alpha) + 1e-9


def test_empty_and_zero_instances():
    s = yds_optimal(UniformInstance([0.0, 0.0], 3))
    assert s.energy(2) == 0.0
    assert validate_schedule(s, UniformInstance([0.0, 0.0], 3)).ok


def test_normalized_plan_examples():
    plan = normalized_plan(UniformInstance([1.0, 2.0], 2))
    assert plan == [PlanEntry(0, 0.0, 1.0, 1.0), PlanEntry(1, 1.0, 3.0, 1.0)]
    assert normalized_plan(UniformInstance([4.0], 2)) == [PlanEntry(0, 0.0, 2.0, 2.0)]
    zero = normalized_plan(UniformInstance([0.0, 3.0], 2))[0]
    assert zero.speed * (zero.end - zero.start) == 0


def test_normalized_plan_invariants(rng):
    for _ in range(40):
        inst = random_uniform(rng, n=int(rng.integers(1, 25)), D=int(rng.integers(1, 8)))
        plan = normalized_plan(inst)
        live = sorted((e for e in plan if e.end > e.start), key=lambda e: e.start)
        for a, b in zip(live, live[1:]):
            assert a.end <= b.start + 1e-9
        for e in plan:
            assert e.speed * (e.end - e.start) == pytest.approx(inst.workloads[e.job], abs=1e-9)
            assert e.start >= e.job - 1e-12 and e.end <= e.job + inst.duration + 1e-9
        assert plan_schedule(plan).energy(3) == pytest.approx(opt_energy(inst, 3), rel=1e-9)


def test_normalized_plan_needs_uniform():
    with pytest.raises(TypeError):
        normalized_plan(GeneralInstance((Job(0, 1, 1),)))


@pytest.mark.parametrize("alpha", [2.0, 3.0])
def test_brute_force_fixture_values(alpha):
    assert brute_force_opt(UniformInstance([1.0], 2), alpha) == pytest.approx(2 * 0.5**alpha, abs=1e-4)
    assert brute_force_opt(UniformInstance([1.0, 2.0], 2), alpha) == pytest.approx(3.0, abs=1e-3)


def test_brute_force_agrees_with_yds():
    rng = np.random.default_rng(11)
    for _ in range(15):
        inst = random_general(rng, n=int(rng.integers(1, 5)), horizon=8.0)
        alpha = float(rng.choice([1.5, 2.0, 3.0]))
        opt = opt_energy(inst, alpha)
        bf = brute_force_opt(inst, alpha)
        assert bf >= opt * (1 - 1e-6)
        assert bf == pytest.approx(opt, rel=5e-3)


def test_brute_force_improves_on_refinement():
    # nested grids only: every coarse slot is a union of fine slots
    inst = GeneralInstance.from_jobs([Job(0.3, 2.9, 1.5), Job(1.1, 4.7, 2.0), Job(2.2, 3.1, 0.7)])
    values = [brute_force_opt(inst, 2.5, grid_n=n, rtol=1e-9) for n in (4, 8, 16, 32)]
    assert all(a >= b - 1e-7 * a for a, b in zip(values, values[1:]))
    assert values[-1] >= opt_energy(inst, 2.5) * (1 - 1e-8)
