import math

import numpy as np
import pytest

from conftest import random_general, random_uniform
from voltsched.experiments import lower_bound_fixture
from voltsched.las import pure_online_lower_bound
from voltsched.model import GeneralInstance, Job, UniformInstance, validate_schedule
from voltsched.offline import opt_energy, yds_optimal
from voltsched.online import _bkp_speed, avr, bkp, oa
from voltsched.profile import pointwise_excess


def test_avr_example():
    s = avr(UniformInstance([1.0, 2.0], 2))
    assert s.total(0.5) == pytest.approx(0.5)
    assert s.total(1.5) == pytest.approx(1.5)
    assert s.total(2.5) == pytest.approx(1.0)
    assert s.energy(3) == pytest.approx(0.125 + 3.375 + 1.0)


def test_avr_lower_bound_window_speed():
    fx = lower_bound_fixture("avr", 4.0, D=3.0)
    a, b = fx.extra["window"]
    s = avr(fx.instances["J"])
    assert s.total((a + b) / 2) == pytest.approx(2 / 3.0)


def test_avr_pointwise_twice_opt():
    rng = np.random.default_rng(5)
    for _ in range(60):
        inst = random_uniform(rng, n=int(rng.integers(1, 30)), D=int(rng.integers(1, 10)))
        assert pointwise_excess(avr(inst).total, yds_optimal(inst).total, 2.0) <= 1e-9
        for alpha in (2.0, 3.0):
            assert avr(inst).energy(alpha) <= 2**alpha * opt_energy(inst, alpha) + 1e-9


def test_oa_example():
    s = oa(UniformInstance([1.0, 2.0], 2))
    assert s.total(0.5) == pytest.approx(0.5)
    assert s.total(1.5) == pytest.approx(1.25)
    assert s.total(2.5) == pytest.approx(1.25)


def test_oa_single_job_is_optimal():
    inst = GeneralInstance((Job(1, 4, 3),))
    assert oa(inst).energy(3) == pytest.approx(opt_energy(inst, 3))


@pytest.mark.parametrize("algo", [avr, oa, bkp])
def test_outputs_are_feasible(algo, rng):
    for _ in range(8):
        inst = random_general(rng) if algo is not bkp else random_uniform(rng)
        assert validate_schedule(algo(inst), inst).ok


def _prefix_equal(a, b, t):
    for j, p in a.per_job.items():
        left = p.restrict(-math.inf, t)
        right = b.per_job[j].restrict(-math.inf, t)
        grid = np.unique(np.concatenate([left.breakpoints(), right.breakpoints()]))
        if grid.size > 1:
            assert np.allclose(left.values_on(grid), right.values_on(grid), atol=1e-9)


@pytest.mark.parametrize("algo", [avr, oa, bkp])
def test_online_contract(algo):
    rng = np.random.default_rng(21)
    for _ in range(4):
        w = rng.integers(1, 10, size=12).astype(float)
        t = int(rng.integers(2, 10))
        full = algo(UniformInstance(w, 4))
        # only the jobs released up to t are known at time t
        cut = algo(UniformInstance(w[: t + 1], 4))
        _prefix_equal(cut, full, t)


def test_bkp_single_job():
    inst = UniformInstance([3.0], 2)
    s = bkp(inst)
    assert s.total(0.01) >= 3.0 / 2 - 1e-12
    assert s.energy(3) >= opt_energy(inst, 3)


def test_bkp_speed_rule():
    # one job (0, 10, 5) seen at t=1: the best t2 is the deadline
    e = math.e
    got = _bkp_speed(1.0, np.array([0.0]), np.array([10.0]), np.array([5.0]), e)
    # t1 = e - 9(e - 1) < 0, so the job counts
    assert got == pytest.approx(5.0 / 9.0)


def test_bkp_idle_share_and_variants():
    inst = UniformInstance([5.0, 0.0, 0.0, 4.0], 3)
    arrived = bkp(inst)
    unfinished = bkp(inst, work="unfinished")
    assert len(arrived.idle) > 0
    assert validate_schedule(unfinished, inst).ok
    assert unfinished.energy(3) <= arrived.energy(3)
    with pytest.raises(ValueError):
        bkp(inst, work="other")


@pytest.mark.parametrize("alpha", [2.0, 3.0, 6.0])
def test_deterministic_online_pays_the_lower_bound(alpha):
    fx = lower_bound_fixture("online", alpha)
    bound = pure_online_lower_bound(alpha)
    for algo in (avr, oa):
        worst = max(
            algo(fx.instances[k]).energy(alpha) / fx.expected_opt[k] for k in ("J1", "J2")
        )
        assert worst >= bound - 1e-9


@pytest.mark.parametrize("alpha", [2.5, 3.0, 4.0, 6.0])
def test_avr_pays_at_least_the_lower_bound(alpha):
    fx = lower_bound_fixture("avr", alpha)
    ratio = avr(fx.instances["J"]).energy(alpha) / fx.expected_opt["J"]
    assert ratio >= fx.extra["ratio"] - 1e-9


@pytest.mark.parametrize("algo", [avr, oa, bkp])
def test_zero_instance(algo):
    inst = UniformInstance([0.0, 0.0], 2)
    assert algo(inst).energy(3) == 0.0
