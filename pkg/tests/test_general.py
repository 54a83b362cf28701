import numpy as np
import pytest

from conftest import random_general
from voltsched.general import (
    GeneralRobustifyConfig,
    choose_quantum,
    consistency_factor,
    follow_prediction_general,
    general_robustify,
    general_robustify_trace,
    las_general,
    matched_jobs,
    quantize_schedule,
    quantum_work,
    robustness_factor,
)
from voltsched.model import GeneralInstance, Job, Schedule, shrink_deadlines, validate_schedule
from voltsched.offline import opt_energy, yds_optimal
from voltsched.online import avr
from voltsched.profile import SpeedProfile


def _figure_case():
    # blue, red and green occupy quanta 0, 1 and 2; their aux reach is 3, 4 and 2 quanta
    inst = GeneralInstance((Job(0, 12, 4.0), Job(1, 17, 6.0), Job(2, 10, 0.5)))
    sched = Schedule(
        {
            0: SpeedProfile.constant(0, 1, 4.0),
            1: SpeedProfile.constant(1, 2, 6.0),
            2: SpeedProfile.constant(2, 3, 0.5),
        }
    )
    return inst, sched, GeneralRobustifyConfig(0.25, 1.0)


def test_figure_example():
    inst, sched, cfg = _figure_case()
    res = general_robustify_trace(sched, inst, cfg)
    blue, red, green = res.steps
    assert blue.base_speed == pytest.approx(8 / 3) and blue.aux_quanta == 3
    assert red.aux_before == pytest.approx(8 / 3)
    assert red.base_speed == pytest.approx(104 / 21)
    assert red.aux_speed == pytest.approx(104 / 21 - 8 / 3) and red.aux_quanta == 4
    # green fits under the aux level already there
    assert green.base_speed == pytest.approx(0.5 / 0.75) and green.aux_speed == 0
    assert res.aux_speed[:6] == pytest.approx([8 / 3, 104 / 21, 104 / 21, 48 / 21, 48 / 21, 0])
    assert validate_schedule(res.schedule, inst).ok
    for j in range(3):
        assert res.schedule.work(j) == pytest.approx(inst.jobs[j].work)


def test_zero_input():
    inst = GeneralInstance((Job(0, 4, 0.0),))
    out = general_robustify(Schedule({0: SpeedProfile.empty()}), inst, GeneralRobustifyConfig(0.25, 1.0))
    assert out.energy(2) == 0


@pytest.mark.parametrize("s", [1e-6, 0.3, 5.0])
def test_single_quantum_identity(s):
    delta, Delta, D = 0.25, 1.0, 8.0
    inst = GeneralInstance((Job(0, D, s * Delta),))
    res = general_robustify_trace(Schedule({0: SpeedProfile.constant(0, Delta, s)}), inst, GeneralRobustifyConfig(delta, Delta))
    (step,) = res.steps
    assert step.base_speed == pytest.approx(s * Delta / ((1 - delta) * Delta + delta**2 * D))
    base = (1 - delta) * Delta * step.base_speed
    aux = step.aux_speed * delta * Delta * step.aux_quanta
    assert base + aux == pytest.approx(s * Delta, rel=1e-12)


def _robust_cases(count, delta=0.25):
    rng = np.random.default_rng(17)
    for _ in range(count):
        inst = random_general(rng, n=int(rng.integers(1, 7)), horizon=12.0, integral=True)
        Delta = choose_quantum(inst, delta)
        plan = quantize_schedule(yds_optimal(shrink_deadlines(inst, delta)), inst, Delta)
        yield inst, plan, GeneralRobustifyConfig(delta, Delta)


def test_conservation_feasibility_consistency():
    for inst, plan, cfg in _robust_cases(40):
        res = general_robustify_trace(plan, inst, cfg)
        for st in res.steps:
            base = st.base_length * st.base_speed
            aux = st.aux_speed * cfg.delta * cfg.Delta * st.aux_quanta
            assert base + aux == pytest.approx(st.work, rel=1e-9, abs=1e-12)
        assert validate_schedule(res.schedule, inst, tol=1e-7).ok
        for alpha in (2.0, 3.0):
            limit = consistency_factor(cfg.delta, alpha) * plan.energy(alpha)
            assert res.schedule.energy(alpha) <= limit + 1e-9


def test_aux_speed_tracks_avr():
    for inst, plan, cfg in _robust_cases(30):
        res = general_robustify_trace(plan, inst, cfg)
        ref = avr(inst)
        mids = res.start + cfg.Delta * (np.arange(res.aux_speed.size) + 0.5)
        assert np.all(res.aux_speed <= ref.total(mids) / cfg.delta**2 + 1e-9)


def test_robustness_on_bad_predictions():
    rng = np.random.default_rng(3)
    for _ in range(20):
        real = random_general(rng, n=5, horizon=12.0, integral=True)
        pred = random_general(rng, n=5, horizon=12.0, integral=True)
        out = las_general(pred, real, 0.25)
        assert validate_schedule(out, real, tol=1e-7).ok
        assert out.energy(3) <= robustness_factor(0.25, 3) * opt_energy(real, 3)


def test_refining_the_quantum_barely_moves_energy():
    inst = GeneralInstance.from_jobs([Job(0, 8, 6.0), Job(2, 10, 3.0), Job(4, 12, 5.0)])
    delta = 0.25
    energies = []
    for Delta in (0.5, 0.25):
        plan = quantize_schedule(yds_optimal(shrink_deadlines(inst, delta)), inst, Delta)
        energies.append(general_robustify(plan, inst, GeneralRobustifyConfig(delta, Delta)).energy(2))
    assert abs(energies[0] - energies[1]) < 0.01 * energies[0]


def test_shared_quantum_needs_serialization():
    inst = GeneralInstance((Job(0, 4, 1.0), Job(0, 4, 1.0)))
    both = Schedule({0: SpeedProfile.constant(0, 1, 1.0), 1: SpeedProfile.constant(0, 1, 1.0)})
    cfg = GeneralRobustifyConfig(0.25, 1.0)
    with pytest.raises(ValueError):
        general_robustify(both, inst, cfg, serialize=False)
    out = general_robustify(both, inst, cfg)
    assert validate_schedule(out, inst).ok


def test_input_outside_shrunk_window_is_rejected():
    inst = GeneralInstance((Job(0, 4, 1.0),))
    late = Schedule({0: SpeedProfile.constant(3, 4, 1.0)})
    with pytest.raises(ValueError):
        general_robustify(late, inst, GeneralRobustifyConfig(0.25, 1.0))


def test_quantum_choice():
    inst = GeneralInstance((Job(0, 4, 1.0), Job(1.5, 9.5, 2.0)))
    assert choose_quantum(inst, 0.25) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        choose_quantum(GeneralInstance((Job(0, 1, 1.0), Job(0.001, 20, 1.0))), 0.25)
    with pytest.raises(ValueError):
        GeneralRobustifyConfig(0.25, 0.3).check(inst)


def test_quantum_work_sums_rows():
    p = SpeedProfile.from_segments([(0.5, 2.5, 1.0, 3.0)])
    w = quantum_work(Schedule({0: p}), 1, 0.0, 1.0, 3)
    assert w.sum() == pytest.approx(p.total_work())
    assert w[0, 0] == pytest.approx(p.integral(0, 1))


def test_follow_perfect_prediction():
    rng = np.random.default_rng(9)
    for _ in range(10):
        inst = random_general(rng, n=5)
        out = follow_prediction_general(inst, inst, 0.2)
        assert validate_schedule(out, inst).ok
        assert out.energy(3) == pytest.approx(opt_energy(shrink_deadlines(inst, 0.2), 3))
        assert out.energy(3) <= consistency_factor(0.2, 3) * opt_energy(inst, 3) * (1 + 1e-9)


def test_follow_wrong_prediction_is_avr():
    real = GeneralInstance((Job(0, 3, 2.0), Job(1, 5, 1.0)))
    pred = GeneralInstance((Job(0, 2, 7.0),))
    assert matched_jobs(pred, real) == 0
    assert follow_prediction_general(pred, real, 0.2).energy(2) == pytest.approx(avr(real).energy(2))


def test_follow_with_one_extra_job():
    pred = GeneralInstance((Job(0, 4, 2.0), Job(1, 3, 2.0)))
    real = GeneralInstance.from_jobs(list(pred.jobs) + [Job(2, 6, 4.0)])
    out = follow_prediction_general(pred, real, 0.25)
    base = yds_optimal(shrink_deadlines(pred, 0.25))
    extra = next(j for j, job in enumerate(real.jobs) if job == Job(2, 6, 4.0))
    assert out.per_job[extra].segments() == [(2.0, 6.0, 1.0, 1.0)]
    known = sorted(out.per_job[j].energy(2) for j in range(real.n) if j != extra)
    assert known == pytest.approx(sorted(base.per_job[j].energy(2) for j in range(pred.n)))
