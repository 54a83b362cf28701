import json

import numpy as np
import pytest

from conftest import random_general
from voltsched import io
from voltsched.evolving import EvolvingPrediction
from voltsched.model import GeneralInstance, Job, UniformInstance, validate_schedule
from voltsched.offline import yds_optimal
from voltsched.online import bkp


def test_uniform_instance_round_trip(tmp_path):
    inst = UniformInstance([1.5, 0.0, 2.25], 4)
    io.save_instance(tmp_path / "u.json", inst)
    data = json.loads((tmp_path / "u.json").read_text())
    assert data == {"kind": "uniform", "D": 4.0, "T": 6.0, "w": [1.5, 0.0, 2.25]}
    back = io.load_instance(tmp_path / "u.json")
    assert np.array_equal(back.workloads, inst.workloads) and back.duration == 4


def test_general_instance_round_trip(tmp_path, rng):
    inst = random_general(rng, n=6)
    io.save_instance(tmp_path / "g.json", inst)
    assert io.load_instance(tmp_path / "g.json").jobs == inst.jobs


def test_instance_lists(tmp_path):
    insts = [UniformInstance([1.0], 2), GeneralInstance((Job(0, 1, 2),))]
    io.save_instances(tmp_path / "many.json", insts)
    back = io.load_instances(tmp_path / "many.json")
    assert back[1].jobs == insts[1].jobs
    with pytest.raises(ValueError):
        io.load_instance(tmp_path / "many.json")
    with pytest.raises(ValueError):
        io.instance_from_dict({"kind": "weird"})


@pytest.mark.parametrize("make", [yds_optimal, bkp])
def test_schedule_round_trip(tmp_path, make):
    inst = UniformInstance([3.0, 1.0, 4.0, 1.0, 5.0], 3)
    sched = make(inst)
    io.save_schedule(tmp_path / "s.json", sched, meta={"note": "x"})
    back = io.load_schedule(tmp_path / "s.json")
    assert back.energy(3) == pytest.approx(sched.energy(3), rel=1e-12)
    for j, p in sched.per_job.items():
        grid = np.linspace(0, inst.horizon, 301)
        assert np.allclose(back.per_job[j](grid), p(grid), atol=1e-12)
    assert len(back.idle) == len(sched.idle)
    assert validate_schedule(back, inst).ok


def test_prediction_files(tmp_path):
    (tmp_path / "a.json").write_text("[1, 2, 3]")
    (tmp_path / "b.json").write_text('{"prediction": [4, 5]}')
    assert io.load_prediction(tmp_path / "a.json").tolist() == [1, 2, 3]
    assert io.load_prediction(tmp_path / "b.json").tolist() == [4, 5]


def test_evolving_round_trip(tmp_path):
    pred = EvolvingPrediction({0: [1.0, 2.0], 1: [1.5, 2.5]})
    io.save_evolving(tmp_path / "e.json", pred)
    back = io.load_evolving(tmp_path / "e.json")
    assert back.vector(1).tolist() == [1.5, 2.5] and back.vector(0).tolist() == [1.0, 2.0]
