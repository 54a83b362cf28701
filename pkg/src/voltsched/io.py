"""JSON forms of instances, schedules and predictions."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .evolving import EvolvingPrediction
from .model import GeneralInstance, Instance, Job, Schedule, UniformInstance
from .profile import SpeedProfile


def instance_to_dict(instance: Instance) -> dict:
    if isinstance(instance, UniformInstance):
        return {"kind": "uniform", "D": instance.duration, "T": instance.horizon, "w": instance.workloads.tolist()}
    return {"kind": "general", "jobs": [{"r": j.release, "d": j.deadline, "w": j.work} for j in instance.jobs]}


def instance_from_dict(d: dict) -> Instance:
    kind = d.get("kind", "uniform" if "w" in d else "general")
    if kind == "uniform":
        return UniformInstance(np.asarray(d["w"], dtype=float), float(d["D"]), d.get("T"))
    if kind == "general":
        return GeneralInstance.from_jobs(Job(float(j["r"]), float(j["d"]), float(j["w"])) for j in d["jobs"])
    raise ValueError(f"unknown instance kind {kind!r}")


def schedule_to_dict(schedule: Schedule) -> dict:
    """Per-job lists of ``[t0, t1, s0, s1]`` segments."""
    out: dict[str, Any] = {
        "jobs": [{"job": int(j), "segments": [list(s) for s in p.segments()]} for j, p in sorted(schedule.per_job.items())]
    }
    if len(schedule.idle):
        out["idle"] = [list(s) for s in schedule.idle.segments()]
    return out


def schedule_from_dict(d: dict) -> Schedule:
    per_job = {int(e["job"]): SpeedProfile.from_segments(e["segments"]) for e in d["jobs"]}
    idle = SpeedProfile.from_segments(d.get("idle", []))
    return Schedule(per_job, idle)


def _read(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _write(path: str | Path, data: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")


def load_instance(path: str | Path) -> Instance:
    data = _read(path)
    if "instances" in data:
        insts = data["instances"]
        if len(insts) != 1:
            raise ValueError(f"{path} holds {len(insts)} instances; expected one")
        data = insts[0]
    return instance_from_dict(data)


def load_instances(path: str | Path) -> list[Instance]:
    """One instance or an ``{"instances": [...]}`` list."""
    data = _read(path)
    if "instances" in data:
        return [instance_from_dict(d) for d in data["instances"]]
    return [instance_from_dict(data)]


def save_instance(path: str | Path, instance: Instance) -> None:
    _write(path, instance_to_dict(instance))


def save_instances(path: str | Path, instances: list[Instance]) -> None:
    _write(path, {"instances": [instance_to_dict(i) for i in instances]})


def load_schedule(path: str | Path) -> Schedule:
    return schedule_from_dict(_read(path))


def save_schedule(path: str | Path, schedule: Schedule, **extra: Any) -> None:
    _write(path, {**schedule_to_dict(schedule), **extra})


def load_prediction(path: str | Path) -> np.ndarray:
    """A bare array or ``{"prediction": [...]}``."""
    data = _read(path)
    if isinstance(data, dict):
        data = data["prediction"]
    return np.asarray(data, dtype=float)


def load_evolving(path: str | Path) -> EvolvingPrediction:
    """A map from integer time to workload array."""
    data = _read(path)
    return EvolvingPrediction({int(t): np.asarray(v, dtype=float) for t, v in data.items()})


def save_evolving(path: str | Path, pred: EvolvingPrediction) -> None:
    _write(path, {str(t): v.tolist() for t, v in pred.at.items()})
