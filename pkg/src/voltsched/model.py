"""Instances, schedules, feasibility checks and prediction error."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .profile import SpeedProfile, sum_profiles

DEFAULT_TOL = 1e-9


def _is_integral(x: float, tol: float = 1e-9) -> bool:
    return abs(x - round(x)) <= tol


@dataclass(frozen=True)
class Job:
    release: float
    deadline: float
    work: float

    def __post_init__(self):
        if not self.deadline > self.release:
            raise ValueError(f"deadline {self.deadline} must exceed release {self.release}")
        if self.work < 0 or not math.isfinite(self.work):
            raise ValueError("work must be finite and non-negative")

    @property
    def span(self) -> float:
        return self.deadline - self.release


@dataclass(frozen=True, eq=False)
class UniformInstance:
    """Jobs released at 0, 1, ..., each due ``duration`` after release.

    ``workloads[i]`` is the work of the job released at time ``i``; the
    horizon is ``len(workloads) - 1 + duration``.
    """

    workloads: np.ndarray
    duration: float
    horizon: float | None = None

    def __post_init__(self):
        w = np.array(self.workloads, dtype=float).reshape(-1)
        if w.size == 0:
            raise ValueError("empty workload vector")
        if np.any(w < 0) or np.any(~np.isfinite(w)):
            raise ValueError("workloads must be finite and non-negative")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        horizon = w.size - 1 + self.duration if self.horizon is None else float(self.horizon)
        if self.duration > horizon + 1e-12:
            raise ValueError("duration exceeds horizon")
        if abs(horizon - (w.size - 1 + self.duration)) > 1e-9:
            raise ValueError(
                f"horizon {horizon} inconsistent with {w.size} releases and duration {self.duration}"
            )
        w.setflags(write=False)
        object.__setattr__(self, "workloads", w)
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "horizon", float(horizon))

    @property
    def n(self) -> int:
        return int(self.workloads.size)

    @cached_property
    def jobs(self) -> tuple[Job, ...]:
        return tuple(Job(float(i), i + self.duration, float(w)) for i, w in enumerate(self.workloads))

    def to_general(self) -> "GeneralInstance":
        return GeneralInstance(self.jobs)

    def with_workloads(self, w: Sequence[float]) -> "UniformInstance":
        return UniformInstance(np.asarray(w, dtype=float), self.duration)

    def with_duration(self, duration: float) -> "UniformInstance":
        return UniformInstance(self.workloads, duration)


@dataclass(frozen=True, eq=False)
class GeneralInstance:
    """Arbitrary jobs, kept sorted by release; the job id is the list index."""

    jobs: tuple[Job, ...]

    def __post_init__(self):
        jobs = tuple(j if isinstance(j, Job) else Job(*j) for j in self.jobs)
        if any(b.release < a.release for a, b in zip(jobs, jobs[1:])):
            raise ValueError("jobs must be sorted by release; use GeneralInstance.from_jobs")
        object.__setattr__(self, "jobs", jobs)

    @classmethod
    def from_jobs(cls, jobs: Iterable) -> "GeneralInstance":
        jobs = [j if isinstance(j, Job) else Job(*j) for j in jobs]
        return cls(tuple(sorted(jobs, key=lambda j: j.release)))

    @property
    def n(self) -> int:
        return len(self.jobs)

    def to_general(self) -> "GeneralInstance":
        return self

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.array([j.release for j in self.jobs], dtype=float)
        d = np.array([j.deadline for j in self.jobs], dtype=float)
        w = np.array([j.work for j in self.jobs], dtype=float)
        return r, d, w


Instance = UniformInstance | GeneralInstance


def as_general(instance: Instance) -> GeneralInstance:
    return instance.to_general()


@dataclass(frozen=True, eq=False)
class Schedule:
    """Per-job speed profiles; the processor speed is their sum.

    ``idle`` holds speed the processor spends without any job to work on.
    Only algorithms whose speed rule ignores the backlog produce it.
    """

    per_job: Mapping[int, SpeedProfile] = field(default_factory=dict)
    idle: SpeedProfile = field(default_factory=SpeedProfile.empty)

    @cached_property
    def total(self) -> SpeedProfile:
        return sum_profiles([*self.per_job.values(), self.idle])

    def energy(self, alpha: float) -> float:
        return self.total.energy(alpha)

    def work(self, job: int) -> float:
        p = self.per_job.get(job)
        return 0.0 if p is None else p.total_work()

    def restrict(self, start: float, end: float) -> "Schedule":
        return Schedule(
            {j: p.restrict(start, end) for j, p in self.per_job.items()}, self.idle.restrict(start, end)
        )

    def scale(self, factor: float) -> "Schedule":
        return Schedule({j: p.scale(factor) for j, p in self.per_job.items()}, self.idle.scale(factor))


def energy(x: SpeedProfile | Schedule, alpha: float) -> float:
    """Exact energy of a profile or schedule."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    return x.energy(alpha)


def merge_schedules(*schedules: Schedule) -> Schedule:
    """Add the per-job profiles of several schedules."""
    acc: dict[int, list[SpeedProfile]] = {}
    for s in schedules:
        for j, p in s.per_job.items():
            acc.setdefault(j, []).append(p)
    idle = sum_profiles(s.idle for s in schedules)
    return Schedule({j: sum_profiles(ps) for j, ps in sorted(acc.items())}, idle)


# validation ------------------------------------------------------------------


@dataclass
class ValidationResult:
    ok: bool
    work_residuals: dict[int, float]
    window_violations: dict[int, tuple[float, float]]
    unknown_jobs: list[int]

    def describe(self) -> str:
        if self.ok:
            return "schedule is feasible"
        lines = []
        for j, res in sorted(self.work_residuals.items()):
            lines.append(f"job {j}: processed work off by {res:+.3e}")
        for j, (a, b) in sorted(self.window_violations.items()):
            lines.append(f"job {j}: runs on [{a:.6g}, {b:.6g}] outside its window")
        for j in self.unknown_jobs:
            lines.append(f"job {j}: not in instance")
        return "\n".join(lines)


def validate_schedule(schedule: Schedule, instance: Instance, tol: float = DEFAULT_TOL) -> ValidationResult:
    """Check that every job gets its work inside its window.

    Work residuals are compared against ``tol * max(1, w_j)``; support
    endpoints may stick out of the window by at most ``tol``.
    """
    jobs = as_general(instance).jobs
    residuals: dict[int, float] = {}
    windows: dict[int, tuple[float, float]] = {}
    unknown = sorted(j for j in schedule.per_job if not 0 <= j < len(jobs))
    for j, job in enumerate(jobs):
        p = schedule.per_job.get(j, SpeedProfile.empty())
        done = p.total_work()
        if abs(done - job.work) > tol * max(1.0, job.work):
            residuals[j] = done - job.work
        sup = p.support()
        if sup is not None and (sup[0] < job.release - tol or sup[1] > job.deadline + tol):
            windows[j] = sup
    ok = not residuals and not windows and not unknown
    return ValidationResult(ok, residuals, windows, unknown)


# EDF ---------------------------------------------------------------------------


def edf_feasible(jobs: Sequence[tuple[float, float, float]], tol: float = 1e-12) -> bool:
    """Unit-speed feasibility of ``(release, deadline, processing)`` triples.

    Checks that every window ``[t, t']`` holds the processing time of the jobs
    confined to it.
    """
    if not jobs:
        return True
    arr = np.asarray(jobs, dtype=float)
    r, d, p = arr[:, 0], arr[:, 1], arr[:, 2]
    starts = np.unique(r)
    ends = np.unique(d)
    inside = (r[None, :] >= starts[:, None]).astype(float)
    load = (inside * p[None, :]) @ (d[:, None] <= ends[None, :]).astype(float)
    room = ends[None, :] - starts[:, None]
    scale = max(1.0, float(np.max(np.abs(arr))))
    return bool(np.all(load <= np.maximum(room, 0.0) + tol * scale))


def edf_simulate(jobs: Sequence[tuple[float, float, float]]) -> list[float]:
    """Completion times of unit-speed preemptive EDF (event driven)."""
    order = sorted(range(len(jobs)), key=lambda j: (jobs[j][0], jobs[j][1]))
    done = [math.nan] * len(jobs)
    heap: list[tuple[float, int]] = []
    left = {j: float(jobs[j][2]) for j in range(len(jobs))}
    t = 0.0 if not jobs else min(j[0] for j in jobs)
    k = 0
    while k < len(order) or heap:
        if not heap:
            t = max(t, jobs[order[k]][0])
        while k < len(order) and jobs[order[k]][0] <= t:
            j = order[k]
            heapq.heappush(heap, (jobs[j][1], j))
            k += 1
        _, j = heap[0]
        next_release = jobs[order[k]][0] if k < len(order) else math.inf
        run = min(left[j], next_release - t)
        t += run
        left[j] -= run
        if left[j] <= 1e-15:
            heapq.heappop(heap)
            done[j] = t
    return done


def edf_meets_deadlines(jobs: Sequence[tuple[float, float, float]], tol: float = 1e-9) -> bool:
    done = edf_simulate(jobs)
    return all(c <= job[1] + tol for c, job in zip(done, jobs))


# shrinking -------------------------------------------------------------------


def _check_mu(mu: float, upper: float) -> None:
    if not 0 <= mu < upper:
        raise ValueError(f"mu must lie in [0, {upper})")


def shrink_deadlines(instance: Instance, mu: float) -> GeneralInstance:
    """Move each deadline to ``r + (1 - mu)(d - r)``."""
    _check_mu(mu, 1.0)
    return GeneralInstance(
        tuple(Job(j.release, j.release + (1 - mu) * j.span, j.work) for j in as_general(instance).jobs)
    )


def shrink_both(instance: Instance, mu: float) -> GeneralInstance:
    """Keep the middle ``1 - 2 mu`` fraction of each window."""
    _check_mu(mu, 0.5)
    return GeneralInstance.from_jobs(
        Job(j.release + mu * j.span, j.release + (1 - mu) * j.span, j.work) for j in as_general(instance).jobs
    )


# prediction error --------------------------------------------------------------


@dataclass(frozen=True)
class ErrorReport:
    value: float
    overflow: np.ndarray
    underflow: np.ndarray


def err(w_real: Sequence[float], w_pred: Sequence[float], alpha: float) -> ErrorReport:
    """Sum of ``|w_real - w_pred|**alpha`` with the two one-sided parts."""
    real = np.asarray(w_real, dtype=float)
    pred = np.asarray(w_pred, dtype=float)
    if real.shape != pred.shape:
        raise ValueError(f"length mismatch: {real.shape} vs {pred.shape}")
    diff = real - pred
    return ErrorReport(
        float(np.sum(np.abs(diff) ** alpha)), np.maximum(diff, 0.0), np.maximum(-diff, 0.0)
    )
