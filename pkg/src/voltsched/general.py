"""Learning-augmented scheduling with arbitrary release times and deadlines.

The prediction is a full job list. The consistent part follows the optimum
for the predicted jobs on shrunk windows; General-Robustify then moves part
of every time quantum's work into the auxiliary slices of later quanta so
that the result stays within a constant factor of AVR.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import GeneralInstance, Instance, Job, Schedule, as_general, shrink_deadlines
from .offline import yds_optimal
from .profile import SpeedProfile

MAX_QUANTA = 10_000


def _rational(x: float, tol: float = 1e-9) -> Fraction:
    f = Fraction(x).limit_denominator(1_000_000)
    if abs(float(f) - x) > tol * max(1.0, abs(x)):
        raise ValueError(f"{x!r} has no small rational form; pass Delta explicitly")
    return f


def choose_quantum(instance: Instance, delta: float, max_quanta: int = MAX_QUANTA) -> float:
    """Largest quantum dividing every release, deadline and ``delta * (d - r)``."""
    jobs = as_general(instance).jobs
    vals = []
    for j in jobs:
        vals += [j.release, j.deadline, delta * j.span]
    fr = [_rational(v) for v in vals if v != 0]
    num = 0
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    for f in fr:
        num = math.gcd(num, f.numerator * (den // f.denominator))
    q = num / den
    lo = min(j.release for j in jobs)
    hi = max(j.deadline for j in jobs)
    count = (hi - lo) / q
    if count > max_quanta + 1e-9:
        raise ValueError(
            f"the common quantum {q:g} needs {count:.0f} quanta (limit {max_quanta}); "
            "round releases, deadlines or delta to a coarser grid"
        )
    return q


@dataclass(frozen=True)
class GeneralRobustifyConfig:
    delta: float
    Delta: float

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.Delta > 0:
            raise ValueError("Delta must be positive")

    def check(self, instance: Instance) -> None:
        """Require releases, deadlines and ``delta * (d - r)`` on the quantum grid."""
        for i, j in enumerate(as_general(instance).jobs):
            for name, v in (("release", j.release), ("deadline", j.deadline), ("delta*span", self.delta * j.span)):
                q = v / self.Delta
                if abs(q - round(q)) > 1e-7 * max(1.0, abs(q)):
                    raise ValueError(f"job {i}: {name} {v:g} is not a multiple of Delta={self.Delta:g}")


def quantum_work(schedule: Schedule, n_jobs: int, start: float, Delta: float, count: int) -> np.ndarray:
    """``out[j, q]``: work of job ``j`` inside quantum ``q``."""
    edges = start + Delta * np.arange(count + 1)
    out = np.zeros((n_jobs, count))
    for j, p in schedule.per_job.items():
        sup = p.support()
        if sup is None:
            continue
        lo = max(0, int(math.floor((sup[0] - start) / Delta)))
        hi = min(count, int(math.ceil((sup[1] - start) / Delta)))
        if sup[0] < start - 1e-9 or sup[1] > edges[-1] + 1e-9:
            raise ValueError(f"job {j} runs outside the quantum grid")
        cum = np.array([p.integral(-np.inf, e) for e in edges[lo : hi + 1]])
        out[j, lo:hi] = np.diff(cum)
    # rounding crumbs from endpoints a hair past a quantum edge
    scale = np.maximum(1.0, out.sum(axis=1, keepdims=True))
    out[np.abs(out) < 1e-12 * scale] = 0.0
    return np.maximum(out, 0.0)


def quantize_schedule(schedule: Schedule, instance: Instance, Delta: float) -> Schedule:
    """Replace each job's speed by its average over every quantum.

    Feasibility is kept when windows sit on the quantum grid, and energy can
    only go down.
    """
    jobs = as_general(instance).jobs
    start = min(j.release for j in jobs)
    count = int(round((max(j.deadline for j in jobs) - start) / Delta))
    work = quantum_work(schedule, len(jobs), start, Delta, count)
    edges = start + Delta * np.arange(count + 1)
    return Schedule({j: SpeedProfile.from_steps(edges, work[j] / Delta).simplify() for j in range(len(jobs))})


@dataclass(frozen=True)
class QuantumStep:
    """What General-Robustify did with one job's share of one quantum."""

    quantum: int
    job: int
    work: float
    base_length: float
    base_speed: float
    aux_speed: float
    aux_quanta: int
    aux_before: float


@dataclass(frozen=True)
class RobustifyResult:
    schedule: Schedule
    steps: tuple[QuantumStep, ...]
    aux_speed: np.ndarray
    start: float


def general_robustify_trace(
    schedule: Schedule,
    instance: Instance,
    config: GeneralRobustifyConfig,
    serialize: bool = True,
) -> RobustifyResult:
    """General-Robustify with the per-quantum bookkeeping exposed.

    ``schedule`` must be feasible for the instance with deadlines shrunk to
    ``r + (1 - delta)(d - r)``. Each quantum has a base slice of length
    ``(1 - delta) Delta`` followed by an auxiliary slice of length
    ``delta Delta``. When several jobs share a quantum they are taken in
    deadline order, each owning a share of the base slice proportional to
    its work; with ``serialize=False`` that case is rejected instead.
    """
    inst = as_general(instance)
    config.check(inst)
    delta, Delta = config.delta, config.Delta
    jobs = inst.jobs
    start = min(j.release for j in jobs)
    count = int(round((max(j.deadline for j in jobs) - start) / Delta))
    work = quantum_work(schedule, len(jobs), start, Delta, count)
    _check_windows(work, jobs, start, Delta, delta)

    aux_total = np.zeros(count)
    aux_job: dict[int, np.ndarray] = {}
    segs: dict[int, list] = {j: [] for j in range(len(jobs))}
    steps = []
    for q in range(count):
        active = np.nonzero(work[:, q] > 0)[0]
        if active.size > 1 and not serialize:
            raise ValueError(f"quantum {q} runs {active.size} jobs; expected at most one")
        total = float(work[active, q].sum())
        if total <= 0:
            continue
        s = total / Delta
        t = start + q * Delta
        for j in sorted(active.tolist(), key=lambda j: (jobs[j].deadline, j)):
            u = float(work[j, q])
            length = (1 - delta) * u / s
            span = jobs[j].span
            m = int(round(delta * span / Delta))
            before = float(aux_total[q])
            if s / (1 - delta) <= before:
                base, extra = s / (1 - delta), 0.0
            else:
                base = (u + before * delta**2 * span) / (length + delta**2 * span)
                extra = base - before
                hi = min(q + m, count)
                aux_total[q:hi] += extra
                aux_job.setdefault(j, np.zeros(count))[q:hi] += extra
            segs[j].append((t, t + length, base))
            t += length
            steps.append(QuantumStep(q, j, u, length, base, extra, m, before))
    edges = start + Delta * np.arange(count + 1)
    for j, arr in aux_job.items():
        for q in np.nonzero(arr > 0)[0]:
            a = edges[q] + (1 - delta) * Delta
            segs[j].append((a, edges[q + 1], float(arr[q])))
    per_job = {j: SpeedProfile.from_segments(s).simplify() for j, s in segs.items()}
    return RobustifyResult(Schedule(per_job), tuple(steps), aux_total, start)


def _check_windows(work: np.ndarray, jobs, start: float, Delta: float, delta: float) -> None:
    count = work.shape[1]
    lo_edge = start + Delta * np.arange(count)
    hi_edge = lo_edge + Delta
    for j, job in enumerate(jobs):
        d_short = job.release + (1 - delta) * job.span
        bad = (work[j] > 1e-12 * max(1.0, job.work)) & (
            (lo_edge < job.release - 1e-9) | (hi_edge > d_short + 1e-9)
        )
        if np.any(bad):
            raise ValueError(f"job {j} runs outside its shrunk window [{job.release:g}, {d_short:g}]")


def general_robustify(
    schedule: Schedule, instance: Instance, config: GeneralRobustifyConfig, serialize: bool = True
) -> Schedule:
    """Turn a schedule for the shrunk windows into a robust one for the real windows."""
    return general_robustify_trace(schedule, instance, config, serialize).schedule


def _key(job: Job, digits: int = 9) -> tuple[float, float, float]:
    return (round(job.release, digits), round(job.deadline, digits), round(job.work, digits))


def follow_prediction_general(
    pred: GeneralInstance,
    real: GeneralInstance,
    delta: float,
    alpha: float | None = None,
    shrink_unpredicted: bool = False,
) -> Schedule:
    """Follow the optimum of the predicted jobs on shrunk windows.

    Real jobs equal to a predicted job (same release, deadline and work,
    counted with multiplicity) copy the predicted job's plan; all other real
    jobs run at a constant rate over their window, or over the shrunk
    window when ``shrink_unpredicted`` is set. ``alpha`` is accepted for
    symmetry; the plan does not depend on it.
    """
    plan = yds_optimal(shrink_deadlines(pred, delta)) if pred.n else Schedule({})
    pool: dict[tuple, list[int]] = {}
    for i, job in enumerate(pred.jobs):
        pool.setdefault(_key(job), []).append(i)
    per_job = {}
    for j, job in enumerate(real.jobs):
        ids = pool.get(_key(job))
        if ids:
            per_job[j] = plan.per_job[ids.pop(0)]
        else:
            end = job.release + ((1 - delta) * job.span if shrink_unpredicted else job.span)
            per_job[j] = SpeedProfile.constant(job.release, end, job.work / (end - job.release))
    return Schedule(per_job)


def matched_jobs(pred: GeneralInstance, real: GeneralInstance) -> int:
    """How many real jobs appear in the prediction."""
    have = Counter(_key(j) for j in pred.jobs)
    hits = 0
    for job in real.jobs:
        if have[_key(job)]:
            have[_key(job)] -= 1
            hits += 1
    return hits


def las_general(
    pred: GeneralInstance,
    real: GeneralInstance,
    delta: float,
    Delta: float | None = None,
) -> Schedule:
    """Follow the prediction on shrunk windows, quantize, then General-Robustify."""
    if Delta is None:
        Delta = choose_quantum(real, delta)
    config = GeneralRobustifyConfig(delta, Delta)
    follow = follow_prediction_general(pred, real, delta, shrink_unpredicted=True)
    return general_robustify(quantize_schedule(follow, real, Delta), real, config)


def consistency_factor(delta: float, alpha: float) -> float:
    return (1 / (1 - delta)) ** (alpha - 1)


def robustness_factor(delta: float, alpha: float) -> float:
    return (2 * alpha / delta**2) ** alpha / 2
