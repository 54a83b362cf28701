"""Classical online algorithms: AVR, OA and BKP."""

from __future__ import annotations

import math

import numpy as np

from .model import GeneralInstance, Instance, Job, Schedule, as_general
from .offline import yds_optimal
from .profile import SpeedProfile


def avr(instance: Instance) -> Schedule:
    """Average Rate: each job runs at its density across its whole window."""
    return Schedule(
        {
            j: SpeedProfile.constant(job.release, job.deadline, job.work / job.span)
            for j, job in enumerate(as_general(instance).jobs)
        }
    )


def oa(instance: Instance) -> Schedule:
    """Optimal Available: at each release, follow the optimum for the work known so far."""
    jobs = as_general(instance).jobs
    remaining = np.array([j.work for j in jobs], dtype=float)
    segs: dict[int, list] = {j: [] for j in range(len(jobs))}
    times = sorted({j.release for j in jobs})
    for k, t in enumerate(times):
        t_next = times[k + 1] if k + 1 < len(times) else math.inf
        ids = [
            j
            for j, job in enumerate(jobs)
            if job.release <= t and remaining[j] > 1e-12 * max(1.0, job.work) and job.deadline > t
        ]
        if not ids:
            continue
        residual = GeneralInstance(tuple(Job(t, jobs[j].deadline, remaining[j]) for j in ids))
        plan = yds_optimal(residual)
        for local, j in enumerate(ids):
            p = plan.per_job[local].restrict(t, t_next)
            segs[j].extend(p.segments())
            remaining[j] -= p.total_work()
    return Schedule({j: SpeedProfile.from_segments(s).simplify() for j, s in segs.items()})


def _bkp_speed(m, r, d, amount, e):
    """``max over t2 of w(m, e m - (e-1) t2, t2) / (t2 - m)`` for the arrived jobs."""
    cand = np.concatenate([d[d > m], (e * m - r) / (e - 1)])
    cand = cand[cand > m]
    if cand.size == 0:
        return 0.0
    t1 = e * m - (e - 1) * cand
    inside = (r[None, :] >= t1[:, None] - 1e-12) & (d[None, :] <= cand[:, None] + 1e-12)
    load = inside.astype(float) @ amount
    return float(np.max(load / (cand - m)))


def bkp(instance: Instance, step: float | None = None, work: str = "arrived") -> Schedule:
    """Bansal-Kimbrel-Pruhs, simulated on a fine time grid.

    At time t the speed is ``max over t2 > t`` of ``w(t, t1, t2) / (t2 - t)``
    with ``t1 = e t - (e - 1) t2``, where ``w`` sums the work of arrived jobs
    with release at least ``t1`` and deadline at most ``t2``. ``work``
    selects whether the total (``"arrived"``) or the still unfinished
    (``"unfinished"``) work enters that sum. Jobs run EDF. The processor
    keeps this speed even when no work is pending; that share goes to
    ``Schedule.idle``.

    The speed is evaluated at each grid cell's midpoint and held for the
    cell. To absorb the discretization error, the speed never drops below
    the least constant speed that still meets every pending deadline, which
    the exact continuous rule already satisfies.
    """
    if work not in ("arrived", "unfinished"):
        raise ValueError("work must be 'arrived' or 'unfinished'")
    r, d, w = as_general(instance).arrays()
    n = w.size
    e = math.e
    if step is None:
        step = float(np.min(d - r)) / 40.0
    events = np.unique(np.concatenate([r, d]))
    grid = [events[0]]
    for a, b in zip(events[:-1], events[1:]):
        k = max(1, int(math.ceil((b - a) / step - 1e-9)))
        grid.extend(np.linspace(a, b, k + 1)[1:].tolist())
    remaining = w.copy()
    segs: dict[int, list] = {j: [] for j in range(n)}
    idle = []
    for a, b in zip(grid[:-1], grid[1:]):
        arrived = r <= a
        if not np.any(arrived):
            continue
        live = arrived & (remaining > 1e-12 * np.maximum(1.0, w))
        m = 0.5 * (a + b)
        amount = (w if work == "arrived" else remaining)[arrived]
        speed = _bkp_speed(m, r[arrived], d[arrived], amount, e)
        # least speed keeping EDF feasible from a
        dl = d[live]
        order = np.argsort(dl, kind="stable")
        if dl.size:
            need = np.cumsum(remaining[live][order]) / np.maximum(dl[order] - a, 1e-300)
            speed = max(speed, float(need.max()))
        if speed <= 0:
            continue
        budget = speed * (b - a)
        t = a
        for j in np.nonzero(live)[0][order]:
            if budget <= 0:
                break
            amt = min(remaining[j], budget)
            dt = amt / speed
            segs[j].append((t, min(t + dt, b), speed))
            remaining[j] -= amt
            budget -= amt
            t += dt
        if b - t > 1e-12 * max(1.0, abs(b)):
            idle.append((t, b, speed))
    return Schedule(
        {j: SpeedProfile.from_segments(s).simplify() for j, s in segs.items()},
        SpeedProfile.from_segments(idle).simplify(),
    )
