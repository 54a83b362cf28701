"""Offline optimum: YDS, its normalized form, and a convex brute-force oracle."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .model import GeneralInstance, Instance, Schedule, UniformInstance, as_general
from .profile import SpeedProfile

_TIE = 1e-12


class _Contraction:
    """Original time with a union of removed intervals squeezed out."""

    def __init__(self):
        self.removed: list[tuple[float, float]] = []

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.array(x, dtype=float)
        for a, b in self.removed:
            out -= np.clip(x - a, 0.0, b - a)
        return out

    def _lift(self, y: float, inclusive: bool) -> float:
        x = y
        gone = 0.0
        for a, b in self.removed:
            fa = a - gone
            tol = _TIE * max(1.0, abs(fa))
            if fa < y - tol or (inclusive and fa <= y + tol):
                x += b - a
            gone += b - a
        return x

    def preimage(self, u: float, v: float) -> list[tuple[float, float]]:
        """Free original pieces mapping onto the contracted interval [u, v]."""
        lo, hi = self._lift(u, True), self._lift(v, False)
        pieces = []
        cur = lo
        for a, b in self.removed:
            if b <= cur or a >= hi:
                continue
            if a > cur:
                pieces.append((cur, a))
            cur = max(cur, b)
        if hi > cur:
            pieces.append((cur, hi))
        return pieces

    def remove(self, u: float, v: float) -> tuple[float, float]:
        lo, hi = self._lift(u, False), self._lift(v, True)
        merged = []
        for a, b in self.removed:
            if b < lo or a > hi:
                merged.append((a, b))
            else:
                lo, hi = min(lo, a), max(hi, b)
        merged.append((lo, hi))
        merged.sort()
        self.removed = merged
        return lo, hi


@dataclass(frozen=True)
class Phase:
    """One critical interval: its speed, jobs and the original time it covers."""

    speed: float
    jobs: tuple[int, ...]
    span: tuple[float, float]


@dataclass(frozen=True)
class YDSResult:
    schedule: Schedule
    phases: tuple[Phase, ...]


def _edf_pieces(ids, rel, dl, work, start, speed):
    """Constant-speed EDF from ``start``; returns (job, u, v) pieces."""
    order = sorted(range(len(ids)), key=lambda k: (rel[k], dl[k], ids[k]))
    heap: list = []
    left = [w / speed for w in work]
    pieces = []
    t = start
    k = 0
    while k < len(order) or heap:
        if not heap:
            t = max(t, rel[order[k]])
        while k < len(order) and rel[order[k]] <= t:
            q = order[k]
            heapq.heappush(heap, (dl[q], rel[q], ids[q], q))
            k += 1
        q = heap[0][3]
        nxt = rel[order[k]] if k < len(order) else np.inf
        run = min(left[q], nxt - t)
        if run > 0:
            pieces.append((ids[q], t, t + run))
        t += run
        left[q] -= run
        if left[q] <= 1e-15 * max(1.0, t):
            heapq.heappop(heap)
    return pieces


def _snap(t: float, anchors: np.ndarray) -> float:
    """Pull an EDF piece endpoint onto a nearby release, deadline or interval edge."""
    k = int(np.argmin(np.abs(anchors - t)))
    a = float(anchors[k])
    return a if abs(a - t) <= 1e-9 * max(1.0, abs(a)) else t


def yds(instance: Instance) -> YDSResult:
    """Energy-optimal schedule by repeated extraction of the densest interval.

    Ties between intervals of equal density go to the earliest left endpoint,
    then the shortest interval. Jobs inside a critical interval run EDF at
    the interval's density.
    """
    r, d, w = as_general(instance).arrays()
    n = w.size
    pending = w > 0
    segs: dict[int, list[tuple[float, float, float]]] = {j: [] for j in range(n)}
    phases = []
    contraction = _Contraction()
    while np.any(pending):
        idx = np.nonzero(pending)[0]
        fr = contraction.forward(r[idx])
        fd = contraction.forward(d[idx])
        lefts, li = np.unique(fr, return_inverse=True)
        rights, ri = np.unique(fd, return_inverse=True)
        load = np.zeros((lefts.size, rights.size))
        np.add.at(load, (li, ri), w[idx])
        load = np.cumsum(load[::-1], axis=0)[::-1]
        load = np.cumsum(load, axis=1)
        length = rights[None, :] - lefts[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            dens = np.where(length > 0, load / np.where(length > 0, length, 1.0), -np.inf)
        best = dens.max()
        if not best > 0:
            raise RuntimeError("no positive-density interval left; instance is degenerate")
        rows, cols = np.nonzero(dens >= best * (1 - _TIE))
        pick = min(zip(rows, cols), key=lambda rc: (lefts[rc[0]], length[rc]))
        x, y = lefts[pick[0]], rights[pick[1]]
        inside = (fr >= x) & (fd <= y)
        crit = idx[inside]
        pieces = _edf_pieces(
            crit.tolist(), fr[inside].tolist(), fd[inside].tolist(), w[crit].tolist(), x, best
        )
        anchors = np.unique(np.concatenate([[x, y], fr[inside], fd[inside]]))
        for j, u, v in pieces:
            u, v = _snap(u, anchors), _snap(v, anchors)
            for a, b in contraction.preimage(u, v):
                segs[j].append((a, b, best))
        span = contraction.remove(x, y)
        phases.append(Phase(float(best), tuple(int(j) for j in crit), span))
        pending[crit] = False
    per_job = {j: SpeedProfile.from_segments(s).simplify() for j, s in segs.items()}
    return YDSResult(Schedule(per_job), tuple(phases))


def yds_optimal(instance: Instance) -> Schedule:
    return yds(instance).schedule


def opt_energy(instance: Instance, alpha: float) -> float:
    return yds_optimal(instance).energy(alpha)


@dataclass(frozen=True)
class PlanEntry:
    job: int
    start: float
    end: float
    speed: float


def normalized_plan(instance: UniformInstance, alpha: float | None = None) -> list[PlanEntry]:
    """Optimal schedule written as one constant-speed interval per job.

    With equal windows, FIFO inside each critical interval never preempts and
    no critical interval fits strictly inside a window, so each job runs in a
    single contiguous stretch. Zero-work jobs get an empty entry at their
    release. ``alpha`` is accepted for symmetry; the optimum does not depend
    on it.
    """
    if not isinstance(instance, UniformInstance):
        raise TypeError("normalized_plan needs a uniform-deadline instance")
    sched = yds_optimal(instance)
    plan = []
    for j in range(instance.n):
        p = sched.per_job[j]
        w = instance.workloads[j]
        if w == 0 or not len(p):
            plan.append(PlanEntry(j, float(j), float(j), 0.0))
            continue
        a, b = float(p.t0[0]), float(p.t1[-1])
        speed = float(p.s0[0])
        if len(p) > 1 or abs(speed * (b - a) - w) > 1e-9 * max(1.0, w):
            raise AssertionError(f"job {j} is not processed in one constant stretch")
        plan.append(PlanEntry(j, a, b, speed))
    return plan


def plan_schedule(plan: list[PlanEntry]) -> Schedule:
    return Schedule({e.job: SpeedProfile.constant(e.start, e.end, e.speed) for e in plan})


# brute-force oracle ------------------------------------------------------------


def _project_rows(v: np.ndarray, mask: np.ndarray, total: np.ndarray) -> np.ndarray:
    """Euclidean projection of each row onto ``{x >= 0, sum x = total, x = 0 off mask}``."""
    big = np.where(mask, v, -np.inf)
    srt = -np.sort(-big, axis=1)
    srt = np.where(np.isfinite(srt), srt, 0.0)
    csum = np.cumsum(srt, axis=1) - total[:, None]
    k = np.arange(1, v.shape[1] + 1)
    count = mask.sum(axis=1)
    cond = (srt - csum / k > 0) & (k <= count[:, None])
    rho = np.maximum(cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1), 0)
    theta = csum[np.arange(v.shape[0]), rho] / (rho + 1)
    out = np.where(mask, np.maximum(v - theta[:, None], 0.0), 0.0)
    out[total <= 0] = 0.0
    return out


def brute_force_opt(
    instance: Instance,
    alpha: float,
    grid_n: int = 64,
    max_iter: int = 100_000,
    rtol: float = 1e-7,
) -> float:
    """Convex-programming upper bound on the optimal energy.

    Time is cut into ``grid_n`` equal slots, refined by every release and
    deadline, and each job spreads its work over the slots inside its
    window. The slot speeds are found by accelerated projected gradient,
    stopped once the Frank-Wolfe gap certifies ``rtol`` relative accuracy.
    """
    if grid_n < 1:
        raise ValueError("grid_n must be positive")
    r, d, w = as_general(instance).arrays()
    live = w > 0
    if not np.any(live):
        return 0.0
    r, d, w = r[live], d[live], w[live]
    grid = np.unique(np.concatenate([np.linspace(r.min(), d.max(), grid_n + 1), r, d]))
    lo, hi = grid[:-1], grid[1:]
    slot = hi - lo
    mask = (lo[None, :] >= r[:, None] - 1e-12) & (hi[None, :] <= d[:, None] + 1e-12)
    x = np.where(mask, slot[None, :], 0.0)
    x *= (w / x.sum(axis=1))[:, None]

    def value(z):
        s = np.maximum(z.sum(axis=0), 0.0) / slot
        return float(np.sum(slot * s**alpha))

    def grad(z):
        s = np.maximum(z.sum(axis=0), 0.0) / slot
        g = alpha * s ** (alpha - 1)
        return np.broadcast_to(g, z.shape)

    step = 1.0 / max(1e-12, alpha * (alpha - 1) * (w.sum() / slot.min()) ** max(alpha - 2, 0) / slot.min())
    y, t_k = x.copy(), 1.0
    fx = value(x)
    for it in range(max_iter):
        if it % 25 == 0:
            g = grad(x)
            gap = float(np.sum(g * x) - np.sum(w * np.where(mask, g, np.inf).min(axis=1)))
            if gap <= rtol * fx:
                break
        gy = grad(y)
        fy = value(y)
        while True:
            cand = _project_rows(y - step * gy, mask, w)
            diff = cand - y
            if value(cand) <= fy + np.sum(gy * diff) + np.sum(diff**2) / (2 * step) + 1e-15 * abs(fy):
                break
            step *= 0.5
            if step < 1e-300:
                raise FloatingPointError("line search failed")
        f_cand = value(cand)
        if f_cand > fx * (1 + 1e-14):
            # restart momentum when the objective goes up; a failed restart
            # means rounding noise, so shrink the step
            if t_k == 1.0:
                step *= 0.5
                if step < 1e-30:
                    break
            y, t_k = x.copy(), 1.0
            continue
        t_next = 0.5 * (1 + np.sqrt(1 + 4 * t_k**2))
        y = cand + ((t_k - 1) / t_next) * (cand - x)
        x, fx, t_k = cand, f_cand, t_next
        step *= 1.1
    return fx
