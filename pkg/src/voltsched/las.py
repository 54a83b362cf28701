"""Learning-augmented scheduling for uniform deadlines.

LAS follows the optimal plan for the predicted workloads (LAS-Trust), sends
any excess work through an average-rate stream, and then smooths every job
with a backward moving average (Robustify) to recover a worst-case bound.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .model import Schedule, UniformInstance
from .offline import normalized_plan
from .profile import SpeedProfile

DELTA_CAP = 0.49


def delta_for(epsilon: float, alpha: float) -> float:
    """Solve ``((1 + delta) / (1 - delta)) ** alpha == 1 + epsilon``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    c = (1 + epsilon) ** (1 / alpha)
    return (c - 1) / (c + 1)


@dataclass(frozen=True)
class LASConfig:
    epsilon: float
    alpha: float
    delta: float

    @classmethod
    def from_epsilon(cls, epsilon: float, alpha: float) -> "LASConfig":
        delta = delta_for(epsilon, alpha)
        if delta > DELTA_CAP:
            warnings.warn(f"delta {delta:.3f} capped at {DELTA_CAP}", stacklevel=2)
            delta = DELTA_CAP
        return cls(float(epsilon), float(alpha), delta)

    def __post_init__(self):
        if not 0 < self.delta <= DELTA_CAP:
            raise ValueError(f"delta must lie in (0, {DELTA_CAP}]")


def _check_pair(w_pred, instance: UniformInstance) -> np.ndarray:
    pred = np.asarray(w_pred, dtype=float).reshape(-1)
    if pred.size != instance.n:
        raise ValueError(f"prediction has {pred.size} entries, instance has {instance.n}")
    if np.any(pred < 0):
        raise ValueError("predicted workloads must be non-negative")
    return pred


def las_trust(w_pred, instance: UniformInstance, duration: float | None = None) -> Schedule:
    """Follow the optimal plan for ``w_pred`` and run the excess at average rate.

    ``duration`` is the deadline offset the trust schedule works with; it
    defaults to the instance duration. Job ``i`` runs at
    ``min(w_i / (b_i - a_i), c_i)`` on its planned interval ``[a_i, b_i]``
    and spreads ``max(0, w_i - w_pred_i)`` evenly over ``[i, i + duration]``.
    """
    pred = _check_pair(w_pred, instance)
    dur = instance.duration if duration is None else float(duration)
    if not 0 < dur <= instance.duration:
        raise ValueError("trust duration must lie in (0, D]")
    plan = normalized_plan(UniformInstance(pred, dur))
    per_job = {}
    for e in plan:
        real = float(instance.workloads[e.job])
        segs = []
        if e.end > e.start and real > 0:
            segs.append((e.start, e.end, min(real / (e.end - e.start), e.speed)))
        extra = max(0.0, real - pred[e.job])
        if extra > 0:
            segs.append((e.job, e.job + dur, extra / dur))
        per_job[e.job] = _stack(segs)
    return Schedule(per_job)


def _stack(segs: list[tuple[float, float, float]]) -> SpeedProfile:
    """Sum of constant pieces, which may overlap."""
    if not segs:
        return SpeedProfile.empty()
    grid = np.unique([x for a, b, _ in segs for x in (a, b)])
    speed = np.zeros(grid.size - 1)
    for a, b, s in segs:
        lo, hi = np.searchsorted(grid, a), np.searchsorted(grid, b)
        speed[lo:hi] += s
    return SpeedProfile.from_steps(grid, speed).simplify()


def window_average(profile: SpeedProfile, width: float) -> SpeedProfile:
    """Backward moving average ``(1/width) * integral of p over [t - width, t]``.

    The input must be piecewise constant, so the output is piecewise linear
    with breakpoints at the input breakpoints and their shifts by ``width``.
    """
    if width <= 0:
        raise ValueError("window width must be positive")
    if not len(profile):
        return profile
    if not profile.is_piecewise_constant():
        raise ValueError("window_average needs a piecewise-constant profile")
    bp = profile.breakpoints()
    pts = np.unique(np.concatenate([bp, bp + width]))
    # cumulative work at arbitrary points, exact for piecewise-constant input
    seg_work = (profile.t1 - profile.t0) * profile.s0
    cum_end = np.cumsum(seg_work)

    def cumulative(x):
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(profile.t0, x, side="right") - 1
        kc = np.clip(k, 0, len(profile) - 1)
        before = np.where(kc > 0, cum_end[kc - 1], 0.0)
        within = np.clip(x - profile.t0[kc], 0.0, profile.t1[kc] - profile.t0[kc]) * profile.s0[kc]
        return np.where(k >= 0, before + within, 0.0)

    vals = (cumulative(pts) - cumulative(pts - width)) / width
    scale = max(1.0, float(np.max(np.abs(vals))))
    vals = np.where(np.abs(vals) < 1e-13 * scale, 0.0, vals)
    return SpeedProfile(pts[:-1], pts[1:], vals[:-1], vals[1:]).simplify()


def robustify(schedule: Schedule, delta: float, duration: float) -> Schedule:
    """Smooth each job with a backward window of length ``delta * duration``.

    A schedule feasible for deadlines ``r + (1 - delta) D`` becomes feasible
    for ``r + D``, keeps or lowers its energy, and no job runs faster than
    its average-rate speed divided by ``delta``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    width = delta * duration
    per_job = {j: window_average(p, width) for j, p in schedule.per_job.items()}
    return Schedule(per_job)


def las(w_pred, instance: UniformInstance, config: LASConfig) -> Schedule:
    """Trust schedule on shrunk windows, then Robustify."""
    d_eff = (1 - config.delta) * instance.duration
    trust = las_trust(w_pred, instance, d_eff)
    return robustify(trust, config.delta, instance.duration)


def robustness_bound(config: LASConfig) -> float:
    """Energy cap relative to the optimum that holds for any prediction."""
    return (2 / config.delta) ** config.alpha * 2**config.alpha


def smoothness_bound(config: LASConfig, opt: float, error: float) -> float:
    """Energy cap in terms of the optimum and the prediction error."""
    d = config.epsilon
    a = config.alpha
    return (1 + d) ** (2 * a) * (1 + config.epsilon) * opt + (12 / d) ** a * 2**a * error


def consistency_bound(config: LASConfig) -> float:
    return 1 + config.epsilon


def pure_online_lower_bound(alpha: float) -> float:
    """Lower bound on the ratio of any deterministic online algorithm."""
    c = 3 / (3 ** (1 / alpha) * 4 ** (1 - 1 / alpha) + 1)
    return 2 ** (alpha - 1) * c**alpha

