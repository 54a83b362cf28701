"""Shift-tolerant prediction error and the noise-robust wrapper (NRA)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import Schedule, UniformInstance
from .offline import _project_rows
from .profile import SpeedProfile, sum_profiles

InnerAlgorithm = Callable[[np.ndarray, UniformInstance], Schedule]


def shift_steps(eta: float, duration: float) -> int:
    """``eta * D`` as an integer number of slots, rounded down with a warning."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    raw = eta * duration
    k = int(math.floor(raw + 1e-9))
    if abs(raw - k) > 1e-9:
        warnings.warn(f"eta*D = {raw:g} is not integral; using {k}", stacklevel=3)
    return k


class ConvergenceError(RuntimeError):
    pass


def _greedy_plan(real_ext: np.ndarray, pred: np.ndarray, k: int) -> np.ndarray:
    """Warm start: send predicted mass left to right into unmet real demand."""
    n = pred.size
    x = np.zeros((n, 2 * k + 1))
    need = real_ext.copy()
    for i in range(n):
        left = pred[i]
        for o in range(2 * k + 1):
            take = min(left, max(need[i + o], 0.0))
            x[i, o] += take
            need[i + o] -= take
            left -= take
        x[i, k] += left
    return x


def err_eta(
    w_real,
    w_pred,
    eta: float,
    duration: float,
    alpha: float,
    max_iter: int = 100_000,
    tol: float = 1e-6,
) -> float:
    """Smallest ``sum |w_real - w|**alpha`` over ``w`` reachable from ``w_pred``.

    ``w`` may move predicted mass by at most ``eta * D`` slots; both vectors
    are zero outside their range. Solved by accelerated projected gradient
    over the transport plan, stopped by a Frank-Wolfe gap certificate.
    """
    real = np.asarray(w_real, dtype=float)
    pred = np.asarray(w_pred, dtype=float)
    if real.shape != pred.shape:
        raise ValueError("length mismatch")
    k = shift_steps(eta, duration)
    if k == 0:
        return float(np.sum(np.abs(real - pred) ** alpha))
    n = pred.size
    real_ext = np.concatenate([np.zeros(k), real, np.zeros(k)])
    rows = np.arange(n)[:, None] + np.arange(2 * k + 1)[None, :]
    mask = np.ones((n, 2 * k + 1), dtype=bool)

    def columns(x):
        col = np.zeros(n + 2 * k)
        np.add.at(col, rows, x)
        return col

    def value(x):
        return float(np.sum(np.abs(columns(x) - real_ext) ** alpha))

    def grad(x):
        diff = columns(x) - real_ext
        g = alpha * np.abs(diff) ** (alpha - 1) * np.sign(diff)
        return g[rows]

    x = _greedy_plan(real_ext, pred, k)
    fx = value(x)
    scale = max(1.0, float(np.sum(real**alpha) + np.sum(pred**alpha)))
    if fx <= 1e-15 * scale:
        return 0.0
    step = 1.0 / (alpha * max(1.0, float(np.max(real_ext)) + float(np.max(pred))) ** max(alpha - 2, 0) * (2 * k + 1))
    y, t_k = x.copy(), 1.0
    for it in range(max_iter):
        if it % 20 == 0:
            g = grad(x)
            gap = float(np.sum(g * x) - np.sum(pred * g.min(axis=1)))
            if gap <= tol * fx or gap <= 1e-11 * scale:
                return fx
        gy = grad(y)
        fy = value(y)
        while True:
            cand = _project_rows(y - step * gy, mask, pred)
            diff = cand - y
            if value(cand) <= fy + np.sum(gy * diff) + np.sum(diff**2) / (2 * step) + 1e-14 * abs(fy):
                break
            step *= 0.5
            if step < 1e-300:
                raise ConvergenceError("line search collapsed")
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
        t_next = 0.5 * (1 + math.sqrt(1 + 4 * t_k**2))
        y = cand + ((t_k - 1) / t_next) * (cand - x)
        x, fx, t_k = cand, f_cand, t_next
        step *= 1.1
    else:
        raise ConvergenceError(f"err_eta did not converge in {max_iter} iterations")
    return fx


# wrapper -----------------------------------------------------------------------


@dataclass(frozen=True)
class NRAConfig:
    eta: float
    zeta: float

    def __post_init__(self):
        if not 0 <= self.eta < 0.5:
            raise ValueError("eta must lie in [0, 1/2)")
        if self.zeta < 0:
            raise ValueError("zeta must be non-negative")


@dataclass(frozen=True)
class OnlineAssignment:
    """Result of routing real work into predicted slots.

    ``w_online[s + shift]`` is the load of slot ``s`` for
    ``s in [-shift, n - 1 + shift]``; ``moves[i]`` lists ``(slot, amount)``
    for the real work released at ``i``.
    """

    w_online: np.ndarray
    shift: int
    moves: tuple[tuple[tuple[int, float], ...], ...]


def assign_online(w_real, w_pred, shift: int, zeta: float) -> OnlineAssignment:
    """Greedy left-to-right fill under capacity ``(1 + zeta) w_pred``.

    Work that does not fit is spread evenly over the ``2 * shift + 1`` slots
    around its release. The assignment is made before the remaining amount
    is cleared, which is the evident intent of the fill step.
    """
    real = np.asarray(w_real, dtype=float)
    pred = np.asarray(w_pred, dtype=float)
    if real.shape != pred.shape:
        raise ValueError("length mismatch")
    n = real.size
    cap = np.concatenate([np.zeros(shift), (1 + zeta) * pred, np.zeros(shift)])
    load = np.zeros(n + 2 * shift)
    moves = []
    for i in range(n):
        rest = real[i]
        mine: dict[int, float] = {}
        for e in range(i, i + 2 * shift + 1):
            if rest <= 0:
                break
            if load[e] + rest <= cap[e]:
                mine[e] = mine.get(e, 0.0) + rest
                load[e] += rest
                rest = 0.0
            elif load[e] < cap[e]:
                part = cap[e] - load[e]
                mine[e] = mine.get(e, 0.0) + part
                load[e] = cap[e]
                rest -= part
        if rest > 0:
            share = rest / (2 * shift + 1)
            for e in range(i, i + 2 * shift + 1):
                mine[e] = mine.get(e, 0.0) + share
                load[e] += share
        moves.append(tuple((e - shift, amt) for e, amt in sorted(mine.items()) if amt > 0))
    return OnlineAssignment(load, shift, tuple(moves))


def noise_robust_wrap(
    inner: InnerAlgorithm, w_pred, config: NRAConfig, instance: UniformInstance
) -> Schedule:
    """Run ``inner`` on re-routed work so small shifts in time cost nothing.

    The inner algorithm sees job ``i`` carrying the load of slot
    ``i - eta D``, duration ``(1 - 2 eta) D`` and prediction
    ``(1 + zeta) w_pred[i - eta D]``. Its schedule is split back onto the
    original jobs in proportion to what each contributed to the slot, so
    every original job finishes by its own deadline. ``inner`` should be
    monotone in the workload.
    """
    pred = np.asarray(w_pred, dtype=float)
    k = shift_steps(config.eta, instance.duration)
    assign = assign_online(instance.workloads, pred, k, config.zeta)
    dur = (1 - 2 * k / instance.duration) * instance.duration
    inner_real = assign.w_online
    inner_pred = np.concatenate([np.zeros(k), (1 + config.zeta) * pred, np.zeros(k)])
    inner_inst = UniformInstance(inner_real, dur)
    sched = inner(inner_pred, inner_inst)
    # slot s feeds inner job s + k
    parts: dict[int, list[SpeedProfile]] = {j: [] for j in range(instance.n)}
    for i, moves in enumerate(assign.moves):
        for slot, amt in moves:
            src = inner_real[slot + k]
            prof = sched.per_job.get(slot + k)
            if prof is None or src <= 0:
                continue
            parts[i].append(prof.scale(amt / src))
    return Schedule({i: sum_profiles(ps) for i, ps in parts.items()})
