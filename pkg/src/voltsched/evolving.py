"""Predictions that are renewed at every time step, and the block splitter."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .las import LASConfig, las, robustness_bound
from .model import Schedule, UniformInstance, merge_schedules
from .profile import SpeedProfile


@dataclass(frozen=True, eq=False)
class EvolvingPrediction:
    """``at[t]`` is the workload vector predicted at time ``t``.

    Each vector has one entry per release time of the instance; only the
    entries after ``t`` are used by the error measure.
    """

    at: Mapping[int, np.ndarray]

    def __post_init__(self):
        at = {}
        sizes = set()
        for t, v in self.at.items():
            arr = np.asarray(v, dtype=float).reshape(-1)
            if np.any(arr < 0) or np.any(~np.isfinite(arr)):
                raise ValueError(f"prediction at t={t} must be finite and non-negative")
            arr.setflags(write=False)
            at[int(t)] = arr
            sizes.add(arr.size)
        if len(sizes) > 1:
            raise ValueError("all prediction vectors must have the same length")
        object.__setattr__(self, "at", dict(sorted(at.items())))

    @classmethod
    def constant(cls, w_pred, times: int) -> "EvolvingPrediction":
        """The same vector at every ``t`` in ``0..times-1``."""
        w = np.asarray(w_pred, dtype=float)
        return cls({t: w for t in range(times)})

    @property
    def length(self) -> int:
        return next(iter(self.at.values())).size if self.at else 0

    def check_covers(self, n: int) -> None:
        missing = [t for t in range(n) if t not in self.at]
        if missing:
            raise ValueError(f"no prediction for times {missing[:5]}{'...' if len(missing) > 5 else ''}")
        if self.length != n:
            raise ValueError(f"prediction vectors have {self.length} entries, expected {n}")

    def vector(self, t: int) -> np.ndarray:
        """Prediction made at ``t``, clamping ``t`` into the known range."""
        keys = list(self.at)
        t = min(max(t, keys[0]), keys[-1])
        while t not in self.at:
            t -= 1
        return self.at[t]


def err_lambda(pred: EvolvingPrediction, w_real, lam: float, alpha: float) -> float:
    """Discounted error ``sum_t sum_{i > t} |w_real[i] - at[t][i]|**alpha * lam**(i - t)``."""
    if not 0 < lam < 1:
        raise ValueError("lambda must lie in (0, 1)")
    real = np.asarray(w_real, dtype=float)
    pred.check_covers(real.size)
    idx = np.arange(real.size)
    total = 0.0
    for t, v in pred.at.items():
        ahead = idx > t
        if not np.any(ahead):
            continue
        total += float(np.sum(np.abs(real[ahead] - v[ahead]) ** alpha * lam ** (idx[ahead] - t)))
    return total


@dataclass(frozen=True)
class SplitConfig:
    k: int
    epsilon: float
    alpha: float
    seed: int = 0
    offset: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.offset is not None and not 0 <= self.offset < self.k:
            raise ValueError("offset must lie in {0, ..., k-1}")

    def resolved_offset(self) -> int:
        if self.offset is not None:
            return self.offset
        return int(np.random.default_rng(self.seed).integers(self.k))


@dataclass(frozen=True)
class Partition:
    """Jobs grouped by block; ``boundary`` jobs straddle a block edge."""

    blocks: dict[int, tuple[int, ...]]
    boundary: tuple[int, ...]
    starts: dict[int, float]


def block_start(b: int, k: int, x: int, duration: float) -> float:
    return 2 * ((b - 1) * k - x) * duration


def partition_jobs(instance: UniformInstance, k: int, x: int) -> Partition:
    """Assign each job to the block containing its window or to the boundary set."""
    D = instance.duration
    width = 2 * k * D
    blocks: dict[int, list[int]] = {}
    boundary = []
    for i in range(instance.n):
        b = math.floor((i + 2 * x * D) / width) + 1
        end = block_start(b + 1, k, x, D)
        if i + D <= end + 1e-12:
            blocks.setdefault(b, []).append(i)
        else:
            boundary.append(i)
    starts = {b: block_start(b, k, x, D) for b in blocks}
    return Partition({b: tuple(js) for b, js in blocks.items()}, tuple(boundary), starts)


def _shifted(schedule: Schedule, offset: int) -> Schedule:
    return Schedule({j + offset: p.shift(offset) for j, p in schedule.per_job.items()})


def splitting_scheduler(pred: EvolvingPrediction, instance: UniformInstance, config: SplitConfig) -> Schedule:
    """LAS inside each block with the prediction made at its start, AVR across edges.

    Block ``b`` covers ``[2((b-1)k - x)D, 2(bk - x)D)``. A block starting
    before time 0 uses the prediction made at time 0.
    """
    pred.check_covers(instance.n)
    x = config.resolved_offset()
    part = partition_jobs(instance, config.k, x)
    las_cfg = LASConfig.from_epsilon(config.epsilon, config.alpha)
    pieces = []
    for b, jobs in part.blocks.items():
        lo, hi = jobs[0], jobs[-1] + 1
        t_b = max(0, math.floor(part.starts[b]))
        sub = UniformInstance(instance.workloads[lo:hi], instance.duration)
        guess = pred.vector(t_b)[lo:hi]
        pieces.append(_shifted(las(guess, sub, las_cfg), lo))
    pieces.append(boundary_avr(instance, part.boundary))
    return merge_schedules(*pieces)


def boundary_avr(instance: UniformInstance, boundary) -> Schedule:
    D = instance.duration
    return Schedule(
        {int(i): SpeedProfile.constant(i, i + D, instance.workloads[i] / D) for i in boundary}
    )


def boundary_energy(instance: UniformInstance, k: int, x: int, alpha: float) -> float:
    """Energy of AVR run on the boundary jobs alone for offset ``x``."""
    return boundary_avr(instance, partition_jobs(instance, k, x).boundary).energy(alpha)


def mean_boundary_energy(instance: UniformInstance, k: int, alpha: float) -> float:
    """Boundary AVR energy averaged over all ``k`` offsets."""
    return float(np.mean([boundary_energy(instance, k, x, alpha) for x in range(k)]))


def robustness_limit(config: SplitConfig) -> float:
    """Ratio cap used for the splitter: the LAS cap times ``4**alpha``."""
    return robustness_bound(LASConfig.from_epsilon(config.epsilon, config.alpha)) * 4**config.alpha

