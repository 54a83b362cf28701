"""Piecewise-linear speed profiles with exact energy integrals.

A profile is a sorted list of non-overlapping segments ``[t0, t1)`` on which
the speed moves linearly from ``s0`` to ``s1``. Time not covered by any
segment has speed zero. Discontinuities between segments are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# tiny negative speeds produced by floating point cancellation are clipped
_NEG_TOL = 1e-12


def segment_energy(t0, t1, s0, s1, alpha: float):
    """Exact integral of ``s(t)**alpha`` over linear segments (vectorized)."""
    t0, t1, s0, s1 = (np.asarray(x, dtype=float) for x in (t0, t1, s0, s1))
    length = t1 - t0
    diff = s1 - s0
    scale = np.maximum(np.abs(s0), np.abs(s1))
    flat = np.abs(diff) <= 1e-4 * np.maximum(scale, 1e-300)
    safe = np.where(flat, 1.0, diff)
    sloped = length * (s1 ** (alpha + 1) - s0 ** (alpha + 1)) / ((alpha + 1) * safe)
    # second-order expansion around the midpoint for near-flat segments
    mid = 0.5 * (s0 + s1)
    corr = alpha * (alpha - 1) / 24.0 * np.where(mid > 0, mid, 1.0) ** (alpha - 2) * diff**2
    level = length * (mid**alpha + np.where(mid > 0, corr, 0.0))
    return np.where(flat, level, sloped)


@dataclass(frozen=True, eq=False)
class SpeedProfile:
    """Piecewise-linear, non-negative speed function of time."""

    t0: np.ndarray
    t1: np.ndarray
    s0: np.ndarray
    s1: np.ndarray

    def __post_init__(self):
        arrs = [np.array(a, dtype=float).reshape(-1) for a in (self.t0, self.t1, self.s0, self.s1)]
        if len({a.size for a in arrs}) != 1:
            raise ValueError("segment arrays must have equal length")
        t0, t1, s0, s1 = arrs
        if np.any(~np.isfinite(np.concatenate(arrs))):
            raise ValueError("segment data must be finite")
        if np.any(t1 < t0):
            raise ValueError("segment end before start")
        if np.any(t0[1:] < t1[:-1] - 1e-12 * np.maximum(1.0, np.abs(t1[:-1]))):
            raise ValueError("segments must be sorted and non-overlapping")
        for s in (s0, s1):
            scale = max(1.0, float(np.max(np.abs(s), initial=0.0)))
            if np.any(s < -_NEG_TOL * scale):
                raise ValueError("speeds must be non-negative")
            np.maximum(s, 0.0, out=s)
        keep = t1 > t0
        for name, a in zip(("t0", "t1", "s0", "s1"), arrs):
            a = a[keep]
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    # construction -----------------------------------------------------------

    @classmethod
    def empty(cls) -> "SpeedProfile":
        z = np.zeros(0)
        return cls(z, z, z, z)

    @classmethod
    def constant(cls, start: float, end: float, speed: float) -> "SpeedProfile":
        if end <= start or speed == 0:
            return cls.empty()
        return cls([start], [end], [speed], [speed])

    @classmethod
    def from_segments(cls, segments: Iterable[Sequence[float]]) -> "SpeedProfile":
        """Build from ``(t0, t1, s0, s1)`` tuples; ``(t0, t1, s)`` means constant."""
        rows = []
        for seg in segments:
            if len(seg) == 3:
                a, b, s = seg
                rows.append((a, b, s, s))
            else:
                rows.append(tuple(seg))
        if not rows:
            return cls.empty()
        rows.sort(key=lambda r: (r[0], r[1]))
        arr = np.array(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])

    @classmethod
    def from_steps(cls, times: Sequence[float], speeds: Sequence[float]) -> "SpeedProfile":
        """Piecewise-constant profile: ``speeds[k]`` on ``[times[k], times[k+1])``."""
        times = np.asarray(times, dtype=float)
        speeds = np.asarray(speeds, dtype=float)
        if times.size != speeds.size + 1:
            raise ValueError("need one more breakpoint than speeds")
        return cls(times[:-1], times[1:], speeds, speeds)

    # queries ----------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.t0.size)

    def segments(self) -> list[tuple[float, float, float, float]]:
        return list(zip(self.t0.tolist(), self.t1.tolist(), self.s0.tolist(), self.s1.tolist()))

    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self.t0, self.t1]))

    def support(self) -> tuple[float, float] | None:
        """Smallest interval outside which the speed is zero, or None."""
        live = (self.s0 > 0) | (self.s1 > 0)
        if not np.any(live):
            return None
        return float(self.t0[live][0]), float(self.t1[live][-1])

    def is_piecewise_constant(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.s1 - self.s0) <= tol * np.maximum(1.0, self.s0)))

    def _locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        idx = np.searchsorted(self.t0, x, side="right") - 1
        ok = idx >= 0
        idx_c = np.clip(idx, 0, max(len(self) - 1, 0))
        if len(self):
            ok &= x < self.t1[idx_c]
        else:
            ok &= False
        return idx_c, ok

    def _interp(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        t0, t1, s0, s1 = self.t0[idx], self.t1[idx], self.s0[idx], self.s1[idx]
        return s0 + (s1 - s0) * (x - t0) / (t1 - t0)

    def __call__(self, t) -> np.ndarray:
        """Right-continuous evaluation."""
        x = np.atleast_1d(np.asarray(t, dtype=float))
        if not len(self):
            return np.zeros_like(x)
        idx, ok = self._locate(x)
        return np.where(ok, self._interp(idx, x), 0.0)

    def left_limit(self, t) -> np.ndarray:
        x = np.atleast_1d(np.asarray(t, dtype=float))
        if not len(self):
            return np.zeros_like(x)
        idx = np.searchsorted(self.t1, x, side="left")
        ok = idx < len(self)
        idx_c = np.clip(idx, 0, len(self) - 1)
        ok &= self.t0[idx_c] < x
        return np.where(ok, self._interp(idx_c, x), 0.0)

    def values_on(self, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Right limits at ``grid[:-1]`` and left limits at ``grid[1:]``.

        ``grid`` must contain every breakpoint of this profile inside its range,
        so the profile is linear on each cell.
        """
        grid = np.asarray(grid, dtype=float)
        if not len(self) or grid.size < 2:
            z = np.zeros(max(grid.size - 1, 0))
            return z, z.copy()
        a, b = grid[:-1], grid[1:]
        idx, ok = self._locate(0.5 * (a + b))
        return np.where(ok, self._interp(idx, a), 0.0), np.where(ok, self._interp(idx, b), 0.0)

    def integral(self, start: float = -np.inf, end: float = np.inf) -> float:
        """Exact integral of the speed over ``[start, end]``."""
        if not len(self) or end <= start:
            return 0.0
        a = np.maximum(self.t0, start)
        b = np.minimum(self.t1, end)
        ok = b > a
        if not np.any(ok):
            return 0.0
        idx = np.nonzero(ok)[0]
        va = self._interp(idx, a[ok])
        vb = self._interp(idx, b[ok])
        return float(np.sum(0.5 * (va + vb) * (b[ok] - a[ok])))

    def total_work(self) -> float:
        return float(np.sum(0.5 * (self.s0 + self.s1) * (self.t1 - self.t0)))

    def energy(self, alpha: float) -> float:
        if not len(self):
            return 0.0
        return float(np.sum(segment_energy(self.t0, self.t1, self.s0, self.s1, alpha)))

    def max_speed(self) -> float:
        return float(max(np.max(self.s0, initial=0.0), np.max(self.s1, initial=0.0)))

    # transforms -------------------------------------------------------------

    def scale(self, factor: float) -> "SpeedProfile":
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return SpeedProfile(self.t0, self.t1, self.s0 * factor, self.s1 * factor)

    def shift(self, dt: float) -> "SpeedProfile":
        return SpeedProfile(self.t0 + dt, self.t1 + dt, self.s0, self.s1)

    def restrict(self, start: float, end: float) -> "SpeedProfile":
        """Zero the profile outside ``[start, end)``."""
        if not len(self) or end <= start:
            return SpeedProfile.empty()
        a = np.maximum(self.t0, start)
        b = np.minimum(self.t1, end)
        ok = b > a
        idx = np.nonzero(ok)[0]
        return SpeedProfile(a[ok], b[ok], self._interp(idx, a[ok]), self._interp(idx, b[ok]))

    def split_at(self, points: Sequence[float]) -> "SpeedProfile":
        """Same function, with extra breakpoints inserted."""
        grid = np.unique(np.concatenate([self.breakpoints(), np.asarray(points, dtype=float)]))
        return _from_grid(grid, *self.values_on(grid))

    def simplify(self, tol: float = 1e-12) -> "SpeedProfile":
        """Merge adjacent segments that lie on one line."""
        if len(self) < 2:
            return self
        rows = [list(r) for r in self.segments()]
        out = [rows[0]]
        for t0, t1, s0, s1 in rows[1:]:
            p = out[-1]
            if abs(p[1] - t0) <= tol * max(1.0, abs(t0)) and abs(p[3] - s0) <= tol * max(1.0, s0):
                slope_p = (p[3] - p[2]) / (p[1] - p[0])
                slope_q = (s1 - s0) / (t1 - t0)
                if abs(slope_p - slope_q) <= tol * max(1.0, abs(slope_p), abs(slope_q)):
                    p[1], p[3] = t1, s1
                    continue
            out.append([t0, t1, s0, s1])
        return SpeedProfile.from_segments(out)

    def __add__(self, other: "SpeedProfile") -> "SpeedProfile":
        return sum_profiles([self, other])

    def __repr__(self) -> str:
        return f"SpeedProfile({len(self)} segments, work={self.total_work():.6g})"


def _from_grid(grid: np.ndarray, left: np.ndarray, right: np.ndarray) -> SpeedProfile:
    keep = (left > 0) | (right > 0)
    return SpeedProfile(grid[:-1][keep], grid[1:][keep], left[keep], right[keep])


def sum_profiles(profiles: Iterable[SpeedProfile]) -> SpeedProfile:
    """Pointwise sum of profiles, exact up to rounding."""
    profiles = [p for p in profiles if len(p)]
    if not profiles:
        return SpeedProfile.empty()
    if len(profiles) == 1:
        return profiles[0]
    grid = np.unique(np.concatenate([p.breakpoints() for p in profiles]))
    left = np.zeros(grid.size - 1)
    right = np.zeros(grid.size - 1)
    for p in profiles:
        a, b = p.values_on(grid)
        left += a
        right += b
    return _from_grid(grid, left, right)


def pointwise_excess(p: SpeedProfile, q: SpeedProfile, factor: float = 1.0) -> float:
    """Largest value of ``p(t) - factor * q(t)`` over all t.

    Both are piecewise linear, so checking cell endpoints on a common grid is
    exhaustive.
    """
    grid = np.unique(np.concatenate([p.breakpoints(), q.breakpoints()]))
    if grid.size < 2:
        return 0.0
    pa, pb = p.values_on(grid)
    qa, qb = q.values_on(grid)
    return float(max(np.max(pa - factor * qa), np.max(pb - factor * qb)))
