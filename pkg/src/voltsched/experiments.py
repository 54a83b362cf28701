"""Instance generators, predictors, lower-bound fixtures, log ingestion and the benchmark runner."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from .las import LASConfig, las, las_trust
from .model import GeneralInstance, Instance, Job, Schedule, UniformInstance, err
from .noise import NRAConfig, noise_robust_wrap
from .offline import opt_energy, yds_optimal
from .online import avr, bkp, oa

log = logging.getLogger(__name__)

CSV_HEADER = ("algorithm", "alpha", "epsilon", "seed", "energy", "opt_energy", "ratio", "err")

# sub-stream keys under each seed
_INSTANCE_STREAM = 0
_PREDICTOR_STREAM = {"accurate": 1, "random": 2, "misleading": 3}


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """PCG64 generator for sub-stream ``key`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


# generators -------------------------------------------------------------------


@dataclass(frozen=True)
class WalkParams:
    m: int = 20
    M: int = 80
    s: int = 5
    T: int = 220
    D: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.m > self.M:
            raise ValueError("need m <= M")
        if self.s < 0:
            raise ValueError("step bound s must be non-negative")
        if not 0 < self.D <= self.T:
            raise ValueError("need 0 < D <= T")

    @property
    def n(self) -> int:
        return self.T - self.D + 1


def gen_random_walk(params: WalkParams) -> UniformInstance:
    """Bounded random walk: each step adds U{-s, s}, clamped into [m, M]."""
    rng = rng_for(params.seed, _INSTANCE_STREAM)
    steps = rng.integers(-params.s, params.s + 1, size=params.n - 1)
    w = np.empty(params.n)
    w[0] = rng.integers(params.m, params.M + 1)
    for i, x in enumerate(steps):
        w[i + 1] = min(params.M, max(params.m, w[i] + x))
    return UniformInstance(w, params.D)


def make_predictor(kind: str, w_real, params: WalkParams, seed: int | None = None) -> np.ndarray:
    """Synthetic prediction of ``w_real``.

    ``accurate`` adds U{-s, s} noise (clamped at 0), ``random`` draws
    U{m, M} independently, ``misleading`` reflects ``w`` inside [m, M].
    """
    w = np.asarray(w_real, dtype=float)
    if kind == "misleading":
        return (params.M - w) + params.m
    if kind not in _PREDICTOR_STREAM:
        raise ValueError(f"unknown predictor {kind!r}")
    rng = rng_for(params.seed if seed is None else seed, _PREDICTOR_STREAM[kind])
    if kind == "accurate":
        return np.maximum(w + rng.integers(-params.s, params.s + 1, size=w.size), 0.0)
    return rng.integers(params.m, params.M + 1, size=w.size).astype(float)


def periodic_days(
    n_days: int,
    seed: int = 0,
    buckets: int = 144,
    duration: int = 20,
    peak: float = 60.0,
    floor: float = 5.0,
) -> list[UniformInstance]:
    """Poisson counts around a fixed daily profile, one instance per day."""
    rng = rng_for(seed, _INSTANCE_STREAM)
    phase = 2 * np.pi * np.arange(buckets) / buckets
    shape = floor + (peak - floor) * (0.5 - 0.5 * np.cos(phase)) ** 2
    return [UniformInstance(rng.poisson(shape).astype(float), duration) for _ in range(n_days)]


def periodic_events(
    n_days: int, seed: int = 0, bucket_seconds: int = 600, day_seconds: int = 86_400, start: int = 1_262_304_000
) -> np.ndarray:
    """Event timestamps (epoch seconds) whose bucket counts follow :func:`periodic_days`."""
    days = periodic_days(n_days, seed, buckets=day_seconds // bucket_seconds)
    rng = rng_for(seed, 9)
    out = []
    for k, inst in enumerate(days):
        for b, c in enumerate(inst.workloads.astype(int)):
            base = start + k * day_seconds + b * bucket_seconds
            out.append(base + rng.integers(0, bucket_seconds, size=c))
    return np.sort(np.concatenate(out)) if out else np.zeros(0, dtype=np.int64)


# lower-bound fixtures -------------------------------------------------------------


@dataclass
class Fixture:
    kind: str
    alpha: float
    instances: dict[str, Instance]
    expected_opt: dict[str, float]
    extra: dict[str, Any] = field(default_factory=dict)


def lower_bound_fixture(kind: str, alpha: float, D: float = 1.0, eps: float = 0.1) -> Fixture:
    """Instances from the lower-bound constructions with their known optima.

    ``online``: one unit job with ``D = 2`` and the same plus a job of work 2
    released at time 1. ``avr``: unit jobs released at 0 and
    ``(1 - 2/alpha) D``; ``extra`` holds the window on which AVR pays the
    stated ratio. ``tradeoff``: a unit job at 0 and a job of work ``1/eps``
    at ``ceil(eps D)``. ``norm``: a base vector scaled by growing factors,
    with an all-zero prediction.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if kind == "online":
        j1 = UniformInstance([1.0], 2.0)
        j2 = UniformInstance([1.0, 2.0], 2.0)
        return Fixture(kind, alpha, {"J1": j1, "J2": j2}, {"J1": 1 / 2 ** (alpha - 1), "J2": 3.0})
    if kind == "avr":
        if alpha <= 2:
            raise ValueError("the AVR construction needs alpha > 2")
        if D <= 0:
            raise ValueError("D must be positive")
        a = (1 - 2 / alpha) * D
        inst = GeneralInstance((Job(0.0, D, 1.0), Job(a, a + D, 1.0)))
        total = a + D
        # both jobs share one critical interval of density 2 / (a + D)
        opt = total * (2 / total) ** alpha
        ratio = 2**alpha / alpha * (1 - 1 / alpha) ** (alpha - 1)
        return Fixture(kind, alpha, {"J": inst}, {"J": opt}, {"window": (a, D), "ratio": ratio})
    if kind == "tradeoff":
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if D <= 0 or D != int(D):
            raise ValueError("D must be a positive integer")
        a = math.ceil(eps * D - 1e-12)
        if a < 1:
            raise ValueError("need eps * D > 0")
        w = np.zeros(a + 1)
        w[0], w[a] = 1.0, 1 / eps
        # the second job runs alone on its window, the first on [0, a]
        opt = a ** (1 - alpha) + D ** (1 - alpha) * eps ** (-alpha)
        return Fixture(kind, alpha, {"J": UniformInstance(w, D)}, {"J": opt}, {"second_release": a})
    if kind == "norm":
        base = UniformInstance([1.0, 2.0, 3.0, 2.0, 1.0], D)
        base_opt = opt_energy(base, alpha)
        insts, opts = {}, {}
        for M in (1, 10, 100):
            insts[f"M={M}"] = base.with_workloads(M * base.workloads)
            opts[f"M={M}"] = M**alpha * base_opt
        return Fixture(kind, alpha, insts, opts, {"prediction": np.zeros(base.n)})
    raise ValueError(f"unknown fixture kind {kind!r}")


# event logs ------------------------------------------------------------------------


def _parse_time(field_: str) -> float | None:
    field_ = field_.strip().strip('"')
    if not field_:
        return None
    try:
        return float(field_)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(field_.replace("Z", "+00:00"))
    except ValueError:
        return None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _looks_iso(field_: str) -> bool:
    f = field_.strip()
    return len(f) >= 10 and f[4:5] == "-" and _parse_time(f) is not None


def read_events(path: str | Path, column: int | None = None) -> tuple[np.ndarray, int]:
    """Timestamps from an event log and the number of lines that did not parse.

    Lines hold either a bare timestamp or tab/comma separated fields. A
    header naming a ``time`` column selects it; otherwise ``column`` is
    used, or the first ISO-8601 field, or the first field.
    """
    times: list[float] = []
    skipped = 0
    col = column
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t") if "\t" in line else line.split(",")
            if lineno == 0 and col is None and len(fields) > 1:
                names = [f.strip().lower() for f in fields]
                hits = [k for k, name in enumerate(names) if "time" in name]
                if hits and _parse_time(fields[hits[0]]) is None:
                    col = hits[0]
                    continue
            if col is not None:
                k = col
            elif len(fields) == 1:
                k = 0
            else:
                k = next((i for i, f in enumerate(fields) if _looks_iso(f)), 0)
            t = _parse_time(fields[k]) if k < len(fields) else None
            if t is None or not math.isfinite(t):
                skipped += 1
                continue
            times.append(t)
    return np.asarray(times, dtype=float), skipped


def bucket_days(
    times: np.ndarray, bucket_seconds: int = 600, day_seconds: int = 86_400, D_buckets: int = 20
) -> list[UniformInstance]:
    """Count events per bucket and cut the counts into days.

    Every day from the first to the last event becomes an instance with
    ``day_seconds / bucket_seconds`` releases and duration ``D_buckets``.
    """
    if bucket_seconds <= 0 or day_seconds % bucket_seconds:
        raise ValueError("day_seconds must be a positive multiple of bucket_seconds")
    if times.size == 0:
        return []
    per_day = day_seconds // bucket_seconds
    day = np.floor(times / day_seconds).astype(np.int64)
    slot = np.floor((times - day * day_seconds) / bucket_seconds).astype(np.int64)
    first = int(day.min())
    counts = np.zeros((int(day.max()) - first + 1, per_day))
    np.add.at(counts, (day - first, np.clip(slot, 0, per_day - 1)), 1.0)
    return [UniformInstance(row, D_buckets) for row in counts]


def ingest_events(
    path: str | Path, bucket_seconds: int = 600, day_seconds: int = 86_400, D_buckets: int = 20
) -> list[UniformInstance]:
    times, skipped = read_events(path)
    if skipped:
        log.warning("skipped %d unparseable line(s) in %s", skipped, path)
    return bucket_days(times, bucket_seconds, day_seconds, D_buckets)


def prev_day_predictor(days: Sequence[UniformInstance]) -> list[np.ndarray]:
    """Yesterday's counts as today's prediction; the first day gets zeros."""
    out = []
    for k, day in enumerate(days):
        prev = days[k - 1].workloads if k else np.zeros(day.n)
        if prev.size != day.n:
            raise ValueError(f"day {k} has {day.n} buckets but day {k - 1} has {prev.size}")
        out.append(np.array(prev, dtype=float))
    return out


# benchmark -------------------------------------------------------------------------


@dataclass(frozen=True)
class AlgoSpec:
    name: str
    epsilon: float | None = None
    predictor: str | None = None
    options: tuple[tuple[str, Any], ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "AlgoSpec":
        d = dict(d)
        name = d.pop("name")
        eps = d.pop("epsilon", None)
        pred = d.pop("predictor", None)
        if name in _NEEDS_PREDICTION and pred is None:
            pred = "accurate"
        if name in _NEEDS_EPSILON and eps is None:
            raise ValueError(f"algorithm {name!r} needs an epsilon")
        if name not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {name!r}")
        return cls(name, None if eps is None else float(eps), pred, tuple(sorted(d.items())))

    @property
    def label(self) -> str:
        return self.name if self.predictor is None else f"{self.name}:{self.predictor}"


def _run_las(inst, pred, alpha, spec: AlgoSpec) -> Schedule:
    return las(pred, inst, LASConfig.from_epsilon(spec.epsilon, alpha))


def _run_nra(inst, pred, alpha, spec: AlgoSpec) -> Schedule:
    opts = dict(spec.options)
    cfg = LASConfig.from_epsilon(spec.epsilon, alpha)
    nra = NRAConfig(opts.get("eta", 0.05), opts.get("zeta", 0.1))
    return noise_robust_wrap(lambda p, i: las(p, i, cfg), pred, nra, inst)


ALGORITHMS: dict[str, Callable[..., Schedule]] = {
    "avr": lambda inst, pred, alpha, spec: avr(inst),
    "oa": lambda inst, pred, alpha, spec: oa(inst),
    "bkp": lambda inst, pred, alpha, spec: bkp(inst, **dict(spec.options)),
    "yds": lambda inst, pred, alpha, spec: yds_optimal(inst),
    "las": _run_las,
    "las_trust": lambda inst, pred, alpha, spec: las_trust(pred, inst),
    "nra_las": _run_nra,
}
_NEEDS_PREDICTION = {"las", "las_trust", "nra_las"}
_NEEDS_EPSILON = {"las", "nra_las"}


@dataclass(frozen=True)
class BenchConfig:
    alphas: tuple[float, ...]
    algorithms: tuple[AlgoSpec, ...]
    seeds: tuple[int, ...] = ()
    generator: WalkParams | None = None
    instances: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "BenchConfig":
        alpha = d.get("alpha", 3.0)
        alphas = tuple(float(a) for a in (alpha if isinstance(alpha, list) else [alpha]))
        if any(a <= 1 for a in alphas):
            raise ValueError("alpha must exceed 1")
        algos = tuple(AlgoSpec.from_dict(a) for a in d["algorithms"])
        gen = d.get("generator")
        paths = tuple(str(p) for p in d.get("instances", ()))
        if (gen is None) == (not paths):
            raise ValueError("config needs exactly one of 'generator' or 'instances'")
        params = WalkParams(**{k: v for k, v in gen.items() if k != "seed"}) if gen is not None else None
        seeds = tuple(int(s) for s in d.get("seeds", range(20) if gen is not None else ()))
        return cls(alphas, algos, seeds, params, paths)


def table1_config(seeds: Sequence[int] = range(20)) -> BenchConfig:
    algos = [
        {"name": "avr"},
        {"name": "oa"},
        {"name": "bkp"},
        *[
            {"name": "las", "epsilon": e, "predictor": p}
            for e in (0.8, 0.2, 0.01)
            for p in ("accurate", "random", "misleading")
        ],
    ]
    return BenchConfig.from_dict(
        {"alpha": 3.0, "algorithms": algos, "generator": {"m": 20, "M": 80, "s": 5, "T": 220, "D": 20}, "seeds": list(seeds)}
    )


@dataclass(frozen=True)
class BenchRow:
    algorithm: str
    alpha: float
    epsilon: float | None
    seed: int
    energy: float
    opt_energy: float
    ratio: float
    err: float | None
    failure: str | None = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(CSV_HEADER)
        for r in self.rows:
            if r.failed:
                out.writerow([r.algorithm, repr(r.alpha), _fmt(r.epsilon), r.seed, "failed", _fmt(r.opt_energy), "", ""])
            else:
                out.writerow(
                    [r.algorithm, repr(r.alpha), _fmt(r.epsilon), r.seed, repr(r.energy), repr(r.opt_energy), repr(r.ratio), _fmt(r.err)]
                )
        return buf.getvalue()

    def aggregate(self) -> list[dict]:
        """Mean and max ratio per (algorithm, alpha, epsilon).

        ``headline`` is the max for misleading predictions and the mean
        otherwise.
        """
        groups: dict[tuple, list[BenchRow]] = {}
        for r in self.rows:
            groups.setdefault((r.algorithm, r.alpha, r.epsilon), []).append(r)
        out = []
        for (name, alpha, eps), rows in groups.items():
            ok = np.array([r.ratio for r in rows if not r.failed])
            mean = float(ok.mean()) if ok.size else math.nan
            mx = float(ok.max()) if ok.size else math.nan
            out.append(
                {
                    "algorithm": name,
                    "alpha": alpha,
                    "epsilon": eps,
                    "runs": len(rows),
                    "failures": sum(r.failed for r in rows),
                    "mean": mean,
                    "max": mx,
                    "headline": mx if name.endswith(":misleading") else mean,
                }
            )
        return out

    def lookup(self, algorithm: str, epsilon: float | None = None, alpha: float | None = None) -> dict:
        for g in self.aggregate():
            if g["algorithm"] == algorithm and g["epsilon"] == epsilon and (alpha is None or g["alpha"] == alpha):
                return g
        raise KeyError((algorithm, epsilon, alpha))


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


@dataclass(frozen=True)
class _Task:
    seed: int
    instance: UniformInstance
    predictions: dict[str, np.ndarray]
    alpha: float
    algorithms: tuple[AlgoSpec, ...]


def _run_task(task: _Task) -> list[BenchRow]:
    inst, alpha = task.instance, task.alpha
    opt = opt_energy(inst, alpha)
    rows = []
    for spec in task.algorithms:
        pred = task.predictions.get(spec.predictor) if spec.predictor else None
        error = None if pred is None else err(inst.workloads, pred, alpha).value
        try:
            if spec.predictor and pred is None:
                raise ValueError(f"no {spec.predictor!r} prediction for this instance")
            energy = ALGORITHMS[spec.name](inst, pred, alpha, spec).energy(alpha)
        except Exception as exc:  # recorded, the run goes on
            log.warning("%s failed on seed %d: %s", spec.label, task.seed, exc)
            rows.append(BenchRow(spec.label, alpha, spec.epsilon, task.seed, math.nan, opt, math.nan, error, str(exc)))
            continue
        if opt > 0:
            ratio = energy / opt
        else:
            ratio = 1.0 if energy == 0 else math.inf
        rows.append(BenchRow(spec.label, alpha, spec.epsilon, task.seed, energy, opt, ratio, error))
    return rows


def _instances_from_files(paths: Sequence[str]) -> list[UniformInstance]:
    from .io import load_instances

    out: list[UniformInstance] = []
    for p in paths:
        for inst in load_instances(p):
            if not isinstance(inst, UniformInstance):
                raise ValueError(f"{p}: the benchmark runs uniform-deadline instances only")
            out.append(inst)
    return out


def _tasks(config: BenchConfig) -> list[_Task]:
    kinds = sorted({a.predictor for a in config.algorithms if a.predictor})
    work: list[tuple[int, UniformInstance, dict[str, np.ndarray]]] = []
    if config.generator is not None:
        for seed in config.seeds:
            params = WalkParams(**{**config.generator.__dict__, "seed": seed})
            inst = gen_random_walk(params)
            preds = {k: make_predictor(k, inst.workloads, params) for k in kinds if k != "prev_day"}
            work.append((seed, inst, preds))
    else:
        days = _instances_from_files(config.instances)
        prev = prev_day_predictor(days) if "prev_day" in kinds and days else []
        for idx, inst in enumerate(days):
            lo, hi = int(inst.workloads.min()), int(inst.workloads.max())
            params = WalkParams(m=lo, M=hi, s=5, T=inst.n - 1 + int(math.ceil(inst.duration)), D=int(math.ceil(inst.duration)), seed=idx)
            preds = {k: make_predictor(k, inst.workloads, params) for k in kinds if k != "prev_day"}
            if prev:
                preds["prev_day"] = prev[idx]
            work.append((idx, inst, preds))
    return [
        _Task(seed, inst, preds, alpha, config.algorithms) for alpha in config.alphas for seed, inst, preds in work
    ]


def thread_count() -> int:
    raw = os.environ.get("VOLTSCHED_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring VOLTSCHED_THREADS=%r", raw)
        return 1


def run_benchmark(config: BenchConfig | dict, workers: int | None = None) -> BenchReport:
    """Run every algorithm on every instance and report energy ratios against YDS.

    Row order depends only on the config, so the CSV is reproducible for
    any number of workers.
    """
    if isinstance(config, dict):
        config = BenchConfig.from_dict(config)
    tasks = _tasks(config)
    workers = thread_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    return BenchReport([row for chunk in chunks for row in chunk])
