"""Charts for benchmark reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import BenchReport  # noqa: E402


def plot_ratios(report: BenchReport, path: str | Path, alpha: float | None = None) -> Path:
    """Ratio per instance for each algorithm, with the prediction error below.

    The format follows the file suffix (``.svg`` or ``.png``).
    """
    path = Path(path)
    rows = [r for r in report.rows if not r.failed and (alpha is None or r.alpha == alpha)]
    if alpha is None and rows:
        alpha = rows[0].alpha
        rows = [r for r in rows if r.alpha == alpha]
    series: dict[str, list] = {}
    errors: dict[str, list] = {}
    for r in rows:
        label = r.algorithm if r.epsilon is None else f"{r.algorithm} (eps={r.epsilon:g})"
        series.setdefault(label, []).append((r.seed, r.ratio))
        if r.err is not None:
            errors.setdefault(r.algorithm.split(":", 1)[-1], {})[r.seed] = r.err
    fig, (top, bottom) = plt.subplots(
        2, 1, figsize=(8, 6), sharex=True, gridspec_kw={"height_ratios": [3, 1]}
    )
    for label, pts in series.items():
        pts.sort()
        top.plot([p[0] for p in pts], [p[1] for p in pts], marker=".", label=label)
    top.set_ylabel("energy / OPT")
    top.set_title(f"alpha = {alpha:g}" if alpha is not None else "no data")
    if series:
        top.legend(fontsize="small")
    top.grid(alpha=0.3)
    for name, pts in errors.items():
        seeds = sorted(pts)
        bottom.plot(seeds, [pts[s] for s in seeds], label=name)
    bottom.set_xlabel("instance")
    bottom.set_ylabel("prediction error")
    if errors:
        bottom.legend(fontsize="small")
    bottom.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
