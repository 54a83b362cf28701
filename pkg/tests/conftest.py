import numpy as np
import pytest

from voltsched.model import GeneralInstance, Job, UniformInstance


def random_uniform(rng, n=None, D=None, high=10):
    n = int(rng.integers(1, 12)) if n is None else n
    D = int(rng.integers(1, 6)) if D is None else D
    return UniformInstance(rng.integers(0, high, size=n).astype(float), D)


def random_general(rng, n=None, horizon=10.0, integral=False):
    n = int(rng.integers(1, 6)) if n is None else n
    jobs = []
    for _ in range(n):
        if integral:
            r = float(rng.integers(0, int(horizon) - 1))
            d = float(rng.integers(r + 1, int(horizon) + 1))
        else:
            a, b = np.sort(rng.uniform(0, horizon, size=2))
            r, d = float(a), float(max(b, a + 0.1))
        jobs.append(Job(r, d, float(rng.uniform(0.1, 5))))
    return GeneralInstance.from_jobs(jobs)


def midpoint_energy(profile, alpha, per_segment=1_000_000):
    """Energy by the midpoint rule, an oracle for the closed form."""
    x = (np.arange(per_segment) + 0.5) / per_segment
    total = 0.0
    for t0, t1, s0, s1 in profile.segments():
        total += float(np.mean((s0 + (s1 - s0) * x) ** alpha)) * (t1 - t0)
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
