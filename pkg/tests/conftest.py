import re

import numpy as np
import pytest

from mhdlab import grid

_CRITERIA: dict[int, list[tuple[str, str]]] = {}
_PATTERN = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    m = _PATTERN.search(report.nodeid)
    if m and "test_acceptance" in report.nodeid:
        _CRITERIA.setdefault(int(m.group(1)), []).append((m.group(2), report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        rows = _CRITERIA[num]
        ok = all(outcome == "passed" for _, outcome in rows)
        names = ", ".join(name for name, _ in rows)
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  ({names})")


@pytest.fixture(scope="session")
def dom2():
    return grid.make_domain(2, 1, 16 * np.pi, 128)


@pytest.fixture(scope="session")
def dom2_fine():
    return grid.make_domain(2, 1, 16 * np.pi, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_random_field(domain, rng, modes=4, width=3.0):
    """Random smooth field localised in the R-directions."""
    X = grid.mesh(domain)
    r2 = sum(X[a] ** 2 for a in range(domain.k))
    out = np.zeros(domain.shape)
    for _ in range(modes):
        c = rng.normal(size=domain.d)
        phase = sum(c[a] * X[a] for a in range(domain.d))
        centre = rng.uniform(-4, 4, size=domain.k)
        rr = sum((X[a] - centre[a]) ** 2 for a in range(domain.k))
        out = out + rng.normal() * np.cos(phase) * np.exp(-rr / (2 * width**2))
    return out * np.exp(-r2 / 200.0)


def solenoidal_random(domain, rng, amp=1.0):
    u = np.stack([smooth_random_field(domain, rng) for _ in range(domain.d)])
    return amp * grid.leray_project(domain, u)
