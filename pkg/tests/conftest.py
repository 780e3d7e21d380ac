import os
from pathlib import Path

import pytest

from kzqfi.runner import SweepConfig, run_sweep

SIZES = [16, 24, 32, 48, 64]
RATES = [1, 2, 4, 8, 16]

# Slow-tier sweeps are cached here and resumed cell by cell on later runs.
CACHE_DIR = Path(os.environ.get("KZQFI_ACCEPTANCE_DIR", Path(__file__).resolve().parent.parent / "acceptance_runs"))


ACCEPTANCE_LINES = []


def report(n, ok, detail):
    """Record and print one acceptance line."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def qfi_sweep(alpha):
    """The sizes x rates grid for one ramp exponent (cached)."""
    sweep = SweepConfig(base={"schedule.alpha": float(alpha)}, axes={"tau_q": RATES, "N": SIZES},
                        max_concurrency=1)
    res = run_sweep(sweep, CACHE_DIR / f"qfi_alpha{alpha}")
    assert not res.failed, res.failed
    return res.rows


def profile_run():
    sweep = SweepConfig(base={}, axes={"tau_q": [5], "N": [64]}, max_concurrency=1)
    res = run_sweep(sweep, CACHE_DIR / "profile_N64_tau5")
    assert not res.failed, res.failed
    return res


@pytest.fixture(scope="session")
def sweep_alpha1():
    return qfi_sweep(1)


@pytest.fixture(scope="session")
def sweep_alpha2():
    return qfi_sweep(2)


@pytest.fixture(scope="session")
def sweep_alpha3():
    return qfi_sweep(3)
