import sys
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

BUNDLED = ("tiny3", "fig1", "ieee37_like")


@pytest.fixture(scope="session")
def solved():
    """Memoised solve_rpop keyed by case name and config overrides."""
    from robustmg.config import RunConfig
    from robustmg.net_model import load_bundled
    from robustmg.robust_solver import solve_rpop

    cache, seconds = {}, {}

    def key_of(name, overrides):
        return name, tuple(sorted(overrides.items()))

    def get(name, **overrides):
        key = key_of(name, overrides)
        if key not in cache:
            cfg = RunConfig(**overrides)
            t0 = time.perf_counter()
            cache[key] = (solve_rpop(load_bundled(name), cfg=cfg), cfg)
            seconds[key] = time.perf_counter() - t0
        return cache[key]

    get.seconds = lambda name, **overrides: seconds[key_of(name, overrides)]
    return get


CRITERIA: dict[int, str] = {}


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and fail on FAIL."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        CRITERIA[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
