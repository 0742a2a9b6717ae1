import numpy as np
import pytest

from mebands.quantiles import QuantileProvider


@pytest.fixture(scope="session")
def fast_quantiles():
    """Cheap Monte-Carlo quantiles for unit tests (not for coverage claims)."""
    return QuantileProvider(replicates=2000, grid_m=1024, seed=11, threads=1)


@pytest.fixture(scope="session")
def full_quantiles(request):
    """Default-budget quantiles (1e5 replicates, m = 4096), cached across runs."""
    cache_dir = request.config.cache.mkdir("mebands-quantiles")
    return QuantileProvider(seed=0, cache_path=cache_dir / "quantiles.json")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        lines.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
