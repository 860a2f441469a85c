import numpy as np
import pytest

from fragility.network import build_network
from fragility.shock import build_model


def random_jumps(rng, n_days, n_markets, p=0.1):
    return (rng.random((n_days, n_markets)) < p).astype(np.int8)


def random_model(rng, n=6, days=120, p=0.15, **kw):
    """Transmission model built from a random jump window; every market jumps at least once."""
    I = random_jumps(rng, days, n, p)
    I[rng.integers(0, days, n), np.arange(n)] = 1
    net = build_network(I, tuple(f"m{k}" for k in range(n)))
    return build_model(net, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="levels.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p

    return _write


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the terminal summary."""

    def _record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(passed), detail)
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
