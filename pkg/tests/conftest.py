import numpy as np
import pytest

from ggev.config import RunConfig
from ggev.weights import init_weights


def rel_err(actual, expected) -> float:
    """Max-norm relative error: max|a - e| / max|e| (absolute when ``expected`` is all zero)."""
    actual = np.asarray(actual, np.float64)
    expected = np.asarray(expected, np.float64)
    assert actual.shape == expected.shape, (actual.shape, expected.shape)
    scale = np.abs(expected).max() if expected.size else 0.0
    diff = np.abs(actual - expected).max() if expected.size else 0.0
    return float(diff / scale) if scale > 0 else float(diff)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cfg():
    """Tiny channel plan so unit tests on whole stages stay fast."""
    return RunConfig(channels={2: 8, 4: 16, 8: 16, 16: 16}, d_max4=6, s=2, hidden=8, radius=2,
                     encoder_channels=4).validate()


@pytest.fixture(scope="session")
def small_weights(small_cfg):
    return init_weights(small_cfg)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(capsys):
    """``check(n, title, ok, detail)`` records and prints one verdict line, then asserts ``ok``."""

    def check(n: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        ACCEPTANCE[n] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
