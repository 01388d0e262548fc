import numpy as np
import pytest

from pathrag.llm import Gateway, MockBackend, ResponseCache


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mock_gateway(tmp_path):
    backend = MockBackend()
    return Gateway(backend, backend, cache=ResponseCache(tmp_path / "cache"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
