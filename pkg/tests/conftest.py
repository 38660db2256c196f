import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def block_se(fn, values, n_blocks=50):
    """Mean and standard error of a statistic over contiguous blocks."""
    blocks = np.array_split(np.asarray(values), n_blocks)
    stats = np.array([fn(b) for b in blocks])
    return stats.mean(axis=0), stats.std(axis=0, ddof=1) / np.sqrt(n_blocks)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
