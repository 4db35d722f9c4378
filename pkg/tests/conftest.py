import numpy as np
import pytest

from bendroc.binning import BinPartition
from bendroc.model import BinModel, BinStats
from bendroc.synth import gen_example1, gen_example2


def model_from_stats(stats):
    """BinModel over a dummy 1-D partition with exactly ``len(stats)`` bins."""
    stats = tuple(stats)
    n = len(stats)
    if n == 1:
        part = BinPartition.single(1)
    elif n >= 3:
        part = BinPartition((np.arange(n - 1, dtype=float),), (0,), 1)
    else:
        raise ValueError("dummy partitions support 1 or >= 3 bins")
    return BinModel(stats, part, (1e-6, 1e-6))


def sym_bin(**kw):
    base = dict(mu_pos=1.0, sigma_pos=1.0, mu_neg=-1.0, sigma_neg=1.0, p_pos=1.0, p_neg=1.0)
    base.update(kw)
    return BinStats(**base)


@pytest.fixture(scope="session")
def ex1():
    return gen_example1(20000, 0)


@pytest.fixture(scope="session")
def ex2():
    return gen_example2(20000, 0)


ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
