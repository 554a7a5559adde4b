import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trcld.core import z_channel  # noqa: E402
from trcld.functionals import ModelConfig  # noqa: E402


@pytest.fixture(scope="session")
def zcfg():
    return ModelConfig.create(z_channel(), np.array([0.5, 0.5]))


@pytest.fixture(scope="session")
def zero_cfg():
    return ModelConfig.create(z_channel(), np.array([0.5, 0.5]), "zero")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def report(tag: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} [{tag}] {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
