import sys

import numpy as np
import pytest

from pbmor.benchmarks import gen_rc
from pbmor.irka import irka_linear


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope='session')
def rc10():
    return gen_rc(10)


@pytest.fixture(scope='session')
def rc10_irka(rc10):
    return irka_linear(rc10, [1.0], 2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get('test_acceptance')
    if not mod or not mod.VERDICTS:
        return
    terminalreporter.section('acceptance criteria')
    for num in sorted(mod.VERDICTS):
        terminalreporter.write_line(mod.VERDICTS[num])
