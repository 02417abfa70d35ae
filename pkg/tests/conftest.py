import numpy as np
import pytest

from mecalloc import Instance, SystemParams, TaskSpec


def make_params(**kw):
    base = dict(deadline_s=0.08, bs_cpu_hz=6e9, switched_capacitance=1e-29,
                bandwidth_hz=1e6, noise_power_w=1e-9, bs_weight=0.1)
    base.update(kw)
    return SystemParams(**base)


def make_instance(up, down, cycles, gains, **kw):
    tasks = [TaskSpec(upload_bits=u, workload_cycles=c, download_bits=d)
             for u, c, d in zip(up, cycles, down)]
    return Instance(tasks, gains, make_params(**kw))


@pytest.fixture
def params():
    return make_params()


@pytest.fixture
def single_task():
    # reference instance for the frozen multiplier
    return make_instance([1e5], [1e5], [1e7], [1e-3])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
