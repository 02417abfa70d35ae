import numpy as np
import pytest

from mecalloc import Allocation, Instance, SystemParams, TaskSpec, exec_duration
from mecalloc.errors import DomainError
from mecalloc.model import check_sequence

from conftest import make_params


def test_exec_duration():
    p = make_params()
    assert exec_duration(TaskSpec(1e5, 6e9, 1e5), p) == 1.0
    assert exec_duration(TaskSpec(1e5, 1e7, 1e5), p) == pytest.approx(1e7 / 6e9, rel=1e-15)


@pytest.mark.parametrize("field", ["upload_bits", "workload_cycles", "download_bits"])
def test_task_fields_must_be_positive(field):
    vals = dict(upload_bits=1e5, workload_cycles=1e7, download_bits=1e5)
    vals[field] = 0.0
    with pytest.raises(DomainError):
        TaskSpec(**vals)


def test_params_validation():
    with pytest.raises(DomainError):
        make_params(deadline_s=0.0)
    with pytest.raises(DomainError):
        make_params(bs_weight=-0.1)
    assert make_params(bs_weight=0.0).bs_weight == 0.0


def test_instance_shape_checks():
    p = make_params()
    t = TaskSpec(1e5, 1e7, 1e5)
    with pytest.raises(DomainError):
        Instance([t, t], [1e-3], p)
    with pytest.raises(DomainError):
        Instance([t], [0.0], p)
    with pytest.raises(DomainError):
        Instance([], [], p)


def test_instance_is_immutable():
    inst = Instance([TaskSpec(1e5, 1e7, 1e5)], [1e-3], make_params())
    with pytest.raises(ValueError):
        inst.channel_gains[0] = 1.0
    with pytest.raises(AttributeError):
        inst.params = make_params()


def test_with_params_and_equality():
    inst = Instance([TaskSpec(1e5, 1e7, 2e5)], [1e-3], make_params())
    other = inst.with_params(deadline_s=0.1)
    assert other.params.deadline_s == 0.1
    assert other != inst
    assert other.with_params(deadline_s=0.08) == inst


def test_allocation_box():
    a = Allocation([0.01, 0.02], [0.03, 0.0])
    assert a.total_time() == pytest.approx(0.06)
    a.check_box(0.08)
    with pytest.raises(DomainError):
        a.check_box(0.025)
    with pytest.raises(DomainError):
        Allocation([-1.0], [0.0])


def test_check_sequence():
    assert check_sequence([2, 0, 1], 3) == (2, 0, 1)
    with pytest.raises(DomainError):
        check_sequence([0, 0, 1], 3)
    with pytest.raises(DomainError):
        check_sequence([0, 1], 3)
