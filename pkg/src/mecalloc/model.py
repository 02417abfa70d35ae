"""Core value types shared by every solver.

All quantities are SI: seconds, joules, bits, CPU-cycles, Hz, watts.
Task positions in a :data:`Sequence` are stored 0-based; files and CLI
output use 1-based task numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence as _Seq

import numpy as np

from .errors import DomainError

Sequence = tuple  # tuple[int, ...]: position p holds task index seq[p]


def _frozen_array(values, name, *, positive=False, nonnegative=False):
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if positive and np.any(arr <= 0):
        raise DomainError(f"{name} entries must be > 0")
    if nonnegative and np.any(arr < 0):
        raise DomainError(f"{name} entries must be >= 0")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TaskSpec:
    upload_bits: float
    workload_cycles: float
    download_bits: float

    def __post_init__(self):
        for name in ("upload_bits", "workload_cycles", "download_bits"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"TaskSpec.{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class SystemParams:
    deadline_s: float
    bs_cpu_hz: float
    switched_capacitance: float
    bandwidth_hz: float
    noise_power_w: float
    bs_weight: float

    def __post_init__(self):
        for name in ("deadline_s", "bs_cpu_hz", "switched_capacitance",
                     "bandwidth_hz", "noise_power_w"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"SystemParams.{name} must be finite and > 0, got {v!r}")
        if not (math.isfinite(self.bs_weight) and self.bs_weight >= 0):
            raise DomainError(f"SystemParams.bs_weight must be >= 0, got {self.bs_weight!r}")

    def replace(self, **changes) -> "SystemParams":
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        vals.update(changes)
        return SystemParams(**vals)


@dataclass(frozen=True, eq=False)
class Instance:
    tasks: tuple
    channel_gains: np.ndarray
    params: SystemParams

    def __init__(self, tasks: _Seq[TaskSpec], channel_gains, params: SystemParams):
        tasks = tuple(tasks)
        if len(tasks) < 1:
            raise DomainError("an instance needs at least one task")
        gains = _frozen_array(channel_gains, "channel_gains", positive=True)
        if len(gains) != len(tasks):
            raise DomainError(
                f"{len(tasks)} tasks but {len(gains)} channel gains")
        object.__setattr__(self, "tasks", tasks)
        object.__setattr__(self, "channel_gains", gains)
        object.__setattr__(self, "params", params)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.tasks == other.tasks and self.params == other.params
                and np.array_equal(self.channel_gains, other.channel_gains))

    __hash__ = None

    @property
    def K(self) -> int:
        return len(self.tasks)

    @property
    def upload_bits(self) -> np.ndarray:
        return np.array([t.upload_bits for t in self.tasks])

    @property
    def download_bits(self) -> np.ndarray:
        return np.array([t.download_bits for t in self.tasks])

    @property
    def workload_cycles(self) -> np.ndarray:
        return np.array([t.workload_cycles for t in self.tasks])

    def exec_durations(self) -> np.ndarray:
        return self.workload_cycles / self.params.bs_cpu_hz

    def with_params(self, **changes) -> "Instance":
        return Instance(self.tasks, self.channel_gains, self.params.replace(**changes))


@dataclass(frozen=True, eq=False)
class Allocation:
    """Per-task uploading and downloading durations (task-indexed)."""

    upload_s: np.ndarray
    download_s: np.ndarray

    def __init__(self, upload_s, download_s):
        up = _frozen_array(upload_s, "upload_s", nonnegative=True)
        down = _frozen_array(download_s, "download_s", nonnegative=True)
        if up.shape != down.shape:
            raise DomainError("upload_s and download_s lengths differ")
        object.__setattr__(self, "upload_s", up)
        object.__setattr__(self, "download_s", down)

    def __eq__(self, other):
        if not isinstance(other, Allocation):
            return NotImplemented
        return (np.array_equal(self.upload_s, other.upload_s)
                and np.array_equal(self.download_s, other.download_s))

    __hash__ = None

    @property
    def K(self) -> int:
        return len(self.upload_s)

    def total_time(self) -> float:
        return float(self.upload_s.sum() + self.download_s.sum())

    def check_box(self, deadline_s: float, rtol: float = 1e-9) -> None:
        """Raise DomainError unless every duration lies in [0, T]."""
        hi = deadline_s * (1.0 + rtol)
        if np.any(self.upload_s > hi) or np.any(self.download_s > hi):
            raise DomainError("a duration exceeds the deadline T")


@dataclass(frozen=True, eq=False)
class Schedule:
    """Start/completion times of the three operations, indexed by task."""

    sequence: Sequence
    start_upload: np.ndarray
    start_exec: np.ndarray
    start_download: np.ndarray
    complete_upload: np.ndarray
    complete_exec: np.ndarray
    complete_download: np.ndarray

    @property
    def final_completion(self) -> float:
        return float(self.complete_download.max())


@dataclass(frozen=True, eq=False)
class SolveResult:
    allocation: Allocation
    sequence: Optional[Sequence]
    energy_j: float
    makespan_s: float
    method: str
    diagnostics: dict = field(default_factory=dict)


def exec_duration(task: TaskSpec, params: SystemParams) -> float:
    """BS executing duration N / F."""
    return task.workload_cycles / params.bs_cpu_hz


def check_sequence(seq, K: int) -> Sequence:
    """Validate a 0-based permutation of range(K) and return it as a tuple."""
    seq = tuple(int(i) for i in seq)
    if len(seq) != K or sorted(seq) != list(range(K)):
        raise DomainError(f"{seq!r} is not a permutation of {K} tasks")
    return seq
