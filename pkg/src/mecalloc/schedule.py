"""Makespan formulas and earliest-start schedules for the upload/exec/download pipeline.

Uploading, executing and downloading behave as three machines visited in
that order, all tasks following one common sequence. In the strict model
the radio is half-duplex: no download may start before the last upload has
finished. The relaxed model drops that rule.

The functions here are generic over the array dtype, so integer durations
give exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model import Schedule, check_sequence


@dataclass(frozen=True, eq=False)
class DurationTriple:
    t_u: np.ndarray
    t_e: np.ndarray
    t_d: np.ndarray

    def __init__(self, t_u, t_e, t_d):
        arrs = [np.asarray(v) for v in (t_u, t_e, t_d)]
        if any(a.ndim != 1 for a in arrs) or len({len(a) for a in arrs}) != 1:
            raise DomainError("t_u, t_e and t_d must be 1-D with equal lengths")
        if any(np.any(a < 0) for a in arrs):
            raise DomainError("durations must be nonnegative")
        for name, a in zip(("t_u", "t_e", "t_d"), arrs):
            object.__setattr__(self, name, a)

    @property
    def K(self) -> int:
        return len(self.t_u)

    @classmethod
    def from_allocation(cls, instance, alloc, *, exec_s=None):
        t_e = instance.exec_durations() if exec_s is None else exec_s
        return cls(alloc.upload_s, t_e, alloc.download_s)


# relative slack for "makespan <= T": the closed-form root fills T only to
# within a few ulps, and summation order differs between formulas
DEADLINE_RTOL = 1e-12


def meets_deadline(span, deadline_s) -> bool:
    return span <= deadline_s * (1.0 + DEADLINE_RTOL)


def _exclusive_cumsum(x):
    out = np.zeros_like(x)
    out[..., 1:] = np.cumsum(x[..., :-1], axis=-1)
    return out


def inner_max(u, e, d):
    """max over i <= j of (E_j - D_{j-1}) + (U_i - E_{i-1}) along the last axis.

    Arguments are position-ordered, possibly stacked (one sequence per row).
    """
    E = np.cumsum(e, axis=-1)
    U = np.cumsum(u, axis=-1)
    a = U - _exclusive_cumsum(e)
    best_prefix = np.maximum.accumulate(a, axis=-1)
    return np.max(E - _exclusive_cumsum(d) + best_prefix, axis=-1)


def _ordered(seq, d: DurationTriple):
    idx = np.asarray(check_sequence(seq, d.K))
    return d.t_u[idx], d.t_e[idx], d.t_d[idx]


def makespan(seq, d: DurationTriple):
    """Minimum completion time of the last download, uploads before any download."""
    u, e, dd = _ordered(seq, d)
    return (max(inner_max(u, e, dd), u.sum()) + dd.sum()).item()


def makespan_relaxed(seq, d: DurationTriple):
    """Same as :func:`makespan` but uploads and downloads may overlap."""
    u, e, dd = _ordered(seq, d)
    return (inner_max(u, e, dd) + dd.sum()).item()


def build_schedule(seq, d: DurationTriple, allow_overlap: bool = False) -> Schedule:
    """Earliest-start (no inserted idle time) schedule for a fixed sequence."""
    seq = check_sequence(seq, d.K)
    dtype = np.result_type(d.t_u, d.t_e, d.t_d)
    zero = dtype.type(0)
    K = d.K
    s_u, s_e, s_d = (np.zeros(K, dtype=dtype) for _ in range(3))
    c_u, c_e, c_d = (np.zeros(K, dtype=dtype) for _ in range(3))

    prev_u = prev_e = prev_d = zero
    for k in seq:
        s_u[k] = prev_u
        c_u[k] = s_u[k] + d.t_u[k]
        s_e[k] = max(c_u[k], prev_e)
        c_e[k] = s_e[k] + d.t_e[k]
        prev_u, prev_e = c_u[k], c_e[k]

    all_uploaded = prev_u
    for pos, k in enumerate(seq):
        ready = max(c_e[k], prev_d)
        if pos == 0 and not allow_overlap:
            ready = max(ready, all_uploaded)
        s_d[k] = ready
        c_d[k] = s_d[k] + d.t_d[k]
        prev_d = c_d[k]

    return Schedule(seq, s_u, s_e, s_d, c_u, c_e, c_d)


@dataclass
class FeasibilityReport:
    ok: bool
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok

    def kinds(self) -> set:
        return {v[0] for v in self.violations}


def check_feasible(sched: Schedule, d: DurationTriple, deadline_s: float,
                   allow_overlap: bool = False, atol: float = 1e-9) -> FeasibilityReport:
    """Check a schedule against every timing rule of the offloading model.

    Violations are returned as ``(kind, message)`` with kind one of
    ``duration`` (completion != start + duration), ``precedence`` (a task's
    own upload -> exec -> download order), ``deadline``, ``ordering`` (one
    task at a time per machine along the sequence) and ``overlap`` (a
    download starting before the last upload ends).
    """
    K = d.K
    seq = check_sequence(sched.sequence, K)
    out = []
    ops = (("upload", sched.start_upload, sched.complete_upload, d.t_u),
           ("exec", sched.start_exec, sched.complete_exec, d.t_e),
           ("download", sched.start_download, sched.complete_download, d.t_d))
    for name, s, c, t in ops:
        for k in np.flatnonzero(np.abs(c - (s + t)) > atol):
            out.append(("duration", f"task {k + 1}: {name} completion != start + duration"))

    for k in range(K):
        if sched.start_upload[k] < -atol:
            out.append(("precedence", f"task {k + 1}: upload starts before time 0"))
        if sched.start_exec[k] < sched.complete_upload[k] - atol:
            out.append(("precedence", f"task {k + 1}: execution starts before its upload completes"))
        if sched.start_download[k] < sched.complete_exec[k] - atol:
            out.append(("precedence", f"task {k + 1}: download starts before its execution completes"))
        if sched.complete_download[k] > deadline_s + atol:
            out.append(("deadline", f"task {k + 1}: download completes after the deadline"))

    for name, s, c, _ in ops:
        for p in range(1, K):
            a, b = seq[p - 1], seq[p]
            if s[b] < c[a] - atol:
                out.append(("ordering",
                            f"position {p + 1}: {name} of task {b + 1} overlaps task {a + 1}"))

    if not allow_overlap and sched.start_download[seq[0]] < sched.complete_upload[seq[-1]] - atol:
        out.append(("overlap", "first download starts before the last upload completes"))

    return FeasibilityReport(not out, out)
