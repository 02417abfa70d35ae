"""Self-check suites behind ``mecalloc verify``.

Each suite draws random cases from a seeded generator and compares a fast
routine with a slower reference: closed-form makespans against an event
simulation, Johnson's rule against exhaustive search, and the convex
solver against its own optimality conditions.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .closed_form import solve_negligible
from .constrained import kkt_residual, solve_duration_given_sequence
from .model import Instance, SystemParams, TaskSpec
from .schedule import DurationTriple, makespan, makespan_relaxed
from .sequencing import brute_force_sequence, johnson_condition_holds, johnson_sequence

SUITES = ("makespan", "johnson", "kkt")


def simulate(seq, d: DurationTriple, allow_overlap: bool = False) -> float:
    """Event-driven run of the three-machine pipeline; returns the last completion.

    Each machine serves tasks in sequence order and starts an operation as
    soon as the machine is free and the task's previous stage is done. In
    the strict model the download machine stays closed until every upload
    has finished.
    """
    seq = [int(k) for k in seq]
    K = len(seq)
    durations = (d.t_u, d.t_e, d.t_d)
    nxt = [0, 0, 0]          # next position each machine will serve
    busy = [False] * 3
    stage_done = [[False] * K for _ in range(3)]
    uploads_left = K
    events = []              # (time, order, machine, task)
    counter = 0
    now = 0
    end = 0

    def ready(m):
        if busy[m] or nxt[m] >= K:
            return False
        k = seq[nxt[m]]
        if m > 0 and not stage_done[m - 1][k]:
            return False
        if m == 2 and not allow_overlap and uploads_left > 0:
            return False
        return True

    while True:
        started = True
        while started:
            started = False
            for m in range(3):
                if ready(m):
                    k = seq[nxt[m]]
                    nxt[m] += 1
                    busy[m] = True
                    heapq.heappush(events, (now + durations[m][k], counter, m, k))
                    counter += 1
                    started = True
        if not events:
            break
        now, _, m, k = heapq.heappop(events)
        busy[m] = False
        stage_done[m][k] = True
        if m == 0:
            uploads_left -= 1
        end = max(end, now)
    return end


def random_triple(rng, K, integer=False, high=100):
    if integer:
        return DurationTriple(*(rng.integers(0, high + 1, size=K) for _ in range(3)))
    return DurationTriple(*(rng.uniform(0.0, 1.0, size=K) for _ in range(3)))


def random_johnson_triple(rng, K, high=100):
    """Integer durations with min upload >= max execution."""
    t_e = rng.integers(0, high // 2 + 1, size=K)
    t_u = rng.integers(t_e.max(), high + 1, size=K)
    t_d = rng.integers(0, high + 1, size=K)
    return DurationTriple(t_u, t_e, t_d)


def random_instance(rng, K, *, deadline_s=0.08, bandwidth_hz=1e7, bs_weight=None,
                    exec_fraction=(0.2, 0.7)) -> Instance:
    """Instance whose total execution takes a random share of the deadline.

    Shares in the given range make the execution-time constraints bind on
    most draws, so the sequence-aware solver does real work.
    """
    up = rng.uniform(1e5, 5e5, size=K)
    down = rng.uniform(1e5, 5e5, size=K)
    cycles = rng.uniform(0.5e7, 1.5e7, size=K)
    gains = rng.exponential(1e-3, size=K)
    gains = np.maximum(gains, 1e-6)
    share = rng.uniform(*exec_fraction)
    F = cycles.sum() / (share * deadline_s)
    beta = rng.uniform(0.05, 1.0) if bs_weight is None else bs_weight
    params = SystemParams(deadline_s=deadline_s, bs_cpu_hz=F, switched_capacitance=1e-29,
                          bandwidth_hz=bandwidth_hz, noise_power_w=1e-9, bs_weight=beta)
    tasks = [TaskSpec(upload_bits=u, workload_cycles=c, download_bits=v)
             for u, c, v in zip(up, cycles, down)]
    return Instance(tasks, gains, params)


@dataclass
class SuiteReport:
    name: str
    passed: int = 0
    failed: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed > 0

    def record(self, ok: bool, what: str):
        if ok:
            self.passed += 1
        else:
            self.failed += 1
            if len(self.failures) < 5:
                self.failures.append(what)


def suite_makespan(trials: int, rng) -> SuiteReport:
    rep = SuiteReport("makespan")
    for i in range(trials):
        K = int(rng.integers(1, 11))
        d = random_triple(rng, K)
        seq = tuple(rng.permutation(K))
        for overlap, formula in ((False, makespan), (True, makespan_relaxed)):
            a, b = formula(seq, d), simulate(seq, d, allow_overlap=overlap)
            rep.record(abs(a - b) <= 1e-12 * max(1.0, abs(b)),
                       f"trial {i}: overlap={overlap} formula {a!r} vs simulation {b!r}")
    return rep


def suite_johnson(trials: int, rng) -> SuiteReport:
    """Johnson vs brute force when dominance holds, and the half-duplex property.

    The second check: every sequence that minimises the relaxed makespan
    also minimises the strict one.
    """
    rep = SuiteReport("johnson")
    for i in range(trials):
        K = int(rng.integers(1, 8))
        d = random_johnson_triple(rng, K)
        assert johnson_condition_holds(d)
        _, best, _ = brute_force_sequence(d, "relaxed")
        got = makespan_relaxed(johnson_sequence(d), d)
        rep.record(got == best, f"trial {i}: johnson {got} vs optimum {best}")

        K = int(rng.integers(1, 7))
        d = random_triple(rng, K, integer=True)
        _, _, relaxed_opt = brute_force_sequence(d, "relaxed")
        _, strict_best, _ = brute_force_sequence(d, "constrained")
        worst = max(makespan(s, d) for s in relaxed_opt)
        rep.record(worst == strict_best,
                   f"trial {i}: relaxed-optimal sequence has strict makespan {worst} > {strict_best}")
    return rep


def suite_kkt(trials: int, rng) -> SuiteReport:
    rep = SuiteReport("kkt")
    for i in range(trials):
        K = int(rng.integers(1, 5))
        inst = random_instance(rng, K, exec_fraction=(0.5, 0.95))
        seq = tuple(int(v) for v in rng.permutation(K))
        res = solve_duration_given_sequence(inst, seq)
        T = inst.params.deadline_s
        r = kkt_residual(inst, seq, res.allocation)
        rep.record(r <= 1e-8 and res.makespan_s <= T + 1e-9,
                   f"trial {i}: kkt residual {r:.3g}, makespan {res.makespan_s!r} (T={T})")
        neg = solve_negligible(inst)
        rep.record(abs(neg.allocation.total_time() - T) <= 1e-9 * T,
                   f"trial {i}: closed-form durations sum to {neg.allocation.total_time()!r}")
    return rep


def run_suites(names, trials: int, seed: int) -> list:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fns = {"makespan": suite_makespan, "johnson": suite_johnson, "kkt": suite_kkt}
    out = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed, k])
        out.append(fns[name](trials, rng))
    return out
