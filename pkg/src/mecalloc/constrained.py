"""Minimum-energy durations for a fixed processing sequence.

With the sequence fixed, the makespan is a maximum of linear functions of
the durations, so "makespan <= T" expands into K(K+1)/2 + 1 linear rows:

    sum_{p<=i} t_u[p] + sum_{p>=j} t_d[p] <= T - sum_{p=i..j} t_e[p]   (i <= j)
    sum_k t_u[k] + t_d[k] <= T

(positions p along the sequence). The objective is separable and convex,
so a log-barrier method with damped Newton steps solves it; the barrier
iterate is then polished onto its active face with a few equality-
constrained Newton steps so the KKT conditions hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .closed_form import solve_negligible
from .energy import total_weighted_energy
from .errors import InfeasibleError
from .model import Allocation, Instance, SolveResult, check_sequence
from .schedule import DurationTriple, makespan, meets_deadline
from .special import LN2

MIN_DURATION_S = 1e-12
START_MARGIN = 1e-3
GAP_RTOL = 1e-10
ACTIVE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class ConvexProgram:
    """min sum_i w_i E(bits_i, t_i) s.t. A t <= b, lower <= t <= upper.

    Columns are the task-indexed upload durations followed by the download
    durations; downloads are dropped when the BS weight is zero.
    """

    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    bits: np.ndarray
    gains: np.ndarray
    weights: np.ndarray
    bandwidth_hz: float
    noise_power_w: float
    K: int
    has_download: bool

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def _parts(self, t):
        c = self.bits * (LN2 / self.bandwidth_hz)
        k = self.weights * self.noise_power_w / self.gains
        return c, k

    def objective(self, t) -> float:
        c, k = self._parts(t)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            val = np.sum(k * t * np.expm1(c / t))
        return float(val) if np.isfinite(val) else np.inf

    def gradient(self, t):
        c, k = self._parts(t)
        y = c / t
        with np.errstate(over="ignore", invalid="ignore"):
            return k * (np.expm1(y) - y * np.exp(y))

    def hessian_diag(self, t):
        c, k = self._parts(t)
        y = c / t
        with np.errstate(over="ignore"):
            return k * y * y * np.exp(y) / t

    def complex_step_gradient(self, t, rel_step: float = 1e-30):
        """Objective gradient by complex-step differentiation (no cancellation)."""
        c, k = self._parts(t)
        h = rel_step * t
        tc = t + 1j * h
        with np.errstate(over="ignore", invalid="ignore"):
            return np.imag(k * tc * np.expm1(c / tc)) / h

    def split(self, t):
        t = np.asarray(t, dtype=float)
        up = t[:self.K]
        down = t[self.K:] if self.has_download else np.zeros(self.K)
        return up, down

    def pack(self, alloc: Allocation):
        if self.has_download:
            return np.concatenate([alloc.upload_s, alloc.download_s])
        return np.array(alloc.upload_s, dtype=float)


def build_program(instance: Instance, seq) -> ConvexProgram:
    K = instance.K
    seq = check_sequence(seq, K)
    p = instance.params
    T = p.deadline_s
    t_e = instance.exec_durations()
    has_down = p.bs_weight > 0
    n = 2 * K if has_down else K

    rows, rhs = [], []
    for i in range(K):
        for j in range(i, K):
            row = np.zeros(n)
            row[list(seq[:i + 1])] = 1.0
            if has_down:
                row[[K + s for s in seq[j:]]] = 1.0
            rows.append(row)
            rhs.append(T - float(np.sum(t_e[list(seq[i:j + 1])])))
    rows.append(np.ones(n))
    rhs.append(T)

    h = instance.channel_gains
    if has_down:
        bits = np.concatenate([instance.upload_bits, instance.download_bits])
        gains = np.concatenate([h, h])
        weights = np.concatenate([np.ones(K), np.full(K, p.bs_weight)])
    else:
        bits, gains, weights = instance.upload_bits, h.copy(), np.ones(K)
    return ConvexProgram(np.array(rows), np.array(rhs), np.full(n, MIN_DURATION_S),
                         np.full(n, T), bits, gains, weights,
                         p.bandwidth_hz, p.noise_power_w, K, has_down)


def _check_feasible_instance(instance: Instance):
    T = instance.params.deadline_s
    total_exec = float(instance.exec_durations().sum())
    if total_exec >= T:
        raise InfeasibleError(
            f"total execution time {total_exec:.6g} s leaves no transmission time "
            f"before the deadline {T:.6g} s")
    return total_exec


def _interior_start(instance: Instance, seq, total_exec, neg: SolveResult):
    """Shrink the negligible-execution durations until the makespan sits inside T."""
    T = instance.params.deadline_s
    up, down = neg.allocation.upload_s, neg.allocation.download_s
    t_e = instance.exec_durations()
    target = T - min(START_MARGIN * T, 0.5 * (T - total_exec))

    def span(c):
        return makespan(seq, DurationTriple(c * up, t_e, c * down))

    if span(1.0) <= target:
        c = 1.0
    else:
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if span(mid) <= target:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15:
                break
        c = lo
    start = Allocation(c * up, c * down)
    if np.min(start.upload_s) <= 10 * MIN_DURATION_S:
        raise InfeasibleError("deadline leaves no usable transmission time")
    return start


class _Scaled:
    """The program in units of T with the objective normalised to 1 at the start."""

    def __init__(self, prog: ConvexProgram, T: float, f0: float):
        self.prog, self.T, self.f0 = prog, T, f0
        self.A = prog.A
        self.b = prog.b / T
        self.lo = prog.lower / T
        self.hi = prog.upper / T

    def f(self, z):
        return self.prog.objective(z * self.T) / self.f0

    def grad(self, z):
        return self.prog.gradient(z * self.T) * self.T / self.f0

    def hess(self, z):
        return self.prog.hessian_diag(z * self.T) * self.T ** 2 / self.f0

    def slacks(self, z):
        return self.b - self.A @ z, z - self.lo, self.hi - z


def _solve_scaled(H, g):
    d = np.sqrt(np.abs(np.diag(H)))
    d[d == 0] = 1.0
    Hs = H / d[:, None] / d[None, :]
    try:
        y = np.linalg.solve(Hs, -g / d)
    except np.linalg.LinAlgError:
        y = np.linalg.lstsq(Hs, -g / d, rcond=None)[0]
    return y / d


def _try_polish(sp: _Scaled, z, t, f_bar, gap):
    """Polish onto the face the barrier multipliers point at; None if it fails."""
    s1, _, _ = sp.slacks(z)
    # row i looks active when its barrier multiplier 1/(t s_i) exceeds s_i;
    # rows with tiny multipliers keep larger slacks, so wider guesses follow.
    # Any guess is safe: the candidate must pass feasibility and stationarity.
    for tol in (1.0 / np.sqrt(t), ACTIVE_RTOL, 1e-10, 1e-6, 1e-5, 1e-4, 1e-3):
        cand = _polish(sp, z, tol)
        if cand is None:
            continue
        c1, c2, c3 = sp.slacks(cand)
        if np.min(c1) < -1e-13 or np.min(c2) <= 0 or np.min(c3) < 0:
            continue
        f_c = sp.f(cand)
        # the barrier point is within gap of optimal; so is any KKT point
        if not (np.isfinite(f_c) and abs(f_c - f_bar) <= max(2 * gap, 1e-13 * abs(f_bar))):
            continue
        g = sp.grad(cand)
        resid, mu = _stationarity(g, sp.A, c1, max(tol, 1e-12))
        if resid <= 1e-10:
            # exact complementarity on the face, so the only slack in the
            # Lagrangian bound is the stationarity residual over the unit box
            act = c1 <= max(tol, 1e-12)
            r = g + sp.A[act].T @ mu
            # the barrier's own bound f_bar - gap <= f* also still applies
            cert = min(np.sum(np.abs(r)), max(f_c - f_bar + gap, 0.0))
            return cand, float(cert / f_c)
    return None


def _barrier(sp: _Scaled, z, t0, max_outer=40, max_newton=80, mu=10.0):
    """Log-barrier path following; tries an active-face polish once the gap is small.

    Returns ``(z, gap, newton_steps, rounds, polished)`` where ``gap`` bounds
    the relative suboptimality of ``z``.
    """
    m = len(sp.b) + 2 * len(z)
    t = t0
    newton_total = 0
    rounds = 0

    def phi(zz, tt):
        s1, s2, s3 = sp.slacks(zz)
        if np.any(s1 <= 0) or np.any(s2 <= 0) or np.any(s3 <= 0):
            return np.inf
        fv = sp.f(zz)
        if not np.isfinite(fv):
            return np.inf
        return tt * fv - np.sum(np.log(s1)) - np.sum(np.log(s2)) - np.sum(np.log(s3))

    for rounds in range(1, max_outer + 1):
        for _ in range(max_newton):
            s1, s2, s3 = sp.slacks(z)
            g = t * sp.grad(z) + sp.A.T @ (1.0 / s1) - 1.0 / s2 + 1.0 / s3
            H = (sp.A.T * (1.0 / s1 ** 2)) @ sp.A
            H[np.diag_indices_from(H)] += t * sp.hess(z) + 1.0 / s2 ** 2 + 1.0 / s3 ** 2
            dz = _solve_scaled(H, g)
            dec2 = -float(g @ dz)
            newton_total += 1
            if dec2 <= 1e-10:
                break
            # largest step keeping every slack positive
            step = 1.0
            Ad = sp.A @ dz
            for sl, rate in ((s1, Ad), (s2, -dz), (s3, dz)):
                pos = rate > 0
                if np.any(pos):
                    step = min(step, 0.99 * float(np.min(sl[pos] / rate[pos])))
            base = phi(z, t)
            # phi carries t*f ~ 1e11 late on; allow for its rounding
            slop = 1e-14 * abs(base)
            while step > 1e-14:
                if phi(z + step * dz, t) <= base - 0.25 * step * dec2 + slop:
                    break
                step *= 0.5
            else:
                break
            z = z + step * dz
        gap = m / t
        fz = sp.f(z)
        if gap <= 1e-6 * fz:
            polished = _try_polish(sp, z, t, fz, gap)
            if polished is not None:
                return polished[0], polished[1], newton_total, rounds, True
        if gap <= GAP_RTOL * max(fz - gap, 1e-300):
            break
        t *= mu
    return z, m / t / sp.f(z), newton_total, rounds, False


def _polish(sp: _Scaled, z, active_tol):
    """Equality-constrained Newton on the face of near-active rows."""
    s1, _, _ = sp.slacks(z)
    act = s1 <= active_tol
    if not np.any(act):
        return None
    Aa, ba = sp.A[act], sp.b[act]
    n = len(z)
    zz = z.copy()
    for _ in range(30):
        g = sp.grad(zz)
        h = sp.hess(zz)
        d = np.sqrt(h)
        d[d == 0] = 1.0
        KKT = np.zeros((n + len(ba), n + len(ba)))
        KKT[:n, :n] = np.diag(h / d ** 2)
        KKT[:n, n:] = (Aa / d[None, :]).T
        KKT[n:, :n] = Aa / d[None, :]
        rhs = np.concatenate([-g / d, ba - Aa @ zz])
        sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
        dz = sol[:n] / d
        step = 1.0
        while np.any(zz + step * dz <= sp.lo) and step > 1e-6:
            step *= 0.5
        zz = zz + step * dz
        if np.max(np.abs(step * dz)) <= 1e-15 * np.max(np.abs(zz)):
            break
    return zz


def _stationarity(grad, A, slack, active_tol):
    """Relative stationarity residual with nonnegative multipliers on near-active rows."""
    scale = float(np.max(np.abs(grad)))
    if scale == 0:
        return 0.0, np.zeros(0)
    act = slack <= active_tol
    if not np.any(act):
        return 1.0, np.zeros(0)
    Aa = A[act]
    mu, _ = nnls(Aa.T, -grad / scale, maxiter=50 * A.shape[1])
    resid = float(np.max(np.abs(grad / scale + Aa.T @ mu)))
    return resid, mu * scale


def kkt_residual(instance: Instance, seq, alloc: Allocation) -> float:
    """Stationarity violation of the KKT system at ``alloc`` (0 = optimal).

    The objective gradient comes from complex-step differentiation (an
    independent route from the analytic derivative the solver uses); rows
    with slack <= 1e-8 T are treated as active and receive nonnegative
    multipliers by NNLS. The result is relative to the largest gradient
    entry, so an allocation with no active constraint scores 1.
    """
    prog = build_program(instance, seq)
    x = prog.pack(alloc)
    T = instance.params.deadline_s
    A = np.vstack([prog.A, -np.eye(prog.n), np.eye(prog.n)])
    b = np.concatenate([prog.b, -prog.lower, prog.upper])
    slack = b - A @ x
    grad = prog.complex_step_gradient(x)
    resid, _ = _stationarity(grad, A, slack, ACTIVE_RTOL * T)
    return resid


def solve_duration_given_sequence(instance: Instance, seq,
                                  negligible: SolveResult | None = None) -> SolveResult:
    """Minimum weighted energy over durations with makespan(seq) <= T.

    ``negligible`` may carry an already computed :func:`solve_negligible`
    result for the same instance; it seeds the interior starting point and
    supplies a lower bound on the optimum.
    """
    seq = check_sequence(seq, instance.K)
    total_exec = _check_feasible_instance(instance)
    T = instance.params.deadline_s
    prog = build_program(instance, seq)
    closed_form_solves = 0
    if negligible is None:
        negligible = solve_negligible(instance)
        closed_form_solves = 1

    diag = {
        "closed_form_solves": closed_form_solves,
        "convex_solves": 1,
        "download_degenerate": not prog.has_download,
    }
    t_neg = DurationTriple.from_allocation(instance, negligible.allocation)
    if meets_deadline(makespan(seq, t_neg), T):
        # the relaxation's optimum already fits: nothing left to optimise
        alloc = negligible.allocation
        diag.update(relaxation_feasible=True, duality_gap_rel=0.0, newton_iterations=0,
                    barrier_rounds=0, polished=False)
    else:
        start = _interior_start(instance, seq, total_exec, negligible)
        z0 = prog.pack(start) / T
        f0 = prog.objective(z0 * T)
        if not (np.isfinite(f0) and f0 > 0):
            raise InfeasibleError("no finite-energy interior point found")
        sp = _Scaled(prog, T, f0)
        lower = prog.objective(prog.pack(negligible.allocation)) / f0
        m = len(sp.b) + 2 * len(z0)
        t0 = m / min(max(1.0 - lower, 1e-9), 1.0)
        z, gap, newton_iters, rounds, polished = _barrier(sp, z0, t0)
        x = np.clip(z * T, prog.lower, None)
        up, down = prog.split(x)
        alloc = Allocation(up, down)
        diag.update(relaxation_feasible=False, duality_gap_rel=gap,
                    newton_iterations=newton_iters, barrier_rounds=rounds, polished=polished)

    d = DurationTriple.from_allocation(instance, alloc)
    energy = total_weighted_energy(instance, alloc).total_weighted_j
    diag["kkt_residual"] = kkt_residual(instance, seq, alloc)
    return SolveResult(alloc, seq, energy, makespan(seq, d), "sequence", diag)
