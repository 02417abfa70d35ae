"""Top-level solvers: exhaustive optimum, Johnson-based heuristic and baselines."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .closed_form import marginal_durations, solve_negligible
from .constrained import solve_duration_given_sequence
from .energy import total_weighted_energy, transmit_energy, variable_energy
from .errors import InfeasibleError, SizeError
from .model import Allocation, Instance, SolveResult
from .schedule import DEADLINE_RTOL, DurationTriple, makespan, meets_deadline
from .sequencing import all_makespans, johnson_condition_holds, johnson_sequence

MAX_OPTIMAL_K = 6
TIE_RTOL = 1e-9


def _identity(K):
    return tuple(range(K))


def _nonneg_result(instance, alloc, method, diag, seq=None):
    d = DurationTriple.from_allocation(instance, alloc)
    seq = _identity(instance.K) if seq is None else seq
    energy = total_weighted_energy(instance, alloc).total_weighted_j
    return SolveResult(alloc, seq, energy, makespan(seq, d), method, diag)


def solve_suboptimal(instance: Instance) -> SolveResult:
    """Closed form, then Johnson's sequence, then at most one convex solve.

    If the negligible-execution durations already meet the deadline under
    the Johnson sequence they are optimal and returned unchanged.
    """
    neg = solve_negligible(instance)
    d = DurationTriple.from_allocation(instance, neg.allocation)
    seq = johnson_sequence(d)
    span = makespan(seq, d)
    diag = {
        "johnson_condition": johnson_condition_holds(d),
        "fast_path": meets_deadline(span, instance.params.deadline_s),
        "lambda_star": neg.diagnostics["lambda_star"],
        "closed_form_solves": 1,
        "convex_solves": 0,
    }
    if diag["fast_path"]:
        return SolveResult(neg.allocation, seq, neg.energy_j, span, "suboptimal", diag)
    res = solve_duration_given_sequence(instance, seq, negligible=neg)
    diag["convex_solves"] = 1
    diag["kkt_residual"] = res.diagnostics["kkt_residual"]
    diag["duality_gap_rel"] = res.diagnostics["duality_gap_rel"]
    return SolveResult(res.allocation, seq, res.energy_j, res.makespan_s, "suboptimal", diag)


def baseline_equal_split(instance: Instance, mode: str = "nonnegligible") -> SolveResult:
    """Every upload and download gets the same share of the transmission time."""
    T = instance.params.deadline_s
    K = instance.K
    if mode == "negligible":
        share = T / (2 * K)
        exec_s = np.zeros(K)
    elif mode == "nonnegligible":
        exec_s = instance.exec_durations()
        budget = T - float(exec_s.sum())
        if budget <= 0:
            raise InfeasibleError("execution alone exceeds the deadline")
        share = budget / (2 * K)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    alloc = Allocation(np.full(K, share), np.full(K, share))
    diag = {"mode": mode, "closed_form_solves": 0, "convex_solves": 0}
    seq = _identity(K)
    energy = total_weighted_energy(instance, alloc).total_weighted_j
    span = makespan(seq, DurationTriple(alloc.upload_s, exec_s, alloc.download_s))
    method = "equal_split" if mode == "negligible" else "baseline1"
    return SolveResult(alloc, seq, energy, span, method, diag)


def baseline_lemma1_horizon(instance: Instance) -> SolveResult:
    """Closed-form allocation of the transmission time left after execution."""
    T = instance.params.deadline_s
    budget = T - float(instance.exec_durations().sum())
    if budget <= 0:
        raise InfeasibleError("execution alone exceeds the deadline")
    neg = solve_negligible(instance.with_params(deadline_s=budget))
    diag = {"horizon_s": budget, "lambda_star": neg.diagnostics["lambda_star"],
            "closed_form_solves": 1, "convex_solves": 0}
    return _nonneg_result(instance, neg.allocation, "baseline2", diag)


def sequence_lower_bounds(instance: Instance, perms, lam_ref: float, n_lambda: int = 145):
    """Lagrangian lower bound on the per-sequence optimum, one per permutation.

    Each makespan row on its own, with the box 0 < t <= T, is a relaxation;
    its dual function at any multiplier is a valid bound. The bound is the
    maximum over rows and over a log grid of multipliers around ``lam_ref``.
    """
    p = instance.params
    T = p.deadline_s
    K = instance.K
    h = instance.channel_gains
    bits = np.concatenate([instance.upload_bits, instance.download_bits])
    gains = np.concatenate([h, h])
    w = np.concatenate([np.ones(K), np.full(K, p.bs_weight)])
    lams = lam_ref * np.logspace(-6.0, 12.0, n_lambda)

    def energy(t):
        e = transmit_energy(bits, t, gains, p.bandwidth_hz, p.noise_power_w)
        with np.errstate(invalid="ignore"):
            return np.where(w > 0, w * e, 0.0)

    at_T = energy(np.full(2 * K, T))
    # phi[v, l]: min over 0 < t <= T of w E(t) + lam t, minus its value at t = T
    phi = np.empty((2 * K, n_lambda))
    for l, lam in enumerate(lams):
        t = np.minimum(marginal_durations(bits, gains, w, lam, p.bandwidth_hz,
                                          p.noise_power_w), T)
        phi[:, l] = energy(t) + lam * t - at_T
    phi[w == 0] = np.minimum(phi[w == 0], 0.0)

    perms = np.asarray(perms)
    t_e = instance.exec_durations()
    pu = np.cumsum(phi[:K][perms], axis=1)                       # (P, K, L) prefix of uploads
    pd = np.cumsum(phi[K:][perms][:, ::-1], axis=1)[:, ::-1]      # suffix of downloads
    E = np.cumsum(t_e[perms], axis=1)
    Eprev = E - t_e[perms]
    budget = T - (E[:, None, :] - Eprev[:, :, None])              # [P, i, j]
    val = pu[:, :, None, :] + pd[:, None, :, :] - lams * budget[..., None]
    iu, ju = np.triu_indices(K)
    best = val[:, iu, ju, :].max(axis=(1, 2))
    return at_T.sum() + best


def _solve_one(args):
    instance, seq, neg = args
    return solve_duration_given_sequence(instance, seq, negligible=neg)


def solve_optimal(instance: Instance, threads: int = 1, prune: bool = True) -> SolveResult:
    """Exhaustive search over all K! sequences (K <= 6).

    Sequences are visited in order of a Lagrangian lower bound and skipped
    once the bound exceeds the incumbent, which cannot change the answer.
    Ties within a relative 1e-9 go to the lexicographically smallest sequence.
    """
    K = instance.K
    if K > MAX_OPTIMAL_K:
        raise SizeError(f"optimal solver is limited to K <= {MAX_OPTIMAL_K}, got {K}")
    T = instance.params.deadline_s
    if float(instance.exec_durations().sum()) >= T:
        raise InfeasibleError("execution alone exceeds the deadline")

    neg = solve_negligible(instance)
    d = DurationTriple.from_allocation(instance, neg.allocation)
    perms, spans = all_makespans(d, "constrained")
    diag = {"sequences_total": len(perms), "closed_form_solves": 1}
    fits = np.flatnonzero(spans <= T * (1.0 + DEADLINE_RTOL))
    if len(fits):
        # the relaxation optimum fits some sequence: nothing can do better
        seq = tuple(int(i) for i in perms[fits[0]])
        diag.update(sequences_solved=0, convex_solves=0, relaxation_feasible=True)
        return SolveResult(neg.allocation, seq, neg.energy_j, float(spans[fits[0]]),
                           "optimal", diag)

    if prune:
        bounds = sequence_lower_bounds(instance, perms, neg.diagnostics["lambda_star"])
    else:
        bounds = np.full(len(perms), -np.inf)
    order = sorted(range(len(perms)), key=lambda i: (bounds[i], i))
    # bounds cover the transmission part only; add the allocation-independent rest
    up, down = neg.allocation.upload_s, neg.allocation.download_s
    const = neg.energy_j - float(variable_energy(instance, up, down))

    results = {}
    best = np.inf
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        pos = 0
        while pos < len(order):
            batch = []
            while pos < len(order) and len(batch) < max(threads, 1):
                i = order[pos]
                if bounds[i] + const > best * (1 + TIE_RTOL):
                    pos = len(order)
                    break
                batch.append(i)
                pos += 1
            if not batch:
                break
            jobs = [(instance, tuple(int(v) for v in perms[i]), neg) for i in batch]
            outs = list(pool.map(_solve_one, jobs)) if pool else [_solve_one(j) for j in jobs]
            for i, r in zip(batch, outs):
                results[i] = r
                best = min(best, r.energy_j)
    finally:
        if pool:
            pool.shutdown()

    winners = [i for i, r in results.items() if r.energy_j <= best * (1 + TIE_RTOL)]
    win = min(winners)
    r = results[win]
    diag.update(sequences_solved=len(results), convex_solves=len(results),
                relaxation_feasible=False,
                kkt_residual=r.diagnostics["kkt_residual"],
                duality_gap_rel=r.diagnostics["duality_gap_rel"])
    return SolveResult(r.allocation, r.sequence, r.energy_j, r.makespan_s, "optimal", diag)
