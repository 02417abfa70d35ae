"""Sequence selection for the three-machine pipeline."""

from __future__ import annotations

from itertools import permutations

import numpy as np

from .errors import SizeError
from .schedule import DurationTriple, inner_max

MAX_BRUTE_FORCE_K = 8


def johnson_sequence(d: DurationTriple) -> tuple:
    """Johnson's rule on the virtual two-machine times (t_u + t_e, t_e + t_d).

    Tasks with A < B go first by increasing A, the rest last by decreasing B.
    Ties keep the original task order.
    """
    a = d.t_u + d.t_e
    b = d.t_e + d.t_d
    first = sorted((k for k in range(d.K) if a[k] < b[k]), key=lambda k: (a[k], k))
    last = sorted((k for k in range(d.K) if a[k] >= b[k]), key=lambda k: (-b[k], k))
    return tuple(first + last)


def johnson_condition_holds(d: DurationTriple) -> bool:
    """True when the shortest upload is no shorter than the longest execution.

    Under this dominance Johnson's rule is optimal for the relaxed makespan.
    """
    return bool(np.min(d.t_u) >= np.max(d.t_e))


def all_makespans(d: DurationTriple, objective: str = "constrained"):
    """Makespan of every permutation, in lexicographic permutation order."""
    if d.K > MAX_BRUTE_FORCE_K:
        raise SizeError(f"exhaustive search limited to K <= {MAX_BRUTE_FORCE_K}, got {d.K}")
    if objective not in ("constrained", "relaxed"):
        raise ValueError(f"unknown objective {objective!r}")
    perms = np.array(list(permutations(range(d.K))), dtype=np.intp)
    u, e, dd = d.t_u[perms], d.t_e[perms], d.t_d[perms]
    inner = inner_max(u, e, dd)
    if objective == "constrained":
        inner = np.maximum(inner, d.t_u.sum())
    return perms, inner + d.t_d.sum()


def brute_force_sequence(d: DurationTriple, objective: str = "constrained", rtol: float = 1e-12):
    """Exhaustive minimum of the (constrained or relaxed) makespan.

    Returns ``(best_sequence, best_value, ties)``; ``ties`` holds every
    minimising sequence in lexicographic order. Integer durations compare
    exactly, floats within ``rtol`` of the optimum.
    """
    perms, values = all_makespans(d, objective)
    best = values.min()
    if np.issubdtype(values.dtype, np.integer):
        mask = values == best
    else:
        mask = values <= best + rtol * max(1.0, abs(float(best)))
    ties = [tuple(int(i) for i in p) for p in perms[mask]]
    return ties[0], best.item(), ties
