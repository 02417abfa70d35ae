"""Optimal allocation when BS execution time is negligible.

Only the total transmission budget sum_k (t_u,k + t_d,k) <= T binds. The
KKT conditions equalise every marginal energy at -lambda. For a
transmission with weight w, gain h and noise n0 this fixes the spectral
exponent y = L ln2 / (B t) through

    y e^y - (e^y - 1) = lambda h / (w n0),

whose solution is y = W0((lambda h / (w n0) - 1) / e) + 1. Uploads use
w = 1, downloads w = beta. lambda itself is found by a bracketed root search so that the
durations fill the deadline exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .energy import total_weighted_energy
from .errors import DomainError
from .model import Allocation, Instance, SolveResult
from .special import LN2, lambert_w0

LAMBDA_RTOL = 1e-10
_SERIES_COEF = np.array([(n - 1) / math.factorial(n) for n in range(2, 24)])


def _excess(y):
    """y e^y - expm1(y) without cancellation for small y."""
    small = y < 0.5
    out = np.empty_like(y)
    ys = y[small]
    powers = ys[:, None] ** np.arange(2, 24)[None, :]
    out[small] = powers @ _SERIES_COEF
    yb = y[~small]
    out[~small] = yb * np.exp(yb) - np.expm1(yb)
    return out


def spectral_exponent(z):
    """Solve y e^y - expm1(y) = z for y >= 0 (z >= 0), elementwise."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z < 0):
        raise DomainError("marginal level must be nonnegative")
    with np.errstate(over="ignore"):
        y = lambert_w0(np.minimum((z - 1.0) / math.e, 1e300)) + 1.0
    y = np.maximum(y, 0.0)
    # (z - 1)/e rounds onto the branch point for tiny z; y ~ sqrt(2z) there
    tiny = (z > 0) & (y < 1e-4)
    y[tiny] = np.sqrt(2.0 * z[tiny])
    # W is ill-conditioned next to its branch point; polish with Newton on
    # the well-conditioned form
    for _ in range(3):
        pos = y > 0
        yp = y[pos]
        zp = z[pos]
        step = np.empty_like(yp)
        small = yp < 0.5
        ys = yp[small]
        step[small] = (_excess(ys) - zp[small]) / (ys * np.exp(ys))
        yb = yp[~small]
        with np.errstate(over="ignore", under="ignore"):
            step[~small] = 1.0 + np.expm1(-yb) / yb - zp[~small] * np.exp(-yb) / yb
        y[pos] = np.maximum(yp - step, 0.5 * yp)
    y[z == 0] = 0.0
    return y


@dataclass(frozen=True)
class LambdaSolution:
    lambda_star: float
    residual: float
    iterations: int


def marginal_durations(bits, gains, weights, lam, bandwidth_hz, noise_power_w):
    """Durations at which each weighted transmission's marginal energy is -lam.

    Zero-weight transmissions get zero duration.
    """
    bits = np.asarray(bits, dtype=float)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), bits.shape)
    gains = np.broadcast_to(np.asarray(gains, dtype=float), bits.shape)
    out = np.zeros(bits.shape)
    on = weights > 0
    y = spectral_exponent(lam * gains[on] / (weights[on] * noise_power_w))
    with np.errstate(divide="ignore"):
        out[on] = bits[on] * (LN2 / bandwidth_hz) / y
    return out


def duration_from_lambda(instance: Instance, lam: float) -> Allocation:
    """Durations that put every marginal energy at -lam."""
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError(f"multiplier must be finite and > 0, got {lam!r}")
    p = instance.params
    h = instance.channel_gains
    t_up = marginal_durations(instance.upload_bits, h, 1.0, lam,
                              p.bandwidth_hz, p.noise_power_w)
    t_down = marginal_durations(instance.download_bits, h, p.bs_weight, lam,
                                p.bandwidth_hz, p.noise_power_w)
    return Allocation(t_up, t_down)


def transmission_time(instance: Instance, lam: float) -> float:
    a = duration_from_lambda(instance, lam)
    return a.total_time()


def _lambda_bracket(instance: Instance):
    """Multipliers at which every transmission would take exactly T / n.

    Durations decrease in lambda, so at the smallest of these the total is
    at least T and at the largest at most T.
    """
    p = instance.params
    bits = np.concatenate([instance.upload_bits, instance.download_bits])
    gains = np.concatenate([instance.channel_gains] * 2)
    w = np.concatenate([np.ones(instance.K), np.full(instance.K, p.bs_weight)])
    on = (w > 0) & (bits > 0)
    t = p.deadline_s / np.count_nonzero(on)
    y = bits[on] * LN2 / (p.bandwidth_hz * t)
    with np.errstate(over="ignore"):
        lam = w[on] * p.noise_power_w / gains[on] * _excess(y)
    lam = np.clip(lam, 1e-300, 1e300)
    return float(lam.min()), float(lam.max())


def solve_lambda(instance: Instance, rtol: float = LAMBDA_RTOL) -> LambdaSolution:
    """Root of total transmission time = T, found by Brent's method in log lambda.

    Total transmission time is strictly decreasing in lambda, from +inf at 0
    to 0 at +inf, so the root is unique.
    """
    T = instance.params.deadline_s
    calls = 0
    best = [math.inf, 0.0]

    def excess(log_lam):
        nonlocal calls
        calls += 1
        lam = math.exp(log_lam)
        r = transmission_time(instance, lam) - T
        if abs(r) < abs(best[1]) or best[0] == math.inf:
            best[0], best[1] = lam, r
        return r

    lo, hi = _lambda_bracket(instance)
    a, b = math.log(lo) - 1e-9, math.log(hi) + 1e-9
    # the bracket is exact in theory; widen if rounding disagrees
    while excess(a) < 0:
        a -= 1.0
        if a < -700:
            raise DomainError("could not bracket the multiplier from below")
    while excess(b) > 0:
        b += 1.0
        if b > 700:
            raise DomainError("could not bracket the multiplier from above")
    target = min(rtol, 1e-12) * T
    if abs(best[1]) > target:
        try:
            brentq(excess, a, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
        except RuntimeError:
            pass
    return LambdaSolution(best[0], best[1], calls)


def solve_negligible(instance: Instance) -> SolveResult:
    """Optimal durations when execution time is ignored (closed form)."""
    sol = solve_lambda(instance)
    alloc = duration_from_lambda(instance, sol.lambda_star)
    alloc.check_box(instance.params.deadline_s)
    energy = total_weighted_energy(instance, alloc).total_weighted_j
    diag = {
        "lambda_star": sol.lambda_star,
        "lambda_residual_s": sol.residual,
        "root_iterations": sol.iterations,
        "download_degenerate": instance.params.bs_weight == 0,
        "closed_form_solves": 1,
        "convex_solves": 0,
    }
    return SolveResult(alloc, None, energy, alloc.total_time(), "negligible", diag)
