"""Scalar special functions: principal-branch Lambert W and the rate-power map."""

import math

import numpy as np

from .errors import DomainError

INV_E = math.exp(-1.0)
BRANCH_SLACK = 1e-15
LN2 = math.log(2.0)


def _initial_guess(x):
    w = np.empty_like(x)

    near = x < -0.32
    p = np.sqrt(np.maximum(2.0 * (math.e * x[near] + 1.0), 0.0))
    # series about the branch point in p = sqrt(2(ex + 1))
    w[near] = -1.0 + p - p * p / 3.0 + (11.0 / 72.0) * p ** 3

    mid = (~near) & (x <= 20.0)
    l1 = np.log1p(x[mid])
    w[mid] = l1 * (1.0 - np.log1p(l1) / (2.0 + l1))

    big = x > 20.0
    a = np.log(x[big])
    b = np.log(a)
    w[big] = a - b + b / a
    return w


def lambert_w0(x):
    """Principal branch W0 of the Lambert function, real arguments only.

    Accepts a scalar or array-like. Arguments within 1e-15 below -1/e are
    clamped to the branch point; anything further below raises DomainError.
    Uses a series / logarithmic initial guess refined by Halley iteration.
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    z = np.atleast_1d(arr).astype(float, copy=True)

    if np.any(z < -INV_E - BRANCH_SLACK):
        bad = z[z < -INV_E - BRANCH_SLACK][0]
        raise DomainError(f"lambert_w0 argument {bad!r} is below -1/e")
    z = np.maximum(z, -INV_E)

    w = np.zeros_like(z)
    branch = z <= -INV_E
    w[branch] = -1.0
    finite = np.isfinite(z) & ~branch
    w[~np.isfinite(z)] = z[~np.isfinite(z)]

    zz = z[finite]
    ww = _initial_guess(zz)
    active = np.ones(zz.shape, dtype=bool)
    for _ in range(64):
        if not active.any():
            break
        wa = ww[active]
        ew = np.exp(wa)
        f = wa * ew - zz[active]
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        step = np.where(denom != 0.0, f / np.where(denom != 0.0, denom, 1.0), 0.0)
        wa = wa - step
        ww[active] = wa
        done = np.abs(step) <= 4e-16 * (1.0 + np.abs(wa))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    w[finite] = ww

    if scalar:
        return float(w[0])
    return w.reshape(arr.shape)


def rate_energy_g(rate, bandwidth_hz, noise_power_w):
    """Transmit power times gain needed to sustain ``rate`` bit/s: n0 (2^(r/B) - 1)."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate < 0):
        raise DomainError("rate must be nonnegative")
    if bandwidth_hz <= 0 or noise_power_w <= 0:
        raise DomainError("bandwidth and noise power must be positive")
    with np.errstate(over="ignore"):
        out = noise_power_w * np.expm1(rate * (LN2 / bandwidth_hz))
    return float(out) if out.ndim == 0 else out
