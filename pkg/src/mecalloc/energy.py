"""Energy formulas: transmission, BS execution and the weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import Allocation, Instance, SystemParams, TaskSpec
from .special import LN2


def transmit_energy(bits, duration_s, gain, bandwidth_hz, noise_power_w):
    """Energy (t/|h|^2) g(L/t), vectorised over the first three arguments.

    Zero bits cost nothing. Zero duration with positive bits returns +inf,
    the limit of the expression, so solvers can treat it as extended-real.
    Also accepts complex durations (used for complex-step derivatives).
    """
    bits = np.asarray(bits, dtype=float)
    t = np.asarray(duration_s)
    gain = np.asarray(gain, dtype=float)
    if np.iscomplexobj(t):
        return t / gain * noise_power_w * np.expm1(bits * LN2 / (bandwidth_hz * t))
    t = t.astype(float)
    if np.any(t < 0):
        raise DomainError("durations must be nonnegative")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        e = t / gain * noise_power_w * np.expm1(bits * LN2 / (bandwidth_hz * t))
    e = np.where(bits == 0, 0.0, e)
    e = np.where((t == 0) & (bits > 0), np.inf, e)
    e = np.where(np.isnan(e) & (bits > 0), np.inf, e)
    return float(e) if e.ndim == 0 else e


def required_power(bits, duration_s, gain, params: SystemParams):
    """Transmit power g(L/t)/|h|^2 needed to move ``bits`` in ``duration_s``."""
    if gain <= 0:
        raise DomainError("channel gain must be positive")
    if bits < 0:
        raise DomainError("bits must be nonnegative")
    if bits == 0:
        return 0.0
    if duration_s <= 0:
        raise DomainError("positive bits need a positive duration")
    with np.errstate(over="ignore"):
        g = params.noise_power_w * np.expm1(bits / duration_s * LN2 / params.bandwidth_hz)
    return float(g / gain)


def upload_energy(task: TaskSpec, t_u, gain, params: SystemParams):
    return transmit_energy(task.upload_bits, t_u, gain,
                           params.bandwidth_hz, params.noise_power_w)


def download_energy(task: TaskSpec, t_d, gain, params: SystemParams):
    return transmit_energy(task.download_bits, t_d, gain,
                           params.bandwidth_hz, params.noise_power_w)


def exec_energy(task: TaskSpec, params: SystemParams) -> float:
    """mu N F^2."""
    return params.switched_capacitance * task.workload_cycles * (params.bs_cpu_hz * params.bs_cpu_hz)


def _weighted(beta, values):
    # 0 * inf is taken as 0: a zero weight switches the term off entirely
    if beta == 0:
        return np.zeros_like(values)
    return beta * values


@dataclass(frozen=True)
class EnergyBreakdown:
    upload_j: np.ndarray
    download_j: np.ndarray
    exec_j: np.ndarray
    total_weighted_j: float


def total_weighted_energy(instance: Instance, alloc: Allocation) -> EnergyBreakdown:
    """Per-task energies and sum_k E_u + beta (E_e + E_d)."""
    if alloc.K != instance.K:
        raise DomainError(f"allocation has {alloc.K} tasks, instance has {instance.K}")
    p = instance.params
    h = instance.channel_gains
    up = np.atleast_1d(transmit_energy(instance.upload_bits, alloc.upload_s, h,
                                       p.bandwidth_hz, p.noise_power_w))
    down = np.atleast_1d(transmit_energy(instance.download_bits, alloc.download_s, h,
                                         p.bandwidth_hz, p.noise_power_w))
    ex = p.switched_capacitance * instance.workload_cycles * (p.bs_cpu_hz * p.bs_cpu_hz)
    total = float(up.sum() + _weighted(p.bs_weight, ex + down).sum())
    return EnergyBreakdown(up, down, ex, total)


def variable_energy(instance: Instance, upload_s, download_s):
    """The allocation-dependent part of the objective: sum E_u + beta sum E_d."""
    p = instance.params
    h = instance.channel_gains
    up = transmit_energy(instance.upload_bits, upload_s, h, p.bandwidth_hz, p.noise_power_w)
    down = transmit_energy(instance.download_bits, download_s, h, p.bandwidth_hz, p.noise_power_w)
    return np.sum(up) + np.sum(_weighted(p.bs_weight, np.asarray(down)))
