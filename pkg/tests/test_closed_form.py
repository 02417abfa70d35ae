import math

import mpmath as mp
import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from mecalloc import duration_from_lambda, solve_lambda, solve_negligible, transmit_energy
from mecalloc.closed_form import spectral_exponent
from mecalloc.energy import variable_energy
from mecalloc.errors import DomainError

from conftest import make_instance

# root of the K=1 stationarity condition, mpmath at 40 digits
LAMBDA_REF = 2.139361223975279907e-6
T_UP_REF = 0.05299172767353722509
ENERGY_REF = 1.754799021370813182e-7   # transmission part only


def test_frozen_multiplier(single_task):
    sol = solve_lambda(single_task)
    assert sol.lambda_star == pytest.approx(LAMBDA_REF, rel=1e-9)
    res = solve_negligible(single_task)
    assert res.allocation.upload_s[0] == pytest.approx(T_UP_REF, rel=1e-9)
    var = variable_energy(single_task, res.allocation.upload_s, res.allocation.download_s)
    assert var == pytest.approx(ENERGY_REF, rel=1e-9)


def test_single_task_matches_bounded_1d_minimum(single_task):
    T = 0.08

    def f(tu):
        return float(variable_energy(single_task, [tu], [T - tu]))

    opt = minimize_scalar(f, bounds=(1e-4, T - 1e-4), method="bounded",
                          options={"xatol": 1e-12})
    res = solve_negligible(single_task)
    assert res.allocation.upload_s[0] == pytest.approx(opt.x, rel=1e-6)
    assert f(res.allocation.upload_s[0]) <= opt.fun * (1 + 1e-12)


def test_spectral_exponent_roots():
    z = np.concatenate([[0.0], np.logspace(-20, 5, 200)])
    y = spectral_exponent(z)
    mp.mp.dps = 50
    lhs = [float(mp.mpf(v) * mp.exp(v) - mp.expm1(v)) for v in y]
    np.testing.assert_allclose(lhs, z, rtol=1e-12, atol=0)
    assert y[0] == 0.0
    with pytest.raises(DomainError):
        spectral_exponent(-1.0)


def _random(rng, K, **kw):
    return make_instance(rng.uniform(1e5, 5e5, K), rng.uniform(1e5, 5e5, K),
                         rng.uniform(5e6, 1.5e7, K), rng.exponential(1e-3, K), **kw)


@pytest.mark.parametrize("K", [1, 2, 5, 10])
def test_deadline_is_filled(rng, K):
    inst = _random(rng, K)
    res = solve_negligible(inst)
    assert abs(res.allocation.total_time() - 0.08) <= 1e-9 * 0.08
    assert res.sequence is None
    assert res.diagnostics["closed_form_solves"] == 1


def test_marginal_energies_equalised_by_finite_differences(rng):
    inst = _random(rng, 4, bandwidth_hz=1e7)
    res = solve_negligible(inst)
    p = inst.params
    t = np.concatenate([res.allocation.upload_s, res.allocation.download_s])
    bits = np.concatenate([inst.upload_bits, inst.download_bits])
    gains = np.concatenate([inst.channel_gains] * 2)
    w = np.concatenate([np.ones(4), np.full(4, p.bs_weight)])
    step = 1e-6 * t
    up = transmit_energy(bits, t + step, gains, p.bandwidth_hz, p.noise_power_w)
    dn = transmit_energy(bits, t - step, gains, p.bandwidth_hz, p.noise_power_w)
    marg = -w * (up - dn) / (2 * step)
    np.testing.assert_allclose(marg, res.diagnostics["lambda_star"], rtol=1e-6)


def test_ratio_at_unit_weight(rng):
    inst = _random(rng, 3, bs_weight=1.0)
    a = solve_negligible(inst).allocation
    # same gain and weight: the duration ratio is the bit ratio
    np.testing.assert_allclose(a.download_s / a.upload_s, inst.download_bits / inst.upload_bits,
                               rtol=1e-10)


def test_symmetric_tasks_split_evenly():
    inst = make_instance([2e5] * 3, [4e5] * 3, [1e7] * 3, [1e-3] * 3, bs_weight=0.5)
    a = solve_negligible(inst).allocation
    assert np.ptp(a.upload_s) <= 1e-15
    assert np.ptp(a.download_s) <= 1e-15


def test_better_gain_gets_less_time_at_equal_load():
    inst = make_instance([3e5, 3e5], [3e5, 3e5], [1e7, 1e7], [1e-3, 1e-2], bandwidth_hz=1e7)
    a = solve_negligible(inst).allocation
    assert a.upload_s[1] < a.upload_s[0]


def test_zero_weight_gives_zero_downloads(rng):
    inst = _random(rng, 3, bs_weight=0.0)
    res = solve_negligible(inst)
    assert np.all(res.allocation.download_s == 0)
    assert res.allocation.upload_s.sum() == pytest.approx(0.08, rel=1e-12)
    assert res.diagnostics["download_degenerate"]
    assert math.isfinite(res.energy_j)


def test_duration_from_lambda_domain(single_task):
    with pytest.raises(DomainError):
        duration_from_lambda(single_task, 0.0)
    a = duration_from_lambda(single_task, LAMBDA_REF)
    assert a.total_time() == pytest.approx(0.08, rel=1e-9)
