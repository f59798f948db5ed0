import dataclasses
import math

import numpy as np
import pytest

from otasync.compensation import monte_carlo_delta, build_plan
from otasync.config import default_params
from otasync.rate import RateBreakdown, closed_form_powers, monte_carlo_rate_oracle, \
    per_position_rates, rate_at_position, rate_inputs, spectral_efficiency, synthetic_delta
from tests.conftest import small_instance


def test_rate_zero_when_no_ap_transmits(params):
    b = rate_at_position(1, rate_inputs(params, (0, 0), (1.0, 1.0)))
    assert b.ds_power == 0.0 and b.rate_bits == 0.0


def test_rate_reference_working_point(params):
    # symmetric scenario, perfect compensation on both APs; frozen values
    # computed by hand from the closed form (gamma = 0.1/11)
    b = rate_at_position(4, rate_inputs(params, (1, 1), (1.0, 1.0)))
    assert b.ds_power == pytest.approx(46.54545454545455, rel=1e-12)
    assert b.bu_power == 0.0
    assert b.ui_power == pytest.approx(4.0, rel=1e-12)
    assert b.rate_bits == pytest.approx(3.365845211417569, rel=1e-12)


def test_rate_zero_mean_delta(params):
    b = rate_at_position(1, rate_inputs(params, (1, 1), (0.0, 0.0)))
    assert b.ds_power == 0.0
    assert b.rate_bits == 0.0
    assert b.bu_power > 0  # uncertainty is maximal


def test_rate_single_ap(params):
    b = rate_at_position(1, rate_inputs(params, (1, 0), (1.0, 0.0)))
    assert b.ds_power == pytest.approx(64 * 200 * 0.1 * (0.1 / 11), rel=1e-12)
    assert b.ui_power == pytest.approx(2.0, rel=1e-12)


def test_rate_monotone_in_mean_delta(params):
    rates = []
    for d in np.linspace(0, 1, 11):
        rates.append(rate_at_position(1, rate_inputs(params, (1, 1), (d, d))).rate_bits)
    assert all(b > a for a, b in zip(rates, rates[1:]))


def test_rate_uses_complex_mean_phase(params):
    aligned = rate_at_position(1, rate_inputs(params, (1, 1), (0.9, 0.9)))
    opposed = rate_at_position(1, rate_inputs(params, (1, 1), (0.9, -0.9)))
    assert opposed.ds_power == pytest.approx(0.0, abs=1e-9)
    assert aligned.rate_bits > opposed.rate_bits
    rotated = rate_at_position(1, rate_inputs(params, (1, 1),
                                              (0.9 * np.exp(1j), 0.9 * np.exp(1j))))
    assert rotated.rate_bits == pytest.approx(aligned.rate_bits, rel=1e-12)


def test_denominator_groupings_agree(params):
    # the closed form's denominator grouping equals the direct decomposition's
    # bu + ui for any mean_delta
    for d1, d2 in ((1.0, 1.0), (0.3, 0.8j), (0.0, 0.5)):
        b = rate_at_position(2, rate_inputs(params, (1, 1), (d1, d2)))
        ds, bu, ui = closed_form_powers(params, 2, (1, 1), (d1, d2))
        assert b.ds_power == pytest.approx(ds, rel=1e-12)
        assert b.bu_power + b.ui_power == pytest.approx(bu + ui, rel=1e-12)


def test_spectral_efficiency_zero(params):
    plan = build_plan(params, "kalman")
    assert spectral_efficiency(1, plan, np.zeros((10, 100))) == 0.0


def test_spectral_efficiency_conventional_position_count(params):
    # constant rate r at the 41 payload positions of a conventional-only slot
    plan = build_plan(params, "ap1_only")
    rates = np.where(plan.data_mask()[0], 2.0, 0.0)
    assert spectral_efficiency(1, plan, np.tile(rates, (10, 1))) == \
        pytest.approx(0.41 * 2.0, rel=1e-12)


def test_spectral_efficiency_broken_position_count(params):
    # broken slot: each AP contributes 40 payload positions
    plan = build_plan(params, "kalman")
    data = plan.data_mask()
    assert data[0].sum() == 40 and data[1].sum() == 40
    rates = np.where(data.any(axis=0), 1.0, 0.0)
    union = np.count_nonzero(data.any(axis=0))
    assert union == 43  # 37 joint + 3 + 3 solo
    assert spectral_efficiency(1, plan, np.tile(rates, (10, 1))) == \
        pytest.approx(union / 100, rel=1e-12)


def test_per_position_rates_layout(params):
    stats = monte_carlo_delta(params, "kalman", 300, 3)
    plan = build_plan(params, "kalman")
    rates = per_position_rates(params, plan, stats)
    assert rates.shape == (10, 100)
    data_any = plan.data_mask().any(axis=0)
    assert np.all(rates[:, ~data_any] == 0)
    assert np.all(rates[:, data_any] > 0)
    assert np.allclose(rates[0], rates[5])  # symmetric scenario


def test_synthetic_delta_moments():
    rng = np.random.default_rng(0)
    for target in (0.0, 0.5, 1.0, 0.7j):
        draws = synthetic_delta(rng, target, 200_000)
        assert np.allclose(np.abs(draws), 1.0)
        assert abs(draws.mean() - target) < 0.01


def test_oracle_matches_closed_form_no_phase_noise():
    # N=4, K=2, |E[Delta]|=1: empirical ds within 2% of N rho eta gamma x4
    p = small_instance(n_antennas=4)
    res = monte_carlo_rate_oracle(p, 1, (1, 1), (1.0, 1.0), 100_000, seed=5)
    ds_cf, bu_cf, ui_cf = closed_form_powers(p, 1, (1, 1), (1.0, 1.0))
    assert abs(res.ds_complex) ** 2 == pytest.approx(ds_cf, rel=0.02)
    assert res.bu_power == pytest.approx(bu_cf, rel=0.05)
    assert res.ui_power == pytest.approx(ui_cf, rel=0.05)


def test_oracle_interference_scaling():
    # E|UI|^2 = rho sum_l a eta_{k'} beta for the single interferer
    p = small_instance(n_antennas=8)
    res = monte_carlo_rate_oracle(p, 1, (1, 0), (0.5, 0.0), 50_000, seed=6)
    expect = p.rho_ap * p.eta[1, 0] * p.beta_ue[0, 0]
    assert res.ui_power == pytest.approx(expect, rel=0.05)


@pytest.mark.parametrize("seed", range(3))
def test_oracle_vs_closed_form_random_instance(seed):
    rng = np.random.default_rng(100 + seed)
    N = int(rng.choice([2, 4, 8]))
    K = int(rng.choice([2, 3, 4]))
    beta = rng.uniform(0.005, 0.05, (K, 2))
    eta = rng.uniform(0.1, 0.9, (K, 2))
    eta /= eta.sum(axis=0, keepdims=True)
    p = default_params(n_antennas=N, n_ues=K, tau_p=K, tau_u=(100 - K - 6) // 2,
                       tau_d=100 - K - 6 - (100 - K - 6) // 2, beta_ue=beta, eta=eta)
    mods = rng.choice([0.0, 0.5, 1.0], 2)
    target = tuple(m * np.exp(1j * ph) for m, ph in zip(mods, rng.uniform(-np.pi, np.pi, 2)))
    a = (1, 1)
    k = int(rng.integers(1, K + 1))
    res = monte_carlo_rate_oracle(p, k, a, target, 60_000, seed=200 + seed)
    ds_cf, bu_cf, ui_cf = closed_form_powers(p, k, a, target)
    gamma = p.gamma()
    ds_cf_complex = sum(np.sqrt(p.rho_ap * p.eta[k - 1, ap] * N * gamma[k - 1, ap])
                        * target[ap] for ap in range(2) if a[ap])
    assert abs(ds_cf_complex) ** 2 == pytest.approx(ds_cf, rel=1e-9)
    assert abs(res.ds_complex - ds_cf_complex) <= 3 * res.ds_stderr + 1e-12
    assert abs(res.bu_power - bu_cf) <= 3 * res.bu_stderr
    assert abs(res.ui_power - ui_cf) <= 3 * res.ui_stderr


def test_oracle_rejects_bad_modulus():
    p = small_instance()
    with pytest.raises(ValueError):
        synthetic_delta(np.random.default_rng(0), 1.5, 10)
