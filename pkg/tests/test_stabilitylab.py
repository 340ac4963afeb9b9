"""Empirical stability constants, N selection and the instability witnesses."""
from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from chartrecon.forward import IDENTITY, INTEGRATION
from chartrecon.manifolds import BallFamily, GaussianFamily, IntervalFamily
from chartrecon.stabilitylab import (
    GridExhausted,
    counterexample_sin,
    counterexample_weight,
    empirical_stability,
    find_sufficient_N,
    forward_distance,
    lipschitz_estimate,
    projected_stability,
    sample_pairs,
    sin_example_derivative,
    weight_numerator_closed_form,
    weight_ratio_bound,
)

FAM = IntervalFamily(eps=0.1)
SPEC = FAM.compact_spec()
# recorded regression baselines (seed 0, 10^4 pairs, X = Y = L^1)
C_HAT_INTEGRATION = 9.852160317693814
ALPHA_HAT_INTEGRATION = 1.0010173094996364


@pytest.fixture(scope="module")
def integration_report():
    return empirical_stability(FAM, INTEGRATION, SPEC, pairs=10_000, seed=0)


# -- pair sampling -----------------------------------------------------------------


def test_pairs_mix_near_and_far():
    s = sample_pairs(FAM, SPEC, 1000, seed=0)
    assert len(s) == 1000
    assert 0.45 <= np.mean(s.near) <= 0.6
    assert np.max(s.chart_distance) > 0.1
    assert np.min(s.chart_distance) >= 1e-5 * 0.999
    assert all(SPEC.contains(h) for h in s.second)


def test_pairs_are_deterministic():
    a, b = sample_pairs(FAM, SPEC, 300, seed=2), sample_pairs(FAM, SPEC, 300, seed=2)
    assert np.array_equal(a.first, b.first) and np.array_equal(a.second, b.second)


def test_forward_distance_closed_form():
    # F chi_[a,b] - F chi_[a',b] vanishes before a and after b; L1 norm by quadrature
    d = forward_distance(INTEGRATION, FAM, (0.2, 0.7), (0.3, 0.7), 1.0)
    oracle = integrate.quad(lambda t: abs(min(max(t - 0.2, 0), 0.5) - min(max(t - 0.3, 0), 0.4)), 0, 1, points=[0.2, 0.3, 0.7])[0]
    assert d == pytest.approx(oracle, rel=1e-12)


# -- empirical_stability -------------------------------------------------------------


def test_identity_constant_is_one():
    r = empirical_stability(FAM, IDENTITY, SPEC, p=1.0, alpha=1.0, pairs=500, seed=0)
    assert r.C_hat == pytest.approx(1.0, abs=1e-10)
    assert r.stable


def test_integration_baseline(integration_report):
    r = integration_report
    assert r.C_hat == pytest.approx(C_HAT_INTEGRATION, rel=1e-9)
    assert r.alpha_hat == pytest.approx(ALPHA_HAT_INTEGRATION, rel=1e-9)
    assert abs(r.alpha_hat - 1.0) < 0.1
    assert r.C_p99 <= r.C_hat


def test_integration_constant_is_seed_stable(integration_report):
    other = empirical_stability(FAM, INTEGRATION, SPEC, pairs=10_000, seed=1)
    assert other.C_hat == pytest.approx(integration_report.C_hat, rel=0.1)


@pytest.mark.parametrize("p", [1.0, 2.0, 4.0])
def test_ball_exponent(p):
    fam = BallFamily(n=2, p=p)
    r = empirical_stability(fam, IDENTITY, fam.compact_spec(), pairs=4000, seed=0)
    assert r.alpha_hat == pytest.approx(1.0 / p, rel=0.05)


def test_gaussian_exponent():
    fam = GaussianFamily(n=1, p=2.0)
    r = empirical_stability(fam, IDENTITY, fam.compact_spec(), pairs=1000, seed=0)
    assert r.alpha_hat == pytest.approx(1.0, rel=0.05)


def test_too_few_pairs():
    with pytest.raises(ValueError):
        empirical_stability(FAM, INTEGRATION, SPEC, pairs=10)


def test_report_serialises():
    r = empirical_stability(FAM, IDENTITY, SPEC, pairs=200, seed=0)
    d = r.as_dict()
    assert d["N"] == "inf" and d["pairs"] == 200 and "lower estimate" in d["C_label"]


# -- projected_stability ---------------------------------------------------------


@pytest.fixture(scope="module")
def projected():
    unprojected = empirical_stability(FAM, INTEGRATION, SPEC, p=1.0, y_p=2.0, pairs=2000, seed=0)
    return unprojected, projected_stability(FAM, INTEGRATION, SPEC, [0, 4, 8, 16, 32, 64], pairs=2000, seed=0)


def test_projected_constant_stabilises(projected):
    unprojected, reports = projected
    by_n = {r.N: r.C_hat for r in reports}
    assert all(np.isfinite(v) for v in by_n.values())
    assert by_n[64] / unprojected.C_hat <= 2.0
    assert by_n[64] <= by_n[16] <= by_n[4]


def test_mean_only_measurement_is_unstable(projected):
    unprojected, reports = projected
    assert reports[0].N == 0
    assert reports[0].C_hat > 1e3 * unprojected.C_hat


def test_projected_scalar_N():
    r = projected_stability(FAM, INTEGRATION, SPEC, 8, pairs=200, seed=0)
    assert r.N == 8 and r.y_norm == "Parseval L^2"


def test_lipschitz_estimate_below_analytic_bound():
    # ||Q_N F x - Q_N F y||_2 <= ||F x - F y||_2 <= ||x - y||_1
    assert 0 < lipschitz_estimate(FAM, INTEGRATION, SPEC, 16, pairs=1000) <= 1.0


# -- find_sufficient_N -----------------------------------------------------------


def test_threshold_met_immediately():
    assert find_sufficient_N(FAM, INTEGRATION, SPEC, C=1e-3, delta=1.0, count=50).N_star == 4


def test_unreachable_threshold():
    with pytest.raises(GridExhausted) as info:
        find_sufficient_N(FAM, INTEGRATION, SPEC, C=1.0, delta=0.0, count=50)
    assert len(info.value.curve) == 6 and info.value.threshold == 0.0


def test_sufficient_N_baseline():
    # delta = 0.05 (half the margin of K), C = 1: threshold 0.0125 lies between the N = 32 and N = 64 deficits
    scan = find_sufficient_N(FAM, INTEGRATION, SPEC, C=1.0, delta=0.05)
    assert scan.N_star == 64
    assert scan.curve[3] > scan.threshold >= scan.curve[4]


def test_invalid_constants():
    with pytest.raises(ValueError):
        find_sufficient_N(FAM, INTEGRATION, SPEC, C=0.0, delta=1.0)


# -- counterexamples ---------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 7, 100, 12345])
def test_sin_nodes(k):
    (v,) = counterexample_sin([k])
    assert v == pytest.approx(1.0 / (k * math.pi), rel=1e-14)


def test_sin_k_zero():
    with pytest.raises(ValueError):
        counterexample_sin([0])


def test_sin_derivative_positive():
    x = np.concatenate([np.geomspace(1e-6, 1.0, 200_000), -np.geomspace(1e-6, 1.0, 1000)])
    assert np.all(sin_example_derivative(x) > 0)
    assert sin_example_derivative(0.0) == 1.0


def test_weight_denominator_and_numerator():
    for t in (0.05, 0.2, 0.5):
        num = weight_numerator_closed_form(t)
        (ratio,) = counterexample_weight([t], alpha=1.0)
        assert ratio == pytest.approx(num / (2 * t), rel=1e-9)
        assert num <= 2 * t * math.exp(-1 / t)


@pytest.mark.parametrize("alpha", [1.0, 0.5, 0.25])
def test_weight_ratios_decay_below_bound(alpha):
    ts = [0.2, 0.1, 0.05, 0.025]
    ratios = counterexample_weight(ts, alpha)
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    for t, r in zip(ts, ratios):
        assert r <= weight_ratio_bound(t, alpha)


def test_weight_example_ordering():
    r05, r2 = counterexample_weight([0.05, 0.2], 1.0)
    assert r05 < r2


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1])
def test_weight_domain(bad):
    with pytest.raises(ValueError):
        counterexample_weight([bad])
    with pytest.raises(ValueError):
        counterexample_weight([0.1], alpha=1.5)
