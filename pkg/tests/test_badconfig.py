import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dwgibbs.badconfig import (
    CERTIFIED,
    GAP_PERSISTS,
    GAP_VANISHES,
    INDETERMINATE,
    GapResult,
    annulus_pair,
    classify_gaps,
    gap_experiment,
    gibbs_scan,
    h_independence_check,
    make_bad_config,
)
from dwgibbs.dobrushin import eta_influence_bound
from dwgibbs.evolution import DynamicsParams
from dwgibbs.ising import exact_gibbs
from dwgibbs.resolvent import ModelParams, natural_params

HIGH = ModelParams(0.1, 0.5)
LOW = ModelParams(1.0, 0.1)


def test_bad_config_values():
    assert make_bad_config(ModelParams(1.0, 0.5, 0.0), DynamicsParams.bm(2.0)).eta_spec_value == 0.0
    spec = make_bad_config(ModelParams(1.0, 0.5, 0.1), DynamicsParams.bm(2.0), K=3)
    assert spec.eta_spec_value == pytest.approx(-0.2)
    assert spec.omega_plus == pytest.approx(0.5 * (3 - 0.2))
    assert spec.omega_minus == pytest.approx(0.5 * (-3 - 0.2))


def test_bad_config_ou_form():
    dyn = DynamicsParams.ou(math.log(2), 1.0)
    spec = make_bad_config(ModelParams(1.0, 0.5, 0.1), dyn)
    assert spec.s == pytest.approx(1.0)
    assert spec.eta_spec_ou == pytest.approx(-2 * 0.1 * math.sinh(math.log(2) / 2))
    assert spec.eta_spec_ou == pytest.approx(spec.eta_spec_value * dyn.r_t)


def test_bad_config_rejects():
    with pytest.raises(ValueError):
        make_bad_config(HIGH, DynamicsParams.bm(1.0), K=-1)
    with pytest.raises(ValueError):
        make_bad_config(HIGH, DynamicsParams.bm(0.0))


def test_zero_K_gives_zero_gap():
    g = gap_experiment(ModelParams(0.5, 0.5), 1.0, 0.0, 1, 3, 5, mc_budget=2000)
    assert g.gap == 0.0 and g.std_error == 0.0 and g.violations == 0


def _exact_gap(params, s, K):
    hi, lo = annulus_pair(params, s, K, 1, 3, 3)
    o = hi.volume.origin_index
    return float(exact_gibbs(hi).estimate.prob_plus[o] - exact_gibbs(lo).estimate.prob_plus[o])


@settings(max_examples=20)
@given(st.floats(0.05, 2), st.floats(0.05, 1.5), st.floats(0.05, 50))
def test_exact_gap_nonnegative_and_monotone_in_K(q, rho2, s):
    p = ModelParams(q, rho2)
    gaps = [_exact_gap(p, s, K) for K in (0.0, 0.5, 2.0, 8.0)]
    assert gaps[0] == 0.0
    assert all(b >= a - 1e-12 for a, b in zip(gaps, gaps[1:]))


def test_mc_gap_matches_exact():
    p = ModelParams(0.5, 0.5)
    g = gap_experiment(p, 2.0, 2.0, 1, 3, 3, mc_budget=40_000, seed=1)
    assert g.violations == 0
    assert abs(g.gap - _exact_gap(p, 2.0, 2.0)) < 4 * g.std_error + 1e-3


def test_eta_mean_estimator():
    p = ModelParams(0.5, 0.5)
    g = gap_experiment(p, 2.0, 2.0, 1, 3, 5, estimator="eta_mean", mc_budget=20_000, seed=2)
    assert g.gap > 0 and g.std_error > 0
    with pytest.raises(ValueError):
        gap_experiment(p, 2.0, 2.0, 1, 3, 5, estimator="median")


@pytest.mark.parametrize("K,s", [(0.2, 1.0), (0.5, 0.3), (1.0, 5.0)])
def test_high_temp_gap_below_influence_bound(K, s):
    hi, lo = annulus_pair(HIGH, s, K, 1, 3, 3)
    amb = hi.ambient
    gap = float(exact_gibbs(hi).estimate.prob_plus[hi.volume.origin_index]
                - exact_gibbs(lo).estimate.prob_plus[hi.volume.origin_index])
    # the two drives differ by 2 K rho^2 on the annulus, i.e. eta differs by 2 K rho^2 s
    delta = np.abs(hi.drive - lo.drive) * s
    bound = eta_influence_bound(natural_params(HIGH, 2), s, amb, amb.origin_index, delta)
    assert 0 <= gap <= bound


def test_high_temp_gap_shrinks_with_core():
    gaps = [gap_experiment(HIGH, 1.0, 10.0, n, 2 * n | 1, 3 * n | 1, mc_budget=20_000, seed=3) for n in (1, 3)]
    assert gaps[1].gap < gaps[0].gap


def test_h_independence():
    r = h_independence_check(ModelParams(1.0, 0.1, 0.3), 0.3, 1e3, 10.0, 5, 11, 15)
    assert r["bound_holds"]
    assert r["max_diff_V0"] <= r["max_tail_bound_V0"] + 1e-12
    assert r["max_diff_V0"] < 1e-4
    assert r["max_diff_V1"] >= r["max_diff_V0"]


def _g(gap, se):
    return GapResult(gap, se, 1, 9, 9, 1.0, 1.0)


def test_classify_gaps():
    assert classify_gaps([_g(0.5, 0.01), _g(0.5, 0.01)]) == GAP_PERSISTS
    assert classify_gaps([_g(0.5, 0.01), _g(0.01, 0.01)]) == GAP_VANISHES
    assert classify_gaps([_g(0.01, 0.01), _g(0.5, 0.01)]) == INDETERMINATE
    # resolved everywhere but still shrinking with the core
    assert classify_gaps([_g(0.72, 0.005), _g(0.50, 0.007), _g(0.31, 0.006)]) == INDETERMINATE
    assert classify_gaps([_g(0.72, 0.005), _g(0.31, 0.006)], stable_ratio=0.4) == GAP_PERSISTS


def test_scan_high_temp_certified_everywhere():
    grid = [DynamicsParams.ou(t) for t in np.geomspace(0.01, math.log(1001), 6)]
    res = gibbs_scan(HIGH, grid)
    assert all(p.label == CERTIFIED for p in res.points)
    assert res.t0 == pytest.approx(math.log(1001)) and res.t1 is None


def test_scan_low_temp_small_t_certified():
    grid = [DynamicsParams.ou(0.01), DynamicsParams.ou(math.log(1001))]
    res = gibbs_scan(LOW, grid, V0_sides=(3, 5), mc_budget=5000)
    assert res.points[0].label == CERTIFIED
    assert res.points[1].label == GAP_PERSISTS
    assert res.t0 == pytest.approx(0.01) and res.t1 == pytest.approx(math.log(1001))
    assert all(g.violations == 0 for g in res.points[1].gaps)
    with pytest.raises(ValueError):
        gibbs_scan(LOW, [])
