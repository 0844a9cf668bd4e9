import numpy as np
import pytest
from hypothesis import given, strategies as st

from dwgibbs.potential import (
    DoubleWell,
    conditional_tau_mean,
    kernel_T,
    log_cosh,
    potential_eval,
    sample_T,
    sum_identity_check,
    well_minimizer,
)

# largest root of m = tanh(2m), from a 30-digit root finder
M_RHO2_HALF = 0.957504024077268740676501530502


def test_zero_and_symmetry():
    dw = DoubleWell(0.5)
    assert potential_eval(dw, 0.0) == 0.0
    for s in (0.1, 1.0, 10.0):
        assert abs(dw(s) - dw(-s)) < 1e-14


def test_log_cosh_overflow_safe():
    assert log_cosh(1000.0) == pytest.approx(1000.0 - np.log(2.0))
    assert np.isfinite(potential_eval(DoubleWell(0.01), 1e4))


def test_minimizer_value():
    wm = well_minimizer(0.5)
    assert wm.m == pytest.approx(M_RHO2_HALF, abs=1e-13)
    assert abs(wm.m - np.tanh(2 * wm.m)) < 1e-12
    assert wm.double_well


@pytest.mark.parametrize("rho2", [1.0, 2.0])
def test_single_well(rho2):
    wm = well_minimizer(rho2)
    assert wm.m == 0.0 and not wm.double_well


@pytest.mark.parametrize("rho2", [0.1, 0.25, 0.5, 0.9])
def test_stationary_and_quadratic_minima(rho2):
    dw = DoubleWell(rho2)
    m = well_minimizer(rho2).m
    h = 1e-6
    for x in (m, -m):
        assert abs((dw(x + h) - dw(x - h)) / (2 * h)) < 1e-8
        assert (dw(x + 1e-3) - 2 * dw(x) + dw(x - 1e-3)) > 0
    grid = np.linspace(-4, 4, 2001)
    away = (np.abs(grid - m) > 1e-2) & (np.abs(grid + m) > 1e-2)
    assert np.all(dw(grid[away]) > dw(m))


def test_kernel_T_values():
    assert kernel_T(0.5, 0.0) == 0.5
    assert abs(kernel_T(0.5, 50.0) - 1.0) < 1e-15
    rng = np.random.default_rng(3)
    s = rng.normal(size=100)
    assert np.all(kernel_T(0.5, s, 1) + kernel_T(0.5, s, -1) == 1.0)
    assert np.allclose(2 * kernel_T(0.5, s) - 1, conditional_tau_mean(0.5, s))


def test_sample_T_frequency():
    rng = np.random.default_rng(0)
    sig = np.full(200_000, 0.3)
    tau = sample_T(0.5, sig, rng)
    assert tau.mean() == pytest.approx(np.tanh(0.6), abs=4 * np.sqrt(1 / 200_000))


@pytest.mark.parametrize("rho2", [0.25, 1.0, 4.0])
def test_sum_identity_constant(rho2):
    grid = np.linspace(-10, 10, 4001)
    vals = sum_identity_check(rho2, grid)
    assert np.abs(vals / sum_identity_check(rho2, 0.0) - 1).max() < 1e-10
    assert sum_identity_check(rho2, 0.0) == pytest.approx(0.5 * np.exp(0.5 / rho2), rel=1e-14)


@given(st.floats(0.05, 5.0), st.floats(-20, 20), st.floats(1e-3, 5))
def test_kernel_monotone(rho2, s, ds):
    assert kernel_T(rho2, s + ds) >= kernel_T(rho2, s)


@given(st.floats(0.05, 5.0), st.floats(-30, 30))
def test_potential_even(rho2, s):
    dw = DoubleWell(rho2)
    assert dw(s) == pytest.approx(dw(-s), abs=1e-12)
