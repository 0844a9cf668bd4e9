"""The log-double-Gaussian single-site potential and the sign kernel T."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp


def log_cosh(x):
    """Overflow-safe log cosh: |x| + log(1 + e^{-2|x|}) - log 2."""
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


@dataclass(frozen=True)
class DoubleWell:
    rho2: float

    def __post_init__(self):
        if self.rho2 <= 0:
            raise ValueError("rho2 must be > 0")

    def __call__(self, sigma):
        return potential_eval(self, sigma)

    def derivative(self, sigma):
        return (np.asarray(sigma) - np.tanh(np.asarray(sigma) / self.rho2)) / self.rho2


@dataclass(frozen=True)
class WellMinimizer:
    m: float
    beta: float

    @property
    def double_well(self) -> bool:
        return self.beta > 1.0


def potential_eval(dw: DoubleWell, sigma):
    s = np.asarray(sigma, dtype=float)
    out = s**2 / (2 * dw.rho2) - log_cosh(s / dw.rho2)
    return float(out) if out.ndim == 0 else out


def well_minimizer(rho2: float, xtol: float = 1e-15) -> WellMinimizer:
    """Largest root of m = tanh(m / rho2); zero unless rho2 < 1."""
    if rho2 <= 0:
        raise ValueError("rho2 must be > 0")
    beta = 1.0 / rho2
    if beta <= 1.0:
        return WellMinimizer(0.0, beta)
    f = lambda m: m - math.tanh(beta * m)
    # f < 0 just right of 0 when beta > 1, and f(1) = 1 - tanh(beta) > 0.
    lo = 1e-12
    while f(lo) >= 0:
        lo *= 0.5
    m = bisect(f, lo, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)
    return WellMinimizer(float(m), beta)


def kernel_T(rho2: float, sigma, tau: int = 1):
    """T(tau | sigma) = (1 + tau tanh(sigma/rho2)) / 2."""
    return 0.5 * (1.0 + tau * np.tanh(np.asarray(sigma, dtype=float) / rho2))


def sample_T(rho2: float, sigma: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Apply T sitewise to continuous configurations."""
    p = kernel_T(rho2, sigma)
    return np.where(rng.random(np.shape(sigma)) < p, 1, -1).astype(np.int8)


def sum_identity_check(rho2: float, sigma):
    """e^{-V(sigma)} / sum_tau e^{-(sigma-tau)^2/(2 rho2)}; constant in sigma."""
    s = np.asarray(sigma, dtype=float)
    log_num = -potential_eval(DoubleWell(rho2), s)
    log_den = logsumexp(np.stack([-(s - 1.0) ** 2, -(s + 1.0) ** 2]) / (2 * rho2), axis=0)
    out = np.exp(log_num - log_den)
    return float(out) if np.ndim(out) == 0 else out


def conditional_tau_mean(rho2: float, sigma):
    return np.tanh(np.asarray(sigma, dtype=float) / rho2)


__all__ = [
    "DoubleWell",
    "WellMinimizer",
    "potential_eval",
    "well_minimizer",
    "kernel_T",
    "sample_T",
    "sum_identity_check",
    "log_cosh",
]
