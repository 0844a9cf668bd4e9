"""Diffusive time evolution and the single-site conditionals of the evolved measure.

Two single-site dynamics are supported: Ornstein-Uhlenbeck with stationary
variance ``rho_inf2`` and Brownian motion.  They are related by
``eta_OU / r_t ~ eta_BM`` at ``s = rho_inf2 (e^t - 1)``, and every OU
computation below is routed through the Brownian one with that rescaling.

Given the evolved values on ``W = V minus origin``, the law of ``eta_0`` is a
mixture over hidden spins of Gaussians ``N(m(tau), R^W_00 + s)`` with
``m(tau) = [R^W (b + rho^-2 tau)]_0``.  ``m`` is linear in ``tau`` with
nonnegative coefficients (positive for q > 0), and the component variance does not depend on ``tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .ising import (
    IsingInstance,
    QuenchedFieldSpec,
    build_resolvent_ising,
    exact_gibbs,
    heatbath_samples,
)
from .lattice import LatticeVolume
from .resolvent import ModelParams

EXACT_MAX_SITES = 12
ORACLE_MAX_SITES = 12
MIN_ESS = 50.0


@dataclass(frozen=True)
class DynamicsParams:
    """``mode="ou"`` with (t, rho_inf2) or ``mode="bm"`` with s."""

    mode: str
    t: float | None = None
    rho_inf2: float | None = None
    s: float | None = None

    def __post_init__(self):
        if self.mode == "ou":
            if self.t is None or self.t < 0:
                raise ValueError("OU dynamics need t >= 0")
            if self.rho_inf2 is None or self.rho_inf2 <= 0:
                raise ValueError("OU dynamics need rho_inf2 > 0")
        elif self.mode == "bm":
            if self.s is None or self.s < 0:
                raise ValueError("BM dynamics need s >= 0")
        else:
            raise ValueError(f"unknown dynamics mode {self.mode!r}")

    @classmethod
    def ou(cls, t: float, rho_inf2: float = 1.0) -> "DynamicsParams":
        return cls("ou", t=t, rho_inf2=rho_inf2)

    @classmethod
    def bm(cls, s: float) -> "DynamicsParams":
        return cls("bm", s=s)

    @property
    def r_t(self) -> float:
        return math.exp(-self.t / 2) if self.mode == "ou" else 1.0

    @property
    def rho_t2(self) -> float:
        """Variance of the transition kernel."""
        return -self.rho_inf2 * math.expm1(-self.t) if self.mode == "ou" else self.s

    @property
    def bm_time(self) -> float:
        return time_rescale(self.t, self.rho_inf2) if self.mode == "ou" else self.s

    def label(self) -> float:
        return self.t if self.mode == "ou" else self.s


def time_rescale(t: float, rho_inf2: float) -> float:
    """Brownian time ``s = r_t^-2 rho_t^2 = rho_inf2 (e^t - 1)``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return rho_inf2 * math.expm1(t)


def inverse_time_rescale(s: float, rho_inf2: float) -> float:
    if s < 0:
        raise ValueError("s must be >= 0")
    return math.log1p(s / rho_inf2)


def evolve_samples(configs: np.ndarray, dyn: DynamicsParams, seed: int = 0) -> np.ndarray:
    """Apply the single-site kernel independently at every site of every row."""
    configs = np.asarray(configs, dtype=float)
    sd = math.sqrt(dyn.rho_t2)
    if sd == 0.0:
        return configs.copy()
    rng = np.random.default_rng(seed)
    return dyn.r_t * configs + sd * rng.standard_normal(configs.shape)


@dataclass(frozen=True)
class ConditionalEstimate:
    """Law of eta_0 given the evolved values on V minus the origin.

    ``variance`` is the total conditional variance; ``component_variance`` is
    the common variance of the Gaussian mixture components.
    """

    mean: float
    variance: float
    std_error: float
    n_tau_samples: int
    component_variance: float | None = None
    method: str = ""
    ess: float | None = None
    reliable: bool = True
    component_means: np.ndarray | None = field(default=None, repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)
    variance_se: float = 0.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be > 0")
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")

    def density(self, x) -> np.ndarray:
        """Mixture density at ``x`` (representation estimates only)."""
        if self.component_means is None:
            raise ValueError("no mixture components stored")
        x = np.asarray(x, dtype=float)
        sd = math.sqrt(self.component_variance)
        pdf = norm.pdf(x[..., None], loc=self.component_means, scale=sd)
        return pdf @ self.weights

    def as_record(self, **extra) -> dict:
        rec = {
            "mean": self.mean,
            "var": self.variance,
            "component_var": self.component_variance,
            "se": self.std_error,
            "var_se": self.variance_se,
            "n": self.n_tau_samples,
            "method": self.method,
            "ess": self.ess,
            "reliable": self.reliable,
        }
        rec.update(extra)
        return rec


def _conditioning(vol: LatticeVolume, V: LatticeVolume | None, eta_outside) -> tuple[np.ndarray, np.ndarray]:
    V = vol if V is None else V
    if not vol.contains_volume(V):
        raise ValueError("V must lie inside the spin volume")
    coords = V.coords
    origin = np.all(coords == 0, axis=1)
    if not origin.any():
        raise ValueError("V must contain the origin")
    W = coords[~origin]
    eta = np.broadcast_to(np.asarray(eta_outside, dtype=float), (W.shape[0],)).copy()
    return W, eta


def quenched_instance(
    params: ModelParams,
    s: float,
    vol: LatticeVolume,
    eta_outside,
    V: LatticeVolume | None = None,
    boundary: str = "plus",
    ambient: LatticeVolume | None = None,
) -> IsingInstance:
    """Hidden-spin model given eta on ``W = V minus origin`` at Brownian time ``s``."""
    if s <= 0:
        raise ValueError("s must be > 0 (the kernel is degenerate at s = 0)")
    W, eta = _conditioning(vol, V, eta_outside)
    return build_resolvent_ising(vol, params, QuenchedFieldSpec(W, s, eta), boundary=boundary, ambient=ambient)


def _mean_map(inst: IsingInstance) -> tuple[float, np.ndarray, float]:
    """``m(tau) = c0 + coef . tau`` at the origin, and ``R^W_00``."""
    R = inst.resolvent
    o = inst.ambient.origin_index
    frame = inst.ambient_spins(np.zeros(inst.n_sites))
    c0 = float(R[o] @ (inst.drive + frame / inst.rho2))
    coef = R[o, inst.inner_index] / inst.rho2
    return c0, coef, float(R[o, o])


def conditional_mu_t(
    params: ModelParams,
    dyn: DynamicsParams,
    vol: LatticeVolume,
    eta_outside,
    n_tau: int = 20_000,
    seed: int = 0,
    V: LatticeVolume | None = None,
    boundary: str = "plus",
    ambient: LatticeVolume | None = None,
    exact: bool | None = None,
    n_batches: int = 20,
) -> ConditionalEstimate:
    """Conditional law of eta_0 from the Gaussian-mixture representation.

    The mixing measure over hidden spins is enumerated when the spin volume
    has at most EXACT_MAX_SITES sites (``exact=None``), otherwise sampled by
    heat bath with batch-means errors.  OU dynamics are mapped to Brownian
    time with ``eta / r_t`` and the result is scaled back.
    """
    if dyn.mode == "ou":
        r = dyn.r_t
        est = conditional_mu_t(
            params, DynamicsParams.bm(dyn.bm_time), vol, np.asarray(eta_outside, float) / r,
            n_tau, seed, V, boundary, ambient, exact, n_batches,
        )
        return ConditionalEstimate(
            est.mean * r, est.variance * r * r, est.std_error * r, est.n_tau_samples,
            est.component_variance * r * r, est.method + "-ou", est.ess, est.reliable,
            None if est.component_means is None else est.component_means * r, est.weights,
            est.variance_se * r * r,
        )
    s = dyn.s
    inst = quenched_instance(params, s, vol, eta_outside, V, boundary, ambient)
    c0, coef, r00 = _mean_map(inst)
    if not (np.all(coef >= 0) and coef[inst.volume.origin_index] > 0):
        raise AssertionError("component mean is not increasing in tau")
    comp_var = r00 + s
    if exact is None:
        exact = vol.n_sites <= EXACT_MAX_SITES
    if exact:
        ex = exact_gibbs(inst)
        means = c0 + ex.states @ coef
        mean = float(ex.probs @ means)
        spread = float(ex.probs @ (means - mean) ** 2)
        return ConditionalEstimate(
            mean, comp_var + spread, 0.0, len(ex.probs), comp_var, "exact", None, True, means, ex.probs
        )
    tau = heatbath_samples(inst, n_tau, seed=seed)
    means = c0 + tau @ coef
    mean = float(means.mean())
    spread = float(means.var())
    k = n_tau // n_batches
    bm = means[: k * n_batches].reshape(n_batches, k).mean(axis=1)
    se = float(bm.std(ddof=1) / math.sqrt(n_batches))
    bv = ((means[: k * n_batches] - mean) ** 2).reshape(n_batches, k).mean(axis=1)
    var_se = float(bv.std(ddof=1) / math.sqrt(n_batches))
    w = np.full(n_tau, 1.0 / n_tau)
    return ConditionalEstimate(
        mean, comp_var + spread, se, n_tau, comp_var, "mc", None, True, means, w, var_se
    )


def conditional_mu_t_bruteforce(
    params: ModelParams,
    dyn: DynamicsParams,
    vol: LatticeVolume,
    eta_outside,
    n_joint: int = 200_000,
    seed: int = 0,
    V: LatticeVolume | None = None,
    boundary: str = "plus",
    ambient: LatticeVolume | None = None,
    chunk: int = 50_000,
) -> ConditionalEstimate:
    """Importance-sampling oracle that never forms the mixture representation.

    Draws (tau, sigma) from the time-zero model on the ambient box, weights
    each draw by the product of transition densities at the observed values on
    W, and reports the self-normalised conditional mean and variance of eta_0.
    ``reliable`` is False when the effective sample size is below MIN_ESS.
    """
    if vol.n_sites > ORACLE_MAX_SITES:
        raise ValueError(f"oracle is limited to {ORACLE_MAX_SITES} spins")
    if dyn.mode == "bm" and not dyn.s > 0:
        raise ValueError("s must be > 0")
    if dyn.mode == "ou" and not dyn.t > 0:
        raise ValueError("t must be > 0")
    W, eta = _conditioning(vol, V, eta_outside)
    inst = build_resolvent_ising(vol, params, boundary=boundary, ambient=ambient)
    amb = inst.ambient
    widx = amb.indices_of(W)
    o = amb.origin_index
    ex = exact_gibbs(inst)
    L = np.linalg.cholesky(inst.resolvent)
    r, v = dyn.r_t, dyn.rho_t2
    rng_tau = np.random.default_rng(np.random.SeedSequence([seed, 11]))
    rng_sig = np.random.default_rng(np.random.SeedSequence([seed, 12]))
    logw_all, x_all = [], []
    done = 0
    while done < n_joint:
        m = min(chunk, n_joint - done)
        tau = ex.states[rng_tau.choice(len(ex.probs), size=m, p=ex.probs)]
        mu = (inst.drive + inst.ambient_spins(tau) / inst.rho2) @ inst.resolvent
        sig = mu + rng_sig.standard_normal(mu.shape) @ L.T
        resid = eta - r * sig[:, widx]
        logw_all.append(-0.5 * (resid**2).sum(axis=1) / v)
        x_all.append(sig[:, o])
        done += m
    logw = np.concatenate(logw_all)
    x = np.concatenate(x_all)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    ess = float(1.0 / np.sum(w**2))
    m_sig = float(w @ x)
    var_sig = float(w @ (x - m_sig) ** 2)
    se = float(math.sqrt(np.sum(w**2 * (x - m_sig) ** 2)))
    var_se = float(math.sqrt(np.sum(w**2 * ((x - m_sig) ** 2 - var_sig) ** 2)))
    return ConditionalEstimate(
        r * m_sig, r * r * var_sig + v, r * se, n_joint, None, "bruteforce", ess, ess >= MIN_ESS,
        variance_se=r * r * var_se,
    )

