"""Massive Gaussian fields and the bridge between discrete and continuous spins."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .ising import (
    IsingInstance,
    QuenchedFieldSpec,
    build_resolvent_ising,
    exact_gibbs,
    heatbath_samples,
)
from .lattice import MAX_ENUMERATION_SITES, LatticeVolume
from .resolvent import MassProfile, ModelParams, resolvent_direct


@dataclass(frozen=True)
class GaussianField:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.covariance, dtype=float)
        if not np.allclose(C, C.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "covariance", C)
        object.__setattr__(self, "mean", np.broadcast_to(np.asarray(self.mean, float), C.shape[:1]).copy())

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        L = self.cholesky()
        z = sla.solve_triangular(L, (np.asarray(x) - self.mean).T, lower=True)
        n = len(self.mean)
        return -0.5 * np.sum(z**2, axis=0) - np.log(np.diag(L)).sum() - 0.5 * n * np.log(2 * np.pi)


def sample_field(field: GaussianField, seed: int, n: int) -> np.ndarray:
    """``n`` draws (rows) from N[mean; covariance]."""
    if n < 1:
        raise ValueError("n must be >= 1")
    L = field.cholesky()
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, len(field.mean)))
    return field.mean + z @ L.T


def interpolating_sigma(
    tau: np.ndarray,
    params: ModelParams,
    vol: LatticeVolume,
    quench: QuenchedFieldSpec | None = None,
) -> np.ndarray:
    """Minimiser ``(rho^-2 + s^-1 I_W - q Delta)^{-1} (q h + rho^-2 tau + s^-1 eta_W)`` on ``vol``.

    ``tau`` may carry leading batch axes.
    """
    tau = np.asarray(tau, dtype=float)
    b = np.full(vol.n_sites, params.q * params.h)
    if quench is not None and quench.W.shape[0]:
        widx = quench.indices(vol)
        mass = MassProfile.on_sites(vol, params.rho2, widx, quench.s)
        b[widx] += quench.eta / quench.s
    else:
        mass = MassProfile.plain(vol, params.rho2)
    R = resolvent_direct(vol, params, mass).matrix
    return (b + tau / params.rho2) @ R


def instance_sigma(inst: IsingInstance, tau: np.ndarray) -> np.ndarray:
    """Gaussian mean ``R (b + rho^-2 tau)`` on the ambient box of an instance."""
    full = inst.ambient_spins(tau)
    return (inst.drive + full / inst.rho2) @ inst.resolvent


@dataclass(frozen=True)
class MuSample:
    sigma: np.ndarray
    tau: np.ndarray
    ambient: LatticeVolume
    inner_index: np.ndarray


def sample_mu_plus(
    params: ModelParams,
    vol: LatticeVolume,
    n: int,
    seed: int = 0,
    boundary: str = "plus",
    ambient: LatticeVolume | None = None,
    exact: bool | None = None,
    thin: int = 5,
    burn_in: int = 1_000,
) -> MuSample:
    """Two-stage sampler: tau from the resolvent Ising model, then sigma ~ N[sigma(tau); R].

    ``tau`` is drawn exactly when the spin volume is enumerable (or ``exact``
    is forced), otherwise by heat bath.  ``sigma`` lives on the ambient box.
    """
    inst = build_resolvent_ising(vol, params, boundary=boundary, ambient=ambient)
    if exact is None:
        exact = vol.n_sites <= 12
    if exact:
        ex = exact_gibbs(inst, max_sites=MAX_ENUMERATION_SITES)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
        tau = ex.states[rng.choice(len(ex.probs), size=n, p=ex.probs)].astype(np.int64)
    else:
        tau = heatbath_samples(inst, n, thin=thin, burn_in=burn_in, seed=seed)
    means = instance_sigma(inst, tau)
    L = np.linalg.cholesky(inst.resolvent)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    sigma = means + rng.standard_normal(means.shape) @ L.T
    return MuSample(sigma, tau, inst.ambient, inst.inner_index)


def joint_hamiltonian(
    params: ModelParams, vol: LatticeVolume, tau: np.ndarray, sigma: np.ndarray, boundary_sigma: np.ndarray
) -> float:
    """Joint (sigma, tau) energy written as explicit bond sums.

    ``boundary_sigma`` is indexed by ``vol.grow(1)``; only its entries outside
    ``vol`` are read.
    """
    q, r2, h = params.q, params.rho2, params.h
    sigma = np.asarray(sigma, float)
    tau = np.asarray(tau, float)
    outer = vol.grow(1)
    emb = outer.embedding(vol)
    inside = outer.mask(emb)
    sfull = np.asarray(boundary_sigma, float).copy()
    sfull[emb] = sigma
    A = outer.adjacency.tocoo()
    e = 0.0
    for x, y in zip(A.row, A.col):
        if inside[x] and inside[y] and x < y:
            e += 0.5 * q * (sfull[x] - sfull[y]) ** 2
        elif inside[x] and not inside[y]:
            e += 0.5 * q * (sfull[x] - sfull[y]) ** 2
    e += -q * h * sigma.sum() + 0.5 / r2 * (sigma**2).sum() - (sigma * tau).sum() / r2
    return e


def centering_identity_check(
    params: ModelParams,
    vol: LatticeVolume,
    tau: np.ndarray,
    sigma: np.ndarray,
    boundary_sigma: np.ndarray,
) -> float:
    """Spread of ``-H_joint(sigma, tau) - [-H_Ising(tau) + log N(sigma; sigma(tau), R)]`` over test pairs.

    The quantity is a (tau, sigma)-independent constant, so the returned
    max - min should vanish up to rounding.
    """
    tau = np.atleast_2d(tau)
    sigma = np.atleast_2d(sigma)
    outer = vol.grow(1)
    emb = outer.embedding(vol)
    bsig = np.asarray(boundary_sigma, float).copy()
    bsig[emb] = 0.0
    adj_out = outer.adjacency[emb]
    field = params.q * params.h + params.q * (adj_out @ bsig)
    R = resolvent_direct(vol, params).matrix
    g = GaussianField(np.zeros(vol.n_sites), R)
    vals = []
    for t, s in zip(tau, sigma):
        t = np.asarray(t, float)
        lhs = -joint_hamiltonian(params, vol, t, s, boundary_sigma)
        ising = -0.5 / params.rho2**2 * t @ R @ t - (t @ R @ field) / params.rho2
        mean = R @ (field + t / params.rho2)
        rhs = -ising + g.logpdf((s - mean)[None, :])[0]
        vals.append(lhs - rhs)
    vals = np.asarray(vals)
    return float(vals.max() - vals.min())


def exponential_moment(sigma: np.ndarray, eps: float) -> float:
    """Empirical sup_x E[exp(eps |sigma_x|)] over the sampled sites."""
    return float(np.exp(eps * np.abs(sigma)).mean(axis=0).max())
