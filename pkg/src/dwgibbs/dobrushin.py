"""Dobrushin-uniqueness certificates for the resolvent Ising models.

Influence matrices ``(I - k A)^{-1}`` are computed on finite boxes, with ``A``
the nearest-neighbour adjacency.  The contraction ``2d k < 1`` is always
checked first, so the Neumann representation of every inverse is valid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .ising import IsingInstance, all_states
from .lattice import LatticeVolume
from .resolvent import ModelParams, NaturalParams, natural_params, resolvent_direct, resolvent_series

# Inverse critical temperature of the 2d nearest-neighbour Ising model, (1/2) ln(1 + sqrt 2).
BETA_2 = 0.440686793509772

HIGH_TEMP = "HighTempUnique"
LOW_TEMP = "LowTempOrdered"
INDETERMINATE = "Indeterminate"

EXHAUSTIVE_MAX_SITES = 10


class CertificateError(ValueError):
    """A contraction condition required by a bound does not hold."""


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    inv_q: float
    high_temp_rhs: float
    low_temp_rhs: float
    beta_d: float
    exclusive: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class InfluenceBound:
    matrix: np.ndarray
    dobrushin_constant_bound: float


def beta_critical(d: int, beta_d: float | None = None) -> float:
    if beta_d is not None:
        return beta_d
    if d == 2:
        return BETA_2
    raise ValueError(f"no built-in critical inverse temperature for d={d}; pass beta_d")


def classify_regime(params: ModelParams, d: int, beta_d: float | None = None) -> RegimeReport:
    """High-temperature uniqueness vs low-temperature ordering; h plays no role."""
    bd = beta_critical(d, beta_d)
    inv_q = math.inf if params.q == 0 else 1.0 / params.q
    hi_rhs = 2 * d * (1.0 - params.rho2)
    lo_rhs = 1.0 / bd - 2 * d * params.rho2
    high = inv_q > hi_rhs
    low = inv_q < lo_rhs
    # Both can only hold together if the low-temperature window overlaps the high one.
    exclusive = lo_rhs <= hi_rhs
    if high and low and exclusive:
        raise AssertionError("regime conditions overlap")
    regime = HIGH_TEMP if high else LOW_TEMP if low else INDETERMINATE
    return RegimeReport(regime, inv_q, hi_rhs, lo_rhs, bd, exclusive)


def dobrushin_constant(nat: NaturalParams, d: int | None = None) -> float:
    """Upper bound ``a0 2d lambda / (1 - 2d lambda)`` on the Dobrushin constant."""
    d = nat.d if d is None else d
    x = 2 * d * nat.lam
    if x >= 1:
        raise CertificateError("2d lambda >= 1")
    return nat.a0 * x / (1.0 - x)


def neumann_inverse(vol: LatticeVolume, k: float) -> np.ndarray:
    """``(I - k A)^{-1}`` on the box, requiring ``2d k < 1``."""
    if 2 * vol.dimension * k >= 1:
        raise CertificateError(f"contraction fails: 2d * {k:.6g} >= 1")
    M = np.eye(vol.n_sites) - k * vol.adjacency.toarray()
    return sla.solve(M, np.eye(vol.n_sites), assume_a="pos")


def _rho2_a0(nat: NaturalParams) -> float:
    if nat.rho2 is None:
        raise ValueError("natural parameters must carry rho2")
    return nat.rho2 * nat.a0


def influence_matrix(nat: NaturalParams, s: float, vol: LatticeVolume) -> InfluenceBound:
    """``B = (rho^2 a0 / 2s) (I - lambda (1 + a0) A)^{-1}`` on the box.

    ``B[x, z]`` bounds the change of P(tau_x = +) per unit change of eta_z.
    """
    if s <= 0:
        raise ValueError("s must be > 0")
    if nat.contraction >= 1:
        raise CertificateError(f"lambda(1+a0)2d = {nat.contraction:.4g} >= 1")
    k = nat.lam * (1.0 + nat.a0)
    B = neumann_inverse(vol, k) * (_rho2_a0(nat) / (2.0 * s))
    return InfluenceBound(B, dobrushin_constant(nat, vol.dimension))


def eta_influence_bound(nat: NaturalParams, s: float, vol: LatticeVolume, x: int, delta_eta: np.ndarray) -> float:
    """Certified bound on |nu[eta](tau_x=+) - nu[eta'](tau_x=+)| given |eta - eta'| per site."""
    delta = np.abs(np.asarray(delta_eta, dtype=float))
    if delta.shape != (vol.n_sites,):
        raise ValueError("delta_eta must have one entry per site")
    if not np.any(delta):
        if nat.contraction >= 1:
            raise CertificateError(f"lambda(1+a0)2d = {nat.contraction:.4g} >= 1")
        return 0.0
    return float(influence_matrix(nat, s, vol).matrix[x] @ delta)


class SmallSBounds(NamedTuple):
    coupling_discrepancy_bound: float
    influence_bound: float
    tail_term: float
    eta_term: float
    dobrushin_constant: float


def small_s_certificate(params: ModelParams, d: int, s: float) -> bool:
    """a0(s) < 1/(2d lambda(s)) - 1, i.e. the auxiliary model is Dobrushin-unique."""
    return natural_params(params, d, s).contraction < 1.0


def small_s_bounds(
    params: ModelParams,
    s: float,
    ambient: LatticeVolume,
    W: np.ndarray,
    x: int,
    delta_eta: np.ndarray | None = None,
) -> SmallSBounds:
    """Bounds for short times via the auxiliary model with mass 1/s on every site.

    ``W`` holds ambient indices of the conditioned set.  The coupling
    discrepancy at y uses the infinite-volume row sum rho^2 of the resolvent:
    ``rho^-4 sum_{z not in W} R_yz <= rho^-4 (rho^2 - sum_{z in W} R^box_yz)``.
    The tail term ``sum_y Dbar_xy bbar_y`` and the eta term are evaluated on the
    ambient box; ``influence_bound = 2 * tail + eta_term``.
    """
    d = ambient.dimension
    nat_s = natural_params(params, d, s)
    if nat_s.contraction >= 1:
        raise CertificateError(f"small-s certificate fails: lambda(s)(1+a0(s))2d = {nat_s.contraction:.4g}")
    W = np.asarray(W, dtype=int)
    R = resolvent_direct(ambient, params).matrix
    inW = ambient.mask(W) if W.size else np.zeros(ambient.n_sites, bool)
    bbar = (params.rho2 - R[:, inW].sum(axis=1)) / params.rho2**2
    bbar = np.maximum(bbar, 0.0)
    kappa = nat_s.lam * (1.0 + nat_s.a0)
    N = neumann_inverse(ambient, kappa)
    A = ambient.adjacency
    Dbar = np.eye(ambient.n_sites) + (kappa - nat_s.lam) * (A @ N)
    tail = float(Dbar[x] @ bbar)
    if delta_eta is None:
        eta_term = 0.0
    else:
        eta_term = float(_rho2_a0(nat_s) / (2.0 * s) * (N[x] @ np.abs(delta_eta)))
    return SmallSBounds(float(bbar[x]), 2.0 * tail + eta_term, tail, eta_term, dobrushin_constant(nat_s, d))


def series_coupling_bound(params: ModelParams, inst: IsingInstance, tol: float = 1e-14) -> np.ndarray:
    """``a0 sum_{n>=1} lambda^n (A^n)_{xy}`` on the instance's ambient box, restricted to its spins."""
    ambient = inst.ambient if inst.ambient is not None else inst.volume
    inner = inst.inner_index if inst.inner_index is not None else np.arange(inst.n_sites)
    nat = natural_params(params, ambient.dimension)
    full = resolvent_series(ambient, params, tol).matrix / params.rho2**2 - nat.a0 * np.eye(ambient.n_sites)
    # the truncated series undershoots; add the certified tail so this stays an upper bound
    full = full + tol / params.rho2**2
    out = full[np.ix_(inner, inner)].copy()
    np.fill_diagonal(out, 0.0)
    return out


def empirical_dobrushin_matrix(
    inst: IsingInstance, mode: str = "auto", n_samples: int = 1000, seed: int = 0
) -> np.ndarray:
    """C_xy = sup over configurations differing only at y of |P(tau_x=+|.) - P(tau_x=+|.')|.

    Exhaustive for at most EXHAUSTIVE_MAX_SITES spins; ``mode="sample"`` uses
    ``n_samples`` random configurations and yields a lower bound on the sup.
    """
    n = inst.n_sites
    if mode == "auto":
        mode = "exhaustive" if n <= EXHAUSTIVE_MAX_SITES else "error"
    if mode == "exhaustive":
        if n > EXHAUSTIVE_MAX_SITES:
            raise ValueError(f"volume too large for exhaustive mode ({n} sites)")
        states = all_states(n).astype(float)
    elif mode == "sample":
        rng = np.random.default_rng(seed)
        states = rng.choice([-1.0, 1.0], size=(n_samples, n))
    else:
        raise ValueError("volume too large for exhaustive mode; pass mode='sample'")
    J, g = inst.couplings, inst.fields
    loc = states @ J + g  # loc[k, x] = g_x + sum_y J_xy tau_y
    C = np.zeros((n, n))
    for y in range(n):
        base = loc - states[:, [y]] * J[y][None, :]
        jy = J[y][None, :]
        diff = np.abs(np.tanh(base + jy) - np.tanh(base - jy)) / 2.0
        C[:, y] = diff.max(axis=0)
    np.fill_diagonal(C, 0.0)
    return C
