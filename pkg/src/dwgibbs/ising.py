"""Discrete-spin models with resolvent couplings.

Every Hamiltonian here has the form

    H(tau) = -1/2 sum_{x != y} J_xy tau_x tau_y - sum_x g_x tau_x

with ``J = rho^-4 R`` (diagonal dropped, it only shifts the energy) and
``g = rho^-2 (R b)`` for a drive vector ``b`` on an ambient box.  Plus/minus
boundary conditions freeze the spins of ``ambient \\ volume`` at +1/-1 and fold
their couplings into ``g``.  Outside the ambient box the continuous field is
held at zero (Dirichlet).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import expit, logsumexp

from . import _kernels
from .lattice import MAX_ENUMERATION_SITES, LatticeVolume, VolumeTooLarge
from .resolvent import MassProfile, ModelParams, recommended_margin, resolvent_direct

BOUNDARY_SPIN = {"minus": -1, "free": 0, "plus": 1}


@dataclass(frozen=True)
class QuenchedFieldSpec:
    """Conditioned set W (coordinates), Brownian time s and field values eta on W."""

    W: np.ndarray
    s: float
    eta: np.ndarray

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=int))
        if W.size == 0:
            W = W.reshape(0, W.shape[1] if W.ndim == 2 and W.shape[1] else 1)
        eta = np.broadcast_to(np.asarray(self.eta, dtype=float), (W.shape[0],)).copy()
        if self.s <= 0:
            raise ValueError("s must be > 0")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "eta", eta)

    def indices(self, vol: LatticeVolume) -> np.ndarray:
        if self.W.shape[0] == 0:
            return np.zeros(0, dtype=int)
        return vol.indices_of(self.W)


@dataclass(frozen=True, eq=False)
class IsingInstance:
    volume: LatticeVolume
    couplings: np.ndarray
    fields: np.ndarray
    boundary: str = "free"
    ambient: LatticeVolume | None = None
    inner_index: np.ndarray | None = None
    resolvent: np.ndarray | None = None
    drive: np.ndarray | None = None
    rho2: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        J = np.asarray(self.couplings, dtype=float)
        g = np.asarray(self.fields, dtype=float)
        n = self.volume.n_sites
        if J.shape != (n, n) or g.shape != (n,):
            raise ValueError("coupling/field shapes do not match the volume")
        if not np.allclose(J, J.T, atol=1e-13, rtol=0):
            raise ValueError("couplings must be symmetric")
        if np.any(np.diag(J) != 0):
            raise ValueError("couplings must have zero diagonal")
        if np.any(J < -1e-14):
            raise ValueError("couplings must be nonnegative (ferromagnetic)")
        if self.boundary not in BOUNDARY_SPIN:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        J = np.ascontiguousarray(np.maximum(J, 0.0))
        J.setflags(write=False)
        g = g.copy()
        g.setflags(write=False)
        object.__setattr__(self, "couplings", J)
        object.__setattr__(self, "fields", g)

    @property
    def n_sites(self) -> int:
        return self.volume.n_sites

    def ambient_spins(self, tau: np.ndarray) -> np.ndarray:
        """Embed inner spins into the ambient box, boundary spins elsewhere."""
        if self.ambient is None:
            return np.asarray(tau, dtype=float)
        tau = np.asarray(tau, dtype=float)
        shape = tau.shape[:-1] + (self.ambient.n_sites,)
        full = np.full(shape, float(BOUNDARY_SPIN[self.boundary]))
        full[..., self.inner_index] = tau
        return full

    def with_fields(self, fields: np.ndarray, boundary: str | None = None) -> "IsingInstance":
        return IsingInstance(
            self.volume, self.couplings, fields, boundary or self.boundary,
            self.ambient, self.inner_index, self.resolvent, self.drive, self.rho2, dict(self.meta),
        )


@dataclass(frozen=True)
class GibbsEstimate:
    magnetization: np.ndarray
    std_error: np.ndarray
    method: str
    sweeps: int | None = None
    seed: int | None = None
    chains: int | None = None

    @property
    def prob_plus(self) -> np.ndarray:
        return 0.5 * (1.0 + self.magnetization)

    @property
    def prob_plus_se(self) -> np.ndarray:
        return 0.5 * self.std_error

    def records(self) -> list[dict]:
        return [
            {"site": i, "m": float(m), "se": float(se), "method": self.method, "seed": self.seed}
            for i, (m, se) in enumerate(zip(self.magnetization, self.std_error))
        ]


def _coords(obj, dim: int) -> np.ndarray:
    if isinstance(obj, LatticeVolume):
        return obj.coords
    arr = np.asarray(obj, dtype=int)
    return arr.reshape(-1, dim)


def _default_ambient(
    volume: LatticeVolume, boundary: str, ambient: LatticeVolume | None, params: ModelParams
) -> LatticeVolume:
    if ambient is None:
        ambient = volume if boundary == "free" else volume.grow(recommended_margin(params, volume.dimension))
    if not ambient.contains_volume(volume):
        raise ValueError("volume must lie inside the ambient box")
    if boundary == "free" and ambient != volume:
        raise ValueError("free boundary requires ambient == volume")
    return ambient


def instance_from_resolvent(
    volume: LatticeVolume,
    ambient: LatticeVolume,
    R: np.ndarray,
    drive: np.ndarray,
    rho2: float,
    boundary: str,
    meta: dict | None = None,
) -> IsingInstance:
    """Restrict ``J = rho^-4 R``, ``g = rho^-2 R b`` to ``volume`` and fold in the boundary."""
    inner = ambient.embedding(volume)
    outer = np.setdiff1d(np.arange(ambient.n_sites), inner)
    Jfull = R / rho2**2
    gfull = (R @ drive) / rho2
    J = Jfull[np.ix_(inner, inner)].copy()
    np.fill_diagonal(J, 0.0)
    g = gfull[inner].copy()
    spin = BOUNDARY_SPIN[boundary]
    if spin and outer.size:
        g += spin * Jfull[np.ix_(inner, outer)].sum(axis=1)
    return IsingInstance(volume, J, g, boundary, ambient, inner, R, np.asarray(drive, float), rho2, meta or {})


def build_resolvent_ising(
    volume: LatticeVolume,
    params: ModelParams,
    quench: QuenchedFieldSpec | None = None,
    boundary: str = "free",
    ambient: LatticeVolume | None = None,
) -> IsingInstance:
    """Ising model with couplings from ``(rho^-2 + s^-1 I_W - q Delta)^{-1}``.

    Without ``quench`` this is the plain resolvent model with field ``q h``.
    """
    ambient = _default_ambient(volume, boundary, ambient, params)
    n = ambient.n_sites
    drive = np.full(n, params.q * params.h)
    if quench is not None and quench.W.shape[0]:
        widx = quench.indices(ambient)
        if not np.all(np.isin(widx, ambient.embedding(volume))):
            raise ValueError("W must be a subset of the spin volume")
        mass = MassProfile.on_sites(ambient, params.rho2, widx, quench.s)
        drive[widx] += quench.eta / quench.s
    else:
        mass = MassProfile.plain(ambient, params.rho2)
    R = resolvent_direct(ambient, params, mass).matrix
    meta = {"kind": "quenched" if quench is not None else "plain"}
    return instance_from_resolvent(volume, ambient, R, drive, params.rho2, boundary, meta)


def build_annulus_ising(
    volume: LatticeVolume,
    params: ModelParams,
    V0: LatticeVolume,
    V1: LatticeVolume,
    V,
    K: float,
    sign: int,
    s: float,
    boundary: str = "plus",
    ambient: LatticeVolume | None = None,
) -> IsingInstance:
    """Annulus perturbation model.

    Couplings come from ``(rho^-2 + s^-1 I_{V minus origin} - q Delta)^{-1}``;
    the field is ``sum_{y not in V0} R_xy (sign K 1[y in V1 \\ V0] + rho^-2 q h 1[y not in V1])``.
    ``sign=+1`` pushes the annulus up.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    ambient = _default_ambient(volume, boundary, ambient, params)
    d = ambient.dimension
    if not (V1.contains_volume(V0) and volume.contains_volume(V1)):
        raise ValueError("need V0 inside V1 inside the spin volume")
    v_idx = ambient.indices_of(_coords(V, d))
    origin = ambient.origin_index
    if origin not in set(v_idx.tolist()):
        raise ValueError("V must contain the origin")
    w_idx = v_idx[v_idx != origin]
    in_v0 = ambient.mask(ambient.embedding(V0))
    in_v1 = ambient.mask(ambient.embedding(V1))
    drive = np.zeros(ambient.n_sites)
    drive[in_v1 & ~in_v0] = sign * K * params.rho2
    drive[~in_v1] = params.q * params.h
    mass = MassProfile.on_sites(ambient, params.rho2, w_idx, s)
    R = resolvent_direct(ambient, params, mass).matrix
    meta = {"kind": "annulus", "K": K, "sign": sign, "s": s}
    return instance_from_resolvent(volume, ambient, R, drive, params.rho2, boundary, meta)


def energy(inst: IsingInstance, tau: np.ndarray) -> np.ndarray | float:
    """H(tau) = -1/2 tau.J.tau - g.tau (vectorised over leading axes)."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape[-1] != inst.n_sites:
        raise ValueError("configuration does not match the volume")
    e = -0.5 * np.einsum("...i,ij,...j->...", tau, inst.couplings, tau) - tau @ inst.fields
    return float(e) if np.ndim(e) == 0 else e


def conditional_prob(inst: IsingInstance, x: int, tau: np.ndarray) -> float:
    """P(tau_x = +1 | rest); the value of tau at x is ignored."""
    tau = np.asarray(tau, dtype=float)
    h = inst.couplings[x] @ tau + inst.fields[x]
    return float(expit(2.0 * h))


def all_states(n: int) -> np.ndarray:
    """All 2^n configurations in {-1, +1}^n, site 0 as the most significant bit."""
    codes = np.arange(2**n, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n - 1, -1, -1)) & 1
    return (2 * bits - 1).astype(np.int8)


@dataclass(frozen=True)
class ExactGibbs:
    estimate: GibbsEstimate
    states: np.ndarray
    probs: np.ndarray
    log_partition: float

    def expectation(self, values: np.ndarray) -> float:
        return float(self.probs @ values)

    def correlation(self, x: int, y: int) -> float:
        return self.expectation(self.states[:, x].astype(float) * self.states[:, y])

    def conditional(self, x: int, tau: np.ndarray) -> float:
        """P(tau_x = + | tau elsewhere) read off the joint distribution."""
        tau = np.asarray(tau, dtype=np.int8).copy()
        tau[x] = 1
        n = len(tau)
        weights = 1 << np.arange(n - 1, -1, -1)
        code_plus = int(((tau + 1) // 2) @ weights)
        code_minus = code_plus - int(weights[x])
        p, m = self.probs[code_plus], self.probs[code_minus]
        return float(p / (p + m))


def exact_gibbs(inst: IsingInstance, max_sites: int = MAX_ENUMERATION_SITES) -> ExactGibbs:
    n = inst.n_sites
    if n > max_sites:
        raise VolumeTooLarge(f"volume too large for enumeration: {n} > {max_sites} sites")
    states = all_states(n)
    logw = np.empty(len(states))
    chunk = 1 << 16
    for i in range(0, len(states), chunk):
        logw[i : i + chunk] = -energy(inst, states[i : i + chunk])
    logZ = float(logsumexp(logw))
    probs = np.exp(logw - logZ)
    mag = probs @ states.astype(float)
    est = GibbsEstimate(mag, np.zeros(n), "exact")
    return ExactGibbs(est, states, probs, logZ)


def _initial_state(inst: IsingInstance, rng: np.random.Generator, spin: int | None = None) -> np.ndarray:
    if spin is None:
        spin = BOUNDARY_SPIN[inst.boundary]
    if spin == 0:
        return rng.choice(np.array([-1, 1], dtype=np.int64), size=inst.n_sites)
    return np.full(inst.n_sites, spin, dtype=np.int64)


def _chain_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, chain]))


def _batch_se(batch_means: np.ndarray) -> np.ndarray:
    B = batch_means.shape[0]
    if B < 2:
        return np.full(batch_means.shape[1:], np.nan)
    return batch_means.std(axis=0, ddof=1) / np.sqrt(B)


def _run_blocks(inst, tau, rng, n_sweeps, block, acc, record=None, thin=0):
    """Run ``n_sweeps`` sweeps in chunks of at most ``block``; returns #recorded."""
    n = inst.n_sites
    J, g = inst.couplings, inst.fields
    if thin > 0:
        block = max(thin, block - block % thin)  # keep the thinning phase across blocks
    done = rec = 0
    while done < n_sweeps:
        m = min(block, n_sweeps - done)
        u = rng.random((m, n))
        if record is not None and thin > 0:
            rec += _kernels.heatbath_block(J, g, tau, u, acc, record[rec:], thin)
        else:
            _kernels.heatbath_block(J, g, tau, u, acc, np.zeros((0, n), np.int64), 0)
        done += m
    return rec


def heatbath_mc(
    inst: IsingInstance,
    sweeps: int = 20_000,
    burn_in: int = 2_000,
    seed: int = 0,
    chains: int = 4,
    n_batches: int = 20,
) -> GibbsEstimate:
    """Heat-bath magnetizations with batch-means standard errors.

    Chains start from the boundary spin (random for free boundaries) and are
    seeded by ``(seed, chain index)``.
    """
    if not sweeps > burn_in >= 0:
        raise ValueError("need sweeps > burn_in >= 0")
    n = inst.n_sites
    blen = (sweeps - burn_in) // n_batches
    if blen < 1:
        raise ValueError("too few sweeps for the requested number of batches")
    means = np.empty((chains, n_batches, n))
    for c in range(chains):
        rng = _chain_rng(seed, c)
        tau = _initial_state(inst, rng)
        _run_blocks(inst, tau, rng, burn_in, 4096, np.zeros(n))
        for b in range(n_batches):
            acc = np.zeros(n)
            _run_blocks(inst, tau, rng, blen, 4096, acc)
            means[c, b] = acc / blen
    flat = means.reshape(-1, n)
    return GibbsEstimate(flat.mean(axis=0), _batch_se(flat), "mc", sweeps, seed, chains)


def heatbath_samples(
    inst: IsingInstance, n_samples: int, thin: int = 5, burn_in: int = 1_000, seed: int = 0, chains: int = 4
) -> np.ndarray:
    """``n_samples`` thinned configurations, split evenly over ``chains`` chains.

    Rows are grouped chain by chain (useful for batch-means errors).
    """
    n = inst.n_sites
    per = -(-n_samples // chains)
    out = np.empty((chains * per, n), dtype=np.int64)
    for c in range(chains):
        rng = _chain_rng(seed, c)
        tau = _initial_state(inst, rng)
        _run_blocks(inst, tau, rng, burn_in, 4096, np.zeros(n))
        rec = _run_blocks(inst, tau, rng, per * thin, 4096, np.zeros(n), out[c * per : (c + 1) * per], thin)
        assert rec == per
    return out[:n_samples]


class CoupledRun(NamedTuple):
    hi: GibbsEstimate
    lo: GibbsEstimate
    violations: int
    difference: GibbsEstimate


def monotone_coupled_mc(
    inst_hi: IsingInstance,
    inst_lo: IsingInstance,
    sweeps: int = 20_000,
    seed: int = 0,
    burn_in: int | None = None,
    chains: int = 1,
    n_batches: int = 20,
) -> CoupledRun:
    """Two heat-bath chains sharing every uniform (monotone coupling).

    Requires equal couplings and ``g_hi >= g_lo``; then ``tau_hi >= tau_lo``
    sitewise at all times, and ``violations`` counts departures from that.
    Identical instances share the same starting state; otherwise ``hi``
    starts all-plus and ``lo`` all-minus.
    """
    if inst_hi.n_sites != inst_lo.n_sites:
        raise ValueError("instances live on different volumes")
    if np.max(np.abs(inst_hi.couplings - inst_lo.couplings)) > 1e-12:
        raise ValueError("coupled instances must share couplings")
    if np.any(inst_hi.fields < inst_lo.fields - 1e-12):
        raise ValueError("need g_hi >= g_lo sitewise")
    if BOUNDARY_SPIN[inst_hi.boundary] < BOUNDARY_SPIN[inst_lo.boundary]:
        raise ValueError("need boundary_hi >= boundary_lo")
    burn_in = sweeps // 10 if burn_in is None else burn_in
    if not sweeps > burn_in >= 0:
        raise ValueError("need sweeps > burn_in >= 0")
    n = inst_hi.n_sites
    blen = (sweeps - burn_in) // n_batches
    if blen < 1:
        raise ValueError("too few sweeps for the requested number of batches")
    same = inst_hi.boundary == inst_lo.boundary and np.array_equal(inst_hi.fields, inst_lo.fields)
    J = inst_hi.couplings
    mh = np.empty((chains, n_batches, n))
    ml = np.empty((chains, n_batches, n))
    violations = 0
    for c in range(chains):
        rng = _chain_rng(seed, c)
        if same:
            start = BOUNDARY_SPIN[inst_hi.boundary] or 1
            th, tl = np.full(n, start, np.int64), np.full(n, start, np.int64)
        else:
            th, tl = np.ones(n, np.int64), -np.ones(n, np.int64)
        for b in range(-1, n_batches):
            length = burn_in if b < 0 else blen
            ah, al = np.zeros(n), np.zeros(n)
            done = 0
            while done < length:
                m = min(4096, length - done)
                u = rng.random((m, n))
                violations += _kernels.coupled_block(J, inst_hi.fields, inst_lo.fields, th, tl, u, ah, al)
                done += m
            if b >= 0:
                mh[c, b] = ah / blen
                ml[c, b] = al / blen
    fh, fl = mh.reshape(-1, n), ml.reshape(-1, n)
    hi = GibbsEstimate(fh.mean(0), _batch_se(fh), "mc-coupled", sweeps, seed, chains)
    lo = GibbsEstimate(fl.mean(0), _batch_se(fl), "mc-coupled", sweeps, seed, chains)
    diff = GibbsEstimate((fh - fl).mean(0), _batch_se(fh - fl), "mc-coupled", sweeps, seed, chains)
    return CoupledRun(hi, lo, violations, diff)


def difference_hamiltonian(inst_quenched: IsingInstance, inst_plain: IsingInstance, tau: np.ndarray):
    """H_quenched(tau) - H_plain(tau), up to tau-independent constants."""
    if inst_quenched.n_sites != inst_plain.n_sites:
        raise ValueError("instances live on different volumes")
    return energy(inst_quenched, tau) - energy(inst_plain, tau)
