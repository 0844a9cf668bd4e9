"""Bad-configuration experiments for the time-evolved measure.

The candidate bad configuration is the homogeneous value ``-q h s``.  It is
perturbed by +-K on an annulus ``V1 minus V0`` around an untouched core, and
the spin at the origin is compared between the two perturbations.  A gap that
survives as the core grows signals a discontinuous conditional probability.
Both perturbations are simulated with a shared-uniform (monotone) coupling,
so the sampled difference is sitewise nonnegative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dobrushin import small_s_certificate
from .evolution import DynamicsParams
from .ising import IsingInstance, build_annulus_ising, monotone_coupled_mc
from .lattice import build_box
from .resolvent import ModelParams, natural_params, recommended_margin, resolvent_direct

CERTIFIED = "Certified-Gibbs"
GAP_PERSISTS = "GapPersists"
GAP_VANISHES = "GapVanishes"
INDETERMINATE = "Indeterminate"
RESOLVED = "Resolved"

ESTIMATORS = ("tau_marg", "eta_mean")
STABLE_RATIO = 0.9


@dataclass(frozen=True)
class BadConfigSpec:
    eta_spec_value: float
    eta_spec_ou: float | None
    K: float
    omega_plus: float
    omega_minus: float
    s: float
    V0_side: int | None = None
    V1_side: int | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def make_bad_config(
    params: ModelParams, dyn: DynamicsParams, K: float = 10.0, V0_side: int | None = None, V1_side: int | None = None
) -> BadConfigSpec:
    """``eta_spec = -q h s`` and the perturbed values ``rho^2 (+-K - q h s)``.

    In OU mode the value seen in the original time scale is
    ``-2 q h rho_inf2 sinh(t/2)``, which equals ``-q h s r_t``; the identity is
    checked here.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    s = dyn.bm_time
    if not s > 0:
        raise ValueError("dynamics time must be > 0")
    qh = params.q * params.h
    spec = -qh * s
    ou = None
    if dyn.mode == "ou":
        ou = -2.0 * qh * dyn.rho_inf2 * math.sinh(dyn.t / 2)
        # 2 rho_inf2 sinh(t/2) = r_t s
        if not math.isclose(2.0 * dyn.rho_inf2 * math.sinh(dyn.t / 2), dyn.r_t * s, rel_tol=1e-12):
            raise AssertionError("OU and Brownian forms of the bad configuration disagree")
    r2 = params.rho2
    return BadConfigSpec(spec, ou, K, r2 * (K - qh * s), r2 * (-K - qh * s), s, V0_side, V1_side)


@dataclass(frozen=True)
class GapResult:
    gap: float
    std_error: float
    V0_size: int
    V1_size: int
    V_size: int
    K: float
    s: float
    estimator: str = "tau_marg"
    label: str = RESOLVED
    violations: int = 0
    sweeps: int = 0
    seed: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def annulus_pair(
    params: ModelParams,
    s: float,
    K: float,
    V0_side: int,
    V1_side: int,
    ambient_side: int,
    d: int = 2,
    V_side: int | None = None,
    margin: int | None = None,
) -> tuple[IsingInstance, IsingInstance]:
    """The +K and -K annulus instances on a spin box of side ``ambient_side`` with plus frame."""
    if not V0_side < V1_side <= ambient_side:
        raise ValueError("need V0_side < V1_side <= ambient_side")
    vol = build_box(d, ambient_side)
    V0, V1 = build_box(d, V0_side), build_box(d, V1_side)
    V = V1 if V_side is None else build_box(d, V_side)
    amb = vol.grow(recommended_margin(params, d) if margin is None else margin)
    hi = build_annulus_ising(vol, params, V0, V1, V, K, +1, s, boundary="plus", ambient=amb)
    lo = build_annulus_ising(vol, params, V0, V1, V, K, -1, s, boundary="plus", ambient=amb)
    return hi, lo


def _origin_mean_coef(inst: IsingInstance) -> tuple[float, np.ndarray]:
    R = inst.resolvent
    o = inst.ambient.origin_index
    frame = inst.ambient_spins(np.zeros(inst.n_sites))
    return float(R[o] @ (inst.drive + frame / inst.rho2)), R[o, inst.inner_index] / inst.rho2


def gap_experiment(
    params: ModelParams,
    s: float,
    K: float,
    V0_side: int,
    V1_side: int,
    ambient_side: int,
    estimator: str = "tau_marg",
    mc_budget: int = 20_000,
    seed: int = 0,
    d: int = 2,
    V_side: int | None = None,
    chains: int = 1,
) -> GapResult:
    """Coupled +K / -K runs; the gap at the origin with a batch-means error.

    ``tau_marg`` reports the difference of P(tau_0 = +).  ``eta_mean`` pushes
    the spin difference through the Gaussian mean of eta_0; its error uses the
    triangle inequality over sites and so is conservative.  Results with
    ``SE > gap / 3`` are labelled Indeterminate.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}")
    hi, lo = annulus_pair(params, s, K, V0_side, V1_side, ambient_side, d, V_side)
    run = monotone_coupled_mc(hi, lo, sweeps=mc_budget, seed=seed, chains=chains)
    o = hi.volume.origin_index
    if estimator == "tau_marg":
        gap = 0.5 * float(run.difference.magnetization[o])
        se = 0.5 * float(run.difference.std_error[o])
    else:
        c_hi, coef = _origin_mean_coef(hi)
        c_lo, _ = _origin_mean_coef(lo)
        gap = c_hi - c_lo + float(coef @ run.difference.magnetization)
        se = float(coef @ run.difference.std_error)
    label = INDETERMINATE if not se <= abs(gap) / 3 else RESOLVED
    V_n = V1_side**d if V_side is None else V_side**d
    return GapResult(
        gap, se, V0_side**d, V1_side**d, V_n, K, s, estimator, label, run.violations, mc_budget, seed
    )


def h_independence_check(
    params: ModelParams, h: float, s: float, K: float, V0_side: int, V1_side: int, ambient_side: int, d: int = 2
) -> dict:
    """Compare annulus fields at h = 0 and at ``h`` inside V1.

    The difference at x is ``rho^-2 q h sum_{y not in V1} R_xy``, bounded by
    the resolvent tail ``rho^-2 |q h| (rho^2 - sum_{y in V1} R^box_xy)``.
    Returns the maximal difference on V0 and on V1 and whether the sitewise
    tail bound holds on V1.
    """
    p0 = ModelParams(params.q, params.rho2, 0.0)
    ph = ModelParams(params.q, params.rho2, h)
    a, _ = annulus_pair(p0, s, K, V0_side, V1_side, ambient_side, d)
    b, _ = annulus_pair(ph, s, K, V0_side, V1_side, ambient_side, d)
    if np.max(np.abs(a.couplings - b.couplings)) != 0.0:
        raise AssertionError("couplings must not depend on h")
    vol = a.volume
    in_v1 = vol.mask(vol.embedding(build_box(d, V1_side)))
    in_v0 = vol.mask(vol.embedding(build_box(d, V0_side)))
    diff = np.abs(b.fields - a.fields)
    amb = a.ambient
    R = resolvent_direct(amb, p0).matrix
    v1_amb = amb.embedding(build_box(d, V1_side))
    tail = (params.rho2 - R[np.ix_(a.inner_index, v1_amb)].sum(axis=1)) * abs(params.q * h) / params.rho2
    return {
        "max_diff_V0": float(diff[in_v0].max()),
        "max_diff_V1": float(diff[in_v1].max()),
        "max_tail_bound_V0": float(tail[in_v0].max()),
        "bound_holds": bool(np.all(diff[in_v1] <= tail[in_v1] + 1e-12)),
    }


@dataclass(frozen=True)
class ScanPoint:
    t: float
    s: float
    label: str
    contraction: float
    gaps: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "t": self.t, "s": self.s, "label": self.label, "contraction": self.contraction,
            "gaps": [g.as_dict() for g in self.gaps],
        }


@dataclass(frozen=True)
class ScanResult:
    points: list
    t0: float | None
    t1: float | None


def classify_gaps(gaps: Sequence[GapResult], stable_ratio: float = STABLE_RATIO) -> str:
    """Evidence label for gaps ordered by increasing core size.

    GapPersists: every gap exceeds 3 SE and the largest-core gap keeps at
    least ``stable_ratio`` of the smallest-core gap.  GapVanishes: resolved at
    the smallest core, within 3 SE of zero at the largest.  Anything else,
    including resolved gaps that still decay, is Indeterminate.
    """
    first, last = gaps[0], gaps[-1]
    if all(g.gap > 3 * g.std_error for g in gaps) and last.gap >= stable_ratio * first.gap:
        return GAP_PERSISTS
    if first.gap > 3 * first.std_error and last.gap <= 3 * last.std_error:
        return GAP_VANISHES
    return INDETERMINATE


def gibbs_scan(
    params: ModelParams,
    dyn_grid: Sequence[DynamicsParams],
    K: float = 10.0,
    V0_sides: Sequence[int] = (3, 5, 7),
    d: int = 2,
    mc_budget: int = 20_000,
    seed: int = 0,
    estimator: str = "tau_marg",
    ratios: tuple[int, int] = (2, 3),
) -> ScanResult:
    """Certificate or gap experiment at each time of ``dyn_grid``.

    Geometry per core side ``n``: ``V1_side = ratios[0] n`` and spin box side
    ``ratios[1] n`` (rounded up to odd).  Returns the points in grid order and
    the bracket (t0, t1): the largest t up to which every point is certified
    and the smallest t at which the gap persists.
    """
    if not dyn_grid:
        raise ValueError("empty time grid")
    points = []
    for i, dyn in enumerate(dyn_grid):
        s = dyn.bm_time
        nat = natural_params(params, d, s)
        if small_s_certificate(params, d, s):
            points.append(ScanPoint(dyn.label(), s, CERTIFIED, nat.contraction))
            continue
        gaps = []
        for n in V0_sides:
            v1 = ratios[0] * n | 1
            amb = ratios[1] * n | 1
            gaps.append(gap_experiment(params, s, K, n, v1, amb, estimator, mc_budget, seed + 1000 * i, d))
        points.append(ScanPoint(dyn.label(), s, classify_gaps(gaps), nat.contraction, gaps))
    t0 = None
    for p in points:
        if p.label != CERTIFIED:
            break
        t0 = p.t
    t1 = next((p.t for p in points if p.label == GAP_PERSISTS), None)
    return ScanResult(points, t0, t1)
