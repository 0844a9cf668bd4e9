"""Finite-volume resolvents of the massive lattice Laplacian.

The central object is ``(rho^-2 + diag(m) - q Delta_L)^{-1}`` on a Dirichlet
box.  It is computed by a direct symmetric solve, or (for the translation
invariant operator) by the Neumann series ``rho^4 a0 sum_n lambda^n A^n`` in the
nearest-neighbour adjacency ``A``.

The series truncation uses the row-sum bound ``sum_y (A^n)_{xy} <= (2d)^n``.
On a Dirichlet box the true row sums are smaller near the faces, so the bound
is conservative there.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import LatticeVolume, build_box

# Above this many sites the direct route switches to conjugate gradients.
DENSE_MAX_SITES = 10_000
CG_TOL = 1e-12
RESIDUAL_TOL = 1e-10


class ResolventError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelParams:
    q: float
    rho2: float
    h: float = 0.0

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be >= 0")
        if self.rho2 <= 0:
            raise ValueError("rho2 must be > 0")

    @property
    def beta(self) -> float:
        return 1.0 / self.rho2


@dataclass(frozen=True)
class MassProfile:
    """Diagonal mass ``base + extra``; ``base`` is rho^-2."""

    base: float
    extra: np.ndarray

    def __post_init__(self):
        extra = np.asarray(self.extra, dtype=float)
        if np.any(extra < 0):
            raise ValueError("extra mass must be nonnegative")
        extra.setflags(write=False)
        object.__setattr__(self, "extra", extra)

    @property
    def total(self) -> np.ndarray:
        return self.base + self.extra

    @classmethod
    def plain(cls, vol: LatticeVolume, rho2: float) -> "MassProfile":
        return cls(1.0 / rho2, np.zeros(vol.n_sites))

    @classmethod
    def on_sites(cls, vol: LatticeVolume, rho2: float, sites: Iterable[int], s: float) -> "MassProfile":
        """Extra mass 1/s on ``sites`` (the conditioned set W), zero elsewhere."""
        if s <= 0:
            raise ValueError("s must be > 0")
        extra = np.zeros(vol.n_sites)
        idx = np.asarray(list(sites), dtype=int)
        extra[idx] = 1.0 / s
        return cls(1.0 / rho2, extra)

    @classmethod
    def uniform(cls, vol: LatticeVolume, rho2: float, s: float) -> "MassProfile":
        if s <= 0:
            raise ValueError("s must be > 0")
        return cls(1.0 / rho2, np.full(vol.n_sites, 1.0 / s))


@dataclass(frozen=True)
class ResolventMatrix:
    matrix: np.ndarray
    volume: LatticeVolume
    provenance: str
    n_terms: int | None = None
    residual: float | None = None

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def shape(self):
        return self.matrix.shape


@dataclass(frozen=True)
class NaturalParams:
    a0: float
    lam: float
    d: int
    s: float | None = None
    rho2: float | None = None

    @property
    def contraction(self) -> float:
        """lambda (1 + a0) 2d; below 1 the Dobrushin certificate holds."""
        return self.lam * (1.0 + self.a0) * 2 * self.d

    @property
    def uniqueness_threshold(self) -> float:
        """1/(2d lambda) - 1, the lower bound on the critical a0."""
        return math.inf if self.lam == 0 else 1.0 / (2 * self.d * self.lam) - 1.0


def operator_matrix(vol: LatticeVolume, params: ModelParams, mass: MassProfile | None = None) -> sp.csr_matrix:
    """Sparse ``diag(mass) - q Delta_L``."""
    if mass is None:
        mass = MassProfile.plain(vol, params.rho2)
    if len(mass.extra) != vol.n_sites:
        raise ValueError("mass profile does not match volume")
    return (sp.diags(mass.total) - params.q * vol.laplacian).tocsr()


def _check_residual(R: np.ndarray, A: sp.csr_matrix) -> float:
    res = np.abs((A @ R.T).T - np.eye(A.shape[0])).max() if A.shape[0] else 0.0
    return float(res)


def resolvent_direct(vol: LatticeVolume, params: ModelParams, mass: MassProfile | None = None) -> ResolventMatrix:
    """Full inverse of ``rho^-2 + diag(extra) - q Delta_L`` by Cholesky (or CG for big boxes)."""
    A = operator_matrix(vol, params, mass)
    n = vol.n_sites
    if n <= DENSE_MAX_SITES:
        c, low = sla.cho_factor(A.toarray(), lower=True)
        R = sla.cho_solve((c, low), np.eye(n))
        R = 0.5 * (R + R.T)
    else:
        R = np.empty((n, n))
        diag = A.diagonal()
        M = sp.diags(1.0 / diag)
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            col, info = spla.cg(A, e, rtol=CG_TOL, atol=0.0, M=M, maxiter=10 * n)
            if info != 0:
                raise ResolventError(f"CG did not converge for column {j} (info={info})")
            R[:, j] = col
    res = _check_residual(R, A)
    if res >= RESIDUAL_TOL:
        raise ResolventError(f"resolvent residual {res:.3e} exceeds {RESIDUAL_TOL}")
    R.setflags(write=False)
    return ResolventMatrix(R, vol, "direct", residual=res)


def solve(vol: LatticeVolume, params: ModelParams, rhs: np.ndarray, mass: MassProfile | None = None) -> np.ndarray:
    """Apply the resolvent to vector(s) without forming the inverse."""
    A = operator_matrix(vol, params, mass)
    if vol.n_sites <= DENSE_MAX_SITES:
        return sla.cho_solve(sla.cho_factor(A.toarray(), lower=True), rhs)
    return spla.spsolve(A.tocsc(), rhs)


def natural_params(params: ModelParams, d: int, s: float | None = None) -> NaturalParams:
    """(a0, lambda), or their time-dependent versions (a0(s), lambda(s)) when s is given."""
    if s is not None and s <= 0:
        raise ValueError("s must be > 0")
    q, r2 = params.q, params.rho2
    denom = 1.0 + 2 * d * q * r2
    if s is not None:
        denom += r2 / s
    return NaturalParams(a0=1.0 / (r2 * denom), lam=q * r2 / denom, d=d, s=s, rho2=r2)


def series_terms(np_: NaturalParams, scale: float, tol: float) -> int:
    """Smallest n with ``scale * a0 (2d lambda)^(n+1) / (1 - 2d lambda) < tol``."""
    x = 2 * np_.d * np_.lam
    if x == 0.0:
        return 0
    if x >= 1.0:
        raise ValueError("Neumann series diverges (2d lambda >= 1)")
    target = tol * (1.0 - x) / (scale * np_.a0)
    n = max(0, math.ceil(math.log(target) / math.log(x) - 1))
    while scale * np_.a0 * x ** (n + 1) / (1.0 - x) >= tol:
        n += 1
    return n


def resolvent_series(vol: LatticeVolume, params: ModelParams, tol: float = 1e-12) -> ResolventMatrix:
    """``rho^4 a0 sum_{n<=N} lambda^n A^n`` with a certified geometric tail below ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be > 0")
    nat = natural_params(params, vol.dimension)
    scale = params.rho2**2
    n_terms = series_terms(nat, scale, tol)
    adj = vol.adjacency
    term = np.eye(vol.n_sites)
    acc = term.copy()
    for _ in range(n_terms):
        term = nat.lam * (adj @ term)
        acc += term
    R = scale * nat.a0 * acc
    R.setflags(write=False)
    return ResolventMatrix(R, vol, "series", n_terms=n_terms)


def resolvent_difference(vol: LatticeVolume, params: ModelParams, mass_W: MassProfile) -> np.ndarray:
    """``R_W - R = -R_W diag(extra) R`` for a mass perturbation supported on W."""
    R = resolvent_direct(vol, params).matrix
    RW = resolvent_direct(vol, params, mass_W).matrix
    return -(RW * mass_W.extra) @ R


def decay_fit(R: ResolventMatrix | np.ndarray, vol: LatticeVolume, center: int | None = None) -> tuple[float, float]:
    """Least-squares slope of ``log R[center, x]`` against |x - center|_1, and its r^2.

    ``R`` may also be a single row (the one belonging to ``center``).
    """
    M = np.asarray(R)
    c = vol.origin_index if center is None else center
    row = M if M.ndim == 1 else M[c]
    dist = vol.distances_from(c)
    off = dist > 0
    vals = row[off]
    if np.all(vals == 0):
        raise ValueError("no off-diagonal mass in resolvent row")
    if np.any(vals <= 0):
        raise ValueError("malformed resolvent: nonpositive entries")
    if len(np.unique(dist)) < 5:
        raise ValueError("need at least 5 distinct distances from the center")
    x = dist[off].astype(float)
    y = np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = np.sum((y - pred) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


def correlation_length(params: ModelParams, d: int, side: int = 15) -> float:
    """``-1 / slope`` of the resolvent decay fit on a centred box of the given side."""
    return _correlation_length(params.q, params.rho2, d, side)


@functools.lru_cache(maxsize=256)
def _correlation_length(q: float, rho2: float, d: int, side: int) -> float:
    vol = build_box(d, side)
    e0 = np.zeros(vol.n_sites)
    e0[vol.origin_index] = 1.0
    slope, _ = decay_fit(solve(vol, ModelParams(q, rho2), e0), vol)
    return -1.0 / slope


def recommended_margin(params: ModelParams, d: int, n_lengths: float = 4.0, minimum: int = 2) -> int:
    """Ambient-box margin of at least ``n_lengths`` correlation lengths (and at least ``minimum``)."""
    try:
        xi = correlation_length(params, d)
    except ValueError:  # q = 0 or decay below floating-point range
        return minimum
    return max(minimum, math.ceil(n_lengths * xi))


def infinite_volume_entry(
    params: ModelParams,
    d: int,
    offset: Sequence[int],
    start_side: int = 5,
    tol: float = 1e-8,
    max_side: int = 401,
) -> tuple[float, int]:
    """Approximate ``(rho^-2 - q Delta_Z^d)^{-1}_{0,offset}`` on centered boxes of doubling size.

    Stops once consecutive boxes change the entry by less than ``tol``; returns
    the value and the final side length.
    """
    side = max(start_side, 2 * max(abs(o) for o in offset) + 3) | 1
    prev = None
    while side <= max_side:
        vol = build_box(d, side)
        e0 = np.zeros(vol.n_sites)
        e0[vol.origin_index] = 1.0
        col = solve(vol, params, e0)
        val = float(col[vol.site_index(offset)])
        if prev is not None and abs(val - prev) < tol:
            return val, side
        prev = val
        side = 2 * side + 1
    raise ResolventError("box doubling did not converge")


def natural_params_table(grid: Iterable[dict]) -> list[dict]:
    """Records {d, q, rho2, s, a0, lambda} for a parameter grid."""
    out = []
    for g in grid:
        p = ModelParams(g["q"], g["rho2"])
        nat = natural_params(p, g["d"], g.get("s"))
        out.append({"d": g["d"], "q": p.q, "rho2": p.rho2, "s": g.get("s"), "a0": nat.a0, "lambda": nat.lam})
    return out
