"""Finite boxes in Z^d: site indexing, adjacency and the Dirichlet Laplacian.

Sites are ordered lexicographically (last axis fastest), so matrix dumps are
reproducible.  Distances are 1-norm distances.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

# Hard ceiling on the number of sites of any box.
MAX_SITES = 250_000
# Exact Gibbs enumeration is capped at this many free spins (2**20 states).
MAX_ENUMERATION_SITES = 20


class VolumeTooLarge(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LatticeVolume:
    """A box ``prod_i [offset_i, offset_i + extent_i)`` in Z^d."""

    dimension: int
    extents: tuple[int, ...]
    origin_offset: tuple[int, ...]
    _strides: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if len(self.extents) != self.dimension or len(self.origin_offset) != self.dimension:
            raise ValueError("extents/origin_offset length must equal dimension")
        if any(e < 1 for e in self.extents):
            raise ValueError("extents must be positive")
        n = int(np.prod(self.extents, dtype=object))
        if n > MAX_SITES:
            raise VolumeTooLarge(f"volume too large: {n} sites > {MAX_SITES}")
        strides = []
        acc = 1
        for e in reversed(self.extents):
            strides.append(acc)
            acc *= e
        object.__setattr__(self, "_strides", tuple(reversed(strides)))

    def __eq__(self, other):
        if not isinstance(other, LatticeVolume):
            return NotImplemented
        return self.extents == other.extents and self.origin_offset == other.origin_offset

    def __hash__(self):
        return hash((self.extents, self.origin_offset))

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.extents))

    @cached_property
    def coords(self) -> np.ndarray:
        """(N, d) integer coordinates in site-index order."""
        grids = np.indices(self.extents).reshape(self.dimension, -1).T
        out = grids + np.asarray(self.origin_offset)
        out.setflags(write=False)
        return out

    def contains(self, coord: Sequence[int]) -> bool:
        c = np.asarray(coord) - np.asarray(self.origin_offset)
        return bool(np.all(c >= 0) and np.all(c < np.asarray(self.extents)))

    def site_index(self, coord: Sequence[int]) -> int:
        if not self.contains(coord):
            raise KeyError(f"site {tuple(coord)} not in volume")
        c = np.asarray(coord) - np.asarray(self.origin_offset)
        return int(np.dot(c, self._strides))

    def indices_of(self, coords: np.ndarray) -> np.ndarray:
        """Vectorised ``site_index`` for an (M, d) array of coordinates."""
        c = np.atleast_2d(coords) - np.asarray(self.origin_offset)
        if np.any(c < 0) or np.any(c >= np.asarray(self.extents)):
            raise KeyError("some coordinates lie outside the volume")
        return c @ np.asarray(self._strides)

    def site(self, index: int) -> tuple[int, ...]:
        return tuple(int(v) for v in self.coords[index])

    @property
    def origin_index(self) -> int:
        return self.site_index((0,) * self.dimension)

    def distance(self, i: int, j: int) -> int:
        return int(np.abs(self.coords[i] - self.coords[j]).sum())

    def distances_from(self, index: int) -> np.ndarray:
        return np.abs(self.coords - self.coords[index]).sum(axis=1)

    def contains_volume(self, other: "LatticeVolume") -> bool:
        lo = np.asarray(other.origin_offset)
        hi = lo + np.asarray(other.extents) - 1
        return self.dimension == other.dimension and self.contains(lo) and self.contains(hi)

    def embedding(self, sub: "LatticeVolume") -> np.ndarray:
        """Indices in ``self`` of the sites of ``sub``, in ``sub``'s order."""
        if not self.contains_volume(sub):
            raise ValueError("sub-volume not contained in ambient volume")
        return self.indices_of(sub.coords)

    def grow(self, margin: int) -> "LatticeVolume":
        """The box enlarged by ``margin`` sites on every face."""
        return LatticeVolume(
            self.dimension,
            tuple(e + 2 * margin for e in self.extents),
            tuple(o - margin for o in self.origin_offset),
        )

    def mask(self, indices: Iterable[int]) -> np.ndarray:
        m = np.zeros(self.n_sites, dtype=bool)
        m[np.asarray(list(indices), dtype=int)] = True
        return m

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Nearest-neighbour 0/1 matrix (the off-diagonal part of the Laplacian)."""
        rows, cols = [], []
        idx = np.arange(self.n_sites).reshape(self.extents)
        for axis in range(self.dimension):
            a = np.take(idx, np.arange(self.extents[axis] - 1), axis=axis).ravel()
            b = np.take(idx, np.arange(1, self.extents[axis]), axis=axis).ravel()
            rows += [a, b]
            cols += [b, a]
        if rows:
            r = np.concatenate(rows)
            c = np.concatenate(cols)
        else:
            r = c = np.zeros(0, dtype=int)
        n = self.n_sites
        return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n))

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Dirichlet Laplacian: adjacency minus 2d on the diagonal."""
        n = self.n_sites
        return (self.adjacency - 2 * self.dimension * sp.identity(n, format="csr")).tocsr()

    def neighbor_counts(self) -> np.ndarray:
        return np.asarray(self.adjacency.sum(axis=1)).ravel().astype(int)


def build_box(d: int, side: int, centered: bool = True) -> LatticeVolume:
    """Cubic box with ``side**d`` sites; centered boxes put site 0 in the middle."""
    if d < 1 or side < 1:
        raise ValueError("need d >= 1 and side >= 1")
    if side**d > MAX_SITES:
        raise VolumeTooLarge(f"volume too large: {side**d} sites > {MAX_SITES}")
    offset = -(side // 2) if centered else 0
    return LatticeVolume(d, (side,) * d, (offset,) * d)


def boundary_operator(inner: LatticeVolume, ambient: LatticeVolume) -> sp.csr_matrix:
    """Bonds leaving ``inner``: entry (x, y) = 1 iff x in inner, y in ambient \\ inner, |x-y|_1 = 1.

    Rows are indexed by ``inner``, columns by ``ambient``.
    """
    emb = ambient.embedding(inner)
    inside = np.zeros(ambient.n_sites, dtype=bool)
    inside[emb] = True
    adj = ambient.adjacency[emb]
    return (adj @ sp.diags((~inside).astype(float))).tocsr()


def sub_box(ambient: LatticeVolume, side: int, center: Sequence[int] | None = None) -> LatticeVolume:
    """Cubic sub-box of the given side, centered (as far as parity allows) at ``center``."""
    d = ambient.dimension
    center = (0,) * d if center is None else tuple(center)
    sub = LatticeVolume(d, (side,) * d, tuple(c - side // 2 for c in center))
    if not ambient.contains_volume(sub):
        raise ValueError("sub-box does not fit in the ambient volume")
    return sub


def spectral_radius(matrix, iters: int = 500, seed: int = 0) -> float:
    """Largest |eigenvalue| of a symmetric matrix by power iteration."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(matrix.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = matrix @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        lam = float(v @ w)
        v = w / nrm
    return abs(lam)
