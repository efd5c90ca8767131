"""Finite model of the Wiener space: orthonormal basis over a time grid,
Gaussian sampling, isonormal evaluation and Cameron-Martin shifts.

The underlying Hilbert space is L^2([lo, hi], R^m), discretized with the
normalized-indicator basis: one basis vector per (component, cell) pair,
each equal to the cell indicator divided by sqrt(delta).  In this model the
coordinates of a Gaussian draw are i.i.d. standard normals, inner products
are plain dot products, and shifting a draw along a direction h is an exact
coordinate translation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmbeddingError,
    InvalidDimensionError,
    OutOfRangeError,
    SpaceMismatchError,
)


@dataclass(frozen=True)
class HilbertDisc:
    """Discretization of L^2([lo, hi], R^m) with n cells per component.

    Basis index layout is component-major: index = ell * n + cell.
    """

    m: int
    lo: float
    hi: float
    n: int

    @property
    def delta(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def basis_dim(self) -> int:
        return self.n * self.m

    def cell_edges(self) -> np.ndarray:
        """Edges of the n cells, shared by every component."""
        return self.lo + np.arange(self.n + 1) * self.delta

    def cell_midpoints(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.delta

    def flat_index(self, ell: int, cell: int) -> int:
        return ell * self.n + cell

    def component_slice(self, ell: int) -> slice:
        return slice(ell * self.n, (ell + 1) * self.n)


@dataclass(frozen=True)
class HilbertVec:
    """Coordinate vector of an element of the discretized Hilbert space."""

    space: HilbertDisc
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (self.space.basis_dim,):
            raise InvalidDimensionError(
                f"expected {self.space.basis_dim} coordinates, got {coords.shape}"
            )
        object.__setattr__(self, "coords", coords)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


@dataclass(frozen=True)
class GaussianDraw:
    """One realization: standard-normal coordinates against the basis."""

    space: HilbertDisc
    xi: np.ndarray
    seed: int

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.shape != (self.space.basis_dim,):
            raise InvalidDimensionError(
                f"expected {self.space.basis_dim} coordinates, got {xi.shape}"
            )
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class HolderConfig:
    """Regularity exponents used by the pathwise solver machinery.

    Constraints: 1/2 < H < 1, 0 < beta < H - 1/2, alpha = 1 - (H - beta),
    0 < gamma < beta.
    """

    H: float
    beta: float = field(default=None)  # type: ignore[assignment]
    gamma: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not 0.5 < self.H < 1.0:
            raise OutOfRangeError(f"H must lie in (1/2, 1), got {self.H}")
        beta = self.beta if self.beta is not None else (self.H - 0.5) / 2
        if not 0.0 < beta < self.H - 0.5:
            raise OutOfRangeError(f"beta must lie in (0, H - 1/2), got {beta}")
        gamma = self.gamma if self.gamma is not None else beta / 2
        if not 0.0 < gamma < beta:
            raise OutOfRangeError(f"gamma must lie in (0, beta), got {gamma}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @property
    def alpha(self) -> float:
        return 1.0 - (self.H - self.beta)


def make_hilbert(m: int, lo: float, hi: float, n: int) -> HilbertDisc:
    """Build the discretized Hilbert space; validates dimensions."""
    if not (lo < hi):
        raise InvalidDimensionError(f"need lo < hi, got [{lo}, {hi}]")
    if n < 2:
        raise InvalidDimensionError(f"need at least 2 cells, got {n}")
    if m < 1:
        raise InvalidDimensionError(f"need at least 1 component, got {m}")
    return HilbertDisc(m=int(m), lo=float(lo), hi=float(hi), n=int(n))


def _check_same_space(a, b):
    if a.space != b.space:
        raise SpaceMismatchError("operands live over different discretizations")


def basis_vector(space: HilbertDisc, index: int) -> HilbertVec:
    coords = np.zeros(space.basis_dim)
    coords[index] = 1.0
    return HilbertVec(space, coords)


def inner(u: HilbertVec, v: HilbertVec) -> float:
    """Hilbert-space inner product (dot product in the orthonormal basis)."""
    _check_same_space(u, v)
    return float(u.coords @ v.coords)


def embed_function(space: HilbertDisc, f) -> HilbertVec:
    """Coordinates of a function against the normalized-indicator basis.

    Convention: coordinate (ell, cell) = f(midpoint)[ell] * sqrt(delta),
    the first-order approximation of the cell integral over sqrt(delta).
    `f` maps a scalar time to a length-m sequence (a scalar is accepted
    when m == 1).
    """
    mids = space.cell_midpoints()
    coords = np.empty(space.basis_dim)
    root_delta = np.sqrt(space.delta)
    for i, t in enumerate(mids):
        val = np.atleast_1d(np.asarray(f(t), dtype=float))
        if val.shape != (space.m,):
            raise EmbeddingError(
                f"f({t}) returned shape {val.shape}, expected ({space.m},)"
            )
        if not np.all(np.isfinite(val)):
            raise EmbeddingError(f"f({t}) is not finite")
        for ell in range(space.m):
            coords[space.flat_index(ell, i)] = val[ell] * root_delta
    return HilbertVec(space, coords)


def cameron_martin_path(space: HilbertDisc, h: HilbertVec, t: float) -> np.ndarray:
    """Value at time t of the primitive j(h): t -> (int_0^t h^1, ..., int_0^t h^m).

    The boundary cells at 0 and t contribute linearly with the covered
    fraction, consistent with first-order (Euler) accuracy.
    """
    _check_same_space(h, HilbertVec(space, np.zeros(space.basis_dim)))
    if not (space.lo <= 0.0 <= t <= space.hi):
        raise OutOfRangeError(f"need lo <= 0 <= t <= hi, got t={t}")
    edges = space.cell_edges()
    # fraction of each cell covered by (0, t]
    overlap = np.clip(np.minimum(edges[1:], t) - np.maximum(edges[:-1], 0.0), 0.0, None)
    frac = overlap / space.delta
    root_delta = np.sqrt(space.delta)
    out = np.empty(space.m)
    for ell in range(space.m):
        block = h.coords[space.component_slice(ell)]
        out[ell] = root_delta * float(block @ frac)
    return out


def sample_omega(space: HilbertDisc, seed: int) -> GaussianDraw:
    """Draw i.i.d. N(0,1) coordinates from a counter-based (Philox) stream.

    The stream is keyed by the seed alone, so draws are reproducible and
    order-independent across parallel workers.
    """
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    xi = rng.standard_normal(space.basis_dim)
    return GaussianDraw(space=space, xi=xi, seed=int(seed))


def zero_draw(space: HilbertDisc) -> GaussianDraw:
    """All-zero coordinates; handy for deterministic checks."""
    return GaussianDraw(space=space, xi=np.zeros(space.basis_dim), seed=-1)


def iso_gaussian(g: HilbertVec, w: GaussianDraw) -> float:
    """Isonormal evaluation X_g(w) = <g, xi>; linear in g, N(0, |g|^2) in law."""
    _check_same_space(g, w)
    return float(g.coords @ w.xi)


def shift_omega(w: GaussianDraw, eps: float, h: HilbertVec) -> GaussianDraw:
    """Translate the draw by eps * h in coordinates.

    This realizes omega + eps * j(h) exactly in the discrete model:
    iso_gaussian(g, shifted) == iso_gaussian(g, w) + eps * inner(g, h)
    to machine precision.
    """
    _check_same_space(h, w)
    return GaussianDraw(space=w.space, xi=w.xi + eps * h.coords, seed=w.seed)
