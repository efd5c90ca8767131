"""Hermite-process drivers: kernel construction on the discrete Wiener
space, path simulation, an independent central-limit oracle, and the
self-similarity statistic for the law of localized Malliavin derivatives.

A Hermite process of order q and Hurst index H in (1/2, 1) is Z_t =
I_q(L_t) with the homogeneous kernel

    L_t(x_1..x_q) = c(H,q) * int_0^t prod_j (s - x_j)_+^{H0 - 3/2} ds,

H0 = 1 + (H-1)/q.  Discretely each kernel becomes an order-q coefficient
block over the cells of one noise component; m components use m disjoint
blocks of the same shape, which makes distinct components exactly
orthogonal at the kernel level.

Discretization note: the kernel is unbounded on the diagonal for q >= 2
(pointwise exponent H0 - 3/2 < -1/2), so sampling it at cell midpoints
does not converge.  Coefficients are instead cell averages computed from
the closed-form antiderivative in each x_j, which is bounded, and the
time integral is done by midpoint quadrature (exactly, for q = 1).  The
small remaining diagonal-band mass is restored by scaling each kernel to
its exact norm t^{2H}/q!, so that E[Z_t^2] = t^{2H} holds by the
isometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .errors import (
    InvalidDimensionError,
    MemoryBudgetError,
    OutOfRangeError,
    SpaceMismatchError,
    UnsupportedOrderError,
)
from .wiener import GaussianDraw, HilbertDisc, HolderConfig, make_hilbert, sample_omega
from .chaos import (
    MAX_ORDER,
    MEMORY_BUDGET_ENTRIES,
    SymTensor,
    _wick_value,
)


def hurst_aux(H: float, q: int) -> tuple:
    """Auxiliary Hurst index H0 = 1 + (H-1)/q and the kernel constant.

    c(H,q) = sqrt(H(2H-1) / (q! * B(H0-1/2, 2-2H0)^q)), with the Beta
    function evaluated through log-gamma for stability.
    """
    if not 0.5 < H < 1.0:
        raise OutOfRangeError(f"H must lie in (1/2, 1), got {H}")
    if q < 1:
        raise OutOfRangeError(f"order must be >= 1, got {q}")
    H0 = 1.0 + (H - 1.0) / q
    log_beta = float(betaln(H0 - 0.5, 2.0 - 2.0 * H0))
    c = math.sqrt(H * (2.0 * H - 1.0) / math.factorial(q) * math.exp(-q * log_beta))
    return H0, c


@dataclass(frozen=True)
class HermiteSpec:
    """Parameters of a discretized m-component Hermite driver."""

    q: int
    H: float
    m: int
    space: HilbertDisc
    s_nodes: int = 64
    out_times: tuple = (0.25, 0.5, 1.0)

    def __post_init__(self):
        if not 1 <= self.q <= MAX_ORDER:
            raise UnsupportedOrderError(f"order {self.q} outside 1..{MAX_ORDER}")
        H0, c = hurst_aux(self.H, self.q)  # validates H
        if self.space.m != self.m:
            raise SpaceMismatchError("component count of spec and space disagree")
        if self.space.lo >= 0.0:
            raise InvalidDimensionError("noise support must extend below 0 (lo < 0)")
        times = tuple(float(t) for t in self.out_times)
        if list(times) != sorted(times) or len(set(times)) != len(times):
            raise InvalidDimensionError("out_times must be strictly increasing")
        if not all(0.0 < t <= self.space.hi for t in times):
            raise OutOfRangeError("out_times must lie in (0, hi]")
        if self.s_nodes < 1:
            raise InvalidDimensionError("s_nodes must be positive")
        object.__setattr__(self, "out_times", times)

    @property
    def H0(self) -> float:
        return 1.0 + (self.H - 1.0) / self.q

    @property
    def constant(self) -> float:
        return hurst_aux(self.H, self.q)[1]


def kernel_eval(spec: HermiteSpec, t: float, xs) -> float:
    """Pointwise kernel value L_t(x_1..x_q).

    q = 1 uses the closed antiderivative; q >= 2 uses midpoint quadrature
    with s_nodes nodes on (max_j x_j v 0, t].  Zero when any x_j >= t.
    """
    if not 0.0 < t <= spec.space.hi:
        raise OutOfRangeError(f"t must lie in (0, hi], got {t}")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if xs.shape != (spec.q,):
        raise InvalidDimensionError(f"expected {spec.q} arguments, got {xs.shape}")
    if np.any(xs >= t):
        return 0.0
    H0, c = hurst_aux(spec.H, spec.q)
    if spec.q == 1:
        x = float(xs[0])
        p = H0 - 0.5
        return c / p * (max(t - x, 0.0) ** p - max(-x, 0.0) ** p)
    lo_s = max(float(np.max(xs)), 0.0)
    s = lo_s + (t - lo_s) * (np.arange(spec.s_nodes) + 0.5) / spec.s_nodes
    w = (t - lo_s) / spec.s_nodes
    vals = np.prod(np.clip(s[:, None] - xs[None, :], 0.0, None) ** (H0 - 1.5), axis=1)
    return float(c * w * vals.sum())


def _cell_avg_matrix(space: HilbertDisc, s: np.ndarray, a: float) -> np.ndarray:
    """g[k, i] = integral over cell i of (s_k - x)_+^a dx (closed form)."""
    edges = space.cell_edges()
    lpow = np.clip(s[:, None] - edges[None, :-1], 0.0, None) ** (a + 1.0)
    rpow = np.clip(s[:, None] - edges[None, 1:], 0.0, None) ** (a + 1.0)
    return (lpow - rpow) / (a + 1.0)


def _raw_block(spec: HermiteSpec, t: float, s_nodes: int) -> np.ndarray:
    """Uncalibrated order-q coefficient block of L_t over one component."""
    space, q = spec.space, spec.q
    H0, c = hurst_aux(spec.H, q)
    a = H0 - 1.5
    n = space.n
    if n**q > MEMORY_BUDGET_ENTRIES:
        raise MemoryBudgetError(f"order-{q} kernel block over {n} cells exceeds budget")
    scale = c * space.delta ** (-q / 2.0)
    if q == 1:
        # exact double integral via the second antiderivative
        edges = space.cell_edges()

        def prim(s):
            lpow = np.clip(s - edges[:-1], 0.0, None) ** (a + 2.0)
            rpow = np.clip(s - edges[1:], 0.0, None) ** (a + 2.0)
            return (lpow - rpow) / ((a + 1.0) * (a + 2.0))

        block = scale * (prim(t) - prim(0.0))
    else:
        s = t * (np.arange(s_nodes) + 0.5) / s_nodes
        w = t / s_nodes
        g = _cell_avg_matrix(space, s, a)
        if q == 2:
            block = scale * w * np.einsum("si,sj->ij", g, g, optimize=True)
        else:
            block = scale * w * np.einsum("si,sj,sk->ijk", g, g, g, optimize=True)
    # adaptedness: cells at or beyond t carry no coefficient
    alive = space.cell_midpoints() < t
    for axis in range(q):
        shape = [1] * q
        shape[axis] = n
        block = block * alive.reshape(shape)
    return block


@dataclass(frozen=True)
class KernelField:
    """Kernel blocks for every output time; one block shared per component.

    blocks has shape (len(out_times),) + (n,)*q.  Component ell realizes
    the block on its own index range, so kernels of distinct components
    have disjoint support by construction.
    """

    spec: HermiteSpec
    blocks: np.ndarray
    calibrated: bool

    def block_at(self, ti: int) -> np.ndarray:
        return self.blocks[ti]

    def tensor_at(self, ti: int, ell: int) -> SymTensor:
        """Embed the block of (time index ti, component ell) in the full basis."""
        space, q = self.spec.space, self.spec.q
        if not 0 <= ell < space.m:
            raise OutOfRangeError(f"component {ell} out of range")
        dim = space.basis_dim
        full = np.zeros((dim,) * q)
        sl = space.component_slice(ell)
        full[(sl,) * q] = self.blocks[ti]
        return SymTensor(space, q, full)

    def norm_at(self, ti: int) -> float:
        return float(np.linalg.norm(self.blocks[ti].ravel()))


def build_kernels(spec: HermiteSpec, calibrate: bool = True, s_nodes: int = None) -> KernelField:
    """Cell-average kernel blocks at every output time.

    With calibrate=True each block is scaled to its exact continuum norm
    sqrt(t^{2H}/q!), which enforces E[Z_t^2] = t^{2H} through the
    isometry and removes the diagonal-band discretization bias.
    """
    if s_nodes is None:
        s_nodes = spec.s_nodes
    blocks = []
    for t in spec.out_times:
        block = _raw_block(spec, t, s_nodes)
        if calibrate:
            target = math.sqrt(t ** (2.0 * spec.H) / math.factorial(spec.q))
            nrm = float(np.linalg.norm(block.ravel()))
            if nrm == 0.0:
                raise InvalidDimensionError(f"degenerate kernel at t={t}")
            block = block * (target / nrm)
        blocks.append(block)
    return KernelField(spec=spec, blocks=np.array(blocks), calibrated=calibrate)


@dataclass(frozen=True)
class DrivingPath:
    """Simulated driver values: one R^m vector per output time."""

    spec: HermiteSpec
    times: tuple
    values: np.ndarray
    seed: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.times), self.spec.m):
            raise InvalidDimensionError(
                f"expected values of shape {(len(self.times), self.spec.m)}, got {values.shape}"
            )
        object.__setattr__(self, "values", values)


def _component_xi(space: HilbertDisc, xi: np.ndarray, ell: int) -> np.ndarray:
    return xi[space.component_slice(ell)]


def simulate_path(field: KernelField, w: GaussianDraw) -> DrivingPath:
    """Evaluate Z_t^ell = I_q(kernel) on one draw, all times and components."""
    spec = field.spec
    if w.space != spec.space:
        raise SpaceMismatchError("draw built over a different discretization")
    T = len(spec.out_times)
    values = np.empty((T, spec.m))
    for ti in range(T):
        block = field.blocks[ti]
        for ell in range(spec.m):
            xi = _component_xi(spec.space, w.xi, ell)
            values[ti, ell] = _wick_value(block, xi, spec.q)
    return DrivingPath(spec=spec, times=spec.out_times, values=values, seed=w.seed)


def simulate_paths(field: KernelField, seeds) -> np.ndarray:
    """Vectorized ensemble of simulate_path; returns shape (len(seeds), T, m)."""
    spec = field.spec
    space, q = spec.space, spec.q
    seeds = list(seeds)
    M, T = len(seeds), len(spec.out_times)
    xis = np.empty((M, space.basis_dim))
    for k, seed in enumerate(seeds):
        xis[k] = sample_omega(space, seed).xi
    out = np.empty((M, T, spec.m))
    for ell in range(spec.m):
        x = xis[:, space.component_slice(ell)]
        for ti in range(T):
            b = field.blocks[ti]
            if q == 1:
                out[:, ti, ell] = x @ b
            elif q == 2:
                out[:, ti, ell] = np.einsum("mi,ij,mj->m", x, b, x, optimize=True) - np.trace(b)
            else:
                full = np.einsum("ijk,mi,mj,mk->m", b, x, x, x, optimize=True)
                corr = x @ np.einsum("iik->k", b)
                out[:, ti, ell] = full - 3.0 * corr
    return out


def covariance_theoretical(s: float, t: float, H: float) -> float:
    """Hermite-process covariance (per component): the polarization formula."""
    if s < 0.0 or t < 0.0:
        raise OutOfRangeError("times must be nonnegative")
    return 0.5 * (t ** (2.0 * H) + s ** (2.0 * H) - abs(t - s) ** (2.0 * H))


def _fgn_covariance(H0: float, N: int) -> np.ndarray:
    k = np.arange(N)
    r = 0.5 * (
        np.abs(k + 1.0) ** (2.0 * H0)
        - 2.0 * np.abs(k) ** (2.0 * H0)
        + np.abs(k - 1.0) ** (2.0 * H0)
    )
    idx = np.abs(k[:, None] - k[None, :])
    return r[idx]


def nclt_factor(spec: HermiteSpec, steps_per_unit: int):
    """Cholesky factor of the underlying Gaussian sequence and the norm A_N.

    The oracle path is Z_t = A_N^{-1} sum_{i <= floor(N t)} H_q(X_i) with
    X long-range-dependent of Hurst H0; A_N makes Var(Z at the last output
    time) match its self-similar value exactly.
    """
    t_max = spec.out_times[-1]
    N_tot = int(math.ceil(steps_per_unit * t_max))
    cov = _fgn_covariance(spec.H0, N_tot)
    chol = np.linalg.cholesky(cov + 1e-12 * np.eye(N_tot))
    # exact variance of the last partial sum of H_q(X): q! sum r(i-j)^q
    var_last = math.factorial(spec.q) * float(np.sum(cov**spec.q))
    A = math.sqrt(var_last) / t_max**spec.H
    return chol, A


def simulate_nclt(spec: HermiteSpec, seed: int, steps_per_unit: int = 256) -> DrivingPath:
    """Independent marginal-law oracle via normalized Hermite partial sums.

    Shares no coupling with simulate_path: only marginal statistics are
    comparable, not pathwise values.
    """
    chol, A = nclt_factor(spec, steps_per_unit)
    return _nclt_one(spec, seed, chol, A, steps_per_unit)


def _nclt_one(spec, seed, chol, A, steps_per_unit) -> DrivingPath:
    from .chaos import hermite_poly

    N_tot = chol.shape[0]
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    values = np.empty((len(spec.out_times), spec.m))
    for ell in range(spec.m):
        X = chol @ rng.standard_normal(N_tot)
        hsum = np.concatenate([[0.0], np.cumsum(hermite_poly(spec.q, X))])
        for ti, t in enumerate(spec.out_times):
            K = min(int(math.floor(steps_per_unit * t)), N_tot)
            values[ti, ell] = hsum[K] / A
    return DrivingPath(spec=spec, times=spec.out_times, values=values, seed=int(seed))


def nclt_paths(spec: HermiteSpec, seeds, steps_per_unit: int = 256) -> np.ndarray:
    """Ensemble of simulate_nclt values, shape (len(seeds), T, m)."""
    chol, A = nclt_factor(spec, steps_per_unit)
    out = np.empty((len(list(seeds)), len(spec.out_times), spec.m))
    for k, seed in enumerate(seeds):
        out[k] = _nclt_one(spec, seed, chol, A, steps_per_unit).values
    return out


def _localized_derivative_energy(spec: HermiteSpec, block: np.ndarray, xi: np.ndarray,
                                 window: np.ndarray) -> float:
    """sum over cells r in the window of |D_r I_q(block)|^2."""
    q = spec.q
    if q == 1:
        d = block[window]
    elif q == 2:
        d = 2.0 * (block @ xi)[window]
    else:
        quad = np.einsum("i,j,ijr->r", xi, xi, block, optimize=True)
        trace = np.einsum("iir->r", block)
        d = 3.0 * (quad - trace)[window]
    return float(np.sum(d * d))


def self_similarity_stat(spec: HermiteSpec, t: float, eps: float, w: GaussianDraw,
                         rhs_seed: int = None, _cache: dict = None) -> tuple:
    """One sample of each side of the localized-derivative law identity.

    lhs = sum over cells r in (t-eps, t] of |D_r(Z_t - Z_{t-eps})|^2 on the
    given draw; rhs = eps^{2H} times the same functional of Z_1 on the
    image grid under x -> (x - (t-eps))/eps, restricted to (0, 1], on an
    independent draw.  The image grid and aligned quadrature nodes make
    the two sides exactly equal in law for the discretized kernels, which
    is the faithful finite analogue of the continuum statement.

    Kernels enter uncalibrated here: the identity is a statement about the
    homogeneous kernels themselves and per-side calibration constants
    would shift the two laws against each other.
    """
    if not 0.0 < eps < t:
        raise OutOfRangeError(f"need 0 < eps < t, got eps={eps}, t={t}")
    space = spec.space
    if w.space != space:
        raise SpaceMismatchError("draw built over a different discretization")
    if _cache is not None and "blocks" in _cache:
        block_lhs, spec_rhs, block_rhs, win_lhs, win_rhs = _cache["blocks"]
    else:
        # lhs s-node count chosen so window nodes are the exact images of
        # the rhs nodes under the affine rescaling
        s_lhs = max(int(round(spec.s_nodes * t / eps)), spec.s_nodes)
        block_lhs = _raw_block(spec, t, s_lhs)
        lo_rhs = (space.lo - (t - eps)) / eps
        space_rhs = make_hilbert(1, lo_rhs, 1.0, space.n)
        spec_rhs = HermiteSpec(q=spec.q, H=spec.H, m=1, space=space_rhs,
                               s_nodes=spec.s_nodes, out_times=(1.0,))
        block_rhs = _raw_block(spec_rhs, 1.0, spec.s_nodes)
        # only cells fully inside the window: a straddling cell carries
        # kernel mass from outside (t-eps, t], which the rescaled side
        # cannot represent
        edges = space.cell_edges()
        tol = 1e-12
        win_lhs = (edges[:-1] >= t - eps - tol) & (edges[1:] <= t + tol)
        edges_rhs = space_rhs.cell_edges()
        win_rhs = (edges_rhs[:-1] >= -tol) & (edges_rhs[1:] <= 1.0 + tol)
        if _cache is not None:
            _cache["blocks"] = (block_lhs, spec_rhs, block_rhs, win_lhs, win_rhs)
    xi = _component_xi(space, w.xi, 0)
    lhs = _localized_derivative_energy(spec, block_lhs, xi, win_lhs)
    if rhs_seed is None:
        rhs_seed = w.seed + 1_000_003
    xi_rhs = sample_omega(spec_rhs.space, rhs_seed).xi
    rhs_raw = _localized_derivative_energy(spec_rhs, block_rhs, xi_rhs, win_rhs)
    rhs = eps ** (2.0 * spec.H) * rhs_raw
    return lhs, rhs


def holder_norms(times, values, config: HolderConfig, theta: float = None) -> tuple:
    """Discrete estimators of the three pathwise norms on a uniform grid.

    Returns (c_theta, w1_alpha, w2_oneminusalpha):
      c_theta            sup |f| + sup_{s<t} |f(t)-f(s)| / (t-s)^theta
      w1_alpha           sup_t (|f(t)| + int_0^t |f(t)-f(s)|/(t-s)^{1+alpha} ds)
      w2_oneminusalpha   sup_{s<t} (|f(t)-f(s)|/(t-s)^{1-alpha}
                                     + int_s^t |f(u)-f(s)|/(u-s)^{2-alpha} du)
    Integrals use the trapezoid rule with the singular endpoint dropped.
    """
    times = np.asarray(times, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] != times.shape[0]:
        values = values.T
    npts = times.shape[0]
    if npts < 8:
        raise InvalidDimensionError("need at least 8 grid points")
    dt_all = np.diff(times)
    if not np.allclose(dt_all, dt_all[0], rtol=1e-8):
        raise InvalidDimensionError("grid must be uniform")
    if theta is None:
        theta = 1.0 - config.alpha
    alpha = config.alpha
    mag = np.linalg.norm(values, axis=1)
    gaps = times[:, None] - times[None, :]
    diffs = np.linalg.norm(values[:, None, :] - values[None, :, :], axis=2)
    upper = gaps > 0
    quot = np.zeros_like(gaps)
    quot[upper] = diffs[upper] / gaps[upper] ** theta
    c_theta = float(mag.max() + quot.max())

    dt = float(dt_all[0])
    w1 = 0.0
    for i in range(npts):
        if i == 0:
            w1 = max(w1, mag[0])
            continue
        integrand = diffs[i, :i] / gaps[i, :i] ** (1.0 + alpha)
        integral = dt * (np.sum(integrand) - 0.5 * integrand[0])
        w1 = max(w1, mag[i] + integral)

    quot2 = np.zeros_like(gaps)
    quot2[upper] = diffs[upper] / gaps[upper] ** (1.0 - alpha)
    w2 = 0.0
    for j in range(npts - 1):
        integrand = diffs[j + 1 :, j] / gaps[j + 1 :, j] ** (2.0 - alpha)
        # prefix trapezoid in the upper argument, singular node dropped
        cum = dt * (np.cumsum(integrand) - 0.5 * integrand - 0.5 * integrand[0])
        total = quot2[j + 1 :, j] + cum
        w2 = max(w2, float(total.max()))
    return c_theta, w1, w2


class GridDriver:
    """Driver evaluated on a fine solver grid via cumulative quadrature.

    Dense per-time kernel blocks are too large on SDE grids, but every
    quantity needed there is a prefix sum over time-quadrature nodes: the
    block at t_i is sum_{k<i} beta_k g_k^{(x)q} with g_k the cell-average
    factor at the midpoint of (t_k, t_{k+1}).  Values, Malliavin
    derivative vectors, and directional derivatives are therefore O(n) per
    grid time, and the directional derivative is the exact gradient of the
    value, which the difference-quotient checks rely on.

    times must start at 0; values at time 0 are 0.
    """

    def __init__(self, spec: HermiteSpec, times, calibrate: bool = True):
        times = np.asarray(times, dtype=float)
        if times[0] != 0.0 or not np.all(np.diff(times) > 0):
            raise InvalidDimensionError("grid must start at 0 and increase strictly")
        if times[-1] > spec.space.hi:
            raise OutOfRangeError("grid extends beyond the noise support")
        self.spec = spec
        self.times = times
        space, q = spec.space, spec.q
        H0, c = hurst_aux(spec.H, q)
        mids = 0.5 * (times[:-1] + times[1:])
        dts = np.diff(times)
        g = _cell_avg_matrix_single(space, mids, H0 - 1.5)
        self._g = g
        self._beta = c * space.delta ** (-q / 2.0) * dts
        self.calibrated = calibrate
        if calibrate:
            gram = (g @ g.T) ** q
            bb = self._beta[:, None] * self._beta[None, :] * gram
            # prefix norms ||block_i||^2 over the growing leading square:
            # increment when adding node j is bb[j,j] + 2 sum_{k<j} bb[k,j]
            inc = np.diagonal(bb).copy()
            if inc.shape[0] > 1:
                inc[1:] += 2.0 * np.cumsum(bb, axis=0).diagonal(1)
            norms2 = np.cumsum(inc)
            targets = times ** (2.0 * spec.H) / math.factorial(q)
            rho = np.sqrt(targets[1:] / norms2)
            self._rho = np.concatenate([[1.0], rho])
        else:
            self._rho = np.ones(times.shape[0])

    def _component_raw(self, xi_block: np.ndarray):
        """Per-node scalar contributions (value, derivative weight)."""
        q = self.spec.q
        gx = self._g @ xi_block
        gg = np.einsum("ki,ki->k", self._g, self._g)
        if q == 1:
            val_w = gx
            der_w = np.ones_like(gx)
        elif q == 2:
            val_w = gx * gx - gg
            der_w = 2.0 * gx
        else:
            val_w = gx**3 - 3.0 * gg * gx
            der_w = 3.0 * (gx * gx - gg)
        return val_w, der_w

    def values(self, w: GaussianDraw) -> np.ndarray:
        """Driver values on the grid, shape (len(times), m); row 0 is 0."""
        space = self.spec.space
        if w.space != space:
            raise SpaceMismatchError("draw built over a different discretization")
        out = np.zeros((self.times.shape[0], self.spec.m))
        for ell in range(self.spec.m):
            val_w, _ = self._component_raw(_component_xi(space, w.xi, ell))
            out[1:, ell] = np.cumsum(self._beta * val_w)
        return out * self._rho[:, None]

    def dir_deriv(self, w: GaussianDraw, h: np.ndarray) -> np.ndarray:
        """<DF_t^ell, h> on the grid; h in full-basis coordinates."""
        space = self.spec.space
        h = np.asarray(h, dtype=float)
        out = np.zeros((self.times.shape[0], self.spec.m))
        for ell in range(self.spec.m):
            sl = space.component_slice(ell)
            val_w, der_w = self._component_raw(w.xi[sl])
            gh = self._g @ h[sl]
            out[1:, ell] = np.cumsum(self._beta * der_w * gh)
        return out * self._rho[:, None]

    def deriv_vectors(self, w: GaussianDraw) -> np.ndarray:
        """Full DF vectors, shape (len(times), m, n) in component-block coords."""
        space = self.spec.space
        n = space.n
        out = np.zeros((self.times.shape[0], self.spec.m, n))
        for ell in range(self.spec.m):
            _, der_w = self._component_raw(w.xi[space.component_slice(ell)])
            rows = (self._beta * der_w)[:, None] * self._g
            out[1:, ell, :] = np.cumsum(rows, axis=0)
        return out * self._rho[:, None, None]


def _cell_avg_matrix_single(space: HilbertDisc, s: np.ndarray, a: float) -> np.ndarray:
    return _cell_avg_matrix(space, s, a)


def export_kernels(field: KernelField, path: str):
    """Portable text dump: one line per nonzero canonical multi-index."""
    spec = field.spec
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# chaosde kernel field q={spec.q} H={spec.H:.17g} m={spec.m}\n")
        fh.write(
            f"# space lo={spec.space.lo:.17g} hi={spec.space.hi:.17g} n={spec.space.n}\n"
        )
        fh.write(f"# s_nodes={spec.s_nodes} calibrated={int(field.calibrated)}\n")
        fh.write("# times " + " ".join(f"{t:.17g}" for t in spec.out_times) + "\n")
        for ti in range(len(spec.out_times)):
            block = field.blocks[ti]
            for idx in np.ndindex(block.shape):
                if list(idx) != sorted(idx):
                    continue
                v = block[idx]
                if v != 0.0:
                    cols = " ".join(str(i) for i in idx)
                    fh.write(f"{ti} {cols} {v:.17g}\n")


def import_kernels(path: str) -> KernelField:
    """Rebuild a KernelField from an export_kernels dump."""
    import itertools

    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts[0] == "times":
                    header["times"] = tuple(float(x) for x in parts[1:])
                else:
                    for tok in parts:
                        if "=" in tok:
                            k, v = tok.split("=", 1)
                            header[k] = v
            else:
                rows.append(line.split())
    space = make_hilbert(int(header["m"]), float(header["lo"]), float(header["hi"]), int(header["n"]))
    spec = HermiteSpec(
        q=int(header["q"]), H=float(header["H"]), m=int(header["m"]), space=space,
        s_nodes=int(header["s_nodes"]), out_times=header["times"],
    )
    T, n, q = len(spec.out_times), space.n, spec.q
    blocks = np.zeros((T,) + (n,) * q)
    for row in rows:
        ti = int(row[0])
        idx = tuple(int(x) for x in row[1 : 1 + q])
        v = float(row[1 + q])
        for perm in set(itertools.permutations(idx)):
            blocks[(ti,) + perm] = v
    return KernelField(spec=spec, blocks=blocks, calibrated=bool(int(header["calibrated"])))
