"""Symmetric tensors over the discrete Hilbert space and the chaos calculus
built on them: multiple Wiener-Ito integrals, contractions, the product
formula, Malliavin derivatives, Cameron-Martin Taylor shifts, divergence
reintegration and the split of a tensor along a distinguished direction.

Multiple integrals are evaluated in Wick (trace-corrected) form, e.g. for
order two I_2(F) = xi' F xi - tr(F).  With this convention every identity
below (isometry, product formula, Taylor shift, reintegration) is an exact
polynomial identity in the Gaussian coordinates, for arbitrary tensors,
including those carrying diagonal mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidDimensionError,
    MemoryBudgetError,
    SpaceMismatchError,
    UnsupportedOrderError,
)
from .wiener import GaussianDraw, HilbertDisc, HilbertVec, iso_gaussian

MAX_ORDER = 3
#: dense storage cap (number of float64 entries per tensor)
MEMORY_BUDGET_ENTRIES = 1 << 27


def _check_order(q: int):
    if not 0 <= q <= MAX_ORDER:
        raise UnsupportedOrderError(f"chaos order {q} outside supported range 0..{MAX_ORDER}")


@dataclass(frozen=True)
class SymTensor:
    """Order-q symmetric coefficient array, stored dense over basis indices."""

    space: HilbertDisc
    q: int
    coeffs: np.ndarray

    def __post_init__(self):
        _check_order(self.q)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if self.q == 0:
            coeffs = coeffs.reshape(())
        expected = (self.space.basis_dim,) * self.q
        if coeffs.shape != expected:
            raise InvalidDimensionError(
                f"order-{self.q} tensor needs shape {expected}, got {coeffs.shape}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs.ravel()))


def _check_budget(dim: int, q: int):
    if dim**q > MEMORY_BUDGET_ENTRIES:
        raise MemoryBudgetError(f"dense order-{q} tensor over dim {dim} exceeds budget")


def _perm_average(raw: np.ndarray, q: int) -> np.ndarray:
    import itertools

    if q <= 1:
        return raw
    acc = np.zeros_like(raw)
    perms = list(itertools.permutations(range(q)))
    for p in perms:
        acc += np.transpose(raw, p)
    return acc / len(perms)


def symmetrize(space: HilbertDisc, raw: np.ndarray, q: int = None) -> SymTensor:
    """Average an order-q coefficient array over all index permutations."""
    raw = np.asarray(raw, dtype=float)
    if q is None:
        q = raw.ndim
    _check_order(q)
    _check_budget(space.basis_dim, q)
    return SymTensor(space, q, _perm_average(raw, q))


def tensor_from_vectors(space: HilbertDisc, *vectors: HilbertVec) -> SymTensor:
    """Symmetric product h_1 (.) ... (.) h_q of Hilbert vectors."""
    q = len(vectors)
    _check_order(q)
    if q == 0:
        return SymTensor(space, 0, np.array(1.0))
    raw = vectors[0].coords
    for v in vectors[1:]:
        raw = np.multiply.outer(raw, v.coords)
    return symmetrize(space, raw, q)


def tensor_inner(f: SymTensor, g: SymTensor) -> float:
    """Full q-fold Euclidean inner product of the coefficient arrays."""
    if f.space != g.space:
        raise SpaceMismatchError("tensors over different spaces")
    if f.q != g.q:
        raise SpaceMismatchError(f"orders differ: {f.q} vs {g.q}")
    return float(np.vdot(f.coeffs, g.coeffs))


def tensor_norm(f: SymTensor) -> float:
    return f.norm()


def contract(f: SymTensor, g: SymTensor, r: int) -> np.ndarray:
    """r-fold contraction over the first r indices of each factor.

    Returns the raw (generally non-symmetric) coefficient array of order
    p + q - 2r; r = p = q collapses to the scalar inner product, r = 0 is
    the plain tensor product.
    """
    if f.space != g.space:
        raise SpaceMismatchError("tensors over different spaces")
    if not 0 <= r <= min(f.q, g.q):
        raise InvalidDimensionError(f"contraction order {r} out of range")
    a, b = f.coeffs, g.coeffs
    if r == 0:
        if f.q == 0 or g.q == 0:
            return a * b
        return np.multiply.outer(a, b)
    axes_f = tuple(range(r))
    axes_g = tuple(range(r))
    return np.tensordot(a, b, axes=(axes_f, axes_g))


def sym_contract(f: SymTensor, g: SymTensor, r: int) -> SymTensor:
    raw = contract(f, g, r)
    order = f.q + g.q - 2 * r
    _check_order(order)
    return symmetrize(f.space, raw, order)


def hermite_poly(n: int, x):
    """Probabilists' Hermite polynomial H_n via the stable recurrence."""
    if n < 0:
        raise InvalidDimensionError("Hermite degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = x.copy()
    for k in range(1, n):
        h, h_prev = x * h - k * h_prev, h
    return h if h.ndim else float(h)


@dataclass(frozen=True)
class ChaosValue:
    """Evaluated multiple integral, tagged with order and diagonal policy."""

    value: float
    order: int
    diag_policy: str = "wick"


def _wick_value(coeffs: np.ndarray, xi: np.ndarray, q: int) -> float:
    if q == 0:
        return float(coeffs)
    if q == 1:
        return float(coeffs @ xi)
    if q == 2:
        return float(xi @ coeffs @ xi - np.trace(coeffs))
    if q == 3:
        full = float(np.einsum("ijk,i,j,k->", coeffs, xi, xi, xi, optimize=True))
        corr = float(np.einsum("iik,k->", coeffs, xi))
        return full - 3.0 * corr
    if q == 4:
        # internal use only (product formula residual); 6 single pairings
        # and 3 double pairings for a symmetric coefficient array
        m4 = float(np.einsum("ijkl,i,j,k,l->", coeffs, xi, xi, xi, xi, optimize=True))
        m2 = float(np.einsum("iikl,k,l->", coeffs, xi, xi, optimize=True))
        t2 = float(np.einsum("iijj->", coeffs))
        return m4 - 6.0 * m2 + 3.0 * t2
    raise UnsupportedOrderError(f"order {q}")


def multiple_integral(f: SymTensor, w: GaussianDraw) -> ChaosValue:
    """I_q(f)(w) in Wick form; exact centered polynomial of degree q."""
    if f.space != w.space:
        raise SpaceMismatchError("tensor and draw over different spaces")
    return ChaosValue(_wick_value(f.coeffs, w.xi, f.q), f.q)


def elementary_power_value(g: HilbertVec, q: int, w: GaussianDraw) -> float:
    """Oracle for I_q(g^{(.)q}) = |g|^q H_q(X_g / |g|)."""
    _check_order(q)
    nrm = g.norm()
    if nrm == 0.0:
        return 0.0 if q >= 1 else 1.0
    return nrm**q * float(hermite_poly(q, iso_gaussian(g, w) / nrm))


def product_formula_check(f: SymTensor, g: SymTensor, w: GaussianDraw) -> float:
    """Residual of the product formula, evaluated on one draw.

    I_p(f) I_q(g) - sum_r r! C(p,r) C(q,r) I_{p+q-2r}(sym contract_r);
    identically zero in the Wick model, up to rounding.
    """
    p, q = f.q, g.q
    if p + q > 4:
        raise UnsupportedOrderError("product formula evaluator limited to p + q <= 4")
    lhs = _wick_value(f.coeffs, w.xi, p) * _wick_value(g.coeffs, w.xi, q)
    rhs = 0.0
    for r in range(min(p, q) + 1):
        coef = math.factorial(r) * math.comb(p, r) * math.comb(q, r)
        order = p + q - 2 * r
        raw = _perm_average(np.asarray(contract(f, g, r)), order)
        rhs += coef * _wick_value(raw, w.xi, order)
    return lhs - rhs


def malliavin_derivative(f: SymTensor, w: GaussianDraw, r: int) -> np.ndarray:
    """r-th Malliavin derivative of I_q(f): order-r array of chaos values.

    Entry (j_1..j_r) equals q!/(q-r)! * I_{q-r}(f(.,...,., j_1..j_r))(w);
    identically zero for r > q.
    """
    if f.space != w.space:
        raise SpaceMismatchError("tensor and draw over different spaces")
    if r < 0:
        raise InvalidDimensionError("derivative order must be nonnegative")
    q, dim, xi = f.q, f.space.basis_dim, w.xi
    if r > q:
        return np.zeros((dim,) * r)
    coef = math.factorial(q) / math.factorial(q - r)
    c = f.coeffs
    inner_order = q - r
    if inner_order == 0:
        return coef * c.copy() if r > 0 else np.array(coef * float(c))
    if inner_order == 1:
        # I_1 over the first index for every fixed tail
        return coef * np.tensordot(xi, c, axes=(0, 0))
    if inner_order == 2:
        quad = np.einsum("i,j,ij...->...", xi, xi, c, optimize=True)
        trace = np.einsum("ii...->...", c)
        return coef * (quad - trace)
    raise UnsupportedOrderError(f"derivative of order-{q} integral with r={r}")


def taylor_shift(f: SymTensor, w: GaussianDraw, h: HilbertVec, eps: float) -> float:
    """Finite Taylor sum sum_k eps^k/k! <D^k I_q(f)(w), h^{(x)k}>.

    Coincides exactly with multiple_integral(f, shift_omega(w, eps, h))
    since I_q(f) is a degree-q polynomial of the coordinates.
    """
    if f.space != w.space or h.space != f.space:
        raise SpaceMismatchError("mismatched spaces")
    q = f.q
    total = 0.0
    reduced = f.coeffs
    for k in range(q + 1):
        inner_order = q - k
        coef = math.factorial(q) / math.factorial(inner_order)
        term = _wick_value(np.asarray(reduced), w.xi, inner_order)
        total += (eps**k / math.factorial(k)) * coef * term
        if k < q:
            reduced = np.tensordot(np.asarray(reduced), h.coords, axes=(inner_order - 1, 0))
    return total


def reintegrate(f: SymTensor, w: GaussianDraw) -> float:
    """I_q(f) recovered as the divergence of u_j = I_{q-1}(f(., j)).

    Uses the integration-by-parts form delta(u) = sum_j u_j xi_j - sum_j D_j u_j,
    which reproduces the Wick value exactly.
    """
    if f.space != w.space:
        raise SpaceMismatchError("tensor and draw over different spaces")
    q, xi, c = f.q, w.xi, f.coeffs
    if q < 1:
        raise UnsupportedOrderError("reintegration needs order >= 1")
    if q == 1:
        return float(c @ xi)
    if q == 2:
        u = c @ xi  # u_j = I_1(f(., j))
        correction = float(np.trace(c))  # D_j u_j = f_jj
        return float(u @ xi) - correction
    # q == 3: u_j = I_2(f(., ., j)); D_j u_j = 2 I_1(f(., j, j))
    u = np.einsum("i,k,ikj->j", xi, xi, c, optimize=True) - np.einsum("iij->j", c)
    correction = 2.0 * float(np.einsum("ijj,i->", c, xi))
    return float(u @ xi) - correction


def _rotation_with_first_row(e0: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first row is e0 (Householder construction)."""
    dim = e0.shape[0]
    u = np.zeros(dim)
    u[0] = 1.0
    v = e0 - u if e0[0] >= 0 else e0 + u
    nv = np.linalg.norm(v)
    if nv < 1e-14:
        refl = np.eye(dim)
    else:
        v /= nv
        refl = np.eye(dim) - 2.0 * np.outer(v, v)
    # refl maps e0 to +-u; rows of refl (it is symmetric) give the basis
    rot = refl.copy()
    if e0[0] < 0:
        rot[0] *= -1.0
    # enforce first row exactly
    rot[0] = e0
    return rot


def _rotate_tensor(coeffs: np.ndarray, rot: np.ndarray, q: int) -> np.ndarray:
    out = coeffs
    for axis in range(q):
        out = np.moveaxis(np.tensordot(rot, out, axes=(1, axis)), 0, axis)
    return out


def decompose_along(f: SymTensor, e0: HilbertVec):
    """Split f along a unit direction e0: f = sum_k e0^{(x)k} (.) f_{q-k}.

    Returns [(k, f_{q-k})] with each f_{q-k} a symmetric tensor supported on
    the orthogonal complement of e0 (expressed in the original basis).  The
    evaluation identity I_q(f) = sum_k I_k(e0^{(x)k}) I_{q-k}(f_{q-k}) then
    holds exactly, with I_k(e0^{(x)k}) = H_k(X_{e0}).
    """
    if f.space != e0.space:
        raise SpaceMismatchError("tensor and direction over different spaces")
    if abs(e0.norm() - 1.0) > 1e-10:
        raise InvalidDimensionError("direction vector must have unit norm")
    q = f.q
    rot = _rotation_with_first_row(e0.coords)
    rotated = _rotate_tensor(f.coeffs, rot, q)
    parts = []
    for k in range(q + 1):
        rem = q - k
        sl = (0,) * k + (slice(None),) * rem
        block = np.asarray(rotated[sl]) * math.comb(q, k)
        if rem == 0:
            part = SymTensor(f.space, 0, np.array(float(block)))
        else:
            # zero out residual mass on the e0 direction, then rotate back
            clean = block.copy()
            for axis in range(rem):
                idx = [slice(None)] * rem
                idx[axis] = 0
                clean[tuple(idx)] = 0.0
            back = _rotate_tensor(clean, rot.T, rem)
            part = symmetrize(f.space, back, rem)
        parts.append((k, part))
    return parts


def recompose(parts, e0: HilbertVec) -> SymTensor:
    """Inverse of decompose_along: sum_k e0^{(x)k} (.) f_{q-k}."""
    q = max(k + part.q for k, part in parts)
    space = e0.space
    total = np.zeros((space.basis_dim,) * q) if q > 0 else np.array(0.0)
    for k, part in parts:
        raw = part.coeffs
        for _ in range(k):
            raw = np.multiply.outer(e0.coords, raw)
        total = total + _perm_average(np.asarray(raw), q)
    return SymTensor(space, q, total)


def decompose_eval(parts, e0: HilbertVec, w: GaussianDraw) -> float:
    """Evaluate sum_k I_k(e0^{(x)k})(w) * I_{q-k}(f_{q-k})(w)."""
    x0 = iso_gaussian(e0, w)
    total = 0.0
    for k, part in parts:
        total += float(hermite_poly(k, x0)) * _wick_value(part.coeffs, w.xi, part.q)
    return total
