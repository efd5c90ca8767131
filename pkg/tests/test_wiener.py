"""Discrete Wiener-space model: basis layout, embeddings, sampling, shifts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaosde.errors import (
    EmbeddingError,
    InvalidDimensionError,
    OutOfRangeError,
    SpaceMismatchError,
)
from chaosde.wiener import (
    GaussianDraw,
    HilbertVec,
    HolderConfig,
    basis_vector,
    cameron_martin_path,
    embed_function,
    inner,
    iso_gaussian,
    make_hilbert,
    sample_omega,
    shift_omega,
    zero_draw,
)


def test_space_layout():
    space = make_hilbert(2, -8.0, 1.0, 36)
    assert space.delta == pytest.approx(0.25)
    assert space.basis_dim == 72
    assert space.flat_index(0, 0) == 0
    assert space.flat_index(1, 0) == 36
    assert space.flat_index(1, 35) == 71
    edges = space.cell_edges()
    assert edges[0] == -8.0 and edges[-1] == 1.0
    assert np.allclose(np.diff(edges), 0.25)
    mids = space.cell_midpoints()
    assert np.allclose(mids, 0.5 * (edges[:-1] + edges[1:]))


def test_space_validation():
    with pytest.raises(InvalidDimensionError):
        make_hilbert(1, 1.0, 0.0, 8)
    with pytest.raises(InvalidDimensionError):
        make_hilbert(1, 0.0, 1.0, 1)
    with pytest.raises(InvalidDimensionError):
        make_hilbert(0, 0.0, 1.0, 8)


def test_basis_orthonormal():
    space = make_hilbert(1, 0.0, 1.0, 8)
    vecs = [basis_vector(space, i) for i in range(space.basis_dim)]
    for i, u in enumerate(vecs):
        for j, v in enumerate(vecs):
            assert inner(u, v) == (1.0 if i == j else 0.0)


def test_vector_shape_checked():
    space = make_hilbert(1, 0.0, 1.0, 8)
    with pytest.raises(InvalidDimensionError):
        HilbertVec(space, np.zeros(7))
    other = make_hilbert(1, 0.0, 1.0, 16)
    with pytest.raises(SpaceMismatchError):
        inner(basis_vector(space, 0), basis_vector(other, 0))


def test_embed_constant_function():
    # constant c embeds with coordinates c * sqrt(delta); its squared norm
    # approximates int c^2 = c^2 (hi - lo) exactly for piecewise constants
    space = make_hilbert(1, -2.0, 1.0, 48)
    h = embed_function(space, lambda t: 3.0)
    assert h.norm() ** 2 == pytest.approx(9.0 * 3.0, rel=1e-12)


def test_embed_rejects_bad_function():
    space = make_hilbert(2, 0.0, 1.0, 4)
    with pytest.raises(EmbeddingError):
        embed_function(space, lambda t: [1.0])
    with pytest.raises(EmbeddingError):
        embed_function(space, lambda t: [np.inf, 0.0])


def test_cameron_martin_path_constant():
    # j(h)(t) = int_0^t h; constant h integrates to t * c
    space = make_hilbert(1, -1.0, 1.0, 64)
    h = embed_function(space, lambda t: 2.0)
    for t in (0.0, 0.25, 0.4, 1.0):
        assert cameron_martin_path(space, h, t)[0] == pytest.approx(2.0 * t, abs=1e-12)
    with pytest.raises(OutOfRangeError):
        cameron_martin_path(space, h, 1.5)


def test_sample_omega_reproducible_and_seed_sensitive():
    space = make_hilbert(2, -4.0, 1.0, 32)
    w1 = sample_omega(space, 7)
    w2 = sample_omega(space, 7)
    w3 = sample_omega(space, 8)
    assert np.array_equal(w1.xi, w2.xi)
    assert not np.array_equal(w1.xi, w3.xi)


def test_sample_omega_marginals():
    # pooled coordinates across seeds are standard normal
    space = make_hilbert(1, 0.0, 1.0, 64)
    xs = np.concatenate([sample_omega(space, s).xi for s in range(200)])
    M = xs.size
    assert abs(np.mean(xs)) <= 3.0 / np.sqrt(M)
    assert abs(np.var(xs) - 1.0) <= 3.0 * np.sqrt(2.0 / M)


def test_iso_gaussian_zero_draw():
    space = make_hilbert(1, 0.0, 1.0, 8)
    g = HilbertVec(space, np.arange(8.0))
    assert iso_gaussian(g, zero_draw(space)) == 0.0


def test_shift_omega_exact_translation():
    space = make_hilbert(1, -1.0, 1.0, 16)
    w = sample_omega(space, 3)
    rng = np.random.default_rng(0)
    g = HilbertVec(space, rng.standard_normal(16))
    h = HilbertVec(space, rng.standard_normal(16))
    for eps in (0.0, 0.5, -1.25):
        lhs = iso_gaussian(g, shift_omega(w, eps, h))
        rhs = iso_gaussian(g, w) + eps * inner(g, h)
        assert lhs == pytest.approx(rhs, abs=1e-12)


@given(
    st.floats(0.51, 0.99),
    st.integers(0, 2**32 - 1),
    st.floats(-2.0, 2.0),
)
@settings(max_examples=30, deadline=None)
def test_iso_gaussian_linearity(H, seed, scale):
    space = make_hilbert(1, 0.0, 1.0, 8)
    w = sample_omega(space, seed)
    rng = np.random.default_rng(seed)
    g = HilbertVec(space, rng.standard_normal(8))
    scaled = HilbertVec(space, scale * g.coords)
    assert iso_gaussian(scaled, w) == pytest.approx(scale * iso_gaussian(g, w), abs=1e-9)
    # H is used only to exercise HolderConfig alongside
    cfg = HolderConfig(H)
    assert 0 < cfg.beta < H - 0.5
    assert cfg.alpha == pytest.approx(1.0 - (H - cfg.beta))


def test_holder_config_validation():
    with pytest.raises(OutOfRangeError):
        HolderConfig(0.4)
    with pytest.raises(OutOfRangeError):
        HolderConfig(0.7, beta=0.3)
    with pytest.raises(OutOfRangeError):
        HolderConfig(0.7, beta=0.1, gamma=0.2)
    cfg = HolderConfig(0.7, beta=0.1, gamma=0.05)
    assert cfg.alpha == pytest.approx(0.4)


def test_draw_shape_checked():
    space = make_hilbert(1, 0.0, 1.0, 8)
    with pytest.raises(InvalidDimensionError):
        GaussianDraw(space, np.zeros(5), seed=0)
