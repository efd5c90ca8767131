"""Euler solver, variational (Theta) equation, Frechet derivative and the
coefficient presets."""

import math

import numpy as np
import pytest

from chaosde.errors import BlowupError, ConfigError, InvalidDimensionError
from chaosde.sde import (
    SdeCoefficients,
    frechet_directional,
    preset,
    solve_euler,
    solve_theta,
    solve_theta_all,
    validate_derivatives,
)


def smooth_driver(steps, func=lambda t: t):
    times = np.linspace(0.0, 1.0, steps + 1)
    return times, func(times)[:, None]


def test_presets_have_consistent_derivatives():
    for name in ("additive", "linear-scalar", "elliptic-2d", "rank1-2d"):
        coeffs, x0 = preset(name)
        assert x0.shape == (coeffs.d,)
        assert validate_derivatives(coeffs) <= 1e-4
    with pytest.raises(ConfigError):
        preset("no-such-preset")


def test_validate_derivatives_catches_mismatch():
    bad = SdeCoefficients(
        d=1, m=1,
        b=lambda x: np.array([x[0] ** 2]),
        sigma=lambda x: np.array([[1.0]]),
        db=lambda x: np.array([[1.0]]),  # wrong: should be 2x
        dsigma=lambda x: np.zeros((1, 1, 1)),
    )
    with pytest.raises(ConfigError):
        validate_derivatives(bad)


def test_additive_exact():
    # X_t = x0 + b t + sigma F_t holds exactly for the discrete scheme
    coeffs, x0 = preset("additive")
    times, F = smooth_driver(64, lambda t: np.sin(2 * t))
    bundle = solve_euler(coeffs, x0, (times, F))
    expected = x0[0] + 0.25 * times + 1.5 * F[:, 0]
    assert np.max(np.abs(bundle.X[:, 0] - expected)) <= 1e-13


def test_linear_scalar_rate():
    # dX = lam X dF with F = t: X_t = exp(lam t); Euler converges at rate 1
    coeffs, x0 = preset("linear-scalar")
    errs = []
    for steps in (256, 512, 1024):
        times, F = smooth_driver(steps)
        bundle = solve_euler(coeffs, x0, (times, F))
        errs.append(abs(bundle.X[-1, 0] - math.exp(0.5)))
    rates = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(r >= 0.3 for r in rates)
    assert errs[-1] <= 1e-3


def test_solver_shape_validation():
    coeffs, x0 = preset("additive")
    times, F = smooth_driver(8)
    with pytest.raises(InvalidDimensionError):
        solve_euler(coeffs, np.zeros(2), (times, F))
    with pytest.raises(InvalidDimensionError):
        solve_euler(coeffs, x0, (times, np.zeros((9, 2))))


def test_driver_subgrid():
    # driver sampled on a refinement of the solver grid is accepted
    coeffs, x0 = preset("additive")
    fine_t, fine_F = smooth_driver(64, lambda t: t * t)
    coarse_t = fine_t[::4]
    bundle = solve_euler(coeffs, x0, (fine_t, fine_F), times=coarse_t)
    assert bundle.steps == 16
    direct = solve_euler(coeffs, x0, (coarse_t, fine_F[::4]))
    assert np.allclose(bundle.X, direct.X)
    with pytest.raises(InvalidDimensionError):
        solve_euler(coeffs, x0, (fine_t, fine_F), times=np.array([0.0, 0.33, 1.0]))


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_blowup_detected():
    cubed = SdeCoefficients(
        d=1, m=1,
        b=lambda x: np.array([x[0] ** 3]),
        sigma=lambda x: np.zeros((1, 1)),
        db=lambda x: np.array([[3 * x[0] ** 2]]),
        dsigma=lambda x: np.zeros((1, 1, 1)),
    )
    times, F = smooth_driver(16)
    with pytest.raises(BlowupError) as exc:
        solve_euler(cubed, np.array([1e200]), (times, F))
    assert exc.value.step >= 1


def test_theta_constant_sigma():
    # zero drift, constant sigma: Theta_t(s) = sigma for all s <= t
    coeffs, x0 = preset("additive")
    times, F = smooth_driver(32, np.cos)
    bundle = solve_euler(coeffs, x0, (times, F))
    row = solve_theta(coeffs, bundle, 5)
    assert np.all(row[:5] == 0.0)
    assert np.allclose(row[5:], 1.5)


def test_theta_closed_form_linear():
    # dX = lam X dF, F = t: Theta_t(s) = lam X_s exp(lam (t - s)); the
    # discrete Theta matches to well under 1% at 2^10 steps
    coeffs, x0 = preset("linear-scalar")
    lam = 0.5
    steps = 2**10
    times, F = smooth_driver(steps)
    bundle = solve_euler(coeffs, x0, (times, F))
    solve_theta_all(coeffs, bundle)
    worst = 0.0
    for s_idx in (0, steps // 4, steps // 2):
        for t_idx in (steps // 2, steps):
            if t_idx < s_idx:
                continue
            s, t = times[s_idx], times[t_idx]
            exact = lam * math.exp(lam * s) * math.exp(lam * (t - s))
            got = bundle.theta[s_idx, t_idx, 0, 0]
            worst = max(worst, abs(got - exact) / exact)
    assert worst <= 0.01


def test_frechet_additive_exact():
    # additive: derivative along psi is sigma (psi_t - psi_0) exactly
    coeffs, x0 = preset("additive")
    times, F = smooth_driver(32, np.sin)
    bundle = solve_euler(coeffs, x0, (times, F))
    psi = (times * times)[:, None]
    out = frechet_directional(coeffs, bundle, psi)
    assert np.max(np.abs(out[:, 0] - 1.5 * (psi[:, 0] - psi[0, 0]))) <= 1e-13


def test_frechet_is_exact_gradient_of_discrete_flow():
    # the left-point Theta sum equals the limit of difference quotients of
    # the discrete flow; for small eps the gap is O(eps)
    coeffs, x0 = preset("elliptic-2d")
    rng = np.random.default_rng(0)
    steps = 64
    times = np.linspace(0.0, 1.0, steps + 1)
    F = np.cumsum(rng.standard_normal((steps + 1, 2)), axis=0) * 0.05
    F[0] = 0.0
    bundle = solve_euler(coeffs, x0, (times, F))
    psi = np.cumsum(rng.standard_normal((steps + 1, 2)), axis=0) * 0.05
    target = frechet_directional(coeffs, bundle, psi)[-1]
    gaps = []
    for eps in (1e-2, 1e-3, 1e-4):
        pert = solve_euler(coeffs, x0, (times, F + eps * (psi - psi[0])))
        quot = (pert.X[-1] - bundle.X[-1]) / eps
        gaps.append(float(np.max(np.abs(quot - target))))
    assert gaps[0] > gaps[1] > gaps[2]
    order = np.polyfit(np.log([1e-2, 1e-3, 1e-4]), np.log(gaps), 1)[0]
    assert order >= 0.9


def test_frechet_linearity():
    coeffs, x0 = preset("elliptic-2d")
    rng = np.random.default_rng(1)
    times = np.linspace(0.0, 1.0, 33)
    F = np.cumsum(rng.standard_normal((33, 2)), axis=0) * 0.05
    F[0] = 0.0
    bundle = solve_euler(coeffs, x0, (times, F))
    p1 = rng.standard_normal((33, 2))
    p2 = rng.standard_normal((33, 2))
    lhs = frechet_directional(coeffs, bundle, 2.0 * p1 - 0.5 * p2)
    rhs = 2.0 * frechet_directional(coeffs, bundle, p1) - 0.5 * frechet_directional(coeffs, bundle, p2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10
