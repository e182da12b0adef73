import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laxbcd.theta import (
    ThetaParams, ThetaTruncationError, ThetaZeroError, assemble_ba_entry,
    random_period_matrix, required_radius, tail_bound, theta,
)


def test_half_period_zero():
    p = ThetaParams(np.array([[1j]]))
    assert abs(theta([0.5 + 0.5j], p)) < 1e-14


def test_jacobi_oracle():
    # genus 1: theta(z | tau) = jtheta(3, pi z, exp(i pi tau))
    tau = 0.3 + 1.1j
    p = ThetaParams(np.array([[tau]]))
    q = mpmath.exp(1j * mpmath.pi * tau)
    for z in (0.1, 0.27 - 0.2j, -0.4 + 0.35j):
        ref = complex(mpmath.jtheta(3, mpmath.pi * z, q))
        assert abs(theta([z], p) - ref) < 1e-13 * max(1, abs(ref))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31))
def test_evenness_and_quasi_periodicity(g, seed):
    rng = np.random.default_rng(seed)
    p = ThetaParams(random_period_matrix(g, rng))
    z = rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-0.3, 0.3, g)
    t = theta(z, p)
    assert abs(theta(-z, p) - t) < 1e-12 * max(1, abs(t))
    for k in range(g):
        shifted = theta(z + p.omega[:, k], p)
        factor = np.exp(1j * np.pi * p.omega[k, k] + 2j * np.pi * z[k])
        assert abs(shifted * factor - t) < 1e-10 * max(1, abs(t))
        # integer shifts are periods
        e = np.zeros(g)
        e[k] = 1
        assert abs(theta(z + e, p) - t) < 1e-12 * max(1, abs(t))


def test_tail_bound_and_truncation():
    p = ThetaParams(random_period_matrix(2, np.random.default_rng(0)))
    z = np.array([0.1 + 0.2j, -0.3j])
    b = [tail_bound(p, z, N) for N in range(1, 6)]
    assert all(x > y for x, y in zip(b, b[1:]))
    N = required_radius(p, z, 1e-14)
    assert tail_bound(p, z, N) <= 1e-14
    # truncation error is within the bound
    exact = theta(z, p, N=N + 3)
    assert abs(theta(z, p, N=N) - exact) <= tail_bound(p, z, N) + 1e-15
    with pytest.raises(ThetaTruncationError) as err:
        theta(z, p, N=1, tol=1e-14)
    assert err.value.required == N


def test_period_matrix_validation():
    with pytest.raises(ValueError):
        ThetaParams(np.array([[1j, 0.1], [0.2, 1j]]))
    with pytest.raises(ValueError):
        ThetaParams(np.array([[-1j]]))
    with pytest.raises(ValueError):
        theta([0.1, 0.2], ThetaParams(np.array([[1j]])))


def test_assemble():
    p = ThetaParams(random_period_matrix(2, np.random.default_rng(1)))
    u = np.array([0.1 + 0.05j, 0.2])
    assert abs(assemble_ba_entry(0.0, u, u, p) - 1) < 1e-14
    phi = 0.83
    v = np.array([0.3, -0.1j])
    val = assemble_ba_entry(1j * phi, u, v, p)
    assert abs(abs(val) - abs(theta(u, p) / theta(v, p))) < 1e-13
    with pytest.raises(ThetaZeroError):
        assemble_ba_entry(0.0, u, [0.5 + 0.5j], ThetaParams(np.array([[1j]])))


def test_assembled_quasi_periodicity_genus_one():
    # theta(z + a) / theta(z + b) picks up exp(-2 pi i (a - b)) under z -> z + tau
    tau = 0.2 + 0.9j
    p = ThetaParams(np.array([[tau]]))
    a, b = 0.13 + 0.1j, -0.21 + 0.05j
    z = 0.07 - 0.11j
    f = lambda x: assemble_ba_entry(0.0, [x + a], [x + b], p)
    ratio = f(z + tau) / f(z)
    assert abs(ratio - np.exp(-2j * np.pi * (a - b))) < 1e-10
