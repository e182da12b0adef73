"""Riemann theta function with a certified truncation bound."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ThetaParams",
    "ThetaTruncationError",
    "ThetaZeroError",
    "tail_bound",
    "required_radius",
    "theta",
    "assemble_ba_entry",
    "random_period_matrix",
]


class ThetaTruncationError(ValueError):
    def __init__(self, msg, required):
        super().__init__(msg)
        self.required = required


class ThetaZeroError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class ThetaParams:
    """Symmetric period matrix with positive definite imaginary part."""

    omega: np.ndarray

    def __post_init__(self):
        om = np.atleast_2d(np.asarray(self.omega, complex))
        if om.shape[0] != om.shape[1]:
            raise ValueError("period matrix must be square")
        if not np.allclose(om, om.T, atol=1e-12):
            raise ValueError("period matrix must be symmetric")
        if np.linalg.eigvalsh(om.imag).min() <= 0:
            raise ValueError("imaginary part of the period matrix must be positive definite")
        object.__setattr__(self, "omega", om)

    @property
    def genus(self) -> int:
        return self.omega.shape[0]

    @property
    def lam_min(self) -> float:
        return float(np.linalg.eigvalsh(self.omega.imag).min())


def _shell(r, g):
    return (2 * r + 1) ** g - (2 * r - 1) ** g


def tail_bound(params: ThetaParams, z, N: int, terms: int = 200) -> float:
    """Absolute bound on the omitted terms ``||n||_inf > N``.

    Each term satisfies ``|exp(i pi n.Om.n + 2 pi i n.z)| <= exp(-pi lam r^2 + 2 pi r |Im z|_1)``
    with ``r = ||n||_inf`` (so ``|n|_2^2 >= r^2``).
    """
    z = np.atleast_1d(np.asarray(z, complex))
    lam = params.lam_min
    y = float(np.sum(np.abs(z.imag)))
    g = params.genus
    total = 0.0
    for r in range(N + 1, N + 1 + terms):
        t = _shell(r, g) * np.exp(-np.pi * lam * r * r + 2 * np.pi * r * y)
        total += t
        if r > y / lam and t < 1e-300:
            break
    return float(total)


def required_radius(params: ThetaParams, z, tol: float) -> int:
    N = 1
    while tail_bound(params, z, N) > tol:
        N += 1
        if N > 200:
            raise ThetaTruncationError("truncation radius exceeds 200", N)
    return N


def theta(z, params: ThetaParams, N: int | None = None, tol: float = 1e-14,
          char=None) -> complex:
    """``sum_n exp(i pi n.Om.n + 2 pi i n.z)`` over ``||n||_inf <= N``.

    ``N`` is chosen from the tail bound when omitted.  A given ``N`` whose bound
    exceeds ``tol`` (relative to ``max(1, |result|)``) raises
    :class:`ThetaTruncationError` carrying the required radius.
    ``char = (a, b)`` evaluates the theta function with characteristics.
    """
    z = np.atleast_1d(np.asarray(z, complex))
    g = params.genus
    if z.shape != (g,):
        raise ValueError(f"argument must have length {g}")
    shift = np.zeros(g)
    if char is not None:
        a, b = (np.asarray(c, float) for c in char)
        shift = a
        zz = z + b
    else:
        zz = z
    need = required_radius(params, zz, tol)
    if N is None:
        N = need
    n = np.array(list(itertools.product(range(-N, N + 1), repeat=g)), float) + shift
    ex = 1j * np.pi * np.einsum("ki,ij,kj->k", n, params.omega, n) + 2j * np.pi * (n @ zz)
    val = complex(np.sum(np.exp(ex)))
    if N < need and tail_bound(params, zz, N) > tol * max(1.0, abs(val)):
        raise ThetaTruncationError(f"N={N} too small, need N >= {need}", need)
    return val


def assemble_ba_entry(integral, num, den, params: ThetaParams, zero_tol: float = 1e-13) -> complex:
    """``exp(integral) theta(num) / theta(den)``."""
    t_den = theta(den, params)
    if abs(t_den) < zero_tol:
        raise ThetaZeroError(f"theta vanishes at the denominator argument (|theta| = {abs(t_den):.3g})")
    return complex(np.exp(integral) * theta(num, params) / t_den)


def random_period_matrix(g: int, rng, lam_min: float = 0.5) -> np.ndarray:
    """Symmetric matrix with ``Im`` positive definite and eigenvalues ``>= lam_min``."""
    A = rng.standard_normal((g, g))
    Y = A @ A.T / g + lam_min * np.eye(g)
    X = rng.standard_normal((g, g))
    return (X + X.T) / 2 + 1j * Y
