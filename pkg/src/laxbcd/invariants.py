"""Gradients of invariant polynomials with respect to the trace pairing.

The gradient of an invariant ``chi`` at ``L`` in g is the unique element
``G`` of g with ``tr(G dL) = d chi`` for every ``dL`` in g.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .algebra import AlgebraSpec, project_to_algebra
from .spectral import basis_coeffs, char_coeffs, pfaffian

__all__ = [
    "InvariantId",
    "SingularMatrixError",
    "basis_invariants",
    "invariant_value",
    "invariant_degree",
    "fd_gradient",
    "grad_trace_power",
    "grad_char_coeff",
    "grad_char_coeff_poly",
    "grad_pfaffian",
    "gradient",
    "exponent_mu",
    "pfaffian_mu",
    "coefficient_degrees",
]

KINDS = ("trace_power", "char_coeff", "det", "pfaffian")


class SingularMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class InvariantId:
    """``trace_power`` p: ``tr L**p``; ``char_coeff`` i: the i-th basis coefficient
    (even coefficients for B/C/D); ``det``; ``pfaffian`` (family D only)."""

    kind: str
    index: int = 0

    def validate(self, alg: AlgebraSpec) -> "InvariantId":
        if self.kind not in KINDS:
            raise ValueError(f"unknown invariant kind {self.kind!r}")
        if self.kind == "trace_power" and self.index < 1:
            raise ValueError("trace power must be >= 1")
        if self.kind == "char_coeff":
            top = alg.d if alg.family == "A" else alg.n
            if not 1 <= self.index <= top:
                raise ValueError(f"char_coeff index must be in 1..{top} for family {alg.family}")
        if self.kind == "pfaffian" and alg.family != "D":
            raise ValueError("pfaffian is only a basis invariant for family D")
        if self.kind == "det" and alg.family == "B":
            raise ValueError("det vanishes identically on so(2n+1)")
        return self

    def __str__(self) -> str:
        return self.kind if self.kind in ("det", "pfaffian") else f"{self.kind}[{self.index}]"


def basis_invariants(alg: AlgebraSpec) -> list:
    """Characteristic-coefficient basis plus the Pfaffian for family D."""
    if alg.family == "A":
        return [InvariantId("char_coeff", i) for i in range(1, alg.d + 1)]
    out = [InvariantId("char_coeff", i) for i in range(1, alg.n + 1)]
    if alg.family == "D":
        out.append(InvariantId("pfaffian"))
    return out


def coefficient_degrees(alg: AlgebraSpec) -> np.ndarray:
    """Degrees ``d_1, d_2, ...`` of the basis coefficients as polynomials in L."""
    if alg.family == "A":
        return np.arange(1, alg.d + 1)
    return 2 * np.arange(1, alg.n + 1)


def invariant_degree(chi: InvariantId, alg: AlgebraSpec) -> int:
    if chi.kind == "trace_power":
        return chi.index
    if chi.kind == "char_coeff":
        return int(coefficient_degrees(alg)[chi.index - 1])
    if chi.kind == "det":
        return alg.d
    return alg.n


def invariant_value(chi: InvariantId, L, alg: AlgebraSpec) -> complex:
    L = np.asarray(L, complex)
    if chi.kind == "trace_power":
        return complex(np.trace(np.linalg.matrix_power(L, chi.index)))
    if chi.kind == "char_coeff":
        return complex(basis_coeffs(char_coeffs(L), alg.family)[chi.index - 1])
    if chi.kind == "det":
        return complex(np.linalg.det(L))
    if chi.kind == "pfaffian":
        return pfaffian(L, alg, tol=1e-6)
    raise ValueError(f"unknown invariant kind {chi.kind!r}")


def fd_gradient(chi: InvariantId, L, alg: AlgebraSpec, eps: float = 1e-4,
                richardson: bool = True) -> np.ndarray:
    """Finite-difference gradient over the basis of g.

    Central differences with step ``eps * max(1, |L|)`` along each basis
    direction, optionally Richardson-extrapolated with the half step, then
    solved against the trace-form Gram matrix.
    """
    if not 1e-9 <= eps <= 1e-3:
        raise ValueError(f"eps {eps} outside [1e-9, 1e-3]")
    L = np.asarray(L, complex)
    h = eps * max(1.0, float(np.max(np.abs(L))))

    def central(step):
        return np.array([(invariant_value(chi, L + step * B, alg)
                          - invariant_value(chi, L - step * B, alg)) / (2 * step)
                         for B in alg.basis])

    delta = central(h)
    if richardson:
        delta = (4 * central(h / 2) - delta) / 3
    a = np.linalg.solve(alg.trace_gram, delta)
    return np.einsum("k,kij->ij", a, alg.basis)


def grad_trace_power(L, n: int) -> np.ndarray:
    """Gradient ``(n+1) L**n`` of ``tr L**(n+1)``."""
    L = np.asarray(L, complex)
    return (n + 1) * np.linalg.matrix_power(L, n)


class _InverseAction:
    """Applies ``L^-1`` (or the Drazin inverse for family B) via an LU factorization."""

    def __init__(self, L, alg, cond_max=1e12):
        d = L.shape[0]
        self.P0 = np.zeros((d, d), complex)
        M = L
        if alg.family == "B":
            _, s, Vh = np.linalg.svd(L)
            u = Vh[-1].conj()
            w = u @ alg.sigma @ u
            if abs(w) < 1e-10 * np.linalg.norm(u) ** 2:
                raise SingularMatrixError("kernel of L is isotropic: L is not regular")
            self.P0 = np.outer(u, u @ alg.sigma) / w
            M = L + self.P0
        s = np.linalg.svd(M, compute_uv=False)
        if s[-1] <= s[0] / cond_max:
            raise SingularMatrixError(f"L is singular (condition number {s[0] / max(s[-1], 1e-300):.3g})")
        self.lu = lu_factor(M)

    def __call__(self, X):
        return lu_solve(self.lu, X)


def grad_char_coeff(L, i: int, alg: AlgebraSpec) -> np.ndarray:
    """Gradient of the i-th basis coefficient ``r_i``.

    ``grad r_i = sum_{j >= i} r_j L**(d_i - d_j - 1)`` with ``r_j`` the basis
    coefficients of degree ``d_j``.  Negative powers act by LU solves; for
    family B by the inverse on the nonzero eigenspace.
    """
    L = np.asarray(L, complex)
    InvariantId("char_coeff", i).validate(alg)
    r = basis_coeffs(char_coeffs(L), alg.family)
    deg = coefficient_degrees(alg)
    inv = _InverseAction(L, alg)
    d = L.shape[0]
    I = np.eye(d, dtype=complex)
    step = int(deg[1] - deg[0]) if len(deg) > 1 else 1
    # Horner in L^-step: acc = r_i + L^-s (r_{i+1} + L^-s (...))
    acc = r[-1] * I
    for j in range(len(r) - 2, i - 2, -1):
        for _ in range(step):
            acc = inv(acc)
        acc = acc + r[j] * I
    G = inv(acc)
    if alg.family == "B":
        G = G - np.sum(r[i - 1:]) * inv.P0
    return G


def grad_char_coeff_poly(L, i: int, alg: AlgebraSpec) -> np.ndarray:
    """Division-free form ``-sum_{j < D} c_j L**(D - j - 1)`` with ``c`` all characteristic
    coefficients and ``D = d_i``; needs no invertibility."""
    L = np.asarray(L, complex)
    D = invariant_degree(InvariantId("char_coeff", i).validate(alg), alg)
    c = np.concatenate([[1.0], char_coeffs(L)])
    acc = np.zeros_like(L)
    for j in range(D):
        acc = acc @ L + c[j] * np.eye(L.shape[0])
    return project_to_algebra(-acc, alg)


def grad_pfaffian(L, alg: AlgebraSpec) -> np.ndarray:
    """``Pf(L) L^-1 / 2`` for family D."""
    InvariantId("pfaffian").validate(alg)
    L = np.asarray(L, complex)
    inv = _InverseAction(L, alg)
    return 0.5 * pfaffian(L, alg, tol=1e-6) * inv(np.eye(L.shape[0], dtype=complex))


def gradient(chi: InvariantId, L, alg: AlgebraSpec) -> np.ndarray:
    """Closed-form gradient of ``chi`` at ``L``, projected to g."""
    chi.validate(alg)
    if chi.kind == "trace_power":
        G = grad_trace_power(L, chi.index - 1)
    elif chi.kind == "char_coeff":
        G = grad_char_coeff(L, chi.index, alg)
    elif chi.kind == "det":
        inv = _InverseAction(np.asarray(L, complex), alg)
        G = np.linalg.det(L) * inv(np.eye(alg.d, dtype=complex))
    else:
        G = grad_pfaffian(L, alg)
    return project_to_algebra(G, alg)


def exponent_mu(r, lam, i: int, family: str) -> complex:
    """Diagonal entry of ``grad r_i`` on the sheet with eigenvalue ``lam``.

    ``r`` lists the basis coefficient values ``r_1, r_2, ...`` at the base point.
    """
    if lam == 0:
        raise ZeroDivisionError("exponent undefined on the zero sheet")
    r = np.asarray(r, complex)
    step = 1 if family == "A" else 2
    return complex(sum(r[j - 1] * lam ** (step * (i - j) - 1) for j in range(i, len(r) + 1)))


def pfaffian_mu(pf, lam) -> complex:
    if lam == 0:
        raise ZeroDivisionError("exponent undefined for a zero eigenvalue")
    return 0.5 * pf / lam
