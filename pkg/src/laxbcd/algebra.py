"""Matrix realizations of gl(n), so(2n+1), sp(2n), so(2n) and their gradings.

The bilinear form matrix ``sigma`` is anti-diagonal, so the Cartan subalgebra
is diagonal: ``diag(h_1, ..., h_n, [0,] -h_n, ..., -h_1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "AlgebraSpec",
    "GradingElement",
    "GradedDecomposition",
    "make_algebra",
    "is_member",
    "project_to_algebra",
    "algebra_basis",
    "grading",
    "make_grading_element",
    "in_group",
    "project_to_group",
    "random_member",
    "random_group_element",
]

FAMILIES = ("A", "B", "C", "D")


@dataclass(frozen=True, eq=False)
class AlgebraSpec:
    family: str
    n: int
    d: int
    sigma: np.ndarray = field(repr=False)

    @cached_property
    def sigma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.sigma)

    @cached_property
    def dim(self) -> int:
        n = self.n
        return {"A": n * n, "B": n * (2 * n + 1), "C": n * (2 * n + 1),
                "D": n * (2 * n - 1)}[self.family]

    @cached_property
    def basis(self) -> np.ndarray:
        return algebra_basis(self)

    @cached_property
    def trace_gram(self) -> np.ndarray:
        """Gram matrix tr(B_k B_l) of the trace form on the basis."""
        B = self.basis
        return np.einsum("kij,lji->kl", B, B)

    def cartan(self, h) -> np.ndarray:
        """Diagonal of the Cartan element with first-half entries ``h``."""
        h = list(h)
        if self.family == "A":
            return np.array(h, dtype=float)
        tail = [-x for x in reversed(h)]
        mid = [0] if self.family == "B" else []
        return np.array(h + mid + tail, dtype=float)

    def __repr__(self) -> str:
        return f"AlgebraSpec(family={self.family!r}, n={self.n}, d={self.d})"


def make_algebra(family: str, n: int) -> AlgebraSpec:
    """Standard realization of the classical algebra of given family and rank."""
    family = str(family).upper()
    if family not in FAMILIES:
        raise ValueError(f"unsupported family {family!r}; expected one of {FAMILIES}")
    if int(n) != n or n < 1:
        raise ValueError(f"rank must be a positive integer, got {n!r}")
    n = int(n)
    if family == "A":
        d = n
        sigma = np.eye(d)
    elif family == "B":
        d = 2 * n + 1
        sigma = np.fliplr(np.eye(d))
    elif family == "D":
        d = 2 * n
        sigma = np.fliplr(np.eye(d))
    else:
        d = 2 * n
        sigma = np.zeros((d, d))
        for i in range(d):
            sigma[i, d - 1 - i] = 1.0 if i < n else -1.0
    sigma.setflags(write=False)
    return AlgebraSpec(family, n, d, sigma)


def _check_shape(X, alg):
    X = np.asarray(X)
    if X.shape != (alg.d, alg.d):
        raise ValueError(f"expected a {alg.d}x{alg.d} matrix, got shape {X.shape}")
    return X


def _involution(X, alg):
    return alg.sigma @ X.T @ alg.sigma_inv


def is_member(X, alg: AlgebraSpec, tol: float = 1e-10) -> bool:
    """True iff ``sigma X^T sigma^-1 = -X`` up to ``tol`` relative to ``|X|_inf``."""
    X = _check_shape(X, alg)
    if alg.family == "A":
        return True
    scale = max(1.0, float(np.max(np.abs(X)))) if X.size else 1.0
    return float(np.max(np.abs(_involution(X, alg) + X))) <= tol * scale


def project_to_algebra(X, alg: AlgebraSpec) -> np.ndarray:
    """Projection ``(X - sigma X^T sigma^-1)/2``; identity for family A."""
    X = _check_shape(X, alg)
    if alg.family == "A":
        return np.array(X, copy=True)
    return 0.5 * (X - _involution(X, alg))


def algebra_basis(alg: AlgebraSpec) -> np.ndarray:
    """Real basis of g, orthonormal for the Frobenius inner product.

    Every element is a combination of at most two matrix units ``E_ij`` with
    the same ``ad h`` eigenvalue for every diagonal Cartan ``h``, so the basis
    is homogeneous for all gradings at once.
    """
    d = alg.d
    out = []
    seen = set()
    for i in range(d):
        for j in range(d):
            if (i, j) in seen:
                continue
            E = np.zeros((d, d))
            E[i, j] = 1.0
            P = project_to_algebra(E, alg)
            nz = np.argwhere(np.abs(P) > 1e-14)
            for a, b in nz:
                seen.add((int(a), int(b)))
            if nz.size == 0:
                continue
            out.append(P / np.linalg.norm(P))
    B = np.array(out)
    assert len(B) == alg.dim, (len(B), alg.dim)
    B.setflags(write=False)
    return B


def coords(X, alg: AlgebraSpec) -> np.ndarray:
    """Coordinates of a member in ``alg.basis``."""
    return np.einsum("kij,ij->k", alg.basis, X)


def from_coords(c, alg: AlgebraSpec) -> np.ndarray:
    return np.einsum("k,kij->ij", c, alg.basis)


# ---------------------------------------------------------------- gradings


def _positive_chamber(hd, alg) -> bool:
    n = alg.n
    if alg.family == "A":
        return all(hd[i] >= hd[i + 1] for i in range(alg.d - 1))
    h = hd[:n]
    desc = all(h[i] >= h[i + 1] for i in range(n - 1))
    if alg.family in ("B", "C"):
        return desc and h[-1] >= 0
    if n == 1:
        return True
    return desc and h[-2] >= abs(h[-1])


@dataclass(frozen=True, eq=False)
class GradingElement:
    """Integral diagonal Cartan element ``h`` (stored as its diagonal)."""

    diag: np.ndarray
    depth: int

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag.astype(float))

    def __repr__(self) -> str:
        return f"GradingElement(diag={self.diag.tolist()}, depth={self.depth})"


def make_grading_element(h, alg: AlgebraSpec, check_chamber: bool = True) -> GradingElement:
    """Validate an integral Cartan element.

    ``h`` is either the full diagonal (length ``d``), a ``d x d`` diagonal
    matrix, or the first ``n`` entries for B/C/D.
    """
    h = np.asarray(h)
    if h.ndim == 2:
        if h.shape != (alg.d, alg.d) or np.any(np.abs(h - np.diag(np.diag(h))) > 0):
            raise ValueError("grading element must be a diagonal matrix")
        h = np.diag(h)
    if alg.family != "A" and h.shape == (alg.n,) and alg.d != alg.n:
        h = alg.cartan(h)
    if h.shape != (alg.d,):
        raise ValueError(f"grading element needs {alg.d} diagonal entries, got {h.shape}")
    if np.any(np.abs(np.real(h) - np.round(np.real(h))) > 0) or np.any(np.imag(h) != 0):
        raise ValueError("grading element must be integral")
    hd = np.round(np.real(h)).astype(int)
    if alg.family != "A" and not np.array_equal(hd, -hd[::-1]):
        raise ValueError("grading element is not in the Cartan subalgebra "
                         "(diagonal must be antisymmetric under reversal)")
    if check_chamber and not _positive_chamber(hd, alg):
        raise ValueError(f"grading element {hd.tolist()} is not in the positive chamber")
    diffs = [int(hd[i] - hd[j]) for (i, j) in _root_positions(alg)]
    depth = max([0] + diffs)
    hd.setflags(write=False)
    return GradingElement(hd, depth)


def _root_positions(alg):
    """Matrix positions (i, j) carrying root vectors of g."""
    B = alg.basis
    mask = np.any(np.abs(B) > 0, axis=0)
    return [(i, j) for i in range(alg.d) for j in range(alg.d) if i != j and mask[i, j]]


@dataclass(frozen=True, eq=False)
class GradedDecomposition:
    h: GradingElement
    depth: int
    pieces: dict  # p -> array (dim g_p, d, d)
    eig: np.ndarray  # d x d array of h_i - h_j

    def dim(self, p: int) -> int:
        return len(self.pieces.get(p, ()))

    def filtration_basis(self, p: int) -> np.ndarray:
        """Basis of the filtration space ``sum_{q <= p} g_q``."""
        parts = [B for q, B in self.pieces.items() if q <= p and len(B)]
        if not parts:
            return np.zeros((0,) + self.eig.shape)
        return np.concatenate(parts)

    def filtration_mask(self, p: int) -> np.ndarray:
        """Entries ``(i, j)`` that must vanish for membership in the filtration."""
        return self.eig > p

    def in_filtration(self, X, p: int, tol: float = 1e-10) -> bool:
        X = np.asarray(X)
        scale = max(1.0, float(np.max(np.abs(X))))
        return float(np.max(np.abs(X[self.filtration_mask(p)]), initial=0.0)) <= tol * scale

    def eigenspace(self, i: int) -> list:
        """Indices of standard basis vectors spanning ``V_i = ker(h - i)``."""
        return [a for a, x in enumerate(self.h.diag) if x == i]

    def flag(self, j: int) -> list:
        """Indices spanning ``F_j = sum_{i <= j} V_i``."""
        return [a for a, x in enumerate(self.h.diag) if x <= j]


def grading(alg: AlgebraSpec, h) -> GradedDecomposition:
    """Eigenspace decomposition of ``ad h`` on g."""
    if not isinstance(h, GradingElement):
        h = make_grading_element(h, alg, check_chamber=False)
    hd = h.diag.astype(float)
    eig = hd[:, None] - hd[None, :]
    pieces: dict = {}
    for B in alg.basis:
        adh = np.diag(hd) @ B - B @ np.diag(hd)
        support = np.abs(B) > 0
        vals = np.unique(eig[support])
        assert len(vals) == 1
        p = int(round(vals[0]))
        assert np.allclose(adh, p * B)
        pieces.setdefault(p, []).append(B)
    pieces = {p: np.array(v) for p, v in sorted(pieces.items())}
    depth = max(pieces)
    return GradedDecomposition(h, depth, pieces, eig)


# ---------------------------------------------------------------- group


def in_group(g, alg: AlgebraSpec, tol: float = 1e-10) -> bool:
    g = _check_shape(g, alg)
    if alg.family == "A":
        return abs(np.linalg.det(g)) > tol
    r = g.T @ alg.sigma @ g - alg.sigma
    return float(np.max(np.abs(r))) <= tol * max(1.0, float(np.max(np.abs(g))) ** 2)


def project_to_group(g, alg: AlgebraSpec) -> np.ndarray:
    """Nearby group element ``g S^{-1/2}`` with ``S = sigma^-1 g^T sigma g``."""
    from scipy.linalg import sqrtm

    g = _check_shape(g, alg)
    if alg.family == "A":
        return np.array(g, dtype=complex)
    S = alg.sigma_inv @ g.T @ alg.sigma @ g
    R = sqrtm(S)
    return np.linalg.solve(R.T, g.T).T


def random_member(alg: AlgebraSpec, rng, scale: float = 1.0, complex_: bool = True) -> np.ndarray:
    c = rng.standard_normal(alg.dim)
    if complex_:
        c = c + 1j * rng.standard_normal(alg.dim)
    return scale * from_coords(c, alg)


def random_group_element(alg: AlgebraSpec, rng, scale: float = 0.5) -> np.ndarray:
    from scipy.linalg import expm

    return expm(random_member(alg, rng, scale=scale))
