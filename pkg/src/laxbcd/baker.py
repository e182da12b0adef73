"""Eigenvector matrices adapted to the involution ``lambda -> -lambda``.

Sheet order, the bilinear/symplectic pairing of sheet values, the Gram
process that turns an eigenvector matrix into a group element, and the same
process over Laurent series (leading orders are preserved).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AlgebraSpec
from .laurent import LaurentSeries

__all__ = [
    "SheetOrdering",
    "BranchPointError",
    "IsotropicPivotError",
    "sheet_ordering",
    "pairing",
    "eigen_frame",
    "orthonormalize",
    "series_pairing",
    "series_orthogonalize",
]


class BranchPointError(ValueError):
    """Eigenvalues fail to pair up or collide: move the sample point."""


class IsotropicPivotError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SheetOrdering:
    """``perm[j]`` is the index (in the input eigenvalue list) placed on sheet ``j``.

    Sheets follow the Cartan layout ``(l_1..l_n, [0,] -l_n..-l_1)``, so sheet
    ``j`` is partnered with sheet ``d-1-j``.  ``zero_sheet`` is set for B.
    """

    perm: tuple
    partner: tuple
    zero_sheet: int | None = None

    def apply(self, values):
        return np.asarray(values)[list(self.perm)]


def _key(z):
    return (round(z.real, 12), round(z.imag, 12))


def sheet_ordering(eigenvalues, family: str, tol: float = 1e-8) -> SheetOrdering:
    """Pair each eigenvalue with its negative and lay the pairs out mirrored."""
    lam = np.asarray(eigenvalues, complex)
    d = len(lam)
    scale = max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    if family == "A":
        order = sorted(range(d), key=lambda i: _key(lam[i]), reverse=True)
        return SheetOrdering(tuple(order), tuple(range(d)))
    left = list(range(d))
    zero = None
    if family == "B":
        zero = min(left, key=lambda i: abs(lam[i]))
        if abs(lam[zero]) > tol * scale:
            raise BranchPointError(f"no zero eigenvalue for family B (nearest {abs(lam[zero]):.3g})")
        left.remove(zero)
    pairs = []
    while left:
        # greedy minimal-distance matching of lambda with -lambda
        best = None
        for a in left:
            for b in left:
                if a < b:
                    dist = abs(lam[a] + lam[b])
                    if best is None or dist < best[0]:
                        best = (dist, a, b)
        if best is None or best[0] > tol * scale:
            raise BranchPointError("eigenvalue without involution partner")
        _, a, b = best
        left.remove(a)
        left.remove(b)
        a, b = sorted((a, b), key=lambda i: _key(lam[i]), reverse=True)
        pairs.append((a, b))
    pairs.sort(key=lambda ab: _key(lam[ab[0]]), reverse=True)
    first = [a for a, _ in pairs]
    second = [b for _, b in reversed(pairs)]
    perm = first + ([zero] if zero is not None else []) + second
    partner = tuple(d - 1 - j for j in range(d))
    zs = len(first) if zero is not None else None
    return SheetOrdering(tuple(perm), partner, zs)


def pairing(psi1, psi2, ordering: SheetOrdering, family: str) -> complex:
    """Pairing of two tuples of sheet values at a common base point.

    B/D: ``1/2 sum_Q psi1(Q) psi2(Q^s)``.  C: sum over one sheet of each pair of
    ``psi1(Q) psi2(Q^s) - psi1(Q^s) psi2(Q)``.
    """
    psi1 = np.asarray(psi1)
    psi2 = np.asarray(psi2)
    d = len(ordering.partner)
    if psi1.shape != (d,) or psi2.shape != (d,):
        raise ValueError("sheet values do not match the ordering")
    part = np.asarray(ordering.partner)
    if family == "C":
        half = np.arange(d // 2)
        return complex(np.sum(psi1[half] * psi2[part[half]] - psi1[part[half]] * psi2[half]))
    return complex(0.5 * np.sum(psi1 * psi2[part]))


def eigen_frame(X, alg: AlgebraSpec, min_gap: float = 1e-6):
    """Eigenvalues in sheet order and the matching eigenvector matrix.

    Rejects points where two eigenvalues come closer than ``min_gap`` (a
    branch point), where eigenvectors are ill-defined.
    """
    lam, V = np.linalg.eig(np.asarray(X, complex))
    d = len(lam)
    for a in range(d):
        for b in range(a + 1, d):
            if abs(lam[a] - lam[b]) < min_gap:
                raise BranchPointError(f"eigenvalue gap {abs(lam[a] - lam[b]):.3g} below {min_gap}")
    order = sheet_ordering(lam, alg.family)
    return order.apply(lam), V[:, list(order.perm)], order


def orthonormalize(Psi, alg: AlgebraSpec, lam=None, pivot_tol: float = 1e-10):
    """Gram process making ``Psi^T sigma Psi = sigma``.

    Columns are processed in partner pairs ``(j, d-1-j)``; each pair is made
    orthogonal to the previous ones, isotropic (B/D) and normalized.  For an
    eigenvector matrix in sheet order the projections vanish, so only column
    scalings occur and ``Psi Lambda Psi^-1`` is unchanged.  For family D the
    middle pair is swapped if needed to get ``det = +1``; the returned
    diagonal ``lam`` reflects the swap.

    Returns ``(Psi_hat, lam)``.
    """
    Psi = np.array(Psi, dtype=complex)
    d = alg.d
    S = alg.sigma
    if alg.family == "A":
        return Psi, None if lam is None else np.asarray(lam)
    lam = None if lam is None else np.array(lam, dtype=complex)
    out = np.zeros_like(Psi)
    done = []

    def form(x, y):
        return x @ S @ y

    def remove(x):
        # subtract components along processed pairs using the dual pairing
        for j in done:
            jp = d - 1 - j
            x = x - form(x, out[:, jp]) / form(out[:, j], out[:, jp]) * out[:, j]
            if jp != j:
                x = x - form(x, out[:, j]) / form(out[:, jp], out[:, j]) * out[:, jp]
        return x

    scale = max(1.0, float(np.max(np.abs(Psi))) ** 2)
    for j in range((d + 1) // 2):
        jp = d - 1 - j
        if j == jp:  # the zero sheet of family B
            x = remove(Psi[:, j])
            w = form(x, x)
            if abs(w) < pivot_tol * scale:
                raise IsotropicPivotError(f"isotropic pivot at sheet {j}")
            out[:, j] = x / np.sqrt(w)  # sigma has a 1 in the middle
            done.append(j)
            continue
        a = remove(Psi[:, j])
        b = remove(Psi[:, jp])
        if alg.family != "C":
            ab = form(a, b)
            if abs(ab) < pivot_tol * scale:
                raise IsotropicPivotError(f"degenerate pivot for sheets {j}, {jp}")
            a = a - form(a, a) / (2 * ab) * b
            b = b - form(b, b) / (2 * form(a, b)) * a
        ab = form(a, b)
        if abs(ab) < pivot_tol * scale:
            raise IsotropicPivotError(f"degenerate pivot for sheets {j}, {jp}")
        out[:, j] = a
        out[:, jp] = b * (S[j, jp] / ab)
        done += [j, jp]
    if alg.family == "B":
        if np.real(np.linalg.det(out)) < 0:
            out[:, alg.n] = -out[:, alg.n]
    elif alg.family == "D" and np.real(np.linalg.det(out)) < 0:
        m = alg.n
        out[:, [m - 1, m]] = out[:, [m, m - 1]]
        if lam is not None:
            lam[[m - 1, m]] = lam[[m, m - 1]]
    return out, lam


# ---------------------------------------------------------------- series Gram process


def series_pairing(x, y, form) -> LaurentSeries:
    """``x^T form y`` for vectors of Laurent series and a constant matrix ``form``."""
    form = np.asarray(form)
    acc = None
    for i, xi in enumerate(x):
        for j, yj in enumerate(y):
            if form[i, j] != 0:
                term = (xi * yj) * complex(form[i, j])
                acc = term if acc is None else acc + term
    if acc is None:
        top = min(s.top for s in list(x) + list(y))
        return LaurentSeries.zero(top)
    return acc


def _solve_series(G, rhs):
    """Solve ``G lam = rhs`` over Laurent series by elimination with unit pivots."""
    k = len(rhs)
    G = [list(row) for row in G]
    rhs = list(rhs)
    for c in range(k):
        piv = G[c][c].normalized()
        if piv.is_zero:
            raise IsotropicPivotError("non-unit Gram pivot")
        inv = piv.invert_unit()
        for r in range(c + 1, k):
            f = G[r][c] * inv
            G[r] = [G[r][j] - f * G[c][j] for j in range(k)]
            rhs[r] = rhs[r] - f * rhs[c]
    sol = [None] * k
    for r in range(k - 1, -1, -1):
        acc = rhs[r]
        for j in range(r + 1, k):
            acc = acc - G[r][j] * sol[j]
        sol[r] = acc * G[r][r].normalized().invert_unit()
    return sol


def series_orthogonalize(vectors, form, return_coefficients: bool = False):
    """Gram process over the Laurent-series ring.

    ``vectors[i]`` is a sequence of :class:`LaurentSeries` (the components of
    ``e_i``).  Step ``k+1`` finds ``lam_1..lam_k`` with
    ``(lam_1 e_1 + ... + lam_k e_k + e_(k+1), e_j) = 0`` for ``j <= k`` and
    replaces ``e_(k+1)`` by that combination.  The inputs are not normalized,
    so leading orders can be compared directly.
    """
    vecs = [list(v) for v in vectors]
    out = []
    coeffs = []
    for k, e in enumerate(vecs):
        if k == 0:
            out.append(e)
            coeffs.append([])
            continue
        prev = vecs[:k]
        G = [[series_pairing(prev[s], prev[j], form) for s in range(k)] for j in range(k)]
        rhs = [-series_pairing(e, prev[j], form) for j in range(k)]
        lam = _solve_series(G, rhs)
        new = []
        for comp in range(len(e)):
            acc = e[comp]
            for s in range(k):
                acc = acc + lam[s] * prev[s][comp]
            new.append(acc)
        out.append(new)
        coeffs.append(lam)
    return (out, coeffs) if return_coefficients else out
