"""Truncated Laurent series in one variable, scalar and matrix valued.

A series stores coefficients ``c[k]`` of ``z**(start + k)`` and is known up
to and including the power ``top``; nothing beyond ``top`` is ever reported.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "LaurentSeries",
    "LaurentMatrix",
    "conjugate_by_z_power",
    "series_leading_order",
    "OrderFloorError",
    "ZERO_REL_TOL",
]

ZERO_REL_TOL = 1e-12


class OrderFloorError(ValueError):
    pass


LEAD_WINDOW = 3


def _leading_index(c, rel_tol):
    """First coefficient above ``rel_tol`` times the largest of the lowest
    ``LEAD_WINDOW`` nonzero orders.

    Cancellation residue at an order is small relative to the terms that
    produced it, which are of the size of the neighbouring coefficients; the
    global maximum would wrongly discard genuine leading terms of series
    with geometrically growing coefficients.
    """
    mags = np.abs(c)
    if mags.ndim > 1:
        mags = mags.reshape(len(mags), -1).max(axis=1)
    first = np.nonzero(mags > 0)[0]
    if len(first) == 0:
        return None
    i0 = int(first[0])
    ref = mags[i0:i0 + LEAD_WINDOW].max()
    nz = np.nonzero(mags > rel_tol * ref)[0]
    return int(nz[0])


class LaurentSeries:
    """Scalar truncated Laurent series ``sum_k c[k] z**(start+k) + O(z**(top+1))``."""

    __slots__ = ("start", "coeffs", "top")

    def __init__(self, coeffs, start: int = 0, top: int | None = None):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if top is None:
            top = start + len(c) - 1
        keep = max(0, top - start + 1)
        if len(c) < keep:
            c = np.concatenate([c, np.zeros(keep - len(c), complex)])
        self.coeffs = c[:keep]
        self.start = int(start)
        self.top = int(top)

    # -- construction helpers
    @classmethod
    def monomial(cls, power: int, top: int, coeff=1.0) -> "LaurentSeries":
        return cls([coeff], power, top)

    @classmethod
    def zero(cls, top: int) -> "LaurentSeries":
        return cls([], top + 1, top)

    @classmethod
    def constant(cls, value, top: int) -> "LaurentSeries":
        return cls([value], 0, top)

    # -- inspection
    def normalized(self, rel_tol: float = ZERO_REL_TOL) -> "LaurentSeries":
        """Copy with negligible leading coefficients stripped."""
        i = _leading_index(self.coeffs, rel_tol)
        if i is None:
            return LaurentSeries.zero(self.top)
        return LaurentSeries(self.coeffs[i:], self.start + i, self.top)

    @property
    def is_zero(self) -> bool:
        return _leading_index(self.coeffs, ZERO_REL_TOL) is None

    def leading_order(self, rel_tol: float = ZERO_REL_TOL) -> int | None:
        """Lowest power with a non-negligible coefficient; ``None`` for zero."""
        i = _leading_index(self.coeffs, rel_tol)
        return None if i is None else self.start + i

    def coeff(self, power: int) -> complex:
        if power > self.top:
            raise ValueError(f"coefficient of z^{power} is beyond truncation {self.top}")
        k = power - self.start
        return complex(self.coeffs[k]) if 0 <= k < len(self.coeffs) else 0j

    def window(self, lo: int, hi: int) -> np.ndarray:
        return np.array([self.coeff(p) for p in range(lo, hi + 1)])

    def __call__(self, z):
        p = np.arange(self.start, self.start + len(self.coeffs))
        return np.sum(self.coeffs * np.power(complex(z), p))

    def __repr__(self) -> str:
        return f"LaurentSeries(start={self.start}, top={self.top}, coeffs={self.coeffs!r})"

    # -- ring operations
    def _coerce(self, other):
        if isinstance(other, LaurentSeries):
            return other
        return LaurentSeries.constant(other, self.top)

    def __add__(self, other):
        other = self._coerce(other)
        top = min(self.top, other.top)
        lo = min(self.start, other.start)
        out = np.zeros(max(0, top - lo + 1), complex)
        for s in (self, other):
            n = max(0, min(len(s.coeffs), top - s.start + 1))
            out[s.start - lo: s.start - lo + n] += s.coeffs[:n]
        return LaurentSeries(out, lo, top)

    __radd__ = __add__

    def __neg__(self):
        return LaurentSeries(-self.coeffs, self.start, self.top)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            return LaurentSeries(self.coeffs * complex(other), self.start, self.top)
        # strip exact zeros only: a relative cut would drop genuine small
        # leading terms of series whose coefficients grow geometrically
        a, b = self.normalized(0.0), other.normalized(0.0)
        top = min(a.top + b.start, b.top + a.start)
        if a.is_zero or b.is_zero:
            return LaurentSeries.zero(top)
        start = a.start + b.start
        c = np.convolve(a.coeffs, b.coeffs)
        return LaurentSeries(c, start, top)

    __rmul__ = __mul__

    def shift(self, k: int) -> "LaurentSeries":
        """Multiply by ``z**k``."""
        return LaurentSeries(self.coeffs, self.start + k, self.top + k)

    def invert_unit(self) -> "LaurentSeries":
        """Multiplicative inverse; the result is known to the same relative depth."""
        a = self.normalized()
        if a.is_zero:
            raise ZeroDivisionError("cannot invert the zero series")
        depth = a.top - a.start
        c = a.coeffs
        inv = np.zeros(depth + 1, complex)
        inv[0] = 1.0 / c[0]
        for k in range(1, depth + 1):
            m = min(k, len(c) - 1)
            inv[k] = -np.dot(c[1:m + 1], inv[k - 1::-1][:m]) / c[0]
        return LaurentSeries(inv, -a.start, -a.start + depth)


def invert_unit(s: LaurentSeries) -> LaurentSeries:
    return s.invert_unit()


class LaurentMatrix:
    """Matrix of Laurent series sharing ``start`` and truncation ``top``.

    ``coeffs`` has shape ``(K, d1, d2)`` and holds the coefficient matrices
    of ``z**start, ..., z**(start+K-1)`` with ``start + K - 1 == top``.
    """

    __slots__ = ("start", "coeffs", "top")

    def __init__(self, coeffs, start: int, top: int | None = None):
        c = np.asarray(coeffs, dtype=complex)
        if top is None:
            top = start + len(c) - 1
        keep = max(0, top - start + 1)
        if len(c) < keep:
            c = np.concatenate([c, np.zeros((keep - len(c),) + c.shape[1:], complex)])
        self.coeffs = c[:keep]
        self.start = int(start)
        self.top = int(top)

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    def coeff(self, power: int) -> np.ndarray:
        if power > self.top:
            raise ValueError(f"coefficient of z^{power} is beyond truncation {self.top}")
        k = power - self.start
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return np.zeros(self.shape, complex)

    def entry(self, i: int, j: int) -> LaurentSeries:
        return LaurentSeries(self.coeffs[:, i, j], self.start, self.top)

    def leading_order(self, rel_tol: float = ZERO_REL_TOL) -> int | None:
        i = _leading_index(self.coeffs, rel_tol)
        return None if i is None else self.start + i

    def __call__(self, z):
        p = np.arange(self.start, self.start + len(self.coeffs))
        return np.einsum("k,kij->ij", np.power(complex(z), p), self.coeffs)

    def __add__(self, other: "LaurentMatrix"):
        top = min(self.top, other.top)
        lo = min(self.start, other.start)
        out = np.zeros((max(0, top - lo + 1),) + self.shape, complex)
        for s in (self, other):
            n = max(0, min(len(s.coeffs), top - s.start + 1))
            out[s.start - lo: s.start - lo + n] += s.coeffs[:n]
        return LaurentMatrix(out, lo, top)

    def __neg__(self):
        return LaurentMatrix(-self.coeffs, self.start, self.top)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "LaurentMatrix":
        return LaurentMatrix(self.coeffs * c, self.start, self.top)

    def __matmul__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        top = min(self.top + other.start, other.top + self.start)
        start = self.start + other.start
        K = max(0, top - start + 1)
        out = np.zeros((K, self.shape[0], other.shape[1]), complex)
        for a in range(min(len(self.coeffs), K)):
            nb = min(len(other.coeffs), K - a)
            if nb <= 0:
                break
            out[a:a + nb] += np.einsum("ij,kjl->kil", self.coeffs[a], other.coeffs[:nb])
        return LaurentMatrix(out, start, top)

    def lmul_const(self, A) -> "LaurentMatrix":
        return LaurentMatrix(np.einsum("ij,kjl->kil", A, self.coeffs), self.start, self.top)

    def rmul_const(self, A) -> "LaurentMatrix":
        return LaurentMatrix(np.einsum("kij,jl->kil", self.coeffs, A), self.start, self.top)

    def shift(self, k: int) -> "LaurentMatrix":
        return LaurentMatrix(self.coeffs, self.start + k, self.top + k)

    def commutator(self, other: "LaurentMatrix") -> "LaurentMatrix":
        return (self @ other) - (other @ self)

    def __repr__(self) -> str:
        return f"LaurentMatrix(shape={self.shape}, start={self.start}, top={self.top})"


def conjugate_by_z_power(A: LaurentMatrix, h, sign: int = 1, floor: int | None = None) -> LaurentMatrix:
    """Return ``z**(sign h) A z**(-sign h)`` for integral diagonal ``h``.

    Entry ``(i, j)`` is multiplied by ``z**(sign (h_i - h_j))``.  The result is
    known up to ``A.top + min shift``.  ``floor`` bounds the lowest order the
    caller accepts; a violation raises :class:`OrderFloorError`.
    """
    hd = getattr(h, "diag", h)
    hd = np.asarray(hd, dtype=int)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    shifts = sign * (hd[:, None] - hd[None, :])
    lo = int(shifts.min())
    start = A.start + lo
    top = A.top + lo
    K = max(0, top - start + 1)
    out = np.zeros((K,) + A.shape, complex)
    n = len(A.coeffs)
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            off = int(shifts[i, j]) - lo
            m = max(0, min(n, K - off))
            out[off:off + m, i, j] = A.coeffs[:m, i, j]
    res = LaurentMatrix(out, start, top)
    if floor is not None:
        lead = res.leading_order()
        if lead is not None and lead < floor:
            raise OrderFloorError(f"conjugation produced order {lead} below floor {floor}")
    return res


def series_leading_order(vec, rel_tol: float = ZERO_REL_TOL) -> int:
    """Minimum leading order over a vector of series.

    The zero test uses a common reference for all components, so a
    component holding only cancellation residue does not count.
    """
    vec = [s for s in vec if len(s.coeffs)]
    if not vec:
        raise ValueError("all-zero vector has no leading order")
    lo = min(s.start for s in vec)
    hi = max(s.start + len(s.coeffs) - 1 for s in vec)
    grid = np.zeros(hi - lo + 1)
    for s in vec:
        k = s.start - lo
        grid[k:k + len(s.coeffs)] = np.maximum(grid[k:k + len(s.coeffs)], np.abs(s.coeffs))
    i = _leading_index(grid, rel_tol)
    if i is None:
        raise ValueError("all-zero vector has no leading order")
    return lo + i
