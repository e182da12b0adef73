"""Spectral curve data: characteristic coefficients, divisor bounds, Pfaffian."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraSpec, is_member
from .laurent import LaurentSeries
from .laxspace import LaxElement, evaluate, local_expansion

__all__ = [
    "berkowitz",
    "char_coeffs",
    "char_coeffs_series",
    "basis_coeffs",
    "RationalFunction",
    "FitError",
    "reconstruct_rational",
    "sample_circle",
    "involution_defect",
    "pfaffian_skew",
    "pfaffian",
    "holomorphy_at_tyurin",
    "SpectralCurveData",
    "spectral_curve",
    "write_curve_csv",
]


def berkowitz(A, zero, one):
    """Characteristic polynomial ``det(lambda - A)`` over any commutative ring.

    Division free.  ``A`` is a square nested sequence of ring elements; the
    result lists the coefficients of ``lambda**d, ..., lambda**0``.
    """
    d = len(A)
    if d == 0:
        return [one]
    # grow from the bottom-right 1x1 block outwards
    C = [one, -A[d - 1][d - 1]]
    for s in range(d - 2, -1, -1):
        r = d - 1 - s  # size of the trailing block
        a = A[s][s]
        R = [A[s][j] for j in range(s + 1, d)]
        col = [A[i][s] for i in range(s + 1, d)]
        sub = [[A[i][j] for j in range(s + 1, d)] for i in range(s + 1, d)]
        # Toeplitz first column: 1, -a, -R col, -R sub col, ...
        t = [one, -a]
        v = col
        for _ in range(r):
            acc = zero
            for x, y in zip(R, v):
                acc = acc + x * y
            t.append(-acc)
            v = [_dot(row, v, zero) for row in sub]
        new = []
        for i in range(r + 2):
            acc = zero
            for j in range(max(0, i - (r + 1)), min(i, r) + 1):
                acc = acc + t[i - j] * C[j]
            new.append(acc)
        C = new
    return C


def _dot(row, v, zero):
    acc = zero
    for x, y in zip(row, v):
        acc = acc + x * y
    return acc


def char_coeffs(M) -> np.ndarray:
    """Coefficients ``r_1..r_d`` of ``det(lambda - M) = lambda^d + sum r_j lambda^(d-j)``."""
    M = np.asarray(M, dtype=complex)
    d = M.shape[0]
    if d == 0:
        return np.zeros(0, complex)
    rows = [[M[i, j] for j in range(d)] for i in range(d)]
    c = berkowitz(rows, 0j, 1.0 + 0j)
    return np.array(c[1:], dtype=complex)


def char_coeffs_series(X) -> list:
    """Characteristic coefficients of a :class:`LaurentMatrix` as series."""
    d = X.shape[0]
    rows = [[X.entry(i, j) for j in range(d)] for i in range(d)]
    zero = LaurentSeries.zero(X.top + 10 * d * (abs(X.start) + 1))
    one = LaurentSeries.constant(1.0, zero.top)
    return berkowitz(rows, zero, one)[1:]


def basis_coeffs(coeffs, family: str) -> np.ndarray:
    """Basis invariants among the characteristic coefficients.

    For B/C/D these are the even ones ``c_2, c_4, ..., c_2n`` (for B the
    reduced curve after removing the root ``lambda = 0``); for A all of them.
    """
    coeffs = np.asarray(coeffs)
    if family == "A":
        return coeffs
    return coeffs[1::2][: len(coeffs) // 2]


# ---------------------------------------------------------------- rational fits


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """``N(q) / prod_P (q - z_P)**e_P`` with ``N`` in the scaled variable ``(q-c)/rho``."""

    numer: np.ndarray
    center: complex
    radius: float
    poles: tuple  # ((z_P, e_P), ...)

    @property
    def degree_bound(self) -> int:
        return len(self.numer) - 1

    def denominator(self, q):
        q = np.asarray(q, complex)
        out = np.ones_like(q)
        for z, e in self.poles:
            out = out * (q - z) ** e
        return out

    def __call__(self, q):
        q = np.asarray(q, complex)
        x = (q - self.center) / self.radius
        return np.polynomial.polynomial.polyval(x, self.numer) / self.denominator(q)


class FitError(RuntimeError):
    pass


def _pole_geometry(config):
    poles = [complex(p.z) for p in config.punctures] + [complex(t.z) for t in config.tyurin]
    if not poles:
        return 0j, 1.0, 1.0
    center = complex(np.mean(poles))
    seps = [abs(a - b) for i, a in enumerate(poles) for b in poles[i + 1:]]
    sep = min(seps) if seps else 1.0
    return center, sep, max(abs(p - center) for p in poles)


def sample_circle(config, count: int, phase: float = 0.0, radius: float | None = None):
    """Points on a circle around all poles, clear of each by ``0.1 * min separation``."""
    center, sep, spread = _pole_geometry(config)
    if radius is None:
        radius = max(1.0, 1.5 * spread + 0.5 * sep)
    poles = [complex(p.z) for p in config.punctures] + [complex(t.z) for t in config.tyurin]
    for _ in range(50):
        if all(abs(abs(p - center) - radius) > 0.1 * sep for p in poles):
            break
        radius *= 1.07
    theta = 2 * np.pi * (np.arange(count) + phase) / count
    return center + radius * np.exp(1j * theta), center, radius


def reconstruct_rational(L: LaxElement, j: int, extra_degree: int = 0, n_fit: int | None = None,
                         tol: float = 1e-8, raise_on_fail: bool = True):
    """Fit ``r_j`` as a rational function with denominator ``prod (q-z_P)**(j m_P)``.

    Returns ``(RationalFunction, held_out_residual)``.  The residual is the
    largest error at held-out points relative to ``max(|r_j|, |L|**j)`` there,
    the natural size of a degree-``j`` invariant (``r_j`` may vanish).
    """
    cfg = L.config
    d = cfg.alg.d
    if not 1 <= j <= d:
        raise ValueError(f"coefficient index must be in 1..{d}")
    poles = tuple((complex(p.z), j * p.m) for p in cfg.punctures if p.m > 0)
    deg = sum(e for _, e in poles) + extra_degree
    if n_fit is None:
        n_fit = 2 * (deg + 1) + 4
    q_fit, center, radius = sample_circle(cfg, n_fit)
    q_val = np.concatenate([sample_circle(cfg, 7, phase=0.37, radius=radius)[0],
                            sample_circle(cfg, 5, phase=0.11, radius=radius * 1.05)[0]])
    rf = RationalFunction(np.zeros(deg + 1, complex), center, radius, poles)

    def values(qs):
        return np.array([char_coeffs(evaluate(L, q))[j - 1] for q in qs])

    y = values(q_fit) * rf.denominator(q_fit)
    V = np.vander((q_fit - center) / radius, deg + 1, increasing=True)
    numer, *_ = np.linalg.lstsq(V, y, rcond=None)
    rf = RationalFunction(numer, center, radius, poles)
    truth = values(q_val)
    size = max(float(np.max(np.abs(evaluate(L, q)))) for q in q_val)
    scale = max(float(np.max(np.abs(truth))), size ** j, 1e-300)
    resid = float(np.max(np.abs(rf(q_val) - truth))) / scale
    if resid > tol and raise_on_fail:
        raise FitError(f"r_{j} fit residual {resid:.3g} exceeds {tol:.3g}: divisor bound violated")
    return rf, resid


def involution_defect(L, samples, family: str | None = None) -> float:
    """Largest odd characteristic coefficient relative to the largest coefficient.

    ``L`` is a :class:`LaxElement` or a callable returning matrices.
    """
    worst = 0.0
    for q in samples:
        M = evaluate(L, q) if isinstance(L, LaxElement) else np.asarray(L(q))
        c = char_coeffs(M)
        big = float(np.max(np.abs(c), initial=0.0))
        if big == 0.0:
            continue
        worst = max(worst, float(np.max(np.abs(c[0::2]))) / big)
    return worst


# ---------------------------------------------------------------- Pfaffian


def pfaffian_skew(A) -> complex:
    """Pfaffian of an antisymmetric matrix by pivoted Gaussian elimination."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("square matrix required")
    if n % 2:
        raise ValueError("Pfaffian requires even dimension")
    scale = max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if np.max(np.abs(A + A.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not antisymmetric")
    pf = 1.0 + 0j
    for k in range(0, n - 1, 2):
        p = k + 1 + int(np.argmax(np.abs(A[k, k + 1:])))
        if p != k + 1:
            A[[k + 1, p], :] = A[[p, k + 1], :]
            A[:, [k + 1, p]] = A[:, [p, k + 1]]
            pf = -pf
        piv = A[k, k + 1]
        if piv == 0:
            return 0j
        pf *= piv
        if k + 2 < n:
            tau = A[k, k + 2:] / piv
            # Schur complement of the 2x2 pivot block
            A[k + 2:, k + 2:] -= np.outer(tau, A[k + 1, k + 2:]) - np.outer(A[k + 1, k + 2:], tau)
    return pf


def _pf_normalization(alg: AlgebraSpec) -> complex:
    J = np.diag(alg.cartan([1] * alg.n))
    return (1j ** alg.n) / pfaffian_skew(alg.sigma @ J)


def pfaffian(X, alg: AlgebraSpec, tol: float = 1e-8) -> complex:
    """Pfaffian of a member of so(2n), normalized so ``Pf(X)**2 == det X``.

    Computed from the antisymmetric representative ``sigma X`` with a fixed
    constant such that ``Pf(diag(1..1, -1..-1)) = i**n``.
    """
    if alg.family != "D":
        raise ValueError("the Pfaffian is a basis invariant only for family D (even so)")
    X = np.asarray(X, complex)
    if X.shape != (alg.d, alg.d):
        raise ValueError("dimension mismatch")
    if not is_member(X, alg, tol):
        raise ValueError("matrix is not a member of so(2n)")
    return _pf_normalization(alg) * pfaffian_skew(alg.sigma @ X)


# ---------------------------------------------------------------- Tyurin holomorphy


def holomorphy_at_tyurin(L: LaxElement, gamma: int) -> float:
    """Largest negative-order coefficient of the characteristic coefficients at a Tyurin point.

    Relative to ``max(1, largest coefficient magnitude)`` in the window.
    """
    cfg = L.config
    if not cfg.tyurin:
        return 0.0
    t = cfg.tyurin[gamma]
    k = t.depth
    d = cfg.alg.d
    X = local_expansion(L, t.z, lo=-k, top=(d - 1) * k + 4)
    cs = char_coeffs_series(X)
    worst, scale = 0.0, 1.0
    for c in cs:
        if len(c.coeffs):
            scale = max(scale, float(np.max(np.abs(c.coeffs))))
        for p in range(c.start, min(0, c.top + 1)):
            worst = max(worst, abs(c.coeff(p)))
    return worst / scale


# ---------------------------------------------------------------- data + CSV


@dataclass(frozen=True, eq=False)
class SpectralCurveData:
    family: str
    coefficients: tuple  # RationalFunction per j = 1..d
    residuals: np.ndarray
    samples: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)  # (n_samples, d)


def spectral_curve(L: LaxElement, n_samples: int = 16, tol: float = 1e-8) -> SpectralCurveData:
    d = L.config.alg.d
    fits, res = [], []
    for j in range(1, d + 1):
        rf, r = reconstruct_rational(L, j, tol=tol)
        fits.append(rf)
        res.append(r)
    q, _, _ = sample_circle(L.config, n_samples, phase=0.25)
    vals = np.array([char_coeffs(evaluate(L, x)) for x in q])
    return SpectralCurveData(L.config.alg.family, tuple(fits), np.array(res), q, vals)


def write_curve_csv(path, samples, values):
    """Write rows ``q_re, q_im, r1_re, r1_im, ...``."""
    values = np.asarray(values)
    d = values.shape[1]
    header = ["q_re", "q_im"] + [f"r{j}_{part}" for j in range(1, d + 1) for part in ("re", "im")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for q, row in zip(samples, values):
            out = [f"{q.real:.17g}", f"{q.imag:.17g}"]
            for v in row:
                out += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            w.writerow(out)
