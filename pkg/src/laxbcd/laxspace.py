"""Linear spaces of Lax operators on the Riemann sphere.

An element is stored by partial fractions::

    L(z) = A0 + sum_P sum_r A[P][r-1] (z - z_P)**-r
              + sum_g sum_p B[g][p-1] (z - z_g)**-p

with all coefficient matrices in g.  At a Tyurin point with grading element
``h`` and conjugator ``g`` the Laurent coefficients ``L_p`` must satisfy
``g^-1 L_p g in filtration_p(h)`` for ``-k <= p <= k-1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np

from .algebra import (AlgebraSpec, GradingElement, grading, in_group,
                      make_grading_element)
from .laurent import LaurentMatrix, conjugate_by_z_power

__all__ = [
    "Puncture",
    "TyurinPoint",
    "LaxConfig",
    "LaxElement",
    "LaxSpace",
    "RankDecisionError",
    "build_constraint_system",
    "sample_lax",
    "evaluate",
    "local_expansion",
    "check_tyurin_form",
    "tyurin_residual",
    "filtration_residual",
    "taylor_coefficient",
    "from_conjugation_form",
]

RANK_REL_TOL = 1e-9
POINT_TOL = 1e-9


class RankDecisionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Puncture:
    z: complex
    m: int


@dataclass(frozen=True, eq=False)
class TyurinPoint:
    z: complex
    h: GradingElement
    g: np.ndarray = field(repr=False)

    @property
    def depth(self) -> int:
        return self.h.depth

    @cached_property
    def g_inv(self) -> np.ndarray:
        return np.linalg.inv(self.g)

    @property
    def h_matrix(self) -> np.ndarray:
        """Current grading element ``g h g^-1``."""
        return self.g @ self.h.matrix @ self.g_inv

    def moved(self, z=None, g=None) -> "TyurinPoint":
        return TyurinPoint(self.z if z is None else complex(z), self.h,
                           self.g if g is None else np.asarray(g, complex))


@dataclass(frozen=True, eq=False)
class LaxConfig:
    alg: AlgebraSpec
    punctures: tuple
    tyurin: tuple = ()

    def __post_init__(self):
        pts = [complex(p.z) for p in self.punctures] + [complex(t.z) for t in self.tyurin]
        for i, a in enumerate(pts):
            if not np.isfinite(a):
                raise ValueError("punctures and Tyurin points must be finite")
            for b in pts[i + 1:]:
                if abs(a - b) < POINT_TOL:
                    raise ValueError(f"coincident points {a} and {b}")
        for p in self.punctures:
            if int(p.m) != p.m or p.m < 0:
                raise ValueError(f"puncture multiplicity must be a non-negative integer: {p.m}")
        for t in self.tyurin:
            if not in_group(t.g, self.alg, tol=1e-8):
                raise ValueError("Tyurin conjugator is not in the group")

    @classmethod
    def build(cls, alg, punctures, tyurin=()):
        """Convenience constructor from plain tuples.

        ``punctures`` are ``(z, m)`` pairs; ``tyurin`` are ``(z, h)`` or
        ``(z, h, g)`` with ``h`` accepted by :func:`make_grading_element`.
        """
        P = tuple(Puncture(complex(z), int(m)) for z, m in punctures)
        T = []
        for item in tyurin:
            z, h = item[0], item[1]
            g = item[2] if len(item) > 2 and item[2] is not None else np.eye(alg.d)
            if not isinstance(h, GradingElement):
                h = make_grading_element(h, alg)
            T.append(TyurinPoint(complex(z), h, np.asarray(g, complex)))
        return cls(alg, P, tuple(T))

    @classmethod
    def unchecked(cls, alg, punctures, tyurin=()):
        """Construct without validation (conjugators of intermediate integrator
        stages are only approximately in the group)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "alg", alg)
        object.__setattr__(obj, "punctures", tuple(punctures))
        object.__setattr__(obj, "tyurin", tuple(tyurin))
        return obj

    @property
    def degree(self) -> int:
        return sum(p.m for p in self.punctures)

    @cached_property
    def gradings(self):
        return tuple(grading(self.alg, t.h) for t in self.tyurin)

    def block_layout(self):
        """List of ``(kind, index, order, pole)`` for each coefficient block."""
        blocks = [("const", None, 0, None)]
        for i, p in enumerate(self.punctures):
            blocks += [("P", i, r, complex(p.z)) for r in range(1, p.m + 1)]
        for i, t in enumerate(self.tyurin):
            blocks += [("G", i, r, complex(t.z)) for r in range(1, t.depth + 1)]
        return blocks

    @property
    def n_blocks(self) -> int:
        return len(self.block_layout())

    def with_tyurin(self, tyurin) -> "LaxConfig":
        return LaxConfig(self.alg, self.punctures, tuple(tyurin))

    def poles(self):
        return [complex(p.z) for p in self.punctures if p.m > 0] + \
               [complex(t.z) for t in self.tyurin if t.depth > 0]


@dataclass(frozen=True, eq=False)
class LaxElement:
    config: LaxConfig
    blocks: np.ndarray = field(repr=False)  # (n_blocks, d, d) in block_layout order

    @property
    def A0(self) -> np.ndarray:
        return self.blocks[0]

    def puncture_part(self, i: int) -> np.ndarray:
        return self._select("P", i)

    def tyurin_part(self, i: int) -> np.ndarray:
        return self._select("G", i)

    def _select(self, kind, i):
        idx = [k for k, b in enumerate(self.config.block_layout()) if b[0] == kind and b[1] == i]
        return self.blocks[idx]

    def __add__(self, other):
        return LaxElement(self.config, self.blocks + other.blocks)

    def __sub__(self, other):
        return LaxElement(self.config, self.blocks - other.blocks)

    def __mul__(self, c):
        return LaxElement(self.config, self.blocks * c)

    __rmul__ = __mul__

    def __call__(self, z):
        return evaluate(self, z)

    def coords(self) -> np.ndarray:
        B = self.config.alg.basis
        return np.einsum("kij,bij->bk", B, self.blocks).ravel()

    @classmethod
    def from_coords(cls, config, c) -> "LaxElement":
        B = config.alg.basis
        c = np.asarray(c).reshape(config.n_blocks, len(B))
        return cls(config, np.einsum("bk,kij->bij", c, B).astype(complex))

    @classmethod
    def zero(cls, config) -> "LaxElement":
        d = config.alg.d
        return cls(config, np.zeros((config.n_blocks, d, d), complex))

    def with_config(self, config) -> "LaxElement":
        return LaxElement(config, self.blocks)


def taylor_coefficient(pole: complex, r: int, point: complex, p: int) -> complex:
    """Coefficient of ``(z-point)**p`` in ``(z-pole)**-r`` (``r >= 0``, ``p >= 0``)."""
    c = complex(point) - complex(pole)
    return (-1) ** p * comb(r + p - 1, p) * c ** (-r - p) if r > 0 else (1.0 if p == 0 else 0.0)


def _block_laurent_coeff(block, point, p, tol=POINT_TOL):
    kind, _, r, pole = block
    if kind == "const":
        return 1.0 if p == 0 else 0.0
    if abs(pole - point) < tol:
        return 1.0 if p == -r else 0.0
    if p < 0:
        return 0.0
    return taylor_coefficient(pole, r, point, p)


def evaluate(L: LaxElement, z) -> np.ndarray:
    """Value ``L(z)``; raises if ``z`` is within tolerance of a pole."""
    z = complex(z)
    out = np.array(L.blocks[0], dtype=complex)
    for blk, X in zip(L.config.block_layout()[1:], L.blocks[1:]):
        _, _, r, pole = blk
        if abs(z - pole) < POINT_TOL:
            raise ValueError(f"evaluation point {z} is at a pole {pole}")
        out = out + X * (z - pole) ** (-r)
    return out


def local_expansion(L: LaxElement, point, lo: int | None = None, top: int = 8) -> LaurentMatrix:
    """Exact Laurent coefficients of ``L`` about ``point`` for orders ``lo..top``."""
    point = complex(point)
    blocks = L.config.block_layout()
    if lo is None:
        lo = min([0] + [-b[2] for b in blocks if b[3] is not None and abs(b[3] - point) < POINT_TOL])
    out = np.zeros((top - lo + 1,) + L.blocks.shape[1:], complex)
    for blk, X in zip(blocks, L.blocks):
        for p in range(lo, top + 1):
            s = _block_laurent_coeff(blk, point, p)
            if s != 0:
                out[p - lo] += s * X
    return LaurentMatrix(out, lo, top)


# ---------------------------------------------------------------- constraints


def _constraint_rows(config: LaxConfig, orders_for, rows_out=None):
    """Linear rows over the block-coordinate vector of a rational function.

    ``orders_for(i)`` gives ``(p, mask)`` pairs for Tyurin point ``i``: the
    Laurent coefficient of order ``p`` conjugated by ``g^-1`` must vanish on
    ``mask``.
    """
    alg = config.alg
    Bas = alg.basis
    blocks = config.block_layout()
    nb, dg = len(blocks), len(Bas)
    rows = []
    for i, (t, gr) in enumerate(zip(config.tyurin, config.gradings)):
        T = np.einsum("ab,kbc,cd->kad", t.g_inv, Bas, t.g)  # g^-1 B_k g
        for p, mask in orders_for(i, gr):
            idx = np.argwhere(mask)
            if len(idx) == 0:
                continue
            s = np.array([_block_laurent_coeff(b, complex(t.z), p) for b in blocks])
            Tm = T[:, idx[:, 0], idx[:, 1]].T  # (n_entries, dg)
            R = np.einsum("b,ek->ebk", s, Tm).reshape(len(idx), nb * dg)
            rows.append(R)
    if not rows:
        return np.zeros((0, nb * dg), complex)
    return np.concatenate(rows)


def lax_orders(i, gr):
    k = gr.depth
    return [(p, gr.filtration_mask(p)) for p in range(-k, k)]


@dataclass(frozen=True, eq=False)
class LaxSpace:
    config: LaxConfig
    basis: np.ndarray = field(repr=False)  # (dim, n_coords), orthonormal rows
    singular_values: np.ndarray = field(repr=False)
    gap: float

    @property
    def dim(self) -> int:
        return len(self.basis)

    def element(self, i: int) -> LaxElement:
        return LaxElement.from_coords(self.config, self.basis[i])

    def elements(self):
        return [self.element(i) for i in range(self.dim)]

    def project(self, L: LaxElement) -> LaxElement:
        """Orthogonal projection (in block coordinates) onto the space."""
        c = L.coords()
        V = self.basis
        return LaxElement.from_coords(self.config, V.T @ (V.conj() @ c))


def nullspace(C: np.ndarray, n: int, rel_tol: float = RANK_REL_TOL):
    """Orthonormal nullspace rows, singular values and the rank gap."""
    if C.shape[0] == 0:
        return np.eye(n, dtype=complex), np.zeros(0), np.inf
    _, s, Vh = np.linalg.svd(C, full_matrices=True)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > rel_tol * smax)) if smax > 0 else 0
    if rank < len(s):
        gap = s[rank - 1] / max(s[rank], np.finfo(float).tiny) if rank > 0 else np.inf
    else:
        gap = np.inf
    return Vh[rank:].conj(), s, gap


def build_constraint_system(config: LaxConfig, min_gap: float = 1e3) -> LaxSpace:
    """Basis of the Lax space as the nullspace of the filtration conditions."""
    n = config.n_blocks * config.alg.dim
    C = _constraint_rows(config, lax_orders)
    N, s, gap = nullspace(C, n)
    if gap < min_gap:
        raise RankDecisionError(f"ambiguous rank decision: singular-value gap {gap:.3g}")
    return LaxSpace(config, N, s, gap)


def sample_lax(space: LaxSpace, coefficients=None, seed=None) -> LaxElement:
    """Linear combination of the basis; random complex normal if no coefficients."""
    if space.dim == 0:
        raise ValueError("cannot sample from an empty basis")
    if coefficients is None:
        rng = np.random.default_rng(seed)
        coefficients = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
    c = np.asarray(coefficients, dtype=complex)
    if c.shape != (space.dim,):
        raise ValueError(f"expected {space.dim} coefficients, got {c.shape}")
    return LaxElement.from_coords(space.config, c @ space.basis)


# ---------------------------------------------------------------- Tyurin form


def tyurin_residual(X: LaurentMatrix, h, g=None) -> float:
    """Size of the negative part of ``z^-h g^-1 X g z^h``, relative to ``max(1, |X|)``."""
    if g is not None:
        X = X.lmul_const(np.linalg.inv(g)).rmul_const(g)
    L0 = conjugate_by_z_power(X, h, sign=-1)
    neg = [L0.coeff(p) for p in range(L0.start, min(0, L0.top + 1))]
    if not neg:
        return 0.0
    scale = max(1.0, float(np.max(np.abs(X.coeffs), initial=0.0)))
    return float(np.max(np.abs(np.array(neg)))) / scale


def check_tyurin_form(L: LaxElement, gamma: int, tol: float | None = None) -> float:
    """Residual of the normal form ``L = z^h L0 z^-h`` (``L0`` holomorphic) at a Tyurin point.

    With ``tol`` given, returns the residual only if it is below ``tol``
    and raises otherwise.
    """
    t = L.config.tyurin[gamma]
    k = t.depth
    X = local_expansion(L, t.z, lo=-k, top=2 * k + 8)
    r = tyurin_residual(X, t.h, t.g)
    if tol is not None and r > tol:
        raise ValueError(f"Tyurin-form residual {r:.3g} exceeds {tol:.3g}")
    return r


def filtration_residual(L: LaxElement, gamma: int) -> float:
    """Largest filtration violation among the Laurent coefficients at a Tyurin point."""
    t = L.config.tyurin[gamma]
    gr = L.config.gradings[gamma]
    k = t.depth
    X = local_expansion(L, t.z, lo=-k, top=k)
    scale = max(1.0, float(np.max(np.abs(X.coeffs))))
    worst = 0.0
    for p in range(-k, k):
        Y = t.g_inv @ X.coeff(p) @ t.g
        worst = max(worst, float(np.max(np.abs(Y[gr.filtration_mask(p)]), initial=0.0)))
    return worst / scale


def from_conjugation_form(alg: AlgebraSpec, z_gamma, h, g, pieces: dict, z_p):
    """Global element ``g [sum_q H_q ((z-z_g)/(z-z_p))**q] g^-1``.

    ``pieces`` maps a grade ``q`` to ``H_q`` in ``g_q``.  The result equals
    ``(z-z_g)^{h_g} L0 (z-z_g)^{-h_g}`` with ``L0`` holomorphic at ``z_g``,
    has a pole of order ``depth`` at ``z_p`` and is bounded at infinity.
    Returns ``(config, element)``.
    """
    if not isinstance(h, GradingElement):
        h = make_grading_element(h, alg)
    k = h.depth
    g = np.asarray(g, complex)
    gi = np.linalg.inv(g)
    config = LaxConfig.build(alg, [(z_p, k)], [(z_gamma, h, g)])
    L = LaxElement.zero(config)
    blocks = np.array(L.blocks)
    layout = config.block_layout()
    pos = {(b[0], b[2]): idx for idx, b in enumerate(layout)}
    c_p = complex(z_p) - complex(z_gamma)
    for q, H in pieces.items():
        X = g @ np.asarray(H, complex) @ gi
        if q == 0:
            blocks[0] += X
        elif q > 0:
            for r in range(q + 1):
                coef = comb(q, r) * c_p ** r
                blocks[0 if r == 0 else pos[("P", r)]] += coef * X
        else:
            u = -q
            for r in range(u + 1):
                coef = comb(u, r) * (-c_p) ** r
                blocks[0 if r == 0 else pos[("G", r)]] += coef * X
    return config, LaxElement(config, blocks)
