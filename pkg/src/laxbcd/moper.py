"""M-operators ``M_a`` for triples ``a = (chi, P, m)``.

``M_a`` is a rational matrix function vanishing at infinity with poles only
at the puncture ``P`` and at the Tyurin points.  Its principal part at ``P``
is that of ``F(w) = w^-m grad chi(L(w))`` (``w = z - z_P``), and at every Tyurin
point its Laurent coefficients obey the filtration conditions.  ``M`` is
stored as a :class:`LaxElement` over a configuration in which ``P`` carries
the pole order of ``F`` and the other punctures carry none.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import project_to_algebra
from .invariants import InvariantId, grad_char_coeff_poly, gradient, invariant_degree
from .laurent import LaurentMatrix
from .laxspace import (POINT_TOL, LaxConfig, LaxElement, Puncture,
                       _block_laurent_coeff, local_expansion)
from .spectral import char_coeffs_series

__all__ = [
    "FlowTriple",
    "MOperator",
    "InfeasibleSystemError",
    "TangencyError",
    "pole_order_bound",
    "gradient_field",
    "principal_part_at",
    "principal_part_series",
    "build_m_operator",
    "read_tyurin_data",
    "read_nu_lstsq",
    "matching_residual",
    "holomorphy_residual",
    "tangency_vector",
    "tangency_residual",
]

class InfeasibleSystemError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


class TangencyError(RuntimeError):
    def __init__(self, msg, residual):
        super().__init__(msg)
        self.residual = residual


@dataclass(frozen=True)
class FlowTriple:
    """Invariant ``chi``, puncture index ``puncture`` and weight ``m``."""

    chi: InvariantId
    puncture: int
    m: int

    def validate(self, config: LaxConfig) -> "FlowTriple":
        self.chi.validate(config.alg)
        if not 0 <= self.puncture < len(config.punctures):
            raise ValueError(f"puncture index {self.puncture} out of range")
        mP = config.punctures[self.puncture].m
        if self.m <= -mP:
            raise ValueError(f"m = {self.m} must exceed -m_P = {-mP}")
        return self

    def __str__(self) -> str:
        return f"({self.chi}, P{self.puncture}, m={self.m})"


@dataclass(frozen=True, eq=False)
class MOperator:
    triple: FlowTriple
    element: LaxElement  # over the M-configuration, A0 = C_0
    nu: np.ndarray  # one per Tyurin point
    M0: tuple  # zeroth Laurent coefficient at each Tyurin point
    solve_residual: float
    rank_deficiency: int
    info: dict = field(default_factory=dict, repr=False)

    @property
    def config(self) -> LaxConfig:
        return self.element.config

    @property
    def principal_part(self) -> np.ndarray:
        """Matrices ``C_1..C_R`` of ``(z - z_P)^-r``."""
        return self.element.puncture_part(self.triple.puncture)

    def tyurin_part(self, gamma: int) -> np.ndarray:
        return self.element.tyurin_part(gamma)

    @property
    def C0(self) -> np.ndarray:
        return self.element.A0

    def __call__(self, z):
        return self.element(z)


# ---------------------------------------------------------------- principal parts


def pole_order_bound(L: LaxElement, triple: FlowTriple) -> int:
    """Pole order of ``w^-m grad chi(L)`` at ``P`` (zero if holomorphic)."""
    mP = L.config.punctures[triple.puncture].m
    deg = invariant_degree(triple.chi, L.config.alg)
    return max(0, (deg - 1) * mP + triple.m)


def gradient_field(L: LaxElement, triple: FlowTriple):
    """``z -> (z - z_P)^-m grad chi(L(z))``."""
    alg = L.config.alg
    zP = complex(L.config.punctures[triple.puncture].z)

    def F(z):
        X = L(z)
        # division-free form: L(z) can be badly conditioned on the contour
        if triple.chi.kind == "char_coeff":
            G = grad_char_coeff_poly(X, triple.chi.index, alg)
        else:
            G = gradient(triple.chi, X, alg)
        return (z - zP) ** (-triple.m) * G

    return F


def _singular_points(config, exclude):
    pts = [complex(p.z) for p in config.punctures] + [complex(t.z) for t in config.tyurin]
    return [p for p in pts if abs(p - exclude) > POINT_TOL]


def principal_part_at(F, z0, depth: int, radius: float | None = None, n_nodes: int = 128,
                      singularities=()) -> np.ndarray:
    """Coefficients of ``(z-z0)^-1 .. (z-z0)^-depth`` of ``F`` at ``z0``.

    ``F`` is a :class:`LaxElement` or a :class:`LaurentMatrix` about ``z0``
    (exact) or a callable, in which case the trapezoidal rule on a circle of
    ``radius`` is used; the default radius is half the distance to the
    nearest of ``singularities``.  Returns an array of shape ``(depth, d, d)``
    with entry ``r-1`` the coefficient of order ``-r``.
    """
    z0 = complex(z0)
    if isinstance(F, LaxElement):
        F = local_expansion(F, z0, lo=-max(depth, 1), top=0)
    if isinstance(F, LaurentMatrix):
        return np.array([F.coeff(-r) for r in range(1, depth + 1)]).reshape((depth,) + F.shape)
    dist = min([abs(s - z0) for s in singularities], default=np.inf)
    if radius is None:
        radius = 0.5 * dist if np.isfinite(dist) else 1.0
    if radius >= dist:
        raise ValueError(f"contour radius {radius:.3g} reaches a singularity at distance {dist:.3g}")
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    w = radius * np.exp(1j * theta)
    vals = np.array([F(z0 + x) for x in w])
    if depth == 0:
        return np.zeros((0,) + vals.shape[1:], complex)
    out = np.array([np.einsum("k,kij->ij", w ** r, vals) / n_nodes for r in range(1, depth + 1)])
    return out


def _series_scalar_matrix(s, d):
    c = np.asarray(s.coeffs)[:, None, None] * np.eye(d)[None]
    return LaurentMatrix(c, s.start, s.top)


def principal_part_series(L: LaxElement, triple: FlowTriple) -> np.ndarray:
    """Exact principal part of ``w^-m grad chi(L)`` by Laurent-series arithmetic.

    Uses the division-free form ``-sum_{j<D} c_j L^(D-j-1)``; available for
    ``char_coeff`` and ``trace_power`` invariants.
    """
    cfg = L.config
    alg = cfg.alg
    chi = triple.chi
    P = cfg.punctures[triple.puncture]
    R = pole_order_bound(L, triple)
    D = invariant_degree(chi, alg)
    d = alg.d
    top = max(2, triple.m + (D - 2) * P.m + 2)
    Lx = local_expansion(L, P.z, lo=-P.m, top=top)
    eye = LaurentMatrix(np.eye(d)[None], 0, top + D * P.m + 4)
    powers = [eye]
    for _ in range(D - 1):
        powers.append(powers[-1] @ Lx)
    if chi.kind == "trace_power":
        G = powers[D - 1].scale(D)
    elif chi.kind == "char_coeff":
        c = char_coeffs_series(Lx)
        G = powers[D - 1].scale(-1.0)
        for j in range(1, D):
            G = G - _series_scalar_matrix(c[j - 1], d) @ powers[D - j - 1]
    else:
        raise ValueError(f"no series form for {chi.kind}")
    G = G.shift(-triple.m)
    out = np.array([project_to_algebra(G.coeff(-r), alg) for r in range(1, R + 1)])
    return out.reshape((R, d, d))


# ---------------------------------------------------------------- construction


def m_config(L: LaxElement, triple: FlowTriple) -> LaxConfig:
    R = pole_order_bound(L, triple)
    cfg = L.config
    P = tuple(Puncture(p.z, R if i == triple.puncture else 0) for i, p in enumerate(cfg.punctures))
    return LaxConfig.unchecked(cfg.alg, P, cfg.tyurin)


def _order_rows(config, gamma, p, mask):
    """Rows mapping block coordinates to ``(g^-1 X_p g)[mask]`` at Tyurin point ``gamma``."""
    alg = config.alg
    Bas = alg.basis
    t = config.tyurin[gamma]
    T = np.einsum("ab,kbc,cd->kad", t.g_inv, Bas, t.g)
    idx = np.argwhere(mask)
    s = np.array([_block_laurent_coeff(b, complex(t.z), p) for b in config.block_layout()])
    Tm = T[:, idx[:, 0], idx[:, 1]].T
    return np.einsum("b,ek->ebk", s, Tm).reshape(len(idx), -1), idx


def tangency_vector(L: LaxElement, M: LaxElement, nu, pole_check: int | None = None):
    """Residual entries of the linearized Lax-space constraints along ``(L, M, nu)``.

    At each Tyurin point with depth ``k`` and ``xi = -g^-1 M_0 g`` the entries
    ``g^-1 ([L,M]_p + nu (p+1) L_(p+1)) g + [g^-1 L_p g, xi]`` on the filtration
    mask of order ``p`` (all entries for ``p < -k``), ``-2k <= p < k``.
    With ``pole_check`` set to a puncture index, appends the Laurent
    coefficients of ``[L, M]`` of orders below ``-m_P`` there.  Returns
    ``(vector, scale)`` where ``scale`` is the size of ``|L| |M|``.
    """
    cfg = L.config
    parts = []
    scale = 1.0
    for gi_, (t, gr) in enumerate(zip(cfg.tyurin, cfg.gradings)):
        k = t.depth
        top = 2 * k + 2
        Lx = local_expansion(L, t.z, lo=-k, top=top)
        Mx = local_expansion(M, t.z, lo=-k, top=top)
        scale = max(scale, float(np.abs(Lx.coeffs).max()) * float(np.abs(Mx.coeffs).max()))
        C = Lx.commutator(Mx)
        g, gi = t.g, t.g_inv
        xi = -gi @ Mx.coeff(0) @ g
        for p in range(-2 * k, k):
            Y = gi @ Lx.coeff(p) @ g
            Z = gi @ (C.coeff(p) + nu[gi_] * (p + 1) * Lx.coeff(p + 1)) @ g + Y @ xi - xi @ Y
            mask = np.ones(Z.shape, bool) if p < -k else gr.filtration_mask(p)
            parts.append(Z[mask])
    if pole_check is not None:
        P = cfg.punctures[pole_check]
        R = M.config.punctures[pole_check].m
        if R > 0:
            Lx = local_expansion(L, P.z, lo=-P.m, top=R + 2)
            Mx = local_expansion(M, P.z, lo=-R, top=P.m + 2)
            scale = max(scale, float(np.abs(Lx.coeffs).max()) * float(np.abs(Mx.coeffs).max()))
            C = Lx.commutator(Mx)
            parts += [C.coeff(q).ravel() for q in range(-P.m - R, -P.m)]
    vec = np.concatenate(parts) if parts else np.zeros(0, complex)
    return vec, scale


def _solve(A, b, rel_tol=1e-11):
    x, *_ = np.linalg.lstsq(A, b, rcond=rel_tol)
    s = np.linalg.svd(A, compute_uv=False) if A.size else np.zeros(0)
    rank = int(np.sum(s > rel_tol * s[0])) if len(s) and s[0] > 0 else 0
    return x, A.shape[1] - rank


def build_m_operator(L: LaxElement, triple: FlowTriple, n_nodes: int = 128, principal=None,
                     check_tol: float | None = 1e-8, feasibility_tol: float = 1e-8) -> MOperator:
    """Solve for ``M_a`` at ``L``.

    Unknowns are the principal parts ``D_(gamma,p)`` and ``nu_gamma`` at the
    Tyurin points.  Imposed:

    * the principal part at ``P`` equals that of ``w^-m grad chi(L(w))``
      (contour quadrature, or ``principal`` if given);
    * ``C_0 = 0``, so ``M(inf) = 0``;
    * at each Tyurin point ``g^-1 (M_-1 - nu h_gamma) g`` and ``g^-1 M_p g``
      (``-k <= p < -1``) lie in the filtration, and ``g^-1 M_p g`` does for
      ``1 <= p < k`` (order 0 is absorbed by the motion of ``g``).

    The orders ``1 <= p < k`` get no contribution from the unknowns; when
    they fail (a depth >= 2 grading together with poles of ``L`` at other
    punctures) :class:`InfeasibleSystemError` is raised with the defect.
    The remaining system is solved in the minimum-norm sense.  With
    ``check_tol`` set, a tangency residual above it raises
    :class:`TangencyError`.
    """
    triple.validate(L.config)
    cfg = L.config
    alg = cfg.alg
    dg = alg.dim
    Mcfg = m_config(L, triple)
    R = Mcfg.punctures[triple.puncture].m
    layout = Mcfg.block_layout()
    nb = len(layout)
    zP = complex(cfg.punctures[triple.puncture].z)
    if principal is None:
        principal = principal_part_at(gradient_field(L, triple), zP, R, n_nodes=n_nodes,
                                      singularities=_singular_points(cfg, zP))
    principal = np.array([project_to_algebra(X, alg) for X in principal]).reshape((R, alg.d, alg.d))

    fixed = np.zeros((nb, dg), complex)
    p_idx = [i for i, b in enumerate(layout) if b[0] == "P"]
    fixed[p_idx] = np.einsum("rij,kij->rk", principal, alg.basis)
    g_idx = [i for i, b in enumerate(layout) if b[0] == "G"]
    unk_cols = np.concatenate([np.arange(i * dg, (i + 1) * dg) for i in g_idx]) if g_idx else np.zeros(0, int)
    nt = len(cfg.tyurin)
    nu_ = len(unk_cols)
    n_unk = nu_ + nt
    f = fixed.ravel()
    fscale = max(1.0, float(np.abs(principal).max(initial=0.0)))

    rows, rhs = [], []
    defect = 0.0
    for gm, (t, gr) in enumerate(zip(Mcfg.tyurin, Mcfg.gradings)):
        k = t.depth
        for p in range(-k, k):
            if p == 0:
                continue
            A, idx = _order_rows(Mcfg, gm, p, gr.filtration_mask(p))
            if len(idx) == 0:
                continue
            if p > 0:
                defect = max(defect, float(np.abs(A @ f).max()) / fscale)
                continue
            row = np.zeros((len(idx), n_unk), complex)
            row[:, :nu_] = A[:, unk_cols]
            if p == -1:
                row[:, nu_ + gm] = -t.h.matrix[idx[:, 0], idx[:, 1]]
            rows.append(row)
            rhs.append(-A @ f)
    if defect > feasibility_tol:
        raise InfeasibleSystemError(
            f"M-operator system infeasible: positive-order filtration defect {defect:.3g}", defect)

    if rows and n_unk:
        A = np.concatenate(rows)
        b = np.concatenate(rhs)
        x, deficiency = _solve(A, b)
        res = float(np.abs(A @ x - b).max(initial=0.0)) / fscale
    else:
        x, deficiency, res = np.zeros(n_unk, complex), n_unk, 0.0
    if res > feasibility_tol:
        raise InfeasibleSystemError(f"M-operator system infeasible (residual {res:.3g})", res)
    blocks = f.copy()
    blocks[unk_cols] = x[:nu_]
    el = LaxElement.from_coords(Mcfg, blocks)
    nu = np.asarray(x[nu_:], complex)
    M0 = tuple(local_expansion(el, t.z, lo=-t.depth, top=0).coeff(0) for t in Mcfg.tyurin)
    M = MOperator(triple, el, nu, M0, max(res, defect), deficiency)
    if check_tol is not None:
        tr = tangency_residual(L, M)
        if tr > check_tol:
            raise TangencyError(f"tangency residual {tr:.3g} exceeds {check_tol:.3g}", tr)
    return M


# ---------------------------------------------------------------- read-outs and checks


def read_tyurin_data(M: MOperator, gamma: int):
    """``(nu, M_0)`` at Tyurin point ``gamma``: ``nu = tr(h Res M) / tr(h^2)``."""
    t = M.config.tyurin[gamma]
    H = t.h_matrix
    hh = np.trace(H @ H)
    if abs(hh) == 0:
        raise ValueError("grading element is zero")
    X = local_expansion(M.element, t.z, lo=-max(t.depth, 1), top=0)
    return complex(np.trace(H @ X.coeff(-1)) / hh), X.coeff(0)


def read_nu_lstsq(M: MOperator, gamma: int) -> complex:
    """``nu`` from least squares of the residue against ``h`` on the non-negative grades."""
    t = M.config.tyurin[gamma]
    gr = M.config.gradings[gamma]
    X = local_expansion(M.element, t.z, lo=-max(t.depth, 1), top=0).coeff(-1)
    Y = t.g_inv @ X @ t.g
    mask = gr.filtration_mask(-1)
    h = t.h.matrix[mask]
    if not np.any(h):
        raise ValueError("grading element is zero")
    return complex(np.vdot(h, Y[mask]) / np.vdot(h, h))


def matching_residual(L: LaxElement, M: MOperator, radius_factor: float = 0.6,
                      n_nodes: int = 160) -> float:
    """Principal part of ``M - w^-m grad chi(L)`` at ``P``, relative to ``max(1, |C|)``.

    The reference principal part is recomputed on a different contour.
    """
    cfg = L.config
    zP = complex(cfg.punctures[M.triple.puncture].z)
    R = M.config.punctures[M.triple.puncture].m
    if R == 0:
        return 0.0
    sing = _singular_points(cfg, zP)
    dist = min([abs(s - zP) for s in sing], default=2.0)
    ref = principal_part_at(gradient_field(L, M.triple), zP, R, radius=radius_factor * dist,
                            n_nodes=n_nodes)
    mine = principal_part_at(M.element, zP, R)
    scale = max(1.0, float(np.abs(ref).max()))
    return float(np.abs(mine - ref).max()) / scale


def holomorphy_residual(M: MOperator, L: LaxElement | None = None, n_nodes: int = 64) -> float:
    """Largest principal part of ``M`` at the punctures other than ``P``.

    Evaluated on contours (independent of the stored representation);
    relative to ``max(1, |M|)`` on the contours.
    """
    cfg = M.config
    worst = 0.0
    for i, p in enumerate(cfg.punctures):
        if i == M.triple.puncture:
            continue
        sing = _singular_points(cfg, complex(p.z))
        depth = max(1, (L.config.punctures[i].m if L is not None else 1))
        q = principal_part_at(lambda z: M(z), p.z, depth, n_nodes=n_nodes, singularities=sing)
        dist = min([abs(s - complex(p.z)) for s in sing], default=2.0)
        vals = max(float(np.abs(M(complex(p.z) + 0.5 * dist)).max()), 1.0)
        worst = max(worst, float(np.abs(q).max()) / vals)
    return worst


def tangency_residual(L: LaxElement, M: MOperator) -> float:
    """Largest violation of the linearized Lax-space constraints, relative to ``|L| |M|``."""
    vec, scale = tangency_vector(L, M.element, M.nu, pole_check=M.triple.puncture)
    if len(vec) == 0:
        return 0.0
    return float(np.abs(vec).max()) / scale
