"""Integration of ``L' = [L, M_a]`` together with the Tyurin data.

The state holds the partial-fraction blocks of ``L``, the Tyurin positions
``z_gamma`` and conjugators ``g_gamma`` (so ``h_gamma = g h g^-1``).  Along a
flow ``z_gamma' = nu_gamma`` and ``g_gamma' = -M_0 g_gamma``; the blocks at a
Tyurin point follow the moving pole.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .algebra import project_to_algebra, project_to_group
from .laxspace import (LaxConfig, LaxElement, build_constraint_system, check_tyurin_form,
                       local_expansion)
from .moper import FlowTriple, MOperator, build_m_operator
from .spectral import basis_coeffs, char_coeffs, sample_circle

__all__ = [
    "FlowState",
    "Checkpoint",
    "FlowDiagnostics",
    "FlowResult",
    "StepSizeUnderflow",
    "DriftBlowup",
    "rhs",
    "rk4_step",
    "integrate",
    "spectral_samples",
    "state_distance",
    "commutation_check",
    "write_diagnostics_csv",
]


class StepSizeUnderflow(RuntimeError):
    def __init__(self, msg, last_state):
        super().__init__(msg)
        self.last_state = last_state


class DriftBlowup(RuntimeError):
    def __init__(self, msg, last_state):
        super().__init__(msg)
        self.last_state = last_state


@dataclass(frozen=True, eq=False)
class FlowState:
    """``L`` (whose configuration carries ``z_gamma``, ``g_gamma``) at time ``t``."""

    L: LaxElement
    t: float = 0.0

    @property
    def config(self) -> LaxConfig:
        return self.L.config

    @property
    def z(self) -> np.ndarray:
        return np.array([complex(tp.z) for tp in self.config.tyurin])

    @property
    def g(self) -> tuple:
        return tuple(tp.g for tp in self.config.tyurin)

    def h_matrices(self) -> tuple:
        return tuple(tp.h_matrix for tp in self.config.tyurin)

    def vector(self) -> np.ndarray:
        parts = [self.L.blocks.ravel(), self.z] + [g.ravel() for g in self.g]
        return np.concatenate(parts).astype(complex)

    def from_vector(self, v, t: float, checked: bool = False) -> "FlowState":
        """State with this state's structure and the entries of ``v``."""
        cfg = self.config
        nb = self.L.blocks.size
        nt = len(cfg.tyurin)
        d = cfg.alg.d
        blocks = v[:nb].reshape(self.L.blocks.shape)
        z = v[nb:nb + nt]
        gs = v[nb + nt:].reshape(nt, d, d)
        tyurin = [tp.moved(z=z[i], g=gs[i]) for i, tp in enumerate(cfg.tyurin)]
        if checked:
            new = LaxConfig(cfg.alg, cfg.punctures, tuple(tyurin))
        else:
            new = LaxConfig.unchecked(cfg.alg, cfg.punctures, tyurin)
        return FlowState(LaxElement(new, np.array(blocks)), float(t))


def _commutator_parts(L: LaxElement, M: MOperator):
    """Principal parts of ``[L, M]`` at the punctures and Tyurin points."""
    cfg = L.config
    out_p, out_g = {}, {}
    for i, p in enumerate(cfg.punctures):
        if p.m == 0:
            continue
        R = M.config.punctures[i].m
        Lx = local_expansion(L, p.z, lo=-p.m, top=R + 1)
        Mx = local_expansion(M.element, p.z, lo=-max(R, 1), top=p.m + 1)
        out_p[i] = Lx.commutator(Mx)
    for i, t in enumerate(cfg.tyurin):
        k = t.depth
        Lx = local_expansion(L, t.z, lo=-k, top=k + 1)
        Mx = local_expansion(M.element, t.z, lo=-k, top=k + 1)
        out_g[i] = Lx.commutator(Mx)
    return out_p, out_g


def rhs(state: FlowState, triple: FlowTriple, n_nodes: int = 128, check_tol: float | None = 1e-8,
        feasibility_tol: float = 1e-8, return_m: bool = False):
    """Time derivative of ``state.vector()`` along the flow of ``triple``.

    Blocks: ``A_(P,r)' = [L,M]_(-r)`` at each puncture, ``A_0' = [A_0, C_0]``,
    and at a Tyurin point ``B_q' = [L,M]_(-q) - (q-1) nu B_(q-1)`` (the
    second term transports the pole).  ``z' = nu`` and ``g' = -M_0 g``.
    ``check_tol`` and ``feasibility_tol`` are passed to
    :func:`build_m_operator`.
    """
    L = state.L
    cfg = L.config
    alg = cfg.alg
    M = build_m_operator(L, triple, n_nodes=n_nodes, check_tol=check_tol,
                         feasibility_tol=feasibility_tol)
    layout = cfg.block_layout()
    dB = np.zeros_like(L.blocks)
    dB[0] = L.A0 @ M.C0 - M.C0 @ L.A0
    cp, cg = _commutator_parts(L, M)
    for b, (kind, i, r, _) in enumerate(layout):
        if kind == "P":
            dB[b] = cp[i].coeff(-r)
        elif kind == "G":
            dB[b] = cg[i].coeff(-r)
            if r > 1:
                prev = layout.index(("G", i, r - 1, layout[b][3]))
                dB[b] -= (r - 1) * M.nu[i] * L.blocks[prev]
    for b in range(len(dB)):
        dB[b] = project_to_algebra(dB[b], alg)
    dz = np.asarray(M.nu, complex)
    dg = [-M.M0[i] @ t.g for i, t in enumerate(cfg.tyurin)]
    v = np.concatenate([dB.ravel(), dz] + [x.ravel() for x in dg])
    return (v, M) if return_m else v


def rk4_step(state: FlowState, triple: FlowTriple, dt: float, **kw) -> FlowState:
    """One classical Runge-Kutta step (no re-projection).

    Feasibility and tangency of ``M`` are checked at the initial stage only:
    the intermediate stages satisfy the Lax constraints only to ``O(dt^2)``.
    """
    y = state.vector()
    t = state.t
    k1 = rhs(state, triple, **kw)
    kw = dict(kw, check_tol=None, feasibility_tol=np.inf)
    k2 = rhs(state.from_vector(y + 0.5 * dt * k1, t + 0.5 * dt), triple, **kw)
    k3 = rhs(state.from_vector(y + 0.5 * dt * k2, t + 0.5 * dt), triple, **kw)
    k4 = rhs(state.from_vector(y + dt * k3, t + dt), triple, **kw)
    return state.from_vector(y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), t + dt)


def _reproject(state: FlowState, project_lax: bool = True) -> FlowState:
    """Conjugators back onto the group, then ``L`` onto the Lax space they define."""
    cfg = state.config
    alg = cfg.alg
    tyurin = tuple(tp.moved(g=project_to_group(tp.g, alg)) for tp in cfg.tyurin)
    new = LaxConfig(alg, cfg.punctures, tyurin)
    L = LaxElement(new, state.L.blocks)
    if project_lax and tyurin:
        L = build_constraint_system(new).project(L)
    return FlowState(L, state.t)


# ---------------------------------------------------------------- diagnostics


def spectral_samples(config: LaxConfig, count: int = 8) -> np.ndarray:
    """Fixed sample points for the spectral invariants, away from all poles."""
    pts, _, _ = sample_circle(config, count, phase=0.25)
    return pts


def _r_values(L: LaxElement, pts) -> np.ndarray:
    fam = L.config.alg.family
    return np.array([basis_coeffs(char_coeffs(L(q)), fam) for q in pts])


@dataclass(frozen=True)
class Checkpoint:
    t: float
    r_drift: float  # max_j,q |r_j(q,t) - r_j(q,0)| / max(1, |r_j(q,0)|)
    membership: float  # max over blocks of |X + sigma X^T sigma^-1|
    tyurin_residual: float  # largest over the steps, before re-projection
    h_eig_dev: float  # max |eig(h_gamma(t)) - h|
    group_residual: float  # max |g^T sigma g - sigma| before re-projection
    steps: int
    rejected: int
    dt_min: float
    dt_max: float


@dataclass
class FlowDiagnostics:
    checkpoints: list = field(default_factory=list)

    def max(self, name: str) -> float:
        return max((getattr(c, name) for c in self.checkpoints), default=0.0)

    def as_rows(self):
        names = list(Checkpoint.__dataclass_fields__)
        return names, [[getattr(c, n) for n in names] for c in self.checkpoints]


@dataclass
class FlowResult:
    states: list  # FlowState at t = 0 and at each checkpoint
    diagnostics: FlowDiagnostics

    @property
    def final(self) -> FlowState:
        return self.states[-1]


def _membership(L: LaxElement) -> float:
    alg = L.config.alg
    if alg.family == "A":
        return 0.0
    return max(float(np.abs(X + alg.sigma @ X.T @ alg.sigma_inv).max()) for X in L.blocks)


def _group_residual(state: FlowState) -> float:
    alg = state.config.alg
    if alg.family == "A":
        return 0.0
    return max((float(np.abs(g.T @ alg.sigma @ g - alg.sigma).max()) for g in state.g), default=0.0)


def _h_eig_dev(state: FlowState) -> float:
    worst = 0.0
    for tp in state.config.tyurin:
        ev = np.sort_complex(np.linalg.eigvals(tp.h_matrix))
        ref = np.sort_complex(tp.h.diag.astype(complex))
        worst = max(worst, float(np.abs(ev - ref).max()))
    return worst


def _tyurin_residual(L: LaxElement) -> float:
    return max((check_tyurin_form(L, i) for i in range(len(L.config.tyurin))), default=0.0)


# ---------------------------------------------------------------- integration


def integrate(state0: FlowState, triple: FlowTriple, t_end: float, dt: float,
              tol: float | None = 1e-10, n_checkpoints: int = 10, n_samples: int = 8,
              n_nodes: int = 128, check_tol: float | None = 1e-8, min_dt: float = 1e-8,
              blowup: float = 1e-4, samples=None, project_lax: bool = True) -> FlowResult:
    """Integrate to ``t_end`` with steps of at most ``dt``.

    With ``tol`` set, each step is compared against two half steps and
    halved until the difference (relative to ``max(1, |y|)``) is below
    ``tol``; the two-half-step result is kept.  ``tol=None`` gives plain
    fixed-step RK4.  After each accepted step the conjugators are
    re-projected onto the group and, with ``project_lax``, ``L`` onto the Lax
    space of the new Tyurin data; the recorded Tyurin-form and group
    residuals are those before re-projection.  Diagnostics are recorded at ``n_checkpoints`` equally
    spaced times; drift beyond ``blowup`` or a step below ``min_dt * |t_end|``
    aborts with the last good state attached to the exception.
    """
    if t_end == 0:
        diag = FlowDiagnostics([Checkpoint(state0.t, 0.0, _membership(state0.L),
                                           _tyurin_residual(state0.L), _h_eig_dev(state0),
                                           _group_residual(state0), 0, 0, 0.0, 0.0)])
        return FlowResult([state0], diag)
    if dt <= 0:
        raise ValueError("dt must be positive")
    kw = dict(n_nodes=n_nodes, check_tol=check_tol)
    pts = spectral_samples(state0.config, n_samples) if samples is None else np.asarray(samples)
    r0 = _r_values(state0.L, pts)
    rscale = np.maximum(1.0, np.abs(r0))
    t0 = state0.t
    interval = t_end / n_checkpoints
    n_sub = max(1, int(np.ceil(abs(interval) / dt - 1e-9)))
    h_nom = interval / n_sub
    floor = min_dt * abs(t_end)

    state = state0
    states = [state0]
    diag = FlowDiagnostics()
    for c in range(1, n_checkpoints + 1):
        t_target = t0 + c * interval
        steps = rejected = 0
        hs = []
        grp = tyu = 0.0
        while abs(t_target - state.t) > 1e-12 * max(1.0, abs(t_end)):
            h = min(abs(h_nom), abs(t_target - state.t)) * np.sign(t_end)
            while True:
                if abs(h) < floor:
                    raise StepSizeUnderflow(f"step size {abs(h):.3g} below {floor:.3g} at t={state.t:.6g}",
                                            state)
                if tol is None:
                    new = rk4_step(state, triple, h, **kw)
                    break
                full = rk4_step(state, triple, h, **kw)
                half = rk4_step(rk4_step(state, triple, h / 2, **kw), triple, h / 2, **kw)
                y = half.vector()
                defect = float(np.abs(full.vector() - y).max()) / max(1.0, float(np.abs(y).max()))
                if defect < tol:
                    new = half
                    break
                rejected += 1
                h /= 2
            grp = max(grp, _group_residual(new))
            tyu = max(tyu, _tyurin_residual(new.L))
            state = _reproject(new, project_lax)
            steps += 1
            hs.append(abs(h))
        state = FlowState(state.L, t_target)
        r = _r_values(state.L, pts)
        cp = Checkpoint(t=float(t_target), r_drift=float((np.abs(r - r0) / rscale).max()),
                        membership=_membership(state.L), tyurin_residual=tyu,
                        h_eig_dev=_h_eig_dev(state), group_residual=grp, steps=steps,
                        rejected=rejected, dt_min=min(hs), dt_max=max(hs))
        worst = max(cp.r_drift, cp.membership / max(1.0, float(np.abs(state.L.blocks).max())),
                    cp.tyurin_residual)
        if not np.isfinite(worst) or worst > blowup:
            raise DriftBlowup(f"constraint drift {worst:.3g} exceeds {blowup:.3g} at t={t_target:.6g}",
                              states[-1])
        diag.checkpoints.append(cp)
        states.append(state)
    return FlowResult(states, diag)


def _flow_to(state, triple, t, dt, **kw):
    return integrate(state, triple, t, dt, tol=None, n_checkpoints=1, **kw).final


def state_distance(a: FlowState, b: FlowState) -> float:
    """Distance modulo the stabilizer of ``h`` in the conjugators.

    Compares the blocks of ``L``, the Tyurin positions and ``h_gamma = g h g^-1``
    (invariant under ``g -> g c`` with ``c`` commuting with ``h``).
    """
    d = float(np.abs(a.L.blocks - b.L.blocks).max())
    if len(a.config.tyurin):
        d = max(d, float(np.abs(a.z - b.z).max()))
        for ha, hb in zip(a.h_matrices(), b.h_matrices()):
            d = max(d, float(np.abs(ha - hb).max()))
    return d


def commutation_check(state0: FlowState, a1: FlowTriple, a2: FlowTriple, t: float, dt: float,
                      **kw) -> float:
    """``|Phi_a1^t Phi_a2^t (s) - Phi_a2^t Phi_a1^t (s)|`` with fixed-step RK4."""
    if a1 == a2:
        return 0.0
    s12 = _flow_to(_flow_to(state0, a2, t, dt, **kw), a1, t, dt, **kw)
    s21 = _flow_to(_flow_to(state0, a1, t, dt, **kw), a2, t, dt, **kw)
    return state_distance(s12, s21)


def write_diagnostics_csv(path, diag: FlowDiagnostics):
    names, rows = diag.as_rows()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in rows:
            w.writerow([f"{x:.12e}" if isinstance(x, float) else x for x in row])
