"""End-to-end acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed to the
terminal) or directly with ``python tests/test_acceptance.py``.
"""
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import sympy

sys.path.insert(0, str(Path(__file__).parent))

from conftest import b2_instance, c2_instance, tyurin_instance  # noqa: E402
from laxbcd.algebra import grading, is_member, make_algebra, random_group_element, random_member  # noqa: E402
from laxbcd.baker import BranchPointError, IsotropicPivotError, eigen_frame, orthonormalize, series_orthogonalize  # noqa: E402
from laxbcd.flow import FlowState, commutation_check, integrate  # noqa: E402
from laxbcd.invariants import InvariantId, basis_invariants, fd_gradient, gradient  # noqa: E402
from laxbcd.laurent import LaurentSeries, series_leading_order  # noqa: E402
from laxbcd.laxspace import (LaxConfig, LaxElement, build_constraint_system, check_tyurin_form,  # noqa: E402
                             from_conjugation_form, sample_lax)
from laxbcd.moper import (FlowTriple, build_m_operator, holomorphy_residual,  # noqa: E402
                          matching_residual, tangency_residual)
from laxbcd.spectral import involution_defect, reconstruct_rational, sample_circle  # noqa: E402
from laxbcd.theta import ThetaParams, random_period_matrix, theta  # noqa: E402

_printer = print


def report(number, ok, detail):
    _printer(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(autouse=True)
def _show(capsys):
    global _printer

    def emit(line):
        with capsys.disabled():
            print("\n" + line)

    _printer = emit
    yield
    _printer = print


# ---------------------------------------------------------------- 1


def test_criterion_01_gradients():
    t0 = time.time()
    worst = 0.0
    for fam, n in [("B", 2), ("C", 2), ("D", 2), ("D", 3)]:
        alg = make_algebra(fam, n)
        rng = np.random.default_rng([1, n, ord(fam)])
        for _ in range(100):
            X = random_member(alg, rng)
            for chi in basis_invariants(alg):
                G, F = gradient(chi, X, alg), fd_gradient(chi, X, alg)
                worst = max(worst, float(np.abs(G - F).max() / np.abs(F).max()))
    elapsed = time.time() - t0
    ok = worst < 1e-6 and elapsed < 60
    report(1, ok, f"max relative error {worst:.2e} (< 1e-6), {elapsed:.1f} s (< 60 s)")
    assert ok


# ---------------------------------------------------------------- 2


CURVE_CASES = [("B", 2, [1, 0]), ("C", 2, [1, 0]), ("D", 3, [1, 0, 0])]


def test_criterion_02_spectral_curve():
    inv = fit = det = 0.0
    for fam, n, h in CURVE_CASES:
        alg = make_algebra(fam, n)
        for k in range(20):
            rng = np.random.default_rng([2, k, ord(fam)])
            g = random_group_element(alg, rng, 0.3)
            cfg = LaxConfig.build(alg, [(0, 1), (2 + 0.5j, 2)], [(1 + 1j, h, g)])
            L = sample_lax(build_constraint_system(cfg), seed=k)
            qs, _, _ = sample_circle(cfg, 16, phase=0.3)
            inv = max(inv, involution_defect(L, qs))
            for j in range(1, alg.d + 1):
                fit = max(fit, reconstruct_rational(L, j, raise_on_fail=False)[1])
            if fam == "B":
                for q in qs:
                    X = L(q)
                    det = max(det, abs(np.linalg.det(X)) / max(1, np.abs(X).max()) ** alg.d)
    ok = inv < 1e-10 and fit < 1e-8 and det < 1e-10
    report(2, ok, f"involution defect {inv:.2e} (< 1e-10), fit residual {fit:.2e} (< 1e-8), "
                  f"B determinant {det:.2e}")
    assert ok


# ---------------------------------------------------------------- 3


TYURIN_CASES = [("B", 2, [1, 0]), ("B", 2, [2, 1]), ("C", 2, [1, 0]), ("C", 2, [1, 1]),
                ("D", 2, [1, 1]), ("D", 3, [1, 0, 0]), ("D", 3, [2, 1, 1])]


def test_criterion_03_tyurin_form():
    round_trip, detected = 0.0, np.inf
    for fam, n, h in TYURIN_CASES:
        alg = make_algebra(fam, n)
        gr = grading(alg, h)
        for k in range(5):
            rng = np.random.default_rng([3, k, ord(fam), sum(h)])
            g = random_group_element(alg, rng, 0.4)
            pieces = {q: np.einsum("k,kij->ij", rng.standard_normal(len(B)) + 1j * rng.standard_normal(len(B)), B)
                      for q, B in gr.pieces.items()}
            cfg, L = from_conjugation_form(alg, 1 + 1j, h, g, pieces, 0.0)
            round_trip = max(round_trip, check_tyurin_form(L, 0))
            # corrupt the most singular coefficient by a generic member
            bad = LaxElement(cfg, L.blocks.copy())
            idx = [i for i, b in enumerate(cfg.block_layout()) if b[0] == "G" and b[2] == gr.depth][0]
            bad.blocks[idx] += 1e-2 * random_member(alg, rng)
            detected = min(detected, check_tyurin_form(bad, 0))
    ok = round_trip < 1e-10 and detected > 1e-4
    report(3, ok, f"round trip {round_trip:.2e} (< 1e-10), smallest corrupted residual {detected:.2e} (> 1e-4)")
    assert ok


# ---------------------------------------------------------------- 4 and 5


FLOW_INSTANCES = {"B2": b2_instance, "C2": c2_instance}
_flow_runs = {}


def _flow(name, index, dt):
    key = (name, index, dt)
    if key not in _flow_runs:
        triple = FlowTriple(InvariantId("char_coeff", index), 0, 0)
        t0 = time.time()
        res = integrate(FlowState(FLOW_INSTANCES[name](seed=0)), triple, 0.5, dt, tol=None,
                        n_checkpoints=10)
        _flow_runs[key] = (res, time.time() - t0)
    return _flow_runs[key]


@pytest.mark.parametrize("name", ["B2", "C2"])
def test_criterion_04_isospectral_flow(name):
    lines, ok = [], True
    for index in (1, 2):
        coarse, t1 = _flow(name, index, 0.025)
        fine, t2 = _flow(name, index, 0.0125)
        D = fine.diagnostics
        drift = D.max("r_drift")
        ratio = coarse.diagnostics.max("r_drift") / drift
        good = (len(D.checkpoints) == 10 and drift < 1e-6 and 12 <= ratio <= 20
                and t1 + t2 < 300)
        ok &= good
        lines.append(f"r_{index}: drift {drift:.2e}, halving ratio {ratio:.1f}, {t1 + t2:.0f} s")
    report(4, ok, f"{name} " + "; ".join(lines))
    assert ok


@pytest.mark.parametrize("name", ["B2", "C2"])
def test_criterion_05_tyurin_dynamics(name):
    eig = tyu = 0.0
    moved = 0.0
    for index in (1, 2):
        res, _ = _flow(name, index, 0.0125)
        eig = max(eig, res.diagnostics.max("h_eig_dev"))
        tyu = max(tyu, res.diagnostics.max("tyurin_residual"))
        for s in res.states:
            tyu = max(tyu, check_tyurin_form(s.L, 0))
        moved = max(moved, float(np.abs(res.final.h_matrices()[0] - res.states[0].h_matrices()[0]).max()))
    ok = eig < 1e-9 and tyu < 1e-7
    report(5, ok, f"{name} h eigenvalue deviation {eig:.2e} (< 1e-9), Tyurin residual {tyu:.2e} "
                  f"(< 1e-7), h_gamma moved by {moved:.2e}")
    assert ok


# ---------------------------------------------------------------- 6


def test_criterion_06_commutation():
    s = FlowState(c2_instance(seed=0))
    a1 = FlowTriple(InvariantId("char_coeff", 1), 0, 0)
    a2 = FlowTriple(InvariantId("char_coeff", 2), 0, 0)
    errs = [commutation_check(s, a1, a2, 0.2, dt) for dt in (0.04, 0.02, 0.01)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(12 <= r <= 20 for r in ratios)
    report(6, ok, "discrepancies " + ", ".join(f"{e:.2e}" for e in errs)
           + " at dt 0.04/0.02/0.01, ratios " + ", ".join(f"{r:.1f}" for r in ratios) + " (12..20)")
    assert ok


# ---------------------------------------------------------------- 7


def test_criterion_07_orthogonalization():
    grp = rec = 0.0
    members = True
    for fam, n, h in CURVE_CASES:
        alg = make_algebra(fam, n)
        rng = np.random.default_rng([7, ord(fam)])
        g = random_group_element(alg, rng, 0.3)
        cfg = LaxConfig.build(alg, [(0, 1), (2 + 0.5j, 1)], [(1 + 1j, h, g)])
        L = sample_lax(build_constraint_system(cfg), seed=7)
        done = 0
        while done < 50:
            q = 1 + 0.5j + 3 * (rng.random() + 0.2) * np.exp(2j * np.pi * rng.random())
            X = L(q)
            try:
                lam, V, _ = eigen_frame(X, alg)
                P, lam = orthonormalize(V, alg, lam)
            except (BranchPointError, IsotropicPivotError):
                continue
            done += 1
            grp = max(grp, float(np.abs(P.T @ alg.sigma @ P - alg.sigma).max()))
            Y = P @ np.diag(lam) @ np.linalg.inv(P)
            rec = max(rec, float(np.abs(Y - X).max() / max(1, np.abs(X).max())))
            members &= is_member(Y, alg, tol=1e-8)
    ok = grp < 1e-9 and rec < 1e-8 and members
    report(7, ok, f"group residual {grp:.2e} (< 1e-9), reconstruction {rec:.2e} (< 1e-8), "
                  f"members {'yes' if members else 'no'}")
    assert ok


# ---------------------------------------------------------------- 8


def _exact_check(e1, e2, form, top):
    """Compare the second output with the sympy series computation; return (orders, error)."""
    z = sympy.symbols("z")
    E1, E2 = sympy.Matrix(e1), sympy.Matrix(e2)
    F = sympy.Matrix(form)
    lam = sympy.series(-(E2.T * F * E1)[0] / (E1.T * F * E1)[0], z, 0, top + 1).removeO()
    exact = [sympy.Poly(sympy.series(sympy.expand(x), z, 0, top + 1).removeO(), z) for x in E2 + lam * E1]
    to_series = lambda c: LaurentSeries([complex(sympy.Poly(c, z).coeff_monomial(z ** k)) for k in range(top + 1)], 0, top)
    out = series_orthogonalize([[to_series(x) for x in e1], [to_series(x) for x in e2]],
                               np.array(F, dtype=float))
    err = max(abs(out[1][c].coeff(k) - complex(exact[c].coeff_monomial(z ** k)))
              for c in range(len(e1)) for k in range(out[1][c].top + 1))
    return [series_leading_order(v) for v in out], err


def test_criterion_08_order_preservation():
    preserved = 0
    for k in range(50):
        rng = np.random.default_rng([8, k])
        d = int(rng.integers(2, 7))
        orders = sorted(rng.integers(-2, 3, size=d).tolist())
        A = rng.standard_normal((d, d))
        form = A + A.T + 2 * d * np.eye(d)
        vecs = [[LaurentSeries(rng.standard_normal(12 - h) + 1j * rng.standard_normal(12 - h), h, 11)
                 for _ in range(d)] for h in orders]
        out = series_orthogonalize(vecs, form)
        preserved += [series_leading_order(v, 1e-9) for v in out] == orders
    z = sympy.symbols("z")
    r = sympy.Rational
    o1, e1 = _exact_check([1 + z, r(1, 2)], [z, 3 * z ** 2], [[0, 1], [1, 0]], 6)
    o2, e2 = _exact_check([r(2, 3), 1 - z, z], [z, 2 * z, r(1, 5) * z ** 2 + z],
                          [[1, 0, 0], [0, 2, 0], [0, 0, 3]], 6)
    ok = preserved == 50 and o1 == [0, 1] and o2 == [0, 1] and max(e1, e2) < 1e-12
    report(8, ok, f"orders preserved on {preserved}/50 instances; exact checks orders {o1}, {o2}, "
                  f"max coefficient error {max(e1, e2):.1e}")
    assert ok


# ---------------------------------------------------------------- 9


def test_criterion_09_theta():
    worst = {"quasi-periodicity": 0.0, "periodicity": 0.0, "evenness": 0.0}
    for g in (1, 2, 3):
        rng = np.random.default_rng([9, g])
        for _ in range(20):
            om = random_period_matrix(g, rng)
            p = ThetaParams(om)
            z = rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-0.3, 0.3, g)
            t = theta(z, p)
            for k in range(g):
                e = np.eye(g)[k]
                qp = theta(z + om[:, k], p) * np.exp(1j * np.pi * om[k, k] + 2j * np.pi * z[k]) - t
                worst["quasi-periodicity"] = max(worst["quasi-periodicity"], abs(qp))
                worst["periodicity"] = max(worst["periodicity"], abs(theta(z + e, p) - t))
            worst["evenness"] = max(worst["evenness"], abs(theta(-z, p) - t))
    zero = abs(theta([0.5 + 0.5j], ThetaParams(np.array([[1j]]))))
    ok = max(worst.values()) < 1e-10 and zero < 1e-10
    report(9, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", half-period zero {zero:.1e}")
    assert ok


# ---------------------------------------------------------------- 10


def _mop_instances(fam, k):
    """Feasible (L, a): depth-1 gradings with two punctures, deeper ones with one."""
    rng = np.random.default_rng([10, k, ord(fam)])
    m = int(rng.integers(0, 2))
    if fam == "B":
        L = tyurin_instance("B", 2, [1, 0], [(0, 1), (2 + 0.5j, 1)], seed=k)
        chi = InvariantId("char_coeff", 1 + k % 2)
    elif fam == "C":
        h = [[1, 0], [1, 1]][k % 2]
        L = tyurin_instance("C", 2, h, [(0, 1)], seed=k)
        chi = InvariantId("char_coeff", 1 + (k // 2) % 2)
    else:
        L = tyurin_instance("D", 3, [1, 0, 0], [(0, 1), (2 - 1j, 1)], seed=k)
        chi = [InvariantId("char_coeff", 1), InvariantId("char_coeff", 2), InvariantId("pfaffian")][k % 3]
    return L, FlowTriple(chi, int(rng.integers(0, len(L.config.punctures))), m)


def test_criterion_10_m_operator():
    mr = hr = tr = 0.0
    for fam in "BCD":
        for k in range(10):
            L, a = _mop_instances(fam, k)
            M = build_m_operator(L, a)
            mr = max(mr, matching_residual(L, M))
            hr = max(hr, holomorphy_residual(M, L))
            tr = max(tr, tangency_residual(L, M))
    ok = mr < 1e-9 and hr < 1e-9 and tr < 1e-8
    report(10, ok, f"matching {mr:.2e} (< 1e-9), holomorphy {hr:.2e}, tangency {tr:.2e} (< 1e-8)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
