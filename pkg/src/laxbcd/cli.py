"""Command line entry point: ``laxbcd <subcommand> [--config PATH] ...``.

Exit status: 0 success, 2 configuration error, 3 numerical failure,
4 tolerance failure (the message names the invariant and the measured value).
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from .algebra import is_member, random_member
from .baker import BranchPointError, IsotropicPivotError, eigen_frame, orthonormalize
from .flow import (DriftBlowup, FlowState, StepSizeUnderflow, commutation_check, integrate,
                   write_diagnostics_csv)
from .invariants import InvariantId, SingularMatrixError, basis_invariants, fd_gradient, gradient
from .io import ConfigError, load_config, moperator_to_json, parse_config, state_to_json
from .laxspace import RankDecisionError, build_constraint_system, sample_lax
from .moper import (InfeasibleSystemError, TangencyError, build_m_operator, holomorphy_residual,
                    matching_residual, tangency_residual)
from .spectral import FitError, involution_defect, spectral_curve, write_curve_csv
from .theta import ThetaParams, ThetaTruncationError, random_period_matrix, theta

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_TOLERANCE = 0, 2, 3, 4

NUMERIC_ERRORS = (RankDecisionError, FitError, InfeasibleSystemError, StepSizeUnderflow,
                  DriftBlowup, BranchPointError, IsotropicPivotError, ThetaTruncationError,
                  SingularMatrixError, np.linalg.LinAlgError, ZeroDivisionError)

COMMANDS = ("space", "curve", "gradcheck", "mop", "flow", "commute", "baker", "theta")


class ToleranceFailure(Exception):
    def __init__(self, failures):
        self.failures = failures  # (invariant, measured, limit)
        super().__init__("; ".join(f"{n} = {v:.3e} exceeds {lim:.1e}" for n, v, lim in failures))


class Context:
    def __init__(self, exp, out: Path, tol: float | None, quiet: bool):
        self.exp = exp
        self.out = out
        self.tol = tol
        self.quiet = quiet
        self.failures = []

    def say(self, msg):
        if not self.quiet:
            print(msg)

    def check(self, name, value, limit):
        if not value <= limit:
            self.failures.append((name, float(value), float(limit)))

    def element(self, k: int = 0):
        space = build_constraint_system(self.exp.config)
        return sample_lax(space, seed=self.exp.seed * 1009 + k) * self.exp.element_scale

    def rng(self, salt: int):
        return np.random.default_rng([self.exp.seed, salt])


def _fmt(x):
    return f"{x:.12e}" if isinstance(x, float) else x


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_json(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- subcommands


def cmd_space(ctx):
    space = build_constraint_system(ctx.exp.config)
    _write_json(ctx.out / "space.json", {"dimension": space.dim, "gap": float(space.gap),
                                         "singular_values": [float(s) for s in space.singular_values]})
    ctx.say(f"space: dimension {space.dim}  singular-value gap {space.gap:.3e}")


def cmd_curve(ctx):
    L = ctx.element()
    data = spectral_curve(L, n_samples=ctx.exp.samples)
    write_curve_csv(ctx.out / "curve.csv", data.samples, data.values)
    fit = float(data.residuals.max())
    ctx.check("curve divisor-bound fit residual", fit, 1e-8)
    msg = f"curve: divisor-bound fit residual {fit:.3e}"
    fam = L.config.alg.family
    if fam != "A":
        inv = involution_defect(L, data.samples)
        ctx.check("curve involution defect", inv, 1e-10)
        msg += f"  involution defect {inv:.3e}"
        if fam == "B":
            det = float(np.abs(data.values[:, -1]).max() / max(1.0, np.abs(data.values).max()))
            ctx.check("curve determinant sheet (family B)", det, 1e-10)
            msg += f"  det sheet {det:.3e}"
    ctx.say(msg)


def cmd_gradcheck(ctx):
    alg = ctx.exp.config.alg
    tol = ctx.tol if ctx.tol is not None else 1e-6
    rng = ctx.rng(1)
    invs = basis_invariants(alg) + [InvariantId("trace_power", 2)]
    members = [random_member(alg, rng) for _ in range(ctx.exp.samples)]
    rows = []
    for chi in invs:
        worst = 0.0
        for X in members:
            G = gradient(chi, X, alg)
            F = fd_gradient(chi, X, alg)
            worst = max(worst, float(np.abs(G - F).max() / max(np.abs(F).max(), 1e-300)))
        rows.append([str(chi), worst, len(members)])
        ctx.check(f"gradcheck {chi} max relative error", worst, tol)
    _write_csv(ctx.out / "gradcheck.csv", ["invariant", "max_rel_err", "members"], rows)
    ctx.say(f"gradcheck: max relative error {max(r[1] for r in rows):.3e} over {len(invs)} invariants")


def cmd_mop(ctx):
    L = ctx.element()
    rows = []
    for i, spec in enumerate(ctx.exp.flows):
        try:
            M = build_m_operator(L, spec.triple, check_tol=None)
        except InfeasibleSystemError as exc:
            raise InfeasibleSystemError(f"flow {i} {spec.triple}: {exc}", exc.residual) from exc
        mr = matching_residual(L, M)
        hr = holomorphy_residual(M, L)
        tr = tangency_residual(L, M)
        nu = complex(M.nu[0]) if len(M.nu) else 0j
        rows.append([i, str(spec.triple), mr, hr, tr, abs(nu), M.rank_deficiency])
        ctx.check(f"mop flow {i} matching residual", mr, 1e-9)
        ctx.check(f"mop flow {i} holomorphy residual", hr, 1e-9)
        ctx.check(f"mop flow {i} tangency residual", tr, 1e-8)
        _write_json(ctx.out / f"mop_{i}.json", moperator_to_json(M))
        ctx.say(f"mop {i} {spec.triple}: matching {mr:.2e}  holomorphy {hr:.2e}  tangency {tr:.2e}")
    _write_csv(ctx.out / "mop.csv", ["flow", "triple", "matching", "holomorphy", "tangency",
                                      "abs_nu0", "rank_deficiency"], rows)


def cmd_flow(ctx):
    L = ctx.element()
    drift_tol = ctx.tol if ctx.tol is not None else 1e-6
    for i, spec in enumerate(ctx.exp.flows):
        res = integrate(FlowState(L), spec.triple, spec.t_end, spec.dt, tol=spec.tol)
        D = res.diagnostics
        write_diagnostics_csv(ctx.out / f"flow_{i}.csv", D)
        _write_json(ctx.out / f"flow_{i}_states.json", [state_to_json(s) for s in res.states])
        ctx.check(f"flow {i} r_j drift", D.max("r_drift"), drift_tol)
        ctx.check(f"flow {i} Tyurin-form residual", D.max("tyurin_residual"), 1e-7)
        ctx.check(f"flow {i} h eigenvalue deviation", D.max("h_eig_dev"), 1e-9)
        ctx.say(f"flow {i} {spec.triple}: drift {D.max('r_drift'):.2e}  "
                f"Tyurin {D.max('tyurin_residual'):.2e}  h-eig {D.max('h_eig_dev'):.2e}")


def cmd_commute(ctx):
    L = ctx.element()
    flows = ctx.exp.flows
    rows = []
    for i, j in itertools.combinations(range(len(flows)), 2):
        prev = None
        for dt in ctx.exp.commute_dt:
            d = commutation_check(FlowState(L), flows[i].triple, flows[j].triple, ctx.exp.commute_t, dt)
            ratio = prev / d if prev is not None and d > 0 else float("nan")
            rows.append([i, j, float(dt), d, ratio])
            prev = d
        last = rows[-1]
        if last[3] > 1e-12:
            ok = 12 <= last[4] <= 20
            if not ok:
                ctx.failures.append((f"commute {i},{j} refinement ratio (expected 12..20)",
                                     float(last[4]), 20.0))
        ctx.say(f"commute {i},{j}: discrepancy {last[3]:.2e} at dt={last[2]:g}, last ratio {last[4]:.2f}")
    _write_csv(ctx.out / "commute.csv", ["flow_a", "flow_b", "dt", "discrepancy", "ratio"], rows)


def cmd_baker(ctx):
    L = ctx.element()
    alg = L.config.alg
    rng = ctx.rng(2)
    rows = []
    center = np.mean([complex(p.z) for p in L.config.punctures])
    attempts = 0
    while len(rows) < ctx.exp.samples:
        attempts += 1
        if attempts > 20 * ctx.exp.samples:
            raise BranchPointError("too many irregular sample points")
        q = center + (1.5 + rng.random()) * np.exp(2j * np.pi * rng.random())
        X = L(q)
        try:
            lam, V, _ = eigen_frame(X, alg)
            P, lam = orthonormalize(V, alg, lam)
        except (BranchPointError, IsotropicPivotError):
            continue
        grp = float(np.abs(P.T @ alg.sigma @ P - alg.sigma).max())
        rec = P @ np.diag(lam) @ np.linalg.inv(P)
        err = float(np.abs(rec - X).max() / max(1.0, np.abs(X).max()))
        mem = bool(is_member(rec, alg, tol=1e-8))
        rows.append([q.real, q.imag, grp, err, int(mem)])
        ctx.check("baker group residual", grp, 1e-9)
        ctx.check("baker reconstruction residual", err, 1e-8)
        if not mem:
            ctx.failures.append(("baker reconstructed L not in the algebra", 1.0, 0.0))
    _write_csv(ctx.out / "baker.csv", ["q_re", "q_im", "group_residual", "reconstruction_residual",
                                        "is_member"], rows)
    ctx.say(f"baker: group {max(r[2] for r in rows):.2e}  reconstruction {max(r[3] for r in rows):.2e}")


def cmd_theta(ctx):
    rng = ctx.rng(3)
    rows = []
    for g in (1, 2, 3):
        worst = {"quasi_periodicity": 0.0, "periodicity": 0.0, "evenness": 0.0}
        for _ in range(ctx.exp.samples):
            om = random_period_matrix(g, rng)
            p = ThetaParams(om)
            z = rng.uniform(-0.5, 0.5, g) + 1j * rng.uniform(-0.3, 0.3, g)
            t0 = theta(z, p)
            for k in range(g):
                e = np.zeros(g)
                e[k] = 1.0
                # scaled to O(1): theta(z + Om e_k) itself can be ~1e5
                qp = theta(z + om[:, k], p) * np.exp(1j * np.pi * om[k, k] + 2j * np.pi * z[k]) - t0
                worst["quasi_periodicity"] = max(worst["quasi_periodicity"], abs(qp))
                worst["periodicity"] = max(worst["periodicity"], abs(theta(z + e, p) - t0))
            worst["evenness"] = max(worst["evenness"], abs(theta(-z, p) - t0))
        for name, v in worst.items():
            rows.append([g, name, v])
            ctx.check(f"theta genus {g} {name}", v, 1e-10)
    zero = abs(theta(np.array([0.5 + 0.5j]), ThetaParams(np.array([[1j]]))))
    rows.append([1, "odd_half_period_zero", zero])
    ctx.check("theta odd half-period zero", zero, 1e-10)
    _write_csv(ctx.out / "theta.csv", ["genus", "check", "max_abs_err"], rows)
    ctx.say(f"theta: largest identity error {max(r[2] for r in rows):.2e}")


HANDLERS = {
    "space": cmd_space,
    "curve": cmd_curve,
    "gradcheck": cmd_gradcheck,
    "mop": cmd_mop,
    "flow": cmd_flow,
    "commute": cmd_commute,
    "baker": cmd_baker,
    "theta": cmd_theta,
}


def run_command(name: str, ctx: Context) -> int:
    ctx.failures = []
    try:
        HANDLERS[name](ctx)
    except (*NUMERIC_ERRORS, TangencyError) as exc:
        kind = type(exc).__name__
        if isinstance(exc, TangencyError):
            print(f"{name}: tolerance failure: tangency residual = {exc.residual:.3e} ({exc})",
                  file=sys.stderr)
            return EXIT_TOLERANCE
        print(f"{name}: numerical failure ({kind}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if ctx.failures:
        print(f"{name}: tolerance failure: {ToleranceFailure(ctx.failures)}", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="laxbcd", description="Lax operators with Tyurin data on the sphere")
    p.add_argument("command", choices=COMMANDS + ("all",))
    p.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--tol", type=float, default=None, help="override the command tolerance")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        exp = parse_config(load_config(args.config), seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out if args.out is not None else Path(exp.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = Context(exp, out, args.tol, args.quiet)
    names = COMMANDS if args.command == "all" else (args.command,)
    status = EXIT_OK
    for name in names:
        status = max(status, run_command(name, ctx))
    return status


if __name__ == "__main__":
    sys.exit(main())
