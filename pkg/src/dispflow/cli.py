"""Command-line front end.

    dispflow run [CONFIG] [--preset NAME] [overrides...]
    dispflow sweep [CONFIG] --param a=0.5,1.0 [--param ...] [--workers N]
    dispflow check [CONFIG] [--preset NAME]
    dispflow describe [CONFIG] [--preset NAME]

Exit codes: 0 completed, 2 configuration error, 3 tube exceeded, 4 blowup
detected, 5 a check failed (``check`` only), 130 aborted.
"""

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from . import fields
from .config import ParseError, ValidationError, parse_config
from .initial_data import BadParameters, make_initial_data
from .pde import fm_rhs, rhs_extrinsic, rhs_intrinsic
from .solver import continuation_gaps, run, run_continuation

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TUBE = 3
EXIT_BLOWUP = 4
EXIT_CHECK = 5
EXIT_ABORT = 130

TERMINATION_EXIT = {
    "completed": EXIT_OK,
    "tube_exceeded": EXIT_TUBE,
    "blowup_detected": EXIT_BLOWUP,
    "user_abort": EXIT_ABORT,
}

CONSERVATION_TOL = 1e-5
DISSIPATION_TOL = 0.05
MONOTONE_TOL = 1e-10
IDENTITY_TOL = 1e-8
CONSTRAINT_TOL = 1e-10


class Verdict:
    def __init__(self, name, ok, detail):
        self.name, self.ok, self.detail = name, bool(ok), detail

    def line(self):
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}: {self.detail}"


# ------------------------------------------------------------------ verdicts


def trajectory_verdicts(cfg, traj):
    """Checks that apply to one finished trajectory."""
    out = []
    recs = traj.diagnostics
    if traj.termination.kind != "completed":
        return out
    worst = max(r.constraint_violation for r in recs)
    out.append(Verdict("constraint", worst <= CONSTRAINT_TOL, f"max distance {worst:.2e} (<= {CONSTRAINT_TOL:g})"))
    c = cfg.coefficients
    K = None if cfg.target == "s6" else (1.0 if cfg.target == "s2" else 0.0)
    if cfg.epsilon == 0.0 and K is not None and cfg.track_E and cfg.model != "darios":
        d_l2 = dg.relative_drift([r.l2_energy for r in recs])
        d_E = dg.relative_drift([r.conserved_E for r in recs])
        if cfg.model == "fukumoto-miyazaki" or math.isclose(c.b, c.a * K / 2.0, rel_tol=0, abs_tol=1e-14):
            ok = d_l2 <= CONSERVATION_TOL and d_E <= CONSERVATION_TOL
            out.append(Verdict("conservation", ok, f"drift l2 {d_l2:.2e}, E {d_E:.2e} (<= {CONSERVATION_TOL:g})"))
        else:
            out.append(Verdict("l2-conservation", d_l2 <= CONSERVATION_TOL, f"drift l2 {d_l2:.2e}; E drift {d_E:.2e} (b != aK/2, not conserved)"))
    if cfg.epsilon > 0.0:
        res = [r.dissipation_residual for r in recs if r.dissipation_residual is not None]
        l2 = np.array([r.l2_energy for r in recs])
        rise = float(np.max(np.diff(l2))) if l2.size > 1 else 0.0
        worst_res = max(res) if res else 0.0
        ok = worst_res <= DISSIPATION_TOL and rise <= MONOTONE_TOL * l2[0]
        out.append(Verdict("dissipation", ok, f"max residual {worst_res:.2e} (<= {DISSIPATION_TOL:g}), max l2 increase {rise:.2e}"))
    if c.a != 0.0 and cfg.model == "dispersive":
        ceiling = dg.gauge_ceiling(recs[0].l2_energy, c.a)
        gb = max(r.gauge_bound for r in recs)
        sandwich = all(dg.norm_equivalence_holds(r, cfg.diag_order, ceiling) for r in recs)
        out.append(Verdict("gauge-bound", gb <= ceiling and sandwich, f"max |e^(+-K)| {gb:.4g} <= {ceiling:.4g}, N_m/H^m sandwich {'holds' if sandwich else 'violated'}"))
    return out


def static_verdicts(cfg, u):
    """Identity checks on a single state (no time stepping)."""
    out = []
    c = cfg.coefficients
    if cfg.model == "dispersive":
        ri = rhs_intrinsic(u, c.__class__(c.a, c.b, 0.0)).vectors
        re = rhs_extrinsic(u, c.__class__(c.a, c.b, 0.0))
        d = float(np.max(np.abs(ri - re)))
        out.append(Verdict("intrinsic-extrinsic", d <= 1e-9, f"max discrepancy {d:.2e} (<= 1e-9)"))
    if cfg.model == "fukumoto-miyazaki":
        ri = rhs_intrinsic(u, c.__class__(c.a, c.a / 2.0)).vectors
        d = float(np.max(np.abs(fm_rhs(u, c.a) - ri)))
        out.append(Verdict("fukumoto-miyazaki", d <= 1e-10, f"max discrepancy {d:.2e} (<= 1e-10)"))
    if c.a != 0.0 and cfg.model == "dispersive" and cfg.diag_order >= 1:
        r = dg.appendix_commutator_check(u, cfg.diag_order, c.a)
        out.append(Verdict("appendix-identities", r <= IDENTITY_TOL, f"residual {r:.2e} (<= {IDENTITY_TOL:g})"))
    if cfg.target == "s6":
        V = fields.iterated_covariant(u, 4)[4]
        p = dg.nabla_J_energy_pairing_check(u, V)
        size = float(np.sqrt(fields.l2_norm_sq(fields.nabla_J(u, V))))
        out.append(Verdict("nabla-J-pairing", p <= IDENTITY_TOL, f"pairing {p:.2e} (<= {IDENTITY_TOL:g}), ||(nabla J)V|| = {size:.3g}"))
    return out


# ------------------------------------------------------------------- outputs


def _write_trajectory(traj, cfg, outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "snapshots.jsonl", "w", encoding="utf-8") as fh:
        for s in traj.snapshots:
            fh.write(s.to_json() + "\n")
    with open(outdir / "diagnostics.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(dg.records_to_csv(traj.diagnostics, cfg.diag_order))
    summary = dg.summarize(traj)
    with open(outdir / "summary.json", "w", encoding="utf-8") as fh:
        fh.write(dg.summary_json(summary) + "\n")
    return summary


def run_experiment(cfg, write=True, out=sys.stdout):
    """Run the configured experiment, emit artifacts and verdict lines.

    Returns ``(exit_code, verdicts)``.
    """
    u0 = make_initial_data(cfg.initial_family, cfg.initial_params, cfg.grid, cfg.target)
    scfg = cfg.solver_config()
    verdicts = []
    if cfg.epsilon_schedule:
        results = run_continuation(u0, scfg)
        worst = EXIT_OK
        runs = []
        for eps, traj in results:
            sub = Path(cfg.output_dir) / f"eps_{eps:.0e}"
            summary = _write_trajectory(traj, cfg, sub) if write else dg.summarize(traj)
            runs.append({"epsilon": eps, **summary})
            worst = worst or TERMINATION_EXIT[traj.termination.kind]
            print(f"epsilon {eps:g}: {traj.termination.kind} at t = {traj.final.time:.6g} ({traj.steps} steps)", file=out)
        if worst == EXIT_OK:
            gaps = continuation_gaps(results)
            ux0 = math.sqrt(fields.l2_norm_sq(fields.velocity(u0)))
            dec = all(y < x for x, y in zip(gaps, gaps[1:]))
            ok = dec and gaps[-1] <= 1e-3 * ux0
            verdicts.append(Verdict("continuation", ok, "L2 gaps " + ", ".join(f"{g:.3e}" for g in gaps) + f"; final <= {1e-3 * ux0:.3e}"))
        else:
            gaps = None
        if write:
            Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
            with open(Path(cfg.output_dir) / "summary.json", "w", encoding="utf-8") as fh:
                fh.write(json.dumps({"runs": runs, "gaps": gaps}, indent=2) + "\n")
        code = worst
    else:
        traj = run(u0, scfg)
        if write:
            _write_trajectory(traj, cfg, cfg.output_dir)
        print(f"{traj.termination.kind} at t = {traj.final.time:.6g} ({traj.steps} steps, dt = {traj.dt:.3e})", file=out)
        verdicts.extend(trajectory_verdicts(cfg, traj))
        code = TERMINATION_EXIT[traj.termination.kind]
    for v in verdicts:
        print(v.line(), file=out)
    return code, verdicts


def _sweep_worker(args):
    text, overrides, outdir = args
    cfg = parse_config(text, {**overrides, "output_dir": outdir})
    with open(os.devnull, "w") as sink:
        code, verdicts = run_experiment(cfg, write=True, out=sink)
    return {
        "params": overrides,
        "output_dir": outdir,
        "exit_code": code,
        "verdicts": {v.name: v.ok for v in verdicts},
    }


# ------------------------------------------------------------------- parsing


def _add_common(p):
    p.add_argument("config", nargs="?", help="TOML experiment file")
    p.add_argument("--preset", help="named experiment preset")
    p.add_argument("--target", choices=["s2", "t2-clifford", "s6"])
    p.add_argument("--model", choices=["dispersive", "darios", "fukumoto-miyazaki"])
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--dt", help="step size or 'auto'")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--cfl", type=float)
    p.add_argument("--projection", help="every_step, every_k_steps(k) or none")
    p.add_argument("--epsilon-schedule", dest="epsilon_schedule", help='comma list, e.g. "1e-2,1e-3,1e-4"')
    p.add_argument("--snapshot-stride", type=int, dest="snapshot_stride")
    p.add_argument("--blowup-ceiling", type=float, dest="blowup_ceiling")
    p.add_argument("--diag-order", type=int, dest="diag_order")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--strict", action="store_true", help="order-independent (exactly rounded) reductions")


def build_parser():
    parser = argparse.ArgumentParser(prog="dispflow", description="Dispersive curve flows into embedded Kaehler and almost Hermitian targets.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("run", "integrate one experiment and write its artifacts"),
        ("check", "run the invariant suite only, without writing artifacts"),
        ("describe", "print the resolved configuration"),
        ("sweep", "run a grid of experiments in parallel and merge their summaries"),
    ]:
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name == "sweep":
            p.add_argument("--param", action="append", default=[], help="KEY=V1,V2,... (repeatable)")
            p.add_argument("--workers", type=int, default=1)
    return parser


OVERRIDE_KEYS = (
    "preset", "target", "model", "a", "b", "epsilon", "n", "L", "dt", "t_end", "cfl", "projection",
    "epsilon_schedule", "snapshot_stride", "blowup_ceiling", "diag_order", "output_dir",
)


def _overrides(args):
    ov = {k: getattr(args, k) for k in OVERRIDE_KEYS if getattr(args, k, None) is not None}
    if "dt" in ov and ov["dt"] != "auto":
        try:
            ov["dt"] = float(ov["dt"])
        except ValueError:
            raise ParseError(f"--dt must be a number or 'auto', got {ov['dt']!r}") from None
    if "epsilon_schedule" in ov:
        try:
            ov["epsilon_schedule"] = [float(s) for s in ov["epsilon_schedule"].split(",") if s.strip()]
        except ValueError:
            raise ParseError(f"bad --epsilon-schedule {args.epsilon_schedule!r}") from None
    return ov


def _sweep_grid(params):
    axes = []
    for item in params:
        key, _, vals = item.partition("=")
        if not vals:
            raise ParseError(f"--param needs KEY=V1,V2,..., got {item!r}")
        parsed = []
        for v in vals.split(","):
            try:
                parsed.append(float(v) if key not in ("target", "model", "projection") else v)
            except ValueError:
                raise ParseError(f"bad value {v!r} for {key}") from None
        if key in ("n", "snapshot_stride", "diag_order"):
            parsed = [int(p) for p in parsed]
        axes.append([(key, v) for v in parsed])
    return [dict(combo) for combo in itertools.product(*axes)] if axes else [{}]


def main(argv=None):
    args = build_parser().parse_args(argv)
    fields.set_strict(args.strict)
    try:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        overrides = _overrides(args)
        cfg = parse_config(text, overrides)
        if args.command == "sweep":
            grid = _sweep_grid(args.param)
            for combo in grid:
                parse_config(text, {**overrides, **combo})
    except (ParseError, ValidationError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "describe":
            print(json.dumps(cfg.to_dict(), indent=2))
            return EXIT_OK
        if args.command == "check":
            u0 = make_initial_data(cfg.initial_family, cfg.initial_params, cfg.grid, cfg.target)
            verdicts = static_verdicts(cfg, u0)
            for v in verdicts:
                print(v.line())
            code, dyn = run_experiment(cfg, write=False)
            if code != EXIT_OK:
                return code
            return EXIT_OK if all(v.ok for v in verdicts + dyn) else EXIT_CHECK
        if args.command == "run":
            code, _ = run_experiment(cfg, write=True)
            return code
        # sweep
        base = Path(cfg.output_dir)
        jobs = [
            (text, {**overrides, **combo}, str(base / f"run_{i:03d}"))
            for i, combo in enumerate(grid)
        ]
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(_sweep_worker, jobs))
        else:
            results = [_sweep_worker(j) for j in jobs]
        base.mkdir(parents=True, exist_ok=True)
        with open(base / "sweep_summary.json", "w", encoding="utf-8") as fh:
            fh.write(json.dumps(results, indent=2) + "\n")
        for r in results:
            print(f"{r['output_dir']}: exit {r['exit_code']} {r['params']}")
        return max((r["exit_code"] for r in results), default=EXIT_OK)
    except BadParameters as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
