"""Command-line entry point: ``stabl simulate | audit | bound | phase``.

Exit codes: 0 success, 2 validation or input error, 3 certificate violation
under ``--check``.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from ..bagging import BaggedPredictor, Exact, parse_clip, parse_mode
from ..errors import StablError
from ..learners import parse_learner
from ..resampling import parse_scheme
from ..stability import DEFAULT_DPRIME, audit, curve_points, interval_instability
from ..theory import (BoundParams, default_grid, expectation_beta, finite_b_delta, finite_b_inflation,
                      guaranteed_delta, guaranteed_epsilon, lk_bound, phase_diagram, stability_threshold)
from .io import emit_report, load_dataset, parse_point, to_json, write_csv
from .settings import ExperimentConfig
from .simulate import certificate_check, run_simulation

EXIT_OK, EXIT_INVALID, EXIT_VIOLATION = 0, 2, 3


def _simulate(args) -> int:
    config = ExperimentConfig.make(args.setting, args.n, args.d, args.m, args.B, args.seed, args.paper_scale,
                                   args.learner, args.scheme, args.mode)
    report = run_simulation(config, args.out, args.dprime)
    cert = report["certificate"]
    print(f"setting {config.setting}: n={config.n} d={config.d} m={config.m} B={config.B}; "
          f"bagged worst={report['bagged']['worst']:.6g}, base worst={report['base']['worst']:.6g}; "
          f"certificate violations={cert['violations']}; wrote {args.out}")
    return EXIT_VIOLATION if args.check and cert["violations"] else EXIT_OK


def _audit(args) -> int:
    data = load_dataset(args.data)
    learner = parse_learner(args.learner, data.n)
    scheme = parse_scheme(args.scheme, data.n)
    mode = parse_mode(args.mode)
    rule = parse_clip(args.clip) if args.clip else None
    x = parse_point(args.x)
    if x.shape != (data.d,):
        raise StablError(f"--x has {x.size} values but the data has d={data.d}")
    pred = BaggedPredictor(learner, scheme, mode, rule)
    profile = audit(pred, data, x, args.dprime)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "perturbations.csv", ["i", "perturbation"],
              [[i + 1, v] for i, v in enumerate(profile.perturbations)])
    write_csv(out / "curve.csv", ["epsilon", "delta"], curve_points(profile, strict=not args.nonstrict))

    params = BoundParams.from_scheme(scheme)
    B = None if isinstance(mode, Exact) else mode.B
    extra = {}
    if rule is not None:
        lo, hi = rule.interval(data.y)
        extra["interval"] = [lo, hi]
        extra["delta_I"] = interval_instability(data, rule)
        scale = hi - lo
    elif learner.output_range is not None:
        scale = learner.output_range[1] - learner.output_range[0]
    else:
        scale = None
    if scale is None:
        cert = {"applicable": False, "reason": "learner declares no output range and no clip rule is set",
                "violations": 0}
    else:
        cert = certificate_check(profile, params, scale if scale > 0 else 1.0, B, args.dprime)
        cert["applicable"] = True
        if rule is not None:
            # rows whose removal moves I(D) are outside the guarantee; allow for them
            cert["delta_I"] = extra["delta_I"]
            bad = [r for r in cert["breakpoints"] if not r["delta"] <= r["bound"] + extra["delta_I"] + 1e-12]
            for r in cert["breakpoints"]:
                r["ok"] = r["delta"] <= r["bound"] + extra["delta_I"] + 1e-12
            cert["violations"] = len(bad)
    report = {"data": str(args.data), "learner": learner.spec(), **pred.describe(), **extra,
              "profile": profile.to_dict(strict=not args.nonstrict), "certificate": cert,
              "convention": {"curve": "non-strict" if args.nonstrict else "strict", "certificate": "non-strict"}}
    emit_report(report, out / "report.json")
    print(f"audited n={data.n}: worst={profile.to_dict()['worst']:.6g} mean={profile.to_dict()['mean']:.6g}; "
          f"certificate violations={cert['violations']}; wrote {out}")
    return EXIT_VIOLATION if args.check and cert["violations"] else EXIT_OK


def _bound(args) -> int:
    params = BoundParams(args.n, args.p, args.q, B=args.B, L=args.L)
    out = {"n": args.n, "p": args.p, "q": args.q, "threshold_c": stability_threshold(params),
           "beta": expectation_beta(params, args.B),
           "lk_bound": {"0.5": lk_bound(params, 0.5), "1": lk_bound(params, 1), "2": lk_bound(params, 2),
                        "4": lk_bound(params, 4), "inf": lk_bound(params, math.inf)}}
    if args.B is not None:
        out["B"] = args.B
        out["dprime"] = args.dprime
        out["finite_b_inflation"] = finite_b_inflation(args.B, args.dprime)
        out["lipschitz_level"] = args.L * out["beta"]
        out["replace_one_level"] = 2 * args.L * out["beta"]
    if args.eps is not None:
        out["eps"] = args.eps
        out["guaranteed_delta"] = min(1.0, guaranteed_delta(params, args.eps))
        if args.B is not None:
            out["finite_b_delta"] = finite_b_delta(params, args.eps, args.B, args.dprime)
    if args.delta is not None:
        out["delta"] = args.delta
        out["guaranteed_epsilon"] = guaranteed_epsilon(params, args.delta)
        if args.B is not None:
            out["finite_b_epsilon"] = out["guaranteed_epsilon"] + out["finite_b_inflation"]
            out["finite_b_delta_total"] = args.delta + args.dprime
    print(to_json(out))
    return EXIT_OK


def _phase(args) -> int:
    parts = args.grid.split(",") if args.grid else []
    if args.grid and len(parts) != 3:
        raise StablError("--grid must be lo,hi,points")
    try:
        grid = default_grid(float(parts[0]), float(parts[1]), int(parts[2])) if parts else default_grid()
    except ValueError:
        raise StablError(f"--grid {args.grid!r}: bad number") from None
    guarantee, tight = phase_diagram(args.n, args.m, grid)
    write_csv(args.out, ["delta", "eps_guarantee", "eps_tightness"],
              zip(guarantee.delta, guarantee.epsilon, tight.epsilon))
    print(f"wrote {len(grid)} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stabl", description="Stability certificates for bagging.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a synthetic setting: base vs subbagged LOO audits")
    sim.add_argument("--setting", type=int, required=True, choices=[1, 2, 3, 4])
    sim.add_argument("--n", type=int)
    sim.add_argument("--d", type=int)
    sim.add_argument("--m", type=int)
    sim.add_argument("--B", type=int)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--paper-scale", action="store_true", help="full sizes (n=500/1000, d=200/40, B=10000)")
    sim.add_argument("--learner", help="replace the setting's learner (custom run)")
    sim.add_argument("--scheme", help="replace subbag:m (custom run)")
    sim.add_argument("--mode", help="replace mc:B=...,seed=... (custom run)")
    sim.add_argument("--dprime", type=float, default=DEFAULT_DPRIME)
    sim.add_argument("--check", action="store_true", help="exit 3 if any bagged breakpoint violates the bound")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_simulate)

    aud = sub.add_parser("audit", help="leave-one-out audit of a bagged learner on a CSV dataset")
    aud.add_argument("--data", required=True)
    aud.add_argument("--learner", required=True, help="memorizer | threshold:K | table:seed | logistic:c,iters | "
                                                      "mlp:h,lr,epochs | tree:depth | constant:v")
    aud.add_argument("--scheme", required=True, help="subbag:m | bernoulli:m | classical:m | poisson:m")
    aud.add_argument("--mode", default="exact:limit=1000000", help="mc:B=...,seed=... | exact:limit=...")
    aud.add_argument("--clip", help="range | trim:k")
    aud.add_argument("--x", required=True, help="test covariate v1,v2,...")
    aud.add_argument("--dprime", type=float, default=DEFAULT_DPRIME)
    aud.add_argument("--nonstrict", action="store_true", help="write curve.csv with the >= convention")
    aud.add_argument("--check", action="store_true")
    aud.add_argument("--out", required=True)
    aud.set_defaults(func=_audit)

    bnd = sub.add_parser("bound", help="evaluate the stability bounds; prints JSON")
    bnd.add_argument("--n", type=int, required=True)
    bnd.add_argument("--p", type=float, required=True)
    bnd.add_argument("--q", type=float, default=0.0)
    grp = bnd.add_mutually_exclusive_group()
    grp.add_argument("--eps", type=float)
    grp.add_argument("--delta", type=float)
    bnd.add_argument("--B", type=float)
    bnd.add_argument("--dprime", type=float, default=DEFAULT_DPRIME)
    bnd.add_argument("--L", type=float, default=1.0, help="Lipschitz constant of the loss")
    bnd.set_defaults(func=_bound)

    ph = sub.add_parser("phase", help="guarantee and tightness boundaries for subbagging")
    ph.add_argument("--n", type=int, required=True)
    ph.add_argument("--m", type=int, required=True)
    ph.add_argument("--grid", help="lo,hi,points (log-spaced); default 0.001,0.499,200")
    ph.add_argument("--out", required=True)
    ph.set_defaults(func=_phase)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (StablError, ValueError, OSError) as exc:
        print(f"stabl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
