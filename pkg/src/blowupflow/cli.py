"""Command-line front end.

Exit codes: 0 success, 1 I/O or configuration error, 2 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import Config, ConfigError, load_config
from .drift import ConeParams, ParameterError, State
from .experiments import (SCHEMA_VERSION, ExperimentConfig, alpha_default, check_flow_property,
                          run_drift_check, run_montecarlo, run_onepoint_longrun)
from .flow import bisect_exploding_point, flow_options, scan_segment
from .integrator import IntegratorOptions, simulate
from .noise import BrownianPath, ZeroPath, fork_replicate

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2

log = logging.getLogger("blowupflow")


def _write_json(out: Path, name: str, payload: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2))
    return path


def _cone(cfg: Config, x0: float | None = None) -> ConeParams:
    params = cfg.model()
    alpha = cfg.get("alpha", alpha_default(params.n))
    return ConeParams.build(params, alpha, cfg.get("c", 1.0), x0 if x0 is not None else cfg.get("x0"))


def _segment_path(cfg: Config, cone: ConeParams, seed: int):
    if cfg.model().sigma == 0:
        return ZeroPath()
    return fork_replicate(seed, 0, horizon=2.0 * cone.T)


def _flow_opts(cfg: Config, cone: ConeParams) -> IntegratorOptions:
    kw = {"eta": cfg.get("eta", 1e-2)}
    if "h_max" in cfg:
        kw["h_max"] = cfg.get("h_max")
    kw["R_blow"] = cfg.get("R_blow", cfg.get("r_blow_factor", 1e3) * cone.x0)
    return flow_options(cone, **kw)


def cmd_drift_check(cfg, args, out):
    rep = run_drift_check(cfg.get("n_points", 100_000), cfg.get("n_models", 20), args.seed)
    _write_json(out, "drift_check.json", rep.to_dict())
    print(f"max relative error {rep.max_rel_error:.3e} over {rep.n_points} points")
    return EXIT_OK if rep.max_rel_error <= 1e-9 else EXIT_VIOLATION


def cmd_simulate(cfg, args, out):
    cone = _cone(cfg)
    params = cfg.model()
    z0 = State(*cfg.get("z0", [cone.x0, cfg.get("y0", 0.0)]))
    opts = _flow_opts(cfg, cone)
    if "t_end" in cfg:
        opts = opts.replace(t_end=cfg.get("t_end"))
    path = ZeroPath() if params.sigma == 0 else BrownianPath(args.seed, horizon=opts.t_end)
    rec = simulate(params, cone, path, z0, opts)
    rec.meta["cone"] = cone.as_dict()
    rec.meta["seed"] = args.seed
    rec.save(out / "trajectory")
    print(f"{rec.outcome.value} at t={rec.outcome_time} after {rec.n_steps} steps")
    return EXIT_OK


def cmd_scan(cfg, args, out):
    cone = _cone(cfg)
    params = cfg.model()
    path = _segment_path(cfg, cone, args.seed)
    scan = scan_segment(params, cone, path, cfg.get("m", 65), _flow_opts(cfg, cone))
    scan.save(out / "scan")
    print("".join(scan.tags))
    return EXIT_OK


def cmd_bisect(cfg, args, out):
    cone = _cone(cfg)
    params = cfg.model()
    path = _segment_path(cfg, cone, args.seed)
    res = bisect_exploding_point(params, cone, path, cfg.get("tol", 1e-10),
                                 cfg.get("max_iter", 200), opts=_flow_opts(cfg, cone))
    _write_json(out, "bisect.json", {"cone": cone.as_dict(), "noise": path.describe(),
                                     **res.to_dict()})
    res.record.save(out / "witness")
    print(f"{res.status}: y* = {res.y_star!r}, outcome {res.record.outcome.value} "
          f"at t={res.record.outcome_time}")
    return EXIT_OK


def cmd_montecarlo(cfg, args, out):
    params = cfg.model()
    grid = cfg.get("x0_grid") or [cfg.get("x0")]
    ecfg = ExperimentConfig(
        params=params, alpha=cfg.get("alpha", alpha_default(params.n)), c=cfg.get("c", 1.0),
        x0_grid=grid, replicates=cfg.get("replicates", 100), seed=args.seed,
        m=cfg.get("m", 65), tol=cfg.get("tol", 1e-10), max_iter=cfg.get("max_iter", 200),
        eta=cfg.get("eta", 1e-2), r_blow_factor=cfg.get("r_blow_factor", 1e3),
        depth=cfg.get("depth", 16), workers=cfg.get("workers", 1),
        zero_noise=params.sigma == 0, out_dir=str(out))
    rep = run_montecarlo(ecfg)
    for row in rep.rows:
        lo, hi = row["ci_lenient"]
        print(f"x0={row['x0']:g}: lenient {row['p_lenient']:.3f} [{lo:.3f}, {hi:.3f}] "
              f"strict {row['p_strict']:.3f} B1&B2 {row['freq_b1b2']:.3f}")
    if not rep.ok:
        print(f"invariant violations: inclusion={rep.inclusion_violations} time={rep.time_violations}",
              file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_flowcheck(cfg, args, out):
    params = cfg.model()
    z0 = cfg.get("z0", [0.1, 0.0])
    t_end = cfg.get("t_end", 0.5)
    t_mid = cfg.get("t_mid", t_end / 2)
    path = ZeroPath() if params.sigma == 0 else BrownianPath(args.seed, horizon=t_end)
    opts = IntegratorOptions(t_end=t_end, h_max=cfg.get("h_max", 1e-2), eta=cfg.get("eta", 1e-2),
                             R_blow=cfg.get("R_blow", 1e6 * max(1.0, abs(z0[0]))),
                             record_stride=1_000_000)
    rep = check_flow_property(params, path, z0, t_mid, t_end, opts)
    payload = {"seed": args.seed, "z0": list(z0), "t_mid": t_mid, "t_end": t_end,
               "comparable": rep.comparable, "eta": rep.eta, "discrepancy": rep.discrepancy,
               "discrepancy_half_eta": rep.discrepancy_half, "ratio": rep.ratio}
    _write_json(out, "flowcheck.json", payload)
    if not rep.comparable:
        print("not comparable: the run blew up before t_end")
        return EXIT_OK
    print(f"discrepancy {rep.discrepancy:.3e} -> {rep.discrepancy_half:.3e} (ratio {rep.ratio:.3f})")
    return EXIT_OK if rep.decreasing or rep.discrepancy == 0 else EXIT_VIOLATION


def cmd_longrun(cfg, args, out):
    params = cfg.model()
    t_long = cfg.get("t_long", 1e3)
    summary = run_onepoint_longrun(params, cfg.get("z0", [0.0, 0.0]), t_long,
                                   cfg.get("burn_in", t_long / 10), cfg.get("stride", 100),
                                   seed=args.seed)
    summary.save(out)
    state = "numerical explosion (see diagnostics)" if summary.exploded else "no explosion"
    print(f"{state}; {summary.n_steps} steps, mean |z| {summary.moments['mean_abs']:.4g}, "
          f"{summary.excursions} excursions beyond {summary.excursion_radius:g}")
    return EXIT_OK


COMMANDS = {
    "drift-check": (cmd_drift_check, "compare binomial and polar drift on random points"),
    "simulate": (cmd_simulate, "integrate one trajectory"),
    "scan": (cmd_scan, "classify the initial segment under one noise path"),
    "bisect": (cmd_bisect, "locate a trapped, exploding initial point"),
    "montecarlo": (cmd_montecarlo, "flow blow-up probability versus x0"),
    "flowcheck": (cmd_flowcheck, "flow composition check at eta and eta/2"),
    "longrun": (cmd_longrun, "long one-point run (noise-induced stability)"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blowupflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=name != "drift-check", help="key-value config file")
        p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
        p.add_argument("--out", default="out", help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2 ** 64:
        print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_ERROR
    func = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.config) if args.config else Config()
        return func(cfg, args, Path(args.out))
    except (ConfigError, ParameterError, ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
