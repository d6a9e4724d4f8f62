"""Command-line entry point for single runs and the three sweep families.

Exit codes: 0 success, 2 configuration error, 3 every requested point
infeasible, 4 solver failure prevented any result.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace

LOG_LEVEL_ENV = "DMA_SWIPT_LOG_LEVEL"

from dma_swipt.harness import (
    ConfigError,
    ScenarioConfig,
    SweepSpec,
    format_config,
    load_config,
    rows_to_csv,
    rows_to_json,
    run_eh_sweep,
    run_separation_sweep,
    run_sinr_montecarlo,
    _derive_seeds,
    _execute_point,
)

OUT_DIR_ENV = "DMA_SWIPT_OUT_DIR"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


def _grid(text: str):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="scenario config file (flat key=value or JSON)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--scheme", choices=["arlch", "lcph", "lcush", "aoh", "uw", "fd"])
    p.add_argument("--ps", help="ops | eps | fixed:R")
    p.add_argument("--eh-model", dest="eh_model", help="linear:eta=... | logistic:esat_dbm=...,a=...,b=...")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")
    p.add_argument("--timing", action="store_true", help="include wall-clock column in CSV output")
    p.add_argument("--paper-scale", action="store_true", help="use the full 8x64 array instead of 4x8")
    p.add_argument("--verbose", action="store_true", help="show per-solve diagnostics (rank warnings)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dma-swipt",
        description="Power-splitting SWIPT optimization for DMA-aided downlinks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="optimize a single scenario")
    _add_common(p_run)

    p_eh = sub.add_parser("sweep-eh", help="power vs harvested-energy requirement")
    _add_common(p_eh)
    p_eh.add_argument("--grid", type=_grid, default=(-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 14.0),
                      help="comma list of EH thresholds in dBm")
    p_eh.add_argument("--realizations", type=int, default=1)

    p_sep = sub.add_parser("sweep-sep", help="power vs second-user range")
    _add_common(p_sep)
    p_sep.add_argument("--grid", type=_grid, default=(0.15, 0.2, 0.3, 0.5, 0.8),
                       help="comma list of ranges in Fraunhofer-distance units "
                            "(first user sits at 0.1)")
    p_sep.add_argument("--realizations", type=int, default=1)
    p_sep.add_argument("--sigma-c-dbm", dest="sigma_c_dbm", type=float,
                       help="conversion noise level in dBm")

    p_mc = sub.add_parser("monte-carlo", help="mean power vs SINR target over random user drops")
    _add_common(p_mc)
    p_mc.add_argument("--grid", type=_grid, default=(10.0,),
                      help="comma list of SINR targets in dB")
    p_mc.add_argument("--realizations", type=int, default=50)

    p_dump = sub.add_parser("dump-config", help="print the canonical default configuration")
    p_dump.add_argument("--out", help="output file (default: stdout)")
    return parser


def _base_config(args) -> ScenarioConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    elif getattr(args, "paper_scale", False):
        cfg = ScenarioConfig()
    else:
        cfg = ScenarioConfig.desk_scale()
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "scheme", None):
        updates["scheme"] = args.scheme
    if getattr(args, "ps", None):
        updates["ps"] = args.ps
    if getattr(args, "eh_model", None):
        updates["eh_model"] = args.eh_model
    if getattr(args, "sigma_c_dbm", None) is not None:
        updates["conversion_noise_dbm"] = args.sigma_c_dbm
    if updates:
        try:
            cfg = replace(cfg, **updates)
        except ConfigError:
            raise
    return cfg


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        return
    if not os.path.isabs(out_path):
        out_path = os.path.join(os.environ.get(OUT_DIR_ENV, "."), out_path)
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write(text)


def _finish(rows, args) -> int:
    text = rows_to_csv(rows, include_timing=args.timing) if args.format == "csv" else rows_to_json(rows)
    _emit(text, args.out)
    if rows and all(r.status == "solver-failure" for r in rows):
        return EXIT_SOLVER
    if rows and not any(r.feasible for r in rows):
        return EXIT_INFEASIBLE
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "verbose", False):
        # rank diagnostics stay available in run records; suppress the log spam
        os.environ[LOG_LEVEL_ENV] = "ERROR"
        logging.getLogger("dma_swipt").setLevel(logging.ERROR)
    try:
        if args.command == "dump-config":
            _emit(format_config(ScenarioConfig()), args.out)
            return EXIT_OK
        cfg = _base_config(args)
        if args.command == "run":
            scheme = cfg.scheme
            _, opt_seed = _derive_seeds(cfg.seed, 0)
            row = _execute_point(
                ("run", cfg, None, None, scheme, cfg.ps, opt_seed, 0.0)
            )
            return _finish([row], args)
        if args.command == "sweep-eh":
            kwargs = {"eh_models": (cfg.eh_model,)} if args.eh_model else {}
            spec = SweepSpec(family="eh-threshold", grid=args.grid,
                             realizations=args.realizations, base=cfg, **kwargs)
            return _finish(run_eh_sweep(spec, parallel=args.parallel), args)
        if args.command == "sweep-sep":
            kwargs = {}
            if args.scheme:
                kwargs["schemes"] = (args.scheme,)
            if args.ps:
                kwargs["ps_modes"] = (args.ps,)
            spec = SweepSpec(family="user-separation", grid=args.grid,
                             realizations=args.realizations, base=cfg, **kwargs)
            return _finish(run_separation_sweep(spec, parallel=args.parallel), args)
        if args.command == "monte-carlo":
            if not args.config:
                cfg = replace(cfg, n_users=4)  # reference Monte Carlo uses four users
            kwargs = {}
            if args.scheme:
                kwargs["mc_set"] = ((args.scheme, args.ps or "ops"),)
            spec = SweepSpec(family="sinr-montecarlo", grid=args.grid,
                             realizations=args.realizations, base=cfg, **kwargs)
            return _finish(run_sinr_montecarlo(spec, parallel=args.parallel), args)
        parser.error(f"unknown command {args.command}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
