"""Command-line front end.

Subcommands:
  build-library     design the quantizer grid, write the library file and a
                    per-cell distortion CSV
  design-quantizer  design one quantizer and print it as JSON
  allocate          build a transmission plan for a channel realization
  simulate          run a Monte Carlo sweep from an experiment config
  ber-check         modem/channel Monte Carlo against the analytic BER model

Every command is deterministic given --seed, which is echoed into all outputs
along with the tool version and input digests. Exit codes: 0 success (for
`simulate`, additionally no distortion-target violations), 1 violations or
check failures, 2 bad arguments/config/paths, 3 infeasible allocation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from ._version import __version__
from . import channel as chan
from . import library as liblib
from . import modem
from . import simulator as sim
from .allocator import (
    LatentStats,
    NoFeasibleRateError,
    optimize_plan,
    serialize_plan,
    validate_plan,
)
from .quantizer import DesignConfig, design_channel_optimized, uniform_bsc
from .rng import stream_rng


def _design_config(args) -> DesignConfig:
    return DesignConfig(
        restarts=args.restarts, max_iters=args.max_iters, rel_tol=args.rel_tol, seed=args.seed
    )


def _add_design_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)


def _epsilon_grid(args) -> np.ndarray:
    if args.eps:
        return np.asarray(sorted(float(e) for e in args.eps))
    return liblib.log_uniform_grid(args.eps_lo, args.eps_hi, args.eps_count)


def cmd_build_library(args) -> int:
    cfg = _design_config(args)
    grid = _epsilon_grid(args)
    lib = liblib.build_library(args.b_max, grid, cfg)
    out_dir = args.out
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        lib_path = out_dir / "library.json"
        liblib.save_library(lib, lib_path)
        csv_path = out_dir / "distortions.csv"
        lines = ["b,eps_index,eps,active_count,lloyd_max_distortion,optimized_distortion"]
        from .quantizer import analytic_distortion, design_lloyd_max

        for qi, eps in enumerate(lib.epsilons):
            for b in range(1, lib.b_max + 1):
                lm = analytic_distortion(design_lloyd_max(b, cfg), uniform_bsc(b, float(eps)))
                cell = lib.quantizer(b, qi)
                lines.append(
                    f"{b},{qi},{eps!r},{cell.active_count},{lm!r},{cell.normalized_distortion!r}"
                )
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        print(f"error: cannot write outputs: {exc}", file=sys.stderr)
        return 2
    print(
        json.dumps(
            {
                "library": str(lib_path),
                "distortion_table": str(csv_path),
                "cells": len(lib.cells),
                "warnings": lib.warnings,
                "digest": lib.digest(),
                "seed": args.seed,
                "version": __version__,
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_design_quantizer(args) -> int:
    cfg = _design_config(args)
    flips = (
        uniform_bsc(args.bits, args.eps[0])
        if len(args.eps) == 1
        else np.asarray([float(e) for e in args.eps])
    )
    try:
        q = design_channel_optimized(args.bits, flips, cfg)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(
        json.dumps(
            {
                "bit_depth": q.bit_depth,
                "flips": [float(f) for f in q.designed_for],
                "thresholds": [float(t) for t in q.thresholds],
                "levels": [float(v) for v in q.levels],
                "region_codewords": [int(c) for c in q.region_codewords],
                "active_count": q.active_count,
                "distortion": q.normalized_distortion,
                "seed": args.seed,
                "version": __version__,
            },
            sort_keys=True,
        )
    )
    return 0


def _load_stats(args, lib) -> LatentStats:
    if args.stats is not None:
        with open(args.stats, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return LatentStats(np.asarray(doc["means"]), np.asarray(doc["variances"]))
    src = sim.SyntheticSourceConfig(n_latents=args.n_latents, seed=args.source_seed)
    return sim.draw_stats(src, liblib.sigma_max(lib), stream_rng("source", args.seed, args.source_seed))


def cmd_allocate(args) -> int:
    try:
        lib = liblib.load_library(args.library)
        stats = _load_stats(args, lib)
        profile = chan.parse_profile_ref(args.profile)
    except (liblib.LibraryFormatError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    realization = chan.realize_channel(
        profile, args.n_sc, args.spacing_khz * 1e3, seed=args.channel_seed
    )
    p_tot = args.n_sc * 10.0 ** (args.snr_db / 10.0)
    try:
        plan = optimize_plan(lib, stats, realization, p_tot, args.delta, seed=args.seed)
    except NoFeasibleRateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except liblib.InfeasibleTargetError as exc:
        print(f"error: {exc} (variances must be clamped to sigma_max^2)", file=sys.stderr)
        return 2
    doc = serialize_plan(plan)
    if args.out is not None:
        try:
            args.out.write_text(doc, encoding="utf-8")
        except OSError as exc:
            print(f"error: cannot write plan: {exc}", file=sys.stderr)
            return 2
    if args.check:
        validate_plan(plan, lib, stats, p_tot, args.delta)
    print(
        json.dumps(
            {
                "epsilon_star": plan.epsilon_star,
                "t_sym": plan.t_sym,
                "total_bits": plan.b_lat,
                "bits_per_symbol": plan.r_sym,
                "dummy_bits": plan.dummy_bits,
                "power_used_fraction": float(plan.powers.sum() / p_tot),
                "checked": bool(args.check),
                "seed": args.seed,
                "version": __version__,
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_simulate(args) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        src = sim.SyntheticSourceConfig(**doc.get("source", {}))
        cfg = sim.ExperimentConfig(
            source=src,
            profile_ref=doc.get("profile", "exp-pdp(300)"),
            snr_db=tuple(doc.get("snr_db", (5.0, 10.0, 15.0))),
            trials=doc.get("trials", 200),
            frames_per_realization=doc.get("frames_per_realization", 1),
            n_sc=doc.get("n_sc", chan.DEFAULT_N_SC),
            spacing_hz=doc.get("spacing_hz", chan.DEFAULT_SPACING_HZ),
            delta=doc.get("delta", liblib.DEFAULT_DELTA),
            seed=doc.get("seed", 0),
        )
        lib = liblib.load_library(doc["library"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError, liblib.LibraryFormatError) as exc:
        print(f"error: bad experiment config: {exc}", file=sys.stderr)
        return 2
    reports = sim.run_experiment(cfg, lib, keep_trials=args.detail)
    csv_text = sim.report_rows_to_csv(reports)
    try:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "report.csv").write_text(csv_text, encoding="utf-8")
        if args.detail:
            detail = {
                "version": __version__,
                "seed": cfg.seed,
                "config_digest": cfg.digest(),
                "points": [
                    {
                        "snr_db": r.snr_db,
                        "mean_distortion_per_element": [float(v) for v in r.mean_distortion_per_element],
                        "per_element_target": [float(v) for v in r.per_element_target],
                        "trials": r.trial_details,
                    }
                    for r in reports
                ],
            }
            (args.out_dir / "report.json").write_text(
                json.dumps(detail, sort_keys=True) + "\n", encoding="utf-8"
            )
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 2
    print(csv_text, end="")
    return 0 if all(r.violation_rate == 0.0 for r in reports) else 1


def cmd_ber_check(args) -> int:
    if args.library is not None:
        try:
            lib = liblib.load_library(args.library)
        except liblib.LibraryFormatError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        targets = [float(e) for e in lib.epsilons]
    else:
        targets = [float(e) for e in args.eps]
    lines = ["m,target_ber,gamma_th,empirical_ber,rel_error,bits,seed,version"]
    worst = 0.0
    for m in modem.QAM_BITS:
        for eps in targets:
            gamma = modem.snr_threshold(m, eps)
            rng = stream_rng("ber-check", args.seed, m, repr(eps))
            ber = sim.measure_link_ber(m, gamma, args.bits_per_point, rng)
            rel = abs(ber - eps) / eps
            worst = max(worst, rel)
            lines.append(
                f"{m},{eps!r},{gamma!r},{ber!r},{rel!r},{args.bits_per_point},{args.seed},{__version__}"
            )
    print("\n".join(lines))
    return 0 if worst <= args.max_rel_error else 1


def build_parser() -> argparse.ArgumentParser:
    from pathlib import Path

    parser = argparse.ArgumentParser(prog="quantlink", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-library", help="design the quantizer grid and save it")
    p.add_argument("--out", type=Path, default=Path("artifacts"))
    p.add_argument("--b-max", type=int, default=liblib.DEFAULT_B_MAX)
    p.add_argument("--eps", type=float, nargs="*", default=None)
    p.add_argument("--eps-lo", type=float, default=1e-3)
    p.add_argument("--eps-hi", type=float, default=5e-2)
    p.add_argument("--eps-count", type=int, default=10)
    _add_design_args(p)
    p.set_defaults(func=cmd_build_library)

    p = sub.add_parser("design-quantizer", help="design one quantizer, print JSON")
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--eps", type=float, nargs="+", required=True)
    _add_design_args(p)
    p.set_defaults(func=cmd_design_quantizer)

    p = sub.add_parser("allocate", help="build a transmission plan")
    p.add_argument("--library", type=Path, required=True)
    p.add_argument("--stats", type=Path, default=None)
    p.add_argument("--n-latents", type=int, default=512)
    p.add_argument("--source-seed", type=int, default=0)
    p.add_argument("--profile", type=str, default="exp-pdp(300)")
    p.add_argument("--channel-seed", type=int, default=0)
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--n-sc", type=int, default=chan.DEFAULT_N_SC)
    p.add_argument("--spacing-khz", type=float, default=30.0)
    p.add_argument("--delta", type=float, default=liblib.DEFAULT_DELTA)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--check", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("simulate", help="run a Monte Carlo sweep")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out-dir", type=Path, default=Path("artifacts"))
    p.add_argument("--detail", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ber-check", help="Monte Carlo vs the analytic BER model")
    p.add_argument("--library", type=Path, default=None)
    p.add_argument("--eps", type=float, nargs="*", default=(0.001, 0.01, 0.05))
    p.add_argument("--bits-per-point", type=int, default=1_000_000)
    p.add_argument("--max-rel-error", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ber_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad arguments; keep that convention
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
