"""Command-line surface.

Subcommands:
  run <config>               full simulation from a config file
  verify                     built-in acceptance suite (ten checks)
  mms                        manufactured-solution convergence tables
  galerkin <config> --k ...  spectral runs with the k-sweep bound report
  oracle                     dense-vs-Krylov Brinkman comparison

Exit code 0 iff everything requested passed; 2 for usage errors such as a
missing config file.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io, verify
from .timestepper import StepFailure


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chbsim",
        description="Diffuse-interface tumour-growth simulator and checker")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation from a config file")
    p_run.add_argument("config", help="path to the INI config")

    p_ver = sub.add_parser("verify", help="run the built-in acceptance checks")
    p_ver.add_argument("--only", default="",
                       help="comma-separated criterion numbers (default: all)")

    sub.add_parser("mms", help="manufactured-solution convergence tables")

    p_gal = sub.add_parser("galerkin",
                           help="spectral k-sweep with bound report")
    p_gal.add_argument("config", help="path to the INI config")
    p_gal.add_argument("--k", default="1,5,15,30",
                       help="comma-separated mode cutoffs")

    sub.add_parser("oracle", help="dense-vs-Krylov Brinkman comparison")
    return parser


def _load_config(path: str, parser: argparse.ArgumentParser):
    """Config loading with the CLI error contract (missing file -> 2)."""
    if not Path(path).is_file():
        print(parser.format_usage(), end="", file=sys.stderr)
        print(f"chbsim: error: config file not found: {path}", file=sys.stderr)
        return None
    return io.load_config(path)


def _cmd_run(args, parser) -> int:
    cfg = _load_config(args.config, parser)
    if cfg is None:
        return 2
    try:
        result, outdir = io.run_from_config(cfg)
    except StepFailure as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        print("partial outputs were written.", file=sys.stderr)
        return 1
    last = result.rows[-1]
    print(f"completed {len(result.reports)} steps to t = {last['t']:g}")
    print(f"energy {result.rows[0]['energy']:.6g} -> {last['energy']:.6g}, "
          f"phi range [{last['phi_min']:.3f}, {last['phi_max']:.3f}]")
    print(f"outputs in {outdir}")
    return 0


def _cmd_verify(args) -> int:
    indices = None
    if args.only.strip():
        indices = [int(tok) for tok in args.only.split(",") if tok.strip()]
    results = verify.run_all(indices=indices,
                             progress=lambda res: print(res.line(), flush=True))
    return 0 if all(r.passed for r in results) else 1


def _print_order_table(title: str, ns, hs, errs, order, bracket) -> bool:
    print(title)
    print("  nx        h             L2 error")
    for n, h, e in zip(ns, hs, errs):
        print(f"  {n:<8d}  {h:<12.6g}  {e:.6e}")
    lo, hi = bracket
    ok = lo <= order <= hi
    print(f"  fitted order = {order:.3f} (expected within [{lo}, {hi}]) "
          f"{'ok' if ok else 'FAIL'}")
    return ok


def _cmd_mms() -> int:
    sizes = (16, 32, 64, 128)
    hs, errs, order = verify.poisson_convergence(sizes)
    ok = _print_order_table("Neumann-Poisson manufactured solution",
                            sizes, hs, errs, order, (1.8, 2.2))
    hs, errs, order = verify.robin_convergence(sizes)
    ok &= _print_order_table("Robin-diffusion manufactured solution",
                             sizes, hs, errs, order, (1.8, 2.2))
    dts, gaps, order = verify.coupled_dt_convergence()
    print("coupled one-step self-convergence (fixed horizon)")
    print("  dt            |phi(dt) - phi(dt/2)|_L2")
    for dt, gap in zip(dts[:-1], gaps):
        print(f"  {dt:<12.6g}  {gap:.6e}")
    ok_t = 0.8 <= order <= 1.2
    print(f"  fitted order = {order:.3f} (expected within [0.8, 1.2]) "
          f"{'ok' if ok_t else 'FAIL'}")
    return 0 if (ok and ok_t) else 1


def _cmd_galerkin(args, parser) -> int:
    cfg = _load_config(args.config, parser)
    if cfg is None:
        return 2
    ks = sorted({int(tok) for tok in args.k.split(",") if tok.strip()})
    if not ks:
        print("chbsim: error: empty --k list", file=sys.stderr)
        return 2
    model = cfg.model_spec()
    phi0, sigma0 = cfg.initial_fields()
    steps = cfg.n_steps
    table = verify.galerkin_sweep(model, phi0, sigma0, ks, cfg.dt, steps)

    names = list(next(iter(table.values())).keys())
    print(f"bounded quantities over {steps} RK4 steps, dt = {cfg.dt:g}")
    header = "  quantity" + " " * 12 + "".join(f"k={k:<12d}" for k in ks)
    print(header)
    for name in names:
        row = "".join(f"{table[k][name]:<14.6g}" for k in ks)
        print(f"  {name:<20s}{row}")
    finite = all(np.isfinite(v) for norms in table.values()
                 for v in norms.values())
    ok = finite
    if len(ks) >= 2:
        k_lo, k_hi = ks[-2], ks[-1]
        worst = max(abs(table[k_hi][n] - table[k_lo][n])
                    / max(abs(table[k_hi][n]), 1e-12) for n in names)
        ok = finite and worst < 0.2
        print(f"max relative gap between k={k_lo} and k={k_hi}: {worst:.4f} "
              f"(< 0.2) {'ok' if ok else 'FAIL'}")
    elif not finite:
        print("non-finite quantities encountered FAIL")
    return 0 if ok else 1


def _cmd_oracle() -> int:
    cache = verify.Cache()
    results = [verify.criterion_1(cache), verify.criterion_2(cache)]
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv: list | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args, parser)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "mms":
            return _cmd_mms()
        if args.command == "galerkin":
            return _cmd_galerkin(args, parser)
        if args.command == "oracle":
            return _cmd_oracle()
    except io.ConfigError as exc:
        print(f"chbsim: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"chbsim: error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


cli_main = main

if __name__ == "__main__":
    sys.exit(main())
