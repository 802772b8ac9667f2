"""Command-line entry point (``cslheat``)."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .audit import lambda_bound
from .config import load_config
from .core import CslParams, preset_trap, species_by_name, t_csl_of
from .errors import ConfigError, ConvergenceError, DataError, DomainError
from .fitting import fit_fraction_decay, fit_number_decay
from .io import format_csv, ingest_series, to_json
from .pipeline import run_pipeline, simulate_bec_decay, simulate_cloud


def _common(defaults: bool) -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=d(None), help="RNG seed (default 0, or the config value)")
    p.add_argument("--tol", type=float, default=d(None), help="numerical tolerance")
    p.add_argument("--out", type=Path, default=d(None), help="output directory (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=d("json"))
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common(False)
    parser = argparse.ArgumentParser(prog="cslheat", description="CSL heating of trapped Bose gases: simulation, fits, energy audit.", parents=[_common(True)])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a CSL simulation", parents=[common])
    simsub = sim.add_subparsers(dest="mode", required=True)
    bd = simsub.add_parser("bec-decay", help="condensate population N(t)", parents=[common])
    bd.add_argument("--n0", type=float, required=True)
    bd.add_argument("--lambda", dest="lam", type=float, required=True, help="collapse rate (1/s)")
    bd.add_argument("--a", type=float, default=1e-7, help="localisation length (m)")
    bd.add_argument("--species", default="Cs-133")
    bd.add_argument("--t-max", type=float, required=True, help="s")
    bd.add_argument("--steps", type=int, default=100)
    bd.add_argument("--correction", type=float, default=0.0, help="C*(a/sigma)^3 ground-state correction")

    cl = simsub.add_parser("cloud", help="energy spectra at time slices", parents=[common])
    cl.add_argument("--temp-nk", type=float, default=0.0, help="initial temperature; 0 starts from a condensate")
    cl.add_argument("--n", type=float, default=5000.0, help="atom number")
    cl.add_argument("--hbar-omega-nk", type=float, default=5.0, help="level spacing (nK)")
    cl.add_argument("--eps1-nk", type=float, default=None, help="condensate energy (default hbar*omega/2)")
    grp = cl.add_mutually_exclusive_group(required=True)
    grp.add_argument("--lambda", dest="lam", type=float, help="collapse rate (1/s)")
    grp.add_argument("--rate-a2", type=float, help="lambda*A^2 directly (1/s)")
    cl.add_argument("--a", type=float, default=1e-7)
    cl.add_argument("--species", default="Cs-133")
    cl.add_argument("--t-csl-nk", type=float, default=None, help="override T_CSL (nK)")
    cl.add_argument("--t-max", type=float, required=True)
    cl.add_argument("--slices", type=int, default=5)

    fit = sub.add_parser("fit", help="fit a decay series", parents=[common])
    fitsub = fit.add_subparsers(dest="kind", required=True)
    fn = fitsub.add_parser("number", help="atom-number decay (K3, N0, tau_cool)", parents=[common])
    fn.add_argument("--data", type=Path, required=True)
    fn.add_argument("--trap", required=True, help="preset trap name (1-4)")
    fn.add_argument("--f0", type=float, required=True, help="initial condensate fraction")
    ff = fitsub.add_parser("fraction", help="condensate-fraction decay (f0, tau_f)", parents=[common])
    ff.add_argument("--data", type=Path, required=True)
    ff.add_argument("--trap", default=None, help="accepted for symmetry; unused")

    au = sub.add_parser("audit", help="full pipeline from a config file", parents=[common])
    au.add_argument("--config", type=Path, required=True)

    li = sub.add_parser("limit", help="lambda bound from a residual heating rate", parents=[common])
    li.add_argument("--rin", type=float, required=True, help="nK/s per atom")
    li.add_argument("--rin-sigma", type=float, default=0.0)
    li.add_argument("--species", default="Cs-133")
    li.add_argument("--a", type=float, default=1e-7)
    return parser


def _emit(args, name: str, payload=None, header=None, rows=None):
    if payload is not None and args.format == "json":
        text = to_json(payload)
    elif rows is not None:
        text = format_csv(header, rows)
    else:
        text = format_csv(["key", "value"], [(k, v) for k, v in payload.items() if not isinstance(v, (list, dict))])
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        ext = "json" if text.startswith("{") else "csv"
        (args.out / f"{name}.{ext}").write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    species = species_by_name(args.species)
    tol = args.tol or 1e-12
    if args.mode == "bec-decay":
        rate = CslParams(args.lam, args.a).rate_A2(species)
        rows = simulate_bec_decay(args.n0, rate, args.t_max, args.steps, args.correction)
        _emit(args, "bec_decay", header=["t_s", "N"], rows=rows)
        return 0
    rate = args.rate_a2 if args.rate_a2 is not None else CslParams(args.lam, args.a).rate_A2(species)
    t_csl = args.t_csl_nk or t_csl_of(species, args.a)
    rows, ground = simulate_cloud(args.n, rate, t_csl, args.t_max, args.slices, args.temp_nk, args.hbar_omega_nk, args.eps1_nk, tol=tol)
    _emit(args, "spectrum_cloud", header=["t_s", "eps_nK", "N_per_nK"], rows=rows)
    if ground and args.out:
        _emit(args, "spectrum_ground", header=["t_s", "N"], rows=ground)
    return 0


def _cmd_fit(args) -> int:
    if args.kind == "fraction":
        res = fit_fraction_decay(ingest_series(args.data, "condensate_fraction"))
    else:
        trap = preset_trap(args.trap)
        res = fit_number_decay(ingest_series(args.data, "particle_number"), trap, trap.species, f0=args.f0)
    _emit(args, f"fit_{args.kind}", payload=res.to_dict())
    return 0


def _cmd_limit(args) -> int:
    species = species_by_name(args.species)
    lam, sd, constraining = lambda_bound(args.rin, args.rin_sigma, species, args.a)
    payload = {
        "r_in_nK_per_s": args.rin,
        "r_in_sigma_nK_per_s": args.rin_sigma,
        "lambda_bound_per_s": lam,
        "lambda_sigma_per_s": sd,
        "constraining": constraining,
        "t_csl_nK": t_csl_of(species, args.a),
        "a_csl_m": args.a,
        "species": species.name,
    }
    _emit(args, "limit", payload=payload)
    return 0


def _cmd_audit(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.tol is not None:
        cfg.tol = args.tol
    code = run_pipeline(cfg, out_dir=args.out)
    out = args.out or cfg.output_dir
    print(f"report written to {out}{' (partial)' if code else ''}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"simulate": _cmd_simulate, "fit": _cmd_fit, "audit": _cmd_audit, "limit": _cmd_limit}
    try:
        return handlers[args.command](args)
    except (ConfigError, DataError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
