"""Command-line entry point: ``kinetic-spectra <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .assembly import assemble_P
from .blocks import Geometry, make_block
from .grushin import grushin_blocks
from .harness.config import ConfigError, SweepConfig, default_out_dir
from .harness.sweep import run_sweep
from .harness.verify import failed, run_verify
from .spectra import SpectrumProximityError, Window, eig_block, eta_emptiness_scan, resolvent_diff_norm, window

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _window(text: str) -> Window:
    try:
        return Window(*[float(v) for v in text.split(",")])
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"window must be re_min,re_max,im_min,im_max ({exc})") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="sweep configuration (JSON)")
    common.add_argument("--out", type=Path, help="output directory (default: $KINETIC_SPECTRA_OUT or ./out)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("-v", "--verbose", action="store_true")

    block = argparse.ArgumentParser(add_help=False)
    block.add_argument("--geometry", choices=[g.value for g in Geometry], default="torus")
    block.add_argument("--param", type=float, default=1.0, help="|xi|, ell or s")
    block.add_argument("--n", type=int, default=2, help="dimension of the base")
    block.add_argument("--gamma", type=float, default=10.0)
    block.add_argument("--kmax", type=int, default=None, help="truncation radius (infinite chains)")
    block.add_argument("--C0", type=float, default=10.0)

    p = argparse.ArgumentParser(prog="kinetic-spectra", description="Spectra of kinetic Brownian motion generators, block by block.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", parents=[common, block], help="eigenvalues of one block")
    s.add_argument("--window", type=_window, default=None)
    s.add_argument("--matrix-market", action="store_true", help="also dump the assembled matrix")

    s = sub.add_parser("grushin", parents=[common, block], help="Grushin blocks at one spectral point")
    s.add_argument("--lambda", dest="lam", type=_complex, default=0j)

    s = sub.add_parser("resolvent", parents=[common, block], help="resolvent gap at one spectral point")
    s.add_argument("--lambda", dest="lam", type=_complex, default=-1 + 0j)

    sub.add_parser("sweep", parents=[common], help="gamma sweep over the configured families")

    s = sub.add_parser("scan-eta", parents=[common], help="which torus blocks keep spectrum near 0")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--max-eta", type=int, default=100, help="scan |xi|^2 = 1 .. max-eta")
    s.add_argument("--gamma", type=float, action="append", help="repeatable")
    s.add_argument("--C0", type=float, default=10.0)

    s = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    s.add_argument("--only", action="append", help="module or check name (repeatable)")
    s.add_argument("--fault", type=float, default=None, help="perturb c_0 by this relative amount")
    return p


def _out(args) -> Path:
    out = args.out if args.out is not None else default_out_dir()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _block(args):
    param = args.param
    if args.geometry == Geometry.SPHERE.value:
        if param != int(param):
            raise ValueError("sphere degree must be an integer")
        param = int(param)
    return make_block(args.geometry, param, args.n)


def cmd_spectrum(args) -> int:
    b = _block(args)
    rep = eig_block(b, args.gamma, args.kmax, args.C0)
    if args.window is not None:
        rep = window(rep, args.window)
    out = _out(args)
    path = out / "spectrum.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "parameter", "n", "gamma", "K_max", "re", "im"])
        for z in rep.eigenvalues:
            w.writerow([b.geometry.value, b.parameter, b.n, args.gamma, "" if rep.K_max is None else rep.K_max, repr(float(z.real)), repr(float(z.imag))])
    if args.matrix_market:
        assemble_P(b, args.gamma, rep.K_max).write_matrix_market(out / "P.mtx")
    print(f"{len(rep)} eigenvalues of {b.label} at gamma={args.gamma:g} -> {path}")
    if not rep.stable:
        print("warning: spectrum in |z| <= C0 not stable under K_max -> K_max + 5", file=sys.stderr)
    return EXIT_OK if rep.stable else EXIT_FAIL


def cmd_grushin(args) -> int:
    b = _block(args)
    d = grushin_blocks(b, args.gamma, args.lam, args.kmax if not b.is_finite else None)
    path = _out(args) / "grushin.json"
    payload = {"block": b.to_record(), **d.to_json()}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"E_-+ = {d.E_minusplus:.12g} (cond Q0 = {d.cond_Q0:.3e}) -> {path}")
    return EXIT_OK


def cmd_resolvent(args) -> int:
    b = _block(args)
    try:
        r = resolvent_diff_norm(b, args.gamma, args.lam, args.kmax, args.C0)
    except SpectrumProximityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{b.label} gamma={args.gamma:g} lambda={args.lam}: ||R_gamma - R_0 Pi|| = {r:.6e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.config is None:
        print("error: sweep needs --config", file=sys.stderr)
        return EXIT_USAGE
    cfg = SweepConfig.load(args.config)
    report = run_sweep(cfg, _out(args), jobs=args.jobs)
    for b in report.blocks:
        slope = "n/a" if b["slope"] is None else f"{b['slope']:.3f}"
        print(f"{'PASS' if b['pass'] else 'FAIL'}  {b['model']} p={b['parameter']:g} n={b['n']}  "
              f"final error {b['final_error']:.3e}  slope {slope}")
    for f in report.families:
        last = f["per_gamma"][-1]
        print(f"{'PASS' if f['pass'] else 'FAIL'}  family {f['geometry']}  matched distance "
              f"{last['max_matched_distance']:.3e}  unmatched targets {last['unmatched_target']}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_scan_eta(args) -> int:
    family = [make_block("torus", float(np.sqrt(k)), args.n) for k in range(1, args.max_eta + 1)]
    gammas = args.gamma or [300.0]
    scans = eta_emptiness_scan(family, gammas, args.C0)
    path = _out(args) / "scan_eta.json"
    path.write_text(json.dumps([s.to_json() for s in scans], indent=2, sort_keys=True) + "\n")
    for s in scans:
        thr = "none" if s.threshold is None else f"{s.threshold:.6g}"
        print(f"gamma={s.gamma:g}: empty for eta >= {thr}  monotone={s.monotone}")
    return EXIT_OK if all(s.monotone for s in scans) else EXIT_FAIL


def cmd_verify(args) -> int:
    results = run_verify(args.seed, args.only, args.fault)
    for r in results:
        print(r.line)
    return EXIT_FAIL if failed(results) else EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "grushin": cmd_grushin,
    "resolvent": cmd_resolvent,
    "sweep": cmd_sweep,
    "scan-eta": cmd_scan_eta,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
