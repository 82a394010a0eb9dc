"""Command-line entry point: ``irs-cascade <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness
from .harness import SystemConfig, parse_bits, split_list


def _floats(text):
    return [float(x) for x in split_list(text)]


def _ints(text):
    return [int(x) for x in split_list(text)]


def _bits(text):
    return [parse_bits(x) for x in split_list(text)]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat YAML key/value file with SystemConfig fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--bits", type=_bits, help="comma list, e.g. 1,2,3,inf")
    common.add_argument("--snr", type=_floats, help="comma list of SNRs in dB")
    common.add_argument("--estimators", type=split_list,
                        help=f"comma list from {','.join(harness.ESTIMATORS)}")
    common.add_argument("--channel", choices=("rayleigh", "rician", "sparse", "geometric"))
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--no-timing", action="store_true",
                        help="write wall_ms as 0 so the CSV is reproducible byte for byte")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="irs-cascade", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep-snr", parents=[common], help="NMSE versus SNR and ADC bits")
    a = sub.add_parser("sweep-antennas", parents=[common], help="NMSE versus BS antenna count")
    a.add_argument("--antennas", type=_ints, default=[4, 16, 64])
    s = sub.add_parser("sweep-sparsity", parents=[common], help="NMSE versus angular sparsity")
    s.add_argument("--sparsity", type=_floats, default=[0.05, 0.1, 0.2, 0.4])
    sub.add_parser("trial", parents=[common], help="run a single trial and print JSON")
    sub.add_parser("selftest", parents=[common], help="quick numerical self-checks")
    return p


def resolve_config(args, **defaults) -> SystemConfig:
    cfg = harness.load_config(args.config) if args.config else SystemConfig(**defaults)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.estimators:
        changes["estimators"] = tuple(args.estimators)
    if args.channel:
        changes["channel"] = harness.dataclasses.replace(cfg.channel, kind=args.channel)
    if args.bits and len(args.bits) == 1:
        changes["bits"] = args.bits[0]
    if args.snr and len(args.snr) == 1:
        changes["snr_db"] = args.snr[0]
    return cfg.replace(**changes)


def _write(result, args):
    text = harness.format_csv(result, timing=not args.no_timing)
    if args.out:
        harness.emit_csv(result, args.out, timing=not args.no_timing)
    else:
        sys.stdout.write(text)


def selftest() -> bool:
    from .acquisition import gen_pilot_plan, gen_reflection, simulate_observation
    from .channel import gen_rayleigh
    from .geometry import UpaDims, build_transform
    from .quantizer import INFINITE, bussgang_gain, lloyd_max

    rng = np.random.default_rng(0)
    checks = []
    worst = 0.0
    for r in (1, 2, 4, 8):
        for c in (1, 2, 4, 8):
            A = build_transform(UpaDims(r, c))
            worst = max(worst, np.abs(A.conj().T @ A - np.eye(r * c)).max())
    checks.append(("transform unitarity", worst < 1e-10))

    dims = UpaDims(4, 4)
    ch = gen_rayleigh(rng, dims, dims)
    refl = gen_reflection(rng, 16, 64)
    plan = gen_pilot_plan(rng, 16, 4, 64)
    blk = simulate_observation(ch, refl, plan, INFINITE, 0.0, rng)
    rel = np.linalg.norm(blk.y - blk.Psi @ ch.h_v) / np.linalg.norm(blk.y)
    checks.append(("noiseless vec identity", rel < 1e-10))

    spec = lloyd_max(1)
    gain = bussgang_gain(spec, rng, 10 ** 5)
    checks.append(("1-bit Bussgang gain", abs(gain - 2 / np.pi) < 0.01 * 2 / np.pi))

    cfg = SystemConfig(bits=None, snr_db=40.0, trials=1, estimators=("proposed",))
    rec = harness.run_trial(cfg, harness.trial_rng(0, 0, 0))
    checks.append(("high-SNR unquantized NMSE", rec["proposed"][0] < 0.05))

    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return all(ok for _, ok in checks)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "selftest":
            return 0 if selftest() else 1
        if args.command == "sweep-snr":
            cfg = resolve_config(args)
            result = harness.sweep_snr(cfg, args.snr or [0, 10, 20, 30], args.bits or [cfg.bits])
        elif args.command == "sweep-antennas":
            cfg = resolve_config(args)
            result = harness.sweep_antennas(cfg, args.antennas)
        elif args.command == "sweep-sparsity":
            cfg = resolve_config(args, estimators=("proposed", "proposed_sparse"))
            result = harness.sweep_sparsity(cfg, args.sparsity)
        else:
            cfg = resolve_config(args)
            rng = harness.trial_rng(cfg.seed, 0, 0)
            rec = harness.run_trial(cfg, rng)
            print(json.dumps({e: {"nmse": v, "nmse_db": 10 * np.log10(v)}
                              for e, (v, _) in rec.items()}, indent=2))
            return 0
        _write(result, args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"irs-cascade: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
