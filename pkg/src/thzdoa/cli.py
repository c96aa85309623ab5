"""Command line entry point: ``thzdoa {sweep,spectra,gain,validate}``.

On failure a single line ``error kind=<kind> path=<json path> message=<text>``
is written to stderr and the exit code is non-zero (2 for config errors,
1 otherwise).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .harness import (
    ConfigError,
    load_config,
    load_profile,
    run_gain,
    run_spectra,
    run_sweep,
)


def _parse_snr(text: str) -> float | None:
    if text.lower() in ("inf", "noiseless", "none"):
        return None
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thzdoa", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="experiment config (JSON)")
        src.add_argument("--profile", help="shipped profile name: desk, full, split60")
        if out:
            sp.add_argument("--out", help="output CSV path (default: stdout)")
            sp.add_argument("--seed", type=int, help="override the config's master seed")

    sp = sub.add_parser("sweep", help="Monte-Carlo RMSE versus SNR")
    common(sp)
    sp.add_argument("--threads", type=int, default=1, help="worker threads, 0 = all cores")
    sp.add_argument("--timing", action="store_true", help="add a wall-clock column")

    sp = sub.add_parser("spectra", help="per-subcarrier spectra of one scenario")
    common(sp)
    sp.add_argument("--snr", type=_parse_snr, help="SNR in dB, or 'inf' for noiseless")

    sp = sub.add_parser("gain", help="array gain over the split-direction grid")
    common(sp)
    sp.add_argument("--theta", type=float, help="physical source angle in degrees")
    sp.add_argument("--subcarrier", type=int, help="1-based subcarrier index")
    sp.add_argument("--step", type=float, help="spatial grid step")

    sp = sub.add_parser("validate", help="schema-check a config and print it with defaults")
    common(sp, out=False)
    return p


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fail(kind: str, message: str, path: str = "$", code: int = 1) -> int:
    msg = " ".join(str(message).split())
    print(f"error kind={kind} path={path} message={json.dumps(msg)}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_profile(args.profile) if args.profile else load_config(args.config)
        if args.command == "validate":
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        if args.command == "sweep":
            table = run_sweep(cfg, seed=args.seed, threads=args.threads, timing=args.timing)
        elif args.command == "spectra":
            snr_given = "--snr" in (argv if argv is not None else sys.argv)
            table = run_spectra(cfg, snr_db=args.snr, seed=args.seed, use_config_snr=not snr_given)
        else:
            table = run_gain(cfg, args.theta, args.subcarrier, args.step)
        _emit(table.to_csv(), args.out)
    except ConfigError as exc:
        return _fail("config", exc, exc.path, code=2)
    except FileNotFoundError as exc:
        return _fail("io", exc)
    except (IndexError, ValueError, ArithmeticError, RuntimeError) as exc:
        return _fail("runtime", exc)
    except BrokenPipeError:
        # downstream closed early (e.g. `| head`); keep the interpreter quiet on exit
        sys.stdout = open(os.devnull, "w")
    return 0


if __name__ == "__main__":
    sys.exit(main())
