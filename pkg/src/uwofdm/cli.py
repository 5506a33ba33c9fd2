"""Command-line front end: ``python -m uwofdm <subcommand>``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import channel as chmod
from . import complexity, harness
from .core import build_generator_set, energy_report, format_config, load_config, optimize_redundant_placement
from .errors import ConfigError, IoError, NumericalError, UwOfdmError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise IoError(f"cannot write {out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _energy_lines(report) -> str:
    return "".join(
        f"{name:<12}{getattr(report, name):.6f}\n"
        for name in ("E_data", "E_redundant", "E_uw", "E_total", "trace_TTH")
    )


def cmd_design(args) -> int:
    config = load_config(args.config)
    if args.optimize != "none":
        trace: list[float] = []
        config = optimize_redundant_placement(config, args.optimize, seed=args.seed, trace=trace)
        print(f"# strategy {args.optimize}, objective trace {' '.join(f'{t:.6f}' for t in trace)}")
        print(f"# redundant {','.join(map(str, config.redundant_indices))}")
    gen = build_generator_set(config)
    print(_energy_lines(energy_report(gen, config)), end="")
    if args.out:
        _emit(format_config(config), args.out)
    return EXIT_OK


def cmd_complexity(args) -> int:
    config = load_config(args.config) if args.config else None
    reports = complexity.table2_report(config)
    parts = []
    if args.format in ("text", "both"):
        parts.append(complexity.format_table(reports) + "\n")
    if args.format in ("csv", "both"):
        parts.append(complexity.format_csv(reports))
    _emit("\n".join(parts), args.out)
    return EXIT_OK


def cmd_channel(args) -> int:
    config = load_config(args.config)
    comment = ""
    if args.search:
        ch, idx = chmod.search_snapshot(args.search, config, args.tau, seed=args.seed)
        comment = f"{args.search} snapshot, tau_rms {args.tau:g} s, seed {args.seed}, draw {idx}"
    elif args.channel:
        mode = harness.parse_channel_mode(args.channel)
        if mode.kind != "snapshot":
            raise ConfigError("--channel here takes snapshot:PATH")
        ch = chmod.load_snapshot(mode.path, config)
    else:
        ch = chmod.draw_multipath(args.tau, config, args.seed)
        comment = f"multipath draw, tau_rms {args.tau:g} s, seed {args.seed}"
    if args.out:
        chmod.save_snapshot(ch, args.out, comment)
    p = chmod.power_db(ch)
    print("position,carrier,power_db")
    for i, (k, v) in enumerate(zip(config.sorted_carriers, p)):
        tag = "d" if i < config.N_d else "r"
        print(f"{tag}{i},{k},{v:.2f}")
    return EXIT_OK


def _spec_from_args(args) -> harness.RunSpec:
    overrides = dict(
        config=args.config,
        estimators=tuple(harness._split_list(args.estimators)) if args.estimators else None,
        channel=args.channel,
        ebn0_db=harness.parse_float_list(args.ebn0) if args.ebn0 else None,
        code=args.code,
        min_errors=args.min_errors,
        max_bits=args.max_bits,
        seed=args.seed,
        out=args.out,
        workers=args.workers,
    )
    if args.runspec:
        return harness.load_runspec(args.runspec, **overrides)
    return harness.parse_runspec("[run]\n", **overrides)


def cmd_simulate(args) -> int:
    spec = _spec_from_args(args)
    results = harness.run_ber(spec)
    _emit(harness.format_csv(results), spec.out)
    if args.plotdata:
        harness.emit_plotdata(results, args.plotdata)
    capped = [r for r in results if r.capped]
    for r in capped:
        print(f"note: {r.estimator} at {r.ebn0_db:g} dB stopped at max_bits with {r.bit_errors} errors", file=sys.stderr)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    config = load_config(args.config)
    kinds = tuple(harness._split_list(args.estimators or "CI,TDW"))
    if len(kinds) != 2:
        raise ConfigError("diagnose takes exactly two estimators")
    mode = harness.parse_channel_mode(args.channel or "snapshot:builtin:B")
    if mode.kind != "snapshot":
        raise ConfigError("diagnose needs a fixed snapshot channel")
    ch = chmod.load_snapshot(mode.path, config)
    grid = harness.parse_float_list(args.ebn0) if args.ebn0 else (4.0,)
    if len(grid) != 1:
        raise ConfigError("diagnose takes a single Eb/N0 value")
    diag = harness.subcarrier_diagnostics(kinds, ch, grid[0], args.max_bits or 10**6, config, args.seed or 0)
    rho = diag.spearman
    text = diag.to_text()
    text += f"# spearman {kinds[0]} {rho[0]:.4f} {kinds[1]} {rho[1]:.4f}\n"
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uwofdm", description="UW-OFDM baseband link lab")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *names):
        if "config" in names:
            sp.add_argument("--config", help="system config INI (default: bundled 64-carrier setup)")
        if "seed" in names:
            sp.add_argument("--seed", type=int, default=None)
        if "out" in names:
            sp.add_argument("--out", help="output file (default: stdout)")

    sp = sub.add_parser("design", help="build or optimize a config and print its energy split")
    common(sp, "config", "seed", "out")
    sp.add_argument("--optimize", choices=("none", "pairwise_swap_descent", "exhaustive"), default="none")
    sp.set_defaults(func=cmd_design)

    sp = sub.add_parser("complexity", help="print the CME cost table")
    common(sp, "config", "out")
    sp.add_argument("--format", choices=("text", "csv", "both"), default="both")
    sp.set_defaults(func=cmd_complexity)

    sp = sub.add_parser("channel", help="draw, search or inspect channel snapshots")
    common(sp, "config", "seed", "out")
    sp.add_argument("--channel", help="snapshot:PATH to inspect")
    sp.add_argument("--search", choices=("mild", "notch"))
    sp.add_argument("--tau", type=float, default=100e-9, help="rms delay spread in seconds")
    sp.set_defaults(func=cmd_channel)

    for name, func, helptext in (
        ("simulate", cmd_simulate, "BER sweep from a run spec and/or flags"),
        ("diagnose", cmd_diagnose, "per-subcarrier variance and BER for two estimators"),
    ):
        sp = sub.add_parser(name, help=helptext)
        if name == "simulate":
            sp.add_argument("runspec", nargs="?", help="INI file with a [run] section")
        common(sp, "config", "seed", "out")
        sp.add_argument("--estimators", help="comma-separated estimator kinds")
        sp.add_argument("--channel", help="awgn | snapshot:PATH | ensemble:COUNT[:TAU]")
        sp.add_argument("--ebn0", help="comma-separated Eb/N0 grid in dB")
        sp.add_argument("--code", choices=harness.CODES)
        sp.add_argument("--min-errors", type=int)
        sp.add_argument("--max-bits", type=int)
        sp.add_argument("--workers", type=int)
        if name == "simulate":
            sp.add_argument("--plotdata", help="also write JSON plot data here")
        sp.set_defaults(func=func)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is None and args.command in ("design", "channel"):
        args.seed = 0
    try:
        return args.func(args)
    except (ConfigError, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UwOfdmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
