"""Command-line entry point: ``vecdrive simulate|compare|replicate-paper``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import config_from_entries, dump_config, parse_config_text
from .errors import ConfigError, SimulationError
from .harness import (compare, export_csv, format_report, read_csv, read_kv, report_to_entries,
                      run_scenario, summary_from_entries, summary_from_trace, summary_to_entries,
                      write_kv)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vecdrive", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one closed-loop scenario")
    sim.add_argument("--config", type=Path, help="scenario config file")
    sim.add_argument("--controller", choices=("foc", "dtc"))
    sim.add_argument("--load-torque", type=float,
                     help="load torque in N.m, applied as a step at half the run duration")
    sim.add_argument("--speed", type=float, help="speed reference in rpm")
    sim.add_argument("--out", type=Path, default=Path("run.csv"), help="trace CSV path")
    sim.add_argument("--no-figures", action="store_true", help="skip the PNG figure")

    cmp_ = sub.add_parser("compare", help="compare a FOC and a DTC run")
    cmp_.add_argument("--a", type=Path, required=True, help="summary file, or CSV with .config sidecar")
    cmp_.add_argument("--b", type=Path, required=True)
    cmp_.add_argument("--out", type=Path, help="also write the report as key-value text")

    rep = sub.add_parser("replicate-paper", help="run the four-scenario FOC/DTC comparison")
    rep.add_argument("--out-dir", type=Path, default=Path("replication"))
    rep.add_argument("--workers", type=int, default=1, help="parallel scenario processes")
    rep.add_argument("--no-figures", action="store_true")
    return parser


def _simulate(args) -> int:
    entries = {}
    if args.config is not None:
        entries = parse_config_text(args.config.read_text(encoding="utf-8"))
    if args.controller is not None:
        entries["controller"] = args.controller
    if args.speed is not None:
        entries["speed_ref"] = args.speed
    if args.load_torque is not None:
        duration = entries.get("duration", config_from_entries(entries).duration)
        entries["load_profile"] = ((0.0, 0.0), (duration / 2.0, args.load_torque))
    config = config_from_entries(entries)
    result = run_scenario(config)
    out = args.out
    out.parent.mkdir(parents=True, exist_ok=True)
    export_csv(result.trace, out)
    out.with_suffix(".config").write_text(dump_config(config), encoding="utf-8")
    write_kv(summary_to_entries(result.summary), out.with_suffix(".summary"),
             f"{config.controller} run summary")
    if not args.no_figures:
        from .plotting import plot_run
        plot_run(result.trace, result.summary, out.with_suffix(".png"))
    s = result.summary
    print(f"controller={config.controller} f_sw_median={s.f_sw_median:.6g} Hz "
          f"ripple_p2p={s.ripple.peak_to_peak if s.ripple else float('nan'):.6g} N.m "
          f"speed_error={s.speed_error_pct:.4g} %")
    return EXIT_OK


def _load_summary(path: Path):
    if path.suffix == ".csv":
        from .config import load_config
        config = load_config(path.with_suffix(".config"))
        return summary_from_trace(read_csv(path), config)
    return summary_from_entries(read_kv(path))


def _compare(args) -> int:
    report = compare(_load_summary(args.a), _load_summary(args.b))
    sys.stdout.write(format_report(report, "FOC vs DTC"))
    if args.out is not None:
        write_kv(report_to_entries(report), args.out, "FOC vs DTC")
    return EXIT_OK


def _replicate(args) -> int:
    from .replicate import replicate_paper
    rep = replicate_paper(args.out_dir, workers=args.workers, figures=not args.no_figures)
    for case, report in rep.reports.items():
        sys.stdout.write(format_report(report, f"FOC vs DTC ({case})"))
        sys.stdout.write("\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"simulate": _simulate, "compare": _compare, "replicate-paper": _replicate}[args.command]
    try:
        return handler(args)
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
