"""The four-run FOC/DTC replication protocol: both controllers at 1500 rpm,
unloaded and with a 10 N.m load step half-way through a 3 s run."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import config_from_entries, dump_config
from .harness import (ComparisonReport, RunResult, compare, export_csv, format_report,
                      report_to_entries, run_scenario, summary_to_entries, write_kv)

SPEED_REF = 1500.0
DURATION = 3.0
LOAD_TORQUE = 10.0
LOAD_STEP_TIME = 1.5
LOAD_CASES = {
    "noload": ((0.0, 0.0),),
    "loaded": ((0.0, 0.0), (LOAD_STEP_TIME, LOAD_TORQUE)),
}


@dataclass
class Replication:
    runs: dict[tuple[str, str], RunResult]
    reports: dict[str, ComparisonReport]


def replication_configs(overrides: dict[str, object] | None = None):
    """Configs keyed by ``(controller, load case)``; ``overrides`` are dotted config entries."""
    configs = {}
    for case, profile in LOAD_CASES.items():
        for controller in ("foc", "dtc"):
            entries = dict(overrides or {})
            entries.update(controller=controller, speed_ref=SPEED_REF, duration=DURATION,
                           load_profile=profile)
            configs[(controller, case)] = config_from_entries(entries)
    return configs


def replicate_paper(out_dir: str | Path | None = None, overrides: dict[str, object] | None = None,
                    workers: int = 1, figures: bool = True) -> Replication:
    """Run the protocol and, if ``out_dir`` is given, write traces, configs and reports.

    The four scenarios are independent, so ``workers > 1`` runs them in
    separate processes; results are identical either way.
    """
    configs = replication_configs(overrides)
    keys = list(configs)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(keys))) as pool:
            results = list(pool.map(run_scenario, [configs[k] for k in keys]))
    else:
        results = [run_scenario(configs[k]) for k in keys]
    runs = dict(zip(keys, results))
    reports = {case: compare(runs[("foc", case)].summary, runs[("dtc", case)].summary)
               for case in LOAD_CASES}
    if out_dir is not None:
        write_replication(Replication(runs, reports), out_dir, figures)
    return Replication(runs, reports)


def write_replication(rep: Replication, out_dir: str | Path, figures: bool = True) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for (controller, case), run in rep.runs.items():
        stem = out / f"{controller}_{case}"
        export_csv(run.trace, stem.with_suffix(".csv"))
        stem.with_suffix(".config").write_text(dump_config(run.config), encoding="utf-8")
        write_kv(summary_to_entries(run.summary), stem.with_suffix(".summary"),
                 f"{controller} {case} run summary")
    for case, report in rep.reports.items():
        title = f"FOC vs DTC, {'no load' if case == 'noload' else f'{LOAD_TORQUE:g} N.m load step'}"
        (out / f"report_{case}.txt").write_text(format_report(report, title), encoding="utf-8")
        write_kv(report_to_entries(report), out / f"report_{case}.kv", title)
    if figures:
        from .plotting import plot_comparison, plot_run
        for (controller, case), run in rep.runs.items():
            plot_run(run.trace, run.summary, out / f"{controller}_{case}.png")
        for case, report in rep.reports.items():
            plot_comparison(rep.runs[("foc", case)].trace, rep.runs[("dtc", case)].trace, report,
                            out / f"compare_{case}.png")
