"""Closed-loop scenario runner, trace export and FOC/DTC comparison."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ScenarioConfig
from .dtc import DtcMemory, dtc_speed_step
from .errors import ConfigError, SimulationError
from .foc import FocState, foc_step
from .inverter import SwitchState, output_voltage
from .machine import SQRT3, TWO_PI, PlantCoefficients, rk4_advance
from .metrics import (RippleStats, SwitchingCounter, median_frequency, record_transition,
                      switching_loss_proxy, torque_ripple, window_frequency)

TRACE_COLUMNS = ("t", "omega_m_rpm", "T_e", "T_load", "lambda", "i_a", "i_b", "i_c",
                 "s_a", "s_b", "s_c", "f_sw", "T_ref")
SPEED_BAND = 0.01
RAD_S_TO_RPM = 60.0 / TWO_PI


@dataclass
class Trace:
    """Column store of logged rows, one array per ``TRACE_COLUMNS`` entry."""

    columns: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @classmethod
    def empty(cls) -> Trace:
        return cls({name: np.zeros(0) for name in TRACE_COLUMNS})


@dataclass
class ScenarioSummary:
    controller: str
    speed_ref: float
    load_profile: tuple[tuple[float, float], ...]
    f_sw_median: float
    ripple: RippleStats | None
    speed_error_pct: float
    settle_time: float
    recovery_times: tuple[float, ...]
    window_frequencies: tuple[tuple[float, float, float], ...] = ()
    loss_proxy_median: float = math.nan
    bands: dict[str, float] = field(default_factory=dict)
    defaults_used: tuple[str, ...] = ()


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: Trace
    summary: ScenarioSummary
    controller_calls: int = 0


def _settle_time(t: np.ndarray, speed: np.ndarray, ref: float, t_end: float) -> float:
    """Earliest time after which speed stays within the band until ``t_end``."""
    mask = t <= t_end
    t, speed = t[mask], speed[mask]
    if t.size == 0:
        return math.nan
    outside = np.abs(speed - ref) > SPEED_BAND * abs(ref)
    if not outside.any():
        return float(t[0])
    last = int(np.nonzero(outside)[0][-1])
    return float(t[last + 1]) if last + 1 < t.size else math.nan


def _speed_metrics(config: ScenarioConfig, t: np.ndarray, speed: np.ndarray):
    ref = config.omega_ref
    steps = [ts for ts, torque in config.load_profile if ts > 0.0]
    first_step = steps[0] if steps else config.duration
    settle = _settle_time(t, speed, ref, first_step)
    recoveries = []
    for i, ts in enumerate(steps):
        end = steps[i + 1] if i + 1 < len(steps) else config.duration
        sel = t >= ts
        recovery = _settle_time(t[sel], speed[sel], ref, end)
        recoveries.append(recovery - ts if math.isfinite(recovery) else math.nan)
    t0 = config.duration - config.steady_window
    steady = speed[t >= t0 - 1e-12]
    error = 100.0 * (float(np.mean(steady)) - ref) / ref if steady.size and ref else math.nan
    return settle, tuple(recoveries), error


def run_scenario(config: ScenarioConfig) -> RunResult:
    """Simulate one closed-loop scenario.

    The plant advances every ``plant_dt``; the controller runs at the end
    of each control period and its leg commands are held until the next
    call.  Transitions are counted at full rate regardless of
    ``trace_decimation``.  Every ``trace_decimation``-th step is logged,
    starting with the first, and the final step is always logged so the
    last completed window's frequency appears in the trace.
    """
    motor = config.motor
    coef = PlantCoefficients.from_params(motor)
    a_ss, a_sr = coef.a_ss, coef.a_sr
    dt = config.plant_dt
    n_steps = config.n_plant_steps
    ratio = config.ctrl_ratio
    w_steps = config.window_steps
    decimation = config.trace_decimation
    omega_ref = config.omega_ref
    V_dc = motor.V_dc
    R_s, p = motor.R_s, motor.p
    use_foc = config.controller == "foc"

    if use_foc:
        foc_state = FocState.initial(config.foc)
    else:
        dtc_mem = DtcMemory.initial(config.foc.Kp, config.foc.Ki, config.foc.T_max)

    load_times = [t for t, _ in config.load_profile]
    load_values = [v for _, v in config.load_profile]
    next_load = 0
    t_load = 0.0

    steady_k0 = n_steps - int(round(config.steady_window / dt))
    ripple_t, ripple_T = [], []
    ctrl_t, ctrl_w = [], []
    rows: list[tuple] = []
    windows: list[tuple[float, float, float]] = []
    losses: list[float] = []

    switch = SwitchState(0, 0, 0)
    va, vb = output_voltage(switch, V_dc)
    counter = SwitchingCounter(window_length=config.window)
    window_start_k = 0
    last_f = math.nan
    calls = 0

    x = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    rk4 = rk4_advance
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * dt
        while next_load < len(load_times) and t_prev >= load_times[next_load] - 1e-12:
            t_load = load_values[next_load]
            next_load += 1
        x = rk4(x, va, vb, t_load, dt, coef, False)
        lsa, lsb, lra, lrb, w, th = x
        if th >= TWO_PI or th < 0.0:
            x = (lsa, lsb, lra, lrb, w, th % TWO_PI)
        t = k * dt
        isa = a_ss * lsa - a_sr * lra
        isb = a_ss * lsb - a_sr * lrb
        te = coef.torque_k * (lsa * isb - lsb * isa)

        if k - window_start_k == w_steps:
            counter.elapsed = (k - window_start_k) * dt
            last_f = window_frequency(counter)
            windows.append((window_start_k * dt, t, last_f))
            losses.append(switching_loss_proxy(counter, V_dc))
            window_start_k = k
            counter.reset(t)

        if k % ratio == 0:
            if not (math.isfinite(w) and math.isfinite(te) and math.isfinite(lra + lrb)):
                raise SimulationError("non-finite plant state", t)
            calls += 1
            i_abc = (isa, -0.5 * isa + 0.5 * SQRT3 * isb, -0.5 * isa - 0.5 * SQRT3 * isb)
            if use_foc:
                new = foc_step(omega_ref, w, i_abc, config.foc, foc_state, motor)
            else:
                new = dtc_speed_step(omega_ref, w, (va, vb), (isa, isb), dtc_mem, config.dtc, R_s, p)
            if new != switch:
                record_transition(counter, switch, new, i_abc)
                switch = new
                va, vb = output_voltage(switch, V_dc)
            ctrl_t.append(t)
            ctrl_w.append(w)

        if k > steady_k0:
            ripple_t.append(t)
            ripple_T.append(te)

        if (k - 1) % decimation == 0 or k == n_steps:
            i_a = isa
            i_b = -0.5 * isa + 0.5 * SQRT3 * isb
            i_c = -0.5 * isa - 0.5 * SQRT3 * isb
            if use_foc:
                lam, t_ref = math.hypot(lsa, lsb), foc_state.T_ref
            else:
                lam, t_ref = dtc_mem.estimate.lam, dtc_mem.T_ref
            rows.append((t, w * RAD_S_TO_RPM, te, t_load, lam, i_a, i_b, i_c,
                         switch[0], switch[1], switch[2], last_f, t_ref))

    if not all(math.isfinite(v) for v in x):
        raise SimulationError("non-finite plant state", n_steps * dt)

    if rows:
        data = np.array(rows, dtype=float)
        trace = Trace({name: data[:, j].copy() for j, name in enumerate(TRACE_COLUMNS)})
    else:
        trace = Trace.empty()

    t0 = config.duration - config.steady_window
    ripple = (torque_ripple(ripple_t, ripple_T, (t0, config.duration))
              if len(ripple_t) >= 2 else None)
    settle, recoveries, speed_error = _speed_metrics(config, np.array(ctrl_t), np.array(ctrl_w))
    steady_losses = [loss for (start, end, _), loss in zip(windows, losses)
                     if start >= t0 - 1e-9]
    bands = ({"foc.i_band": config.foc.i_band} if use_foc else
             {"dtc.torque_band": config.dtc.torque_band, "dtc.flux_band": config.dtc.flux_band})
    summary = ScenarioSummary(
        controller=config.controller,
        speed_ref=config.speed_ref,
        load_profile=config.load_profile,
        f_sw_median=median_frequency(windows, t0, config.duration),
        ripple=ripple,
        speed_error_pct=speed_error,
        settle_time=settle,
        recovery_times=recoveries,
        window_frequencies=tuple(windows),
        loss_proxy_median=float(np.median(steady_losses)) if steady_losses else math.nan,
        bands=bands,
        defaults_used=config.defaults_used,
    )
    return RunResult(config, trace, summary, calls)


# ---------------------------------------------------------------------------
# comparison

@dataclass(frozen=True)
class ComparisonReport:
    speed_ref: float
    load_profile: tuple[tuple[float, float], ...]
    foc: ScenarioSummary
    dtc: ScenarioSummary
    frequency_ratio: float
    percent_excess: float
    ripple_ratio: float


def frequency_excess(f_foc: float, f_dtc: float) -> float:
    """Percent by which the FOC switching frequency exceeds DTC's."""
    return 100.0 * (f_foc - f_dtc) / f_dtc


def compare(run_a: ScenarioSummary, run_b: ScenarioSummary) -> ComparisonReport:
    if {run_a.controller, run_b.controller} != {"foc", "dtc"}:
        raise ConfigError("comparison needs one FOC and one DTC run", "controller")
    if not math.isclose(run_a.speed_ref, run_b.speed_ref):
        raise ConfigError("runs have different speed references", "speed_ref")
    if len(run_a.load_profile) != len(run_b.load_profile) or not all(
            math.isclose(ta, tb) and math.isclose(va, vb, abs_tol=1e-12)
            for (ta, va), (tb, vb) in zip(run_a.load_profile, run_b.load_profile)):
        raise ConfigError("runs have different load profiles", "load_profile")
    foc, dtc = (run_a, run_b) if run_a.controller == "foc" else (run_b, run_a)
    ripple_ratio = math.nan
    if foc.ripple is not None and dtc.ripple is not None and foc.ripple.peak_to_peak > 0:
        ripple_ratio = dtc.ripple.peak_to_peak / foc.ripple.peak_to_peak
    return ComparisonReport(
        speed_ref=foc.speed_ref,
        load_profile=foc.load_profile,
        foc=foc,
        dtc=dtc,
        frequency_ratio=foc.f_sw_median / dtc.f_sw_median,
        percent_excess=frequency_excess(foc.f_sw_median, dtc.f_sw_median),
        ripple_ratio=ripple_ratio,
    )


# ---------------------------------------------------------------------------
# serialization

def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return f"{value + 0.0:.9g}"  # + 0.0 folds -0.0 into 0


def export_csv(trace: Trace, path: str | Path) -> None:
    """Write the trace with a header row; NaN cells (no completed window yet) are blank."""
    cols = [trace[name] for name in TRACE_COLUMNS]
    int_cols = {"s_a", "s_b", "s_c"}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for j in range(len(trace)):
            writer.writerow([str(int(col[j])) if name in int_cols else _fmt(float(col[j]))
                             for name, col in zip(TRACE_COLUMNS, cols)])


def read_csv(path: str | Path) -> Trace:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ConfigError(f"unexpected CSV header {header}")
        rows = [[float(cell) if cell else math.nan for cell in row] for row in reader]
    if not rows:
        return Trace.empty()
    data = np.array(rows, dtype=float)
    return Trace({name: data[:, j].copy() for j, name in enumerate(TRACE_COLUMNS)})


def summary_to_entries(summary: ScenarioSummary) -> dict[str, str]:
    r = summary.ripple
    entries = {
        "controller": summary.controller,
        "speed_ref": _fmt(summary.speed_ref),
        "load_profile": cfgmod.format_load_profile(summary.load_profile),
        "f_sw_median": _fmt(summary.f_sw_median),
        "ripple.mean": _fmt(r.mean) if r else "",
        "ripple.peak_to_peak": _fmt(r.peak_to_peak) if r else "",
        "ripple.std_dev": _fmt(r.std_dev) if r else "",
        "ripple.t0": _fmt(r.window[0]) if r else "",
        "ripple.t1": _fmt(r.window[1]) if r else "",
        "speed_error_pct": _fmt(summary.speed_error_pct),
        "settle_time": _fmt(summary.settle_time),
        "recovery_times": ", ".join(_fmt(v) for v in summary.recovery_times),
        "loss_proxy_median": _fmt(summary.loss_proxy_median),
        "window_frequencies": ", ".join(f"{s:.9g}:{e:.9g}:{f:.9g}"
                                        for s, e, f in summary.window_frequencies),
    }
    for key, value in summary.bands.items():
        entries[f"band.{key}"] = _fmt(value)
    entries["defaults_used"] = ", ".join(summary.defaults_used)
    return entries


def write_kv(entries: dict[str, str], path: str | Path, title: str) -> None:
    lines = [f"# {title}"] + [f"{k} = {v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_kv(path: str | Path) -> dict[str, str]:
    entries = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def _num(text: str) -> float:
    return float(text) if text else math.nan


def summary_from_entries(entries: dict[str, str]) -> ScenarioSummary:
    try:
        ripple = None
        if entries.get("ripple.peak_to_peak"):
            ripple = RippleStats(_num(entries["ripple.mean"]), _num(entries["ripple.peak_to_peak"]),
                                 _num(entries["ripple.std_dev"]),
                                 (_num(entries["ripple.t0"]), _num(entries["ripple.t1"])))
        windows = []
        for chunk in filter(None, (c.strip() for c in entries.get("window_frequencies", "").split(","))):
            s, e, f = chunk.split(":")
            windows.append((float(s), float(e), float(f)))
        return ScenarioSummary(
            controller=entries["controller"],
            speed_ref=float(entries["speed_ref"]),
            load_profile=cfgmod.parse_load_profile(entries["load_profile"]),
            f_sw_median=_num(entries["f_sw_median"]),
            ripple=ripple,
            speed_error_pct=_num(entries.get("speed_error_pct", "")),
            settle_time=_num(entries.get("settle_time", "")),
            recovery_times=tuple(_num(v.strip()) for v in entries.get("recovery_times", "").split(",")
                                 if v.strip()),
            window_frequencies=tuple(windows),
            loss_proxy_median=_num(entries.get("loss_proxy_median", "")),
            bands={k[5:]: float(v) for k, v in entries.items() if k.startswith("band.") and v},
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed summary: {exc}") from None


def summary_from_trace(trace: Trace, config: ScenarioConfig) -> ScenarioSummary:
    """Rebuild a summary from a (possibly decimated) CSV trace.

    Window frequencies are read back from the ``f_sw`` column at the first
    logged row at or after each window end, so they match the in-run
    values whenever the logging interval is shorter than the window.
    """
    t = trace["t"]
    t0 = config.duration - config.steady_window
    windows = []
    n_windows = int(round(config.duration / config.window))
    for j in range(1, n_windows + 1):
        end = j * config.window
        idx = np.searchsorted(t, end - 1e-12)
        if idx < len(t) and t[idx] < end + config.window - 1e-12 and not math.isnan(trace["f_sw"][idx]):
            windows.append((end - config.window, end, float(trace["f_sw"][idx])))
    mask = t >= t0 - 1e-12
    ripple = torque_ripple(t, trace["T_e"], (t0, config.duration)) if mask.sum() >= 2 else None
    omega = trace["omega_m_rpm"] / RAD_S_TO_RPM
    settle, recoveries, speed_error = _speed_metrics(config, t, omega)
    bands = ({"foc.i_band": config.foc.i_band} if config.controller == "foc" else
             {"dtc.torque_band": config.dtc.torque_band, "dtc.flux_band": config.dtc.flux_band})
    return ScenarioSummary(config.controller, config.speed_ref, config.load_profile,
                           median_frequency(windows, t0, config.duration), ripple, speed_error,
                           settle, recoveries, tuple(windows), math.nan, bands,
                           config.defaults_used)


def format_report(report: ComparisonReport, title: str = "") -> str:
    lines = []
    if title:
        lines += [title, "=" * len(title)]
    lines.append(f"speed reference   : {report.speed_ref:.6g} rpm")
    lines.append(f"load profile      : {cfgmod.format_load_profile(report.load_profile)} (s:N.m)")
    lines.append("")
    lines.append(f"{'':18s}{'FOC':>12s}{'DTC':>12s}")
    for label, fn in (
            ("f_sw median [Hz]", lambda s: s.f_sw_median),
            ("ripple p2p [N.m]", lambda s: s.ripple.peak_to_peak if s.ripple else math.nan),
            ("ripple std [N.m]", lambda s: s.ripple.std_dev if s.ripple else math.nan),
            ("mean T_e [N.m]", lambda s: s.ripple.mean if s.ripple else math.nan),
            ("speed error [%]", lambda s: s.speed_error_pct),
            ("loss proxy [J]", lambda s: s.loss_proxy_median)):
        lines.append(f"{label:18s}{fn(report.foc):12.4f}{fn(report.dtc):12.4f}")
    lines.append("")
    lines.append(f"FOC/DTC frequency ratio : {report.frequency_ratio:.4f}")
    lines.append(f"FOC frequency excess    : {report.percent_excess:.2f} %")
    lines.append(f"DTC/FOC ripple ratio    : {report.ripple_ratio:.4f}")
    bands = {**report.foc.bands, **report.dtc.bands}
    lines.append("hysteresis bands        : " + ", ".join(f"{k}={v:.6g}" for k, v in bands.items()))
    return "\n".join(lines) + "\n"


def report_to_entries(report: ComparisonReport) -> dict[str, str]:
    entries = {
        "speed_ref": _fmt(report.speed_ref),
        "load_profile": cfgmod.format_load_profile(report.load_profile),
        "frequency_ratio": _fmt(report.frequency_ratio),
        "percent_excess": _fmt(report.percent_excess),
        "ripple_ratio": _fmt(report.ripple_ratio),
    }
    for name, summary in (("foc", report.foc), ("dtc", report.dtc)):
        for key, value in summary_to_entries(summary).items():
            if key not in ("window_frequencies", "defaults_used"):
                entries[f"{name}.{key}"] = value
    return entries
