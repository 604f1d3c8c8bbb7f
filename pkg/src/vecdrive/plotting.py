"""Figure rendering for runs and comparisons (non-interactive Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import ComparisonReport, ScenarioSummary, Trace  # noqa: E402


def plot_run(trace: Trace, summary: ScenarioSummary, path: str | Path) -> Path:
    """Speed, torque and per-window switching frequency of one run."""
    path = Path(path)
    t = trace["t"]
    fig, axes = plt.subplots(3, 1, figsize=(8, 8), sharex=True)
    axes[0].plot(t, trace["omega_m_rpm"], lw=0.8)
    axes[0].axhline(summary.speed_ref, color="k", ls=":", lw=0.8)
    axes[0].set_ylabel("speed [rpm]")
    axes[1].plot(t, trace["T_e"], lw=0.5, label="T_e")
    axes[1].plot(t, trace["T_load"], lw=1.0, label="T_load")
    axes[1].set_ylabel("torque [N.m]")
    axes[1].legend(loc="upper right")
    if summary.window_frequencies:
        starts, ends, freqs = zip(*summary.window_frequencies)
        axes[2].step(ends, freqs, where="pre")
    axes[2].set_ylabel("f_sw [Hz]")
    axes[2].set_xlabel("t [s]")
    fig.suptitle(f"{summary.controller.upper()} at {summary.speed_ref:g} rpm, "
                 f"median f_sw {summary.f_sw_median:.0f} Hz")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_comparison(foc: Trace, dtc: Trace, report: ComparisonReport, path: str | Path) -> Path:
    """Steady-window torque of both controllers over their window frequencies."""
    path = Path(path)
    fig, (ax_t, ax_f) = plt.subplots(2, 1, figsize=(8, 7))
    for name, trace in (("FOC", foc), ("DTC", dtc)):
        summary = report.foc if name == "FOC" else report.dtc
        t = trace["t"]
        if summary.ripple is not None:
            t0, t1 = summary.ripple.window
            sel = (t >= t0) & (t <= t1)
            ax_t.plot(t[sel], trace["T_e"][sel], lw=0.5, label=name)
        if summary.window_frequencies:
            _, ends, freqs = zip(*summary.window_frequencies)
            ax_f.step(ends, freqs, where="pre", label=f"{name} ({summary.f_sw_median:.0f} Hz)")
    ax_t.set_ylabel("T_e [N.m]")
    ax_t.set_title("steady-state torque")
    ax_t.legend(loc="upper right")
    ax_f.set_ylabel("f_sw [Hz]")
    ax_f.set_xlabel("t [s]")
    ax_f.set_title(f"FOC excess {report.percent_excess:.1f} %, "
                   f"DTC/FOC ripple {report.ripple_ratio:.2f}")
    ax_f.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
