"""Switching-event accounting, windowed switching frequency and torque ripple."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import IncompleteWindowError

DEFAULT_WINDOW = 0.1
LOSS_PROXY_K = 1e-6  # J per (V*A) per transition
_WINDOW_EPS = 1e-9


@dataclass
class SwitchingCounter:
    """Per-leg transition counts for one averaging window.

    ``elapsed`` is advanced by the simulation loop; the window may only be
    read once it reaches ``window_length``.
    """

    window_length: float = DEFAULT_WINDOW
    window_start: float = 0.0
    counts: list[int] = field(default_factory=lambda: [0, 0, 0])
    current_sum: float = 0.0
    elapsed: float = 0.0

    @property
    def complete(self) -> bool:
        return self.elapsed >= self.window_length * (1.0 - _WINDOW_EPS)

    def reset(self, window_start: float) -> None:
        self.window_start = window_start
        self.counts = [0, 0, 0]
        self.current_sum = 0.0
        self.elapsed = 0.0


def record_transition(counter: SwitchingCounter, prev, nxt, currents: Sequence[float] | None = None) -> int:
    """Count legs whose bit differs; returns the number of transitions.

    If ``currents`` (a, b, c) is given, the magnitude of each switching
    leg's current is accumulated for the loss proxy.
    """
    n = 0
    for leg in range(3):
        if prev[leg] != nxt[leg]:
            counter.counts[leg] += 1
            n += 1
            if currents is not None:
                counter.current_sum += abs(currents[leg])
    return n


def window_frequency(counter: SwitchingCounter) -> float:
    """Three-leg average switching frequency; two transitions make one cycle."""
    if not counter.complete:
        raise IncompleteWindowError(
            f"window starting at {counter.window_start:.6g} s has only "
            f"{counter.elapsed:.6g} of {counter.window_length:.6g} s")
    per_leg = [n / (2.0 * counter.window_length) for n in counter.counts]
    return sum(per_leg) / 3.0


def switching_loss_proxy(counter: SwitchingCounter, V_dc: float, k: float = LOSS_PROXY_K) -> float:
    """Relative switching-energy proxy k * sum(V_dc * |i_leg|) over the window."""
    if not counter.complete:
        raise IncompleteWindowError("loss proxy requested for an incomplete window")
    return k * V_dc * counter.current_sum


@dataclass(frozen=True)
class RippleStats:
    mean: float
    peak_to_peak: float
    std_dev: float
    window: tuple[float, float]


def torque_ripple(t: Sequence[float], torque: Sequence[float],
                  window: tuple[float, float]) -> RippleStats:
    """Mean, max-min and population standard deviation over t0 <= t <= t1."""
    t = np.asarray(t, dtype=float)
    torque = np.asarray(torque, dtype=float)
    t0, t1 = window
    mask = (t >= t0) & (t <= t1)
    values = torque[mask]
    if values.size < 2:
        raise ValueError(f"torque window [{t0}, {t1}] holds fewer than 2 samples")
    mean = float(values.mean())
    return RippleStats(mean, float(values.max() - values.min()),
                       float(np.sqrt(np.mean((values - mean) ** 2))), (float(t0), float(t1)))


def median_frequency(windows: Iterable[tuple[float, float, float]], t0: float, t1: float) -> float:
    """Median over completed windows ``(start, end, f)`` lying inside [t0, t1]."""
    inside = [f for start, end, f in windows
              if start >= t0 - _WINDOW_EPS and end <= t1 + _WINDOW_EPS]
    if not inside:
        return math.nan
    return float(np.median(inside))
