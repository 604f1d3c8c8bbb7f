"""Ideal two-level voltage-source inverter."""
from __future__ import annotations

from typing import NamedTuple

from .machine import AlphaBeta, clarke


class SwitchState(NamedTuple):
    """Leg commands, 1 = upper device on."""

    s_a: int
    s_b: int
    s_c: int

    def complement(self) -> SwitchState:
        return SwitchState(1 - self.s_a, 1 - self.s_b, 1 - self.s_c)


# Index k is vector Vk; active vectors V1..V6 sit at (k-1)*60 degrees.
VECTORS: tuple[SwitchState, ...] = (
    SwitchState(0, 0, 0),
    SwitchState(1, 0, 0),
    SwitchState(1, 1, 0),
    SwitchState(0, 1, 0),
    SwitchState(0, 1, 1),
    SwitchState(0, 0, 1),
    SwitchState(1, 0, 1),
    SwitchState(1, 1, 1),
)
_VECTOR_IDS = {sw: k for k, sw in enumerate(VECTORS)}

ALL_STATES = tuple(SwitchState(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1))


def vector_of(sw: SwitchState) -> int:
    return _VECTOR_IDS[SwitchState(*sw)]


def switch_state_of(vector_id: int) -> SwitchState:
    if not 0 <= vector_id <= 7:
        raise ValueError(f"voltage vector id must be in 0..7, got {vector_id}")
    return VECTORS[vector_id]


def phase_voltages(sw: SwitchState, V_dc: float) -> tuple[float, float, float]:
    """Line-to-neutral voltages of a wye load with isolated neutral."""
    sa, sb, sc = sw
    k = V_dc / 3.0
    return (k * (2 * sa - sb - sc), k * (2 * sb - sc - sa), k * (2 * sc - sa - sb))


def output_voltage(sw: SwitchState, V_dc: float) -> AlphaBeta:
    if not V_dc > 0:
        raise ValueError(f"V_dc must be positive, got {V_dc!r}")
    return clarke(*phase_voltages(sw, V_dc))


def transitions(prev: SwitchState, nxt: SwitchState) -> int:
    """Number of legs that change state."""
    return (prev[0] != nxt[0]) + (prev[1] != nxt[1]) + (prev[2] != nxt[2])
