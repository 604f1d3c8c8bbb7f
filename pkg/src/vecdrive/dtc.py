"""Direct torque control: stator flux/torque estimation, hysteresis
comparators and the six-sector optimum switching table."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError
from .foc import SpeedPI, speed_pi
from .inverter import VECTORS, SwitchState, transitions
from .machine import AlphaBeta

STARTUP_FLUX_FRACTION = 0.1


@dataclass(frozen=True)
class DtcConfig:
    """DTC tuning.

    Defaults: 0.8 Wb stator flux (leaves voltage headroom at 1500 rpm under
    load), flux band 1.5 % of the reference, torque band 6 N.m (about 22 %
    of the 26.8 N.m rated torque).
    """

    lambda_ref: float = 0.8
    torque_band: float = 6.0
    flux_band: float = 0.012
    T_ctrl: float = 50e-6

    def __post_init__(self):
        for name in ("lambda_ref", "torque_band", "flux_band", "T_ctrl"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError("must be finite and strictly positive", f"dtc.{name}")


@dataclass(frozen=True)
class FluxTorqueEstimate:
    lam_alpha: float = 0.0
    lam_beta: float = 0.0
    lam: float = 0.0
    theta: float = 0.0
    sector: int = 1
    T_e: float = 0.0


def estimate_flux(prev: FluxTorqueEstimate, v: AlphaBeta, i: AlphaBeta,
                  R_s: float, dt: float) -> tuple[float, float]:
    """Euler accumulation of the back-EMF integral for one period."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return (prev.lam_alpha + (v[0] - R_s * i[0]) * dt,
            prev.lam_beta + (v[1] - R_s * i[1]) * dt)


def flux_magnitude(lam_alpha: float, lam_beta: float) -> float:
    return math.hypot(lam_alpha, lam_beta)


def estimate_torque(lam: AlphaBeta, i: AlphaBeta, p: int) -> float:
    return 1.5 * p * (lam[0] * i[1] - lam[1] * i[0])


def flux_angle(lam_alpha: float, lam_beta: float) -> float:
    """Four-quadrant flux angle in [0, 2*pi)."""
    theta = math.atan2(lam_beta, lam_alpha)
    return theta + 2.0 * math.pi if theta < 0.0 else theta


# lower edges of sectors 2..6 plus the 330 deg wrap edge, (2k-3)*30 degrees
_SECTOR_EDGES = tuple((2 * k - 3) * math.pi / 6.0 for k in range(2, 8))


def sector(lam_alpha: float, lam_beta: float) -> int:
    """Sector k in 1..6 covers [(2k-3)*30deg, (2k-1)*30deg), lower edge inclusive."""
    if lam_alpha == 0.0 and lam_beta == 0.0:
        raise ValueError("flux angle undefined for the zero vector")
    theta = flux_angle(lam_alpha, lam_beta)
    k = 1
    for edge in _SECTOR_EDGES:
        if theta >= edge:
            k += 1
    # [330deg, 360deg) wraps back into sector 1
    return 1 if k == 7 else k


def flux_comparator(error: float, prev: int, band: float) -> int:
    """Two-level hysteresis on lambda_ref - lambda: 1 raises flux, 0 lowers it."""
    if not band > 0:
        raise ValueError("band must be positive")
    if error > band:
        return 1
    if error < -band:
        return 0
    return prev


def torque_comparator(error: float, prev: int, band: float) -> int:
    """Three-level hysteresis on T_ref - T_e.

    Saturates at +1/-1 outside the band and drops to 0 once the error
    magnitude falls below half the band.
    """
    if not band > 0:
        raise ValueError("band must be positive")
    if error > band:
        return 1
    if error < -band:
        return -1
    if abs(error) < 0.5 * band:
        return 0
    return prev


_V0, _V7 = VECTORS[0], VECTORS[7]


def select_vector(d_phi: int, d_tau: int, sector_k: int, prev: SwitchState = _V0) -> SwitchState:
    """Optimum switching table lookup.

    ``d_tau == 0`` selects whichever zero vector needs fewer leg transitions
    from ``prev`` (V0 on a tie).
    """
    if d_tau == 0:
        return _V7 if transitions(prev, _V7) < transitions(prev, _V0) else _V0
    if d_tau == 1:
        offset = 1 if d_phi else 2
    elif d_tau == -1:
        offset = -1 if d_phi else -2
    else:
        raise ValueError(f"torque demand must be -1, 0 or 1, got {d_tau!r}")
    if d_phi not in (0, 1):
        raise ValueError(f"flux demand must be 0 or 1, got {d_phi!r}")
    if not 1 <= sector_k <= 6:
        raise ValueError(f"sector must be in 1..6, got {sector_k!r}")
    return VECTORS[(sector_k - 1 + offset) % 6 + 1]


@dataclass
class DtcMemory:
    """Controller memory carried between sampling periods."""

    pi: SpeedPI
    estimate: FluxTorqueEstimate = field(default_factory=FluxTorqueEstimate)
    d_phi: int = 1
    d_tau: int = 0
    switch: SwitchState = _V0
    T_ref: float = 0.0

    @classmethod
    def initial(cls, Kp: float, Ki: float, T_max: float) -> DtcMemory:
        return cls(pi=SpeedPI(Kp, Ki, T_max))


def dtc_step(v: AlphaBeta, i: AlphaBeta, T_ref: float, lambda_ref: float,
             memory: DtcMemory, config: DtcConfig, R_s: float, p: int) -> SwitchState:
    """One DTC sampling period.

    ``v`` is the voltage applied over the period just ended and ``i`` the
    current sampled now.  Below 10 % of the flux reference the flux demand
    is forced high and the sector pinned to 1 so that magnetization starts
    deterministically from zero flux.
    """
    lam_a, lam_b = estimate_flux(memory.estimate, v, i, R_s, config.T_ctrl)
    lam = flux_magnitude(lam_a, lam_b)
    T_e = estimate_torque((lam_a, lam_b), i, p)
    if lam < STARTUP_FLUX_FRACTION * lambda_ref:
        k = 1
        theta = flux_angle(lam_a, lam_b) if lam > 0.0 else 0.0
        d_phi = 1
    else:
        k = sector(lam_a, lam_b)
        theta = flux_angle(lam_a, lam_b)
        d_phi = flux_comparator(lambda_ref - lam, memory.d_phi, config.flux_band)
    d_tau = torque_comparator(T_ref - T_e, memory.d_tau, config.torque_band)
    switch = select_vector(d_phi, d_tau, k, memory.switch)
    memory.estimate = FluxTorqueEstimate(lam_a, lam_b, lam, theta, k, T_e)
    memory.d_phi, memory.d_tau, memory.switch, memory.T_ref = d_phi, d_tau, switch, T_ref
    return switch


def dtc_speed_step(omega_ref: float, omega_m: float, v: AlphaBeta, i: AlphaBeta,
                   memory: DtcMemory, config: DtcConfig, R_s: float, p: int) -> SwitchState:
    """DTC period preceded by the shared outer speed PI."""
    T_ref = speed_pi(omega_ref, omega_m, memory.pi, config.T_ctrl)
    return dtc_step(v, i, T_ref, config.lambda_ref, memory, config, R_s, p)
