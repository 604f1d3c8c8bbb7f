"""Induction machine plant in the stationary alpha-beta frame.

State variables are the stator and rotor flux linkages, the mechanical
speed and the mechanical angle.  The model is linear (no saturation, no
iron loss) and is advanced with a fixed-step classical Runge-Kutta scheme.

    d(lambda_s)/dt = v_s - R_s i_s
    d(lambda_r)/dt = -R_r i_r + j p w_m lambda_r
    J dw_m/dt      = T_e - T_load - B w_m
    d(theta_m)/dt  = w_m
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ConfigError, SimulationError

TWO_PI = 2.0 * math.pi
SQRT3 = math.sqrt(3.0)
MAX_PLANT_DT = 100e-6


class AlphaBeta(NamedTuple):
    """Stationary-frame vector (voltage, current or flux)."""

    alpha: float
    beta: float


@dataclass(frozen=True)
class MotorParams:
    """Electrical and mechanical constants of the machine.

    Only ``R_s`` and the nameplate (4 kW, 380 V, 50 Hz, 1425 rpm) are
    published for the test motor; the remaining values are representative
    estimates for a machine of that rating and can be overridden in the
    scenario config.
    """

    R_s: float = 7.2
    R_r: float = 4.2
    L_s: float = 0.462
    L_r: float = 0.462
    L_m: float = 0.44
    p: int = 2
    J: float = 0.012
    B: float = 0.001
    V_dc: float = 540.0
    rated_speed: float = 1425.0
    rated_torque: float = 26.8

    def __post_init__(self):
        for name in ("R_s", "R_r", "L_s", "L_r", "L_m", "J", "V_dc", "rated_speed", "rated_torque"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError("must be finite and strictly positive", f"motor.{name}")
        if not (math.isfinite(self.B) and self.B >= 0):
            raise ConfigError("must be finite and >= 0", "motor.B")
        if int(self.p) != self.p or self.p < 1:
            raise ConfigError("must be an integer >= 1", "motor.p")
        if self.L_s * self.L_r - self.L_m**2 <= 0:
            raise ConfigError("L_s*L_r - L_m^2 must be positive", "motor.L_m")

    @property
    def sigma(self) -> float:
        """Leakage coefficient 1 - L_m^2/(L_s L_r)."""
        return 1.0 - self.L_m**2 / (self.L_s * self.L_r)


@dataclass(frozen=True)
class MotorState:
    lam_s_alpha: float = 0.0
    lam_s_beta: float = 0.0
    lam_r_alpha: float = 0.0
    lam_r_beta: float = 0.0
    omega_m: float = 0.0
    theta_m: float = 0.0

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (self.lam_s_alpha, self.lam_s_beta, self.lam_r_alpha,
                self.lam_r_beta, self.omega_m, self.theta_m)

    @property
    def stator_flux(self) -> AlphaBeta:
        return AlphaBeta(self.lam_s_alpha, self.lam_s_beta)

    @property
    def rotor_flux(self) -> AlphaBeta:
        return AlphaBeta(self.lam_r_alpha, self.lam_r_beta)


def clarke(a: float, b: float, c: float) -> AlphaBeta:
    """Amplitude-invariant Clarke transform."""
    return AlphaBeta((2.0 / 3.0) * (a - 0.5 * b - 0.5 * c), (b - c) / SQRT3)


def inverse_clarke(v: AlphaBeta) -> tuple[float, float, float]:
    alpha, beta = v
    half = 0.5 * SQRT3 * beta
    return alpha, -0.5 * alpha + half, -0.5 * alpha - half


def plant_torque(state: MotorState, i_s: AlphaBeta, p: int) -> float:
    """Electromagnetic torque (3/2) p (lambda_s x i_s)."""
    return 1.5 * p * (state.lam_s_alpha * i_s[1] - state.lam_s_beta * i_s[0])


def derive_currents(state: MotorState, params: MotorParams) -> tuple[AlphaBeta, AlphaBeta]:
    """Invert the flux linkage equations for the stator and rotor currents."""
    det = params.L_s * params.L_r - params.L_m**2
    if not det > 0:
        raise ConfigError("L_s*L_r - L_m^2 must be positive", "motor.L_m")
    L_s, L_r, L_m = params.L_s, params.L_r, params.L_m
    i_s = AlphaBeta((L_r * state.lam_s_alpha - L_m * state.lam_r_alpha) / det,
                    (L_r * state.lam_s_beta - L_m * state.lam_r_beta) / det)
    i_r = AlphaBeta((L_s * state.lam_r_alpha - L_m * state.lam_s_alpha) / det,
                    (L_s * state.lam_r_beta - L_m * state.lam_s_beta) / det)
    return i_s, i_r


class PlantCoefficients(NamedTuple):
    """Precomputed constants for the derivative kernel."""

    R_s: float
    R_r: float
    a_ss: float  # L_r / det
    a_sr: float  # L_m / det
    a_rr: float  # L_s / det
    p: float
    torque_k: float  # 1.5 p
    inv_J: float
    B: float

    @classmethod
    def from_params(cls, params: MotorParams) -> PlantCoefficients:
        det = params.L_s * params.L_r - params.L_m**2
        return cls(params.R_s, params.R_r, params.L_r / det, params.L_m / det,
                   params.L_s / det, float(params.p), 1.5 * params.p,
                   1.0 / params.J, params.B)


def _derivative(lsa, lsb, lra, lrb, w, va, vb, t_load, c, locked):
    isa = c.a_ss * lsa - c.a_sr * lra
    isb = c.a_ss * lsb - c.a_sr * lrb
    ira = c.a_rr * lra - c.a_sr * lsa
    irb = c.a_rr * lrb - c.a_sr * lsb
    we = c.p * w
    if locked:
        dw = 0.0
    else:
        dw = (c.torque_k * (lsa * isb - lsb * isa) - t_load - c.B * w) * c.inv_J
    return (va - c.R_s * isa, vb - c.R_s * isb,
            -c.R_r * ira - we * lrb, -c.R_r * irb + we * lra, dw)


def rk4_advance(x: tuple, va: float, vb: float, t_load: float, dt: float,
                c: PlantCoefficients, locked: bool = False) -> tuple:
    """One classical RK4 step on a raw state tuple; theta is left unwrapped."""
    lsa, lsb, lra, lrb, w, th = x
    h = 0.5 * dt
    a1, b1, c1, d1, e1 = _derivative(lsa, lsb, lra, lrb, w, va, vb, t_load, c, locked)
    a2, b2, c2, d2, e2 = _derivative(lsa + h * a1, lsb + h * b1, lra + h * c1,
                                     lrb + h * d1, w + h * e1, va, vb, t_load, c, locked)
    a3, b3, c3, d3, e3 = _derivative(lsa + h * a2, lsb + h * b2, lra + h * c2,
                                     lrb + h * d2, w + h * e2, va, vb, t_load, c, locked)
    a4, b4, c4, d4, e4 = _derivative(lsa + dt * a3, lsb + dt * b3, lra + dt * c3,
                                     lrb + dt * d3, w + dt * e3, va, vb, t_load, c, locked)
    s = dt / 6.0
    # theta' = w, so its stage slopes are the stage speeds
    w2 = w + h * e1
    w3 = w + h * e2
    w4 = w + dt * e3
    return (lsa + s * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
            lsb + s * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
            lra + s * (c1 + 2.0 * c2 + 2.0 * c3 + c4),
            lrb + s * (d1 + 2.0 * d2 + 2.0 * d3 + d4),
            w + s * (e1 + 2.0 * e2 + 2.0 * e3 + e4),
            th + s * (w + 2.0 * w2 + 2.0 * w3 + w4))


def wrap_angle(theta: float) -> float:
    theta = math.fmod(theta, TWO_PI)
    if theta < 0.0:
        theta += TWO_PI
    # fmod of a tiny negative value can round up to exactly 2*pi
    return 0.0 if theta >= TWO_PI else theta


def step(state: MotorState, v_s: AlphaBeta, T_load: float, dt: float,
         params: MotorParams, *, locked_rotor: bool = False) -> MotorState:
    """Advance the plant by one RK4 step of length ``dt``.

    With ``locked_rotor`` the speed is held at its current value (normally
    zero) regardless of torque.
    """
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    if dt > MAX_PLANT_DT:
        raise ValueError(f"dt must not exceed {MAX_PLANT_DT} s, got {dt!r}")
    va, vb = v_s
    if not (math.isfinite(va) and math.isfinite(vb) and math.isfinite(T_load)):
        raise SimulationError("non-finite voltage or load input")
    c = PlantCoefficients.from_params(params)
    x = rk4_advance(state.as_tuple(), va, vb, T_load, dt, c, locked_rotor)
    if not all(math.isfinite(v) for v in x):
        raise SimulationError("non-finite plant state")
    return MotorState(x[0], x[1], x[2], x[3], x[4], wrap_angle(x[5]))
