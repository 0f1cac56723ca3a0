"""Single-track lateral vehicle model augmented with path-tracking states."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveSpeed
from .signals import LtiModel

# state / input ordering of the tracking model
STATES = ("beta", "r", "dpsi", "ey")
INPUTS = ("delta_f", "rho_ref", "m_zd")
DIVERGENCE_LIMIT = 10.0  # m


@dataclass(frozen=True)
class VehicleParams:
    Cf: float = 195000.0  # front cornering stiffness, N/rad
    Cr: float = 50000.0  # rear cornering stiffness, N/rad
    lf: float = 1.3008  # CG to front axle, m
    lr: float = 1.5453  # CG to rear axle, m
    M: float = 1997.6  # mass, kg
    Iz: float = 3728.0  # yaw inertia, kg m^2

    def __post_init__(self):
        for name in ("Cf", "Cr", "lf", "lr", "M", "Iz"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def wheelbase(self):
        return self.lf + self.lr

    def critical_speed(self):
        """Speed above which the open-loop lateral dynamics lose stability.

        Only finite for an oversteering vehicle (Cf*lf > Cr*lr); returns inf otherwise.
        """
        excess = self.Cf * self.lf - self.Cr * self.lr
        if excess <= 0:
            return math.inf
        return math.sqrt(self.Cf * self.Cr * self.wheelbase**2 / (self.M * excess))


@dataclass
class TrackingState:
    beta: float = 0.0
    r: float = 0.0
    dpsi: float = 0.0
    ey: float = 0.0

    def as_array(self):
        return np.array([self.beta, self.r, self.dpsi, self.ey])

    def is_diverged(self, limit=DIVERGENCE_LIMIT):
        vals = self.as_array()
        return (not np.all(np.isfinite(vals))) or abs(self.ey) > limit


@dataclass(frozen=True)
class SchedulingConfig:
    K: float = 0.5  # preview scheduling constant, s
    ls_min: float = 1.0  # m
    a_lat_max: float = 4.0  # m/s^2
    V_max: float = 13.0  # m/s; kept below the Table 1 critical speed (~15 m/s)

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be >= 0")
        if self.ls_min <= 0 or self.a_lat_max <= 0 or self.V_max <= 0:
            raise ValueError("ls_min, a_lat_max and V_max must be positive")


def build_tracking_model(params: VehicleParams, V, ls) -> LtiModel:
    """Continuous model with state (beta, r, dpsi, ey), inputs (delta_f, rho_ref, M_zd), output ey.

    Front-wheel steering only; the yaw-moment input is kept in B for completeness.
    """
    if not V > 0:
        raise NonPositiveSpeed(f"speed must be positive, got {V}")
    if not ls > 0:
        raise ValueError(f"preview distance must be positive, got {ls}")
    Cf, Cr, lf, lr, M, Iz = params.Cf, params.Cr, params.lf, params.lr, params.M, params.Iz
    A = np.array(
        [
            [-(Cf + Cr) / (M * V), -1.0 + (Cr * lr - Cf * lf) / (M * V**2), 0.0, 0.0],
            [(Cr * lr - Cf * lf) / Iz, -(Cf * lf**2 + Cr * lr**2) / (Iz * V), 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [V, ls, V, 0.0],
        ]
    )
    B = np.array(
        [
            [Cf / (M * V), 0.0, 0.0],
            [Cf * lf / Iz, 0.0, 1.0 / Iz],
            [0.0, -V, 0.0],
            [0.0, -ls * V, 0.0],
        ]
    )
    C = np.array([[0.0, 0.0, 0.0, 1.0]])
    D = np.zeros((1, 3))
    return LtiModel(A, B, C, D)


def curvature_column(V, ls):
    """rho_ref input column of the tracking model; defined for any V including 0."""
    return np.array([0.0, 0.0, -V, -ls * V])


def preview_distance(V, cfg: SchedulingConfig):
    if V < 0:
        raise ValueError("speed must be non-negative")
    return max(cfg.ls_min, cfg.K * V)


def schedule_speed(rho_peak, cfg: SchedulingConfig):
    """Highest speed keeping V^2 * rho_peak under the lateral acceleration cap."""
    if rho_peak < 0:
        raise ValueError("rho_peak must be non-negative")
    if rho_peak == 0:
        return cfg.V_max
    return min(cfg.V_max, math.sqrt(cfg.a_lat_max / rho_peak))
