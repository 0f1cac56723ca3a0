"""Q-filter design and the communication disturbance observer (CDOB).

The observer treats the loop delay as an equivalent input disturbance,
estimates it through Q and the inverted nominal plant, and feeds the estimate
through the nominal plant back onto the measurement. In modified mode the
known curvature response is added on top so that the feedback signal keeps
the path-curvature term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal

from .errors import WrongMode
from .signals import (
    DiscreteFilter,
    LtiModel,
    RationalTf,
    discretize_bilinear,
    proper_inverse_product,
    tf_from_state_space,
)

MODES = ("standard", "modified")
# second-order Butterworth damping term, as printed (sqrt(2) to 4 decimals)
BUTTERWORTH2_COEFF = 1.4142


@dataclass(frozen=True)
class QFilterSpec:
    wp: float = 1000.0  # passband edge, rad/s
    ws: float = 10000.0  # stopband edge, rad/s
    ap: float = 3.0  # max passband attenuation, dB
    as_: float = 30.0  # min stopband attenuation, dB

    def __post_init__(self):
        if not 0 < self.wp < self.ws:
            raise ValueError("need 0 < wp < ws")
        if not 0 < self.ap < self.as_:
            raise ValueError("need 0 < ap < as_")


@dataclass(frozen=True)
class QFilter:
    n_raw: float
    order: int
    omega_c: float
    tf: RationalTf


def butterworth_order(spec: QFilterSpec):
    """Unrounded minimum Butterworth order for the attenuation template."""
    ratio = (10 ** (spec.as_ / 10) - 1) / (10 ** (spec.ap / 10) - 1)
    return math.log10(ratio) / (2 * math.log10(spec.ws / spec.wp))


def butterworth_cutoff(spec: QFilterSpec, n):
    return spec.wp / (10 ** (spec.ap / 10) - 1) ** (1 / (2 * n))


def butterworth_lowpass(order, omega_c):
    """Unity-DC-gain Butterworth low-pass in s.

    Order 2 uses the rounded 1.4142 damping term; higher orders use the
    exact normalized Butterworth polynomial.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 2:
        den = [1 / omega_c**2, BUTTERWORTH2_COEFF / omega_c, 1.0]
    else:
        _, p, _ = _signal.buttap(order)
        norm = np.real(np.poly(p))  # monic, constant term 1
        den = norm / omega_c ** np.arange(order, -1, -1)
    return RationalTf([1.0], den)


def design_q(spec: QFilterSpec | None = None) -> QFilter:
    """Butterworth Q from the passband/stopband template.

    The cutoff is evaluated with the unrounded order, which is what
    reproduces the 1001.6 rad/s figure for the default template.
    """
    spec = spec or QFilterSpec()
    n_raw = butterworth_order(spec)
    order = int(math.ceil(n_raw - 1e-12))
    omega_c = butterworth_cutoff(spec, n_raw)
    return QFilter(n_raw=n_raw, order=order, omega_c=omega_c, tf=butterworth_lowpass(order, omega_c))


def nominal_channels(model: LtiModel, output_idx=0):
    """(steer -> ey, curvature -> ey) transfer functions of the tracking model."""
    gn = tf_from_state_space(model, input_idx=0, output_idx=output_idx)
    grho = tf_from_state_space(model, input_idx=1, output_idx=output_idx)
    return gn, grho


class Cdob:
    """Discrete-time CDOB. Holds filter state, so one instance per loop."""

    def __init__(self, gn: RationalTf, grho: RationalTf, q: QFilter, dt, mode="modified"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.mode = mode
        self.dt = float(dt)
        self.q = q
        self.q_over_gn = proper_inverse_product(q.tf, gn)
        self.f_q: DiscreteFilter = discretize_bilinear(q.tf, dt)
        self.f_qginv: DiscreteFilter = discretize_bilinear(self.q_over_gn, dt)
        self.f_gn: DiscreteFilter = discretize_bilinear(gn, dt)
        self.f_grho: DiscreteFilter | None = discretize_bilinear(grho, dt) if mode == "modified" else None
        self.d_hat = 0.0

    def reset(self):
        for f in (self.f_q, self.f_qginv, self.f_gn, self.f_grho):
            if f is not None:
                f.reset()
        self.d_hat = 0.0

    def curvature_disturbance(self, rho_ref):
        """Advance the curvature channel by one sample and return its output."""
        if self.f_grho is None:
            raise WrongMode("curvature channel only exists in modified mode")
        return self.f_grho.step(rho_ref)

    def step(self, u_cmd, y_meas, rho_ref=0.0):
        """One sample of the observer; returns the compensated feedback signal."""
        self.d_hat = self.f_q.step(u_cmd) - self.f_qginv.step(y_meas)
        y_comp = y_meas + self.f_gn.step(self.d_hat)
        if self.f_grho is not None:
            y_comp += self.curvature_disturbance(rho_ref)
        return y_comp


def build_cdob(gn, grho, q: QFilter, dt, mode="modified") -> Cdob:
    return Cdob(gn, grho, q, dt, mode)


def cdob_step(c: Cdob, u_cmd, y_meas, rho_ref=0.0):
    return c.step(u_cmd, y_meas, rho_ref)
