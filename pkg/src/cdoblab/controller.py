"""PID law, D-stability pole regions and parameter-space gain selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cdob import nominal_channels
from .errors import EmptyRegion
from .signals import RationalTf
from .vehicle import SchedulingConfig, VehicleParams, build_tracking_model, preview_distance

# The default D-region is empty below roughly 9 m/s for the Table 1 vehicle,
# and the open loop goes unstable near 15 m/s, hence this narrow band.
DEFAULT_KNOTS = (10.0, 11.0, 12.0, 13.0)


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0  # rad/m
    ki: float = 0.0  # rad/(m s)
    kd: float = 0.0  # rad s/m

    def as_tuple(self):
        return (self.kp, self.ki, self.kd)


class PidController:
    """Discrete PID: trapezoidal integral, backward-difference derivative
    through a first-order filter with time constant tf (default 5*dt)."""

    def __init__(self, gains: PidGains, dt, tf=None):
        self.gains = gains
        self.dt = float(dt)
        self.tf = 5.0 * self.dt if tf is None else float(tf)
        self.reset()

    def reset(self):
        self.integral = 0.0
        self.prev_error = 0.0
        self.deriv = 0.0

    def step(self, e):
        g, dt = self.gains, self.dt
        self.integral += 0.5 * dt * (e + self.prev_error)
        self.deriv = (self.tf * self.deriv + (e - self.prev_error)) / (self.tf + dt)
        self.prev_error = e
        return g.kp * e + g.ki * self.integral + g.kd * self.deriv


@dataclass(frozen=True)
class DStabilitySpec:
    """Pole region: Re(p) <= -sigma, damping >= zeta_min, |p| <= r_max."""

    sigma: float = 2.5  # 1/s
    zeta_min: float = 0.7071
    r_max: float = 40.0  # rad/s

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not 0 <= self.zeta_min <= 1:
            raise ValueError("zeta_min must lie in [0, 1]")
        if not self.r_max > self.sigma:
            raise ValueError("r_max must exceed sigma")

    def is_stricter_than(self, other: "DStabilitySpec"):
        return self.sigma >= other.sigma and self.zeta_min >= other.zeta_min and self.r_max <= other.r_max


def in_d_region(p, spec: DStabilitySpec):
    p = complex(p)
    if p == 0:
        return False
    mag = abs(p)
    return p.real <= -spec.sigma and -p.real / mag >= spec.zeta_min and mag <= spec.r_max


def _char_poly(gn: RationalTf, g: PidGains):
    # s*den(s) + (kd s^2 + kp s + ki) * num(s)
    return np.polyadd(np.polymul(gn.den, [1.0, 0.0]), np.polymul([g.kd, g.kp, g.ki], gn.num))


def closed_loop_poles(gn: RationalTf, g: PidGains):
    """Closed-loop poles of the ideal PID around gn (unity negative feedback)."""
    return np.roots(np.trim_zeros(_char_poly(gn, g), "f")).astype(complex)


@dataclass(frozen=True)
class GainAxes:
    kp: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 2.0, 81))
    ki: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 3.0, 61))
    kd: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 0.5, 41))

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            a = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if a.size == 0:
                raise ValueError(f"{name} axis is empty")
            object.__setattr__(self, name, a)

    @property
    def shape(self):
        return (len(self.kp), len(self.ki), len(self.kd))


@dataclass(frozen=True, eq=False)
class AdmissibleRegion:
    axes: GainAxes
    mask: np.ndarray
    V: float | None = None

    def __post_init__(self):
        if self.mask.shape != self.axes.shape:
            raise ValueError("mask shape does not match axes")

    @property
    def count(self):
        return int(self.mask.sum())

    def gains_at(self, i, j, k):
        return PidGains(float(self.axes.kp[i]), float(self.axes.ki[j]), float(self.axes.kd[k]))

    def admissible_gains(self):
        return [self.gains_at(*idx) for idx in np.argwhere(self.mask)]


def _batched_roots(polys):
    """Roots of many same-degree polynomials through stacked companion matrices."""
    lead = polys[:, :1]
    monic = polys[:, 1:] / lead
    n = monic.shape[1]
    comp = np.zeros((len(polys), n, n))
    comp[:, 0, :] = -monic
    if n > 1:
        comp[:, np.arange(1, n), np.arange(n - 1)] = 1.0
    return np.linalg.eigvals(comp)


def _roots_in_region(roots, spec: DStabilitySpec):
    mag = np.abs(roots)
    with np.errstate(divide="ignore", invalid="ignore"):
        damping = np.where(mag > 0, -roots.real / mag, -np.inf)
    ok = (roots.real <= -spec.sigma) & (damping >= spec.zeta_min) & (mag <= spec.r_max) & (mag > 0)
    return ok.all(axis=-1)


def compute_admissible_region(gn: RationalTf, spec: DStabilitySpec, axes: GainAxes | None = None,
                              V=None, chunk=50_000) -> AdmissibleRegion:
    """Grid the gain space and keep points whose closed-loop poles all lie in the D-region."""
    axes = axes or GainAxes()
    KP, KI, KD = (a.ravel() for a in np.meshgrid(axes.kp, axes.ki, axes.kd, indexing="ij"))
    base = np.polymul(gn.den, [1.0, 0.0])
    deg = len(base) - 1
    # coefficient columns contributed by each gain, aligned to the base polynomial
    cols = {}
    for name, shift in (("kd", 2), ("kp", 1), ("ki", 0)):
        contrib = np.polymul(gn.num, [1.0] + [0.0] * shift)
        if len(contrib) - 1 > deg:
            raise ValueError("plant must be proper with relative degree >= 1 for PID design")
        cols[name] = np.concatenate([np.zeros(deg + 1 - len(contrib)), contrib])
    mask = np.zeros(KP.size, dtype=bool)
    for lo in range(0, KP.size, chunk):
        sl = slice(lo, lo + chunk)
        polys = (base[None, :] + KD[sl, None] * cols["kd"] + KP[sl, None] * cols["kp"]
                 + KI[sl, None] * cols["ki"])
        good = np.abs(polys[:, 0]) > 1e-12
        part = np.zeros(len(polys), dtype=bool)
        if good.any():
            part[good] = _roots_in_region(_batched_roots(polys[good]), spec)
        for idx in np.flatnonzero(~good):
            # leading coefficient cancelled; fall back to the trimmed polynomial
            r = np.roots(np.trim_zeros(polys[idx], "f"))
            part[idx] = all(in_d_region(p, spec) for p in r)
        mask[sl] = part
    return AdmissibleRegion(axes, mask.reshape(axes.shape), V)


def select_gains(region: AdmissibleRegion) -> PidGains:
    """Smallest admissible gains by axis-normalized Euclidean norm; ties by (kp, ki, kd)."""
    idx = np.argwhere(region.mask)
    if not len(idx):
        raise EmptyRegion("no admissible gains on the grid")
    ax = region.axes
    scale = [float(np.max(np.abs(a))) or 1.0 for a in (ax.kp, ax.ki, ax.kd)]
    best = min(
        ((math.hypot(ax.kp[i] / scale[0], ax.ki[j] / scale[1], ax.kd[k] / scale[2]),
          ax.kp[i], ax.ki[j], ax.kd[k]) for i, j, k in idx)
    )
    return PidGains(float(best[1]), float(best[2]), float(best[3]))


@dataclass(frozen=True)
class GainSchedule:
    speeds: tuple
    gains: tuple

    def __post_init__(self):
        speeds = tuple(float(v) for v in self.speeds)
        if not speeds:
            raise ValueError("schedule needs at least one knot")
        if len(speeds) != len(self.gains):
            raise ValueError("one PidGains per speed knot")
        if any(b <= a for a, b in zip(speeds, speeds[1:])):
            raise ValueError("speed knots must be strictly increasing")
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "gains", tuple(self.gains))


def lookup_gains(sched: GainSchedule, V) -> PidGains:
    """Componentwise linear interpolation in speed, clamped at the end knots."""
    vals = [np.interp(V, sched.speeds, [getattr(g, name) for g in sched.gains]) for name in ("kp", "ki", "kd")]
    return PidGains(*(float(v) for v in vals))


def plant_channel(params: VehicleParams, V, sched_cfg: SchedulingConfig):
    """Steering -> ey transfer function at speed V with the scheduled preview."""
    return nominal_channels(build_tracking_model(params, V, preview_distance(V, sched_cfg)))[0]


def design_gains(params: VehicleParams, V, sched_cfg: SchedulingConfig | None = None,
                 spec: DStabilitySpec | None = None, axes: GainAxes | None = None) -> PidGains:
    sched_cfg = sched_cfg or SchedulingConfig()
    gn = plant_channel(params, V, sched_cfg)
    return select_gains(compute_admissible_region(gn, spec or DStabilitySpec(), axes, V=V))


def design_schedule(params: VehicleParams | None = None, sched_cfg: SchedulingConfig | None = None,
                    spec: DStabilitySpec | None = None, axes: GainAxes | None = None,
                    knots=DEFAULT_KNOTS) -> GainSchedule:
    """Select minimal admissible gains at every speed knot."""
    params = params or VehicleParams()
    gains = [design_gains(params, V, sched_cfg, spec, axes) for V in knots]
    return GainSchedule(tuple(knots), tuple(gains))
