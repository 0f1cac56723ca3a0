"""Run configuration: a registry of tunables, a sectioned ``key = value``
file format, and builders that turn resolved values into library objects.

File grammar::

    # comment
    [section]
    key = value   # trailing comment

Lists are comma separated. ``none`` clears an optional value.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass

from .cdob import QFilterSpec
from .controller import DEFAULT_KNOTS, DStabilitySpec, GainAxes, PidGains
from .errors import ConfigError, TypeMismatch, UnknownKey
from .paths import PRESETS, PresetGeometry
from .sim import CONTROLLERS, DELAY_SITES, PAPER_TAUS, SPEED_POLICIES, Scenario, SimConfig
from .vehicle import SchedulingConfig, VehicleParams


def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(p) for p in text.split(",") if p.strip())


def _pair(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return vals


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() == "none" else conv(text)

    parse.__name__ = f"optional {conv.__name__.strip('_')}"
    return parse


def _choice(options):
    def parse(text):
        text = text.strip()
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    parse.__name__ = "choice"
    return parse


def _choices(options):
    one = _choice(options)

    def parse(text):
        return tuple(one(p) for p in text.split(",") if p.strip())

    parse.__name__ = "choice list"
    return parse


def _str(text):
    return text.strip()


@dataclass(frozen=True)
class Tunable:
    section: str
    key: str
    parse: object
    default: object
    help: str
    flag: str = ""

    @property
    def option(self):
        return self.flag or "--" + self.key.replace("_", "-")

    @property
    def ident(self):
        return f"{self.section}.{self.key}"


_V, _S, _G, _Q, _D = VehicleParams(), SchedulingConfig(), PresetGeometry(), QFilterSpec(), DStabilitySpec()
_AX = GainAxes()

TUNABLES = (
    Tunable("vehicle", "cf", _float, _V.Cf, "front cornering stiffness [N/rad]"),
    Tunable("vehicle", "cr", _float, _V.Cr, "rear cornering stiffness [N/rad]"),
    Tunable("vehicle", "lf", _float, _V.lf, "CG to front axle [m]"),
    Tunable("vehicle", "lr", _float, _V.lr, "CG to rear axle [m]"),
    Tunable("vehicle", "mass", _float, _V.M, "vehicle mass [kg]"),
    Tunable("vehicle", "iz", _float, _V.Iz, "yaw inertia [kg m^2]"),
    Tunable("scheduling", "k_preview", _float, _S.K, "preview distance per unit speed [s]"),
    Tunable("scheduling", "ls_min", _float, _S.ls_min, "minimum preview distance [m]"),
    Tunable("scheduling", "a_lat_max", _float, _S.a_lat_max, "lateral acceleration cap [m/s^2]"),
    Tunable("scheduling", "v_max", _float, _S.V_max, "speed cap [m/s]"),
    Tunable("path", "preset", _choice(PRESETS), "single-lane", "path preset", "--scenario"),
    Tunable("path", "length", _float, _G.length, "preset length [m]"),
    Tunable("path", "lane_width", _float, _G.lane_width, "lateral offset of lane changes [m]"),
    Tunable("path", "single_change", _pair, _G.single_change, "single lane change start,end [m]"),
    Tunable("path", "double_up", _pair, _G.double_up, "double lane change, first transition [m]"),
    Tunable("path", "double_down", _pair, _G.double_down, "double lane change, return transition [m]"),
    Tunable("path", "bump_height", _float, _G.bump_height, "avoidance peak offset [m]"),
    Tunable("path", "bump_extent", _pair, _G.bump_extent, "avoidance start,end [m]"),
    Tunable("path", "waypoint_step", _float, _G.waypoint_step, "sparse waypoint spacing [m]"),
    Tunable("path", "sample_ds", _float, 0.1, "arc-length step of the exported path CSV [m]"),
    Tunable("qfilter", "wp", _float, _Q.wp, "Q passband edge [rad/s]"),
    Tunable("qfilter", "ws", _float, _Q.ws, "Q stopband edge [rad/s]"),
    Tunable("qfilter", "ap", _float, _Q.ap, "max passband attenuation [dB]"),
    Tunable("qfilter", "as", _float, _Q.as_, "min stopband attenuation [dB]", "--as-db"),
    Tunable("dstab", "sigma", _float, _D.sigma, "minimum pole decay rate [1/s]"),
    Tunable("dstab", "zeta_min", _float, _D.zeta_min, "minimum pole damping"),
    Tunable("dstab", "r_max", _float, _D.r_max, "maximum pole magnitude [rad/s]"),
    Tunable("grid", "kp_max", _float, float(_AX.kp[-1]), "kp grid upper end"),
    Tunable("grid", "kp_n", _int, len(_AX.kp), "kp grid points"),
    Tunable("grid", "ki_max", _float, float(_AX.ki[-1]), "ki grid upper end"),
    Tunable("grid", "ki_n", _int, len(_AX.ki), "ki grid points"),
    Tunable("grid", "kd_max", _float, float(_AX.kd[-1]), "kd grid upper end"),
    Tunable("grid", "kd_n", _int, len(_AX.kd), "kd grid points"),
    Tunable("gains", "kp", _optional(_float), None, "explicit kp (none: use the schedule)"),
    Tunable("gains", "ki", _optional(_float), None, "explicit ki (none: use the schedule)"),
    Tunable("gains", "kd", _optional(_float), None, "explicit kd (none: use the schedule)"),
    Tunable("gains", "knots", _floats, DEFAULT_KNOTS, "schedule speed knots [m/s]"),
    Tunable("sim", "controller", _choice(CONTROLLERS), "pid-cdob-modified", "control structure"),
    Tunable("sim", "tau", _float, 0.0, "loop delay [s]"),
    Tunable("sim", "delay_site", _choice(DELAY_SITES), "sensor", "where the delay acts"),
    Tunable("sim", "speed_policy", _choice(SPEED_POLICIES), "fixed", "fixed speed or curvature-scheduled"),
    Tunable("sim", "speed", _float, 10.0, "speed for the fixed policy [m/s]"),
    Tunable("sim", "saturation", _float, 0.6, "steering limit [rad]"),
    Tunable("sim", "dt", _float, 1e-3, "integration step [s]"),
    Tunable("sim", "duration", _optional(_float), None, "run length [s] (none: until the path ends)"),
    Tunable("sim", "deriv_tf", _optional(_float), None, "derivative filter time constant [s] (none: 5*dt)"),
    Tunable("run", "strict", _bool, False, "exit with status 3 when the run diverges"),
    Tunable("sweep", "taus", _floats, PAPER_TAUS, "delays to sweep [s]"),
    Tunable("sweep", "modes", _choices(CONTROLLERS), ("pid", "pid-cdob-modified"), "controllers to sweep"),
    Tunable("sweep", "workers", _int, 1, "parallel worker processes"),
    Tunable("output", "dir", _str, "out", "output directory", "--out"),
    Tunable("output", "plots", _bool, True, "write SVG plots"),
)

REGISTRY = {t.ident: t for t in TUNABLES}


def _split_comment(line):
    return line.split("#", 1)[0].strip()


def parse_config_text(text):
    """Parse file text into {ident: value}; unknown keys and bad values name the line."""
    out = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _split_comment(raw)
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if not any(t.section == section for t in TUNABLES):
                raise UnknownKey(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        ident = f"{section}.{key}"
        tun = REGISTRY.get(ident)
        if tun is None:
            raise UnknownKey(f"unknown key {key!r} in [{section}]", lineno)
        out[ident] = _convert(tun, value, lineno)
    return out


def _convert(tun: Tunable, value, lineno=None):
    try:
        return tun.parse(value)
    except (ValueError, TypeError) as exc:
        where = f"{tun.ident}" if lineno is not None else f"{tun.option}"
        raise TypeMismatch(f"{where}: {exc}", lineno) from None


class RunConfig:
    """Fully resolved tunables: defaults, then file values, then flag overrides."""

    def __init__(self, values=None):
        self.values = {t.ident: t.default for t in TUNABLES}
        for ident, v in (values or {}).items():
            if ident not in REGISTRY:
                raise UnknownKey(f"unknown key {ident!r}")
            self.values[ident] = v
        self._validate()

    def __getitem__(self, ident):
        return self.values[ident]

    def _validate(self):
        g = [self[f"gains.{k}"] for k in ("kp", "ki", "kd")]
        if any(v is None for v in g) and not all(v is None for v in g):
            raise ConfigError("gains.kp, gains.ki and gains.kd must be set together")

    def vehicle(self):
        v = self.values
        return VehicleParams(v["vehicle.cf"], v["vehicle.cr"], v["vehicle.lf"], v["vehicle.lr"],
                             v["vehicle.mass"], v["vehicle.iz"])

    def scheduling(self):
        v = self.values
        return SchedulingConfig(v["scheduling.k_preview"], v["scheduling.ls_min"], v["scheduling.a_lat_max"],
                                v["scheduling.v_max"])

    def geometry(self):
        v = self.values
        return PresetGeometry(
            length=v["path.length"], lane_width=v["path.lane_width"], single_change=v["path.single_change"],
            double_up=v["path.double_up"], double_down=v["path.double_down"], bump_height=v["path.bump_height"],
            bump_extent=v["path.bump_extent"], waypoint_step=v["path.waypoint_step"],
        )

    def q_spec(self):
        v = self.values
        return QFilterSpec(v["qfilter.wp"], v["qfilter.ws"], v["qfilter.ap"], v["qfilter.as"])

    def dstab(self):
        v = self.values
        return DStabilitySpec(v["dstab.sigma"], v["dstab.zeta_min"], v["dstab.r_max"])

    def axes(self):
        v = self.values
        return GainAxes(*(np.linspace(0.0, v[f"grid.{k}_max"], v[f"grid.{k}_n"]) for k in ("kp", "ki", "kd")))

    def axes_are_default(self):
        return all(self.values[f"grid.{k}"] == REGISTRY[f"grid.{k}"].default
                   for k in ("kp_max", "kp_n", "ki_max", "ki_n", "kd_max", "kd_n"))

    def explicit_gains(self):
        g = [self.values[f"gains.{k}"] for k in ("kp", "ki", "kd")]
        return None if g[0] is None else PidGains(*g)

    def scenario(self, schedule=None):
        v = self.values
        return Scenario(
            path=v["path.preset"], geometry=self.geometry(), controller=v["sim.controller"], tau=v["sim.tau"],
            delay_site=v["sim.delay_site"], speed_policy=v["sim.speed_policy"], speed=v["sim.speed"],
            gains=self.explicit_gains(), schedule=schedule, saturation=v["sim.saturation"],
            vehicle=self.vehicle(), scheduling=self.scheduling(), q_spec=self.q_spec(), dstab=self.dstab(),
            deriv_tf=v["sim.deriv_tf"],
        )

    def sim_config(self):
        return SimConfig(dt=self.values["sim.dt"], duration=self.values["sim.duration"])


def parse_config(text="", flags=None) -> RunConfig:
    """Merge file text with flag overrides ({ident: raw string or parsed value})."""
    values = parse_config_text(text)
    for ident, raw in (flags or {}).items():
        tun = REGISTRY.get(ident)
        if tun is None:
            raise UnknownKey(f"unknown option {ident!r}")
        values[ident] = _convert(tun, raw) if isinstance(raw, str) else raw
    return RunConfig(values)
