"""Fixed-step closed-loop simulation: path, plant, delay, CDOB and PID."""

from __future__ import annotations

import csv
import functools
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .cdob import Cdob, QFilterSpec, design_q, nominal_channels
from .controller import (
    DEFAULT_KNOTS,
    DStabilitySpec,
    GainSchedule,
    PidController,
    PidGains,
    design_schedule,
    lookup_gains,
)
from .paths import PRESETS, PresetGeometry, ReferencePath, make_preset_path
from .signals import DelayLine, discretize_bilinear
from .vehicle import (
    DIVERGENCE_LIMIT,
    SchedulingConfig,
    TrackingState,
    VehicleParams,
    build_tracking_model,
    preview_distance,
    schedule_speed,
)

CONTROLLERS = ("pid", "pid-cdob-modified", "pid-cdob-standard")
SPEED_POLICIES = ("fixed", "scheduled")
DELAY_SITES = ("sensor", "actuator")
CSV_COLUMNS = ("t", "s", "x", "y", "beta", "r", "dpsi", "ey", "steer_cmd", "steer_applied", "rho", "ycomp")
STARTUP_EXCLUSION = 0.5  # s
PAPER_TAUS = (0.01, 0.05, 0.1, 0.3)


@dataclass(frozen=True)
class Scenario:
    path: str = "single-lane"
    geometry: PresetGeometry = field(default_factory=PresetGeometry)
    controller: str = "pid-cdob-modified"
    tau: float = 0.0  # s
    delay_site: str = "sensor"
    speed_policy: str = "fixed"
    speed: float = 10.0  # m/s, used when speed_policy == "fixed"
    gains: PidGains | None = None  # explicit gains override the schedule
    schedule: GainSchedule | None = None  # None -> designed default schedule
    saturation: float = 0.6  # rad
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    scheduling: SchedulingConfig = field(default_factory=SchedulingConfig)
    q_spec: QFilterSpec = field(default_factory=QFilterSpec)
    dstab: DStabilitySpec = field(default_factory=DStabilitySpec)
    deriv_tf: float | None = None  # s; None -> 5*dt

    def __post_init__(self):
        if self.path not in PRESETS:
            raise ValueError(f"unknown path preset {self.path!r}")
        if self.controller not in CONTROLLERS:
            raise ValueError(f"controller must be one of {CONTROLLERS}")
        if self.delay_site not in DELAY_SITES:
            raise ValueError(f"delay_site must be one of {DELAY_SITES}")
        if self.speed_policy not in SPEED_POLICIES:
            raise ValueError(f"speed_policy must be one of {SPEED_POLICIES}")
        if not self.tau >= 0:
            raise ValueError("tau must be >= 0")
        if not self.saturation > 0:
            raise ValueError("saturation must be > 0")
        if self.speed_policy == "fixed" and not self.speed > 0:
            raise ValueError("speed must be > 0")

    @property
    def label(self):
        return f"{self.path}_{self.controller}_tau{self.tau:g}"


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3  # s
    duration: float | None = None  # s; None runs to the end of the path
    initial_state: TrackingState = field(default_factory=TrackingState)
    initial_pose: tuple | None = None  # (x, y, psi); None -> start of the path

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be > 0")


@dataclass(frozen=True)
class Metrics:
    max_abs_ey: float
    rms_ey: float
    max_abs_steer: float
    diverged: bool
    final_s: float


@dataclass(eq=False)
class SimResult:
    series: dict  # column name -> ndarray, keys as CSV_COLUMNS
    metrics: Metrics
    diverged: bool
    label: str = ""
    speed: float = float("nan")
    gains: PidGains | None = None

    def __len__(self):
        return len(self.series["t"])

    def __getitem__(self, key):
        return self.series[key]


def compute_metrics(t, ey, steer, s, diverged=False, exclude=STARTUP_EXCLUSION) -> Metrics:
    """Max / RMS over samples with t >= exclude (all samples if none qualify).

    A diverged run has an unbounded error, so its ey metrics are inf rather
    than whatever value happened to precede the divergence guard.
    """
    t = np.asarray(t, dtype=float)
    if t.size == 0:
        raise ValueError("empty series")
    keep = t >= exclude - 1e-12
    if not keep.any():
        keep = np.ones_like(t, dtype=bool)
    e = np.abs(np.asarray(ey, dtype=float)[keep])
    return Metrics(
        max_abs_ey=math.inf if diverged else float(e.max()),
        rms_ey=math.inf if diverged else float(np.sqrt(np.mean(e * e))),
        max_abs_steer=float(np.max(np.abs(np.asarray(steer, dtype=float)[keep]))),
        diverged=bool(diverged),
        final_s=float(np.asarray(s)[-1]),
    )


def result_metrics(r: SimResult, exclude=STARTUP_EXCLUSION) -> Metrics:
    return compute_metrics(r["t"], r["ey"], r["steer_applied"], r["s"], r.diverged, exclude)


def rk4_step(f, t, y, dt):
    """One classical Runge-Kutta step for y' = f(t, y); y and f(t, y) are float sequences."""
    h2 = 0.5 * dt
    k1 = f(t, y)
    k2 = f(t + h2, [a + h2 * b for a, b in zip(y, k1)])
    k3 = f(t + h2, [a + h2 * b for a, b in zip(y, k2)])
    k4 = f(t + dt, [a + dt * b for a, b in zip(y, k3)])
    return [a + dt / 6.0 * (b + 2.0 * c + 2.0 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


@functools.lru_cache(maxsize=32)
def preset_path(kind, geom: PresetGeometry = PresetGeometry()) -> ReferencePath:
    return make_preset_path(kind, geom)


@functools.lru_cache(maxsize=8)
def default_schedule(params=VehicleParams(), sched_cfg=SchedulingConfig(), spec=DStabilitySpec(),
                     knots=DEFAULT_KNOTS) -> GainSchedule:
    return design_schedule(params, sched_cfg, spec, None, knots)


def peak_curvature(path: ReferencePath):
    return float(np.max(np.abs(path.curvature_profile()[1])))


def scenario_speed(scn: Scenario, path: ReferencePath | None = None):
    if scn.speed_policy == "fixed":
        return float(scn.speed)
    path = path or preset_path(scn.path, scn.geometry)
    return schedule_speed(peak_curvature(path), scn.scheduling)


def resolve_gains(scn: Scenario, V=None) -> PidGains:
    if scn.gains is not None:
        return scn.gains
    V = scenario_speed(scn) if V is None else V
    sched = scn.schedule or default_schedule(scn.vehicle, scn.scheduling, scn.dstab)
    return lookup_gains(sched, V)


def _plant_rhs(params: VehicleParams, V, ls):
    """Right-hand side of the joint tracking + global pose model.

    State (beta, r, dpsi, ey, X, Y, psi). Steering and curvature are passed in
    per stage, so the integrator sees exactly the inputs the caller chose.
    """
    m = build_tracking_model(params, V, ls)
    (a00, a01, _, _), (a10, a11, _, _) = m.A[0].tolist(), m.A[1].tolist()
    b0, b1 = float(m.B[0, 0]), float(m.B[1, 0])

    def rhs(y, delta, rho):
        beta, r, dpsi, _, _, _, psi = y
        return (
            a00 * beta + a01 * r + b0 * delta,
            a10 * beta + a11 * r + b1 * delta,
            r - V * rho,
            V * beta + ls * r + V * dpsi - ls * V * rho,
            V * math.cos(psi + beta),
            V * math.sin(psi + beta),
            r,
        )

    return rhs


def run_scenario(scn: Scenario, cfg: SimConfig | None = None, path: ReferencePath | None = None) -> SimResult:
    """Simulate one scenario.

    Per step: curvature at s_n, measured ey (delayed when the delay sits on
    the sensor side), CDOB compensation with the previous command, PID on
    -y_comp with saturation, optional actuator-side delay, then one RK4 step.
    Steering is interpolated linearly across the step from the previously
    applied value, and curvature is evaluated at the RK4 stage positions.
    """
    cfg = cfg or SimConfig()
    dt = cfg.dt
    path = path or preset_path(scn.path, scn.geometry)
    V = scenario_speed(scn, path)
    ls = preview_distance(V, scn.scheduling)
    gains = resolve_gains(scn, V)

    n_path = int(math.floor(path.length / (V * dt) + 1e-9))
    n_steps = n_path if cfg.duration is None else min(n_path, int(round(cfg.duration / dt)))
    # curvature on a half-step grid covers every RK4 stage
    half = np.arange(2 * n_steps + 1) * (0.5 * V * dt)
    rho_grid = path.sample_many(np.minimum(half, path.length))[3].tolist()

    pid = PidController(gains, dt, scn.deriv_tf)
    cdob = None
    if scn.controller != "pid":
        gn, grho = nominal_channels(build_tracking_model(scn.vehicle, V, ls))
        mode = "modified" if scn.controller == "pid-cdob-modified" else "standard"
        cdob = Cdob(gn, grho, design_q(scn.q_spec), dt, mode)

    delay = DelayLine(scn.tau, dt)
    sensor_delay = scn.delay_site == "sensor"
    sat = float(scn.saturation)
    rhs = _plant_rhs(scn.vehicle, V, ls)
    half_dt = 0.5 * dt

    if cfg.initial_pose is None:
        p0 = path.sample(0.0)
        pose = (p0.x, p0.y, p0.heading)
    else:
        pose = tuple(float(v) for v in cfg.initial_pose)
    st = cfg.initial_state
    y = [st.beta, st.r, st.dpsi, st.ey, pose[0], pose[1], pose[2]]

    out = {k: [] for k in CSV_COLUMNS}
    u_prev = 0.0
    applied_prev = 0.0
    diverged = False
    for n in range(n_steps):
        t = n * dt
        r0, rm, r1 = rho_grid[2 * n], rho_grid[2 * n + 1], rho_grid[2 * n + 2]
        ey = y[3]
        y_meas = delay.push(ey) if sensor_delay else ey
        y_comp = cdob.step(u_prev, y_meas, r0) if cdob is not None else y_meas
        u = pid.step(-y_comp)
        u = min(sat, max(-sat, u))
        applied = u if sensor_delay else delay.push(u)

        for key, val in zip(CSV_COLUMNS, (t, V * t, y[4], y[5], y[0], y[1], y[2], ey, u, applied, r0, y_comp)):
            out[key].append(val)

        # stage inputs keyed by the step-local stage time
        stage = {0.0: (applied_prev, r0), half_dt: (0.5 * (applied_prev + applied), rm), dt: (applied, r1)}
        y = rk4_step(lambda tl, v: rhs(v, *stage[tl]), 0.0, y, dt)
        u_prev, applied_prev = u, applied

        if not all(math.isfinite(v) for v in y) or abs(y[3]) > DIVERGENCE_LIMIT:
            diverged = True
            break

    series = {k: np.asarray(v, dtype=float) for k, v in out.items()}
    if not len(series["t"]):
        raise ValueError("scenario produced no samples; path too short for one step")
    metrics = compute_metrics(series["t"], series["ey"], series["steer_applied"], series["s"], diverged)
    return SimResult(series, metrics, diverged, scn.label, V, gains)


def curvature_response(r: SimResult, scn: Scenario, dt):
    """Curvature contribution to ey, filtering the recorded rho through the discretized channel."""
    ls = preview_distance(r.speed, scn.scheduling)
    _, grho = nominal_channels(build_tracking_model(scn.vehicle, r.speed, ls))
    return discretize_bilinear(grho, dt).run(r["rho"])


@dataclass(frozen=True)
class SweepRow:
    tau: float
    mode: str
    result: SimResult
    metrics: Metrics


def _run_cell(args):
    scn, cfg = args
    return run_scenario(scn, cfg)


def sweep(base: Scenario, taus, modes, cfg: SimConfig | None = None, workers=None) -> list:
    """One run per (tau, mode), taus outer and modes inner.

    Gains are resolved once up front so worker processes never redesign them.
    """
    taus, modes = list(taus), list(modes)
    if not taus or not modes:
        return []
    cfg = cfg or SimConfig()
    base = replace(base, gains=resolve_gains(base))
    cells = [(replace(base, tau=float(tau), controller=m), cfg) for tau in taus for m in modes]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    return [SweepRow(c[0].tau, c[0].controller, r, r.metrics) for c, r in zip(cells, results)]


_SUMMARY_FIELDS = ("tau", "mode", "max_abs_ey", "rms_ey", "max_abs_steer", "diverged", "final_s")


def _summary_rows(rows):
    for row in rows:
        m = row.metrics
        yield (f"{row.tau:g}", row.mode, f"{m.max_abs_ey:.6g}", f"{m.rms_ey:.6g}", f"{m.max_abs_steer:.6g}",
               str(m.diverged).lower(), f"{m.final_s:.6g}")


def summary_text(rows) -> str:
    table = [_SUMMARY_FIELDS, *_summary_rows(rows)]
    widths = [max(len(r[i]) for r in table) for i in range(len(_SUMMARY_FIELDS))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table) + "\n"


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_SUMMARY_FIELDS)
    w.writerows(_summary_rows(rows))
    return buf.getvalue()


def export_csv(r: SimResult, path):
    """Write the series with 17 significant digits (exact float round-trip)."""
    path = Path(path)
    cols = [r.series[k] for k in CSV_COLUMNS]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for vals in zip(*cols):
            fh.write(",".join(format(float(v), ".17g") for v in vals) + "\n")
    return path


def read_csv(path) -> dict:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        data = np.array([[float(v) for v in row] for row in rd], dtype=float).reshape(-1, len(header))
    return {k: data[:, i] for i, k in enumerate(header)}


def render_plots(results, outdir, reference: ReferencePath | None = None) -> list:
    """SVG plots: trajectory overlay, ey vs t, steering vs t.

    Each polyline carries its label as the SVG group id. With no results a
    warning is issued and nothing is written.
    """
    results = list(results)
    if not results:
        warnings.warn("no results to plot", RuntimeWarning, stacklevel=2)
        return []
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rc = {"svg.hashsalt": "cdoblab", "svg.fonttype": "none"}
    written = []
    with plt.rc_context(rc):
        fig, ax = plt.subplots(figsize=(8, 3.5))
        if reference is not None:
            xr, yr, _, _ = reference.sample_many(np.linspace(0.0, reference.length, 1001))
            (ln,) = ax.plot(xr, yr, "k--", lw=1.0, label="reference")
            ln.set_gid("reference")
        for r in results:
            (ln,) = ax.plot(r["x"], r["y"], lw=1.2, label=r.label)
            ln.set_gid(r.label)
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend(fontsize=7)
        written.append(_save(fig, outdir / "trajectory.svg"))

        for key, ylabel, name in (("ey", "e_y [m]", "ey.svg"), ("steer_applied", "steer [rad]", "steer.svg")):
            fig, ax = plt.subplots(figsize=(8, 3.5))
            for r in results:
                (ln,) = ax.plot(r["t"], r[key], lw=1.0, label=r.label)
                ln.set_gid(r.label)
            ax.set_xlabel("t [s]")
            ax.set_ylabel(ylabel)
            ax.legend(fontsize=7)
            written.append(_save(fig, outdir / name))
    return written


def _save(fig, path):
    import matplotlib.pyplot as plt

    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
