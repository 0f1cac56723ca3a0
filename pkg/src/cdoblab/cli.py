"""Command-line entry point.

Exit status: 0 success, 1 runtime failure, 2 configuration error,
3 divergence under ``run --strict``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import sim
from .cdob import design_q
from .config import TUNABLES, RunConfig, parse_config
from .controller import compute_admissible_region, design_schedule, plant_channel, select_gains
from .errors import CdobLabError, ConfigError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3

COMMANDS = {
    "path": "write the preset reference path as CSV",
    "design-q": "print the Q-filter order and cutoff",
    "region": "write the admissible PID gain grid as CSV and print the selected gains",
    "run": "simulate one scenario and write CSV, SVG and metrics",
    "sweep": "simulate every (tau, controller) pair and write a summary",
}


def _add_tunables(p: argparse.ArgumentParser):
    by_section = {}
    for t in TUNABLES:
        by_section.setdefault(t.section, []).append(t)
    for section, items in by_section.items():
        grp = p.add_argument_group(f"[{section}]")
        for t in items:
            default = t.default
            if isinstance(default, tuple):
                default = ",".join(f"{v:g}" if isinstance(v, float) else str(v) for v in default)
            grp.add_argument(t.option, dest=t.ident, default=argparse.SUPPRESS, metavar="VALUE",
                             help=f"{t.help} (config: {t.key} in [{section}]; default: {default})")


def build_parser():
    parser = argparse.ArgumentParser(prog="cdoblab", description="Delay-tolerant path-tracking simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", type=Path, default=None, help="sectioned key = value config file")
        _add_tunables(p)
    return parser


def _resolve(ns) -> RunConfig:
    text = ""
    if ns.config is not None:
        try:
            text = ns.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    flags = {t.ident: getattr(ns, t.ident) for t in TUNABLES if hasattr(ns, t.ident)}
    return parse_config(text, flags)


def _outdir(cfg: RunConfig):
    out = Path(cfg["output.dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schedule(cfg: RunConfig):
    if cfg.explicit_gains() is not None:
        return None
    knots = tuple(cfg["gains.knots"])
    if cfg.axes_are_default():
        return sim.default_schedule(cfg.vehicle(), cfg.scheduling(), cfg.dstab(), knots)
    return design_schedule(cfg.vehicle(), cfg.scheduling(), cfg.dstab(), cfg.axes(), knots)


def cmd_path(cfg: RunConfig, out):
    kind = cfg["path.preset"]
    path = sim.preset_path(kind, cfg.geometry())
    s = np.arange(0.0, path.length, cfg["path.sample_ds"])
    s = np.append(s, path.length) if s[-1] < path.length else s
    x, y, heading, rho = path.sample_many(s)
    dest = out / f"path_{kind}.csv"
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write("s,x,y,heading,rho\n")
        for row in zip(s, x, y, heading, rho):
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    print(f"wrote {dest} ({len(s)} samples, length {path.length:.3f} m)")
    return EXIT_OK


def cmd_design_q(cfg: RunConfig, out):
    q = design_q(cfg.q_spec())
    print(f"n_raw {q.n_raw:.4f}")
    print(f"order {q.order}")
    print(f"omega_c {q.omega_c:.1f} rad/s")
    print(f"Q(s) = 1 / ({' + '.join(f'{c:.6g} s^{q.order - i}' for i, c in enumerate(q.tf.den[:-1] / q.tf.den[-1]))} + 1)")
    return EXIT_OK


def cmd_region(cfg: RunConfig, out):
    scn = cfg.scenario()
    V = sim.scenario_speed(scn)
    gn = plant_channel(cfg.vehicle(), V, cfg.scheduling())
    region = compute_admissible_region(gn, cfg.dstab(), cfg.axes(), V=V)
    ax = region.axes
    dest = out / "region.csv"
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write("kp,ki,kd,admissible\n")
        for (i, j, k), ok in np.ndenumerate(region.mask):
            fh.write(f"{ax.kp[i]:.17g},{ax.ki[j]:.17g},{ax.kd[k]:.17g},{int(ok)}\n")
    print(f"V {V:g} m/s: {region.count} of {region.mask.size} grid points admissible; wrote {dest}")
    g = select_gains(region)
    print(f"selected kp {g.kp:.6g} ki {g.ki:.6g} kd {g.kd:.6g}")
    return EXIT_OK


def _write_cell(res: sim.SimResult, celldir: Path, cfg: RunConfig, scn):
    celldir.mkdir(parents=True, exist_ok=True)
    sim.export_csv(res, celldir / "series.csv")
    m = res.metrics
    (celldir / "metrics.txt").write_text(
        f"max_abs_ey {m.max_abs_ey:.17g}\nrms_ey {m.rms_ey:.17g}\nmax_abs_steer {m.max_abs_steer:.17g}\n"
        f"diverged {str(m.diverged).lower()}\nfinal_s {m.final_s:.17g}\nspeed {res.speed:.17g}\n"
        f"kp {res.gains.kp:.17g}\nki {res.gains.ki:.17g}\nkd {res.gains.kd:.17g}\n",
        encoding="utf-8",
    )
    if cfg["output.plots"]:
        sim.render_plots([res], celldir, sim.preset_path(scn.path, scn.geometry))


def cmd_run(cfg: RunConfig, out):
    scn = cfg.scenario(_schedule(cfg))
    res = sim.run_scenario(scn, cfg.sim_config())
    _write_cell(res, out / scn.label, cfg, scn)
    m = res.metrics
    print(f"{scn.label}: max|ey| {m.max_abs_ey:.4f} m, rms {m.rms_ey:.4f} m, "
          f"max|steer| {m.max_abs_steer:.4f} rad, diverged {str(m.diverged).lower()}")
    if res.diverged and cfg["run.strict"]:
        print("run diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out):
    base = cfg.scenario(_schedule(cfg))
    rows = sim.sweep(base, cfg["sweep.taus"], cfg["sweep.modes"], cfg.sim_config(), cfg["sweep.workers"])
    for row in rows:
        _write_cell(row.result, out / row.result.label, cfg, base)
    text = sim.summary_text(rows)
    (out / "summary.txt").write_text(text, encoding="utf-8")
    (out / "summary.csv").write_text(sim.summary_csv(rows), encoding="utf-8")
    print(text, end="")
    return EXIT_OK


HANDLERS = {"path": cmd_path, "design-q": cmd_design_q, "region": cmd_region, "run": cmd_run, "sweep": cmd_sweep}


def _normalize_strict(argv):
    # allow a bare "--strict" as well as "--strict VALUE"
    out = []
    for i, a in enumerate(argv):
        out.append(a)
        if a == "--strict":
            nxt = argv[i + 1] if i + 1 < len(argv) else None
            if nxt is None or nxt.startswith("--"):
                out.append("true")
    return out


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = build_parser().parse_args(_normalize_strict(argv))
    try:
        cfg = _resolve(ns)
        cfg.scenario()
        cfg.sim_config()
        cfg.axes()
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return HANDLERS[ns.command](cfg, _outdir(cfg))
    except CdobLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
