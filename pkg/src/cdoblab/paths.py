"""Reference path generation.

Pipeline: sparse preset waypoints -> dense resampling -> balanced
segmentation -> per-segment polynomial least squares with value, slope and
second-derivative continuity enforced at the joints. The fitted path carries
an arc-length table so it can be sampled by distance travelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import (
    DegenerateTangent,
    InvalidGeometry,
    OutOfRange,
    SingularFit,
    TooFewPoints,
    TooFewPointsPerSegment,
)

PRESETS = ("straight", "single-lane", "double-lane", "avoidance")
DEFAULT_DS = 0.05
_TANGENT_EPS = 1e-12


class Waypoint(NamedTuple):
    x: float
    y: float


class PoseSample(NamedTuple):
    x: float
    y: float
    heading: float
    rho: float


@dataclass(frozen=True)
class PresetGeometry:
    """Shape parameters for the preset maneuvers (all lengths in m)."""

    length: float = 100.0
    lane_width: float = 3.5
    single_change: tuple = (30.0, 60.0)
    double_up: tuple = (20.0, 45.0)
    double_down: tuple = (55.0, 80.0)
    bump_height: float = 2.0
    bump_extent: tuple = (20.0, 50.0)
    waypoint_step: float = 1.0

    def validate(self, kind):
        if self.length <= 0 or self.waypoint_step <= 0:
            raise InvalidGeometry("length and waypoint_step must be positive")
        if kind == "single-lane":
            if self.lane_width <= 0:
                raise InvalidGeometry("lane_width must be positive")
            self._check_ordered(self.single_change)
        elif kind == "double-lane":
            if self.lane_width <= 0:
                raise InvalidGeometry("lane_width must be positive")
            self._check_ordered(self.double_up + self.double_down)
        elif kind == "avoidance":
            if self.bump_height <= 0:
                raise InvalidGeometry("bump_height must be positive")
            self._check_ordered(self.bump_extent)

    def _check_ordered(self, xs):
        pts = (0.0,) + tuple(xs) + (self.length,)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise InvalidGeometry(f"transition extents {xs} must be increasing inside (0, {self.length})")


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u * u)


def _bump(u):
    # C2 bump on [0, 1], unit peak at u = 0.5
    u = np.clip(u, 0.0, 1.0)
    return 64.0 * u**3 * (1.0 - u) ** 3


def _ramp(x, span):
    a, b = span
    return _smoothstep((x - a) / (b - a))


def preset_waypoints(kind, geom: PresetGeometry | None = None):
    """Sparse, x-monotone waypoints outlining one of the preset maneuvers."""
    geom = geom or PresetGeometry()
    if kind not in PRESETS:
        raise ValueError(f"unknown preset {kind!r}; choose from {PRESETS}")
    geom.validate(kind)
    n = max(2, int(math.ceil(geom.length / geom.waypoint_step)) + 1)
    x = np.linspace(0.0, geom.length, n)
    if kind == "straight":
        y = np.zeros_like(x)
    elif kind == "single-lane":
        y = geom.lane_width * _ramp(x, geom.single_change)
    elif kind == "double-lane":
        y = geom.lane_width * (_ramp(x, geom.double_up) - _ramp(x, geom.double_down))
    else:
        a, b = geom.bump_extent
        y = geom.bump_height * _bump((x - a) / (b - a))
    return [Waypoint(float(xi), float(yi)) for xi, yi in zip(x, y)]


def _as_points(points):
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (N, 2) sequence")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


def densify(points, spacing):
    """Linear interpolation between consecutive waypoints, steps no longer than spacing.

    Every waypoint pair gets the same number of subdivisions (set by the
    longest pair), so input waypoints stay at regular indices of the output
    and count-balanced segmentation lines up with them.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    pts = _as_points(points)
    if len(pts) < 2:
        raise TooFewPoints("need at least two points to densify")
    gaps = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(gaps == 0):
        raise TooFewPoints("consecutive points coincide")
    n = max(1, int(math.ceil(gaps.max() / spacing - 1e-12)))
    t = np.arange(n) / n
    body = pts[:-1, None, :] + t[None, :, None] * np.diff(pts, axis=0)[:, None, :]
    out = np.vstack([body.reshape(-1, 2), pts[-1:]])
    return [Waypoint(float(a), float(b)) for a, b in out]


def segment_points(dense, n_segments, degree=5):
    """Split into contiguous runs of balanced size that share boundary points."""
    pts = _as_points(dense)
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    bounds = np.round(np.linspace(0, len(pts) - 1, n_segments + 1)).astype(int)
    runs = [pts[a:b + 1] for a, b in zip(bounds, bounds[1:])]
    short = [len(r) for r in runs if len(r) < degree + 1]
    if short:
        raise TooFewPointsPerSegment(
            f"{len(pts)} points in {n_segments} segments leaves runs of {min(short)} points; "
            f"degree {degree} needs {degree + 1}"
        )
    return [[Waypoint(float(a), float(b)) for a, b in r] for r in runs]


@dataclass(frozen=True, eq=False)
class PathSegment:
    """Planar polynomial x(lam), y(lam) on lam in [0, 1]; coefficients in ascending powers."""

    cx: np.ndarray
    cy: np.ndarray

    def __post_init__(self):
        cx = np.asarray(self.cx, dtype=float)
        cy = np.asarray(self.cy, dtype=float)
        if cx.shape != cy.shape or cx.ndim != 1:
            raise ValueError("cx and cy must be 1-D and equally long")
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)

    @property
    def degree(self):
        return len(self.cx) - 1

    def position(self, lam):
        return P.polyval(lam, self.cx), P.polyval(lam, self.cy)

    def derivative(self, lam, order=1):
        return P.polyval(lam, P.polyder(self.cx, order)), P.polyval(lam, P.polyder(self.cy, order))

    def speed(self, lam):
        dx, dy = self.derivative(lam)
        return np.hypot(dx, dy)

    def reversed(self):
        """Same curve traversed with lam -> 1 - lam."""
        flip = np.array([[math.comb(j, i) * (-1) ** i if i <= j else 0 for j in range(self.degree + 1)]
                         for i in range(self.degree + 1)], dtype=float)
        # p(1 - lam) = sum_j c_j (1 - lam)^j
        return PathSegment(flip @ self.cx, flip @ self.cy)


def curvature_at(seg: PathSegment, lam):
    """Signed curvature (x'y'' - y'x'') / (x'^2 + y'^2)^(3/2), derivatives in lam."""
    dx, dy = seg.derivative(lam, 1)
    ddx, ddy = seg.derivative(lam, 2)
    sq = dx * dx + dy * dy
    if np.any(sq < _TANGENT_EPS):
        raise DegenerateTangent(f"tangent vanishes at lam={lam}")
    return (dx * ddy - dy * ddx) / sq**1.5


@dataclass(frozen=True, eq=False)
class ReferencePath:
    """Ordered polynomial segments plus a monotone arc-length table.

    The table maps cumulative arc length to a global parameter u = k + lam
    for segment k, so joints appear exactly once.
    """

    segments: tuple
    s_nodes: np.ndarray = field(default=None)
    u_nodes: np.ndarray = field(default=None)

    @property
    def length(self):
        return float(self.s_nodes[-1])

    @property
    def n_segments(self):
        return len(self.segments)

    def _locate(self, u):
        k = np.minimum(np.floor(u).astype(int), len(self.segments) - 1)
        return k, u - k

    def _u_at(self, s):
        s = np.asarray(s, dtype=float)
        tol = 1e-9 * max(1.0, self.length)
        if np.any(s < -tol) or np.any(s > self.length + tol):
            raise OutOfRange(f"arc length outside [0, {self.length:.6f}]")
        return np.interp(np.clip(s, 0.0, self.length), self.s_nodes, self.u_nodes)

    def sample_many(self, s):
        """Vectorized sample: arrays of x, y, heading and curvature at arc lengths s."""
        u = np.atleast_1d(self._u_at(s))
        k, lam = self._locate(u)
        x = np.empty_like(u)
        y = np.empty_like(u)
        heading = np.empty_like(u)
        rho = np.empty_like(u)
        for idx in np.unique(k):
            m = k == idx
            seg = self.segments[idx]
            x[m], y[m] = seg.position(lam[m])
            dx, dy = seg.derivative(lam[m])
            heading[m] = np.arctan2(dy, dx)
            rho[m] = curvature_at(seg, lam[m])
        heading = np.where(heading <= -math.pi, math.pi, heading)
        return x, y, heading, rho

    def sample(self, s) -> PoseSample:
        x, y, h, r = self.sample_many([s])
        return PoseSample(float(x[0]), float(y[0]), float(h[0]), float(r[0]))

    def curvature_profile(self, n=2001):
        s = np.linspace(0.0, self.length, n)
        return s, self.sample_many(s)[3]


def sample_path(path: ReferencePath, s) -> PoseSample:
    return path.sample(s)


def _fit_basis(lam, degree, order=0):
    """Rows of d^order/dlam^order [1, lam, ..., lam^degree]."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.zeros((len(lam), degree + 1))
    for j in range(order, degree + 1):
        out[:, j] = math.perm(j, order) * lam ** (j - order)
    return out


def _run_parameter(run, param):
    if param == "uniform":
        return np.linspace(0.0, 1.0, len(run))
    chord = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(run, axis=0).T))])
    if chord[-1] == 0:
        raise SingularFit("segment has zero chord length")
    return chord / chord[-1]


def fit_path(runs, degree=5, param="chord", ds=DEFAULT_DS) -> ReferencePath:
    """Constrained least-squares polynomial fit of every run.

    Adjacent segments share value, first and second lam-derivative at the
    joint; the path's first and last points are interpolated exactly. Solved
    as one equality-constrained least-squares (KKT) system for x and y.
    """
    if degree < 3:
        raise ValueError("degree must be >= 3 for C2 joints")
    runs = [_as_points(r) for r in runs]
    if not runs:
        raise TooFewPoints("no runs to fit")
    for r in runs:
        if len(r) < degree + 1:
            raise TooFewPointsPerSegment(f"run of {len(r)} points cannot determine degree {degree}")
    nseg = len(runs)
    nc = degree + 1
    nvar = nseg * nc

    H = np.zeros((nvar, nvar))
    g = np.zeros((nvar, 2))
    for k, r in enumerate(runs):
        V = _fit_basis(_run_parameter(r, param), degree)
        blk = slice(k * nc, (k + 1) * nc)
        H[blk, blk] = V.T @ V
        g[blk] = V.T @ r

    rows, rhs = [], []
    start = np.zeros(nvar)
    start[:nc] = _fit_basis(0.0, degree)[0]
    rows.append(start)
    rhs.append(runs[0][0])
    end = np.zeros(nvar)
    end[-nc:] = _fit_basis(1.0, degree)[0]
    rows.append(end)
    rhs.append(runs[-1][-1])
    for k in range(nseg - 1):
        for order in range(3):
            row = np.zeros(nvar)
            row[k * nc:(k + 1) * nc] = _fit_basis(1.0, degree, order)[0]
            row[(k + 1) * nc:(k + 2) * nc] = -_fit_basis(0.0, degree, order)[0]
            rows.append(row)
            rhs.append(np.zeros(2))
    E = np.array(rows)
    f = np.array(rhs)

    m = len(rows)
    kkt = np.block([[H, E.T], [E, np.zeros((m, m))]])
    if np.linalg.matrix_rank(kkt) < kkt.shape[0]:
        raise SingularFit("constrained normal equations are rank deficient")
    sol = np.linalg.solve(kkt, np.vstack([g, f]))
    coeffs = sol[:nvar]
    segments = tuple(
        PathSegment(coeffs[k * nc:(k + 1) * nc, 0], coeffs[k * nc:(k + 1) * nc, 1]) for k in range(nseg)
    )
    for seg in segments:
        lam = np.linspace(0.0, 1.0, 201)
        if np.min(seg.speed(lam)) ** 2 < _TANGENT_EPS:
            raise SingularFit("fitted segment has a vanishing tangent")
    return build_arclength_table(ReferencePath(segments), ds)


def build_arclength_table(path: ReferencePath, ds=DEFAULT_DS) -> ReferencePath:
    """Cumulative arc length by composite trapezoid on a lam grid finer than ds."""
    if ds <= 0:
        raise ValueError("ds must be positive")
    s_parts = [np.zeros(1)]
    u_parts = [np.zeros(1)]
    s0 = 0.0
    for k, seg in enumerate(path.segments):
        probe = seg.speed(np.linspace(0.0, 1.0, 257))
        n = max(2, int(math.ceil(probe.max() / ds)))
        lam = np.linspace(0.0, 1.0, n + 1)
        sp = seg.speed(lam)
        cum = s0 + np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.diff(lam))])
        s_parts.append(cum[1:])
        u_parts.append(k + lam[1:])
        s0 = cum[-1]
    return replace(path, s_nodes=np.concatenate(s_parts), u_nodes=np.concatenate(u_parts))


def default_segments(kind):
    # 5 m segments: joints land on the transition boundaries of every preset
    return {"straight": 2, "single-lane": 20, "double-lane": 20, "avoidance": 20}[kind]


def make_preset_path(kind, geom: PresetGeometry | None = None, spacing=0.5, n_segments=None,
                     degree=5, ds=DEFAULT_DS) -> ReferencePath:
    """Run the full waypoint -> fitted path pipeline for a preset."""
    wps = preset_waypoints(kind, geom)
    dense = densify(wps, spacing)
    runs = segment_points(dense, n_segments or default_segments(kind), degree)
    return fit_path(runs, degree, ds=ds)
