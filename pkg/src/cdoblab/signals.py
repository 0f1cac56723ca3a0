"""LTI plumbing: state-space and transfer-function containers, Tustin
discretization, per-sample filters and integer-sample delay lines."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import ImproperResult, ImproperTf, NonMinimumPhase

# Zeros with real part above this are treated as non-minimum-phase.
MIN_PHASE_MARGIN = -1e-9
# Relative size below which a characteristic-polynomial coefficient is zeroed.
COEFF_SNAP = 1e-12


def _trim(coeffs, rtol=1e-12):
    """Drop leading coefficients that are negligible relative to the largest."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return np.zeros(1)
    nz = np.flatnonzero(np.abs(c) > rtol * scale)
    return c[nz[0]:].copy()


@dataclass(frozen=True, eq=False)
class LtiModel:
    """Continuous-time state-space realization (A, B, C, D)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A, B, C, D = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (self.A, self.B, self.C, self.D))
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n or C.shape[1] != n:
            raise ValueError("B rows and C columns must match the state dimension")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        for name, m in zip("ABCD", (A, B, C, D)):
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} has non-finite entries")
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @property
    def n_states(self):
        return self.A.shape[0]


class RationalTf:
    """SISO continuous transfer function num(s)/den(s), descending powers.

    The denominator is normalized to be monic on construction.
    """

    def __init__(self, num, den):
        num = _trim(num)
        den = _trim(den)
        if den[0] == 0.0:
            raise ValueError("denominator is identically zero")
        lead = den[0]
        self.num = num / lead
        self.den = den / lead

    def __repr__(self):
        return f"RationalTf(num={self.num.tolist()}, den={self.den.tolist()})"

    @property
    def order(self):
        return len(self.den) - 1

    @property
    def relative_degree(self):
        return (len(self.den) - 1) - (len(self.num) - 1)

    def is_proper(self):
        return self.relative_degree >= 0

    def __call__(self, s):
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    def dc_gain(self):
        return self(0.0)

    def freqresp(self, w):
        return self(1j * np.asarray(w, dtype=float))

    def __mul__(self, other):
        if not isinstance(other, RationalTf):
            return RationalTf(self.num * float(other), self.den)
        return RationalTf(np.polymul(self.num, other.num), np.polymul(self.den, other.den))

    __rmul__ = __mul__


def tf_from_state_space(m: LtiModel, input_idx=0, output_idx=0) -> RationalTf:
    """SISO channel of a state-space model via the Leverrier-Faddeev recursion.

    With N_0 = I and N_k = A N_{k-1} + c_k I, the resolvent is
    (sI - A)^-1 = sum_k N_k s^(n-1-k) / p(s), so the numerator coefficients
    are C N_k B plus the feedthrough times p(s).
    """
    A = m.A
    b = m.B[:, input_idx]
    c = m.C[output_idx, :]
    d = m.D[output_idx, input_idx]
    n = A.shape[0]

    charpoly = np.zeros(n + 1)
    charpoly[0] = 1.0
    resolvent_terms = np.zeros(n + 1)
    N = np.eye(n)
    for k in range(1, n + 1):
        resolvent_terms[k] = c @ N @ b
        AN = A @ N
        charpoly[k] = -np.trace(AN) / k
        N = AN + charpoly[k] * np.eye(n)
    num = resolvent_terms + d * charpoly
    # Coefficient k scales like ||A||^k; anything far below that is roundoff
    # (it would otherwise perturb exact integrators off the origin).
    scale = max(1.0, float(np.linalg.norm(A, 2))) ** np.arange(n + 1)
    charpoly[np.abs(charpoly) < COEFF_SNAP * scale] = 0.0
    io_scale = scale * max(float(np.linalg.norm(b) * np.linalg.norm(c)), abs(d), 1e-300)
    num[np.abs(num) < COEFF_SNAP * io_scale] = 0.0
    return RationalTf(num, charpoly)


def poles_zeros(tf: RationalTf):
    """Poles and zeros via companion-matrix eigenvalues (numpy.roots)."""
    zeros = np.roots(tf.num) if len(tf.num) > 1 else np.array([], dtype=complex)
    poles = np.roots(tf.den) if len(tf.den) > 1 else np.array([], dtype=complex)
    return poles.astype(complex), zeros.astype(complex)


class DiscreteFilter:
    """Discrete recursion with a monic denominator.

    Runs as a cascade of transposed direct-form II sections when built from
    second-order sections, otherwise as one section of full order. State is
    held in plain floats; one instance belongs to one loop.
    """

    def __init__(self, b, a, dt, sos=None):
        b = np.asarray(b, dtype=float)
        a = np.asarray(a, dtype=float)
        n = max(len(a), len(b))
        b = np.concatenate([np.zeros(n - len(b)), b])
        a = np.concatenate([a, np.zeros(n - len(a))])
        if a[0] == 0.0:
            raise ValueError("leading denominator coefficient must be nonzero")
        self.b = b / a[0]
        self.a = a / a[0]
        self.dt = float(dt)
        if sos is None:
            sections = [(self.b, self.a)]
        else:
            sos = np.atleast_2d(np.asarray(sos, dtype=float))
            sections = [(row[:3] / row[3], row[3:] / row[3]) for row in sos]
        self._sections = [(sb.tolist(), sa.tolist()) for sb, sa in sections]
        self.reset()

    @property
    def order(self):
        return len(self.a) - 1

    @property
    def state(self):
        return [v for z in self._states for v in z]

    def reset(self):
        self._states = [[0.0] * (len(sb) - 1) for sb, _ in self._sections]

    def step(self, u):
        y = float(u)
        for (b, a), z in zip(self._sections, self._states):
            u = y
            n = len(z)
            y = b[0] * u + (z[0] if n else 0.0)
            for i in range(n - 1):
                z[i] = b[i + 1] * u + z[i + 1] - a[i + 1] * y
            if n:
                z[n - 1] = b[n] * u - a[n] * y
        return y

    def run(self, u):
        """Filter a whole sequence from the current state."""
        return np.array([self.step(v) for v in np.asarray(u, dtype=float)])

    def dc_gain(self):
        return float(np.sum(self.b) / np.sum(self.a))

    def poles(self):
        return np.roots(self.a) if self.order else np.array([], dtype=complex)

    def freqresp(self, w):
        z = np.exp(1j * np.asarray(w, dtype=float) * self.dt)
        return np.polyval(self.b, z) / np.polyval(self.a, z)


def discretize_bilinear(tf: RationalTf, dt) -> DiscreteFilter:
    """Tustin substitution s -> (2/dt)(z-1)/(z+1), no prewarping.

    The map is applied to poles and zeros, so integrators land exactly on
    z = 1, and the result runs as second-order sections.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not tf.is_proper():
        raise ImproperTf(f"cannot discretize improper transfer function {tf!r}")
    fs = 1.0 / dt
    b, a = signal.bilinear(tf.num, tf.den, fs=fs)
    if tf.order <= 1 or not np.any(tf.num):
        return DiscreteFilter(b, a, dt)
    z, p, k = signal.tf2zpk(tf.num, tf.den)
    zd, pd, kd = signal.bilinear_zpk(z, p, k, fs)
    sos = signal.zpk2sos(zd, pd, kd)
    return DiscreteFilter(b, a, dt, sos=sos)


def delay_samples(tau, dt):
    """Number of samples for a delay of tau, rounding half up."""
    if tau < 0:
        raise ValueError("delay must be non-negative")
    # the epsilon absorbs representation error in tau/dt (0.3/1e-3 = 299.99...)
    return int(math.floor(tau / dt + 0.5 + 1e-9))


class DelayLine:
    """Pure delay of round(tau/dt) samples, pre-filled with zeros."""

    def __init__(self, tau, dt, fill=0.0):
        self.tau = float(tau)
        self.dt = float(dt)
        self.n = delay_samples(tau, dt)
        self._fill = float(fill)
        self._buf = deque([self._fill] * self.n, maxlen=self.n) if self.n else None

    def reset(self):
        if self.n:
            self._buf = deque([self._fill] * self.n, maxlen=self.n)

    def push(self, u):
        if not self.n:
            return u
        out = self._buf[0]
        self._buf.append(u)
        return out


def proper_inverse_product(q: RationalTf, gn: RationalTf) -> RationalTf:
    """Q / Gn for a minimum-phase Gn and a Q of sufficient relative degree."""
    _, zeros = poles_zeros(gn)
    bad = [z for z in zeros if z.real >= MIN_PHASE_MARGIN]
    if bad:
        raise NonMinimumPhase(bad)
    if q.relative_degree < gn.relative_degree:
        raise ImproperResult(
            f"Q relative degree {q.relative_degree} is below the plant's {gn.relative_degree}"
        )
    out = RationalTf(np.polymul(q.num, gn.den), np.polymul(q.den, gn.num))
    if not out.is_proper():
        raise ImproperResult(f"Q/Gn is improper: {out!r}")
    return out
