"""
Leader signal models with analytic derivatives up to order m+1, and the
bounded measurement-noise source.

Noise uses numpy's Philox counter-based bit generator keyed by (seed, agent).
Sample k of an agent's stream is the k-th double r_k of that stream mapped to
eps_bar * (2 r_k - 1); a single sample is reached by jumping the Philox
counter, so queries never share mutable state.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from .errors import ParameterError

logger = logging.getLogger(__name__)

# Philox emits four 64-bit words per counter value
_PHILOX_WORDS = 4


def _check_order(m):
    if int(m) != m or m < 1:
        raise ParameterError(f"Differentiation order m must be an integer >= 1, got {m}")


class LeaderSignal:
    """Base class: subclasses carry kind and m, and implement _derivative(mu, t) and deriv_bound()."""

    def derivative(self, mu, t):
        if int(mu) != mu or not 0 <= mu <= self.m + 1:
            raise ParameterError(f"Derivative order {mu} outside [0, {self.m + 1}]")
        t_arr = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t_arr < lo) or np.any(t_arr > hi):
            raise ParameterError(f"{self.kind} signal evaluated outside its domain [{lo}, {hi}]")
        value = self._derivative(int(mu), t_arr)
        return float(value) if np.ndim(value) == 0 else value

    @property
    def domain(self):
        return (-math.inf, math.inf)

    def _derivative(self, mu, t):
        raise NotImplementedError

    def deriv_bound(self):
        raise NotImplementedError

    def describe(self):
        return {'type': self.kind}


@dataclass(frozen=True)
class SinusoidSignal(LeaderSignal):
    """u(t) = A sin(omega t + phase)."""
    amplitude: float
    omega: float
    m: int
    phase: float = 0.0
    kind: str = field(default='sinusoid', init=False)

    def __post_init__(self):
        _check_order(self.m)
        if not (math.isfinite(self.amplitude) and math.isfinite(self.omega) and math.isfinite(self.phase)):
            raise ParameterError("Sinusoid parameters must be finite")
        if self.omega < 0:
            raise ParameterError(f"Sinusoid frequency must be >= 0, got {self.omega}")

    def _derivative(self, mu, t):
        arg = self.omega * t + self.phase
        # d^mu/dt^mu sin cycles through sin, cos, -sin, -cos
        base = (np.sin, np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a))[mu % 4](arg)
        return self.amplitude * self.omega ** mu * base

    def deriv_bound(self):
        return abs(self.amplitude) * self.omega ** (self.m + 1)

    def describe(self):
        return {'type': self.kind, 'amplitude': self.amplitude, 'omega': self.omega, 'phase': self.phase}


@dataclass(frozen=True)
class PolynomialSignal(LeaderSignal):
    """u(t) = c_0 + c_1 t + ... + c_d t^d; the horizon bounds t for deriv_bound when d > m."""
    coeffs: tuple
    m: int
    horizon: tuple = None
    kind: str = field(default='polynomial', init=False)

    def __post_init__(self):
        _check_order(self.m)
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs or not all(math.isfinite(c) for c in coeffs):
            raise ParameterError("Polynomial coefficients must be a non-empty list of finite numbers")
        object.__setattr__(self, 'coeffs', coeffs)
        if self.horizon is not None:
            t0, t1 = (float(v) for v in self.horizon)
            if not (math.isfinite(t0) and math.isfinite(t1) and t0 <= t1):
                raise ParameterError(f"Polynomial horizon must be a finite interval, got {self.horizon}")
            object.__setattr__(self, 'horizon', (t0, t1))

    @property
    def polynomial(self):
        return Polynomial(self.coeffs).trim()

    @property
    def degree(self):
        return self.polynomial.degree()

    def _derivative(self, mu, t):
        return self.polynomial.deriv(mu)(t)

    def deriv_bound(self):
        if self.degree <= self.m:
            return 0.0
        if self.horizon is None:
            raise ParameterError(
                f"Polynomial of degree {self.degree} has an unbounded derivative of order {self.m + 1}; "
                f"a horizon is required")
        t0, t1 = self.horizon
        top = self.polynomial.deriv(self.m + 1)
        candidates = [t0, t1]
        # Interior extrema of |u^(m+1)| sit at real roots of u^(m+2)
        if top.degree() >= 1:
            for root in top.deriv().roots():
                if abs(root.imag) < 1e-12 and t0 <= root.real <= t1:
                    candidates.append(root.real)
        return float(np.max(np.abs(top(np.array(candidates)))))

    def describe(self):
        info = {'type': self.kind, 'coeffs': list(self.coeffs)}
        if self.horizon is not None:
            info['horizon'] = list(self.horizon)
        return info


@dataclass(frozen=True)
class TableSignal(LeaderSignal):
    """
    Tabulated u(t) interpolated by a cubic spline. Derivatives above order 3
    are identically zero, and exact tracking claims do not apply.
    """
    times: tuple
    values: tuple
    m: int
    kind: str = field(default='table', init=False)

    def __post_init__(self):
        _check_order(self.m)
        times = tuple(float(v) for v in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) < 4 or len(times) != len(values):
            raise ParameterError("Table signals need at least 4 (time, value) pairs of equal length")
        if not all(math.isfinite(v) for v in times + values):
            raise ParameterError("Table signal entries must be finite")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("Table signal times must be strictly increasing")
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, '_spline', CubicSpline(np.array(times), np.array(values)))

    @property
    def domain(self):
        return (self.times[0], self.times[-1])

    def _derivative(self, mu, t):
        if mu > 3:
            return np.zeros_like(t)
        return self._spline(t, nu=mu)

    def deriv_bound(self):
        order = self.m + 1
        if order > 3:
            return 0.0
        knots = np.array(self.times)
        if order == 3:
            # piecewise constant: one value per interval
            points = 0.5 * (knots[:-1] + knots[1:])
        else:
            # piecewise linear: extremes at the knots
            points = knots
        return float(np.max(np.abs(self._spline(points, nu=order))))

    def describe(self):
        return {'type': self.kind, 'times': list(self.times), 'values': list(self.values)}


def derivative(sig, mu, t):
    """mu-th derivative of the leader signal at time(s) t."""
    return sig.derivative(mu, t)


def deriv_bound(sig):
    """Bound L on |u^(m+1)(t)|."""
    return sig.deriv_bound()


def reference_stack(sig, times):
    """
    Derivative stack of the leader on a time grid.

    Returns:
        numpy.ndarray: shape (len(times), m+1), column mu holding u^(mu)(t).
    """
    t = np.asarray(times, dtype=float)
    return np.column_stack([np.atleast_1d(sig.derivative(mu, t)) for mu in range(sig.m + 1)])


@dataclass(frozen=True)
class NoiseSource:
    eps_bar: float
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.eps_bar) or self.eps_bar < 0:
            raise ParameterError(f"Noise bound eps_bar must be finite and >= 0, got {self.eps_bar}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"Noise seed must be a non-negative integer, got {self.seed}")


def _stream(ns, agent, block):
    key = np.array([int(ns.seed), int(agent)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=block))


def sample_noise(ns, agent, k):
    """Sample k of the agent's noise stream, uniform on [-eps_bar, eps_bar]."""
    if agent < 0 or k < 0:
        raise ParameterError(f"Noise agent and sample index must be >= 0, got agent={agent}, k={k}")
    if ns.eps_bar == 0:
        return 0.0
    r = _stream(ns, agent, k // _PHILOX_WORDS).random(k % _PHILOX_WORDS + 1)[-1]
    return float(ns.eps_bar * (2.0 * r - 1.0))


def sample_block(ns, agent, start, count):
    """Samples start .. start+count-1 of the agent's stream; equal to repeated sample_noise calls."""
    if agent < 0 or start < 0 or count < 0:
        raise ParameterError(f"Invalid noise block request: agent={agent}, start={start}, count={count}")
    if ns.eps_bar == 0:
        return np.zeros(count)
    offset = start % _PHILOX_WORDS
    r = _stream(ns, agent, start // _PHILOX_WORDS).random(offset + count)[offset:]
    return ns.eps_bar * (2.0 * r - 1.0)
