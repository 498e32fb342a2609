"""
Scenario execution in sampled-data or continuous-emulation mode, trajectory
logging, run metrics and scaling-law fits.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import (
    TOOL_VERSION, DEFAULT_T_FINAL, DEFAULT_SUBSTEPS, DEFAULT_INIT_RANGE, DEFAULT_INIT_SEED, BLOWUP_BOUND,
    DEFAULT_TAIL_FRACTION, DEFAULT_THRESHOLD_FACTOR, MIN_SWEEP_VALUES, DEFAULT_L_TILDE_MODE, RECORD_CHUNK_STEPS,
)
from .errors import ParameterError, ShapeError, SimulationBlowUp
from . import graph
from . import protocol
from . import signals
from .numerics import signed_power_unchecked

logger = logging.getLogger(__name__)

MODES = ('sampled', 'continuous')
SWEEP_PARAMS = ('dt', 'eps')

# Guards floor(t_final / dt) against 60 / 1e-3 = 59999.999...
_STEP_COUNT_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Scenario:
    network: graph.Network
    signal: signals.LeaderSignal
    gains: protocol.GainSchedule
    m: int
    dt: float
    t_final: float = DEFAULT_T_FINAL
    noise: signals.NoiseSource = signals.NoiseSource(0.0, 0)
    initial_states: np.ndarray = None
    init_range: tuple = DEFAULT_INIT_RANGE
    seed: int = DEFAULT_INIT_SEED
    mode: str = 'sampled'
    substeps: int = DEFAULT_SUBSTEPS
    keep_states: bool = True
    l_tilde_mode: str = DEFAULT_L_TILDE_MODE
    deriv_bound: float = None
    label: str = ''

    @property
    def n_steps(self):
        return int(math.floor(self.t_final / self.dt + _STEP_COUNT_SLACK))

    def describe(self):
        """JSON-friendly echo of the scenario; agent labels are 1-based."""
        info = {
            'label': self.label,
            'm': self.m,
            'n_agents': self.network.n_agents,
            'edges': sorted([i + 1, j + 1] for i, j in self.network.edges),
            'leaders': [i + 1 for i in self.network.leaders],
            'signal': self.signal.describe(),
            'deriv_bound': self.deriv_bound,
            'l_tilde_mode': self.l_tilde_mode,
            'gains': self.gains.as_dict(),
            'dt': self.dt,
            't_final': self.t_final,
            'steps': self.n_steps,
            'noise': {'eps_bar': self.noise.eps_bar, 'seed': self.noise.seed},
            'mode': self.mode,
            'seed': self.seed,
        }
        if self.mode == 'continuous':
            info['substeps'] = self.substeps
        if self.initial_states is None:
            info['init'] = {'range': list(self.init_range), 'seed': self.seed}
        else:
            info['init'] = {'matrix': np.asarray(self.initial_states).tolist()}
        return info


@dataclass
class TrajectoryLog:
    times: np.ndarray
    refs: np.ndarray
    errors: np.ndarray
    states: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    @property
    def dt(self):
        return self.metadata.get('dt', float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0)

    @property
    def m(self):
        return self.errors.shape[1] - 1


@dataclass
class RunMetrics:
    steady_state_err: list
    convergence_time: list  # None where the threshold is never held to the end
    tail_fraction: float
    thresholds: list

    def as_dict(self):
        return {
            'steady_state_err': list(self.steady_state_err),
            'convergence_time': [t if t is not None else 'not reached' for t in self.convergence_time],
            'tail_fraction': self.tail_fraction,
            'thresholds': list(self.thresholds),
        }


@dataclass
class SweepResult:
    param: str
    values: list
    steady_state_err: np.ndarray  # (len(values), m+1), averaged over seeds
    fits: list  # (exponent, r_squared) per mu
    predicted: list
    metrics: list = field(default_factory=list)
    seeds: list = None

    def as_dict(self):
        return {
            'param': self.param,
            'values': list(self.values),
            'seeds': self.seeds,
            'per_mu': [
                {'mu': mu, 'exponent': exp, 'r_squared': r2, 'predicted_exponent': pred}
                for mu, ((exp, r2), pred) in enumerate(zip(self.fits, self.predicted))
            ],
        }


def validate_scenario(sc):
    """Raises on a scenario that cannot be run."""
    if sc.mode not in MODES:
        raise ParameterError(f"Unknown mode '{sc.mode}', expected one of {MODES}")
    if not math.isfinite(sc.dt) or sc.dt <= 0:
        raise ParameterError(f"dt must be finite and > 0, got {sc.dt}")
    if not math.isfinite(sc.t_final) or sc.t_final <= sc.dt:
        raise ParameterError(f"t_final must exceed dt, got t_final={sc.t_final}, dt={sc.dt}")
    if not (sc.gains.m == sc.m == sc.signal.m):
        raise ParameterError(f"Order mismatch: scenario m={sc.m}, gains m={sc.gains.m}, signal m={sc.signal.m}")
    if sc.mode == 'continuous' and (int(sc.substeps) != sc.substeps or sc.substeps < 1):
        raise ParameterError(f"substeps must be a positive integer, got {sc.substeps}")
    lo, hi = sc.signal.domain
    if lo > 0 or hi < sc.t_final:
        raise ParameterError(f"Signal domain [{lo}, {hi}] does not cover [0, {sc.t_final}]")
    graph.require_valid(sc.network)


def initial_state(sc):
    """Explicit initial block, or a seeded uniform draw over init_range."""
    shape = (sc.network.n_agents, sc.m + 1)
    if sc.initial_states is not None:
        x0 = np.array(sc.initial_states, dtype=float)
        if x0.shape != shape:
            raise ShapeError(f"Initial states must have shape {shape}, got {x0.shape}")
        if not np.all(np.isfinite(x0)):
            raise ParameterError("Initial states contain non-finite entries")
        return x0
    lo, hi = sc.init_range
    if not lo <= hi:
        raise ParameterError(f"Init range must satisfy lo <= hi, got {sc.init_range}")
    return np.random.default_rng(sc.seed).uniform(lo, hi, size=shape)


def permute_scenario(sc, perm):
    """
    Relabels agents so that agent i becomes agent perm[i]. Initial states are
    materialized first so both scenarios start from the same physical state.
    """
    n = sc.network.n_agents
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ParameterError(f"{perm} is not a permutation of 0..{n - 1}")
    edges = [(perm[i], perm[j]) for i, j in sc.network.edges]
    leaders = [perm[i] for i in sc.network.leaders]
    x0 = initial_state(sc)
    permuted = np.empty_like(x0)
    permuted[perm] = x0
    return replace(sc, network=graph.from_edges(n, edges, leaders), initial_states=permuted)


def predicted_exponents(param, m):
    """Accuracy-law exponents per mu: m-mu+1 for dt, (m-mu+1)/(m+1) for eps."""
    if param == 'dt':
        return [float(m - mu + 1) for mu in range(m + 1)]
    if param == 'eps':
        return [(m - mu + 1) / (m + 1) for mu in range(m + 1)]
    raise ParameterError(f"Unknown sweep parameter '{param}', expected one of {SWEEP_PARAMS}")


def scaling_fit(points):
    """
    Least-squares slope of log(err) against log(scale).

    Args:
        points (list): (scale, err) pairs, at least three, all positive.

    Returns:
        tuple: (exponent, r_squared)
    """
    if len(points) < MIN_SWEEP_VALUES:
        raise ParameterError(f"scaling_fit needs at least {MIN_SWEEP_VALUES} points, got {len(points)}")
    arr = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ParameterError("scaling_fit needs finite positive scales and errors")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(residual ** 2))
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r_squared)


def taylor_remainders(sig, dt, t_grid):
    """
    r_mu(t) = u^(mu)(t + dt) - sum_{nu=0}^{m-mu} dt^nu / nu! u^(mu+nu)(t) on a grid.

    Returns:
        numpy.ndarray: shape (len(t_grid), m+1)
    """
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    m = sig.m
    stack = np.column_stack([np.atleast_1d(sig.derivative(mu, t)) for mu in range(m + 1)])
    ahead = np.column_stack([np.atleast_1d(sig.derivative(mu, t + dt)) for mu in range(m + 1)])
    predicted = stack @ protocol.taylor_matrix(m, dt)
    return ahead - predicted


def taylor_remainder_check(sig, dt, t_grid, bound=None):
    """
    Max over the grid and mu of |r_mu| / (L dt^(m-mu+1) / (m-mu+1)!), L the bound on
    |u^(m+1)|. Where the bound is zero, remainders at rounding level count as zero.
    """
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    m = sig.m
    l_bound = sig.deriv_bound() if bound is None else float(bound)
    remainders = np.abs(taylor_remainders(sig, dt, t_grid))
    worst = 0.0
    for mu in range(m + 1):
        order = m - mu + 1
        limit = l_bound * dt ** order / math.factorial(order)
        column = remainders[:, mu]
        if limit > 0:
            worst = max(worst, float(np.max(column)) / limit)
        else:
            scale = max(1.0, float(np.max(np.abs(sig.derivative(mu, np.atleast_1d(t_grid))))))
            if np.max(column) > 1e-12 * scale:
                worst = math.inf
    return worst


class Simulator:
    """
    Runs scenarios and derives metrics. Tolerance-like settings come from the
    settings dictionary (see settings_manager) so the CLI can override them.
    """

    def __init__(self, settings=None):
        settings = settings or {}
        self.blowup_bound = float(settings.get('blowup_bound', BLOWUP_BOUND))
        self.tail_fraction = float(settings.get('tail_fraction', DEFAULT_TAIL_FRACTION))
        self.threshold_factor = float(settings.get('threshold_factor', DEFAULT_THRESHOLD_FACTOR))

    def _record(self, block, start, times, refs, errors, states):
        """
        Checks a buffered run of states for blow-up, then stores their errors
        (and the states themselves when kept). block[i] is the state at step start + i.
        """
        max_abs = np.max(np.abs(block), axis=(1, 2))
        # NaN compares False, so it lands in bad as well
        bad = ~(max_abs <= self.blowup_bound)
        if bad.any():
            i = int(np.argmax(bad))
            step = start + i
            logger.error(f"Blow-up at step {step} (t={times[step]:.6g}): max |x| = {max_abs[i]:.6g}")
            raise SimulationBlowUp(step, times[step], float(max_abs[i]))
        stop = start + block.shape[0]
        errors[start:stop] = np.max(np.abs(block - refs[start:stop, None, :]), axis=1)
        if states is not None:
            states[start:stop] = block

    @staticmethod
    def _continuous_advance(sc, times, refs, u_meas):
        """Forward-Euler integration of the continuous protocol over one sampling interval."""
        m = sc.m
        lap, b = sc.network.laplacian_matrix, sc.network.b
        gains = protocol.scaled_gains(sc.gains)[None, :]
        _, exponents = protocol.injection_exponents(m)
        exponents = exponents[None, :]
        h = sc.dt / sc.substeps
        offsets = np.arange(sc.substeps) * h
        leader_mask = b > 0

        def advance(x, k):
            u_sub = np.atleast_1d(sc.signal.derivative(0, times[k] + offsets))
            held_noise = u_meas[k] - refs[k, 0]
            for j in range(sc.substeps):
                u = np.where(leader_mask, u_sub[j] + held_noise, 0.0)
                x0 = x[:, 0]
                sigma = lap @ x0 + b * (x0 - u)
                dx = np.zeros_like(x)
                dx[:, :m] = x[:, 1:]
                dx -= gains * signed_power_unchecked(sigma[:, None], exponents)
                x = x + h * dx
            return x

        return advance

    def _measurements(self, sc, refs0):
        """(steps+1, N) leader measurements: u plus per-leader noise; unused for non-leaders."""
        n = sc.network.n_agents
        u = np.repeat(refs0[:, None], n, axis=1)
        for agent in sc.network.leaders:
            u[:, agent] += signals.sample_block(sc.noise, agent, 0, len(refs0))
        return u

    def run(self, sc):
        """
        Executes a scenario.

        Sampled mode iterates the exact sampled-data update; continuous mode
        integrates the continuous-time protocol with forward Euler, substeps per
        dt, holding each noise sample over its sampling interval.

        Returns:
            TrajectoryLog
        """
        validate_scenario(sc)
        n_steps = sc.n_steps
        times = np.arange(n_steps + 1) * sc.dt
        refs = signals.reference_stack(sc.signal, times)
        u_meas = self._measurements(sc, refs[:, 0])
        x = initial_state(sc)
        n, m = x.shape[0], sc.m

        errors = np.empty((n_steps + 1, m + 1))
        errors[0] = np.max(np.abs(x - refs[0]), axis=0)
        states = None
        if sc.keep_states:
            states = np.empty((n_steps + 1, n, m + 1))
            states[0] = x

        logger.info(f"Running '{sc.label or 'scenario'}': {n} agents, m={m}, {n_steps} steps of dt={sc.dt:g} ({sc.mode})")
        if sc.mode == 'sampled':
            stepper = protocol.SampledStepper(sc.network, sc.gains, sc.dt)

            def advance(x, k):
                return stepper.step(x, u_meas[k])
        else:
            advance = self._continuous_advance(sc, times, refs, u_meas)

        buffer = np.empty((min(RECORD_CHUNK_STEPS, max(n_steps, 1)), n, m + 1))
        filled, start = 0, 1
        # Overflow inside a buffered run is reported by _record, not by numpy
        with np.errstate(over='ignore', invalid='ignore'):
            for k in range(n_steps):
                x = advance(x, k)
                buffer[filled] = x
                filled += 1
                if filled == buffer.shape[0] or k == n_steps - 1:
                    self._record(buffer[:filled], start, times, refs, errors, states)
                    start += filled
                    filled = 0

        metadata = sc.describe()
        metadata['version'] = TOOL_VERSION
        metadata['horizon_note'] = 'simulation horizon chosen by configuration'
        return TrajectoryLog(times=times, refs=refs, errors=errors, states=states, metadata=metadata)

    def default_thresholds(self, dt, m):
        return [self.threshold_factor * dt ** (m - mu + 1) for mu in range(m + 1)]

    def metrics(self, log, tail_fraction=None, thresholds=None):
        """
        Steady-state error per mu (max over the last tail_fraction of samples) and
        convergence time (first time after which the error stays at or below the
        threshold; None if it never does).
        """
        tail_fraction = self.tail_fraction if tail_fraction is None else float(tail_fraction)
        if not 0 < tail_fraction < 1:
            raise ParameterError(f"tail_fraction must lie in (0, 1), got {tail_fraction}")
        n_samples, width = log.errors.shape
        tail = int(n_samples * tail_fraction)
        if tail == 0:
            raise ParameterError(f"Tail window of {tail_fraction} over {n_samples} samples is empty")
        if thresholds is None:
            thresholds = self.default_thresholds(log.dt, width - 1)
        if len(thresholds) != width:
            raise ShapeError(f"Need {width} thresholds, got {len(thresholds)}")

        steady, converged = [], []
        for mu in range(width):
            column = log.errors[:, mu]
            steady.append(float(np.max(column[-tail:])))
            above = np.flatnonzero(column > thresholds[mu])
            if above.size == 0:
                converged.append(float(log.times[0]))
            elif above[-1] == n_samples - 1:
                converged.append(None)
            else:
                converged.append(float(log.times[above[-1] + 1]))
        return RunMetrics(steady, converged, tail_fraction, [float(t) for t in thresholds])

    def sweep(self, base, param, values, seeds=None, tail_fraction=None):
        """
        Re-runs base once per value (and per seed), averaging steady-state errors
        over seeds, then fits the accuracy exponent per mu.
        """
        if param not in SWEEP_PARAMS:
            raise ParameterError(f"Unknown sweep parameter '{param}', expected one of {SWEEP_PARAMS}")
        values = [float(v) for v in values]
        if len(values) < MIN_SWEEP_VALUES:
            raise ParameterError(f"A sweep needs at least {MIN_SWEEP_VALUES} values, got {len(values)}")
        if any(not math.isfinite(v) or v <= 0 for v in values):
            raise ParameterError(f"Sweep values must be finite and > 0, got {values}")
        seed_list = list(seeds) if seeds else [None]

        steady = np.zeros((len(values), base.m + 1))
        all_metrics = []
        for row, value in enumerate(values):
            for seed in seed_list:
                sc = replace(base, keep_states=False)
                if seed is not None:
                    sc = replace(sc, seed=int(seed), noise=signals.NoiseSource(sc.noise.eps_bar, int(seed)))
                if param == 'dt':
                    sc = replace(sc, dt=value)
                else:
                    sc = replace(sc, noise=signals.NoiseSource(value, sc.noise.seed))
                run_metrics = self.metrics(self.run(sc), tail_fraction)
                all_metrics.append(run_metrics)
                steady[row] += np.asarray(run_metrics.steady_state_err)
                logger.debug(f"sweep {param}={value:g} seed={seed}: {run_metrics.steady_state_err}")
        steady /= len(seed_list)

        fits = [scaling_fit(list(zip(values, steady[:, mu]))) for mu in range(base.m + 1)]
        return SweepResult(param=param, values=values, steady_state_err=steady, fits=fits,
                           predicted=predicted_exponents(param, base.m), metrics=all_metrics,
                           seeds=[s for s in seed_list if s is not None] or None)


def run(sc, settings=None):
    return Simulator(settings).run(sc)


def metrics(log, tail_fraction=DEFAULT_TAIL_FRACTION, thresholds=None):
    return Simulator().metrics(log, tail_fraction, thresholds)


def sweep(base, param, values, seeds=None, settings=None):
    return Simulator(settings).sweep(base, param, values, seeds)
