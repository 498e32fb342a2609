"""
Numerical checks of the m = 1 gain conditions: the Lyapunov function V, the
positive definiteness of M(h), the eta/gamma functions and sampled estimates
of the sups h* and k0*. Sup values are estimates from a deterministic sample
of the unit sphere plus a local polish, never certificates.
"""

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import (
    ETA0_TOL, DEFAULT_H_SAFETY, DEFAULT_SPHERE_SAMPLES, DEFAULT_SPHERE_SEED, REFINE_BEST_POINTS,
    REFINE_ITERATIONS, REFINE_INITIAL_STEP,
)
from .errors import ParameterError, HypothesisViolation
from . import numerics
from . import protocol
from .numerics import signed_power_unchecked as spow

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LyapunovParams:
    """Parameters of the first-order Lyapunov function; h > 2 lambda_max(H^-1) and k1 > 1."""
    h: float
    k1: float
    k_tilde1: float

    @classmethod
    def for_gains(cls, h_mat, g, h):
        """
        Raises:
            ParameterError: if k1 <= 1 or h <= 2 lambda_max(H^-1).
        """
        if g.m != 1:
            raise ParameterError(f"Lyapunov parameters are defined for m = 1, got m = {g.m}")
        k1 = float(g.k[1])
        if not k1 > 1:
            raise ParameterError(f"k1 must exceed 1, got {k1}")
        bound = h_lower_bound(h_mat)
        if not h > bound:
            raise ParameterError(f"h = {h} must exceed 2 lambda_max(H^-1) = {bound}")
        return cls(h=float(h), k1=k1, k_tilde1=float(g.k_tilde[1]))

    def as_dict(self):
        return {'h': self.h, 'k1': self.k1, 'k_tilde1': self.k_tilde1}


@dataclass
class SupResult:
    value: float
    witness: np.ndarray
    evaluated: int


@dataclass
class ConditionResult:
    name: str
    passed: bool
    value: float = None
    witness: list = None
    detail: str = ''

    def as_dict(self):
        return {'name': self.name, 'passed': bool(self.passed), 'value': self.value,
                'witness': self.witness, 'detail': self.detail}


@dataclass
class GainReport:
    m: int
    mode: str  # 'lyapunov' for m = 1, 'recursion' for m > 1
    conditions: list = field(default_factory=list)
    h: float = None
    h_star: float = None
    h_bound: float = None
    k0_star: float = None
    m_margin: float = None
    params: LyapunovParams = None
    k0_star_nonincreasing_in_h: bool = None
    conformance: list = None
    samples: int = 0
    seed: int = 0

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    @property
    def failed_conditions(self):
        return [c.name for c in self.conditions if not c.passed]

    def as_dict(self):
        return {
            'm': self.m,
            'mode': self.mode,
            'passed': self.passed,
            'h': self.h,
            'h_star_estimate': self.h_star,
            'h_bound_2_lambda_max_hinv': self.h_bound,
            'k0_star_estimate': self.k0_star,
            'm_matrix_margin': self.m_margin,
            'lyapunov': self.params.as_dict() if self.params is not None else None,
            'k0_star_nonincreasing_in_h': self.k0_star_nonincreasing_in_h,
            'conditions': [c.as_dict() for c in self.conditions],
            'conformance': self.conformance,
            'samples': self.samples,
            'seed': self.seed,
        }


def _as_vec(v):
    return np.asarray(v, dtype=float)


def lyapunov_v(z0, z1, h_mat, h):
    """V(z) = 1/2 z0' H z0 - z0' [z1]^2 + h/4 sum |z1|^4."""
    z0, z1 = _as_vec(z0), _as_vec(z1)
    h_mat = np.asarray(h_mat, dtype=float)
    return float(0.5 * z0 @ h_mat @ z0 - z0 @ spow(z1, 2.0) + 0.25 * h * np.sum(z1 ** 4))


def m_matrix(h_mat, h):
    """M(h) = [[H/2, -I/2], [-I/2, h I/4]]."""
    h_mat = np.asarray(h_mat, dtype=float)
    eye = np.eye(h_mat.shape[0])
    return np.block([[0.5 * h_mat, -0.5 * eye], [-0.5 * eye, 0.25 * h * eye]])


def m_matrix_pd(h_mat, h):
    """
    Positive definiteness of M(h) through the Schur complement of its H/2 block,
    S = (h I - 2 H^-1) / 4.

    Returns:
        tuple: (is_positive_definite, margin) with margin = lambda_min(S).
    """
    h_mat = np.asarray(h_mat, dtype=float)
    n = h_mat.shape[0]
    h_inv = numerics.spd_solve(h_mat, np.eye(n))
    schur = 0.25 * (h * np.eye(n) - 2.0 * h_inv)
    eigenvalues, _ = numerics.symmetric_eigen(0.5 * (schur + schur.T))
    margin = float(eigenvalues[0])
    return margin > 0, margin


def h_lower_bound(h_mat):
    """2 lambda_max(H^-1) = 2 / lambda_min(H)."""
    eigenvalues, _ = numerics.symmetric_eigen(h_mat)
    return 2.0 / float(eigenvalues[0])


def xi_sup(a, s, k1):
    """Closed form of sup over xi in [-1, 1]^N of -a'(s + xi / k1)."""
    return float(-a @ s + np.sum(np.abs(a)) / k1)


def xi_sup_corners(a, s, k1):
    """Same sup by enumerating every corner xi in {-1, +1}^N."""
    best = -np.inf
    for corner in itertools.product((-1.0, 1.0), repeat=len(a)):
        best = max(best, float(-a @ (s + np.array(corner) / k1)))
    return best


def _eta0_gamma0_batch(z0, z1, h_mat, k1, k_tilde1, h):
    hz0 = z0 @ h_mat.T
    eta0 = np.sum((hz0 - spow(z1, 2.0)) * (spow(hz0, 0.5) - z1), axis=1)
    a = k_tilde1 * (-2.0 * z0 * np.abs(z1) + h * spow(z1, 3.0))
    gamma0 = -np.sum(a * np.sign(hz0), axis=1) + np.sum(np.abs(a), axis=1) / k1
    return eta0, gamma0


def _eta1_gamma1_batch(z1, h_inv, k1):
    eta1 = np.sum(np.abs(z1) ** 3, axis=1) * (1.0 - 1.0 / k1)
    a = -2.0 * (spow(z1, 2.0) @ h_inv.T) * np.abs(z1)
    gamma1 = -np.sum(a * np.sign(z1), axis=1) + np.sum(np.abs(a), axis=1) / k1
    return eta1, gamma1


def _check_k1(k1):
    if not k1 > 1:
        raise ParameterError(f"The m = 1 conditions need k1 > 1, got {k1}")


def eta0_gamma0(z0, z1, h_mat, g, h):
    """
    eta0 = (H z0 - [z1]^2)' ([H z0]^(1/2) - z1) and gamma0, the sup over the
    noise direction xi of the remaining terms of dV/dt, in closed form.
    """
    _check_k1(g.k[1])
    eta0, gamma0 = _eta0_gamma0_batch(_as_vec(z0)[None, :], _as_vec(z1)[None, :],
                                      np.asarray(h_mat, dtype=float), g.k[1], g.k_tilde[1], h)
    return float(eta0[0]), float(gamma0[0])


def eta1_gamma1(z1, h_mat, k1):
    """eta1 = sum |z1|^3 (1 - 1/k1) and gamma1 in closed form."""
    _check_k1(k1)
    h_mat = np.asarray(h_mat, dtype=float)
    h_inv = numerics.spd_solve(h_mat, np.eye(h_mat.shape[0]))
    eta1, gamma1 = _eta1_gamma1_batch(_as_vec(z1)[None, :], h_inv, k1)
    return float(eta1[0]), float(gamma1[0])


def _polish(objective, points, values, best_points, iterations):
    """Coordinate-descent polish on the unit sphere, starting from the best sampled points."""
    dim = points.shape[1]
    directions = np.vstack([np.eye(dim), -np.eye(dim)])
    best_value = float(np.max(values))
    best_point = points[int(np.argmax(values))]
    order = np.argsort(values)[::-1][:best_points]
    evaluated = 0
    for idx in order:
        p = points[idx].copy()
        value = float(values[idx])
        if not np.isfinite(value):
            continue
        step = REFINE_INITIAL_STEP
        for _ in range(iterations):
            cands = p[None, :] + step * directions
            cands /= np.linalg.norm(cands, axis=1, keepdims=True)
            cand_values = objective(cands)
            evaluated += len(cands)
            j = int(np.argmax(cand_values))
            if cand_values[j] > value:
                p, value = cands[j], float(cand_values[j])
            else:
                step *= 0.5
        if value > best_value:
            best_value, best_point = value, p
    return best_value, best_point, evaluated


def _sphere_sup(objective, dim, samples, seed, refine):
    points = numerics.unit_sphere_grid(dim, samples, seed)
    values = objective(points)
    evaluated = len(points)
    best = int(np.argmax(values))
    result = SupResult(float(values[best]), points[best].copy(), evaluated)
    if refine:
        value, point, extra = _polish(objective, points, values, REFINE_BEST_POINTS, REFINE_ITERATIONS)
        result = SupResult(value, np.asarray(point).copy(), evaluated + extra)
    return result


def search_h_star(h_mat, k1, samples=DEFAULT_SPHERE_SAMPLES, seed=DEFAULT_SPHERE_SEED, refine=True):
    """Sampled sup of gamma1/eta1 over the unit sphere in z1, with the maximizing point."""
    _check_k1(k1)
    h_mat = np.asarray(h_mat, dtype=float)
    h_inv = numerics.spd_solve(h_mat, np.eye(h_mat.shape[0]))

    def ratio(z1):
        eta1, gamma1 = _eta1_gamma1_batch(z1, h_inv, k1)
        return gamma1 / eta1

    return _sphere_sup(ratio, h_mat.shape[0], samples, seed, refine)


def estimate_h_star(h_mat, k1, samples=DEFAULT_SPHERE_SAMPLES, seed=DEFAULT_SPHERE_SEED, refine=True):
    """Lower estimate of h* = sup_{|z1| = 1} gamma1 / eta1."""
    return search_h_star(h_mat, k1, samples, seed, refine).value


def choose_h(h_mat, k1, samples=DEFAULT_SPHERE_SAMPLES, seed=DEFAULT_SPHERE_SEED, safety=DEFAULT_H_SAFETY):
    """
    Recommended h = max(2 lambda_max(H^-1), h*) * safety.

    Returns:
        tuple: (h, h_star_estimate, 2 lambda_max(H^-1))
    """
    if not safety >= 1:
        raise ParameterError(f"h safety factor must be >= 1, got {safety}")
    h_star = estimate_h_star(h_mat, k1, samples, seed)
    bound = h_lower_bound(h_mat)
    return max(bound, h_star) * safety, h_star, bound


def search_k0_star(h_mat, g, h, samples=DEFAULT_SPHERE_SAMPLES, seed=DEFAULT_SPHERE_SEED,
                   eta0_tol=ETA0_TOL, refine=True):
    """
    Sampled sup of gamma0/eta0 over the unit sphere in (z0, z1).

    Points with eta0 <= eta0_tol are not used in the ratio; there gamma0 < 0
    must hold instead.

    Raises:
        ParameterError: if M(h) is not positive definite or h does not dominate
            gamma1/eta1 on the sample.
        HypothesisViolation: if gamma0 >= 0 where eta0 vanishes.
    """
    k1, k_tilde1 = g.k[1], g.k_tilde[1]
    _check_k1(k1)
    h_mat = np.asarray(h_mat, dtype=float)
    n = h_mat.shape[0]
    pd, margin = m_matrix_pd(h_mat, h)
    if not pd:
        raise ParameterError(f"M(h) is not positive definite for h={h:.6g} (margin {margin:.3e})")
    h_star = search_h_star(h_mat, k1, samples, seed, refine=False)
    if not h > h_star.value:
        raise ParameterError(f"h={h:.6g} does not exceed the sampled h* estimate {h_star.value:.6g}")

    def ratio(z):
        eta0, gamma0 = _eta0_gamma0_batch(z[:, :n], z[:, n:], h_mat, k1, k_tilde1, h)
        flat = eta0 <= eta0_tol
        if np.any(flat & (gamma0 >= 0)):
            bad = int(np.flatnonzero(flat & (gamma0 >= 0))[0])
            raise HypothesisViolation('eta0=0 => gamma0<0', z[bad].tolist(), float(gamma0[bad]))
        out = np.full(len(z), -np.inf)
        out[~flat] = gamma0[~flat] / eta0[~flat]
        return out

    return _sphere_sup(ratio, 2 * n, samples, seed, refine)


def estimate_k0_star(h_mat, g, h, samples=DEFAULT_SPHERE_SAMPLES, seed=DEFAULT_SPHERE_SEED,
                     eta0_tol=ETA0_TOL, refine=True):
    """Lower estimate of k0* = sup_{|z| = 1} gamma0 / eta0."""
    return search_k0_star(h_mat, g, h, samples, seed, eta0_tol, refine).value


def lyapunov_descent_check(h_mat, g, h, z0, z1, dt, steps, window, floor):
    """
    Integrates the noiseless normalized m = 1 error system
        dz0 = -k0 ([H z0]^(1/2) - z1),  dz1 = -k~1 [H z0]^0
    with forward Euler and checks that V decreases over every window that
    starts with |z| above floor.

    Returns:
        dict: windows_checked, failures (list of (start_step, V_start, V_end)), final_norm.
    """
    h_mat = np.asarray(h_mat, dtype=float)
    k0, k_tilde1 = g.k[0], g.k_tilde[1]
    z0, z1 = _as_vec(z0).copy(), _as_vec(z1).copy()
    v_start = lyapunov_v(z0, z1, h_mat, h)
    start_norm = float(np.sqrt(z0 @ z0 + z1 @ z1))
    start_step = 0
    checked, failures = 0, []
    for step in range(1, steps + 1):
        hz0 = h_mat @ z0
        dz0 = -k0 * (spow(hz0, 0.5) - z1)
        dz1 = -k_tilde1 * np.sign(hz0)
        z0 = z0 + dt * dz0
        z1 = z1 + dt * dz1
        if step % window == 0:
            v_end = lyapunov_v(z0, z1, h_mat, h)
            if start_norm > floor:
                checked += 1
                if not v_end < v_start:
                    failures.append((start_step, v_start, v_end))
            v_start, start_step = v_end, step
            start_norm = float(np.sqrt(z0 @ z0 + z1 @ z1))
    if failures:
        logger.warning(f"V failed to decrease over {len(failures)} of {checked} windows")
    return {'windows_checked': checked, 'failures': failures,
            'final_norm': float(np.sqrt(z0 @ z0 + z1 @ z1))}


def verify_gains(spec, g, samples=DEFAULT_SPHERE_SAMPLES, seed=DEFAULT_SPHERE_SEED,
                 safety=DEFAULT_H_SAFETY, eta0_tol=ETA0_TOL, reference_tilde=None):
    """
    Checks a gain schedule against the sufficient gain conditions.

    For m = 1: k1 > 1, M(h) positive definite, h above the sampled h*, and k0
    above the sampled k0*, with h fixed first. For m > 1: positivity, the
    recursion round trip and (informational) conformance to reference
    normalized gains.

    Returns:
        GainReport
    """
    h_mat = spec.h
    if g.m > 1:
        report = GainReport(m=g.m, mode='recursion', samples=samples, seed=seed)
        report.conditions.append(ConditionResult('gains>0', all(k > 0 for k in g.k), min(g.k)))
        report.conditions.append(ConditionResult(
            'recursion round trip', protocol.round_trip_ok(g), protocol.recursion_residual(g),
            detail='recursion-form check only'))
        if reference_tilde is not None:
            report.conformance = protocol.recursion_conformance(g, reference_tilde)
            off = [row['mu'] for row in report.conformance if not row['conforms']]
            if off:
                logger.info(f"Gains for mu={off} do not follow the recursion from k_tilde={list(reference_tilde)}")
        return report

    report = GainReport(m=1, mode='lyapunov', samples=samples, seed=seed)
    k1 = g.k[1]
    report.conditions.append(ConditionResult('k1>1', k1 > 1, k1))
    if not k1 > 1:
        logger.warning(f"k1 = {k1} does not exceed 1; remaining conditions are not evaluated")
        return report

    h, h_star, bound = choose_h(h_mat, k1, samples, seed, safety)
    report.h, report.h_star, report.h_bound = h, h_star, bound
    pd, margin = m_matrix_pd(h_mat, h)
    report.m_margin = margin
    report.conditions.append(ConditionResult('M(h)>0', pd, margin))
    report.conditions.append(ConditionResult('h>h*', h > h_star, h - h_star))
    if not pd:
        return report
    report.params = LyapunovParams.for_gains(h_mat, g, h)

    try:
        k0_result = search_k0_star(h_mat, g, h, samples, seed, eta0_tol)
    except HypothesisViolation as e:
        report.conditions.append(ConditionResult('k0>k0*', False, e.value, list(e.witness), str(e)))
        return report
    report.k0_star = k0_result.value
    report.conditions.append(ConditionResult(
        'k0>k0*', g.k[0] > k0_result.value, k0_result.value, k0_result.witness.tolist(),
        detail=f"k0={g.k[0]:.6g}, sampled sup over {k0_result.evaluated} points"))

    # k0* grows with h through the h [z1]^3 term of gamma0; reported, not asserted
    try:
        larger = estimate_k0_star(h_mat, g, 1.5 * h, samples, seed, eta0_tol)
        report.k0_star_nonincreasing_in_h = bool(larger <= k0_result.value)
    except (ParameterError, HypothesisViolation) as e:
        logger.debug(f"k0* trend check in h skipped: {e}")
    logger.info(f"verify_gains: h={h:.6g}, h*~{h_star:.6g}, k0*~{k0_result.value:.6g}, margin={margin:.3e}")
    return report
