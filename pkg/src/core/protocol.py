"""
The distributed differentiator: gain design, continuous-time right-hand sides
for agent states and errors, and the exact sampled-data update.

State blocks are N x (m+1) float arrays, column mu holding x_{i,mu}.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .config import GAIN_RECURSION_TOL, GAIN_CONFORMANCE_REL_TOL
from .errors import ParameterError, ShapeError
from .numerics import signed_power_unchecked

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GainSchedule:
    m: int
    k: tuple
    k_tilde: tuple
    l_tilde: float
    source: str = 'recursion'  # or 'explicit'

    @property
    def k1(self):
        return self.k[1]

    def as_dict(self):
        return {
            'm': self.m,
            'k': list(self.k),
            'k_tilde': list(self.k_tilde),
            'l_tilde': self.l_tilde,
            'source': self.source,
        }


def _recursion_exponent(m, mu):
    return (m - mu) / (m - mu + 1)


def _check_gain_inputs(m, values, l_tilde, name):
    if int(m) != m or m < 1:
        raise ParameterError(f"Differentiation order m must be an integer >= 1, got {m}")
    arr = [float(v) for v in values]
    if len(arr) != m + 1:
        raise ShapeError(f"{name} needs m+1 = {m + 1} entries, got {len(arr)}")
    for mu, v in enumerate(arr):
        if not math.isfinite(v) or v <= 0:
            raise ParameterError(f"{name}[{mu}] must be a finite positive gain, got {v}")
    if not math.isfinite(l_tilde) or l_tilde < 0:
        raise ParameterError(f"l_tilde must be finite and >= 0, got {l_tilde}")
    return arr


def gains_from_tilde(m, k_tilde):
    """
    Applies the gain recursion. For m = 1, k_1 = k~_1 k_0 (the normalization of
    the m = 1 Lyapunov analysis); for m > 1, k_mu = k~_mu k_{mu-1}^((m-mu)/(m-mu+1)).
    """
    k = [k_tilde[0]]
    if m == 1:
        k.append(k_tilde[1] * k_tilde[0])
        return k
    for mu in range(1, m + 1):
        k.append(k_tilde[mu] * k[mu - 1] ** _recursion_exponent(m, mu))
    return k


def tilde_from_gains(m, k):
    """Inverse of gains_from_tilde."""
    k_tilde = [k[0]]
    if m == 1:
        k_tilde.append(k[1] / k[0])
        return k_tilde
    for mu in range(1, m + 1):
        k_tilde.append(k[mu] / k[mu - 1] ** _recursion_exponent(m, mu))
    return k_tilde


def design_gains(m, k_tilde, l_tilde):
    """
    Builds a GainSchedule from normalized gains.

    Args:
        m (int): Differentiation order, m >= 1.
        k_tilde (list): Normalized gains k~_0..k~_m, all > 0.
        l_tilde (float): Scaled disturbance bound L~ >= 0.

    Returns:
        GainSchedule
    """
    kt = _check_gain_inputs(m, k_tilde, l_tilde, "k_tilde")
    if m == 1 and kt[0] * kt[1] <= 1:
        logger.warning(f"k_1 = {kt[0] * kt[1]:.6g} does not exceed 1; the m = 1 gain conditions cannot hold")
    k = gains_from_tilde(m, kt)
    return GainSchedule(m=int(m), k=tuple(k), k_tilde=tuple(kt), l_tilde=float(l_tilde), source='recursion')


def explicit_gains(m, k, l_tilde):
    """Override path: the caller pins k directly and k~ is back-computed."""
    gains = _check_gain_inputs(m, k, l_tilde, "k")
    kt = tilde_from_gains(m, gains)
    return GainSchedule(m=int(m), k=tuple(gains), k_tilde=tuple(kt), l_tilde=float(l_tilde), source='explicit')


def recursion_residual(g):
    """Max relative deviation between g.k and the recursion applied to g.k_tilde."""
    rebuilt = gains_from_tilde(g.m, g.k_tilde)
    return max(abs(a - b) / abs(b) for a, b in zip(g.k, rebuilt))


def round_trip_ok(g, tol=GAIN_RECURSION_TOL):
    """Back-computing k~ from k and re-applying the recursion reproduces k."""
    rebuilt = gains_from_tilde(g.m, tilde_from_gains(g.m, g.k))
    return all(abs(a - b) <= tol * max(1.0, abs(b)) for a, b in zip(g.k, rebuilt))


def recursion_conformance(g, reference_tilde, rel_tol=GAIN_CONFORMANCE_REL_TOL):
    """
    Compares a schedule's gains with the recursion applied to reference normalized gains.

    Returns:
        list: one dict per mu with keys mu, k, k_recursion, rel_dev, conforms.
    """
    reference = design_gains(g.m, reference_tilde, g.l_tilde)
    rows = []
    for mu, (actual, expected) in enumerate(zip(g.k, reference.k)):
        rel_dev = abs(actual - expected) / expected
        rows.append({
            'mu': mu,
            'k': actual,
            'k_recursion': expected,
            'rel_dev': rel_dev,
            'conforms': rel_dev <= rel_tol,
        })
    return rows


def injection_exponents(m):
    """Exponents on L~ ((mu+1)/(m+1)) and on the innovation ((m-mu)/(m+1)) for mu = 0..m."""
    mus = np.arange(m + 1)
    return (mus + 1) / (m + 1), (m - mus) / (m + 1)


def scaled_gains(g):
    """Injection gains k_mu * L~^((mu+1)/(m+1))."""
    l_exp, _ = injection_exponents(g.m)
    return np.asarray(g.k) * np.power(g.l_tilde, l_exp)


def _check_block(x, n, m, name="x"):
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n, m + 1):
        raise ShapeError(f"{name} must have shape ({n}, {m + 1}), got {arr.shape}")
    return arr


def _measurement(u_meas, n):
    u = np.asarray(u_meas, dtype=float)
    if u.ndim == 0:
        return np.full(n, float(u))
    if u.shape != (n,):
        raise ShapeError(f"Leader measurement must be a scalar or have length {n}, got shape {u.shape}")
    return u


def innovation(x0, u_meas, net):
    """
    sigma_i = sum_{j in N_i} (x_i0 - x_j0) + b_i (x_i0 - u_i), in vector form L x0 + B (x0 - u).

    u_meas may be a scalar (the same u seen by every leader-access agent) or a per-agent vector.
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (net.n_agents,):
        raise ShapeError(f"x0 must have length {net.n_agents}, got shape {x.shape}")
    u = _measurement(u_meas, net.n_agents)
    return net.laplacian_matrix @ x + net.b * (x - u)


def continuous_rhs(x, u, net, g):
    """Time derivative of the agent state block under the continuous-time protocol."""
    m = g.m
    block = _check_block(x, net.n_agents, m)
    sigma = innovation(block[:, 0], u, net)
    _, s_exp = injection_exponents(m)
    dx = np.zeros_like(block)
    dx[:, :m] = block[:, 1:]
    dx -= scaled_gains(g)[None, :] * signed_power_unchecked(sigma[:, None], s_exp[None, :])
    return dx


def error_block(x, refs, spec):
    """e_mu = x_mu - H^-1 B 1 u^(mu) for a single time; refs holds u^(0..m)."""
    r = np.asarray(refs, dtype=float)
    block = _check_block(x, spec.n_agents, r.shape[0] - 1)
    return block - spec.hinvb_one[:, None] * r[None, :]


def error_rhs(e, u_m1, spec, g):
    """Error dynamics driven by the leader's (m+1)-th derivative u_m1."""
    m = g.m
    block = _check_block(e, spec.n_agents, m, "e")
    he0 = spec.h @ block[:, 0]
    _, s_exp = injection_exponents(m)
    de = np.zeros_like(block)
    de[:, :m] = block[:, 1:]
    de -= scaled_gains(g)[None, :] * signed_power_unchecked(he0[:, None], s_exp[None, :])
    de[:, m] -= spec.hinvb_one * float(u_m1)
    return de


def taylor_matrix(m, dt):
    """T with T[j, mu] = dt^(j-mu) / (j-mu)! for j >= mu, so x @ T applies the Taylor prediction."""
    t = np.zeros((m + 1, m + 1))
    for mu in range(m + 1):
        for j in range(mu, m + 1):
            t[j, mu] = dt ** (j - mu) / math.factorial(j - mu)
    return t


class SampledStepper:
    """
    Exact sampled-data update for a fixed network, gain schedule and sampling step.

    Precomputes the Taylor matrix and the scaled gains so the simulator's inner
    loop is a matrix product plus one signed-power evaluation.
    """

    def __init__(self, net, g, dt):
        if not math.isfinite(dt) or dt <= 0:
            raise ParameterError(f"Sampling step must be finite and > 0, got {dt}")
        self.net = net
        self.gains = g
        self.dt = float(dt)
        self.m = g.m
        self.taylor = taylor_matrix(g.m, self.dt)
        self.injection = self.dt * scaled_gains(g)
        _, self.exponents = injection_exponents(g.m)
        self.laplacian = net.laplacian_matrix
        self.b = net.b

    def step(self, x, u_meas):
        x0 = x[:, 0]
        sigma = self.laplacian @ x0 + self.b * (x0 - u_meas)
        return x @ self.taylor - self.injection[None, :] * signed_power_unchecked(
            sigma[:, None], self.exponents[None, :])


def sampled_step(x, u_meas, dt, net, g):
    """One step of the sampled-data protocol with per-agent leader measurements u_meas."""
    block = _check_block(x, net.n_agents, g.m)
    u = _measurement(u_meas, net.n_agents)
    return SampledStepper(net, g, dt).step(block, u)


def normalized_error_field(z, h, k):
    """
    Noiseless normalized error dynamics:
    dz_mu = -k_mu [H z_0]^((m-mu)/(m+1)) + z_{mu+1}, dz_m = -k_m [H z_0]^0.
    Homogeneous of degree -1 for weights r_mu = m+1-mu.
    """
    block = np.asarray(z, dtype=float)
    m = block.shape[1] - 1
    if len(k) != m + 1:
        raise ShapeError(f"Need {m + 1} gains for a block with {m + 1} columns, got {len(k)}")
    hz0 = np.asarray(h, dtype=float) @ block[:, 0]
    _, s_exp = injection_exponents(m)
    dz = np.zeros_like(block)
    dz[:, :m] = block[:, 1:]
    dz -= np.asarray(k, dtype=float)[None, :] * signed_power_unchecked(hz0[:, None], s_exp[None, :])
    return dz


def dilation_weights(m):
    return np.arange(m + 1, 0, -1, dtype=float)


def dilate(z, lam):
    """Applies the weighted dilation z_mu -> lam^(m+1-mu) z_mu."""
    block = np.asarray(z, dtype=float)
    return block * np.power(float(lam), dilation_weights(block.shape[1] - 1))[None, :]
