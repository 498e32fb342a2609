"""
Communication network: construction, validation of the connectivity/leader
assumption, and the spectral quantities the protocol needs (H = L + B and L~).
"""

import enum
import logging
from dataclasses import dataclass
from functools import cached_property

import networkx as nx
import numpy as np

from .config import (
    DEFAULT_L_TILDE_MODE, L_TILDE_MODES, POWER_ITER_MAX, POWER_ITER_TOL, POWER_ITER_SEED, LEADER_REACH_TOL,
)
from .errors import ParameterError, NetworkValidationError, NotSPDError
from . import numerics

logger = logging.getLogger(__name__)


class NetworkViolation(enum.Enum):
    SELF_LOOP = 'SelfLoop'
    DISCONNECTED = 'Disconnected'
    NO_LEADER_ACCESS = 'NoLeaderAccess'


@dataclass(frozen=True)
class Network:
    """Undirected graph over agents 0..n_agents-1 plus per-agent leader-access flags (b_i)."""
    n_agents: int
    edges: frozenset
    leader_access: tuple

    def __post_init__(self):
        if self.n_agents < 1:
            raise ParameterError(f"A network needs at least one agent, got {self.n_agents}")
        normalized = set()
        for edge in self.edges:
            i, j = (int(k) for k in edge)
            for k in (i, j):
                if not 0 <= k < self.n_agents:
                    raise ParameterError(f"Edge {edge} references agent {k} outside [0, {self.n_agents})")
            normalized.add((min(i, j), max(i, j)))
        flags = tuple(bool(f) for f in self.leader_access)
        if len(flags) != self.n_agents:
            raise ParameterError(f"leader_access has {len(flags)} flags for {self.n_agents} agents")
        object.__setattr__(self, 'edges', frozenset(normalized))
        object.__setattr__(self, 'leader_access', flags)

    @cached_property
    def graph(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n_agents))
        g.add_edges_from((i, j) for i, j in self.edges if i != j)
        return g

    @cached_property
    def laplacian_matrix(self):
        return laplacian(self)

    @cached_property
    def b(self):
        return np.array(self.leader_access, dtype=float)

    @property
    def leaders(self):
        return tuple(i for i, flag in enumerate(self.leader_access) if flag)

    def neighbors(self, i):
        return sorted(self.graph.neighbors(i))


@dataclass(frozen=True)
class NetworkSpectra:
    laplacian: np.ndarray
    b_diag: np.ndarray
    h: np.ndarray
    h_min_eig: float
    h_max_eig: float
    h_inv_max_eig: float
    sigma_max_hinvb: float
    rho_hinvb: float
    l_tilde: float
    hinvb: np.ndarray
    hinvb_one: np.ndarray
    l_tilde_mode: str = DEFAULT_L_TILDE_MODE

    @property
    def n_agents(self):
        return self.h.shape[0]


def from_edges(n, edges, leaders=()):
    """Builds a network from 0-based edge pairs and 0-based leader indices."""
    leader_set = {int(i) for i in leaders}
    for i in leader_set:
        if not 0 <= i < n:
            raise ParameterError(f"Leader index {i} outside [0, {n})")
    return Network(n, frozenset(tuple(e) for e in edges), tuple(i in leader_set for i in range(n)))


def with_leaders(net, leaders):
    """Returns a copy of net whose leader-access flags are exactly the given indices."""
    return from_edges(net.n_agents, net.edges, leaders)


def cycle_graph(n):
    """Single undirected cycle 0-1-...-(n-1)-0, no leaders set."""
    if n < 3:
        raise ParameterError(f"A cycle needs n >= 3 agents, got {n}")
    return from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n):
    if n < 1:
        raise ParameterError(f"A path needs n >= 1 agents, got {n}")
    return from_edges(n, [(i, i + 1) for i in range(n - 1)])


def complete_graph(n):
    if n < 1:
        raise ParameterError(f"A complete graph needs n >= 1 agents, got {n}")
    return from_edges(n, nx.complete_graph(n).edges())


def random_connected_network(n, p, n_leaders, seed):
    """
    Random connected network: a random spanning path plus G(n, p) edges, with
    n_leaders distinct leader-access agents. Deterministic for a given seed.
    """
    if n_leaders < 1 or n_leaders > n:
        raise ParameterError(f"n_leaders must lie in [1, {n}], got {n_leaders}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = {(int(order[k]), int(order[k + 1])) for k in range(n - 1)}
    extra = nx.gnp_random_graph(n, p, seed=int(rng.integers(0, 2**31 - 1)))
    edges.update((int(i), int(j)) for i, j in extra.edges())
    leaders = rng.choice(n, size=n_leaders, replace=False)
    return from_edges(n, edges, leaders.tolist())


def validate(net):
    """
    Checks the network assumption: no self-loops, connected, at least one
    leader-access agent.

    Returns:
        NetworkViolation or None: the first violation found, None when the network is valid.
    """
    if any(i == j for i, j in net.edges):
        return NetworkViolation.SELF_LOOP
    # nx.is_connected runs a breadth-first search from an arbitrary node
    if not nx.is_connected(net.graph):
        return NetworkViolation.DISCONNECTED
    if not any(net.leader_access):
        return NetworkViolation.NO_LEADER_ACCESS
    return None


def require_valid(net):
    violation = validate(net)
    if violation is not None:
        raise NetworkValidationError(violation, f"network with {net.n_agents} agents and {len(net.edges)} edges")


def laplacian(net):
    """Graph Laplacian diag(A 1) - A as a dense float matrix."""
    lap = nx.laplacian_matrix(net.graph, nodelist=range(net.n_agents))
    return np.asarray(lap.toarray(), dtype=float)


def _power_iteration_hinvb(factor, b, max_iter=POWER_ITER_MAX, tol=POWER_ITER_TOL, seed=POWER_ITER_SEED):
    """Largest-magnitude eigenvalue of H^-1 B by power iteration from a seeded positive start."""
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.5, 1.5, size=b.shape[0])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for iteration in range(max_iter):
        w = numerics.cholesky_solve(factor, b * v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        previous, estimate = estimate, norm_w
        v = w / norm_w
        if abs(estimate - previous) <= tol * max(1.0, estimate):
            logger.debug(f"Power iteration converged after {iteration + 1} iterations: rho ~ {estimate:.15g}")
            return estimate
    logger.warning(f"Power iteration on H^-1 B did not converge in {max_iter} iterations (last estimate {estimate:.15g})")
    return estimate


def spectra(net, deriv_bound, l_tilde_mode=DEFAULT_L_TILDE_MODE, l_tilde_value=None):
    """
    Computes L, B, H = L + B, their spectral quantities, and the scaled bound L~.

    Args:
        net (Network): A network satisfying validate().
        deriv_bound (float): Bound L >= 0 on |u^(m+1)|.
        l_tilde_mode (str): 'singular' (N L sigma_max(H^-1 B)), 'spectral_radius'
            (N L rho(H^-1 B)), or 'explicit' (use l_tilde_value).
        l_tilde_value (float): Required for the explicit mode.

    Returns:
        NetworkSpectra
    """
    if deriv_bound < 0 or not np.isfinite(deriv_bound):
        raise ParameterError(f"Derivative bound must be finite and >= 0, got {deriv_bound}")
    if l_tilde_mode not in L_TILDE_MODES:
        raise ParameterError(f"Unknown l_tilde mode '{l_tilde_mode}', expected one of {L_TILDE_MODES}")
    if l_tilde_mode == 'explicit' and (l_tilde_value is None or not l_tilde_value >= 0):
        raise ParameterError(f"Explicit l_tilde mode needs a value >= 0, got {l_tilde_value}")
    require_valid(net)

    lap = net.laplacian_matrix
    b = net.b
    b_diag = np.diag(b)
    h = lap + b_diag
    eigenvalues, _ = numerics.symmetric_eigen(h)
    try:
        factor = numerics.cholesky_factor(h)
    except NotSPDError:
        logger.error("H = L + B is not positive definite for a validated network")
        raise
    hinvb = numerics.cholesky_solve(factor, b_diag)
    sigma = numerics.largest_singular_value(hinvb)
    rho = _power_iteration_hinvb(factor, b)

    n = net.n_agents
    if l_tilde_mode == 'singular':
        l_tilde = n * deriv_bound * sigma
    elif l_tilde_mode == 'spectral_radius':
        l_tilde = n * deriv_bound * rho
    else:
        l_tilde = float(l_tilde_value)
    logger.debug(f"Spectra: lambda(H) in [{eigenvalues[0]:.6g}, {eigenvalues[-1]:.6g}], "
                 f"sigma_max(H^-1 B)={sigma:.6g}, rho={rho:.6g}, L~={l_tilde:.6g} ({l_tilde_mode})")

    return NetworkSpectra(
        laplacian=lap,
        b_diag=b_diag,
        h=h,
        h_min_eig=float(eigenvalues[0]),
        h_max_eig=float(eigenvalues[-1]),
        h_inv_max_eig=1.0 / float(eigenvalues[0]),
        sigma_max_hinvb=sigma,
        rho_hinvb=rho,
        l_tilde=float(l_tilde),
        hinvb=hinvb,
        hinvb_one=hinvb @ np.ones(n),
        l_tilde_mode=l_tilde_mode,
    )


def check_prop1(spec):
    """Infinity-norm deviation of H^-1 B 1 from 1, recomputed with spd_solve."""
    ones = np.ones(spec.n_agents)
    solved = numerics.spd_solve(spec.h, spec.b_diag @ ones)
    deviation = float(np.max(np.abs(solved - ones)))
    if deviation > LEADER_REACH_TOL:
        logger.warning(f"H^-1 B 1 deviates from 1 by {deviation:.3e}")
    return deviation
