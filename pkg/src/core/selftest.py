"""
Built-in property suite behind the `selftest` subcommand.

Each check returns a CheckResult; run_selftest collects them. Fixtures are
module-level functions so a harness can swap one for a corrupted version.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import analysis
from . import graph
from . import numerics
from . import protocol
from . import signals
from . import simulator

logger = logging.getLogger(__name__)

RANDOM_NETWORKS = 100
RANDOM_DRAWS = 10000
EQUILIBRIUM_STEPS = 1000
HOMOGENEITY_SCALES = (0.5, 2.0, 10.0)
INEQUALITY_SLACK = 1e-12
TAYLOR_SLACK = 1.0 + 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    failures: int = 0
    detail: str = ''

    def as_dict(self):
        return {'name': self.name, 'passed': self.passed, 'trials': self.trials,
                'failures': self.failures, 'detail': self.detail}


def random_networks(count=RANDOM_NETWORKS, seed=0):
    rng = np.random.default_rng(seed)
    nets = []
    for _ in range(count):
        n = int(rng.integers(2, 13))
        nets.append(graph.random_connected_network(n, float(rng.uniform(0.1, 0.6)),
                                                   int(rng.integers(1, n + 1)), int(rng.integers(0, 2**31 - 1))))
    return nets


def equilibrium_fixture():
    """
    Cycle of 6 agents tracking u = 1 + t/2 + t^2/4 (m = 2) from the exact
    derivative stack, with a dyadic step so every update is exact in binary
    floating point.

    Returns:
        tuple: (network, signal, x0, dt, gains)
    """
    net = graph.with_leaders(graph.cycle_graph(6), [0, 3])
    sig = signals.PolynomialSignal((1.0, 0.5, 0.25), 2)
    dt = 2.0 ** -10
    x0 = np.tile(signals.reference_stack(sig, [0.0])[0], (6, 1))
    gains = protocol.design_gains(2, [3.0, 1.5, 1.1], 1.0)
    return net, sig, x0, dt, gains


def check_h_positive_definite(nets):
    failures = 0
    for net in nets:
        eigenvalues, _ = numerics.symmetric_eigen(net.laplacian_matrix + np.diag(net.b))
        if not eigenvalues[0] > 0:
            failures += 1
    return CheckResult('H positive definite', failures == 0, len(nets), failures)


def check_leader_reach(nets, tol=1e-9):
    failures, worst = 0, 0.0
    for net in nets:
        deviation = graph.check_prop1(graph.spectra(net, 1.0))
        worst = max(worst, deviation)
        if deviation > tol:
            failures += 1
    return CheckResult('H^-1 B 1 = 1', failures == 0, len(nets), failures, f"max deviation {worst:.3e}")


def _random_vectors(rng, draws):
    dims = rng.integers(1, 11, size=draws)
    return [rng.standard_normal(d) * 10.0 ** rng.uniform(-3, 3) for d in dims]


def check_power_norm_bounds(rng, draws=RANDOM_DRAWS):
    norm_failures, sum_failures = 0, 0
    for v in _random_vectors(rng, draws):
        alpha = float(rng.uniform(0.01, 0.99))
        n = len(v)
        norm_v = np.linalg.norm(v)
        lhs = np.linalg.norm(numerics.vec_signed_power(v, alpha))
        if lhs > n ** ((1 - alpha) / 2) * norm_v ** alpha * (1 + INEQUALITY_SLACK):
            norm_failures += 1
        if numerics.power_sum(v, alpha) < norm_v ** alpha * (1 - INEQUALITY_SLACK):
            sum_failures += 1
    failures = norm_failures + sum_failures
    return CheckResult('signed-power norm inequalities', failures == 0, 2 * draws, failures,
                       f"norm bound failures {norm_failures}, power-sum failures {sum_failures}")


def check_power_monotonicity(rng, draws=RANDOM_DRAWS):
    failures = 0
    for v in _random_vectors(rng, draws):
        w = rng.standard_normal(len(v)) * np.abs(v).max()
        alpha = float(rng.uniform(0.05, 3.0))
        value = (v - w) @ (numerics.vec_signed_power(v, alpha) - numerics.vec_signed_power(w, alpha))
        scale = np.linalg.norm(v - w) * np.linalg.norm(numerics.vec_signed_power(v, alpha))
        if value < -INEQUALITY_SLACK * max(scale, 1.0):
            failures += 1
        # strict when v != w
        if not np.array_equal(v, w) and not value > 0:
            failures += 1
        if (v - v) @ (numerics.vec_signed_power(v, alpha) - numerics.vec_signed_power(v, alpha)) != 0:
            failures += 1
    return CheckResult('signed-power monotonicity', failures == 0, draws, failures)


def check_taylor():
    sinusoid = signals.SinusoidSignal(1.0, 0.5, 1)
    grid = np.linspace(0.0, 60.0, 2001)
    ratio = simulator.taylor_remainder_check(sinusoid, 1e-3, grid)
    poly_ok = True
    for m in (1, 2, 3):
        poly = signals.PolynomialSignal(tuple(range(1, m + 2)), m)
        if simulator.taylor_remainder_check(poly, 0.01, np.linspace(0.0, 5.0, 101)) != 0.0:
            poly_ok = False
    passed = ratio <= TAYLOR_SLACK and poly_ok
    return CheckResult('Taylor remainder bound', passed, 2, int(ratio > TAYLOR_SLACK) + int(not poly_ok),
                       f"sinusoid max ratio {ratio:.4f}, polynomial remainders zero: {poly_ok}")


def check_homogeneity(rng, points=200, tol=1e-9):
    failures, trials = 0, 0
    for m in (1, 2, 3):
        net = graph.random_connected_network(5, 0.4, 2, int(rng.integers(0, 2**31 - 1)))
        h = net.laplacian_matrix + np.diag(net.b)
        k = rng.uniform(0.5, 5.0, size=m + 1)
        for _ in range(points // 3):
            z = rng.standard_normal((5, m + 1))
            if np.any(np.abs(h @ z[:, 0]) < 1e-6):
                continue
            base = protocol.normalized_error_field(z, h, k)
            for lam in HOMOGENEITY_SCALES:
                trials += 1
                lhs = protocol.normalized_error_field(protocol.dilate(z, lam), h, k)
                rhs = protocol.dilate(base, lam) / lam
                if np.max(np.abs(lhs - rhs)) > tol * max(1.0, np.max(np.abs(rhs))):
                    failures += 1
    return CheckResult('normalized field homogeneity', failures == 0, trials, failures)


def check_equilibrium(steps=EQUILIBRIUM_STEPS, tol=1e-9):
    net, sig, x, dt, gains = equilibrium_fixture()
    stepper = protocol.SampledStepper(net, gains, dt)
    drift = 0.0
    for k in range(steps):
        u = np.full(net.n_agents, sig.derivative(0, k * dt))
        x = stepper.step(x, u)
        expected = signals.reference_stack(sig, [(k + 1) * dt])[0]
        drift = max(drift, float(np.max(np.abs(x - expected[None, :]))))
    return CheckResult('polynomial equilibrium invariance', drift <= tol, steps, int(drift > tol),
                       f"max drift {drift:.3e}")


def check_xi_sup(rng, draws=500, tol=1e-12):
    failures = 0
    for _ in range(draws):
        n = int(rng.integers(1, 5))
        a = rng.standard_normal(n)
        s = np.sign(rng.standard_normal(n))
        k1 = float(rng.uniform(1.01, 5.0))
        closed = analysis.xi_sup(a, s, k1)
        if abs(closed - analysis.xi_sup_corners(a, s, k1)) > tol * max(1.0, abs(closed)):
            failures += 1
    return CheckResult('closed-form noise sup', failures == 0, draws, failures)


def run_selftest(seed=0):
    """Runs every check and returns the list of CheckResults."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    nets = random_networks(seed=seed)
    results = [
        check_h_positive_definite(nets),
        check_leader_reach(nets),
        check_power_norm_bounds(rng),
        check_power_monotonicity(rng),
        check_taylor(),
        check_homogeneity(rng),
        check_equilibrium(),
        check_xi_sup(rng),
    ]
    for result in results:
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"selftest {result.name}: {'pass' if result.passed else 'FAIL'} "
                          f"({result.trials - result.failures}/{result.trials}) {result.detail}")
    logger.info(f"selftest finished in {time.perf_counter() - started:.1f}s")
    return results
