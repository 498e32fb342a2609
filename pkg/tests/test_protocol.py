import os
import sys
import math
import logging

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core import graph
from src.core import protocol
from src.core import signals
from src.core.errors import ParameterError, ShapeError


@pytest.fixture
def path2():
    return graph.with_leaders(graph.path_graph(2), [0])


@pytest.fixture
def cycle10():
    return graph.with_leaders(graph.cycle_graph(10), [0, 2, 4])


@pytest.fixture
def single_agent():
    return graph.from_edges(1, [], [0])


class TestGainDesign:

    def test_first_order_example(self):
        g = protocol.design_gains(1, [2.0, 0.55], 2.5)
        assert g.k == pytest.approx((2.0, 1.1), abs=1e-15)
        assert g.k1 == pytest.approx(1.1, abs=1e-15)
        assert g.source == 'recursion'

    def test_third_order_example(self):
        g = protocol.design_gains(3, [50.0, 1.1, 1.5, 2.0], 0.625)
        assert g.k[0] == 50.0
        assert g.k[1] == pytest.approx(14.93, abs=0.01)
        assert g.k[2] == pytest.approx(1.5 * math.sqrt(g.k[1]), rel=1e-12)
        assert g.k[3] == pytest.approx(2.0)

    @pytest.mark.parametrize('m, k_tilde', [
        (1, [2.0, 0.55]),
        (2, [3.0, 1.5, 1.1]),
        (3, [50.0, 1.1, 1.5, 2.0]),
        (5, [7.0, 0.3, 2.2, 1.4, 9.0, 0.8]),
    ])
    def test_round_trip(self, m, k_tilde):
        g = protocol.design_gains(m, k_tilde, 1.0)
        assert protocol.tilde_from_gains(m, g.k) == pytest.approx(k_tilde, rel=1e-12)
        assert protocol.round_trip_ok(g)
        assert protocol.recursion_residual(g) <= 1e-12

    def test_explicit_override(self):
        g = protocol.explicit_gains(3, [50.0, 14.92, 10.6, 2.0], 0.625)
        assert g.k == (50.0, 14.92, 10.6, 2.0)
        assert g.source == 'explicit'
        assert protocol.round_trip_ok(g)

    def test_conformance_pattern(self):
        g = protocol.explicit_gains(3, [50.0, 14.92, 10.6, 2.0], 0.625)
        rows = protocol.recursion_conformance(g, [50.0, 1.1, 1.5, 2.0])
        assert [row['conforms'] for row in rows] == [True, True, False, True]
        assert rows[2]['k_recursion'] == pytest.approx(5.80, abs=0.01)

    def test_invalid_gains(self):
        with pytest.raises(ParameterError):
            protocol.design_gains(1, [2.0, 0.0], 1.0)
        with pytest.raises(ParameterError):
            protocol.design_gains(1, [2.0, 0.55], -1.0)
        with pytest.raises(ParameterError):
            protocol.design_gains(0, [2.0], 1.0)
        with pytest.raises(ShapeError):
            protocol.design_gains(2, [2.0, 0.55], 1.0)

    def test_weak_first_order_gain_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            protocol.design_gains(1, [1.0, 0.9], 1.0)
        assert any('does not exceed 1' in r.message for r in caplog.records)

    def test_as_dict(self):
        d = protocol.design_gains(1, [2.0, 0.55], 2.5).as_dict()
        assert d['m'] == 1
        assert d['l_tilde'] == 2.5
        assert len(d['k']) == 2


def test_injection_exponents():
    l_exp, s_exp = protocol.injection_exponents(3)
    np.testing.assert_allclose(l_exp, [0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(s_exp, [0.75, 0.5, 0.25, 0.0])


def test_scaled_gains():
    g = protocol.explicit_gains(1, [2.0, 1.1], 4.0)
    np.testing.assert_allclose(protocol.scaled_gains(g), [4.0, 4.4])


class TestInnovation:

    def test_consensus_at_leader_is_zero(self, cycle10):
        np.testing.assert_array_equal(protocol.innovation(np.full(10, 0.7), 0.7, cycle10), np.zeros(10))

    def test_path2_example(self, path2):
        np.testing.assert_array_equal(protocol.innovation([1.0, 0.0], [0.0, 0.0], path2), [2.0, -1.0])

    def test_matches_h_form(self, cycle10):
        rng = np.random.default_rng(1)
        spec = graph.spectra(cycle10, 1.0)
        x0 = rng.uniform(-5, 5, size=10)
        u = 0.3
        expected = spec.h @ x0 - spec.b_diag @ np.ones(10) * u
        np.testing.assert_allclose(protocol.innovation(x0, u, cycle10), expected, atol=1e-12)

    def test_shape_checked(self, path2):
        with pytest.raises(ShapeError):
            protocol.innovation([1.0, 2.0, 3.0], 0.0, path2)
        with pytest.raises(ShapeError):
            protocol.innovation([1.0, 2.0], [0.0, 0.0, 0.0], path2)


class TestContinuousDynamics:

    def test_scalar_example(self, single_agent):
        g = protocol.explicit_gains(1, [2.0, 1.1], 1.0)
        dx = protocol.continuous_rhs(np.array([[1.0, 0.0]]), 0.0, single_agent, g)
        np.testing.assert_allclose(dx, [[-2.0, -1.1]], atol=1e-15)

    def test_shift_at_exact_tracking(self, cycle10):
        sig = signals.PolynomialSignal((1.0, -2.0, 0.5, 0.25), 3)
        stack = signals.reference_stack(sig, [1.5])[0]
        x = np.tile(stack, (10, 1))
        g = protocol.design_gains(3, [50.0, 1.1, 1.5, 2.0], 0.625)
        dx = protocol.continuous_rhs(x, sig.derivative(0, 1.5), cycle10, g)
        expected = np.tile(np.append(stack[1:], 0.0), (10, 1))
        np.testing.assert_array_equal(dx, expected)

    def test_error_origin_is_equilibrium(self, cycle10):
        spec = graph.spectra(cycle10, 0.25)
        g = protocol.design_gains(2, [3.0, 1.5, 1.1], spec.l_tilde)
        np.testing.assert_array_equal(protocol.error_rhs(np.zeros((10, 3)), 0.0, spec, g), np.zeros((10, 3)))

    def test_error_dynamics_match_agent_dynamics(self, cycle10):
        spec = graph.spectra(cycle10, 0.125)
        sig = signals.SinusoidSignal(1.0, 0.5, 2)
        g = protocol.design_gains(2, [3.0, 1.5, 1.1], spec.l_tilde)
        rng = np.random.default_rng(4)
        t = 2.3
        refs = signals.reference_stack(sig, [t])[0]
        x = refs[None, :] + rng.uniform(-1, 1, size=(10, 3))
        dx = protocol.continuous_rhs(x, sig.derivative(0, t), cycle10, g)
        next_refs = np.array([sig.derivative(mu, t) for mu in range(1, 4)])
        expected = dx - spec.hinvb_one[:, None] * next_refs[None, :]
        e = protocol.error_block(x, refs, spec)
        de = protocol.error_rhs(e, sig.derivative(3, t), spec, g)
        np.testing.assert_allclose(de, expected, atol=1e-9)


class TestSampledStep:

    def test_taylor_matrix(self):
        t = protocol.taylor_matrix(3, 0.1)
        assert t[0, 0] == 1.0
        assert t[2, 0] == pytest.approx(0.005)
        assert t[3, 0] == pytest.approx(0.1 ** 3 / 6)
        assert t[3, 1] == pytest.approx(0.005)
        assert t[0, 3] == 0.0

    def test_first_order_is_forward_euler(self, cycle10):
        g = protocol.explicit_gains(1, [2.0, 1.1], 2.5)
        rng = np.random.default_rng(7)
        x = rng.uniform(-5, 5, size=(10, 2))
        dt = 1e-3
        stepped = protocol.sampled_step(x, 0.4, dt, cycle10, g)
        euler = x + dt * protocol.continuous_rhs(x, 0.4, cycle10, g)
        np.testing.assert_allclose(stepped, euler, atol=1e-12)

    def test_third_order_taylor_terms(self, cycle10):
        g = protocol.explicit_gains(3, [50.0, 14.92, 10.6, 2.0], 0.625)
        # all agents agree with the leader value, so sigma = 0
        x = np.tile([1.0, 2.0, 3.0, 4.0], (10, 1))
        dt = 0.1
        stepped = protocol.sampled_step(x, 1.0, dt, cycle10, g)
        assert stepped[0, 0] == pytest.approx(1.0 + dt * 2.0 + dt ** 2 / 2 * 3.0 + dt ** 3 / 6 * 4.0, rel=1e-14)
        assert stepped[0, 3] == 4.0

    def test_polynomial_stack_is_invariant(self):
        net = graph.with_leaders(graph.cycle_graph(6), [0, 3])
        sig = signals.PolynomialSignal((1.0, 0.5, 0.25), 2)
        g = protocol.design_gains(2, [3.0, 1.5, 1.1], 1.0)
        dt = 2.0 ** -10
        stepper = protocol.SampledStepper(net, g, dt)
        x = np.tile(signals.reference_stack(sig, [0.0])[0], (6, 1))
        for k in range(1000):
            x = stepper.step(x, np.full(6, sig.derivative(0, k * dt)))
        expected = signals.reference_stack(sig, [1000 * dt])[0]
        assert np.max(np.abs(x - expected[None, :])) <= 1e-9

    def test_step_must_be_positive(self, path2):
        g = protocol.explicit_gains(1, [2.0, 1.1], 1.0)
        with pytest.raises(ParameterError):
            protocol.sampled_step(np.zeros((2, 2)), 0.0, 0.0, path2, g)
        with pytest.raises(ParameterError):
            protocol.SampledStepper(path2, g, -1e-3)


@pytest.mark.parametrize('lam', [0.5, 2.0, 10.0])
def test_normalized_field_homogeneity(lam):
    rng = np.random.default_rng(11)
    net = graph.with_leaders(graph.cycle_graph(5), [1])
    h = net.laplacian_matrix + np.diag(net.b)
    k = [4.0, 2.5, 1.5]
    z = rng.standard_normal((5, 3))
    base = protocol.normalized_error_field(z, h, k)
    lhs = protocol.normalized_error_field(protocol.dilate(z, lam), h, k)
    rhs = protocol.dilate(base, lam) / lam
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * np.max(np.abs(rhs)))


def test_dilation_weights():
    np.testing.assert_array_equal(protocol.dilation_weights(3), [4.0, 3.0, 2.0, 1.0])
