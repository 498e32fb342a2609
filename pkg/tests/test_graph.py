import os
import sys
import math

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core import graph
from src.core.graph import NetworkViolation
from src.core.errors import NetworkValidationError, ParameterError


@pytest.fixture
def path2():
    return graph.with_leaders(graph.path_graph(2), [0])


@pytest.fixture
def cycle10():
    return graph.with_leaders(graph.cycle_graph(10), [0, 2, 4])


def test_cycle_edges_and_degrees():
    net = graph.cycle_graph(10)
    assert len(net.edges) == 10
    assert all(len(net.neighbors(i)) == 2 for i in range(10))
    assert net.neighbors(0) == [1, 9]
    assert net.leaders == ()


def test_cycle_needs_three_agents():
    with pytest.raises(ParameterError):
        graph.cycle_graph(2)


def test_edges_are_normalized():
    net = graph.from_edges(3, [(1, 0), (0, 1), (2, 1)], leaders=[2])
    assert net.edges == frozenset({(0, 1), (1, 2)})
    assert net.leader_access == (False, False, True)


def test_out_of_range_indices_rejected():
    with pytest.raises(ParameterError):
        graph.from_edges(3, [(0, 3)], leaders=[0])
    with pytest.raises(ParameterError):
        graph.from_edges(3, [(0, 1)], leaders=[5])


@pytest.mark.parametrize('net, expected', [
    (graph.from_edges(3, [(0, 0), (0, 1), (1, 2)], [0]), NetworkViolation.SELF_LOOP),
    (graph.from_edges(4, [(0, 1), (2, 3)], [0]), NetworkViolation.DISCONNECTED),
    (graph.path_graph(3), NetworkViolation.NO_LEADER_ACCESS),
    (graph.from_edges(3, [(0, 1), (1, 2)], [2]), None),
    (graph.from_edges(1, [], [0]), None),
])
def test_validate(net, expected):
    assert graph.validate(net) is expected


def test_self_loop_reported_before_disconnection():
    net = graph.from_edges(4, [(0, 0), (2, 3)], [])
    assert graph.validate(net) is NetworkViolation.SELF_LOOP


def test_spectra_rejects_invalid_network():
    with pytest.raises(NetworkValidationError) as info:
        graph.spectra(graph.from_edges(4, [(0, 1), (2, 3)], [0]), 1.0)
    assert info.value.violation is NetworkViolation.DISCONNECTED


def test_laplacian_examples(path2):
    np.testing.assert_array_equal(graph.laplacian(path2), [[1.0, -1.0], [-1.0, 1.0]])
    lap = graph.laplacian(graph.cycle_graph(4))
    np.testing.assert_array_equal(np.diag(lap), [2.0] * 4)
    np.testing.assert_array_equal(lap.sum(axis=1), np.zeros(4))
    np.testing.assert_array_equal(lap, lap.T)
    np.testing.assert_array_equal(graph.laplacian(graph.complete_graph(3)),
                                  [[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])


def test_path2_spectra(path2):
    spec = graph.spectra(path2, 1.0)
    np.testing.assert_array_equal(spec.h, [[2.0, -1.0], [-1.0, 1.0]])
    assert spec.h_min_eig == pytest.approx((3 - math.sqrt(5)) / 2, abs=1e-12)
    assert spec.h_max_eig == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-12)
    np.testing.assert_allclose(spec.hinvb, [[1.0, 0.0], [1.0, 0.0]], atol=1e-12)
    assert spec.sigma_max_hinvb == pytest.approx(math.sqrt(2), abs=1e-12)
    assert spec.rho_hinvb == pytest.approx(1.0, abs=1e-9)
    assert spec.l_tilde == pytest.approx(2 * math.sqrt(2), abs=1e-12)
    assert spec.n_agents == 2


def test_l_tilde_modes(path2, cycle10):
    assert graph.spectra(path2, 1.0, 'spectral_radius').l_tilde == pytest.approx(2.0, abs=1e-8)
    assert graph.spectra(path2, 1.0, 'explicit', 2.5).l_tilde == 2.5
    # N = 10, L = 0.25 and rho(H^-1 B) = 1 give 2.5
    assert graph.spectra(cycle10, 0.25, 'spectral_radius').l_tilde == pytest.approx(2.5, abs=1e-8)
    assert graph.spectra(cycle10, 0.0).l_tilde == 0.0


def test_l_tilde_mode_arguments(path2):
    with pytest.raises(ParameterError):
        graph.spectra(path2, 1.0, 'frobenius')
    with pytest.raises(ParameterError):
        graph.spectra(path2, 1.0, 'explicit')
    with pytest.raises(ParameterError):
        graph.spectra(path2, -1.0)


def test_spectral_radius_is_one(cycle10):
    for net in (cycle10, graph.with_leaders(graph.complete_graph(5), [3])):
        assert graph.spectra(net, 1.0).rho_hinvb == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize('net', [
    graph.with_leaders(graph.path_graph(2), [0]),
    graph.with_leaders(graph.cycle_graph(10), [0, 2, 4]),
    graph.with_leaders(graph.complete_graph(5), [0]),
])
def test_hinvb_maps_ones_to_ones(net):
    spec = graph.spectra(net, 1.0)
    assert graph.check_prop1(spec) <= 1e-9
    np.testing.assert_allclose(spec.hinvb_one, np.ones(net.n_agents), atol=1e-9)


def test_random_networks_are_valid_and_deterministic():
    for seed in range(30):
        net = graph.random_connected_network(8, 0.2, 2, seed)
        assert graph.validate(net) is None
        assert len(net.leaders) == 2
        assert graph.random_connected_network(8, 0.2, 2, seed) == net


def test_random_networks_have_positive_definite_h():
    for seed in range(30):
        net = graph.random_connected_network(6, 0.3, 1, seed)
        spec = graph.spectra(net, 1.0)
        assert spec.h_min_eig > 0
        assert spec.h_inv_max_eig == pytest.approx(1.0 / spec.h_min_eig)


def test_random_network_leader_count_checked():
    with pytest.raises(ParameterError):
        graph.random_connected_network(4, 0.5, 0, 1)
    with pytest.raises(ParameterError):
        graph.random_connected_network(4, 0.5, 5, 1)
