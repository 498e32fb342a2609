import os
import sys
import json
import copy

import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.core import scenario_loader
from src.core.scenario_schema import validate_scenario_file, get_required_keys, get_scenario_schema
from src.core.settings_manager import load_settings, save_settings, default_settings
from src.core.errors import ScenarioFileError, NetworkValidationError


@pytest.fixture
def minimal_doc():
    return {
        "m": 1,
        "topology": {"edges": [[1, 2], [2, 3]]},
        "leaders": [3],
        "signal": {"type": "sinusoid", "amplitude": 1.0, "omega": 0.5},
        "gains": {"tilde": [2.0, 0.55]},
        "dt": 0.01,
        "t_final": 1.0,
    }


def test_required_keys():
    assert set(get_required_keys()) == {"m", "topology", "leaders", "signal", "gains", "dt"}
    assert "sinusoid" in get_scenario_schema()["signal_types"]


@pytest.mark.parametrize('name', ['scenario_5_1', 'scenario_5_2'])
def test_bundled_scenarios_are_valid(name):
    assert name in scenario_loader.bundled_scenarios()
    document, path = scenario_loader.read_scenario_file(name)
    assert validate_scenario_file(document) == []
    assert path.endswith(f"{name}.json")


def test_minimal_document_is_valid(minimal_doc):
    assert validate_scenario_file(minimal_doc) == []


@pytest.mark.parametrize('mutate, fragment', [
    (lambda d: d.pop("dt"), "Missing required keys"),
    (lambda d: d.update(extra=1), "Unknown keys"),
    (lambda d: d.update(m=0), "'m' must be an integer"),
    (lambda d: d.update(topology={"preset": "star", "n": 4}), "Unknown topology preset"),
    (lambda d: d.update(leaders=[4]), "Leader label outside"),
    (lambda d: d.update(leaders=[0]), "'leaders' must be a list of 1-based"),
    (lambda d: d.update(gains={"tilde": [2.0]}), "'gains.tilde' must list m+1"),
    (lambda d: d.update(gains={"explicit": [2.0, -1.0]}), "entries must be > 0"),
    (lambda d: d.update(t_final=0.005), "'t_final' must exceed 'dt'"),
    (lambda d: d.update(l_tilde={"mode": "singular", "explicit": 1.0}), "exactly one of"),
    (lambda d: d.update(mode="implicit"), "Unknown mode"),
    (lambda d: d.update(signal={"type": "square"}), "Unknown signal type"),
    (lambda d: d.update(signal={"type": "polynomial"}), "is missing"),
    (lambda d: d.update(init={"range": [5.0, -5.0]}), "'init.range'"),
    (lambda d: d.update(init={"matrix": [[0.0, 0.0]]}), "'init.matrix' must be 3 x 2"),
    (lambda d: d.update(noise={"eps_bar": -0.1}), "'noise.eps_bar'"),
])
def test_schema_errors(minimal_doc, mutate, fragment):
    doc = copy.deepcopy(minimal_doc)
    mutate(doc)
    errors = validate_scenario_file(doc)
    assert any(fragment in e for e in errors), errors


def test_non_object_document():
    assert validate_scenario_file([1, 2]) == ["Scenario file must contain a JSON object"]


def test_reference_first_order_scenario():
    loaded = scenario_loader.load_scenario('scenario_5_1')
    sc = loaded.scenario
    assert sc.network.leaders == (0, 2, 4)
    assert sc.network.n_agents == 10
    assert sc.gains.k == (2.0, 1.1)
    assert sc.gains.source == 'explicit'
    assert sc.gains.l_tilde == 2.5
    assert sc.deriv_bound == pytest.approx(0.25)
    assert sc.n_steps == 60000
    assert sc.label == 'scenario_5_1'
    assert loaded.reference_tilde == [2.0, 0.55]
    assert loaded.spectra.l_tilde == 2.5


def test_reference_third_order_scenario():
    sc = scenario_loader.load_scenario('scenario_5_2.json').scenario
    assert sc.m == 3
    assert sc.gains.k == (50.0, 14.92, 10.6, 2.0)
    assert sc.gains.l_tilde == 0.625
    assert sc.deriv_bound == pytest.approx(0.0625)


def test_one_based_labels_are_converted(minimal_doc):
    loaded = scenario_loader.scenario_from_document(minimal_doc)
    net = loaded.scenario.network
    assert net.n_agents == 3
    assert net.edges == frozenset({(0, 1), (1, 2)})
    assert net.leaders == (2,)
    assert loaded.scenario.gains.source == 'recursion'
    assert loaded.scenario.gains.k == pytest.approx((2.0, 1.1))


def test_settings_feed_defaults(minimal_doc):
    settings = default_settings()
    settings['l_tilde_mode'] = 'spectral_radius'
    doc = dict(minimal_doc, mode={"type": "continuous"})
    sc = scenario_loader.scenario_from_document(doc, settings).scenario
    assert sc.l_tilde_mode == 'spectral_radius'
    assert sc.substeps == settings['substeps']
    assert sc.mode == 'continuous'


def test_disconnected_network_is_rejected(minimal_doc):
    doc = dict(minimal_doc, topology={"edges": [[1, 2], [3, 4]]}, leaders=[1])
    with pytest.raises(NetworkValidationError):
        scenario_loader.scenario_from_document(doc)


def test_unreadable_files(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{ not json")
    with pytest.raises(ScenarioFileError):
        scenario_loader.load_scenario(str(broken))
    with pytest.raises(ScenarioFileError):
        scenario_loader.load_scenario(str(tmp_path / "missing.json"))
    invalid = tmp_path / "invalid.json"
    invalid.write_text(json.dumps({"m": 1}))
    with pytest.raises(ScenarioFileError):
        scenario_loader.load_scenario(str(invalid))


class TestSettings:

    def test_defaults_when_missing(self, tmp_path):
        assert load_settings(str(tmp_path / "none.json")) == default_settings()

    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "nested" / "settings.json")
        settings = default_settings()
        settings['sphere_samples'] = 123
        save_settings(settings, path)
        assert load_settings(path)['sphere_samples'] == 123

    def test_unknown_keys_dropped(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text(json.dumps({"substeps": 7, "theme": "dark"}))
        loaded = load_settings(str(path))
        assert loaded['substeps'] == 7
        assert 'theme' not in loaded

    @pytest.mark.parametrize('key, value', [
        ('h_safety', 'high'),
        ('substeps', 'many'),
        ('substeps', 2.5),
        ('substeps', 0),
        ('sphere_samples', True),
        ('tail_fraction', 1.5),
        ('eta0_tol', -1.0),
        ('l_tilde_mode', 'explicit'),
    ])
    def test_bad_values_fall_back_per_key(self, tmp_path, key, value):
        path = tmp_path / "settings.json"
        path.write_text(json.dumps({key: value, "sphere_seed": 9}))
        loaded = load_settings(str(path))
        assert loaded[key] == default_settings()[key]
        assert loaded['sphere_seed'] == 9

    def test_invalid_json_falls_back(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text("[")
        assert load_settings(str(path)) == default_settings()
