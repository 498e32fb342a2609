import os
import sys
import json

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.cli.commands import main
from src.core import output_generator
from src.core import scenario_loader
from src.core import selftest
from src.core import simulator
from dataclasses import replace


def _write_config(tmp_path, name, **changes):
    document, _ = scenario_loader.read_scenario_file('scenario_5_1')
    document.update(changes)
    path = tmp_path / name
    path.write_text(json.dumps(document))
    return str(path)


def test_run_writes_outputs(tmp_path):
    out = tmp_path / 'run'
    code = main(['run', '--config', 'scenario_5_1', '--out', str(out), '--t-final', '0.05'])
    assert code == 0
    with open(out / 'trajectory.csv') as f:
        assert f.readline().strip() == 't,agent,mu,x,ref,err'
    frame = output_generator.read_trajectory_csv(str(out / 'trajectory.csv'))
    assert len(frame) == 51 * 10 * 2
    assert sorted(frame['agent'].unique()) == list(range(1, 11))
    metrics = json.loads((out / 'metrics.json').read_text())
    assert metrics['tool'] == 'distdiff'
    assert metrics['scenario']['leaders'] == [1, 3, 5]
    assert len(metrics['steady_state_err']) == 2
    gains = json.loads((out / 'gains.json').read_text())
    assert gains['k'] == [2.0, 1.1]
    assert gains['l_tilde'] == 2.5


def test_trajectory_csv_reproduces_logged_errors(tmp_path):
    out = tmp_path / 'run'
    assert main(['run', '--config', 'scenario_5_1', '--out', str(out), '--t-final', '0.02']) == 0
    sc = replace(scenario_loader.load_scenario('scenario_5_1').scenario, t_final=0.02)
    log = simulator.run(sc)
    frame = output_generator.read_trajectory_csv(str(out / 'trajectory.csv'))
    worst = frame.groupby(['t', 'mu'])['err'].max().to_numpy().reshape(log.errors.shape)
    np.testing.assert_array_equal(worst, log.errors)
    np.testing.assert_array_equal(np.sort(frame['t'].unique()), log.times)


def test_run_prints_json(tmp_path, capsys):
    code = main(['run', '--config', 'scenario_5_1', '--out', str(tmp_path), '--t-final', '0.05', '--json'])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['tail_fraction'] == 0.2


def test_runs_are_byte_identical(tmp_path):
    for name in ('a', 'b'):
        assert main(['run', '--config', 'scenario_5_1', '--out', str(tmp_path / name), '--t-final', '0.05']) == 0
    first = (tmp_path / 'a' / 'trajectory.csv').read_bytes()
    second = (tmp_path / 'b' / 'trajectory.csv').read_bytes()
    assert first == second


def test_malformed_config_leaves_no_outputs(tmp_path):
    config = tmp_path / 'broken.json'
    config.write_text('{"m": 1,')
    out = tmp_path / 'out'
    assert main(['run', '--config', str(config), '--out', str(out)]) == 2
    assert not out.exists()


def test_schema_violation_is_a_config_error(tmp_path):
    config = _write_config(tmp_path, 'extra.json', colour='red')
    assert main(['run', '--config', config, '--out', str(tmp_path / 'out')]) == 2


def test_disconnected_network_is_a_validation_error(tmp_path):
    config = _write_config(tmp_path, 'split.json', topology={'edges': [[1, 2], [3, 4]]}, leaders=[1])
    assert main(['run', '--config', config, '--out', str(tmp_path / 'out')]) == 3


def test_mistyped_settings_fall_back_to_defaults(tmp_path):
    settings = tmp_path / 'settings.json'
    settings.write_text(json.dumps({'h_safety': 'high', 'substeps': 'many'}))
    assert main(['--settings', str(settings), 'verify-gains', '--config', 'scenario_5_2']) == 0
    code = main(['--settings', str(settings), 'run', '--config', 'scenario_5_1',
                 '--out', str(tmp_path / 'run'), '--t-final', '0.01'])
    assert code == 0


def test_usage_errors_exit_2():
    assert main(['run', '--out', 'x']) == 2
    assert main(['launch']) == 2


def test_sweep_needs_three_values(tmp_path):
    code = main(['sweep', '--config', 'scenario_5_1', '--param', 'dt', '--values', '0.001,0.002',
                 '--out', str(tmp_path)])
    assert code == 2


def test_sweep_writes_outputs(tmp_path):
    code = main(['sweep', '--config', 'scenario_5_1', '--param', 'dt', '--values', '0.001,0.002,0.004',
                 '--out', str(tmp_path), '--t-final', '0.1'])
    assert code == 0
    with open(tmp_path / 'sweep.csv') as f:
        assert f.readline().strip() == 'param,value,mu,steady_state_err'
    scaling = json.loads((tmp_path / 'scaling.json').read_text())
    assert [row['predicted_exponent'] for row in scaling['per_mu']] == [2.0, 1.0]
    assert scaling['values'] == [0.001, 0.002, 0.004]


def test_verify_gains_weak_k1(tmp_path, capsys):
    config = _write_config(tmp_path, 'weak.json', gains={'explicit': [2.0, 0.9]})
    code = main(['verify-gains', '--config', config, '--samples', '100', '--json'])
    assert code == 5
    payload = json.loads(capsys.readouterr().out)
    assert [c['name'] for c in payload['conditions'] if not c['passed']] == ['k1>1']


def test_verify_gains_first_order_reference(tmp_path):
    code = main(['verify-gains', '--config', 'scenario_5_1', '--samples', '300', '--seed', '1',
                 '--out', str(tmp_path)])
    report = json.loads((tmp_path / 'verify_gains.json').read_text())
    passed = {c['name']: c['passed'] for c in report['conditions']}
    assert passed == {'k1>1': True, 'M(h)>0': True, 'h>h*': True, 'k0>k0*': False}
    assert code == 5


def test_verify_gains_higher_order(capsys):
    assert main(['verify-gains', '--config', 'scenario_5_2']) == 0
    text = capsys.readouterr().out
    assert 'recursion' in text
    assert 'does not follow recursion' in text


def test_selftest_detects_corrupted_fixture(monkeypatch):
    clean_fixture = selftest.equilibrium_fixture

    def corrupted():
        net, sig, x0, dt, gains = clean_fixture()
        return net, sig, x0 + 1.0, dt, gains

    monkeypatch.setattr(selftest, 'equilibrium_fixture', corrupted)
    assert main(['selftest']) == 1


@pytest.mark.slow
def test_selftest_passes(capsys):
    assert main(['selftest', '--json']) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload['passed'] == payload['total']
