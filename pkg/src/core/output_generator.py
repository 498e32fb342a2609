"""
Writers for run artifacts: trajectory.csv, sweep.csv and the JSON reports.
Every file is written to a temporary sibling and renamed into place.
"""

import json
import logging
import os
import tempfile

import numpy as np
import pandas as pd

from .config import FLOAT_FORMAT, TRAJECTORY_COLUMNS, SWEEP_COLUMNS, TOOL_NAME, TOOL_VERSION

logger = logging.getLogger(__name__)


def _atomic_write(path, write):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.tmp_', suffix=os.path.basename(path), dir=directory)
    os.close(fd)
    try:
        write(tmp_path)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.debug(f"Wrote {path}")


def json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(payload, path):
    def write(tmp):
        with open(tmp, 'w') as f:
            json.dump(payload, f, indent=2, default=json_default)
            f.write('\n')
    _atomic_write(path, write)


def trajectory_frame(log):
    """One row per (time, agent, mu); agent labels are 1-based and err = |x - ref|."""
    if log.states is None:
        raise ValueError("Trajectory log was recorded without states")
    n_times, n_agents, width = log.states.shape
    t = np.repeat(log.times, n_agents * width)
    agent = np.tile(np.repeat(np.arange(1, n_agents + 1), width), n_times)
    mu = np.tile(np.arange(width), n_times * n_agents)
    x = log.states.reshape(-1)
    ref = np.repeat(log.refs[:, None, :], n_agents, axis=1).reshape(-1)
    return pd.DataFrame({
        't': t,
        'agent': agent,
        'mu': mu,
        'x': x,
        'ref': ref,
        'err': np.abs(x - ref),
    }, columns=TRAJECTORY_COLUMNS)


def write_trajectory_csv(log, path):
    frame = trajectory_frame(log)
    _atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, float_format=FLOAT_FORMAT))
    logger.info(f"Trajectory written to {path} ({len(frame)} rows)")


def read_trajectory_csv(path):
    return pd.read_csv(path, float_precision='round_trip')


def sweep_frame(result):
    rows = []
    for row, value in enumerate(result.values):
        for mu in range(result.steady_state_err.shape[1]):
            rows.append({'param': result.param, 'value': value, 'mu': mu,
                         'steady_state_err': float(result.steady_state_err[row, mu])})
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def write_sweep_csv(result, path):
    frame = sweep_frame(result)
    _atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, float_format=FLOAT_FORMAT))


def metrics_payload(run_metrics, log):
    payload = {'tool': TOOL_NAME, 'version': TOOL_VERSION}
    payload.update(run_metrics.as_dict())
    payload['scenario'] = log.metadata
    return payload


def scaling_payload(result, scenario):
    payload = {'tool': TOOL_NAME, 'version': TOOL_VERSION}
    payload.update(result.as_dict())
    payload['steady_state_err'] = result.steady_state_err.tolist()
    payload['scenario'] = scenario.describe()
    return payload
