import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_T_FINAL, DEFAULT_INIT_RANGE, DEFAULT_INIT_SEED, DEFAULT_SUBSTEPS, DEFAULT_L_TILDE_MODE
from .errors import ScenarioFileError
from .scenario_schema import validate_scenario_file
from . import graph
from . import protocol
from . import signals
from .simulator import Scenario

logger = logging.getLogger(__name__)

ASSETS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'assets')


@dataclass
class LoadedScenario:
    scenario: Scenario
    spectra: graph.NetworkSpectra
    reference_tilde: list
    document: dict
    source: str


def bundled_scenarios():
    """Names of the scenario files shipped in src/assets."""
    return sorted(name[:-5] for name in os.listdir(ASSETS_DIR) if name.endswith('.json'))


def resolve_config_path(config):
    """A filesystem path, or the name of a bundled scenario (with or without .json)."""
    if os.path.exists(config):
        return config
    name = config if config.endswith('.json') else f"{config}.json"
    bundled = os.path.join(ASSETS_DIR, name)
    if os.path.exists(bundled):
        return bundled
    raise ScenarioFileError(f"Scenario '{config}' is neither a file nor a bundled scenario {bundled_scenarios()}")


def read_scenario_file(config):
    """Reads and schema-checks a scenario file; returns (document, resolved path)."""
    path = resolve_config_path(config)
    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioFileError(f"Could not decode JSON from {path}: {e}") from e
    except OSError as e:
        raise ScenarioFileError(f"Could not read {path}: {e}") from e
    errors = validate_scenario_file(document)
    if errors:
        for error in errors:
            logger.error(f"{path}: {error}")
        raise ScenarioFileError(f"{path}: " + "; ".join(errors))
    return document, path


def build_network(doc):
    topo = doc['topology']
    if 'preset' in topo:
        constructor = {'cycle': graph.cycle_graph, 'path': graph.path_graph, 'complete': graph.complete_graph}
        net = constructor[topo['preset']](topo['n'])
    else:
        edges = [(i - 1, j - 1) for i, j in topo['edges']]
        n = topo.get('n', max(max(e) for e in topo['edges']))
        net = graph.from_edges(n, edges)
    return graph.with_leaders(net, [label - 1 for label in doc['leaders']])


def build_signal(doc):
    sig, m = doc['signal'], doc['m']
    if sig['type'] == 'sinusoid':
        return signals.SinusoidSignal(sig['amplitude'], sig['omega'], m, sig.get('phase', 0.0))
    if sig['type'] == 'polynomial':
        return signals.PolynomialSignal(tuple(sig['coeffs']), m, tuple(sig['horizon']) if 'horizon' in sig else None)
    return signals.TableSignal(tuple(sig['times']), tuple(sig['values']), m)


def scenario_from_document(doc, settings=None, source='<memory>'):
    """
    Converts a schema-valid document into runnable objects. 1-based labels are
    converted to 0-based indices here and nowhere else.

    Raises:
        NetworkValidationError: the network violates the connectivity/leader assumption.
        ParameterError: a value is outside its admissible range.
    """
    settings = settings or {}
    m = doc['m']
    net = build_network(doc)
    sig = build_signal(doc)
    deriv_bound = float(doc['deriv_bound']) if 'deriv_bound' in doc else signals.deriv_bound(sig)

    lt = doc.get('l_tilde', {})
    if 'explicit' in lt:
        mode, value = 'explicit', float(lt['explicit'])
    else:
        mode, value = lt.get('mode', settings.get('l_tilde_mode', DEFAULT_L_TILDE_MODE)), None
    spec = graph.spectra(net, deriv_bound, mode, value)

    gains_doc = doc['gains']
    if 'explicit' in gains_doc:
        gains = protocol.explicit_gains(m, gains_doc['explicit'], spec.l_tilde)
    else:
        gains = protocol.design_gains(m, gains_doc['tilde'], spec.l_tilde)

    noise_doc = doc.get('noise', {})
    noise = signals.NoiseSource(float(noise_doc.get('eps_bar', 0.0)), int(noise_doc.get('seed', 0)))

    init = doc.get('init', {})
    matrix = np.array(init['matrix'], dtype=float) if 'matrix' in init else None

    mode_doc = doc.get('mode', {'type': 'sampled'})
    if isinstance(mode_doc, str):
        mode_doc = {'type': mode_doc}

    scenario = Scenario(
        network=net,
        signal=sig,
        gains=gains,
        m=m,
        dt=float(doc['dt']),
        t_final=float(doc.get('t_final', DEFAULT_T_FINAL)),
        noise=noise,
        initial_states=matrix,
        init_range=tuple(init.get('range', DEFAULT_INIT_RANGE)),
        seed=int(init.get('seed', DEFAULT_INIT_SEED)),
        mode=mode_doc['type'],
        substeps=int(mode_doc.get('substeps', settings.get('substeps', DEFAULT_SUBSTEPS))),
        l_tilde_mode=mode,
        deriv_bound=deriv_bound,
        label=doc.get('label', os.path.splitext(os.path.basename(source))[0]),
    )
    logger.debug(f"Loaded scenario '{scenario.label}' from {source}: gains {gains.k}, L~={spec.l_tilde:.6g}")
    return LoadedScenario(scenario, spec, gains_doc.get('tilde'), doc, source)


def load_scenario(config, settings=None):
    """Reads, validates and builds a scenario from a path or bundled name."""
    document, path = read_scenario_file(config)
    return scenario_from_document(document, settings, path)
