"""
Scenario file schema (JSON) and validation.

Agent labels in scenario files are 1-based; scenario_loader converts them.
"""

import math

SCENARIO_SCHEMA = {
    "keys": {
        "m": {"required": True, "description": "Differentiation order (integer >= 1)"},
        "topology": {"required": True, "description": "{preset: cycle|path|complete, n} or {edges: [[i, j], ...], n?}"},
        "leaders": {"required": True, "description": "1-based labels of agents with leader access"},
        "signal": {"required": True, "description": "{type: sinusoid|polynomial|table, ...}"},
        "gains": {"required": True, "description": "{tilde: [...]} and/or {explicit: [...]}"},
        "dt": {"required": True, "description": "Sampling step (> 0)"},
        "t_final": {"required": False, "description": "Horizon (> dt)"},
        "deriv_bound": {"required": False, "description": "Override for the bound L on |u^(m+1)|"},
        "l_tilde": {"required": False, "description": "{mode: singular|spectral_radius} or {explicit: value}"},
        "noise": {"required": False, "description": "{eps_bar, seed}"},
        "init": {"required": False, "description": "{range: [lo, hi], seed} or {matrix: [[...], ...]}"},
        "mode": {"required": False, "description": "{type: sampled} or {type: continuous, substeps}"},
        "label": {"required": False, "description": "Free-text scenario name"},
        "meta": {"required": False, "description": "Free-form provenance notes"},
    },
    "topology_presets": ["cycle", "path", "complete"],
    "signal_types": {
        "sinusoid": {"required": ["amplitude", "omega"], "optional": ["phase"]},
        "polynomial": {"required": ["coeffs"], "optional": ["horizon"]},
        "table": {"required": ["times", "values"], "optional": []},
    },
    "l_tilde_modes": ["singular", "spectral_radius"],
    "modes": ["sampled", "continuous"],
}


def get_scenario_schema():
    return SCENARIO_SCHEMA


def get_required_keys():
    return [key for key, spec in SCENARIO_SCHEMA["keys"].items() if spec["required"]]


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number_list(value, length=None):
    if not isinstance(value, list) or not value:
        return False
    if length is not None and len(value) != length:
        return False
    return all(_is_number(v) for v in value)


def _check_keys(obj, allowed, path, errors):
    if not isinstance(obj, dict):
        errors.append(f"'{path}' must be an object")
        return False
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        errors.append(f"Unknown keys in '{path}': {unknown}")
    return True


def _validate_topology(topo, errors):
    if not _check_keys(topo, ["preset", "n", "edges"], "topology", errors):
        return None
    n = topo.get("n")
    if n is not None and (not _is_int(n) or n < 1):
        errors.append("'topology.n' must be a positive integer")
        return None
    if "preset" in topo:
        if "edges" in topo:
            errors.append("'topology' takes either 'preset' or 'edges', not both")
        if topo["preset"] not in SCENARIO_SCHEMA["topology_presets"]:
            errors.append(f"Unknown topology preset '{topo['preset']}'")
        if n is None:
            errors.append("'topology.n' is required with a preset")
        return n
    edges = topo.get("edges")
    if not isinstance(edges, list) or not edges:
        errors.append("'topology' needs a 'preset' or a non-empty 'edges' list")
        return None
    labels = []
    for edge in edges:
        if not (isinstance(edge, list) and len(edge) == 2 and all(_is_int(v) and v >= 1 for v in edge)):
            errors.append(f"Edge {edge} must be a pair of 1-based agent labels")
            continue
        labels.extend(edge)
    if not labels:
        return None
    if n is None:
        n = max(labels)
    elif max(labels) > n:
        errors.append(f"Edge label {max(labels)} exceeds topology.n = {n}")
    return n


def _validate_signal(sig, errors):
    if not isinstance(sig, dict):
        errors.append("'signal' must be an object")
        return
    kind = sig.get("type")
    types = SCENARIO_SCHEMA["signal_types"]
    if kind not in types:
        errors.append(f"Unknown signal type '{kind}', expected one of {list(types)}")
        return
    spec = types[kind]
    _check_keys(sig, ["type"] + spec["required"] + spec["optional"], "signal", errors)
    missing = [k for k in spec["required"] if k not in sig]
    if missing:
        errors.append(f"Signal '{kind}' is missing {missing}")
        return
    if kind == "sinusoid":
        for key in ("amplitude", "omega", "phase"):
            if key in sig and not _is_number(sig[key]):
                errors.append(f"'signal.{key}' must be a finite number")
        if _is_number(sig.get("omega")) and sig["omega"] < 0:
            errors.append("'signal.omega' must be >= 0")
    elif kind == "polynomial":
        if not _is_number_list(sig["coeffs"]):
            errors.append("'signal.coeffs' must be a non-empty list of finite numbers")
        if "horizon" in sig and not _is_number_list(sig["horizon"], 2):
            errors.append("'signal.horizon' must be a [t0, t1] pair")
    else:
        if not _is_number_list(sig["times"]) or not _is_number_list(sig["values"]):
            errors.append("'signal.times' and 'signal.values' must be lists of finite numbers")
        elif len(sig["times"]) != len(sig["values"]):
            errors.append("'signal.times' and 'signal.values' must have equal length")


def _validate_gains(gains, m, errors):
    if not _check_keys(gains, ["tilde", "explicit"], "gains", errors):
        return
    if "tilde" not in gains and "explicit" not in gains:
        errors.append("'gains' needs 'tilde' or 'explicit'")
    for key in ("tilde", "explicit"):
        if key in gains:
            value = gains[key]
            length = m + 1 if _is_int(m) else None
            if not _is_number_list(value, length):
                errors.append(f"'gains.{key}' must list m+1 finite numbers")
            elif any(v <= 0 for v in value):
                errors.append(f"'gains.{key}' entries must be > 0")


def validate_scenario_file(doc):
    """
    Validates a parsed scenario document against the schema.

    Returns:
        list: error strings; empty when the document is valid.
    """
    errors = []
    if not isinstance(doc, dict):
        return ["Scenario file must contain a JSON object"]

    _check_keys(doc, SCENARIO_SCHEMA["keys"], "<root>", errors)
    missing = [key for key in get_required_keys() if key not in doc]
    if missing:
        errors.append(f"Missing required keys: {missing}")

    m = doc.get("m")
    if "m" in doc and (not _is_int(m) or m < 1):
        errors.append("'m' must be an integer >= 1")

    n = _validate_topology(doc["topology"], errors) if "topology" in doc else None

    if "leaders" in doc:
        leaders = doc["leaders"]
        if not isinstance(leaders, list) or not all(_is_int(v) and v >= 1 for v in leaders):
            errors.append("'leaders' must be a list of 1-based agent labels")
        elif n is not None and any(v > n for v in leaders):
            errors.append(f"Leader label outside 1..{n}")

    if "signal" in doc:
        _validate_signal(doc["signal"], errors)
    if "gains" in doc:
        _validate_gains(doc["gains"], m, errors)

    if "dt" in doc and (not _is_number(doc["dt"]) or doc["dt"] <= 0):
        errors.append("'dt' must be a finite number > 0")
    if "t_final" in doc:
        if not _is_number(doc["t_final"]) or doc["t_final"] <= 0:
            errors.append("'t_final' must be a finite number > 0")
        elif _is_number(doc.get("dt")) and doc["t_final"] <= doc["dt"]:
            errors.append("'t_final' must exceed 'dt'")
    if "deriv_bound" in doc and (not _is_number(doc["deriv_bound"]) or doc["deriv_bound"] < 0):
        errors.append("'deriv_bound' must be a finite number >= 0")

    if "l_tilde" in doc and _check_keys(doc["l_tilde"], ["mode", "explicit"], "l_tilde", errors):
        lt = doc["l_tilde"]
        if ("mode" in lt) == ("explicit" in lt):
            errors.append("'l_tilde' takes exactly one of 'mode' or 'explicit'")
        if "mode" in lt and lt["mode"] not in SCENARIO_SCHEMA["l_tilde_modes"]:
            errors.append(f"Unknown l_tilde mode '{lt['mode']}'")
        if "explicit" in lt and (not _is_number(lt["explicit"]) or lt["explicit"] < 0):
            errors.append("'l_tilde.explicit' must be a finite number >= 0")

    if "noise" in doc and _check_keys(doc["noise"], ["eps_bar", "seed"], "noise", errors):
        noise = doc["noise"]
        if not _is_number(noise.get("eps_bar", 0.0)) or noise.get("eps_bar", 0.0) < 0:
            errors.append("'noise.eps_bar' must be a finite number >= 0")
        if not _is_int(noise.get("seed", 0)) or noise.get("seed", 0) < 0:
            errors.append("'noise.seed' must be a non-negative integer")

    if "init" in doc and _check_keys(doc["init"], ["range", "seed", "matrix"], "init", errors):
        init = doc["init"]
        if "matrix" in init:
            if "range" in init:
                errors.append("'init' takes either 'range' or 'matrix', not both")
            matrix = init["matrix"]
            if not isinstance(matrix, list) or not all(_is_number_list(row) for row in matrix):
                errors.append("'init.matrix' must be a list of rows of finite numbers")
            elif n is not None and _is_int(m) and (len(matrix) != n or any(len(r) != m + 1 for r in matrix)):
                errors.append(f"'init.matrix' must be {n} x {m + 1}")
        if "range" in init:
            rng = init["range"]
            if not _is_number_list(rng, 2) or rng[0] > rng[1]:
                errors.append("'init.range' must be a [lo, hi] pair with lo <= hi")
        if "seed" in init and (not _is_int(init["seed"]) or init["seed"] < 0):
            errors.append("'init.seed' must be a non-negative integer")

    if "mode" in doc:
        mode = doc["mode"]
        if isinstance(mode, str):
            mode = {"type": mode}
        if _check_keys(mode, ["type", "substeps"], "mode", errors):
            if mode.get("type") not in SCENARIO_SCHEMA["modes"]:
                errors.append(f"Unknown mode '{mode.get('type')}'")
            if "substeps" in mode and (not _is_int(mode["substeps"]) or mode["substeps"] < 1):
                errors.append("'mode.substeps' must be a positive integer")

    if "label" in doc and not isinstance(doc["label"], str):
        errors.append("'label' must be a string")
    if "meta" in doc and not isinstance(doc["meta"], dict):
        errors.append("'meta' must be an object")
    return errors
