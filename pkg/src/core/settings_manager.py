import json
import logging
import math
import os

from .config import (
    ETA0_TOL, DEFAULT_H_SAFETY, DEFAULT_SPHERE_SAMPLES, DEFAULT_SPHERE_SEED, DEFAULT_SUBSTEPS, BLOWUP_BOUND,
    DEFAULT_TAIL_FRACTION, DEFAULT_THRESHOLD_FACTOR, DEFAULT_L_TILDE_MODE,
)

logger = logging.getLogger(__name__)

DEFAULT_SETTINGS_FILE = os.path.join(os.path.expanduser("~"), ".distdiff_settings.json")

# key -> (accepted types, predicate, description)
_NUMBER = (int, float)
SETTING_RULES = {
    "eta0_tol": (_NUMBER, lambda v: v > 0, "a positive number"),
    "h_safety": (_NUMBER, lambda v: v >= 1.0, "a number >= 1"),
    "sphere_samples": ((int,), lambda v: v >= 1, "a positive integer"),
    "sphere_seed": ((int,), lambda v: v >= 0, "a non-negative integer"),
    "substeps": ((int,), lambda v: v >= 1, "a positive integer"),
    "blowup_bound": (_NUMBER, lambda v: v > 0, "a positive number"),
    "tail_fraction": (_NUMBER, lambda v: 0 < v < 1, "a number in (0, 1)"),
    "threshold_factor": (_NUMBER, lambda v: v > 0, "a positive number"),
    "l_tilde_mode": ((str,), lambda v: v in ("singular", "spectral_radius"), "'singular' or 'spectral_radius'"),
}


def default_settings():
    """Returns a fresh dictionary holding every overridable default."""
    return {
        "eta0_tol": ETA0_TOL,
        "h_safety": DEFAULT_H_SAFETY,
        "sphere_samples": DEFAULT_SPHERE_SAMPLES,
        "sphere_seed": DEFAULT_SPHERE_SEED,
        "substeps": DEFAULT_SUBSTEPS,
        "blowup_bound": BLOWUP_BOUND,
        "tail_fraction": DEFAULT_TAIL_FRACTION,
        "threshold_factor": DEFAULT_THRESHOLD_FACTOR,
        "l_tilde_mode": DEFAULT_L_TILDE_MODE,
    }


def is_valid_setting(key, value):
    """True when value has the type and range expected for settings key."""
    types, predicate, _ = SETTING_RULES[key]
    if isinstance(value, bool) or not isinstance(value, types):
        return False
    if isinstance(value, float) and not math.isfinite(value):
        return False
    return bool(predicate(value))


def load_settings(file_path=None):
    """Loads tolerance/default overrides from a JSON file, or returns defaults if not found/invalid."""
    if file_path is None:
        file_path = DEFAULT_SETTINGS_FILE

    settings = default_settings()
    if os.path.exists(file_path):
        try:
            with open(file_path, 'r') as f:
                loaded_settings = json.load(f)
            if not isinstance(loaded_settings, dict):
                raise ValueError("top-level JSON value must be an object")
            unknown = sorted(set(loaded_settings) - set(settings))
            if unknown:
                logger.warning(f"Ignoring unknown settings keys in {file_path}: {unknown}")
                for key in unknown:
                    del loaded_settings[key]
            for key, value in loaded_settings.items():
                if is_valid_setting(key, value):
                    settings[key] = value
                else:
                    logger.warning(f"Setting '{key}' in {file_path} must be {SETTING_RULES[key][2]}, "
                                   f"got {value!r}. Using default {settings[key]!r}.")
            logger.debug(f"Loaded settings overrides from {file_path}")
        except json.JSONDecodeError:
            logger.warning(f"Could not decode JSON from {file_path}. Using default settings.")
        except Exception as e:
            logger.warning(f"Error loading settings from {file_path}: {e}. Using default settings.")
    return settings


def save_settings(settings, file_path=None):
    """Saves settings to a JSON file. Only known keys are written."""
    if file_path is None:
        file_path = DEFAULT_SETTINGS_FILE

    known = default_settings()
    payload = {key: settings.get(key, value) for key, value in known.items()}
    try:
        # Ensure the directory exists before writing
        directory = os.path.dirname(file_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(file_path, 'w') as f:
            json.dump(payload, f, indent=4)
    except Exception as e:
        logger.error(f"Could not save settings to {file_path}: {e}")
