"""
Exception types raised by the distdiff core modules.
"""


class DistDiffError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(DistDiffError, ValueError):
    """An argument is outside its admissible range."""


class ShapeError(DistDiffError, ValueError):
    """Array shapes do not match, or a symmetric-only routine got a non-symmetric matrix."""


class NotSPDError(DistDiffError, ValueError):
    """Cholesky factorization met a non-positive pivot."""


class ScenarioFileError(DistDiffError, ValueError):
    """A scenario file could not be parsed or violates the schema."""


class NetworkValidationError(DistDiffError, ValueError):
    """The communication network violates the connectivity/leader assumption."""

    def __init__(self, violation, detail=''):
        self.violation = violation
        self.detail = detail
        message = f"{violation.value}: {detail}" if detail else violation.value
        super().__init__(message)


class SimulationBlowUp(DistDiffError, RuntimeError):
    """A state became non-finite or exceeded the blow-up bound."""

    def __init__(self, step, time, max_abs):
        self.step = step
        self.time = time
        self.max_abs = max_abs
        super().__init__(f"State blow-up at step {step} (t={time:.6g}): max |x| = {max_abs:.6g}")


class HypothesisViolation(DistDiffError, RuntimeError):
    """A sampled gain condition failed; carries the offending point."""

    def __init__(self, condition, witness, value):
        self.condition = condition
        self.witness = witness
        self.value = value
        super().__init__(f"Condition '{condition}' violated (value {value:.6g}) at witness {list(witness)}")
