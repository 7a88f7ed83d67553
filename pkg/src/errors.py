"""
Errors Module
Exception hierarchy shared by the library and the command-line front end
"""

from typing import Any, Dict, Optional


class HWMError(Exception):
    """Base class for every error raised by the package"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_diagnostic(self) -> Dict[str, Any]:
        """Render the error as a single JSON-ready diagnostic record"""
        diagnostic = {
            'error': type(self).__name__,
            'message': self.message,
            'exit_code': self.exit_code,
        }
        for key, value in self.details.items():
            diagnostic[key] = _plain(value)
        return diagnostic


class InvalidInput(HWMError, ValueError):
    """Arguments violate an operation's preconditions"""

    exit_code = 4


class ConfigError(HWMError, ValueError):
    """Malformed configuration document or out-of-range override"""

    exit_code = 4


class DegenerateFrame(HWMError, ValueError):
    """Frame vectors are parallel (or zero), no null spin can be built"""

    exit_code = 4


class NodeCollision(HWMError, ValueError):
    """Cauchy nodes coincide, matrix entries or inverse are undefined"""

    exit_code = 4


class ConstraintViolation(HWMError):
    """A state fails the admissibility conditions"""

    exit_code = 2


class CoincidentPoles(ConstraintViolation):
    """Two poles coincide exactly"""

    def __init__(self, j: int, k: int):
        super().__init__(f"poles {j} and {k} coincide", j=j, k=k)
        self.j = j
        self.k = k


class NoConvergence(ConstraintViolation):
    """Constraint solver exhausted its iterations"""

    def __init__(self, message: str, best_report=None, best_state=None):
        details = {}
        if best_report is not None:
            details['best_residual'] = best_report.max_residual
        super().__init__(message, **details)
        self.best_report = best_report
        self.best_state = best_state


class ConjugacyViolation(ConstraintViolation):
    """Recovered spin unknowns are not conjugate pairs"""


class SeparationViolation(HWMError):
    """Real parts of two poles came closer than the separation threshold"""

    exit_code = 3

    def __init__(self, message: str, j: int, k: int, separation: float):
        super().__init__(message, j=j, k=k, separation=separation)
        self.j = j
        self.k = k
        self.separation = separation


class IntegrationError(HWMError):
    """The integrator could not finish the requested run"""

    exit_code = 3


class StepSizeUnderflow(IntegrationError):
    """Adaptive step dropped below h_min"""

    def __init__(self, t: float, h: float, state=None):
        super().__init__(f"step size {h:.3e} below h_min at t={t:.12g}", t=t, h=h)
        self.t = t
        self.h = h
        self.state = state


def _plain(value: Any) -> Optional[Any]:
    # numpy scalars and complex numbers are not JSON-native
    if isinstance(value, complex):
        return [value.real, value.imag]
    if hasattr(value, 'item'):
        return value.item()
    return value
