"""
Exception hierarchy for the Einstein-wave map simulator.

Every exception carries a short ``reason`` and an optional ``detail`` string,
and an ``exit_code`` the command line maps it to.
"""


class EwmException(Exception):
    """Base class for all simulator errors"""
    exit_code = 1

    def __init__(self, reason, detail=None):
        self.reason = reason
        self.detail = detail
        super().__init__(reason if detail is None else f"{reason} ({detail})")

    @property
    def name(self):
        return type(self).__name__


# --- configuration and input problems (exit status 1) ---

class ConfigurationException(EwmException):
    """Invalid user input: config documents, data profiles, call arguments"""
    exit_code = 1


class ParseError(ConfigurationException):
    pass


class ValidationError(ConfigurationException):
    def __init__(self, reason, violations=None):
        self.violations = list(violations or [])
        detail = "; ".join(self.violations) if self.violations else None
        super().__init__(reason, detail)


class SupportOverflow(ConfigurationException):
    pass


class DomainError(ConfigurationException):
    pass


class TargetEvaluationError(ConfigurationException):
    pass


# --- numerical failures (exit status 2) ---

class NumericalException(EwmException):
    """The computation itself broke down"""
    exit_code = 2


class SupercriticalEnergy(NumericalException):
    pass


class NonFiniteField(NumericalException):
    pass


class CflViolation(NumericalException):
    pass


class Stalled(NumericalException):
    pass


class FocusingBreakdown(NumericalException):
    pass


class RegionBreach(NumericalException):
    pass


class ConeOutsideGrid(NumericalException):
    pass


class QuadratureFailure(NumericalException):
    pass
