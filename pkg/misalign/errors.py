from typing import Optional


class MisalignError(Exception):
    """Base class for every error raised by the toolkit"""


class ParameterError(MisalignError, ValueError):
    """An operation was called with arguments outside its domain"""


class DegenerateNoiseError(ParameterError):
    """Closed-form BER asked for sigma = 0; use the noiseless Monte Carlo path"""


class ZeroPowerError(MisalignError, ZeroDivisionError):
    """Interference plus noise power is zero, so the ratio is undefined"""


class QuadratureError(MisalignError, ArithmeticError):
    """Adaptive quadrature stopped (subdivision limit or roundoff) before meeting the tolerance"""

    def __init__(self, message: str, estimate: float, error: float, intervals: int):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.intervals = intervals


class CurveRangeError(ParameterError):
    """A dB-gap target lies outside a curve, or the curve is not monotone"""


class SpecError(ParameterError):
    """An experiment spec failed validation; `field` names the offending key"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field
