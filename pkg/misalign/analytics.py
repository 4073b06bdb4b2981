"""
Closed-form interference, eSINR and BER expressions.

All functions are pure. Analytic BER needs sigma > 0; the noiseless case is a
combinatorial statement handled by the Monte Carlo engine.
"""

import math
import logging
from typing import Callable, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.integrate import quad
from scipy.special import erfc

from . import config
from .errors import DegenerateNoiseError, ParameterError, QuadratureError, ZeroPowerError
from .models import ChannelParams, Misalignment, delta_of

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]
SQRT2 = math.sqrt(2.0)


# ---------------- Q-function ----------------
def q_function(x: ArrayLike) -> ArrayLike:
    """Standard Gaussian tail P(Z >= x), via erfc (keeps relative accuracy deep in the tail)"""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / SQRT2)
    return float(out) if np.ndim(out) == 0 else out


# ---------------- Interference ----------------
class InterferenceSupport(BaseModel):
    """Law of the interference term at the matched-filter output (n >= 1)"""

    model_config = ConfigDict(frozen=True)

    points: Tuple[float, ...]
    probabilities: Tuple[float, ...]

    @model_validator(mode="after")
    def _check(self) -> "InterferenceSupport":
        if len(self.points) != len(self.probabilities):
            raise ValueError("points and probabilities differ in length")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")
        return self

    def second_moment(self) -> float:
        return math.fsum(p * x * x for x, p in zip(self.points, self.probabilities))


def interference_support(params: ChannelParams, delta: Union[Misalignment, float]) -> InterferenceSupport:
    d = delta_of(delta)
    h = params.h1
    merged = {}
    for x in (h, -h, h * (1.0 - 2.0 * d), -h * (1.0 - 2.0 * d)):
        key = x + 0.0  # fold -0.0 into 0.0
        merged[key] = merged.get(key, 0.0) + 0.25
    return InterferenceSupport(points=tuple(merged), probabilities=tuple(merged.values()))


def effective_interference_power(params: ChannelParams, delta: Union[Misalignment, float]) -> float:
    d = delta_of(delta)
    return params.h1 ** 2 * (2.0 * d * d - 2.0 * d + 1.0)


def conventional_sinr(params: ChannelParams) -> float:
    denom = params.h1 ** 2 + params.sigma ** 2
    if denom == 0:
        raise ZeroPowerError("SINR undefined for h1 = sigma = 0")
    return 1.0 / denom


def esinr(params: ChannelParams, delta: Union[Misalignment, float]) -> float:
    denom = effective_interference_power(params, delta) + params.sigma ** 2
    if denom == 0:
        raise ZeroPowerError("eSINR undefined for h1 = sigma = 0")
    return 1.0 / denom


# ---------------- BER ----------------
def _require_noise(params: ChannelParams) -> float:
    if params.sigma <= 0:
        raise DegenerateNoiseError("closed-form BER needs sigma > 0; use the noiseless simulation path")
    return params.sigma


def ber_first_symbol(params: ChannelParams, delta: Union[Misalignment, float]) -> float:
    """n = 0: no earlier interferer symbol, so only h1*(1 - delta) overlaps"""
    s = _require_noise(params)
    a = params.h1 * (1.0 - delta_of(delta))
    return 0.5 * (q_function((1.0 - a) / s) + q_function((1.0 + a) / s))


def ber_steady_state(params: ChannelParams, delta: Union[Misalignment, float]) -> float:
    s = _require_noise(params)
    h = params.h1
    b = h * (1.0 - 2.0 * delta_of(delta))
    return 0.25 * (
        q_function((1.0 - h) / s)
        + q_function((1.0 + h) / s)
        + q_function((1.0 - b) / s)
        + q_function((1.0 + b) / s)
    )


def ber_block(params: ChannelParams, delta: Union[Misalignment, float], n_block: int) -> float:
    if n_block < 1:
        raise ParameterError(f"block length must be >= 1, got {n_block}")
    first = ber_first_symbol(params, delta)
    if n_block == 1:
        return first
    return first / n_block + (n_block - 1) / n_block * ber_steady_state(params, delta)


# ---------------- Misalignment-averaged metrics ----------------
def avg_esinr_closed(params: ChannelParams) -> float:
    h2 = params.h1 ** 2
    s2 = params.sigma ** 2
    if h2 == 0:
        if s2 == 0:
            raise ZeroPowerError("eSINR undefined for h1 = sigma = 0")
        return 1.0 / s2
    return math.sqrt(4.0 / ((h2 + 2.0 * s2) * h2)) * math.atan(math.sqrt(h2 / (h2 + 2.0 * s2)))


def avg_ber(params: ChannelParams, abs_tol: float = config.QUAD_ABS_TOL) -> float:
    s = _require_noise(params)
    h = params.h1
    edge = 0.25 * q_function((1.0 - h) / s) + 0.25 * q_function((1.0 + h) / s)
    if h == 0:
        return edge + 0.5 * q_function(1.0 / s)
    inner = integrate_unit_interval(lambda d: q_function((1.0 - h * (1.0 - 2.0 * d)) / s), abs_tol)
    return edge + 0.5 * inner


# ---------------- Quadrature ----------------
def integrate(f: Callable, a: float, b: float,
              abs_tol: float = config.QUAD_ABS_TOL, limit: int = config.QUAD_LIMIT) -> float:
    """Adaptive QUADPACK integration of a scalar integrand to an absolute tolerance"""
    if not b > a:
        raise ParameterError(f"need b > a, got [{a}, {b}]")

    def g(x: float) -> float:
        v = float(f(x))
        if not math.isfinite(v):
            raise ParameterError(f"integrand is not finite at x = {x}")
        return v

    out = quad(g, a, b, epsabs=abs_tol, epsrel=0.0, limit=limit, full_output=1)
    value, error, info = out[:3]
    if len(out) > 3 or error > abs_tol:
        message = out[3] if len(out) > 3 else "error estimate above tolerance"
        raise QuadratureError(
            f"no convergence to {abs_tol:g} within {limit} subintervals (estimate {error:.3e}): {message}",
            estimate=value, error=error, intervals=int(info["last"]),
        )
    logger.debug("quadrature converged with %d subintervals, %d evaluations (err %.2e)",
                 info["last"], info["neval"], error)
    return float(value)


def integrate_unit_interval(f: Callable, abs_tol: float = config.QUAD_ABS_TOL) -> float:
    return integrate(f, 0.0, 1.0, abs_tol=abs_tol)
