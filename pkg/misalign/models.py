"""
Domain records shared by every module.

Time is normalized so the target symbol duration T = 1; offsets are stored as
the fraction delta = tau / T and durations as multiples of T.
SIR_dB = 10*log10(1/h1^2) and SNR_dB = 10*log10(1/sigma^2), so amplitude
conversions use the /20 form.
"""

import math
from typing import Annotated, Dict, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ParameterError

SEED_LIMIT = 2 ** 64


# === dB <-> linear ===
def sir_db_to_h1(sir_db: float) -> float:
    if not math.isfinite(sir_db) or sir_db <= 0:
        raise ParameterError(f"sir_db must be a finite value > 0 (h1 < 1), got {sir_db}")
    return 10.0 ** (-sir_db / 20.0)


def h1_to_sir_db(h1: float) -> float:
    if not 0.0 < h1 < 1.0:
        raise ParameterError(f"h1 must lie in (0, 1), got {h1}")
    return -20.0 * math.log10(h1)


def snr_db_to_sigma(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 20.0)


def sigma_to_snr_db(sigma: float) -> float:
    if sigma < 0:
        raise ParameterError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return math.inf
    return -20.0 * math.log10(sigma)


# === Core records ===
class ChannelParams(BaseModel):
    """Target-normalized channel: interferer amplitude h1 and noise std sigma"""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    h1: float = Field(ge=0.0, lt=1.0)
    sigma: float = Field(ge=0.0)

    @classmethod
    def from_db(cls, sir_db: float, snr_db: float) -> "ChannelParams":
        return cls(h1=sir_db_to_h1(sir_db), sigma=snr_db_to_sigma(snr_db))

    @property
    def sir_db(self) -> float:
        return math.inf if self.h1 == 0 else h1_to_sir_db(self.h1)

    @property
    def snr_db(self) -> float:
        return sigma_to_snr_db(self.sigma)

    def noiseless(self) -> "ChannelParams":
        return self.model_copy(update={"sigma": 0.0})


class Misalignment(BaseModel):
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    delta: float = Field(ge=0.0, lt=1.0)

    def __float__(self) -> float:
        return self.delta


def delta_of(value: Union[Misalignment, float]) -> float:
    """Plain float from a Misalignment or a number, range-checked"""
    if isinstance(value, Misalignment):
        return value.delta
    d = float(value)
    if not 0.0 <= d < 1.0:
        raise ParameterError(f"delta must lie in [0, 1), got {d}")
    return d


# === Timing schemes ===
class _Scheme(BaseModel):
    model_config = ConfigDict(frozen=True)

    delta0: Misalignment = Misalignment(delta=0.0)

    @field_validator("delta0", mode="before")
    @classmethod
    def _coerce_delta0(cls, v):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return Misalignment(delta=float(v))
        return v

    # periods are symbol durations in units of T; drift is the per-symbol
    # offset change as an exact ratio, in units of the target (R1) window
    @property
    def target_period(self) -> float:
        return 1.0

    @property
    def interferer_period(self) -> float:
        return 1.0

    @property
    def drift(self) -> Tuple[int, int]:
        return 0, 1

    @property
    def relative_step(self) -> float:
        num, den = self.drift
        return num / den

    @property
    def block_len(self) -> Optional[int]:
        return None


class Conventional(_Scheme):
    kind: Literal["conv"] = "conv"

    @property
    def label(self) -> str:
        return "conv"


class SchemeA(_Scheme):
    """T2 stretches every symbol by alpha = T/N; R1 is unchanged"""

    kind: Literal["a"] = "a"
    n_block: int = Field(ge=1)

    @property
    def label(self) -> str:
        return "a"

    @property
    def interferer_period(self) -> float:
        return 1.0 + 1.0 / self.n_block

    @property
    def drift(self) -> Tuple[int, int]:
        return 1, self.n_block

    @property
    def block_len(self) -> Optional[int]:
        return self.n_block


class SchemeB(_Scheme):
    """Both links stretch by K_i * alpha with K_i drawn from [0, K]"""

    kind: Literal["b"] = "b"
    n_block: int = Field(ge=1)
    k_max: int = Field(ge=0)
    k1: int = Field(ge=0)
    k2: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_draws(self) -> "SchemeB":
        if self.k1 > self.k_max or self.k2 > self.k_max:
            raise ValueError(f"k1={self.k1}, k2={self.k2} must not exceed k_max={self.k_max}")
        return self

    @property
    def label(self) -> str:
        return "b"

    @property
    def target_period(self) -> float:
        return 1.0 + self.k1 / self.n_block

    @property
    def interferer_period(self) -> float:
        return 1.0 + self.k2 / self.n_block

    @property
    def drift(self) -> Tuple[int, int]:
        # R1 stretches its own windows too, so drift is measured in R1 windows
        return self.k2 - self.k1, self.n_block + self.k1

    @property
    def block_len(self) -> Optional[int]:
        return self.n_block

    @property
    def degenerate(self) -> bool:
        return self.k1 == self.k2


TimingScheme = Annotated[Union[Conventional, SchemeA, SchemeB], Field(discriminator="kind")]


# === Results ===
class BerEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    errors: int = Field(ge=0)
    trials: int = Field(ge=1)
    ber: float = Field(ge=0.0, le=1.0)
    std_err: float = Field(ge=0.0)

    @model_validator(mode="after")
    def _consistent(self) -> "BerEstimate":
        if self.errors > self.trials:
            raise ValueError("errors cannot exceed trials")
        p = self.errors / self.trials
        if abs(self.ber - p) > 1e-12:
            raise ValueError(f"ber {self.ber} != errors/trials {p}")
        if abs(self.std_err - math.sqrt(p * (1.0 - p) / self.trials)) > 1e-12:
            raise ValueError("std_err is not the binomial standard error")
        return self

    @classmethod
    def from_counts(cls, errors: int, trials: int) -> "BerEstimate":
        if trials < 1:
            raise ParameterError("trials must be >= 1")
        p = errors / trials
        return cls(errors=errors, trials=trials, ber=p, std_err=math.sqrt(p * (1.0 - p) / trials))

    def agrees_with(self, value: float, k: float = 3.0) -> bool:
        return abs(self.ber - value) <= k * self.std_err


class SweepResult(BaseModel):
    """One CSV row; every optional output is None when absent, never 0"""

    model_config = ConfigDict(frozen=True)

    experiment: str
    sir_db: float
    snr_db: float
    delta: Optional[float] = None
    scheme: str
    n_block: int
    trials: int
    analytic_ber: Optional[float] = None
    sim_ber: Optional[float] = None
    sim_stderr: Optional[float] = None
    esinr_linear: Optional[float] = None
    avg_esinr_linear: Optional[float] = None
    sim_esinr_linear: Optional[float] = None

    def as_row(self) -> Dict[str, str]:
        out: Dict[str, str] = {}
        for key, value in self.model_dump().items():
            if value is None:
                out[key] = ""
            elif isinstance(value, float):
                out[key] = repr(value)
            else:
                out[key] = str(value)
        return out


# === Seeds ===
RngSeed = int


def as_seed_sequence(seed: Union[RngSeed, np.random.SeedSequence]) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) < SEED_LIMIT:
        raise ParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.random.SeedSequence(int(seed))


def derive_seed(seed: Union[RngSeed, np.random.SeedSequence], index: int) -> np.random.SeedSequence:
    """Child stream keyed by (seed, index); independent of scheduling order"""
    base = as_seed_sequence(seed)
    return np.random.SeedSequence(base.entropy, spawn_key=tuple(base.spawn_key) + (int(index),))


SeedLike = Union[RngSeed, np.random.SeedSequence, np.random.Generator]


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Generator for a seed; an existing Generator is returned as is so callers can share a stream"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(as_seed_sequence(seed))
