"""
Oversampled rectangular-pulse reference for the symbol-level model.

Durations and offsets are integer tick counts; `oversampling` ticks make one
nominal symbol period T. Pulses have amplitude 1 and the matched filter is a
time-average over its window, so a lone symbol reads back its own value and
all noiseless comparisons are exact up to float rounding.
"""

import math
import logging
import pathlib
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import config
from .errors import ParameterError
from .models import (
    ChannelParams,
    Conventional,
    Misalignment,
    RngSeed,
    SchemeA,
    SchemeB,
    SeedLike,
    TimingScheme,
    derive_seed,
    make_rng,
)
from .simulation import SymbolBlock, delta_trajectory, draw_symbols, sampled_observations

logger = logging.getLogger(__name__)

MAGIC = b"MSIMWAV1"
_HEADER = struct.Struct("<8sII")

Window = Tuple[int, int]


# ---------------- Records ----------------
@dataclass(frozen=True, eq=False)
class SampledWaveform:
    ticks: np.ndarray
    oversampling: int

    def __post_init__(self):
        arr = np.array(self.ticks, dtype=np.float64, copy=True).reshape(-1)
        arr.setflags(write=False)
        object.__setattr__(self, "ticks", arr)

    @property
    def n_ticks(self) -> int:
        return int(self.ticks.size)

    @property
    def duration(self) -> float:
        return self.n_ticks / self.oversampling


class WaveformConfig(BaseModel):
    """Per-transmitter symbol durations and the offset of T2, all in ticks"""

    model_config = ConfigDict(frozen=True)

    oversampling: int = Field(ge=config.MIN_OVERSAMPLING)
    tx1_durations: Tuple[int, ...]
    tx2_durations: Tuple[int, ...]
    tau0: int = Field(ge=0)

    @field_validator("tx1_durations", "tx2_durations")
    @classmethod
    def _positive(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v:
            raise ValueError("at least one symbol duration is required")
        if any(d <= 0 for d in v):
            raise ValueError("symbol durations must be positive tick counts")
        return v

    @model_validator(mode="after")
    def _offset_inside_first_window(self) -> "WaveformConfig":
        if self.tau0 >= self.tx1_durations[0]:
            raise ValueError(f"tau0 = {self.tau0} ticks must be shorter than the first R1 window")
        return self

    @classmethod
    def on_grid(cls, oversampling: int, tx1: Sequence[float], tx2: Sequence[float], tau0: float) -> "WaveformConfig":
        """Build from durations and offset in units of T; anything off the tick grid is rejected"""
        return cls(
            oversampling=oversampling,
            tx1_durations=tuple(to_ticks(d, oversampling) for d in tx1),
            tx2_durations=tuple(to_ticks(d, oversampling) for d in tx2),
            tau0=to_ticks(tau0, oversampling),
        )


def to_ticks(value: float, oversampling: int) -> int:
    scaled = value * oversampling
    ticks = int(round(scaled))
    if abs(scaled - ticks) > 1e-9:
        raise ParameterError(f"{value} T is not on the 1/{oversampling} tick grid")
    return ticks


# ---------------- Synthesis ----------------
def symbol_windows(durations: Sequence[int], start: int = 0) -> List[Window]:
    """(start, duration) windows laid end to end"""
    starts = start + np.concatenate([[0], np.cumsum(durations)[:-1]]).astype(np.int64)
    return [(int(s), int(d)) for s, d in zip(starts, durations)]


def _place(total: int, parts) -> np.ndarray:
    x = np.zeros(total)
    for start, durations, symbols, amplitude in parts:
        pulse = np.repeat(np.asarray(symbols, dtype=float), durations)
        x[start:start + pulse.size] += amplitude * pulse
    return x


def _add_noise(x: np.ndarray, sigma: float, oversampling: int, seed: SeedLike) -> np.ndarray:
    if sigma <= 0:
        return x
    rng = make_rng(seed)
    # per-tick std sigma*sqrt(M) leaves variance sigma^2 after averaging M ticks
    return x + sigma * math.sqrt(oversampling) * rng.standard_normal(x.size)


def _check_lengths(cfg: WaveformConfig, block1: SymbolBlock, block2: SymbolBlock) -> None:
    if len(block1) != len(cfg.tx1_durations) or len(block2) != len(cfg.tx2_durations):
        raise ParameterError(
            f"blocks ({len(block1)}, {len(block2)}) do not match duration lists "
            f"({len(cfg.tx1_durations)}, {len(cfg.tx2_durations)})"
        )


def _packet_ticks(cfg: WaveformConfig) -> int:
    return max(sum(cfg.tx1_durations), cfg.tau0 + sum(cfg.tx2_durations))


def synthesize(
    cfg: WaveformConfig,
    block1: SymbolBlock,
    block2: SymbolBlock,
    params: ChannelParams,
    seed: SeedLike,
) -> SampledWaveform:
    """Received signal at R1: T1's packet from tick 0 plus h1 times T2's packet from tau0, plus noise"""
    _check_lengths(cfg, block1, block2)
    x = _place(_packet_ticks(cfg), [
        (0, cfg.tx1_durations, block1.symbols, 1.0),
        (cfg.tau0, cfg.tx2_durations, block2.symbols, params.h1),
    ])
    return SampledWaveform(_add_noise(x, params.sigma, cfg.oversampling, seed), cfg.oversampling)


def matched_filter(waveform: SampledWaveform, windows: Sequence[Window]) -> np.ndarray:
    """Time-average of the waveform over each (start, duration) window"""
    if len(windows) == 0:
        return np.zeros(0)
    w = np.asarray(windows, dtype=np.int64).reshape(-1, 2)
    starts, lengths = w[:, 0], w[:, 1]
    ends = starts + lengths
    bad = (starts < 0) | (lengths <= 0) | (ends > waveform.n_ticks)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ParameterError(
            f"window {i} ({int(starts[i])}, {int(lengths[i])}) falls outside {waveform.n_ticks} ticks"
        )
    padded = np.append(waveform.ticks, 0.0)
    sums = np.add.reduceat(padded, np.column_stack([starts, ends]).ravel())[::2]
    return sums / lengths


# ---------------- Scheme geometry ----------------
@dataclass(frozen=True)
class SchemeGeometry:
    tx1_durations: Tuple[int, ...]
    tx2_durations: Tuple[int, ...]

    @property
    def r1_windows(self) -> List[Window]:
        return symbol_windows(self.tx1_durations)


def scheme_geometry(scheme: TimingScheme, oversampling: int, n_symbols: Optional[int] = None) -> SchemeGeometry:
    """Tick durations of both packets; stretched schemes need oversampling divisible by N"""
    n = scheme.block_len
    if n is None:
        if n_symbols is None or n_symbols < 1:
            raise ParameterError("a conventional geometry needs n_symbols >= 1")
        n = n_symbols
    elif n_symbols is not None and n_symbols != n:
        raise ParameterError(f"n_symbols {n_symbols} disagrees with the scheme's N = {n}")

    m = oversampling
    if not isinstance(scheme, (Conventional, SchemeA, SchemeB)):
        raise ParameterError(f"unknown timing scheme {scheme!r}")
    if not isinstance(scheme, Conventional) and m % n:
        raise ParameterError(f"oversampling {m} must be a multiple of N = {n} for stretched symbols")
    # m * period is a whole number of ticks once m is a multiple of N
    tx1 = int(round(m * scheme.target_period))
    tx2 = int(round(m * scheme.interferer_period))
    return SchemeGeometry((tx1,) * n, (tx2,) * n)


def default_oversampling(n_block: int) -> int:
    """Smallest multiple of N that reaches the minimum oversampling"""
    if n_block < 1:
        raise ParameterError(f"block length must be >= 1, got {n_block}")
    return n_block * max(1, -(-config.MIN_OVERSAMPLING // n_block))


def overlap_weights(windows: Sequence[Window], starts: Sequence[int], durations: Sequence[int]) -> List[Dict[int, float]]:
    """For each window, {symbol index: overlapped fraction of the window}, by direct interval intersection"""
    out: List[Dict[int, float]] = []
    for ws, wl in windows:
        row: Dict[int, float] = {}
        for k, (s, d) in enumerate(zip(starts, durations)):
            ov = min(ws + wl, s + d) - max(ws, s)
            if ov > 0:
                row[k] = ov / wl
        out.append(row)
    return out


# ---------------- Link 2 ----------------
def link2_outputs(
    cfg: WaveformConfig,
    desired: SymbolBlock,
    interferer: SymbolBlock,
    h2: float,
    seed: SeedLike,
    windows: Optional[Sequence[Window]] = None,
    sigma: float = 0.0,
) -> np.ndarray:
    """Matched-filter outputs at R2: T2's packet is desired, T1's packet interferes scaled by h2.

    Default windows follow T2's own (possibly stretched) symbols from tau0.
    """
    if not 0.0 <= h2 < 1.0:
        raise ParameterError(f"h2 must lie in [0, 1), got {h2}")
    _check_lengths(cfg, interferer, desired)
    x = _place(_packet_ticks(cfg), [
        (cfg.tau0, cfg.tx2_durations, desired.symbols, 1.0),
        (0, cfg.tx1_durations, interferer.symbols, h2),
    ])
    wave = SampledWaveform(_add_noise(x, sigma, cfg.oversampling, seed), cfg.oversampling)
    if windows is None:
        windows = symbol_windows(cfg.tx2_durations, cfg.tau0)
    return matched_filter(wave, windows)


# ---------------- Cross-validation ----------------
def cross_validate(
    params: ChannelParams,
    scheme: TimingScheme,
    trials: int,
    seed: Union[RngSeed, np.random.SeedSequence],
    n_symbols: Optional[int] = None,
    oversampling: Optional[int] = None,
) -> float:
    """Max |waveform matched filter - symbol model| at R1 over noiseless random trials"""
    quiet = params.noiseless()
    n = scheme.block_len or n_symbols or 32
    m = oversampling or default_oversampling(n)
    geo = scheme_geometry(scheme, m, n)
    windows = geo.r1_windows
    target_ticks = geo.tx1_durations[0]
    worst = 0.0
    for t in range(trials):
        rng = make_rng(derive_seed(seed, t))
        j = int(rng.integers(0, target_ticks))
        a1 = SymbolBlock(draw_symbols(rng, n))
        a2 = SymbolBlock(draw_symbols(rng, n))
        cfg = WaveformConfig(oversampling=m, tx1_durations=geo.tx1_durations, tx2_durations=geo.tx2_durations, tau0=j)
        oracle = matched_filter(synthesize(cfg, a1, a2, quiet, rng), windows)
        timed = scheme.model_copy(update={"delta0": Misalignment(delta=j / target_ticks)})
        model = sampled_observations(a1, a2, quiet, delta_trajectory(timed, n), rng)
        worst = max(worst, float(np.max(np.abs(oracle - model))))
    logger.debug("cross_validate %s: %d trials, N=%d, M=%d, max deviation %.3e", scheme.label, trials, n, m, worst)
    return worst


# ---------------- Dump / load ----------------
def dump_waveform(path: Union[str, pathlib.Path], waveform: SampledWaveform) -> pathlib.Path:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = _HEADER.pack(MAGIC, waveform.oversampling, waveform.n_ticks)
    path.write_bytes(header + waveform.ticks.astype("<f8").tobytes())
    return path


def load_waveform(path: Union[str, pathlib.Path]) -> SampledWaveform:
    raw = pathlib.Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ParameterError(f"{path}: file shorter than the {_HEADER.size}-byte header")
    magic, oversampling, count = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParameterError(f"{path}: bad magic {magic!r}")
    payload = raw[_HEADER.size:]
    if len(payload) != 8 * count:
        raise ParameterError(f"{path}: expected {count} ticks, found {len(payload) / 8:g}")
    return SampledWaveform(np.frombuffer(payload, dtype="<f8"), oversampling)
