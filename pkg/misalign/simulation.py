"""
Symbol-level Monte Carlo engine for receiver R1.

Target window n spans [n, n + 1) in units of the target symbol duration.
Interferer symbol k starts at b_k = k + u_k with u_k = delta0 + k * step, so
every scheme is a different step: 0 (conventional), 1/N (Scheme A) or
(K2 - K1)/(N + K1) (Scheme B). Observations weight each interferer symbol by
its overlap with the window, which is the sampled matched-filter output.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from . import config
from .errors import ParameterError, ZeroPowerError
from .models import (
    BerEstimate,
    ChannelParams,
    Conventional,
    Misalignment,
    RngSeed,
    SchemeB,
    SeedLike,
    TimingScheme,
    derive_seed,
    make_rng,
)

logger = logging.getLogger(__name__)

# ---------------- Symbols ----------------
@dataclass(frozen=True, eq=False)
class SymbolBlock:
    """Read-only BPSK block; every entry is +1 or -1"""

    symbols: np.ndarray

    def __post_init__(self):
        arr = np.array(self.symbols, dtype=np.int8, copy=True).reshape(-1)
        if arr.size == 0:
            raise ParameterError("a symbol block needs at least one symbol")
        if not np.all((arr == 1) | (arr == -1)):
            raise ParameterError("symbols must be +1 or -1")
        arr.setflags(write=False)
        object.__setattr__(self, "symbols", arr)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __neg__(self) -> "SymbolBlock":
        return SymbolBlock(-self.symbols)


def draw_symbols(rng: np.random.Generator, shape) -> np.ndarray:
    return (1 - 2 * rng.integers(0, 2, size=shape, dtype=np.int8)).astype(np.int8)


def generate_block(n_block: int, seed: SeedLike) -> SymbolBlock:
    if n_block < 1:
        raise ParameterError(f"block length must be >= 1, got {n_block}")
    return SymbolBlock(draw_symbols(make_rng(seed), n_block))


# ---------------- Offset trajectories ----------------
@dataclass(frozen=True, eq=False)
class DeltaTrajectory:
    """Per-window offsets: reduced deltas plus the whole symbols the offset has advanced"""

    deltas: np.ndarray
    wraps: np.ndarray
    step: float
    delta0: float = 0.0
    drift: Tuple[int, int] = field(default=(0, 1))

    def __len__(self) -> int:
        return int(self.deltas.size)

    def __getitem__(self, n: int) -> Misalignment:
        return Misalignment(delta=float(self.deltas[n]))

    @property
    def n(self) -> int:
        return len(self)

    def boundaries(self) -> np.ndarray:
        """Start times b_0..b_N of the interferer symbols, the last one closing the packet"""
        k = np.arange(self.n + 1)
        return k + _offsets(self.delta0, self.drift, k)


def _offsets(delta0: float, drift: Tuple[int, int], k: np.ndarray) -> np.ndarray:
    num, den = drift
    return delta0 + (k * num) / den


def _resolve_block_len(scheme: TimingScheme, n_block: Optional[int]) -> int:
    own = scheme.block_len
    if own is None:
        if n_block is None:
            raise ParameterError("a conventional scheme needs an explicit block length")
        own = n_block
    elif n_block is not None and n_block != own:
        raise ParameterError(f"block length {n_block} disagrees with the scheme's N = {own}")
    if own < 1:
        raise ParameterError(f"block length must be >= 1, got {own}")
    return int(own)


def delta_trajectory(scheme: TimingScheme, n_block: Optional[int] = None) -> DeltaTrajectory:
    n = _resolve_block_len(scheme, n_block)
    d0 = float(scheme.delta0)
    u = _offsets(d0, scheme.drift, np.arange(n))
    wraps = np.floor(u).astype(np.int64)
    deltas = u - wraps
    # a tiny negative offset reduces to exactly 1.0
    carry = deltas >= 1.0
    deltas[carry] = 0.0
    wraps[carry] += 1
    deltas.setflags(write=False)
    wraps.setflags(write=False)
    return DeltaTrajectory(deltas=deltas, wraps=wraps, step=scheme.relative_step, delta0=d0, drift=scheme.drift)


# ---------------- Window geometry ----------------
def _candidates(min_period: float) -> int:
    return int(math.ceil(1.0 / min_period)) + 3


def _window_weights(u0: np.ndarray, num: np.ndarray, den: np.ndarray, n_block: int) -> Tuple[np.ndarray, np.ndarray]:
    """Overlap of every target window with nearby interferer symbols.

    u0, num and den have one entry per block (shape (B,)); returns clipped
    symbol indices and overlap fractions of shape (B, N, C).
    """
    period = 1.0 + num / den
    width = _candidates(float(np.min(period)))
    n = np.arange(n_block, dtype=float)
    first = np.floor((n[None, :] - u0[:, None]) / period[:, None]).astype(np.int64) - 1
    k = first[..., None] + np.arange(width)
    kc = np.clip(k, 0, n_block - 1)
    u0_, num_, den_ = u0[:, None, None], num[:, None, None], den[:, None, None]
    start = kc + u0_ + (kc * num_) / den_
    end = (kc + 1) + u0_ + ((kc + 1) * num_) / den_
    lo = np.maximum(n[None, :, None], start)
    hi = np.minimum(n[None, :, None] + 1.0, end)
    w = np.clip(hi - lo, 0.0, None)
    w = np.where((k >= 0) & (k < n_block), w, 0.0)
    return kc, w


def interference_weights(traj: DeltaTrajectory) -> Tuple[np.ndarray, np.ndarray]:
    """(indices, weights), each (N, C): weights[n, j] is the share of window n covered by interferer symbol indices[n, j]"""
    num, den = traj.drift
    kc, w = _window_weights(
        np.array([traj.delta0]), np.array([num], dtype=np.int64), np.array([den], dtype=np.int64), traj.n
    )
    return kc[0], w[0]


def trajectory_interference_power(params: ChannelParams, traj: DeltaTrajectory) -> np.ndarray:
    _, w = interference_weights(traj)
    return params.h1 ** 2 * np.sum(w * w, axis=-1)


# ---------------- Observation and detection ----------------
def _observe(a1: np.ndarray, a2: np.ndarray, kc: np.ndarray, w: np.ndarray, h1: float, noise) -> np.ndarray:
    """y = a1 + h1 * sum_k w_k a2_k + noise; kc is shared (N, C) or per block (B, N, C)"""
    if kc.ndim == 2:
        gathered = a2[..., kc]
    else:
        b, n, c = kc.shape
        gathered = np.take_along_axis(a2, kc.reshape(b, n * c), axis=1).reshape(b, n, c)
    return a1 + h1 * np.sum(w * gathered, axis=-1) + noise


def _decide(y: np.ndarray) -> np.ndarray:
    return np.where(y >= 0.0, 1, -1).astype(np.int8)


def sampled_observations(
    target: SymbolBlock,
    interferer: SymbolBlock,
    params: ChannelParams,
    traj: DeltaTrajectory,
    seed: SeedLike,
) -> np.ndarray:
    n = len(target)
    if len(interferer) != n or traj.n != n:
        raise ParameterError(
            f"length mismatch: target {n}, interferer {len(interferer)}, trajectory {traj.n}"
        )
    kc, w = interference_weights(traj)
    rng = make_rng(seed)
    noise = params.sigma * rng.standard_normal(n) if params.sigma > 0 else 0.0
    return _observe(
        target.symbols.astype(float), interferer.symbols.astype(float), kc, w, params.h1, noise
    )


def detect(observations) -> SymbolBlock:
    """Sign decision; an exact zero decodes to +1"""
    return SymbolBlock(_decide(np.asarray(observations, dtype=float).reshape(-1)))


def count_errors(detected, target) -> int:
    d = detected.symbols if isinstance(detected, SymbolBlock) else np.asarray(detected)
    t = target.symbols if isinstance(target, SymbolBlock) else np.asarray(target)
    if d.shape != t.shape:
        raise ParameterError(f"cannot compare blocks of shapes {d.shape} and {t.shape}")
    return int(np.count_nonzero(d != t))


# ---------------- Scheme B draws ----------------
def _draw_pairs(rng: np.random.Generator, k_max: int, count: int) -> np.ndarray:
    return rng.integers(0, k_max + 1, size=(count, 2))


def scheme_b_draw(k_max: int, seed: SeedLike) -> Tuple[int, int]:
    """(K1, K2), independent and uniform on {0, ..., K}"""
    if k_max < 0:
        raise ParameterError(f"K must be >= 0, got {k_max}")
    k1, k2 = _draw_pairs(make_rng(seed), k_max, 1)[0]
    return int(k1), int(k2)


# ---------------- Geometry per batch ----------------
def _batch_geometry(scheme: TimingScheme, n_block: int, count: int, rng: np.random.Generator, randomize: bool):
    """Offsets and drifts for `count` blocks; returns (u0, num, den, degenerate draws)"""
    if not randomize:
        num, den = scheme.drift
        return (
            np.full(count, float(scheme.delta0)),
            np.full(count, num, dtype=np.int64),
            np.full(count, den, dtype=np.int64),
            0,
        )
    u0 = rng.random(count)
    if isinstance(scheme, SchemeB):
        pairs = _draw_pairs(rng, scheme.k_max, count)
        num = pairs[:, 1] - pairs[:, 0]
        den = n_block + pairs[:, 0]
        return u0, num.astype(np.int64), den.astype(np.int64), int(np.count_nonzero(num == 0))
    num, den = scheme.drift
    return u0, np.full(count, num, dtype=np.int64), np.full(count, den, dtype=np.int64), 0


def _blocks_per_batch(n_block: int, batch_symbols: int) -> int:
    return max(1, batch_symbols // n_block)


def _count_share(
    params: ChannelParams,
    scheme: TimingScheme,
    blocks: int,
    n_block: int,
    seed: np.random.SeedSequence,
    randomize: bool,
    batch_symbols: int,
) -> Tuple[int, int]:
    """Bit errors and degenerate Scheme B draws over one worker's share of blocks"""
    rng = np.random.default_rng(seed)
    shared = None
    if not randomize:
        shared = interference_weights(delta_trajectory(scheme, n_block))
    errors = 0
    degenerate = 0
    per_batch = _blocks_per_batch(n_block, batch_symbols)
    done = 0
    while done < blocks:
        b = min(per_batch, blocks - done)
        a1 = draw_symbols(rng, (b, n_block))
        a2 = draw_symbols(rng, (b, n_block))
        if shared is None:
            u0, num, den, degen = _batch_geometry(scheme, n_block, b, rng, randomize)
            kc, w = _window_weights(u0, num, den, n_block)
            degenerate += degen
        else:
            kc, w = shared
        noise = params.sigma * rng.standard_normal((b, n_block)) if params.sigma > 0 else 0.0
        y = _observe(a1.astype(float), a2.astype(float), kc, w, params.h1, noise)
        errors += int(np.count_nonzero(_decide(y) != a1))
        done += b
    return errors, degenerate


def _share_sizes(blocks: int, workers: int):
    return [len(part) for part in np.array_split(np.arange(blocks), max(1, workers)) if len(part)]


def estimate_ber(
    params: ChannelParams,
    scheme: TimingScheme,
    blocks: int,
    n_block: Optional[int] = None,
    seed: Union[RngSeed, np.random.SeedSequence] = config.DEFAULT_SEED,
    *,
    randomize: Optional[bool] = None,
    workers: int = config.WORKERS,
    batch_symbols: int = config.BATCH_SYMBOLS,
) -> BerEstimate:
    """Generate, observe and detect `blocks` independent blocks; errors counted against the target block.

    `randomize` draws delta0 (and the Scheme B pair) afresh for every block. It
    defaults to True for the stretched schemes and False for the conventional
    receiver, which then keeps `scheme.delta0` fixed.
    """
    if blocks < 1:
        raise ParameterError(f"blocks must be >= 1, got {blocks}")
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    if randomize is None:
        randomize = not isinstance(scheme, Conventional)
    n = _resolve_block_len(scheme, n_block)
    if isinstance(scheme, SchemeB) and scheme.degenerate and not randomize:
        logger.warning("Scheme B draw K1 = K2 = %d: offset stays at delta0 for the whole packet", scheme.k1)

    sizes = _share_sizes(blocks, workers)
    jobs = [
        (params, scheme, size, n, derive_seed(seed, i), randomize, batch_symbols)
        for i, size in enumerate(sizes)
    ]
    logger.debug("estimate_ber: %d blocks of %d split into shares %s", blocks, n, sizes)
    if workers > 1 and len(jobs) > 1:
        parts = Parallel(n_jobs=workers)(delayed(_count_share)(*job) for job in jobs)
    else:
        parts = [_count_share(*job) for job in jobs]

    errors = sum(p[0] for p in parts)
    degenerate = sum(p[1] for p in parts)
    if degenerate:
        logger.warning("%d of %d Scheme B blocks drew K1 = K2 (kept, not re-drawn)", degenerate, blocks)
    return BerEstimate.from_counts(errors, blocks * n)


# ---------------- eSINR ----------------
def estimate_esinr(
    params: ChannelParams,
    scheme: TimingScheme,
    blocks: int,
    n_block: Optional[int] = None,
    seed: Union[RngSeed, np.random.SeedSequence] = config.DEFAULT_SEED,
    *,
    randomize: bool = True,
    batch_symbols: int = config.BATCH_SYMBOLS,
) -> Tuple[float, float]:
    """Mean over blocks of the per-window eSINR average, with its standard error"""
    if blocks < 1:
        raise ParameterError(f"blocks must be >= 1, got {blocks}")
    n = _resolve_block_len(scheme, n_block)
    s2 = params.sigma ** 2
    rng = np.random.default_rng(derive_seed(seed, 0))
    per_block = []
    per_batch = _blocks_per_batch(n, batch_symbols)
    count = blocks if randomize else 1
    done = 0
    while done < count:
        b = min(per_batch, count - done)
        u0, num, den, _ = _batch_geometry(scheme, n, b, rng, randomize)
        _, w = _window_weights(u0, num, den, n)
        denom = params.h1 ** 2 * np.sum(w * w, axis=-1) + s2
        if np.any(denom == 0):
            raise ZeroPowerError("a window sees neither interference nor noise")
        per_block.append(np.mean(1.0 / denom, axis=-1))
        done += b
    values = np.concatenate(per_block)
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))
