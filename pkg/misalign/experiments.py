"""
Parameter sweeps, spec files, CSV output and dB-gap measurement.

A sweep walks `values` along one axis (SIR or SNR, the other held fixed) and,
for every point, emits one row per conventional delta and one row per
timing scheme. Each row draws its Monte Carlo stream from
derive_seed(seed, row index), so output never depends on scheduling.
"""

import os
import csv
import math
import logging
import pathlib
import tempfile
from typing import Callable, Dict, Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from tqdm import tqdm

from . import config
from .analytics import avg_ber, avg_esinr_closed, ber_block, esinr
from .errors import CurveRangeError, SpecError
from .models import SEED_LIMIT, ChannelParams, Conventional, SchemeA, SchemeB, SweepResult, derive_seed
from .simulation import estimate_ber, estimate_esinr

logger = logging.getLogger(__name__)

CSV_COLUMNS = [
    "experiment", "sir_db", "snr_db", "delta", "scheme", "n_block", "trials",
    "analytic_ber", "sim_ber", "sim_stderr", "esinr_linear", "avg_esinr_linear",
    "sim_esinr_linear",
]

SchemeLabel = Literal["conv", "a", "b"]


# ---------------- Spec ----------------
class ExperimentSpec(BaseModel):
    """One sweep: axis values in dB, the fixed other ratio, receivers to evaluate"""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    experiment: Literal["fig2", "fig3", "fig4", "fig5", "custom"] = "custom"
    axis: Literal["sir", "snr"] = "sir"
    values: Tuple[float, ...]
    sir_db: Optional[float] = None
    snr_db: Optional[float] = None
    deltas: Tuple[float, ...] = (0.0,)
    schemes: Tuple[SchemeLabel, ...] = ("conv",)
    n_block: int = Field(default=config.DEFAULT_BLOCK_LEN, ge=1)
    trials: int = Field(default=0, ge=0)
    k_max: int = Field(default=config.DEFAULT_SCHEME_B_K, ge=0)
    seed: int = Field(default=config.DEFAULT_SEED, ge=0, lt=SEED_LIMIT)
    out: Optional[str] = None
    workers: int = Field(default=config.WORKERS, ge=1)

    @field_validator("values")
    @classmethod
    def _increasing(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("sweep values must be strictly increasing")
        return v

    @field_validator("deltas")
    @classmethod
    def _in_unit_interval(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("at least one delta is required")
        bad = [d for d in v if not 0.0 <= d < 1.0]
        if bad:
            raise ValueError(f"deltas must lie in [0, 1), got {bad}")
        return v

    @field_validator("schemes")
    @classmethod
    def _some_scheme(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        if not v:
            raise ValueError("at least one scheme is required")
        if len(set(v)) != len(v):
            raise ValueError("schemes must not repeat")
        return v

    @model_validator(mode="after")
    def _fixed_axis(self) -> "ExperimentSpec":
        if self.axis == "sir":
            if self.snr_db is None:
                raise ValueError("snr_db must be fixed when sweeping SIR")
            if self.values[0] <= 0:
                raise ValueError("SIR sweep values must be > 0 dB")
        else:
            if self.sir_db is None:
                raise ValueError("sir_db must be fixed when sweeping SNR")
            if self.sir_db <= 0:
                raise ValueError("sir_db must be > 0 dB")
        return self

    def point(self, x: float) -> Tuple[float, float]:
        """(sir_db, snr_db) at sweep value x"""
        return (x, self.snr_db) if self.axis == "sir" else (self.sir_db, x)

    def output_path(self) -> pathlib.Path:
        if self.out:
            return pathlib.Path(self.out)
        return pathlib.Path(config.RESULTS_DIR) / f"{self.experiment}.csv"


def _parse_range(val: str) -> Optional[List[float]]:
    parts = val.split(":")
    if len(parts) not in (2, 3):
        return None
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        return None
    start, stop = nums[0], nums[1]
    step = nums[2] if len(nums) == 3 else 1.0
    if step <= 0:
        raise SpecError(f"range step must be positive in '{val}'")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(max(count, 0))]


def parse_list(text: str) -> List[str]:
    """'[a, b]', 'a,b' or 'start:stop[:step]' as a list (CLI values use the spec-file forms)"""
    val = text.strip()
    if val.startswith("[") and val.endswith("]"):
        val = val[1:-1]
    rng = _parse_range(val)
    if rng is not None:
        return [repr(x) for x in rng]
    return [x.strip() for x in val.split(",") if x.strip()]


def load_spec_file(path: Union[str, pathlib.Path]) -> Dict[str, object]:
    """Permissive key: value reader; [a, b] lists and start:stop:step ranges become lists"""
    path = pathlib.Path(path)
    if not path.exists():
        raise SpecError(f"spec file not found: {path}")
    meta: Dict[str, object] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if ":" not in s:
            raise SpecError(f"{path.name}:{lineno}: expected 'key: value', got '{s}'")
        k, v = s.split(":", 1)
        key = k.strip()
        val = v.strip()
        if (val.startswith("'") and val.endswith("'")) or (val.startswith('"') and val.endswith('"')):
            val = val[1:-1]
        if val.startswith("[") and val.endswith("]"):
            inner = val[1:-1].strip()
            meta[key] = [x.strip().strip("'").strip('"') for x in inner.split(",")] if inner else []
        else:
            rng = _parse_range(val)
            meta[key] = rng if rng is not None else val
    return meta


def build_spec(file_values: Optional[Dict[str, object]] = None, overrides: Optional[Dict[str, object]] = None) -> ExperimentSpec:
    """Defaults < file values < overrides (None overrides are ignored)"""
    merged: Dict[str, object] = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return ExperimentSpec(**merged)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(p) for p in first["loc"]) or None
        raise SpecError(first["msg"], field=field) from e


# ---------------- Sweep ----------------
def _plan(spec: ExperimentSpec) -> List[Tuple[float, str, Optional[float]]]:
    rows = []
    for x in spec.values:
        for label in spec.schemes:
            if label == "conv":
                rows.extend((x, label, d) for d in spec.deltas)
            else:
                rows.append((x, label, None))
    return rows


def _scheme_row(spec: ExperimentSpec, index: int, x: float, label: str, delta: Optional[float]) -> SweepResult:
    sir_db, snr_db = spec.point(x)
    params = ChannelParams.from_db(sir_db, snr_db)
    sub = derive_seed(spec.seed, index)
    n = spec.n_block
    row = dict(
        experiment=spec.experiment, sir_db=sir_db, snr_db=snr_db, delta=delta,
        scheme=label, n_block=n, trials=spec.trials,
    )

    if label == "conv":
        scheme = Conventional(delta0=delta)
        row["analytic_ber"] = ber_block(params, delta, n)
        row["esinr_linear"] = esinr(params, delta)
        if spec.trials:
            est = estimate_ber(params, scheme, spec.trials, n, sub, workers=spec.workers)
            row.update(sim_ber=est.ber, sim_stderr=est.std_err)
        return SweepResult(**row)

    if label == "a":
        scheme = SchemeA(n_block=n)
    else:
        scheme = SchemeB(n_block=n, k_max=spec.k_max, k1=0, k2=0)
    row["analytic_ber"] = avg_ber(params)
    row["avg_esinr_linear"] = avg_esinr_closed(params)
    if spec.trials:
        est = estimate_ber(params, scheme, spec.trials, n, derive_seed(sub, 0), randomize=True, workers=spec.workers)
        mean, _ = estimate_esinr(params, scheme, spec.trials, n, derive_seed(sub, 1), randomize=True)
        row.update(sim_ber=est.ber, sim_stderr=est.std_err, sim_esinr_linear=mean)
    return SweepResult(**row)


def run_experiment(spec: ExperimentSpec, progress: bool = True) -> List[SweepResult]:
    plan = _plan(spec)
    logger.info(
        "%s: %d rows over %s = %s dB, %d blocks/point",
        spec.experiment, len(plan), spec.axis.upper(), list(spec.values), spec.trials,
    )
    results = []
    for i, (x, label, delta) in enumerate(tqdm(plan, desc=spec.experiment, unit="row", disable=not progress)):
        results.append(_scheme_row(spec, i, x, label, delta))
    return results


# ---------------- CSV ----------------
def write_csv(rows: Iterable[SweepResult], path: Union[str, pathlib.Path]) -> pathlib.Path:
    """Header plus one line per row, written to a temp file and renamed into place"""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow(r.as_row())
        os.replace(tmp, path)
    except BaseException:
        pathlib.Path(tmp).unlink(missing_ok=True)
        raise
    return path


def _matches(cell: str, wanted: str) -> bool:
    try:
        return math.isclose(float(cell), float(wanted), abs_tol=1e-12)
    except ValueError:
        return cell == wanted


def read_curve(
    path: Union[str, pathlib.Path],
    x_col: str,
    y_col: str,
    filters: Optional[Dict[str, str]] = None,
) -> List[Tuple[float, float]]:
    """(x, y) pairs from a results CSV, sorted by x; rows with an empty y are skipped"""
    filters = filters or {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = [c for c in [x_col, y_col, *filters] if c not in (reader.fieldnames or [])]
        if missing:
            raise SpecError(f"{path}: no column(s) {missing}")
        out = [
            (float(row[x_col]), float(row[y_col]))
            for row in reader
            if row[y_col] != "" and all(_matches(row[k], v) for k, v in filters.items())
        ]
    return sorted(out)


# ---------------- dB gaps ----------------
def _x_at(curve: Sequence[Tuple[float, float]], target: float, name: str) -> float:
    if len(curve) < 2:
        raise CurveRangeError(f"curve {name} needs at least two points")
    xs = np.array([p[0] for p in curve], dtype=float)
    ys = np.array([p[1] for p in curve], dtype=float)
    if np.any(ys <= 0) or target <= 0:
        raise CurveRangeError(f"curve {name}: log interpolation needs positive values")
    order = np.argsort(xs)
    xs, ly = xs[order], np.log10(ys[order])
    d = np.diff(ly)
    if np.all(d < 0):
        xs, ly = xs[::-1], ly[::-1]
    elif not np.all(d > 0):
        raise CurveRangeError(f"curve {name} is not strictly monotone")
    lo, hi = float(ys.min()), float(ys.max())
    slack = 8 * np.finfo(float).eps
    # range test in the linear domain; endpoints count as inside
    if not lo * (1 - slack) <= target <= hi * (1 + slack):
        raise CurveRangeError(f"target {target:.3e} outside curve {name} range [{lo:.3e}, {hi:.3e}]")
    lt = float(np.clip(np.log10(target), ly[0], ly[-1]))
    return float(np.interp(lt, ly, xs))


def measure_db_gap(
    curve_a: Sequence[Tuple[float, float]],
    curve_b: Sequence[Tuple[float, float]],
    target: float,
) -> float:
    """x_B - x_A where each curve reaches `target`, interpolating x linearly in log10(metric)"""
    return _x_at(curve_b, target, "B") - _x_at(curve_a, target, "A")


class GapPoint(NamedTuple):
    x_db: float
    level: float
    gap_db: float


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    return np.round(np.arange(lo, hi + step / 2, step), 10)


GAP_KINDS = ("sir_delta", "snr_delta", "sir_avg_ber", "sir_avg_esinr")


def _gap_curves(kind: str, fixed_db: float, n_block: int) -> Tuple[Callable[[float], float], Callable[[float], float]]:
    """(reference, improved) metric as a function of the swept dB value"""
    if kind == "sir_delta":
        return (
            lambda x: ber_block(ChannelParams.from_db(x, fixed_db), 0.0, n_block),
            lambda x: ber_block(ChannelParams.from_db(x, fixed_db), 0.5, n_block),
        )
    if kind == "snr_delta":
        return (
            lambda x: ber_block(ChannelParams.from_db(fixed_db, x), 0.0, n_block),
            lambda x: ber_block(ChannelParams.from_db(fixed_db, x), 0.5, n_block),
        )
    if kind == "sir_avg_ber":
        return (
            lambda x: ber_block(ChannelParams.from_db(x, fixed_db), 0.0, n_block),
            lambda x: avg_ber(ChannelParams.from_db(x, fixed_db)),
        )
    if kind == "sir_avg_esinr":
        return (
            lambda x: esinr(ChannelParams.from_db(x, fixed_db), 0.0),
            lambda x: avg_esinr_closed(ChannelParams.from_db(x, fixed_db)),
        )
    raise SpecError(f"unknown gap kind '{kind}', expected one of {GAP_KINDS}", field="kind")


def analytic_gap_profile(
    kind: str,
    fixed_db: float,
    lo: float,
    hi: float,
    step: float = 0.25,
    margin: float = 8.0,
    n_block: int = config.DEFAULT_BLOCK_LEN,
) -> List[GapPoint]:
    """Horizontal gap (reference minus improved, in dB) at the reference curve's value for each grid x in [lo, hi]"""
    ref_fn, imp_fn = _gap_curves(kind, fixed_db, n_block)
    floor = step if kind.startswith("sir") else -math.inf
    ref_x = _grid(lo, hi, step)
    imp_x = _grid(max(lo - margin, floor), hi + margin, step)
    reference = [(float(x), ref_fn(float(x))) for x in ref_x]
    improved = [(float(x), imp_fn(float(x))) for x in imp_x]
    out = []
    for x, level in reference:
        try:
            out.append(GapPoint(x, level, measure_db_gap(improved, reference, level)))
        except CurveRangeError:
            logger.debug("gap profile %s: level %.3e at %.2f dB not reachable", kind, level, x)
    return out
