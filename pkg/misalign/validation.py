"""
Release gate: analytic properties, Monte Carlo agreement, waveform
equivalence and figure-level dB gaps, each reported with its deviation.
"""

import math
import logging
import tempfile
import pathlib
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from . import analytics, config
from .experiments import analytic_gap_profile, build_spec, run_experiment, write_csv
from .models import ChannelParams, Conventional, SchemeA, SchemeB, as_seed_sequence, derive_seed, make_rng
from .simulation import estimate_ber
from .waveform import cross_validate

logger = logging.getLogger(__name__)

# SIR 4 dB, SNR 10 dB
REFERENCE_PARAMS = ChannelParams.from_db(4.0, 10.0)
GRID_DELTAS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
GRID_SIRS = (2.0, 4.0, 6.0, 8.0, 10.0, 12.0)


class CheckResult(BaseModel):
    name: str
    passed: bool
    deviation: Optional[float] = None
    detail: str = ""


class ValidationReport(BaseModel):
    checks: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]


def _random_params(rng: np.random.Generator, count: int, sigma_lo: float = 0.3) -> List[ChannelParams]:
    h = rng.uniform(0.05, 0.95, count)
    s = rng.uniform(sigma_lo, 1.0, count)
    return [ChannelParams(h1=float(a), sigma=float(b)) for a, b in zip(h, s)]


# ---------------- Analytic properties ----------------
def check_closed_form(seed) -> CheckResult:
    worst = 0.0
    for p in _random_params(make_rng(seed), 100):
        h2, s2 = p.h1 ** 2, p.sigma ** 2
        quad = analytics.integrate_unit_interval(
            lambda d: 1.0 / (h2 * (2 * d * d - 2 * d + 1) + s2), abs_tol=1e-11
        )
        worst = max(worst, abs(quad - analytics.avg_esinr_closed(p)))
    return CheckResult(name="averaged eSINR closed form vs quadrature", passed=worst <= 1e-10, deviation=worst)


def check_q_function(seed) -> CheckResult:
    x = np.linspace(-8.0, 8.0, 1601)
    q = analytics.q_function(x)
    worst = float(np.max(np.abs(q + analytics.q_function(-x) - 1.0)))
    # below -5 neighbouring values round to the same double near 1
    decreasing = bool(np.all(np.diff(q[x >= -5.0]) < 0))
    return CheckResult(
        name="Q reflection and monotonicity",
        passed=worst <= 1e-12 and decreasing,
        deviation=worst,
        detail="" if decreasing else "Q is not strictly decreasing on [-5, 8]",
    )


def check_interference_power(seed) -> CheckResult:
    grid = np.linspace(0.0, 0.999, 1000)
    worst_bound, worst_sym = 0.0, 0.0
    for p in _random_params(make_rng(seed), 20):
        cap = p.h1 ** 2
        for d in grid:
            pi = analytics.effective_interference_power(p, float(d))
            worst_bound = max(worst_bound, pi - cap)
            if d > 0:
                worst_sym = max(worst_sym, abs(pi - analytics.effective_interference_power(p, 1.0 - float(d))))
    ok = worst_bound <= 1e-15 and worst_sym <= 1e-14
    return CheckResult(
        name="interference power bound and symmetry",
        passed=ok,
        deviation=max(worst_bound, worst_sym),
    )


def check_steady_state_ber(seed) -> CheckResult:
    worst = 0.0
    monotone = True
    for p in _random_params(make_rng(seed), 20):
        left = np.linspace(0.0, 0.5, 251)
        vals = [analytics.ber_steady_state(p, float(d)) for d in left]
        monotone &= all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
        for d in left[1:]:
            worst = max(worst, abs(analytics.ber_steady_state(p, float(d)) - analytics.ber_steady_state(p, 1.0 - float(d))))
    return CheckResult(
        name="steady-state BER symmetry and monotonicity",
        passed=worst <= 1e-14 and monotone,
        deviation=worst,
        detail="" if monotone else "BER increases somewhere on [0, 0.5]",
    )


def check_support_moment(seed) -> CheckResult:
    rng = make_rng(seed)
    worst = 0.0
    for p, d in zip(_random_params(rng, 100), rng.uniform(0.0, 1.0, 100)):
        support = analytics.interference_support(p, float(d))
        worst = max(worst, abs(support.second_moment() - analytics.effective_interference_power(p, float(d))))
    return CheckResult(name="interference support second moment", passed=worst <= 1e-14, deviation=worst)


# ---------------- Waveform oracle ----------------
def check_waveform(seed, configs: int = 100) -> CheckResult:
    rng = make_rng(seed)
    worst = 0.0
    for i in range(configs):
        n = int(rng.integers(1, 25))
        p = _random_params(rng, 1)[0]
        kind = i % 3
        if kind == 0:
            scheme = Conventional()
        elif kind == 1:
            scheme = SchemeA(n_block=n)
        else:
            k = int(rng.integers(1, 9))
            k1, k2 = (int(v) for v in rng.integers(0, k + 1, 2))
            scheme = SchemeB(n_block=n, k_max=k, k1=k1, k2=k2)
        worst = max(worst, cross_validate(p, scheme, 1, derive_seed(seed, i), n_symbols=n))
    return CheckResult(name="waveform oracle vs symbol model (noiseless)", passed=worst <= 1e-9, deviation=worst)


# ---------------- Monte Carlo ----------------
def check_noiseless(seed, blocks: int = 50, n_block: int = 200) -> CheckResult:
    schemes = [
        (Conventional(delta0=0.37), False),
        (SchemeA(n_block=n_block), True),
        (SchemeB(n_block=n_block, k_max=config.DEFAULT_SCHEME_B_K, k1=0, k2=0), True),
    ]
    errors = 0
    for i, (scheme, randomize) in enumerate(schemes):
        for h1 in (0.3, 0.9, 0.999):
            p = ChannelParams(h1=h1, sigma=0.0)
            est = estimate_ber(p, scheme, blocks, n_block, derive_seed(seed, i), randomize=randomize)
            errors += est.errors
    return CheckResult(name="noiseless runs are error free", passed=errors == 0, deviation=float(errors))


def check_mc_grid(
    seed,
    symbols_per_point: int = 10 ** 6,
    deltas: Sequence[float] = GRID_DELTAS,
    sirs: Sequence[float] = GRID_SIRS,
    snr_db: float = 10.0,
    n_block: int = config.DEFAULT_BLOCK_LEN,
) -> CheckResult:
    """Conventional Monte Carlo vs the closed-form block BER; passes when >= 95% of points sit within 3 sigma"""
    blocks = max(1, symbols_per_point // n_block)
    inside = 0
    total = 0
    worst = 0.0
    for i, (sir, d) in enumerate((s, d) for s in sirs for d in deltas):
        p = ChannelParams.from_db(sir, snr_db)
        est = estimate_ber(p, Conventional(delta0=d), blocks, n_block, derive_seed(seed, i))
        ref = analytics.ber_block(p, d, n_block)
        z = abs(est.ber - ref) / est.std_err if est.std_err > 0 else math.inf
        worst = max(worst, z)
        inside += z <= 3.0
        total += 1
    share = inside / total
    return CheckResult(
        name="Monte Carlo vs closed-form BER grid",
        passed=share >= 0.95,
        deviation=worst,
        detail=f"{inside}/{total} points within 3 sigma (worst {worst:.2f} sigma)",
    )


def _scheme_estimates(seed, p: ChannelParams, blocks: int, n_block: int):
    a = estimate_ber(p, SchemeA(n_block=n_block), blocks, n_block, derive_seed(seed, 0), randomize=True)
    b = estimate_ber(
        p, SchemeB(n_block=n_block, k_max=config.DEFAULT_SCHEME_B_K, k1=0, k2=0),
        blocks, n_block, derive_seed(seed, 1), randomize=True,
    )
    return a, b


def check_schemes(seed, symbols_per_point: int = 10 ** 6, n_block: int = config.DEFAULT_BLOCK_LEN) -> CheckResult:
    blocks = max(1, symbols_per_point // n_block)
    ref = analytics.avg_ber(REFERENCE_PARAMS)
    a, b = _scheme_estimates(seed, REFERENCE_PARAMS, blocks, n_block)
    z = max(abs(a.ber - ref) / a.std_err, abs(b.ber - ref) / b.std_err)
    return CheckResult(
        name="Scheme A/B Monte Carlo vs averaged BER",
        passed=z <= 3.0,
        deviation=z,
        detail=f"averaged {ref:.5f}, A {a.ber:.5f}, B {b.ber:.5f}",
    )


# ---------------- Figure gaps ----------------
def _gaps(points) -> np.ndarray:
    return np.array([g.gap_db for g in points])


def check_fig2(seed) -> CheckResult:
    prof = analytic_gap_profile("sir_delta", 10.0, 1.0, 12.0)
    gaps = _gaps(prof)
    if gaps.size < 2:
        return CheckResult(name="delta 0 vs 0.5 SIR gap (SNR 10 dB)", passed=False, detail="no levels")
    upper = np.array([g.gap_db for g in prof if g.x_db >= 6.0])
    window = bool(np.all((gaps >= 1.5) & (gaps <= 3.0)))
    rising = bool(np.all(np.diff(upper) >= -1e-9)) and gaps[-1] > gaps[0]
    return CheckResult(
        name="delta 0 vs 0.5 SIR gap (SNR 10 dB)",
        passed=window and rising,
        deviation=float(gaps.max()),
        detail=f"gap {gaps.min():.2f}..{gaps.max():.2f} dB, {gaps[0]:.2f} -> {gaps[-1]:.2f}",
    )


def check_fig3(seed) -> CheckResult:
    prof = analytic_gap_profile("snr_delta", 4.0, 10.0, 15.0)
    gaps = _gaps(prof)
    if gaps.size < 2:
        return CheckResult(name="delta 0 vs 0.5 SNR gap (SIR 4 dB)", passed=False, detail="no levels")
    falling = bool(np.all(np.diff(gaps) < 0))
    ends = abs(gaps[0] - 3.5) <= 0.75 and abs(gaps[-1] - 1.5) <= 0.75
    return CheckResult(
        name="delta 0 vs 0.5 SNR gap (SIR 4 dB)",
        passed=falling and ends,
        deviation=float(max(abs(gaps[0] - 3.5), abs(gaps[-1] - 1.5))),
        detail=f"{gaps[0]:.2f} -> {gaps[-1]:.2f} dB",
    )


def check_fig4(seed, symbols_per_point: int = 10 ** 6, n_block: int = config.DEFAULT_BLOCK_LEN) -> CheckResult:
    gaps = _gaps(analytic_gap_profile("sir_avg_ber", 10.0, 1.0, 12.0))
    blocks = max(1, symbols_per_point // n_block)
    worst_z = 0.0
    for i, sir in enumerate((2.0, 6.0, 10.0)):
        p = ChannelParams.from_db(sir, 10.0)
        ref = analytics.avg_ber(p)
        a, b = _scheme_estimates(derive_seed(seed, i), p, blocks, n_block)
        pair = abs(a.ber - b.ber) / math.hypot(a.std_err, b.std_err)
        worst_z = max(worst_z, abs(a.ber - ref) / a.std_err, abs(b.ber - ref) / b.std_err, pair)
    ok = bool(gaps.size and np.all(gaps >= 1.2)) and worst_z <= 3.0
    return CheckResult(
        name="averaged BER vs delta 0 SIR gap (SNR 10 dB)",
        passed=ok,
        deviation=float(gaps.min()) if gaps.size else None,
        detail=f"min gap {gaps.min():.2f} dB, worst Monte Carlo {worst_z:.2f} sigma" if gaps.size else "no levels",
    )


def check_fig5(seed) -> CheckResult:
    prof = analytic_gap_profile("sir_avg_esinr", 10.0, 5.0, 15.0)
    gaps = _gaps(prof)
    covered = bool(prof) and prof[0].x_db == 5.0 and prof[-1].x_db == 15.0
    vertical = [
        10 * math.log10(analytics.avg_esinr_closed(ChannelParams.from_db(s, 10.0))
                        / analytics.esinr(ChannelParams.from_db(s, 10.0), 0.0))
        for s in (5.0, 15.0)
    ]
    return CheckResult(
        name="averaged vs delta 0 eSINR gap (SNR 10 dB)",
        passed=bool(covered and np.all(gaps > 1.5)),
        deviation=float(gaps.min()) if gaps.size else None,
        detail=f"min SIR gap {gaps.min():.2f} dB; eSINR ratio {vertical[0]:.2f} -> {vertical[1]:.2f} dB" if gaps.size else "no levels",
    )


# ---------------- Reproducibility ----------------
def check_determinism(seed) -> CheckResult:
    spec = build_spec(
        {"experiment": "custom", "axis": "sir", "values": [3.0, 6.0], "snr_db": 10.0,
         "deltas": [0.0, 0.5], "schemes": ["conv", "a", "b"], "n_block": 100, "trials": 20,
         "seed": int(as_seed_sequence(seed).generate_state(1, np.uint64)[0])}
    )
    with tempfile.TemporaryDirectory() as tmp:
        one = write_csv(run_experiment(spec, progress=False), pathlib.Path(tmp) / "one.csv").read_bytes()
        two = write_csv(run_experiment(spec, progress=False), pathlib.Path(tmp) / "two.csv").read_bytes()
    return CheckResult(name="byte-identical CSV for identical spec and seed", passed=one == two)


# ---------------- Runner ----------------
def _run(name: str, fn: Callable[[], CheckResult]) -> CheckResult:
    try:
        result = fn()
    except Exception as e:
        logger.exception("check '%s' raised", name)
        return CheckResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}")
    logger.info("%s %s", "✅" if result.passed else "❌", result.name)
    return result


def validate_all(
    seed: int = config.DEFAULT_SEED,
    symbols_per_point: int = 10 ** 6,
    quick: bool = False,
) -> ValidationReport:
    if quick:
        symbols_per_point = min(symbols_per_point, 10 ** 5)
    plan: List[Tuple[str, Callable]] = [
        ("closed_form", check_closed_form),
        ("q_function", check_q_function),
        ("interference_power", check_interference_power),
        ("steady_state_ber", check_steady_state_ber),
        ("support_moment", check_support_moment),
        ("waveform", lambda s: check_waveform(s, configs=30 if quick else 100)),
        ("noiseless", check_noiseless),
        ("mc_grid", lambda s: check_mc_grid(s, symbols_per_point)),
        ("schemes", lambda s: check_schemes(s, symbols_per_point)),
        ("fig2", check_fig2),
        ("fig3", check_fig3),
        ("fig4", lambda s: check_fig4(s, symbols_per_point)),
        ("fig5", check_fig5),
        ("determinism", check_determinism),
    ]
    checks = [_run(name, lambda fn=fn, i=i: fn(derive_seed(seed, i))) for i, (name, fn) in enumerate(plan)]
    return ValidationReport(checks=checks)
