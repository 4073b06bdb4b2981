import pytest

from misalign import analytics, validation
from misalign.models import derive_seed
from misalign.validation import (
    CheckResult,
    ValidationReport,
    check_closed_form,
    check_determinism,
    check_fig2,
    check_fig3,
    check_fig4,
    check_fig5,
    check_interference_power,
    check_mc_grid,
    check_noiseless,
    check_q_function,
    check_schemes,
    check_steady_state_ber,
    check_support_moment,
    check_waveform,
    validate_all,
)

SMALL_GRID = dict(symbols_per_point=400_000, deltas=(0.0, 0.5), sirs=(10.0, 12.0))


@pytest.mark.parametrize("check", [
    check_closed_form,
    check_q_function,
    check_interference_power,
    check_steady_state_ber,
    check_support_moment,
    check_fig2,
    check_fig3,
    check_fig5,
    check_determinism,
])
def test_cheap_checks_pass(check):
    result = check(derive_seed(7, 0))
    assert result.passed, result.detail


def test_waveform_check():
    result = check_waveform(3, configs=15)
    assert result.passed
    assert result.deviation <= 1e-9


def test_noiseless_check():
    result = check_noiseless(4, blocks=5, n_block=100)
    assert result.passed
    assert result.deviation == 0.0


def test_mc_grid_passes():
    result = check_mc_grid(5, **SMALL_GRID)
    assert result.passed, result.detail


def test_mc_grid_detects_shifted_q(monkeypatch):
    original = analytics.q_function
    monkeypatch.setattr(analytics, "q_function", lambda x: original(x) + 1e-3)
    result = check_mc_grid(5, **SMALL_GRID)
    assert not result.passed
    assert result.deviation > 3.0


def test_report():
    report = ValidationReport(checks=[
        CheckResult(name="one", passed=True),
        CheckResult(name="two", passed=False, detail="off"),
    ])
    assert not report.passed
    assert [c.name for c in report.failed()] == ["two"]
    assert ValidationReport(checks=[CheckResult(name="one", passed=True)]).passed


def test_raising_check_is_a_failure():
    def boom():
        raise ValueError("broken")

    result = validation._run("boom", boom)
    assert not result.passed
    assert "ValueError: broken" in result.detail


@pytest.mark.slow
def test_scheme_checks():
    assert check_schemes(8, symbols_per_point=200_000).passed
    assert check_fig4(9, symbols_per_point=200_000).passed


@pytest.mark.slow
def test_validate_all_quick():
    report = validate_all(seed=11, quick=True)
    assert report.passed, [c.name for c in report.failed()]
    assert len(report.checks) == 14
