import logging

import numpy as np
import pytest
from scipy.stats import chisquare

from misalign.analytics import avg_ber, avg_esinr_closed, ber_block, effective_interference_power, esinr
from misalign.errors import ParameterError
from misalign.models import ChannelParams, Conventional, Misalignment, SchemeA, SchemeB
from misalign.simulation import (
    SymbolBlock,
    _observe,
    count_errors,
    delta_trajectory,
    detect,
    estimate_ber,
    estimate_esinr,
    generate_block,
    interference_weights,
    sampled_observations,
    scheme_b_draw,
    trajectory_interference_power,
)


def _window_map(kc, w, n):
    out = {}
    for k, weight in zip(kc[n], w[n]):
        if weight > 0:
            out[int(k)] = out.get(int(k), 0.0) + float(weight)
    return out


class TestSymbols:
    def test_block_is_deterministic(self):
        a = generate_block(64, 11)
        assert np.array_equal(a.symbols, generate_block(64, 11).symbols)
        assert not np.array_equal(a.symbols, generate_block(64, 12).symbols)

    def test_block_values_and_mean(self):
        block = generate_block(100_000, 3)
        assert set(np.unique(block.symbols)) == {-1, 1}
        assert abs(block.symbols.mean()) < 0.02
        assert block.symbols.dtype == np.int8

    def test_block_is_read_only(self):
        block = generate_block(4, 1)
        with pytest.raises(ValueError):
            block.symbols[0] = 1

    def test_rejects_bad_blocks(self):
        with pytest.raises(ParameterError):
            SymbolBlock(np.array([1, 0, -1]))
        with pytest.raises(ParameterError):
            SymbolBlock(np.array([], dtype=np.int8))
        with pytest.raises(ParameterError):
            generate_block(0, 1)

    def test_negation(self):
        block = SymbolBlock(np.array([1, -1, 1]))
        assert (-block).symbols.tolist() == [-1, 1, -1]


class TestTrajectory:
    def test_scheme_a_wraps(self):
        traj = delta_trajectory(SchemeA(n_block=5, delta0=0.8))
        np.testing.assert_allclose(traj.deltas, [0.8, 0.0, 0.2, 0.4, 0.6], atol=1e-12)
        assert traj.wraps.tolist() == [0, 1, 1, 1, 1]
        assert traj.step == pytest.approx(0.2)
        assert isinstance(traj[2], Misalignment)
        assert traj[2].delta == pytest.approx(0.2)

    def test_scheme_a_spacing(self):
        traj = delta_trajectory(SchemeA(n_block=1000, delta0=0.37))
        unwrapped = traj.deltas + traj.wraps
        np.testing.assert_allclose(np.diff(unwrapped), 1e-3, atol=1e-12)
        assert np.all((traj.deltas >= 0) & (traj.deltas < 1))

    def test_conventional_needs_length(self):
        with pytest.raises(ParameterError):
            delta_trajectory(Conventional(delta0=0.3))
        traj = delta_trajectory(Conventional(delta0=0.3), 4)
        assert traj.deltas.tolist() == [0.3] * 4
        assert traj.step == 0.0
        np.testing.assert_allclose(traj.boundaries(), [0.3, 1.3, 2.3, 3.3, 4.3])

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            delta_trajectory(SchemeA(n_block=10), 20)

    def test_scheme_b_unit_draw_is_scheme_a(self):
        a = delta_trajectory(SchemeA(n_block=50, delta0=0.25))
        b = delta_trajectory(SchemeB(n_block=50, k_max=4, k1=0, k2=1, delta0=0.25))
        assert np.array_equal(a.deltas, b.deltas)
        assert np.array_equal(a.wraps, b.wraps)

    def test_scheme_b_degenerate_is_constant(self):
        traj = delta_trajectory(SchemeB(n_block=20, k_max=4, k1=3, k2=3, delta0=0.6))
        assert np.all(traj.deltas == 0.6)

    def test_scheme_b_negative_drift(self):
        traj = delta_trajectory(SchemeB(n_block=8, k_max=4, k1=2, k2=0, delta0=0.1))
        assert traj.step == pytest.approx(-0.2)
        assert traj.deltas[1] == pytest.approx(0.9)
        assert traj.wraps[1] == -1


class TestWeights:
    def test_conventional_weights(self):
        kc, w = interference_weights(delta_trajectory(Conventional(delta0=0.3), 4))
        assert _window_map(kc, w, 0) == pytest.approx({0: 0.7})
        assert _window_map(kc, w, 2) == pytest.approx({1: 0.3, 2: 0.7})

    def test_scheme_a_index_slip(self):
        kc, w = interference_weights(delta_trajectory(SchemeA(n_block=10, delta0=0.9)))
        assert _window_map(kc, w, 0) == pytest.approx({0: 0.1})
        assert _window_map(kc, w, 1) == pytest.approx({0: 1.0})
        assert _window_map(kc, w, 2) == pytest.approx({1: 1.0})
        assert _window_map(kc, w, 3) == pytest.approx({1: 0.1, 2: 0.9})

    @pytest.mark.parametrize("scheme", [
        SchemeA(n_block=40, delta0=0.55),
        SchemeB(n_block=40, k_max=8, k1=1, k2=7, delta0=0.2),
        SchemeB(n_block=40, k_max=8, k1=6, k2=0, delta0=0.7),
    ])
    def test_covered_windows_sum_to_one(self, scheme):
        traj = delta_trajectory(scheme)
        _, w = interference_weights(traj)
        edges = traj.boundaries()
        sums = w.sum(axis=1)
        assert np.all(sums <= 1.0 + 1e-12)
        for n in range(traj.n):
            if edges[0] <= n and edges[-1] >= n + 1:
                assert sums[n] == pytest.approx(1.0, abs=1e-12)

    def test_power_matches_closed_form(self):
        params = ChannelParams(h1=0.6, sigma=0.2)
        power = trajectory_interference_power(params, delta_trajectory(Conventional(delta0=0.3), 6))
        assert power[0] == pytest.approx(0.36 * 0.49)
        np.testing.assert_allclose(power[1:], effective_interference_power(params, 0.3), rtol=1e-12)

    def test_scheme_a_sweeps_the_average_power(self):
        params = ChannelParams(h1=0.6, sigma=0.2)
        power = trajectory_interference_power(params, delta_trajectory(SchemeA(n_block=1000, delta0=0.1)))
        assert power.mean() == pytest.approx(0.36 * 2 / 3, rel=1e-2)


class TestObservation:
    def test_noiseless_weights(self):
        params = ChannelParams(h1=0.5, sigma=0.0)
        traj = delta_trajectory(Conventional(delta0=0.3), 4)
        target = SymbolBlock(np.ones(4))
        y = sampled_observations(target, SymbolBlock(np.ones(4)), params, traj, seed=1)
        np.testing.assert_allclose(y, [1.35, 1.5, 1.5, 1.5])
        y = sampled_observations(target, SymbolBlock(np.array([1, -1, 1, -1])), params, traj, seed=1)
        np.testing.assert_allclose(y, [1.35, 0.8, 1.2, 0.8])

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            sampled_observations(
                SymbolBlock(np.ones(4)), SymbolBlock(np.ones(3)), ChannelParams(h1=0.5, sigma=0.1),
                delta_trajectory(Conventional(), 4), seed=1,
            )

    def test_noise_is_seeded(self, ref_params):
        traj = delta_trajectory(SchemeA(n_block=32, delta0=0.4))
        a1, a2 = generate_block(32, 1), generate_block(32, 2)
        first = sampled_observations(a1, a2, ref_params, traj, seed=9)
        assert np.array_equal(first, sampled_observations(a1, a2, ref_params, traj, seed=9))
        assert not np.array_equal(first, sampled_observations(a1, a2, ref_params, traj, seed=10))

    def test_negation_symmetry(self, rng):
        kc, w = interference_weights(delta_trajectory(SchemeA(n_block=64, delta0=0.3)))
        a1 = rng.choice([-1.0, 1.0], 64)
        a2 = rng.choice([-1.0, 1.0], 64)
        noise = 0.4 * rng.standard_normal(64)
        y = _observe(a1, a2, kc, w, 0.7, noise)
        np.testing.assert_allclose(_observe(-a1, -a2, kc, w, 0.7, -noise), -y, atol=1e-15)
        assert count_errors(detect(y), SymbolBlock(a1)) == count_errors(detect(-y), SymbolBlock(-a1))

    def test_detect_tie_break(self):
        assert detect([0.0, -0.0, -1e-300, 2.0]).symbols.tolist() == [1, 1, -1, 1]

    def test_count_errors(self):
        a = SymbolBlock(np.array([1, 1, -1, -1]))
        assert count_errors(a, a) == 0
        assert count_errors(SymbolBlock(np.array([1, -1, -1, 1])), a) == 2
        with pytest.raises(ParameterError):
            count_errors(a, np.array([1, 1]))


class TestSchemeBDraw:
    def test_deterministic_and_in_range(self):
        assert scheme_b_draw(8, 5) == scheme_b_draw(8, 5)
        assert scheme_b_draw(0, 5) == (0, 0)
        with pytest.raises(ParameterError):
            scheme_b_draw(-1, 5)

    def test_uniform_and_independent(self):
        rng = np.random.default_rng(2024)
        draws = np.array([scheme_b_draw(8, rng) for _ in range(9000)])
        assert draws.min() >= 0 and draws.max() <= 8
        for column in draws.T:
            assert chisquare(np.bincount(column, minlength=9)).pvalue > 1e-3
        joint = np.bincount(draws[:, 0] * 9 + draws[:, 1], minlength=81)
        assert chisquare(joint).pvalue > 1e-3


class TestEstimateBer:
    @pytest.mark.parametrize("scheme", [
        Conventional(delta0=0.4),
        SchemeA(n_block=100, delta0=0.9),
        SchemeB(n_block=100, k_max=8, k1=2, k2=5),
    ])
    def test_noiseless_is_error_free(self, scheme):
        params = ChannelParams(h1=0.95, sigma=0.0)
        est = estimate_ber(params, scheme, blocks=200, n_block=100, seed=3)
        assert est.errors == 0
        assert est.trials == 20_000

    def test_conventional_matches_block_formula(self, ref_params):
        est = estimate_ber(ref_params, Conventional(delta0=0.3), blocks=2000, n_block=100, seed=7)
        assert est.agrees_with(ber_block(ref_params, 0.3, 100), k=4.0)

    def test_short_block_first_symbol(self, ref_params):
        est = estimate_ber(ref_params, Conventional(delta0=0.5), blocks=100_000, n_block=2, seed=8)
        assert est.agrees_with(ber_block(ref_params, 0.5, 2), k=4.0)

    @pytest.mark.parametrize("scheme,randomize", [
        (SchemeA(n_block=1000), False),
        (SchemeA(n_block=1000), True),
        (Conventional(), True),
    ])
    def test_sweeping_matches_average(self, ref_params, scheme, randomize):
        est = estimate_ber(ref_params, scheme, blocks=200, n_block=1000, seed=11, randomize=randomize)
        assert est.agrees_with(avg_ber(ref_params), k=4.0)

    def test_scheme_b_random_draws(self, ref_params, caplog):
        scheme = SchemeB(n_block=1000, k_max=8, k1=0, k2=0)
        with caplog.at_level(logging.WARNING, logger="misalign.simulation"):
            est = estimate_ber(ref_params, scheme, blocks=200, seed=12, randomize=True)
        assert est.agrees_with(avg_ber(ref_params), k=5.0)
        assert "K1 = K2" in caplog.text

    def test_fixed_degenerate_draw_warns(self, ref_params, caplog):
        with caplog.at_level(logging.WARNING, logger="misalign.simulation"):
            estimate_ber(ref_params, SchemeB(n_block=10, k_max=2, k1=1, k2=1), blocks=2, seed=1, randomize=False)
        assert "offset stays at delta0" in caplog.text

    def test_stretched_schemes_draw_offsets_by_default(self, ref_params):
        scheme = SchemeA(n_block=200, delta0=0.3)
        assert estimate_ber(ref_params, scheme, blocks=50, seed=4) == estimate_ber(
            ref_params, scheme, blocks=50, seed=4, randomize=True
        )

    def test_conventional_keeps_delta0_by_default(self, ref_params):
        scheme = Conventional(delta0=0.3)
        assert estimate_ber(ref_params, scheme, blocks=50, n_block=20, seed=4) == estimate_ber(
            ref_params, scheme, blocks=50, n_block=20, seed=4, randomize=False
        )

    def test_deterministic(self, ref_params):
        scheme = SchemeA(n_block=200)
        first = estimate_ber(ref_params, scheme, blocks=50, seed=21, randomize=True)
        assert first == estimate_ber(ref_params, scheme, blocks=50, seed=21, randomize=True)

    def test_workers(self, ref_params):
        scheme = SchemeA(n_block=100)
        two = estimate_ber(ref_params, scheme, blocks=400, seed=5, workers=2)
        assert two == estimate_ber(ref_params, scheme, blocks=400, seed=5, workers=2)
        one = estimate_ber(ref_params, scheme, blocks=400, seed=5, workers=1)
        assert abs(one.ber - two.ber) <= 5.0 * np.hypot(one.std_err, two.std_err)

    def test_rejects_zero_blocks(self, ref_params):
        with pytest.raises(ParameterError):
            estimate_ber(ref_params, SchemeA(n_block=10), blocks=0)
        with pytest.raises(ParameterError):
            estimate_ber(ref_params, SchemeA(n_block=10), blocks=5, workers=0)


class TestEstimateEsinr:
    def test_aligned_is_conventional(self, fig_params):
        mean, err = estimate_esinr(fig_params, Conventional(), blocks=5, n_block=10, randomize=False)
        assert mean == pytest.approx(esinr(fig_params, 0.0), rel=1e-12)
        assert err == 0.0

    def test_scheme_a_reaches_closed_form(self, fig_params):
        mean, err = estimate_esinr(fig_params, SchemeA(n_block=1000), blocks=100, seed=2)
        assert mean == pytest.approx(avg_esinr_closed(fig_params), rel=5e-3)
        assert err < 1e-2

    def test_randomized_conventional(self, fig_params):
        mean, err = estimate_esinr(fig_params, Conventional(), blocks=2000, n_block=100, seed=3)
        assert mean == pytest.approx(avg_esinr_closed(fig_params), rel=2e-2)
        assert 0 < err < 0.05
