import math

import numpy as np
import pytest

from generator import ConjugatedOperator
from hkspace import isometric_coordinates
from models import (
    CoeffVec,
    Grouping,
    InvalidPartition,
    NoConvergence,
    NormMethod,
    OperatorSpec,
    OutOfRange,
    SpaceConfig,
    SymbolKind,
)
from spectra_lab import (
    adaptive_simpson,
    block_norms,
    fit_loglog,
    group_growth_scan,
    line_integral,
    make_grouping,
    nongeneration_witness,
    partial_sum_projection_norms,
    resolvent_blowup_scan,
    validate_grouping,
    vertical_integral_scan,
)


class TestGroupings:
    def test_uniform(self):
        grouping = make_grouping(7, "uniform", size=3)
        assert grouping.blocks == [[1, 2, 3], [4, 5, 6], [7]]
        assert grouping.max_block == 3

    def test_random_covers_everything(self):
        grouping = make_grouping(100, "random", size=5, seed=3)
        assert sorted(j for b in grouping.blocks for j in b) == list(range(1, 101))
        assert grouping.max_block <= 5

    def test_random_is_seeded(self):
        assert make_grouping(50, "random", size=4, seed=1) == make_grouping(50, "random", size=4, seed=1)

    def test_explicit(self):
        grouping = make_grouping(4, "explicit", blocks=[[1, 3], [2, 4]])
        assert grouping.blocks == [[1, 3], [2, 4]]

    @pytest.mark.parametrize("blocks", [[[1, 2], [2, 3]], [[1], [3]], [[1, 2], []], [[0, 1, 2, 3]]])
    def test_invalid_partitions(self, blocks):
        with pytest.raises(InvalidPartition):
            validate_grouping(blocks, 3)

    def test_unknown_kind(self):
        with pytest.raises(InvalidPartition):
            make_grouping(5, "fibonacci")


def test_fit_loglog_recovers_power():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    slope, residual = fit_loglog(x, 3.0 * x ** 1.5)
    assert slope == pytest.approx(1.5)
    assert residual < 1e-12
    with pytest.raises(OutOfRange):
        fit_loglog([1.0, 2.0], [1.0, 0.0])


class TestPartialSums:
    def test_k1_singleton_prefixes_follow_sqrt_law(self):
        N = 65
        result = partial_sum_projection_norms(1, make_grouping(N, "uniform", size=1), N, max_prefix=64)
        expected = np.sqrt(np.arange(1, 65) + 1.0)
        np.testing.assert_allclose(result.values, expected, atol=1e-9)
        assert result.contract_passed
        assert result.monotone_flag

    def test_three_singletons_give_two(self):
        result = partial_sum_projection_norms(1, make_grouping(6, "uniform", size=1), 6, max_prefix=3)
        assert result.values[-1] == pytest.approx(2.0)

    def test_k2_prefix_norms_grow(self):
        result = partial_sum_projection_norms(2, make_grouping(64, "uniform", size=1), 64, max_prefix=32)
        picks = [result.values[M - 1] for M in (4, 8, 16, 32)]
        assert all(b > a for a, b in zip(picks, picks[1:]))
        assert fit_loglog([4, 8, 16, 32], picks)[0] > 0

    def test_block_norms_column(self):
        result = partial_sum_projection_norms(1, make_grouping(30, "uniform", size=3), 30)
        assert len(result.grid) == 9
        assert all(v >= 1.0 for v in result.columns["block_norm"])

    def test_grouping_must_match_truncation(self):
        with pytest.raises(InvalidPartition):
            partial_sum_projection_norms(1, make_grouping(10, "uniform", size=1), 12)

    @pytest.mark.parametrize("blocks", [[[1, 2], [2, 3], [4]], [[1], [3], [4]]])
    def test_prebuilt_grouping_is_validated(self, blocks):
        grouping = Grouping(blocks=blocks, N=4)
        with pytest.raises(InvalidPartition):
            partial_sum_projection_norms(1, grouping, 4)
        with pytest.raises(InvalidPartition):
            block_norms(SpaceConfig(k=1), grouping)


class TestBlowup:
    @pytest.mark.parametrize("k", [1, 2])
    def test_slope_between_one_and_k_plus_one(self, make_generator, k):
        g = make_generator(k=k, N_max=1024)
        result = resolvent_blowup_scan(g, 100, np.logspace(-3, 0, 8)[::-1], 1024)
        assert result.grid == sorted(result.grid)
        assert 0.95 <= result.fitted_slope <= k + 1.1
        assert not any(result.columns["violated"])
        assert result.contract_passed
        assert all(n >= lo - 1e-8 for n, lo in zip(result.values, result.columns["lower_bound"]))

    def test_k1_reports_closed_form_bound(self, make_generator):
        result = resolvent_blowup_scan(make_generator(N_max=256), 10, [0.1, 1.0, 10.0], 256)
        assert all(np.isfinite(result.columns["remark_bound"]))
        # far from the axis the resolvent stays small
        assert result.values[-1] <= 1.0

    def test_threads_do_not_change_results(self, make_generator):
        g = make_generator(N_max=256)
        grid = [0.01, 0.1, 1.0]
        serial = resolvent_blowup_scan(g, 20, grid, 256, threads=1)
        parallel = resolvent_blowup_scan(g, 20, grid, 256, threads=3)
        assert serial.values == parallel.values

    def test_grid_must_be_positive(self, make_generator):
        with pytest.raises(OutOfRange):
            resolvent_blowup_scan(make_generator(N_max=64), 5, [0.0, 1.0], 64)

    def test_lp_norms_are_flagged_lower_bounds(self, make_generator):
        g = make_generator(p=3.0, N_max=64)
        result = resolvent_blowup_scan(g, 10, [0.1, 1.0], 64)
        assert not any(result.columns["violated"])
        assert all(np.isnan(result.columns["remark_bound"]))
        assert any("lower bounds" in note for note in result.notes)

    @pytest.mark.slow
    def test_bounds_hold_across_anchors(self, make_generator):
        g = make_generator(N_max=8192)
        for anchor in np.unique(np.logspace(0, np.log10(8000), 10).astype(int)):
            result = resolvent_blowup_scan(g, int(anchor), np.logspace(-3, 1, 9), 8192)
            assert not any(result.columns["violated"]), anchor

    @pytest.mark.slow
    @pytest.mark.parametrize("k", [1, 2])
    def test_slope_at_large_truncation(self, make_generator, k):
        g = make_generator(k=k, N_max=8192)
        result = resolvent_blowup_scan(g, 1000, np.logspace(-3, 0, 8), 8192)
        assert 0.95 <= result.fitted_slope <= k + 1.1


class TestGroupGrowth:
    @pytest.mark.parametrize("k", [1, 2])
    def test_polynomial_growth(self, make_generator, k):
        g = make_generator(k=k, N_max=256)
        t_grid = [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
        result = group_growth_scan(g, t_grid, 256)
        assert result.values[0] == 1.0
        assert result.values[-1] > result.values[1]
        assert result.fitted_slope <= k + 0.1
        assert result.contract_passed

    def test_k1_rate_is_small_at_t100(self, make_generator):
        result = group_growth_scan(make_generator(N_max=512), [1.0, 10.0, 100.0], 512)
        assert abs(math.log(result.values[-1])) / 100 <= 0.05

    def test_grid_must_increase(self, make_generator):
        with pytest.raises(OutOfRange):
            group_growth_scan(make_generator(N_max=64), [2.0, 1.0], 64)

    def test_lp_values_are_flagged(self, make_generator):
        result = group_growth_scan(make_generator(p=3.0, N_max=64), [0.0, 1.0, 4.0], 64)
        assert result.columns["lower_bound_only"] == [True, True, True]
        assert result.values[0] == 1.0
        assert all(v >= 1.0 - 1e-12 for v in result.values)

    def test_power_failure_reports_its_time(self, make_generator, monkeypatch):
        from config import Config

        monkeypatch.setattr(Config, "POWER_MAX_ITER", 2)
        with pytest.raises(NoConvergence, match="t=3") as info:
            group_growth_scan(make_generator(N_max=64), [3.0, 7.0], 64, method=NormMethod.POWER, threads=1)
        assert info.value.point == 3.0

    @pytest.mark.slow
    @pytest.mark.parametrize("k", [1, 2])
    def test_growth_at_large_truncation(self, make_generator, k):
        g = make_generator(k=k, N_max=4096)
        result = group_growth_scan(g, [0.0, 1.0, 10.0, 100.0], 4096)
        assert result.values[0] == 1.0
        assert all(b > a for a, b in zip(result.values[1:], result.values[2:]))
        assert result.fitted_slope <= k + 0.1
        assert result.contract_passed
        if k == 1:
            assert abs(math.log(result.values[-1])) / 100 <= 0.05


class TestAdaptiveSimpson:
    def test_polynomial_exact(self):
        value, error = adaptive_simpson(lambda s: s ** 3 - 2 * s, 0.0, 2.0)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_lorentzian(self):
        value, _ = adaptive_simpson(lambda s: 1.0 / (0.01 + s * s), -10.0, 10.0, tol=1e-10)
        assert value == pytest.approx(20.0 * math.atan(100.0), rel=1e-8)

    def test_automatic_half_width(self):
        value, S = line_integral(lambda s: 1.0 / (1.0 + s * s), np.array([0.0]), 1.0)
        assert value == pytest.approx(math.pi, rel=1e-5)
        assert S > 1e5


class TestVerticalIntegral:
    def test_first_basis_vector_gives_two_pi(self, make_generator):
        g = make_generator(N_max=8)
        e1 = CoeffVec.basis_vector(1, 8)
        result = vertical_integral_scan(g, [1.0], e1, N=8)
        assert result.values[0] == pytest.approx(2 * math.pi, rel=1e-5)

    def test_single_coordinate_gives_pi_over_a(self, make_generator):
        g = make_generator(N_max=1)
        result = vertical_integral_scan(g, [0.5, 1.0, 2.0], CoeffVec.basis_vector(1, 1))
        np.testing.assert_allclose(result.values, [2 * math.pi, math.pi, math.pi / 2], rtol=1e-5)

    def test_pairing_with_itself(self, make_generator):
        g = make_generator(N_max=4)
        e1 = CoeffVec.basis_vector(1, 4)
        result = vertical_integral_scan(g, [1.0], e1, e1)
        # |<R^2 e_1, e_1>| = 2/(a^2 + s^2)
        assert result.columns["pairing"][0] == pytest.approx(2 * math.pi, rel=1e-5)

    def test_scaling_contract(self, make_generator):
        g = make_generator(N_max=16)
        result = vertical_integral_scan(g, np.logspace(-1, 1, 5), CoeffVec.basis_vector(1, 16))
        assert result.contract_passed
        assert result.grid == sorted(result.grid)

    def test_adjoint_matches_dense_oracle(self, make_generator, rng):
        g = make_generator(N_max=6)
        x = CoeffVec(entries=rng.standard_normal(6))
        y = CoeffVec(entries=rng.standard_normal(6))
        a, S = 0.7, 40.0
        result = vertical_integral_scan(g, [a], x, y, S=S)
        y_iso = isometric_coordinates(g.space, y.entries)
        f = g.symbol.window(6)

        def oracle(s):
            M = ConjugatedOperator(g, OperatorSpec.resolvent(complex(a, s)), 6).dense()
            return float(np.linalg.norm(M.conj().T @ y_iso) ** 2)

        expected, _ = line_integral(oracle, f, a, S)
        assert result.columns["adjoint"][0] == pytest.approx(expected, rel=1e-6)

    def test_left_half_plane_mirrors_right(self, make_generator):
        g = make_generator(N_max=4)
        e1 = CoeffVec.basis_vector(1, 4)
        right = vertical_integral_scan(g, [1.0], e1, S=100.0)
        left = vertical_integral_scan(g, [1.0], e1, S=100.0, half_plane="left")
        assert left.values[0] == pytest.approx(right.values[0], rel=1e-8)

    def test_errors(self, make_generator):
        g = make_generator(N_max=4)
        e1 = CoeffVec.basis_vector(1, 4)
        with pytest.raises(OutOfRange):
            vertical_integral_scan(g, [-1.0], e1)
        with pytest.raises(OutOfRange):
            vertical_integral_scan(g, [1.0], e1, half_plane="up")

    @pytest.mark.slow
    def test_first_basis_vector_at_large_truncation(self, make_generator):
        g = make_generator(N_max=2048)
        e1 = CoeffVec.basis_vector(1, 2048)
        a = np.array([0.1, 0.2, 0.4, 0.8])
        result = vertical_integral_scan(g, a, e1, e1)
        assert result.contract_passed
        np.testing.assert_allclose(result.values, 2 * math.pi / a, rtol=1e-4)
        np.testing.assert_allclose(result.columns["pairing"], 2 * math.pi / a, rtol=1e-4)
        assert max(result.columns["normalized"]) <= 2 * math.pi * (1 + 1e-4)


class TestNongeneration:
    def test_sqrt_witness_grows(self):
        result = nongeneration_witness([64, 256, 1024], 1.0)
        assert all(b > a for a, b in zip(result.values, result.values[1:]))
        assert result.fitted_slope > 0
        assert result.contract_passed

    def test_log_contrast_converges(self):
        result = nongeneration_witness([64, 256, 1024], 1.0, symbol_kind=SymbolKind.LOG)
        v = result.values
        assert abs(v[-1] / v[-2] - 1.0) <= 0.05
        assert abs(v[-1] - v[-2]) <= abs(v[1] - v[0])
        assert result.contract_passed

    @pytest.mark.slow
    def test_log_contrast_settles_at_scale(self):
        result = nongeneration_witness([64, 256, 1024, 4096], 1.0, symbol_kind=SymbolKind.LOG)
        v = result.values
        assert abs(v[-1] / v[-2] - 1.0) <= 0.05
        assert result.contract_passed

    def test_time_zero_is_identity(self):
        result = nongeneration_witness([8, 16, 32], 0.0)
        assert result.values == [1.0, 1.0, 1.0]
        assert result.contract_passed

    @pytest.mark.slow
    def test_acceptance_scale(self):
        result = nongeneration_witness([64, 256, 1024, 4096], 1.0, method=NormMethod.MATRIX_FREE)
        assert result.values[-1] > 20.0
