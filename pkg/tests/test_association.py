import itertools
import math

import numpy as np
import pytest
from scipy import stats

from src.association import (
    asymptotic_p, chi_square, contingency, derive_seed, lagged_pair, log_odds, permutation_calibrate,
    pooled_control, run_test,
)
from src.constants import Comparison
from src.entities.table import ContingencyTable2x2
from src.errors import LengthMismatchError, SeriesTooShortError
from src.fdr import bh_select, select_families
from src.synthetic import MarkovPairSpec, exact_permutation_p, gen_markov_pair


class TestTables:
    def test_lagged_vectors(self):
        pair = lagged_pair((1, 0, 1), (0, 1, 0), lag=1)
        assert pair.A.tolist() == [1, 0, 0, 1]
        assert pair.B.tolist() == [0, 1, 1, 0]
        assert pair.C.tolist() == [0, 1, 1, 0]
        assert (pair.lag, pair.n) == (1, 3)

    def test_lag_too_long(self):
        with pytest.raises(SeriesTooShortError):
            lagged_pair((1, 0, 1), (0, 1, 0), lag=2)

    def test_unsupported_lag(self):
        with pytest.raises(ValueError):
            lagged_pair((1, 0, 1, 0, 1), (0, 1, 0, 1, 0), lag=3)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatchError):
            lagged_pair((1, 0, 1), (0, 1), lag=1)

    def test_contingency_counts(self):
        pair = lagged_pair((1, 0, 1), (0, 1, 0), lag=1)
        assert contingency(pair.A, pair.B).as_tuple() == (0, 2, 2, 0)
        assert contingency(pair.C, pair.B).as_tuple() == (2, 0, 0, 2)

    def test_counts_sum_to_length(self):
        rng = np.random.default_rng(5)
        x, y = rng.integers(0, 2, 50), rng.integers(0, 2, 50)
        assert contingency(x, y).total == 50


class TestStatistics:
    def test_chi_square_example(self):
        assert chi_square(ContingencyTable2x2(10, 5, 5, 10)) == pytest.approx(10.0 / 3.0, abs=1e-9)

    def test_perfect_association(self):
        table = ContingencyTable2x2(5, 0, 0, 5)
        assert chi_square(table) == pytest.approx(10.0)
        assert log_odds(table) == pytest.approx(4.7958, abs=1e-4)

    def test_log_odds_example(self):
        assert log_odds(ContingencyTable2x2(10, 5, 5, 10)) == pytest.approx(1.2933, abs=1e-4)

    def test_no_association(self):
        table = ContingencyTable2x2(5, 5, 5, 5)
        assert chi_square(table) == 0.0
        assert log_odds(table) == pytest.approx(0.0)

    def test_zero_margin(self):
        table = ContingencyTable2x2(3, 2, 0, 0)
        assert table.has_zero_margin
        assert chi_square(table) == 0.0
        assert math.isfinite(log_odds(table))

    def test_log_odds_sign_flips_with_columns(self):
        forward = log_odds(ContingencyTable2x2(7, 2, 3, 9))
        swapped = log_odds(ContingencyTable2x2(2, 7, 9, 3))
        assert swapped == pytest.approx(-forward)

    def test_asymptotic_tail(self):
        assert asymptotic_p(3.841458820694124) == pytest.approx(0.05, abs=1e-9)


class TestPermutation:
    def test_constant_vectors(self):
        result = run_test(np.ones(20), np.ones(20), 1, Comparison.WITHIN, n_perm=200, seed=1)
        assert result.p_value == 1.0
        assert result.chi_square == 0.0
        assert result.degenerate

    def test_alternating_vectors(self):
        v1 = np.tile([1, 0], 20)
        v2 = np.tile([0, 1], 20)
        within = run_test(v1, v2, 1, Comparison.WITHIN, n_perm=500, seed=2)
        cross = run_test(v1, v2, 1, Comparison.CROSS, n_perm=500, seed=2)
        assert within.log_odds < 0
        assert cross.log_odds > 0
        assert within.p_value < 0.01
        assert cross.log_odds_percentile > 0.99

    def test_same_seed_same_result(self):
        v1, v2 = gen_markov_pair(MarkovPairSpec(length=120, self_excite=0.3, seed=9))
        first = run_test(v1, v2, 2, Comparison.CROSS, n_perm=3000, seed=77)
        second = run_test(v1, v2, 2, Comparison.CROSS, n_perm=3000, seed=77)
        assert first == second

    def test_outputs_in_range(self):
        v1, v2 = gen_markov_pair(MarkovPairSpec(length=60, seed=4))
        result = run_test(v1, v2, 1, Comparison.WITHIN, n_perm=2500, seed=3,
                          region_id="r", sub_index=4, periods_per_year=6)
        assert 0.0 <= result.p_value <= 1.0
        assert 0.0 <= result.log_odds_percentile <= 1.0
        assert result.table.total == 2 * (60 - 1)
        assert result.test_id == "r:4:WithinModes:1:6"
        assert result.family == "WithinModes:1:6"

    def test_pooled_control(self):
        v = np.tile([1, 1, 0, 0], 10)
        result = pooled_control(v, lag=2, n_perm=500, seed=5, region_id="x", sub_index=1)
        assert result.comparison is Comparison.POOLED
        assert result.table.total == 40 - 2
        # v[t] and v[t+2] always differ
        assert result.table.n11 == 0
        assert result.log_odds < 0

    @pytest.mark.parametrize("comparison", list(Comparison))
    def test_monte_carlo_matches_enumeration(self, comparison):
        v1 = np.array([1, 1, 0, 1, 0, 0])
        v2 = np.array([0, 1, 1, 0, 0, 1])
        exact = exact_permutation_p(v1, v2, 1, comparison)
        sampled = run_test(v1, v2, 1, comparison, n_perm=20000, seed=13).p_value
        assert sampled == pytest.approx(exact, abs=0.03)

    @pytest.mark.slow
    def test_monte_carlo_matches_enumeration_up_to_length_six(self):
        # swapping the vectors or complementing both leaves the exact p unchanged
        seen = set()
        seed = 0
        for n in range(3, 7):
            for bits1, bits2 in itertools.product(itertools.product((0, 1), repeat=n), repeat=2):
                flip1 = tuple(1 - b for b in bits1)
                flip2 = tuple(1 - b for b in bits2)
                key = min((bits1, bits2), (bits2, bits1), (flip1, flip2), (flip2, flip1))
                if key in seen:
                    continue
                seen.add(key)
                for lag in (1, 2):
                    if n <= lag + 1:
                        continue
                    for comparison in (Comparison.WITHIN, Comparison.CROSS):
                        seed += 1
                        exact = exact_permutation_p(bits1, bits2, lag, comparison)
                        sampled = run_test(bits1, bits2, lag, comparison, n_perm=10000, seed=seed).p_value
                        assert sampled == pytest.approx(exact, abs=0.03), (bits1, bits2, lag, comparison)

    @pytest.mark.slow
    def test_pooled_monte_carlo_matches_enumeration_up_to_length_six(self):
        seed = 0
        for n in range(3, 7):
            for bits in itertools.product((0, 1), repeat=n):
                for lag in (1, 2):
                    if n <= lag + 1:
                        continue
                    seed += 1
                    exact = exact_permutation_p(bits, None, lag, Comparison.POOLED)
                    sampled = pooled_control(bits, lag, n_perm=10000, seed=seed).p_value
                    assert sampled == pytest.approx(exact, abs=0.03), (bits, lag)

    @pytest.mark.slow
    def test_monte_carlo_matches_enumeration_at_length_seven(self):
        rng = np.random.default_rng(21)
        for _ in range(40):
            v1, v2 = rng.integers(0, 2, 7), rng.integers(0, 2, 7)
            for comparison in Comparison:
                for lag in (1, 2):
                    exact = exact_permutation_p(v1, v2, lag, comparison)
                    sampled = run_test(v1, v2, lag, comparison, n_perm=10000,
                                       seed=int(rng.integers(1 << 31))).p_value
                    assert sampled == pytest.approx(exact, abs=0.03)

    def test_calibrate_matches_packaged_result(self):
        v1, v2 = gen_markov_pair(MarkovPairSpec(length=80, self_excite=0.3, seed=6))
        p_value, percentile, table, chi, lo = permutation_calibrate(v1, v2, 1, Comparison.CROSS,
                                                                    n_perm=1500, seed=8)
        result = run_test(v1, v2, 1, Comparison.CROSS, n_perm=1500, seed=8)
        assert (p_value, percentile) == (result.p_value, result.log_odds_percentile)
        assert table == result.table
        assert (chi, lo) == (result.chi_square, result.log_odds)
        assert table.total == 2 * (80 - 1)


class TestSyntheticOracles:
    @pytest.mark.slow
    def test_null_p_values_are_uniform(self):
        results = []
        for cell in range(1000):
            v1, v2 = gen_markov_pair(MarkovPairSpec(length=884, seed=5000 + cell))
            results.append(run_test(v1, v2, 1, Comparison.WITHIN, n_perm=1000, seed=cell,
                                    region_id="null", sub_index=cell))
        p_values = np.array([r.p_value for r in results])
        assert stats.kstest(p_values, "uniform").statistic <= 0.05
        outcome = bh_select([(r.test_id, r.p_value) for r in results], q=0.01)
        assert outcome.threshold_rank <= 30

    @pytest.mark.slow
    def test_strong_self_excitation_is_significant(self):
        significant = 0
        for seed in range(100):
            v1, v2 = gen_markov_pair(MarkovPairSpec(length=884, self_excite=0.4, seed=seed))
            significant += run_test(v1, v2, 1, Comparison.WITHIN, n_perm=1000, seed=seed).p_value < 0.01
        assert significant >= 95

    @pytest.mark.slow
    def test_selected_log_odds_recover_the_coupling(self):
        recovered = 0
        for replicate in range(100):
            results = []
            for cell in range(9):
                spec = MarkovPairSpec(length=884, self_excite=0.4, cross_inhibit=0.4,
                                      seed=derive_seed(replicate, cell))
                v1, v2 = gen_markov_pair(spec)
                for comparison in (Comparison.WITHIN, Comparison.CROSS):
                    results.append(run_test(v1, v2, 1, comparison, n_perm=1000,
                                            seed=derive_seed(replicate, cell, comparison.value),
                                            region_id=f"r{replicate}", sub_index=cell))
            outcomes = select_families(results, q=0.01)
            log_odds_by_id = {r.test_id: r.log_odds for r in results}
            within = [log_odds_by_id[t] for t in outcomes["WithinModes:1:26"].selected]
            cross = [log_odds_by_id[t] for t in outcomes["CrossModes:1:26"].selected]
            if within and cross and np.median(within) > 0 and np.median(cross) < 0:
                recovered += 1
        assert recovered >= 95


class TestSeeds:
    def test_derived_seed_is_stable(self):
        assert derive_seed(42, "r", 3, "WithinModes", 1, 26) == derive_seed(42, "r", 3, "WithinModes", 1, 26)

    def test_derived_seed_depends_on_every_part(self):
        base = derive_seed(42, "r", 3, "WithinModes", 1, 26)
        assert base != derive_seed(43, "r", 3, "WithinModes", 1, 26)
        assert base != derive_seed(42, "r", 3, "CrossModes", 1, 26)
        assert base != derive_seed(42, "r", 3, "WithinModes", 2, 26)

    def test_derived_seed_range(self):
        assert 0 <= derive_seed(0, "anything") < 2 ** 63
