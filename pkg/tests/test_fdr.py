import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.constants import FDR_TABLE_COLUMNS, Comparison
from src.entities.table import AssociationResult, ContingencyTable2x2
from src.errors import ConfigError, EmptyInputError
from src.fdr import bh_select, outcomes_frame, select_families


def result(region_id, sub_index, p_value, comparison=Comparison.WITHIN, lag=1, periods=26):
    return AssociationResult(
        region_id=region_id, sub_index=sub_index, comparison=comparison, lag=lag,
        periods_per_year=periods, table=ContingencyTable2x2(1, 1, 1, 1), chi_square=0.0,
        log_odds=0.0, p_value=p_value, log_odds_percentile=0.5, n_permutations=100, seed=0,
    )


class TestBenjaminiHochberg:
    def test_worked_example(self):
        outcome = bh_select({"a": 0.01, "b": 0.02, "c": 0.03, "d": 0.5, "e": 0.9}, q=0.1)
        assert outcome.threshold_rank == 3
        assert outcome.selected == ["a", "b", "c"]
        assert outcome.interesting == {"a": True, "b": True, "c": True, "d": False, "e": False}

    def test_step_up_rescues_earlier_ranks(self):
        outcome = bh_select([("w", 0.04), ("x", 0.041), ("y", 0.042), ("z", 0.043)], q=0.05)
        assert outcome.threshold_rank == 4

    def test_nothing_selected(self):
        outcome = bh_select({"a": 0.2, "b": 0.6}, q=0.05)
        assert outcome.threshold_rank == 0
        assert outcome.selected == []

    def test_ties_ordered_by_id(self):
        outcome = bh_select({"b": 0.01, "a": 0.01, "c": 0.001}, q=0.05)
        assert [test_id for test_id, _ in outcome.sorted_p] == ["c", "a", "b"]

    def test_rows(self):
        rows = bh_select({"a": 0.01, "b": 0.5}, q=0.1).rows("fam")
        assert [row["rank"] for row in rows] == [1, 2]
        assert rows[0]["bh_threshold"] == pytest.approx(0.05)
        assert rows[1]["bh_threshold"] == pytest.approx(0.1)
        assert {row["family"] for row in rows} == {"fam"}

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            bh_select({}, q=0.1)

    @pytest.mark.parametrize("q", [0.0, 1.0, -0.1])
    def test_bad_q(self, q):
        with pytest.raises(ValueError):
            bh_select({"a": 0.1}, q=q)

    def test_p_value_out_of_range(self):
        with pytest.raises(ValueError):
            bh_select({"a": 1.5}, q=0.1)

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=60),
           st.floats(0.001, 0.5))
    def test_matches_brute_force(self, p_values, q):
        items = {f"t{i:03d}": p for i, p in enumerate(p_values)}
        outcome = bh_select(items, q)

        ordered = sorted(p_values)
        m = len(ordered)
        expected_k = max((k for k in range(1, m + 1) if ordered[k - 1] <= k * q / m), default=0)
        assert outcome.threshold_rank == expected_k

        chosen = [items[t] for t in outcome.selected]
        rest = [p for t, p in items.items() if not outcome.interesting[t]]
        if chosen and rest:
            assert max(chosen) <= min(rest)


class TestFamilies:
    def test_pooled_scope_groups_by_comparison_lag_and_periods(self):
        results = [
            result("a", 0, 0.001), result("b", 0, 0.002),
            result("a", 0, 0.5, comparison=Comparison.CROSS),
            result("a", 0, 0.001, lag=2),
        ]
        outcomes = select_families(results, q=0.05)
        assert list(outcomes) == ["CrossModes:1:26", "WithinModes:1:26", "WithinModes:2:26"]
        assert outcomes["WithinModes:1:26"].m == 2
        assert outcomes["WithinModes:1:26"].selected == ["a:0:WithinModes:1:26", "b:0:WithinModes:1:26"]
        assert outcomes["CrossModes:1:26"].selected == []

    def test_per_region_scope(self):
        results = [result("a", 0, 0.001), result("a", 1, 0.9), result("b", 0, 0.04)]
        outcomes = select_families(results, q=0.05, scope="per-region")
        assert list(outcomes) == ["WithinModes:1:26:a", "WithinModes:1:26:b"]
        assert outcomes["WithinModes:1:26:b"].threshold_rank == 1

    def test_scope_changes_selection(self):
        results = [result("a", i, 0.03) for i in range(3)] + [result("b", i, 0.9) for i in range(30)]
        pooled = select_families(results, q=0.05)
        split = select_families(results, q=0.05, scope="per-region")
        assert pooled["WithinModes:1:26"].threshold_rank == 0
        assert split["WithinModes:1:26:a"].threshold_rank == 3

    def test_unknown_scope(self):
        with pytest.raises(ConfigError):
            select_families([result("a", 0, 0.1)], q=0.05, scope="global")

    def test_frame(self):
        frame = outcomes_frame(select_families([result("a", 0, 0.01), result("a", 1, 0.2)], q=0.05))
        assert list(frame.columns) == FDR_TABLE_COLUMNS
        assert list(frame.columns[:5]) == ["test_id", "p_value", "rank", "bh_threshold", "interesting"]
        assert frame["interesting"].tolist() == [True, False]
        assert frame["family"].unique().tolist() == ["WithinModes:1:26"]
