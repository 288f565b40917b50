import json
import shutil

import numpy as np
import pandas as pd
import pytest

from src.constants import (
    AXES_FILE, EVENTS_FILE, FDR_FILE, FEATURES_FILE, LABELS_FILE, PRESENCE_FILE, RESULT_TABLE_COLUMNS,
    RESULTS_FILE, RUN_META_FILE, Comparison,
)
from src.errors import StageInputError
from src.pipeline import Pipeline, RunReport, box_summary


def read_results(out_dir):
    return pd.read_csv(out_dir / RESULTS_FILE, dtype={"region_id": str})


def output_files(out_dir):
    return {path.relative_to(out_dir).as_posix(): path.read_bytes()
            for path in sorted(out_dir.rglob("*")) if path.is_file()}


class TestSyntheticRun:
    def test_every_output_written(self, synthetic_run):
        out = synthetic_run.config.out_dir
        for name in ("events.csv", "axes.csv", "features.csv", "model.json", "labels.csv",
                     "confusion.csv", "density.csv", "scatter.csv", "presence.csv", "results.csv",
                     "fdr.csv", "run_meta.json", "pvalues_1_26.csv", "boxplot_2_26.csv",
                     "percentiles_1_26.csv"):
            assert (out / name).exists(), name

    def test_one_test_per_cell_comparison_and_lag(self, synthetic_run):
        results = read_results(synthetic_run.config.out_dir)
        assert list(results.columns) == RESULT_TABLE_COLUMNS
        # three active cells, two lags, three comparisons
        assert len(results) == 3 * 2 * 3
        assert set(results["region_id"]) == {"A"}

    def test_labels_recover_the_generating_modes(self, synthetic_run):
        presence = pd.read_csv(synthetic_run.config.out_dir / PRESENCE_FILE, dtype={"region_id": str})
        for cell, v1, v2 in synthetic_run.spec.pairs:
            rows = presence[(presence["region_id"] == cell.region_id) & (presence["sub_index"] == cell.sub_index)]
            first = rows[rows["mode"] == "Shallow1"].sort_values("period_index")["bit"].to_numpy()
            second = rows[rows["mode"] == "Shallow2"].sort_values("period_index")["bit"].to_numpy()
            assert np.mean(first == v1) > 0.95
            assert np.mean(second == v2) > 0.95

    def test_association_signs(self, synthetic_run):
        results = read_results(synthetic_run.config.out_dir)
        within = results[results["comparison"] == Comparison.WITHIN.value]
        cross = results[results["comparison"] == Comparison.CROSS.value]
        assert within["log_odds"].median() > 0
        assert cross["log_odds"].median() < 0

    def test_fdr_table_covers_every_test(self, synthetic_run):
        fdr = pd.read_csv(synthetic_run.config.out_dir / FDR_FILE)
        assert len(fdr) == 18
        assert set(fdr["family"]) == {f"{c.value}:{lag}:26" for c in Comparison for lag in (1, 2)}

    def test_run_meta(self, synthetic_run):
        meta = json.loads((synthetic_run.config.out_dir / RUN_META_FILE).read_text())
        assert meta["seed"] == 1
        assert meta["eligible_cells"] == 3
        assert meta["tests"] == 18
        assert "out" not in meta["config"]
        assert "workers" not in meta["config"]
        assert meta["tie_rules"] == {
            "p_value": "chi_square >= observed",
            "log_odds_percentile": "log_odds < observed",
            "chi_square_rel_tolerance": 1e-12,
        }
        assert meta["confusion"]["Deep"]["Predicted deep"] > meta["confusion"]["Deep"]["Predicted shallow"]

    def test_report_rebuilt_from_disk(self, synthetic_run):
        rebuilt = RunReport.from_directory(synthetic_run.config.out_dir)
        assert [p.suffix for p in rebuilt.panels] == [p.suffix for p in synthetic_run.report.panels]
        for loaded, original in zip(rebuilt.panels, synthetic_run.report.panels):
            assert loaded.pvalues["test_id"].tolist() == original.pvalues["test_id"].tolist()
            assert loaded.pvalues["interesting"].tolist() == original.pvalues["interesting"].tolist()

    def test_panels_hold_every_test(self, synthetic_run):
        panels = synthetic_run.report.panels
        assert [(p.lag, p.periods_per_year) for p in panels] == [(1, 26), (2, 26)]
        for panel in panels:
            assert len(panel.pvalues) == 9
            assert panel.boxplot["comparison"].tolist() == ["WithinModes", "CrossModes"]


class TestDeterminism:
    def test_worker_count_does_not_change_outputs(self, synthetic_run, config_factory, tmp_path):
        catalog = synthetic_run.root / "synthetic.ndk"
        regions = synthetic_run.root / "regions.json"
        for workers, name in ((1, "serial"), (2, "parallel")):
            Pipeline(config_factory(catalog, regions, tmp_path / name, workers=workers, lags=(1,))).run()
        assert output_files(tmp_path / "serial") == output_files(tmp_path / "parallel")

    def test_resumed_analysis_matches(self, synthetic_run, config_factory, tmp_path):
        catalog = synthetic_run.root / "synthetic.ndk"
        regions = synthetic_run.root / "regions.json"
        config = config_factory(catalog, regions, tmp_path / "run", lags=(1,))
        pipeline = Pipeline(config)
        pipeline.run()
        expected = (tmp_path / "run" / RESULTS_FILE).read_text()

        (tmp_path / "run" / RESULTS_FILE).unlink()
        Pipeline(config).analyze()
        assert (tmp_path / "run" / RESULTS_FILE).read_text() == expected


class TestEdgeCases:
    def test_no_eligible_cells(self, synthetic_run, config_factory, tmp_path):
        config = config_factory(synthetic_run.root / "synthetic.ndk", synthetic_run.root / "regions.json",
                                tmp_path / "run", min_events=10_000)
        report = Pipeline(config).run()
        assert report.panels == []
        assert report.meta["notice"] == "no eligible cells"
        assert read_results(tmp_path / "run").empty

    def test_missing_stage_input(self, regions_file, config_factory, tmp_path):
        config = config_factory(tmp_path / "absent.ndk", regions_file, tmp_path / "empty")
        with pytest.raises(StageInputError):
            Pipeline(config).analyze()
        with pytest.raises(StageInputError):
            Pipeline(config).classify()

    def test_classify_resumes_from_saved_features(self, synthetic_run, config_factory, tmp_path):
        source = synthetic_run.config.out_dir
        resumed = tmp_path / "resumed"
        resumed.mkdir()
        for name in (EVENTS_FILE, AXES_FILE, FEATURES_FILE):
            shutil.copy(source / name, resumed / name)
        config = config_factory(synthetic_run.root / "synthetic.ndk", synthetic_run.root / "regions.json", resumed)
        labels = Pipeline(config).classify()
        expected = pd.read_csv(source / LABELS_FILE, dtype={"event_id": str})
        assert labels["event_id"].tolist() == expected["event_id"].tolist()
        assert labels["label"].tolist() == expected["label"].tolist()


class TestBoxSummary:
    def test_tukey_whiskers(self):
        summary = box_summary([1.0, 2.0, 3.0, 4.0, 100.0])
        assert (summary["q1"], summary["median"], summary["q3"]) == (2.0, 3.0, 4.0)
        assert (summary["whisker_low"], summary["whisker_high"]) == (1.0, 4.0)
        assert summary["outliers"] == "100.0"
        assert summary["n"] == 5

    def test_empty(self):
        summary = box_summary([])
        assert summary["n"] == 0
        assert np.isnan(summary["median"])
