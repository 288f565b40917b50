"""
Pipeline class orchestrating ingest -> features -> classify -> analyze -> report.

Each stage persists its outputs in the run directory so later stages can be
resumed from disk. A stage collects everything it produces in memory and
writes it only once the stage has finished, so a failure leaves no partial
outputs behind.
"""

import json
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .association import derive_seed, run_test
from .catalog import (
    axes_to_frame, event_table_csv, events_to_frame, filter_events, parse_origin_time, read_event_table,
    read_ndk_files, span_window,
)
from .classifier import ModeClassifier, confusion_table
from .config import RunConfig
from .constants import (
    AXES_FILE, CHI_SQUARE_REL_TOLERANCE, CONFUSION_FILE, DENSITY_FILE, EVENTS_FILE, FDR_FILE,
    FEATURE_TABLE_COLUMNS, FEATURES_FILE, LABEL_TABLE_COLUMNS, LABELS_FILE, MODEL_FILE,
    P_VALUE_TIE_RULE, PERCENTILE_TIE_RULE, POOLED_MODE, PRESENCE_FILE, PRESENCE_TABLE_COLUMNS,
    RESULT_TABLE_COLUMNS, RESULTS_FILE, RUN_META_FILE,
    SCATTER_FILE, Comparison, DepthClass, FeatureQuality, ModeLabel, Stage,
)
from .entities.record import MomentTensorRecord
from .entities.table import AssociationResult
from .errors import StageInputError
from .fdr import outcomes_frame, select_families
from .grid import build_presence, eligible_cells, load_regions, make_grid
from .tensor import extract_features

logger = logging.getLogger(__name__)

TESTED_COMPARISONS = (Comparison.WITHIN, Comparison.CROSS, Comparison.POOLED)
BOX_COMPARISONS = (Comparison.WITHIN, Comparison.CROSS)

PVALUE_COLUMNS = ["comparison", "family", "test_id", "rank", "p_value", "bh_line", "interesting"]
BOX_COLUMNS = ["comparison", "q1", "median", "q3", "whisker_low", "whisker_high", "n", "outliers"]
PERCENTILE_COLUMNS = ["comparison", "test_id", "log_odds_percentile"]


def _test_id(row) -> str:
    return f"{row.region_id}:{row.sub_index}:{row.comparison}:{row.lag}:{row.periods_per_year}"


def panel_suffix(lag: int, periods_per_year: int) -> str:
    return f"{lag}_{periods_per_year}"


# =============================================================================
# REPORT
# =============================================================================
def box_summary(values: Sequence[float]) -> Dict[str, object]:
    """Quartiles, Tukey whiskers (1.5 IQR) and outliers of a sample."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return {"q1": np.nan, "median": np.nan, "q3": np.nan, "whisker_low": np.nan,
                "whisker_high": np.nan, "n": 0, "outliers": ""}
    q1, median, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    outliers = v[(v < q1 - 1.5 * iqr) | (v > q3 + 1.5 * iqr)]
    return {
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
        "whisker_low": float(inside.min()),
        "whisker_high": float(inside.max()),
        "n": int(v.size),
        "outliers": ";".join(repr(float(x)) for x in outliers),
    }


@dataclass
class Panel:
    """Plot data for one (lag, periods_per_year) combination."""
    lag: int
    periods_per_year: int
    pvalues: pd.DataFrame
    boxplot: pd.DataFrame
    percentiles: pd.DataFrame

    @property
    def suffix(self) -> str:
        return panel_suffix(self.lag, self.periods_per_year)

    def selected(self, comparison: Comparison) -> pd.DataFrame:
        rows = self.pvalues[self.pvalues["comparison"] == comparison.value]
        return rows[rows["interesting"]]


@dataclass
class RunReport:
    """Everything the figures show, derived from the results and FDR tables."""
    panels: List[Panel] = field(default_factory=list)
    meta: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_frames(cls, results: pd.DataFrame, fdr: pd.DataFrame,
                    meta: Optional[Dict[str, object]] = None) -> "RunReport":
        meta = dict(meta or {})
        if results.empty:
            return cls(panels=[], meta=meta)

        results = results.copy()
        results["test_id"] = [_test_id(row) for row in results.itertuples(index=False)]
        joined = results.merge(
            fdr[["test_id", "family", "rank", "bh_threshold", "interesting"]],
            on="test_id", how="left", validate="one_to_one",
        )
        joined["interesting"] = joined["interesting"].fillna(False).astype(bool)

        panels = []
        combos = sorted({(int(lag), int(ppy)) for lag, ppy in zip(joined["lag"], joined["periods_per_year"])})
        for lag, ppy in combos:
            subset = joined[(joined["lag"] == lag) & (joined["periods_per_year"] == ppy)]
            subset = subset.sort_values(["comparison", "family", "rank", "test_id"], kind="mergesort")

            pvalues = pd.DataFrame({
                "comparison": subset["comparison"],
                "family": subset["family"],
                "test_id": subset["test_id"],
                "rank": subset["rank"].astype(int),
                "p_value": subset["p_value"],
                "bh_line": subset["bh_threshold"],
                "interesting": subset["interesting"],
            }, columns=PVALUE_COLUMNS).reset_index(drop=True)

            boxes, percentiles = [], []
            for comparison in BOX_COMPARISONS:
                chosen = subset[(subset["comparison"] == comparison.value) & subset["interesting"]]
                boxes.append({"comparison": comparison.value, **box_summary(chosen["log_odds"])})
                percentiles.extend(
                    {"comparison": comparison.value, "test_id": test_id, "log_odds_percentile": pct}
                    for test_id, pct in zip(chosen["test_id"], chosen["log_odds_percentile"])
                )
            panels.append(Panel(
                lag=lag,
                periods_per_year=ppy,
                pvalues=pvalues,
                boxplot=pd.DataFrame(boxes, columns=BOX_COLUMNS),
                percentiles=pd.DataFrame(percentiles, columns=PERCENTILE_COLUMNS),
            ))
        return cls(panels=panels, meta=meta)

    @classmethod
    def from_directory(cls, out_dir) -> "RunReport":
        """Rebuild the report from a finished analyze stage."""
        out_dir = Path(out_dir)
        for name in (RESULTS_FILE, FDR_FILE):
            if not (out_dir / name).exists():
                raise StageInputError(f"{out_dir / name} missing; run the analyze stage first")
        results = pd.read_csv(out_dir / RESULTS_FILE, dtype={"region_id": str})
        fdr = pd.read_csv(out_dir / FDR_FILE, dtype={"test_id": str, "family": str})
        meta_path = out_dir / RUN_META_FILE
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls.from_frames(results, fdr, meta)

    def plot_data(self) -> Dict[str, str]:
        """CSV text of every plot-data file, keyed by file name."""
        files = {}
        for panel in self.panels:
            files[f"pvalues_{panel.suffix}.csv"] = panel.pvalues.to_csv(index=False)
            files[f"boxplot_{panel.suffix}.csv"] = panel.boxplot.to_csv(index=False)
            files[f"percentiles_{panel.suffix}.csv"] = panel.percentiles.to_csv(index=False)
        return files


# =============================================================================
# PARALLEL TESTS
# =============================================================================
@dataclass(frozen=True)
class AssociationTask:
    """One association test, self-contained so it can be shipped to a worker."""
    v1: np.ndarray
    v2: Optional[np.ndarray]
    lag: int
    comparison: Comparison
    n_permutations: int
    seed: int
    region_id: str
    sub_index: int
    periods_per_year: int


def _run_task(task: AssociationTask) -> AssociationResult:
    return run_test(task.v1, task.v2, task.lag, task.comparison, task.n_permutations, task.seed,
                    region_id=task.region_id, sub_index=task.sub_index,
                    periods_per_year=task.periods_per_year)


def run_tasks(tasks: Sequence[AssociationTask], workers: int = 1) -> List[AssociationResult]:
    """Order-preserving; every task carries its own seed, so workers never change results."""
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            return pool.map(_run_task, tasks)
    return [_run_task(task) for task in tasks]


# =============================================================================
# PIPELINE
# =============================================================================
class Pipeline:
    """Runs the analysis stages against one output directory."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = config.out_dir
        self.records: Optional[List[MomentTensorRecord]] = None
        self.features: Optional[pd.DataFrame] = None
        self.labels: Optional[pd.DataFrame] = None
        self.confusion: Optional[pd.DataFrame] = None
        self.model_threshold: Optional[float] = None
        self.report: Optional[RunReport] = None
        self.stage_counts: Dict[str, object] = {}

    # ------------------------------------------------------------------ files
    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _require(self, name: str, stage: Stage) -> Path:
        path = self._path(name)
        if not path.exists():
            raise StageInputError(f"{path} missing; run the {stage.value} stage first")
        return path

    def _flush(self, files: Dict[str, str]) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name in sorted(files):
            self._path(name).write_text(files[name])
        logger.debug("Wrote %s", ", ".join(sorted(files)))

    # ----------------------------------------------------------------- stages
    def ingest(self) -> List[MomentTensorRecord]:
        config = self.config
        if not config.catalog:
            raise StageInputError("no catalog files given")
        records, skipped = read_ndk_files(config.catalog, strict=config.strict)
        kept = filter_events(records, config.min_mw, span_window(*config.span))
        kept.sort(key=lambda r: (r.origin_time, r.event_id))
        logger.info("Ingested %d records (%d skipped), %d pass Mw > %.2f in %d-%d",
                    len(records), skipped, len(kept), config.min_mw, *config.span)

        self._flush({
            EVENTS_FILE: event_table_csv(kept),
            AXES_FILE: axes_to_frame(kept).to_csv(index=False),
        })
        self.stage_counts.update(records_parsed=len(records), records_skipped=skipped,
                                 records_kept=len(kept))
        self.records = kept
        return kept

    def extract(self) -> pd.DataFrame:
        """The features stage."""
        if self.records is None:
            self.records = read_event_table(self._require(EVENTS_FILE, Stage.INGEST),
                                            self._path(AXES_FILE))
        rows = []
        for record in self.records:
            feature = extract_features(record, prefer_catalog_axes=self.config.prefer_catalog_axes)
            rows.append({
                "event_id": record.event_id,
                "az1": feature.az1,
                "az2": feature.az2,
                "az3": feature.az3,
                "plunge3": feature.plunge3,
                "depth_class": record.depth_class(self.config.depth_split).value,
                "quality_flag": feature.quality.value,
            })
        frame = pd.DataFrame(rows, columns=FEATURE_TABLE_COLUMNS)

        flagged = int((frame["quality_flag"] != FeatureQuality.OK.value).sum())
        if flagged:
            logger.warning("%d events carry a degenerate or vertical axis flag", flagged)
        logger.info("Extracted features for %d events", len(frame))
        self._flush({FEATURES_FILE: frame.to_csv(index=False)})
        self.stage_counts.update(features=len(frame), flagged_features=flagged)
        self.features = frame
        return frame

    def classify(self) -> pd.DataFrame:
        if self.features is None:
            self.features = pd.read_csv(self._require(FEATURES_FILE, Stage.FEATURES),
                                        dtype={"event_id": str})
        frame = self.features
        values = frame[["az1", "az2", "az3", "plunge3"]].to_numpy(dtype=float)
        is_deep = (frame["depth_class"] == DepthClass.DEEP.value).to_numpy()

        classifier = ModeClassifier()
        model = classifier.fit(values[~is_deep], values[is_deep])
        depths = [DepthClass(value) for value in frame["depth_class"]]
        projections, labels = classifier.label(values, depths)

        label_frame = pd.DataFrame({
            "event_id": frame["event_id"],
            "projection": projections,
            "label": [label.value for label in labels],
        }, columns=LABEL_TABLE_COLUMNS)
        self.confusion = confusion_table(labels)

        events = self._events_frame()
        scatter = events[["event_id", "lat", "lon", "depth_km"]].merge(
            label_frame[["event_id", "label"]], on="event_id", how="inner")

        self._flush({
            MODEL_FILE: model.to_json() + "\n",
            LABELS_FILE: label_frame.to_csv(index=False),
            CONFUSION_FILE: self.confusion.to_csv(index_label="actual"),
            DENSITY_FILE: classifier.density_frame().to_csv(index=False),
            SCATTER_FILE: scatter.to_csv(index=False),
        })
        counts = label_frame["label"].value_counts()
        logger.info("Labelled %d events: %s", len(label_frame),
                    ", ".join(f"{label.value}={int(counts.get(label.value, 0))}" for label in ModeLabel))
        self.model_threshold = model.threshold
        self.stage_counts.update(threshold=model.threshold,
                                 crossing_found=model.fit_metadata["crossing_found"])
        self.labels = label_frame
        return label_frame

    def analyze(self) -> RunReport:
        config = self.config
        if self.labels is None:
            self.labels = pd.read_csv(self._require(LABELS_FILE, Stage.CLASSIFY), dtype={"event_id": str})
        events = self._events_frame().merge(self.labels[["event_id", "label"]], on="event_id", how="inner")
        shallow = events[events["label"].isin([ModeLabel.SHALLOW1.value, ModeLabel.SHALLOW2.value])]

        grid = make_grid(load_regions(config.regions))
        cells = eligible_cells(
            grid,
            ((lat, lon, ModeLabel(label)) for lat, lon, label in zip(shallow["lat"], shallow["lon"], shallow["label"])),
            minimum=config.min_events,
        )

        # events per (cell, mode), in time order
        by_cell: Dict[Tuple[str, int], Dict[str, list]] = {}
        for lat, lon, time_text, label in zip(shallow["lat"], shallow["lon"], shallow["origin_time"], shallow["label"]):
            cell = grid.assign_cell(lat, lon)
            if cell is None:
                continue
            modes = by_cell.setdefault((cell.region_id, cell.sub_index), {})
            modes.setdefault(label, []).append(parse_origin_time(time_text))

        presence_frames = []
        tasks: List[AssociationTask] = []
        for ppy in config.periods:
            for cell in cells:
                modes = by_cell.get((cell.region_id, cell.sub_index), {})
                first = build_presence(modes.get(ModeLabel.SHALLOW1.value, []), cell, ModeLabel.SHALLOW1, ppy, config.span)
                second = build_presence(modes.get(ModeLabel.SHALLOW2.value, []), cell, ModeLabel.SHALLOW2, ppy, config.span)
                pooled = build_presence(
                    modes.get(ModeLabel.SHALLOW1.value, []) + modes.get(ModeLabel.SHALLOW2.value, []),
                    cell, POOLED_MODE, ppy, config.span)
                presence_frames.extend(_presence_frame(series) for series in (first, second, pooled))

                for lag in config.lags:
                    for comparison in TESTED_COMPARISONS:
                        v1 = pooled.bits if comparison is Comparison.POOLED else first.bits
                        v2 = None if comparison is Comparison.POOLED else second.bits
                        tasks.append(AssociationTask(
                            v1=v1, v2=v2, lag=lag, comparison=comparison,
                            n_permutations=config.nperm,
                            seed=derive_seed(config.seed, cell.region_id, cell.sub_index,
                                             comparison.value, lag, ppy),
                            region_id=cell.region_id, sub_index=cell.sub_index,
                            periods_per_year=ppy,
                        ))

        if not cells:
            logger.warning("No eligible cells: nothing to test")
        logger.info("Running %d tests with %d permutations each on %d worker(s)",
                    len(tasks), config.nperm, config.workers)
        results = run_tasks(tasks, workers=config.workers)

        outcomes = select_families(results, config.q, config.fdr_scope)
        results_frame = pd.DataFrame([r.to_row() for r in results], columns=RESULT_TABLE_COLUMNS)
        fdr_frame = outcomes_frame(outcomes)
        presence = (pd.concat(presence_frames, ignore_index=True) if presence_frames
                    else pd.DataFrame(columns=PRESENCE_TABLE_COLUMNS))

        meta = self._run_meta(
            eligible_cells=len(cells),
            tests=len(results),
            selected={key: outcome.threshold_rank for key, outcome in outcomes.items()},
            notice="no eligible cells" if not cells else "",
        )
        self.report = RunReport.from_frames(results_frame, fdr_frame, meta)

        files = {
            PRESENCE_FILE: presence.to_csv(index=False),
            RESULTS_FILE: results_frame.to_csv(index=False),
            FDR_FILE: fdr_frame.to_csv(index=False),
            RUN_META_FILE: json.dumps(meta, indent=2, sort_keys=True) + "\n",
        }
        files.update(self.report.plot_data())
        self._flush(files)
        return self.report

    # ---------------------------------------------------------------- helpers
    def _events_frame(self) -> pd.DataFrame:
        if self.records is not None:
            return events_to_frame(self.records)
        return pd.read_csv(self._require(EVENTS_FILE, Stage.INGEST), dtype={"event_id": str})

    def _run_meta(self, **counts) -> Dict[str, object]:
        echo = self.config.as_dict()
        # neither changes any result
        echo.pop("out")
        echo.pop("workers")
        meta: Dict[str, object] = {"config": echo, "seed": self.config.seed}
        meta["tie_rules"] = {
            "p_value": f"chi_square {P_VALUE_TIE_RULE} observed",
            "log_odds_percentile": f"log_odds {PERCENTILE_TIE_RULE} observed",
            "chi_square_rel_tolerance": CHI_SQUARE_REL_TOLERANCE,
        }
        meta.update(self.stage_counts)
        meta.update(counts)
        confusion = self.confusion
        if confusion is None and self._path(CONFUSION_FILE).exists():
            confusion = pd.read_csv(self._path(CONFUSION_FILE), index_col="actual")
        if confusion is not None:
            meta["confusion"] = {str(row): {str(col): int(value) for col, value in values.items()}
                                 for row, values in confusion.iterrows()}
        return meta

    def run(self) -> RunReport:
        """All stages up to analyze, from the configured catalog files."""
        self.ingest()
        self.extract()
        self.classify()
        return self.analyze()


def _presence_frame(series) -> pd.DataFrame:
    n = len(series)
    return pd.DataFrame({
        "region_id": [series.cell.region_id] * n,
        "sub_index": [series.cell.sub_index] * n,
        "mode": [series.mode_name] * n,
        "period_index": np.arange(n),
        "bit": series.bits.astype(int),
    }, columns=PRESENCE_TABLE_COLUMNS)


def run_analysis(config: RunConfig) -> RunReport:
    """Full pipeline for a validated configuration."""
    return Pipeline(config.validate()).run()
