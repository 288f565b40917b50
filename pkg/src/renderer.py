"""
Renderer for the static SVG figure panels.
"""

import logging
from pathlib import Path
from typing import List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .constants import (  # noqa: E402
    COLOR_BH_LINE, COLOR_DEEP_DENSITY, COLOR_NOT_SELECTED, COLOR_SELECTED,
    COLOR_SHALLOW_DENSITY, COLOR_THRESHOLD, FIGURE_SIZE, PLOTS_DIR, SVG_HASH_SALT, Comparison,
)
from .pipeline import Panel, RunReport  # noqa: E402

logger = logging.getLogger(__name__)

PANEL_TITLES = {
    Comparison.WITHIN: "Within modes",
    Comparison.CROSS: "Across modes",
    Comparison.POOLED: "Modes not separated",
}
LAG_TITLES = {1: "next period", 2: "skipping one period"}


class Renderer:
    """Draws every panel set of a report into SVG files."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        plt.rcParams["svg.hashsalt"] = SVG_HASH_SALT

    def render(self, report: RunReport) -> List[Path]:
        """One five-panel figure per (lag, periods_per_year)."""
        plots = self.out_dir / PLOTS_DIR
        plots.mkdir(parents=True, exist_ok=True)
        written = []
        for panel in report.panels:
            path = plots / f"panels_{panel.suffix}.svg"
            self._render_panel(panel, path)
            written.append(path)
        if not report.panels:
            logger.warning("Report has no tests; rendering an empty panel")
            path = plots / "panels_empty.svg"
            self._render_empty(str(report.meta.get("notice") or "no tests"), path)
            written.append(path)
        logger.info("Rendered %d figure(s) to %s", len(written), plots)
        return written

    def _render_empty(self, notice: str, path: Path) -> None:
        fig, ax = plt.subplots(figsize=(FIGURE_SIZE[0] / 2, FIGURE_SIZE[1] / 2))
        self._annotate_empty(ax, notice)
        self._save(fig, path)

    def _render_panel(self, panel: Panel, path: Path) -> None:
        fig, axes = plt.subplots(2, 3, figsize=FIGURE_SIZE)
        for ax, comparison in zip(axes[0], (Comparison.WITHIN, Comparison.CROSS, Comparison.POOLED)):
            self._draw_ordered_p(ax, panel.pvalues[panel.pvalues["comparison"] == comparison.value],
                                 PANEL_TITLES[comparison])
        self._draw_boxes(axes[1][0], panel.boxplot)
        self._draw_percentiles(axes[1][1], panel.percentiles)
        axes[1][2].axis("off")

        lag_title = LAG_TITLES.get(panel.lag, f"lag {panel.lag}")
        fig.suptitle(f"{panel.periods_per_year} periods per year, {lag_title}")
        fig.tight_layout()
        self._save(fig, path)

    def _draw_ordered_p(self, ax, rows: pd.DataFrame, title: str) -> None:
        ax.set_title(title)
        ax.set_xlabel("rank")
        ax.set_ylabel("p-value")
        if rows.empty:
            self._annotate_empty(ax, "no tests")
            return
        selected = rows["interesting"].astype(bool).to_numpy()
        ranks = rows["rank"].to_numpy()
        p_values = rows["p_value"].to_numpy()
        ax.scatter(ranks[~selected], p_values[~selected], s=12, color=COLOR_NOT_SELECTED, label="not selected")
        ax.scatter(ranks[selected], p_values[selected], s=12, color=COLOR_SELECTED, label="selected")
        for _, family in rows.groupby("family", sort=True):
            family = family.sort_values("rank")
            ax.plot(family["rank"], family["bh_line"], color=COLOR_BH_LINE, linewidth=1)
        ax.set_ylim(-0.02, 1.02)

    def _draw_boxes(self, ax, boxes: pd.DataFrame) -> None:
        ax.set_title("Log odds of selected tests")
        ax.axhline(0.0, color=COLOR_NOT_SELECTED, linewidth=0.5)
        stats = []
        for row in boxes.itertuples(index=False):
            if row.n == 0:
                continue
            outliers = [float(x) for x in str(row.outliers).split(";") if x and x != "nan"]
            stats.append({
                "label": PANEL_TITLES[Comparison(row.comparison)],
                "q1": row.q1, "med": row.median, "q3": row.q3,
                "whislo": row.whisker_low, "whishi": row.whisker_high,
                "fliers": outliers,
            })
        if not stats:
            self._annotate_empty(ax, "no tests selected")
            return
        ax.bxp(stats, showfliers=True)
        ax.set_ylabel("log odds ratio")

    def _draw_percentiles(self, ax, percentiles: pd.DataFrame) -> None:
        ax.set_title("Permuted log odds below observed")
        ax.set_xlabel("proportion")
        if percentiles.empty:
            self._annotate_empty(ax, "no tests selected")
            return
        bins = np.linspace(0.0, 1.0, 21)
        for comparison, color in ((Comparison.WITHIN, COLOR_SELECTED), (Comparison.CROSS, COLOR_BH_LINE)):
            values = percentiles.loc[percentiles["comparison"] == comparison.value, "log_odds_percentile"]
            if len(values):
                ax.hist(values, bins=bins, color=color, alpha=0.6, label=PANEL_TITLES[comparison])
        ax.legend(loc="upper left")

    def render_density(self, density: pd.DataFrame, path: Optional[Path] = None) -> Path:
        """Shallow and deep densities along the projection, with the threshold."""
        plots = self.out_dir / PLOTS_DIR
        plots.mkdir(parents=True, exist_ok=True)
        path = path or plots / "density.svg"
        fig, ax = plt.subplots(figsize=(FIGURE_SIZE[0] / 2, FIGURE_SIZE[1] / 2))
        ax.plot(density["grid"], density["density_shallow"], color=COLOR_SHALLOW_DENSITY, label="shallow")
        ax.plot(density["grid"], density["density_deep"], color=COLOR_DEEP_DENSITY, label="deep")
        ax.axvline(float(density["threshold"].iloc[0]), color=COLOR_THRESHOLD, label="threshold")
        ax.set_xlabel("projection")
        ax.set_ylabel("density")
        ax.legend()
        fig.tight_layout()
        self._save(fig, path)
        return path

    @staticmethod
    def _annotate_empty(ax, text: str) -> None:
        ax.text(0.5, 0.5, text, ha="center", va="center", transform=ax.transAxes)
        ax.set_xticks([])
        ax.set_yticks([])

    @staticmethod
    def _save(fig, path: Path) -> None:
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def render_plots(report: RunReport, out_dir) -> List[Path]:
    return Renderer(out_dir).render(report)
