"""
Command-line interface: one subcommand per pipeline stage plus `synth`.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from .catalog import write_ndk
from .config import RunConfig, load_config
from .constants import (
    DENSITY_FILE, FDR_SCOPES, LOG_FILE, SYNTH_ACTIVE_CELLS, SYNTH_BASE_RATE,
    SYNTH_CROSS_INHIBIT, SYNTH_DEEP_PER_CELL, SYNTH_SELF_EXCITE, Stage,
)
from .errors import QuakeModesError
from .grid import load_regions, make_grid
from .log import setup_logging
from .pipeline import Pipeline, RunReport
from .renderer import Renderer
from .synthetic import SyntheticCatalogSpec, generate_synthetic_catalog

logger = logging.getLogger(__name__)

# flag dest -> RunConfig field
CONFIG_FLAGS = (
    "catalog", "min_mw", "depth_split", "span", "periods", "lags", "nperm", "q",
    "regions", "seed", "fdr_scope", "out", "workers", "strict",
)


def _shared_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="JSON file with RunConfig keys; flags take precedence")
    parent.add_argument("--catalog", nargs="+", help="NDK catalog file(s), plain or .gz")
    parent.add_argument("--min-mw", dest="min_mw", type=float, help="keep events with Mw strictly above this")
    parent.add_argument("--depth-split", dest="depth_split", type=float, help="deep events lie below this depth (km)")
    parent.add_argument("--span", help="START:END calendar years, inclusive")
    parent.add_argument("--periods", help="periods per year, e.g. 26 or 26,6")
    parent.add_argument("--lags", help="lags to test, e.g. 1,2")
    parent.add_argument("--nperm", type=int, help="permutations per test")
    parent.add_argument("--q", type=float, help="false discovery rate")
    parent.add_argument("--regions", help="region preset name or JSON file of anchors")
    parent.add_argument("--seed", type=int, help="global random seed")
    parent.add_argument("--fdr-scope", dest="fdr_scope", choices=FDR_SCOPES)
    parent.add_argument("--out", help="output directory")
    parent.add_argument("--workers", type=int, help="processes for the permutation tests")
    parent.add_argument("--strict", action="store_true", default=None,
                        help="fail on the first malformed catalog block")
    parent.add_argument("--compute-axes", dest="compute_axes", action="store_true",
                        help="derive principal axes from the tensor instead of the catalog")
    parent.add_argument("--log-level", dest="log_level", default="INFO")
    parent.add_argument("--quiet", action="store_true", help="only warnings and errors")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quake-modes",
        description="Temporal association between earthquake failure modes.",
    )
    shared = _shared_options()
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser(Stage.INGEST.value, parents=[shared], help="parse and filter NDK catalogs")
    commands.add_parser(Stage.FEATURES.value, parents=[shared], help="principal-axis features")
    commands.add_parser(Stage.CLASSIFY.value, parents=[shared], help="fit the projection and label events")
    commands.add_parser(Stage.ANALYZE.value, parents=[shared],
                        help="association tests and FDR (full pipeline when --catalog is given)")
    commands.add_parser(Stage.REPORT.value, parents=[shared], help="render SVG panels")

    synth = commands.add_parser(Stage.SYNTH.value, parents=[shared], help="write a synthetic NDK catalog")
    synth.add_argument("--out-catalog", dest="out_catalog", required=True)
    synth.add_argument("--pairs-out", dest="pairs_out", help="CSV of the generating presence vectors")
    synth.add_argument("--active-cells", dest="active_cells", type=int, default=SYNTH_ACTIVE_CELLS)
    synth.add_argument("--base-rate", dest="base_rate", type=float, default=SYNTH_BASE_RATE)
    synth.add_argument("--self-excite", dest="self_excite", type=float, default=SYNTH_SELF_EXCITE)
    synth.add_argument("--cross-inhibit", dest="cross_inhibit", type=float, default=SYNTH_CROSS_INHIBIT)
    synth.add_argument("--deep-per-cell", dest="deep_per_cell", type=int, default=SYNTH_DEEP_PER_CELL)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {name: getattr(args, name) for name in CONFIG_FLAGS}
    if args.compute_axes:
        overrides["prefer_catalog_axes"] = False
    return load_config(args.config, overrides)


def _run_synth(args: argparse.Namespace, config: RunConfig) -> None:
    grid = make_grid(load_regions(config.regions))
    spec = SyntheticCatalogSpec(
        start_year=config.span[0],
        end_year=config.span[1],
        periods_per_year=config.periods[0],
        active_cells=args.active_cells,
        base_rate=args.base_rate,
        self_excite=args.self_excite,
        cross_inhibit=args.cross_inhibit,
        deep_per_cell=args.deep_per_cell,
        seed=config.seed,
    )
    records = generate_synthetic_catalog(grid, spec)
    out_catalog = Path(args.out_catalog)
    out_catalog.parent.mkdir(parents=True, exist_ok=True)
    out_catalog.write_text(write_ndk(records))
    logger.info("Wrote %d events to %s", len(records), out_catalog)

    if args.pairs_out:
        frames = [
            pd.DataFrame({
                "region_id": cell.region_id,
                "sub_index": cell.sub_index,
                "period_index": range(len(v1)),
                "v1": v1.astype(int),
                "v2": v2.astype(int),
            })
            for cell, v1, v2 in spec.pairs
        ]
        pd.concat(frames, ignore_index=True).to_csv(args.pairs_out, index=False)


def _run_report(config: RunConfig) -> None:
    renderer = Renderer(config.out_dir)
    renderer.render(RunReport.from_directory(config.out_dir))
    density = config.out_dir / DENSITY_FILE
    if density.exists():
        renderer.render_density(pd.read_csv(density))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = "WARNING" if args.quiet else args.log_level
    try:
        config = config_from_args(args)
        log_file = None
        if args.command != Stage.SYNTH.value:
            config.out_dir.mkdir(parents=True, exist_ok=True)
            log_file = config.out_dir / LOG_FILE
        setup_logging(level, log_file)

        pipeline = Pipeline(config)
        command = Stage(args.command)
        if command is Stage.INGEST:
            pipeline.ingest()
        elif command is Stage.FEATURES:
            pipeline.extract()
        elif command is Stage.CLASSIFY:
            pipeline.classify()
        elif command is Stage.ANALYZE:
            if config.catalog:
                pipeline.run()
            else:
                pipeline.analyze()
        elif command is Stage.REPORT:
            _run_report(config)
        elif command is Stage.SYNTH:
            _run_synth(args, config)
    except QuakeModesError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
