"""
Shared fixtures for the test suite.
"""

import json
from datetime import datetime, timezone
from types import SimpleNamespace

import pytest

from src.catalog import write_ndk
from src.config import RunConfig
from src.entities.record import MomentTensorRecord, moment_to_mw
from src.grid import make_grid
from src.pipeline import Pipeline
from src.synthetic import SyntheticCatalogSpec, generate_synthetic_catalog

# One documented Global CMT event, five lines of NDK
NDK_BLOCK = """\
PDE  2005/01/01 01:20:05.4  13.78  -88.78 193.1 5.0 0.0 EL SALVADOR             
C200501010120A   B:  4    4  40 S: 27   33  50 M:  0    0   0 CMT: 1 TRIHD:  0.6
CENTROID:     -0.3 0.9  13.76 0.06  -89.08 0.09 162.8 12.5 FREE S-20050322125201
23  0.838 0.201 -0.005 0.231 -0.833 0.270  1.050 0.121 -0.369 0.161  0.044 0.240
V10   1.581 56  12  -0.537 23 140  -1.044 24 241   1.312   9 29  142 133 72   66
"""
SYNTHETIC_REGIONS = {"A": (0.0, 120.0), "B": (30.0, 150.0)}


@pytest.fixture
def ndk_block():
    return NDK_BLOCK


def make_record(event_id="E1", magnitude=5.0, depth_km=33.0, latitude=0.0, longitude=0.0,
                origin_time=None, tensor=(1.0e24, -0.5e24, -0.5e24, 0.1e24, 0.2e24, 0.3e24),
                catalog_axes=None):
    """A valid record whose scalar moment matches its magnitude."""
    scalar_moment = 10.0 ** (1.5 * magnitude + 16.1)
    return MomentTensorRecord(
        event_id=event_id,
        origin_time=origin_time or datetime(2000, 6, 1, tzinfo=timezone.utc),
        latitude=latitude,
        longitude=longitude,
        depth_km=depth_km,
        scalar_moment=scalar_moment,
        magnitude=moment_to_mw(scalar_moment),
        tensor=tensor,
        catalog_axes=catalog_axes,
    )


@pytest.fixture
def record_factory():
    return make_record


@pytest.fixture
def single_region_grid():
    return make_grid([(0.0, 120.0)])


@pytest.fixture(scope="session")
def synthetic_records():
    """A small synthetic catalog: 3 active cells over 4 years."""
    grid = make_grid(SYNTHETIC_REGIONS)
    spec = SyntheticCatalogSpec(start_year=2000, end_year=2003, periods_per_year=26,
                                active_cells=3, deep_per_cell=20, seed=7)
    return generate_synthetic_catalog(grid, spec)


def write_regions(path, regions=SYNTHETIC_REGIONS):
    path.write_text(json.dumps([
        {"region_id": region_id, "lat_min": lat, "lon_min": lon}
        for region_id, (lat, lon) in regions.items()
    ]))
    return path


@pytest.fixture
def regions_file(tmp_path):
    return write_regions(tmp_path / "regions.json")


def run_config(catalog, regions, out, **overrides):
    """A small, fast configuration for the synthetic catalog."""
    values = dict(catalog=[str(catalog)], span=(2000, 2009), periods=(26,), lags=(1, 2),
                  nperm=300, q=0.05, regions=str(regions), seed=1, out=str(out), workers=1)
    values.update(overrides)
    return RunConfig(**values).validate()


@pytest.fixture
def config_factory():
    return run_config


@pytest.fixture(scope="session")
def synthetic_run(tmp_path_factory):
    """
    A finished pipeline run on a synthetic catalog whose shallow modes follow
    self-exciting, cross-inhibiting chains in three cells.
    """
    root = tmp_path_factory.mktemp("synthetic_run")
    spec = SyntheticCatalogSpec(start_year=2000, end_year=2009, periods_per_year=26, active_cells=3,
                                self_excite=0.4, cross_inhibit=0.4, deep_per_cell=100, seed=3)
    records = generate_synthetic_catalog(make_grid(SYNTHETIC_REGIONS), spec)
    catalog = root / "synthetic.ndk"
    catalog.write_text(write_ndk(records))
    config = run_config(catalog, write_regions(root / "regions.json"), root / "out")
    report = Pipeline(config).run()
    return SimpleNamespace(config=config, report=report, spec=spec, records=records, root=root)
