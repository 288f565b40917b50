"""
Region and Grid classes for spatial tiling, plus equal-period time binning
and presence vectors.
"""

import json
import logging
from collections import Counter
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import (
    CELL_SIZE_DEG, CELLS_PER_SIDE, MIN_EVENTS_PER_MODE, PERIODS_CHOICES,
    REGION_PRESETS, REGION_SIZE_DEG, ModeLabel,
)
from .entities.cell import PresenceSeries, SpatialCell
from .entities.record import normalize_longitude
from .errors import ConfigError, OutOfRangeError, OverlappingRegionsError

logger = logging.getLogger(__name__)

Anchor = Tuple[float, float]


class Region:
    """A 15 x 15 degree square split into 3 x 3 sub-cells."""

    def __init__(self, region_id: str, lat_min: float, lon_min: float):
        if not (-90.0 <= lat_min and lat_min + REGION_SIZE_DEG <= 90.0):
            raise ConfigError(f"region {region_id}: latitude anchor {lat_min} leaves the globe")
        self.region_id = str(region_id)
        self.lat_min = float(lat_min)
        self.lon_min = normalize_longitude(float(lon_min))

        # Row-major: south -> north, west -> east
        self.cells: List[SpatialCell] = []
        for row in range(CELLS_PER_SIDE):
            for col in range(CELLS_PER_SIDE):
                self.cells.append(SpatialCell(
                    region_id=self.region_id,
                    sub_index=row * CELLS_PER_SIDE + col,
                    lat_min=self.lat_min + row * CELL_SIZE_DEG,
                    lon_min=normalize_longitude(self.lon_min + col * CELL_SIZE_DEG),
                ))

    def locate(self, lat: float, lon: float) -> Optional[SpatialCell]:
        """Sub-cell containing the point, or None if outside the region."""
        if not self.lat_min <= lat < self.lat_min + REGION_SIZE_DEG:
            return None
        offset = (lon - self.lon_min) % 360.0
        if offset >= REGION_SIZE_DEG:
            return None
        row = min(int((lat - self.lat_min) // CELL_SIZE_DEG), CELLS_PER_SIDE - 1)
        col = min(int(offset // CELL_SIZE_DEG), CELLS_PER_SIDE - 1)
        return self.cells[row * CELLS_PER_SIDE + col]

    def overlaps(self, other: "Region") -> bool:
        lat_overlap = abs(self.lat_min - other.lat_min) < REGION_SIZE_DEG
        gap = (self.lon_min - other.lon_min) % 360.0
        lon_overlap = min(gap, 360.0 - gap) < REGION_SIZE_DEG
        return lat_overlap and lon_overlap

    def __repr__(self):
        return f"Region({self.region_id!r}, lat_min={self.lat_min}, lon_min={self.lon_min})"


class Grid:
    """The study area: a set of non-overlapping regions and their sub-cells."""

    def __init__(self, regions: Sequence[Region]):
        for i, first in enumerate(regions):
            for second in regions[i + 1:]:
                if first.overlaps(second):
                    raise OverlappingRegionsError(
                        f"regions {first.region_id} and {second.region_id} overlap")
        ids = [region.region_id for region in regions]
        if len(set(ids)) != len(ids):
            raise OverlappingRegionsError("region ids must be unique")
        self.regions = list(regions)

    @property
    def cells(self) -> List[SpatialCell]:
        return [cell for region in self.regions for cell in region.cells]

    def assign_cell(self, lat: float, lon: float) -> Optional[SpatialCell]:
        """The unique cell containing the point (half-open bounds), or None."""
        for region in self.regions:
            cell = region.locate(lat, lon)
            if cell is not None:
                return cell
        return None

    def __len__(self) -> int:
        return len(self.regions) * CELLS_PER_SIDE * CELLS_PER_SIDE


def make_grid(regions: Union[Sequence[Anchor], Mapping[str, Anchor]]) -> Grid:
    """
    Build a grid from region anchors, given either as (lat_min, lon_min) pairs
    (numbered from 1 in order) or as a mapping of region id to anchor.
    """
    if isinstance(regions, Mapping):
        items = list(regions.items())
    else:
        items = [(str(i), anchor) for i, anchor in enumerate(regions, start=1)]
    return Grid([Region(region_id, lat, lon) for region_id, (lat, lon) in items])


def load_regions(spec: Union[str, Path]) -> Dict[str, Anchor]:
    """A preset name or a JSON file of {"region_id", "lat_min", "lon_min"} objects."""
    if str(spec) in REGION_PRESETS:
        return dict(REGION_PRESETS[str(spec)])
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"unknown region preset or missing file: {spec}")
    with open(path) as handle:
        entries = json.load(handle)
    try:
        return {str(e["region_id"]): (float(e["lat_min"]), float(e["lon_min"])) for e in entries}
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad region file {path}: {exc}") from exc


# =============================================================================
# TIME BINNING
# =============================================================================
def _year_start(year: int) -> datetime:
    return datetime(year, 1, 1, tzinfo=timezone.utc)


def year_seconds(year: int) -> int:
    return int((_year_start(year + 1) - _year_start(year)).total_seconds())


def time_bin(t: datetime, periods_per_year: int, start_year: int,
             end_year: Optional[int] = None) -> int:
    """
    Period index of a timestamp. Each calendar year is cut into
    periods_per_year equal slices, so periods never straddle a year boundary.
    """
    if periods_per_year not in PERIODS_CHOICES:
        raise ValueError(f"periods_per_year must be one of {PERIODS_CHOICES}")
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    year = t.astimezone(timezone.utc).year
    if year < start_year or (end_year is not None and year > end_year):
        raise OutOfRangeError(f"{t.isoformat()} outside {start_year}-{end_year}")

    elapsed = int((t - _year_start(year)).total_seconds())
    slot = (elapsed * periods_per_year) // year_seconds(year)
    return (year - start_year) * periods_per_year + min(slot, periods_per_year - 1)


def period_bounds(year: int, periods_per_year: int) -> List[Tuple[datetime, datetime]]:
    """[start, end) of each period of a year, as the binning sees them."""
    total = year_seconds(year)
    start = _year_start(year)
    bounds = []
    for slot in range(periods_per_year):
        # first whole second whose slot is >= this one
        lo = -(-slot * total // periods_per_year)
        hi = -(-(slot + 1) * total // periods_per_year)
        bounds.append((start + timedelta(seconds=lo), start + timedelta(seconds=hi)))
    return bounds


def n_periods(periods_per_year: int, start_year: int, end_year: int) -> int:
    return (end_year - start_year + 1) * periods_per_year


def build_presence(times: Iterable[datetime], cell: SpatialCell, mode,
                   periods_per_year: int, span: Tuple[int, int]) -> PresenceSeries:
    """Bit i is 1 iff at least one event falls in period i."""
    start_year, end_year = span
    bits = np.zeros(n_periods(periods_per_year, start_year, end_year), dtype=np.int8)
    for t in times:
        bits[time_bin(t, periods_per_year, start_year, end_year)] = 1
    return PresenceSeries(cell=cell, mode=mode, periods_per_year=periods_per_year,
                          start_year=start_year, end_year=end_year, bits=bits)


def eligible_cells(grid: Grid, shallow_events: Iterable[Tuple[float, float, ModeLabel]],
                   minimum: int = MIN_EVENTS_PER_MODE) -> List[SpatialCell]:
    """
    Cells with more than `minimum` events of both shallow modes.
    Events are (lat, lon, label) triples; deep labels are ignored.
    """
    counts: Counter = Counter()
    for lat, lon, label in shallow_events:
        if label not in (ModeLabel.SHALLOW1, ModeLabel.SHALLOW2):
            continue
        cell = grid.assign_cell(lat, lon)
        if cell is not None:
            counts[(cell, label)] += 1

    eligible = [
        cell for cell in grid.cells
        if counts[(cell, ModeLabel.SHALLOW1)] > minimum and counts[(cell, ModeLabel.SHALLOW2)] > minimum
    ]
    logger.info("%d of %d cells eligible (> %d events of each shallow mode)",
                len(eligible), len(grid), minimum)
    return eligible
