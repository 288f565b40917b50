"""
Spatial cells and per-cell presence series.
"""

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from ..constants import CELL_SIZE_DEG, ModeLabel


@dataclass(frozen=True)
class SpatialCell:
    """A 5 x 5 degree sub-cell of a 15 x 15 degree region."""
    region_id: str
    sub_index: int          # 0..8, row-major south->north, west->east
    lat_min: float
    lon_min: float          # in [-180, 180)

    @property
    def lat_max(self) -> float:
        return self.lat_min + CELL_SIZE_DEG

    @property
    def lon_max(self) -> float:
        # may reach 180 for the last cell before the antimeridian
        return self.lon_min + CELL_SIZE_DEG

    @property
    def key(self) -> str:
        return f"{self.region_id}:{self.sub_index}"

    def contains(self, lat: float, lon: float) -> bool:
        """Half-open membership: closed lower bounds, open upper bounds."""
        if not self.lat_min <= lat < self.lat_max:
            return False
        offset = (lon - self.lon_min) % 360.0
        return offset < CELL_SIZE_DEG


@dataclass
class PresenceSeries:
    """Binary occupancy of one mode in one cell over equal time periods."""
    cell: SpatialCell
    mode: Union[ModeLabel, str]     # Shallow1, Shallow2 or "Pooled"
    periods_per_year: int
    start_year: int
    end_year: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.int8)
        expected = (self.end_year - self.start_year + 1) * self.periods_per_year
        if self.bits.shape != (expected,):
            raise ValueError(f"presence series must have {expected} bits, got {self.bits.shape}")
        if np.any((self.bits != 0) & (self.bits != 1)):
            raise ValueError("presence bits must be 0 or 1")

    @property
    def mode_name(self) -> str:
        return self.mode.value if isinstance(self.mode, ModeLabel) else str(self.mode)

    def __len__(self) -> int:
        return int(self.bits.size)
