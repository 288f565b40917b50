"""
Catalog event records, principal axes, and classifier feature vectors.
"""

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional, Tuple

import numpy as np

from ..constants import (
    DepthClass, FeatureQuality, MW_OFFSET, MW_CONSISTENCY_TOLERANCE,
)
from ..errors import InvalidRecordError


def moment_to_mw(scalar_moment: float) -> float:
    """Moment magnitude from a scalar moment in dyne-cm."""
    return (2.0 / 3.0) * (math.log10(scalar_moment) - MW_OFFSET)


def mw_to_moment(mw: float) -> float:
    """Scalar moment in dyne-cm from a moment magnitude."""
    return 10.0 ** (1.5 * mw + MW_OFFSET)


def normalize_longitude(lon: float) -> float:
    """Wrap a longitude into [-180, 180)."""
    wrapped = (lon + 180.0) % 360.0 - 180.0
    # float modulo can land exactly on the open bound
    return -180.0 if wrapped >= 180.0 else wrapped


@dataclass(frozen=True)
class Axis:
    """One principal axis: eigenvalue (dyne-cm), plunge and azimuth (degrees)."""
    eigenvalue: float
    plunge: float
    azimuth: float


@dataclass(frozen=True)
class MomentTensorRecord:
    """One catalog event with its centroid moment tensor."""
    event_id: str
    origin_time: datetime            # UTC, whole seconds
    latitude: float
    longitude: float
    depth_km: float
    scalar_moment: float             # dyne-cm
    magnitude: float                 # Mw
    tensor: Tuple[float, float, float, float, float, float]  # Mrr Mtt Mpp Mrt Mrp Mtp
    catalog_axes: Optional[Tuple[Axis, Axis, Axis]] = None

    # NDK bookkeeping; only used to write the record back out
    exponent: int = 0
    catalog: str = "PDE"
    region_name: str = ""
    mb: float = 0.0
    ms: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InvalidRecordError(f"{self.event_id}: latitude {self.latitude} out of range")
        if not -180.0 <= self.longitude < 180.0:
            raise InvalidRecordError(f"{self.event_id}: longitude {self.longitude} out of range")
        if not (math.isfinite(self.depth_km) and self.depth_km > 0):
            raise InvalidRecordError(f"{self.event_id}: depth {self.depth_km} must be positive")
        if len(self.tensor) != 6 or not all(math.isfinite(c) for c in self.tensor):
            raise InvalidRecordError(f"{self.event_id}: tensor components must be 6 finite values")
        if not (math.isfinite(self.scalar_moment) and self.scalar_moment > 0):
            raise InvalidRecordError(f"{self.event_id}: scalar moment must be positive")
        if abs(moment_to_mw(self.scalar_moment) - self.magnitude) > MW_CONSISTENCY_TOLERANCE:
            raise InvalidRecordError(
                f"{self.event_id}: magnitude {self.magnitude} inconsistent with "
                f"scalar moment {self.scalar_moment:.3e}"
            )

    def depth_class(self, split_km: float) -> DepthClass:
        return DepthClass.DEEP if self.depth_km > split_km else DepthClass.SHALLOW


@dataclass(frozen=True)
class PrincipalAxes:
    """Three axes ordered by eigenvalue, descending, with their unit vectors."""
    axes: Tuple[Axis, Axis, Axis]
    vectors: np.ndarray = field(repr=False, compare=False)  # rows, (up, south, east)
    degenerate: bool = False
    vertical: bool = False

    @property
    def eigenvalues(self) -> Tuple[float, float, float]:
        return tuple(axis.eigenvalue for axis in self.axes)


@dataclass(frozen=True)
class FeatureVector:
    """The four classifier variables of one event."""
    az1: float
    az2: float
    az3: float
    plunge3: float
    quality: FeatureQuality = FeatureQuality.OK

    def as_array(self) -> np.ndarray:
        return np.array([self.az1, self.az2, self.az3, self.plunge3], dtype=float)
