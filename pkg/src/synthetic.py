"""
Synthetic data with known answers: coupled binary chains, exact permutation
p-values by enumeration, and a synthetic moment-tensor catalog whose two
shallow failure modes follow a coupled chain inside chosen cells.
"""

import logging
import math
from dataclasses import dataclass, field
from datetime import timedelta
from itertools import combinations
from typing import List, Tuple

import numpy as np

from .association import _batch_counts, _check_lag, _statistics, derive_seed
from .constants import (
    CHI_SQUARE_REL_TOLERANCE, EXACT_MAX_LENGTH, PROBABILITY_CLIP,
    SPAN_END_YEAR, SPAN_START_YEAR, SYNTH_ACTIVE_CELLS, SYNTH_AZIMUTH_JITTER,
    SYNTH_BASE_RATE, SYNTH_CROSS_INHIBIT, SYNTH_DEEP_DEPTH_KM, SYNTH_DEEP_PER_CELL,
    SYNTH_EIGENVALUE_SHAPE, SYNTH_MODE1_GEOMETRY, SYNTH_MODE2_GEOMETRY, SYNTH_MW_RANGE,
    SYNTH_PLUNGE_JITTER, SYNTH_SELF_EXCITE, SYNTH_SHALLOW_DEPTH_KM, RANDOM_SEED,
    Comparison,
)
from .entities.cell import SpatialCell
from .entities.record import Axis, MomentTensorRecord, moment_to_mw, mw_to_moment
from .errors import TooLongForExactError
from .grid import Grid, _year_start, year_seconds
from .catalog import choose_exponent
from .tensor import matrix_components, tensor_from_axes, vector_to_azimuth_plunge

logger = logging.getLogger(__name__)


# =============================================================================
# COUPLED BINARY CHAINS
# =============================================================================
@dataclass(frozen=True)
class MarkovPairSpec:
    """Two coupled Bernoulli chains: same-mode excitation, cross-mode inhibition."""
    length: int
    base_rate: float = SYNTH_BASE_RATE
    self_excite: float = 0.0
    cross_inhibit: float = 0.0
    seed: int = RANDOM_SEED

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be positive")
        if not 0.0 <= self.base_rate <= 1.0:
            raise ValueError("base_rate must lie in [0, 1]")


def gen_markov_pair(spec: MarkovPairSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    P(v_k[t] = 1) = clip(base + self_excite * v_k[t-1] - cross_inhibit * v_other[t-1]);
    the first period uses the base rate alone.
    """
    rng = np.random.default_rng(spec.seed)
    low, high = PROBABILITY_CLIP
    v1 = np.zeros(spec.length, dtype=np.int8)
    v2 = np.zeros(spec.length, dtype=np.int8)
    draws = rng.random((spec.length, 2))

    prev1 = prev2 = 0
    for t in range(spec.length):
        p1 = spec.base_rate + spec.self_excite * prev1 - spec.cross_inhibit * prev2
        p2 = spec.base_rate + spec.self_excite * prev2 - spec.cross_inhibit * prev1
        p1 = min(max(p1, low), high)
        p2 = min(max(p2, low), high)
        v1[t] = prev1 = int(draws[t, 0] < p1)
        v2[t] = prev2 = int(draws[t, 1] < p2)
    return v1, v2


# =============================================================================
# EXACT PERMUTATION P-VALUES
# =============================================================================
def _arrangements(v: np.ndarray) -> np.ndarray:
    """Every distinct arrangement of v's bits, one per row."""
    n = int(v.size)
    ones = int(v.sum())
    rows = []
    for positions in combinations(range(n), ones):
        row = np.zeros(n, dtype=np.int8)
        row[list(positions)] = 1
        rows.append(row)
    return np.array(rows, dtype=np.int8).reshape(len(rows), n)


def exact_permutation_p(v1, v2, lag: int, comparison: Comparison) -> float:
    """
    Exact proportion of (permutation of v1, permutation of v2) pairs whose
    chi-square reaches the observed value. Each distinct arrangement of a
    vector stands for the same number of orderings, so arrangements are
    enumerated with equal weight.
    """
    v1 = np.asarray(v1, dtype=np.int8)
    v2 = None if comparison is Comparison.POOLED else np.asarray(v2, dtype=np.int8)
    n = int(v1.size)
    if n > EXACT_MAX_LENGTH:
        raise TooLongForExactError(f"exact enumeration limited to length {EXACT_MAX_LENGTH}, got {n}")
    _check_lag(n, lag)

    observed = _batch_counts(v1[None, :], None if v2 is None else v2[None, :], lag, comparison)
    chi_obs = float(_statistics(observed)[0][0])
    tolerance = CHI_SQUARE_REL_TOLERANCE * max(1.0, chi_obs)

    first = _arrangements(v1)
    if v2 is None:
        chi = _statistics(_batch_counts(first, None, lag, comparison))[0]
        return float(np.mean(chi >= chi_obs - tolerance))

    second = _arrangements(v2)
    p1 = np.repeat(first, len(second), axis=0)
    p2 = np.tile(second, (len(first), 1))
    chi = _statistics(_batch_counts(p1, p2, lag, comparison))[0]
    return float(np.mean(chi >= chi_obs - tolerance))


# =============================================================================
# SYNTHETIC CATALOG
# =============================================================================
@dataclass
class SyntheticCatalogSpec:
    """Parameters of a synthetic catalog over a grid."""
    start_year: int = SPAN_START_YEAR
    end_year: int = SPAN_END_YEAR
    periods_per_year: int = 26
    active_cells: int = SYNTH_ACTIVE_CELLS
    base_rate: float = SYNTH_BASE_RATE
    self_excite: float = SYNTH_SELF_EXCITE
    cross_inhibit: float = SYNTH_CROSS_INHIBIT
    deep_per_cell: int = SYNTH_DEEP_PER_CELL
    seed: int = RANDOM_SEED
    pairs: List[Tuple[SpatialCell, np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)


def _mode_axes(rng: np.random.Generator, geometry: Tuple[float, float, float]) -> np.ndarray:
    """Rows T, N, P as unit (up, south, east) vectors for one event of a mode."""
    p_azimuth, p_plunge, t_plunge = geometry
    p_azimuth = p_azimuth + rng.normal(0.0, SYNTH_AZIMUTH_JITTER)
    p_plunge = float(np.clip(p_plunge + rng.normal(0.0, SYNTH_PLUNGE_JITTER), 1.0, 85.0))
    t_plunge = float(np.clip(t_plunge + rng.normal(0.0, SYNTH_PLUNGE_JITTER), 1.0, 85.0))

    # T azimuth that makes T orthogonal to P, then clean up numerically
    cos_diff = -math.tan(math.radians(t_plunge)) * math.tan(math.radians(p_plunge))
    diff = math.degrees(math.acos(float(np.clip(cos_diff, -0.95, 0.95))))
    p_vec = _down_vector(p_azimuth, p_plunge)
    t_vec = _down_vector(p_azimuth + diff, t_plunge)
    t_vec = t_vec - np.dot(t_vec, p_vec) * p_vec
    t_vec /= np.linalg.norm(t_vec)
    n_vec = np.cross(p_vec, t_vec)
    n_vec /= np.linalg.norm(n_vec)
    return np.array([t_vec, n_vec, p_vec])


def _down_vector(azimuth: float, plunge: float) -> np.ndarray:
    az, pl = math.radians(azimuth), math.radians(plunge)
    return np.array([-math.sin(pl), -math.cos(pl) * math.cos(az), math.cos(pl) * math.sin(az)])


def _synthetic_record(rng: np.random.Generator, event_id: str, origin_time, cell: SpatialCell,
                      depth_range: Tuple[float, float], geometry) -> MomentTensorRecord:
    mw = float(rng.uniform(*SYNTH_MW_RANGE))
    m0 = mw_to_moment(mw)
    vectors = _mode_axes(rng, geometry)
    eigenvalues = [m0 * shape for shape in SYNTH_EIGENVALUE_SHAPE]
    tensor = matrix_components(tensor_from_axes(eigenvalues, vectors))
    exponent = choose_exponent(tensor)
    scale = 10.0 ** exponent

    # store values at NDK precision so the catalog round-trips unchanged
    tensor = tuple(round(c / scale, 3) * scale for c in tensor)
    axes = []
    for value, vector in zip(eigenvalues, vectors):
        azimuth, plunge = vector_to_azimuth_plunge(vector)
        axes.append(Axis(eigenvalue=round(value / scale, 3) * scale,
                         plunge=float(round(plunge)), azimuth=float(round(azimuth) % 360)))
    scalar_moment = round(m0 / scale, 3) * scale

    lat = float(rng.uniform(cell.lat_min + 0.01, cell.lat_max - 0.01))
    lon = float(rng.uniform(cell.lon_min + 0.01, cell.lon_max - 0.01))
    lon = round(lon, 2)
    if lon >= 180.0:
        lon -= 360.0
    return MomentTensorRecord(
        event_id=event_id,
        origin_time=origin_time,
        latitude=round(lat, 2),
        longitude=lon,
        depth_km=round(float(rng.uniform(*depth_range)), 1),
        scalar_moment=scalar_moment,
        magnitude=moment_to_mw(scalar_moment),
        tensor=tensor,
        catalog_axes=tuple(axes),
        exponent=exponent,
        catalog="SYN",
        region_name="SYNTHETIC",
        mb=0.0,
        ms=0.0,
    )


def _period_time(rng: np.random.Generator, spec: SyntheticCatalogSpec, period: int):
    """A whole-second time strictly inside the given period."""
    year = spec.start_year + period // spec.periods_per_year
    slot = period % spec.periods_per_year
    total = year_seconds(year)
    fraction = (slot + rng.uniform(0.05, 0.95)) / spec.periods_per_year
    return _year_start(year) + timedelta(seconds=int(fraction * total))


def generate_synthetic_catalog(grid: Grid, spec: SyntheticCatalogSpec) -> List[MomentTensorRecord]:
    """
    Events for the first `active_cells` cells of the grid: shallow mode-1 and
    mode-2 events placed in the periods where a coupled chain fires, plus
    deep events at uniformly random times. Returned in time order.
    """
    rng = np.random.default_rng(spec.seed)
    length = (spec.end_year - spec.start_year + 1) * spec.periods_per_year
    cells = grid.cells[:spec.active_cells]
    spec.pairs.clear()

    events = []
    for cell in cells:
        v1, v2 = gen_markov_pair(MarkovPairSpec(
            length=length,
            base_rate=spec.base_rate,
            self_excite=spec.self_excite,
            cross_inhibit=spec.cross_inhibit,
            seed=derive_seed(spec.seed, "synth", cell.region_id, cell.sub_index),
        ))
        spec.pairs.append((cell, v1, v2))
        for bits, geometry in ((v1, SYNTH_MODE1_GEOMETRY), (v2, SYNTH_MODE2_GEOMETRY)):
            for period in np.nonzero(bits)[0]:
                events.append((_period_time(rng, spec, int(period)), cell, SYNTH_SHALLOW_DEPTH_KM, geometry))
        for _ in range(spec.deep_per_cell):
            period = int(rng.integers(length))
            events.append((_period_time(rng, spec, period), cell, SYNTH_DEEP_DEPTH_KM, SYNTH_MODE2_GEOMETRY))

    events.sort(key=lambda event: (event[0], event[1].region_id, event[1].sub_index))
    records = [
        _synthetic_record(rng, f"S{index:09d}A", origin_time, cell, depth_range, geometry)
        for index, (origin_time, cell, depth_range, geometry) in enumerate(events)
    ]
    logger.info("Generated %d synthetic events in %d cells", len(records), len(cells))
    return records
