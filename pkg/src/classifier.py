"""
Mean-difference projection classifier.

Shallow and deep feature means define a direction; every event is projected
onto it, a density is estimated for each depth population along that line,
and the point where the two densities cross splits each population into two
failure modes.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from scipy.integrate import trapezoid
from scipy.signal import fftconvolve
from scipy.spatial.distance import pdist

from .constants import (
    KDE_CANDIDATE_HIGH, KDE_CANDIDATE_LOW, KDE_CANDIDATES, KDE_CV_BINS, KDE_CV_EXACT_MAX,
    KDE_GRID_PAD, KDE_GRID_SIZE, KDE_MIN_SAMPLES, THRESHOLD_GRID_SIZE, DepthClass, ModeLabel,
)
from .entities.record import FeatureVector
from .errors import (
    DegenerateSampleError, EmptyClassError, EmptyDirectionError, ModelNotFittedError,
    TooFewSamplesError,
)

logger = logging.getLogger(__name__)

FeatureLike = Union[FeatureVector, Sequence[float], np.ndarray]

PREDICTED_SHALLOW = "Predicted shallow"
PREDICTED_DEEP = "Predicted deep"


def _as_array(feature: FeatureLike) -> np.ndarray:
    if isinstance(feature, FeatureVector):
        return feature.as_array()
    return np.asarray(feature, dtype=float)


def _feature_matrix(features: Iterable[FeatureLike]) -> np.ndarray:
    rows = [_as_array(f) for f in features]
    return np.array(rows, dtype=float).reshape(len(rows), 4)


# =============================================================================
# MODEL
# =============================================================================
@dataclass
class ProjectionModel:
    """Class means, unit projection direction and the splitting threshold."""
    mean_shallow: np.ndarray
    mean_deep: np.ndarray
    direction: np.ndarray
    threshold: Optional[float] = None
    bandwidth_shallow: Optional[float] = None
    bandwidth_deep: Optional[float] = None
    fit_metadata: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "mean_shallow": [float(v) for v in self.mean_shallow],
            "mean_deep": [float(v) for v in self.mean_deep],
            "direction": [float(v) for v in self.direction],
            "threshold": self.threshold,
            "bandwidth_shallow": self.bandwidth_shallow,
            "bandwidth_deep": self.bandwidth_deep,
            "fit_metadata": self.fit_metadata,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProjectionModel":
        data = json.loads(text)
        return cls(
            mean_shallow=np.asarray(data["mean_shallow"], dtype=float),
            mean_deep=np.asarray(data["mean_deep"], dtype=float),
            direction=np.asarray(data["direction"], dtype=float),
            threshold=data.get("threshold"),
            bandwidth_shallow=data.get("bandwidth_shallow"),
            bandwidth_deep=data.get("bandwidth_deep"),
            fit_metadata=data.get("fit_metadata", {}),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ProjectionModel":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class DensityEstimate:
    """A normalized density sampled on an ascending grid."""
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float

    @property
    def mean(self) -> float:
        return float(trapezoid(self.grid * self.values, self.grid))

    def at(self, x) -> np.ndarray:
        """Linear interpolation, zero outside the grid."""
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)


def fit_projection(shallow_features: Sequence[FeatureLike],
                   deep_features: Sequence[FeatureLike]) -> ProjectionModel:
    """Means over raw degree values; direction = normalized (mean_deep - mean_shallow)."""
    if len(shallow_features) == 0 or len(deep_features) == 0:
        raise EmptyClassError("both shallow and deep feature sets must be nonempty")
    mean_shallow = _feature_matrix(shallow_features).mean(axis=0)
    mean_deep = _feature_matrix(deep_features).mean(axis=0)
    difference = mean_deep - mean_shallow
    norm = float(np.linalg.norm(difference))
    if norm == 0.0 or not math.isfinite(norm):
        raise EmptyDirectionError("shallow and deep means coincide")
    return ProjectionModel(mean_shallow=mean_shallow, mean_deep=mean_deep,
                           direction=difference / norm)


def project(model: ProjectionModel, feature: FeatureLike) -> float:
    return float(np.dot(_as_array(feature) - model.mean_shallow, model.direction))


def project_many(model: ProjectionModel, features: Iterable[FeatureLike]) -> np.ndarray:
    return (_feature_matrix(features) - model.mean_shallow) @ model.direction


# =============================================================================
# DENSITY ESTIMATION
# =============================================================================
def _pair_distances(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Distinct-pair distances and their multiplicities. Small samples use every
    pair; large ones count pairs between equal-width bins.
    """
    if x.size <= KDE_CV_EXACT_MAX:
        d = pdist(x[:, None])
        return d, np.ones_like(d)

    counts, edges = np.histogram(x, bins=KDE_CV_BINS)
    counts = counts.astype(float)
    delta = edges[1] - edges[0]
    correlation = np.rint(fftconvolve(counts, counts[::-1]))[KDE_CV_BINS - 1:]
    # lag 0 holds every point paired with itself
    correlation[0] = float(np.sum(counts * (counts - 1.0)) / 2.0)
    distances = np.arange(KDE_CV_BINS) * delta
    keep = correlation > 0
    return distances[keep], correlation[keep]


def _lscv_scores(x: np.ndarray, bandwidths: np.ndarray) -> np.ndarray:
    """Unbiased least-squares cross-validation score of a Gaussian KDE per bandwidth."""
    n = x.size
    distances, weights = _pair_distances(x)
    scores = np.empty(bandwidths.size)
    for i, h in enumerate(bandwidths):
        u2 = (distances / h) ** 2
        convolved = np.sum(weights * np.exp(-u2 / 4.0)) / (2.0 * math.sqrt(math.pi))
        leave_one_out = np.sum(weights * np.exp(-u2 / 2.0)) / math.sqrt(2.0 * math.pi)
        scores[i] = (1.0 / (2.0 * math.sqrt(math.pi) * n * h)
                     + 2.0 * convolved / (n * n * h)
                     - 4.0 * leave_one_out / (n * (n - 1) * h))
    return scores


def reference_bandwidth(x: np.ndarray) -> float:
    """Normal-reference bandwidth 1.06 min(sd, IQR/1.34) n^(-1/5)."""
    sd = float(np.std(x, ddof=1))
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) or sd
    return 1.06 * spread * x.size ** (-0.2)


def lscv_bandwidth(x: np.ndarray) -> float:
    reference = reference_bandwidth(x)
    candidates = reference * np.geomspace(KDE_CANDIDATE_LOW, KDE_CANDIDATE_HIGH, KDE_CANDIDATES)
    scores = _lscv_scores(x, candidates)
    best = int(np.argmin(scores))
    if best in (0, candidates.size - 1):
        logger.debug("Cross-validated bandwidth %.4g on the edge of the search range", candidates[best])
    return float(candidates[best])


def fit_kde(samples: Sequence[float], grid_size: int = KDE_GRID_SIZE) -> DensityEstimate:
    """
    Gaussian KDE with a least-squares cross-validated bandwidth, evaluated on
    grid_size points spanning the data range +- 3 bandwidths and normalized
    to unit mass.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < KDE_MIN_SAMPLES:
        raise TooFewSamplesError(f"need at least {KDE_MIN_SAMPLES} samples, got {x.size}")
    if np.ptp(x) == 0.0:
        raise DegenerateSampleError("samples have zero variance")

    bandwidth = lscv_bandwidth(x)
    kde = stats.gaussian_kde(x, bw_method=bandwidth / float(np.std(x, ddof=1)))
    pad = KDE_GRID_PAD * bandwidth
    grid = np.linspace(x.min() - pad, x.max() + pad, grid_size)
    values = np.clip(kde(grid), 0.0, None)
    values = values / trapezoid(values, grid)
    return DensityEstimate(grid=grid, values=values, bandwidth=bandwidth)


# =============================================================================
# THRESHOLD
# =============================================================================
def density_crossings(dens_shallow: DensityEstimate, dens_deep: DensityEstimate,
                      grid_size: int = THRESHOLD_GRID_SIZE) -> np.ndarray:
    """Points where dens_shallow - dens_deep changes sign on a common grid."""
    lo = min(dens_shallow.grid[0], dens_deep.grid[0])
    hi = max(dens_shallow.grid[-1], dens_deep.grid[-1])
    grid = np.linspace(lo, hi, grid_size)
    diff = dens_shallow.at(grid) - dens_deep.at(grid)

    nonzero = np.nonzero(diff)[0]
    crossings = []
    for i, j in zip(nonzero[:-1], nonzero[1:]):
        if np.sign(diff[i]) == np.sign(diff[j]):
            continue
        if j == i + 1:
            # linear interpolation between adjacent grid points
            fraction = diff[i] / (diff[i] - diff[j])
            crossings.append(grid[i] + fraction * (grid[j] - grid[i]))
        else:
            # sign change across a run of exact zeros: middle of the run
            crossings.append(0.5 * (grid[i + 1] + grid[j - 1]))
    return np.array(crossings, dtype=float)


def find_threshold(dens_shallow: DensityEstimate, dens_deep: DensityEstimate,
                   midpoint: Optional[float] = None) -> Tuple[float, bool]:
    """
    (threshold, crossing_found). Among several crossings the one nearest the
    midpoint of the class means wins; with none, the midpoint itself is used.
    """
    if midpoint is None:
        midpoint = 0.5 * (dens_shallow.mean + dens_deep.mean)
    crossings = density_crossings(dens_shallow, dens_deep)
    if crossings.size == 0:
        logger.warning("Densities never cross; threshold falls back to the class-mean midpoint %.4f", midpoint)
        return float(midpoint), False
    nearest = crossings[np.argmin(np.abs(crossings - midpoint))]
    return float(nearest), True


# =============================================================================
# LABELS
# =============================================================================
def classify(model: ProjectionModel, feature: FeatureLike, depth: DepthClass) -> ModeLabel:
    """Suffix 1 below the threshold, suffix 2 at or above it."""
    if model.threshold is None:
        raise ModelNotFittedError("model has no threshold")
    return _side_label(project(model, feature), model.threshold, depth)


def _side_label(value: float, threshold: float, depth: DepthClass) -> ModeLabel:
    return ModeLabel.from_parts(depth, 2 if value >= threshold else 1)


def confusion_table(labels: Iterable[ModeLabel]) -> pd.DataFrame:
    """
    Actual depth x predicted side. The side holding the majority of Deep
    events is "Predicted deep"; with no deep majority, suffix 2 is.
    """
    counts = {label: 0 for label in ModeLabel}
    for label in labels:
        counts[label] += 1

    deep_side = 1 if counts[ModeLabel.DEEP1] > counts[ModeLabel.DEEP2] else 2
    shallow_side = 3 - deep_side
    rows = {
        DepthClass.SHALLOW.value: [counts[ModeLabel.from_parts(DepthClass.SHALLOW, shallow_side)],
                                   counts[ModeLabel.from_parts(DepthClass.SHALLOW, deep_side)]],
        DepthClass.DEEP.value: [counts[ModeLabel.from_parts(DepthClass.DEEP, shallow_side)],
                                counts[ModeLabel.from_parts(DepthClass.DEEP, deep_side)]],
    }
    return pd.DataFrame.from_dict(rows, orient="index", columns=[PREDICTED_SHALLOW, PREDICTED_DEEP])


class ModeClassifier:
    """
    Fits the projection, both densities and the threshold in one pass and
    labels events afterwards.
    """

    def __init__(self, grid_size: int = KDE_GRID_SIZE):
        self.grid_size = grid_size
        self.model: Optional[ProjectionModel] = None
        self.density_shallow: Optional[DensityEstimate] = None
        self.density_deep: Optional[DensityEstimate] = None

    def fit(self, shallow_features: Sequence[FeatureLike],
            deep_features: Sequence[FeatureLike]) -> ProjectionModel:
        model = fit_projection(shallow_features, deep_features)
        shallow_proj = project_many(model, shallow_features)
        deep_proj = project_many(model, deep_features)

        self.density_shallow = fit_kde(shallow_proj, self.grid_size)
        self.density_deep = fit_kde(deep_proj, self.grid_size)
        midpoint = 0.5 * (float(shallow_proj.mean()) + float(deep_proj.mean()))
        threshold, crossing_found = find_threshold(self.density_shallow, self.density_deep, midpoint)

        model.threshold = threshold
        model.bandwidth_shallow = self.density_shallow.bandwidth
        model.bandwidth_deep = self.density_deep.bandwidth
        model.fit_metadata = {
            "kde_kernel": "gaussian",
            "kde_bandwidth_method": "least-squares cross-validation",
            "kde_candidates": KDE_CANDIDATES,
            "kde_candidate_range": [KDE_CANDIDATE_LOW, KDE_CANDIDATE_HIGH],
            "kde_grid_size": self.grid_size,
            "crossing_found": crossing_found,
            "projection_centre": "mean_shallow",
            "tie_rule": "projection == threshold -> suffix 2",
            "n_shallow": int(shallow_proj.size),
            "n_deep": int(deep_proj.size),
        }
        logger.info("Projection threshold %.4f (bandwidths %.4f shallow, %.4f deep)",
                    threshold, model.bandwidth_shallow, model.bandwidth_deep)
        self.model = model
        return model

    def label(self, features: Sequence[FeatureLike], depths: Sequence[DepthClass]) -> Tuple[np.ndarray, List[ModeLabel]]:
        """Projections and labels for a batch of events."""
        if self.model is None or self.model.threshold is None:
            raise ModelNotFittedError("fit the classifier before labelling")
        projections = project_many(self.model, features)
        labels = [_side_label(value, self.model.threshold, depth)
                  for value, depth in zip(projections, depths)]
        return projections, labels

    def density_frame(self) -> pd.DataFrame:
        """Both densities on a shared grid, for export and plotting."""
        if self.density_shallow is None or self.density_deep is None:
            raise ModelNotFittedError("no densities fitted")
        lo = min(self.density_shallow.grid[0], self.density_deep.grid[0])
        hi = max(self.density_shallow.grid[-1], self.density_deep.grid[-1])
        grid = np.linspace(lo, hi, self.grid_size)
        return pd.DataFrame({
            "grid": grid,
            "density_shallow": self.density_shallow.at(grid),
            "density_deep": self.density_deep.at(grid),
            "threshold": self.model.threshold,
        })
