"""
Principal axes of the moment tensor and the four classifier variables.

Vectors are expressed in the catalog's (r, t, p) = (up, south, east) basis.
Azimuth is measured clockwise from north, plunge downward from horizontal.
"""

import logging
import math
from typing import Sequence, Tuple

import numpy as np

from .constants import DEGENERACY_TOLERANCE, VERTICAL_TOLERANCE, FeatureQuality
from .entities.record import Axis, FeatureVector, MomentTensorRecord, PrincipalAxes

logger = logging.getLogger(__name__)


def tensor_matrix(tensor: Sequence[float]) -> np.ndarray:
    """Six components (Mrr, Mtt, Mpp, Mrt, Mrp, Mtp) -> symmetric 3x3 matrix."""
    mrr, mtt, mpp, mrt, mrp, mtp = (float(c) for c in tensor)
    return np.array([
        [mrr, mrt, mrp],
        [mrt, mtt, mtp],
        [mrp, mtp, mpp],
    ])


def matrix_components(matrix: np.ndarray) -> Tuple[float, float, float, float, float, float]:
    """Symmetric 3x3 matrix -> (Mrr, Mtt, Mpp, Mrt, Mrp, Mtp)."""
    m = np.asarray(matrix, dtype=float)
    return (float(m[0, 0]), float(m[1, 1]), float(m[2, 2]),
            float(m[0, 1]), float(m[0, 2]), float(m[1, 2]))


def vector_to_azimuth_plunge(v: Sequence[float]) -> Tuple[float, float]:
    """
    Azimuth and plunge (degrees) of an axis given as an (up, south, east) vector.
    The axis is flipped to point downward; a vertical axis gets azimuth 0 and
    a horizontal one is reported with azimuth in [0, 180).
    """
    up, south, east = (float(c) for c in v)
    norm = math.sqrt(up * up + south * south + east * east)
    if norm == 0.0:
        raise ValueError("axis vector must be nonzero")
    up, south, east = up / norm, south / norm, east / norm
    down = -up
    if down < 0:
        down, south, east = -down, -south, -east
    north = -south

    plunge = math.degrees(math.asin(min(1.0, down)))
    horizontal = math.hypot(north, east)
    if horizontal < VERTICAL_TOLERANCE:
        return 0.0, 90.0

    azimuth = math.degrees(math.atan2(east, north)) % 360.0
    if down < VERTICAL_TOLERANCE and azimuth >= 180.0:
        # horizontal axis: both directions are "downward"
        azimuth -= 180.0
    if azimuth >= 360.0:
        azimuth -= 360.0
    return azimuth, plunge


def azimuth_plunge_to_vector(azimuth: float, plunge: float) -> np.ndarray:
    """Unit (up, south, east) vector pointing down along the given axis."""
    az = math.radians(azimuth)
    pl = math.radians(plunge)
    horizontal = math.cos(pl)
    return np.array([-math.sin(pl), -horizontal * math.cos(az), horizontal * math.sin(az)])


def symmetric_eig3(tensor: Sequence[float]) -> PrincipalAxes:
    """Eigen-decomposition with eigenvalues descending and axes oriented downward."""
    matrix = tensor_matrix(tensor)
    values, vectors = np.linalg.eigh(matrix)   # ascending, columns
    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order].T              # rows

    scale = float(np.max(np.abs(values)))
    gaps = np.abs(np.diff(values))
    degenerate = scale == 0.0 or bool(np.any(gaps < DEGENERACY_TOLERANCE * scale))

    axes = []
    vertical = False
    for value, vector in zip(values, vectors):
        azimuth, plunge = vector_to_azimuth_plunge(vector)
        if math.hypot(vector[1], vector[2]) < VERTICAL_TOLERANCE:
            vertical = True
        if degenerate:
            azimuth = 0.0
        axes.append(Axis(eigenvalue=float(value), plunge=plunge, azimuth=azimuth))

    return PrincipalAxes(axes=tuple(axes), vectors=vectors, degenerate=degenerate,
                         vertical=vertical)


def reconstruct(axes: PrincipalAxes) -> np.ndarray:
    """Sum of lambda_i v_i v_i^T."""
    values = np.array(axes.eigenvalues)
    return (axes.vectors.T * values) @ axes.vectors


def tensor_from_axes(eigenvalues: Sequence[float], vectors: np.ndarray) -> np.ndarray:
    """Symmetric matrix with the given eigenvalues and (row) eigenvectors."""
    vectors = np.asarray(vectors, dtype=float)
    return (vectors.T * np.asarray(eigenvalues, dtype=float)) @ vectors


def extract_features(record: MomentTensorRecord, prefer_catalog_axes: bool = True) -> FeatureVector:
    """
    The four classifier variables: azimuths of the three principal axes in
    descending eigenvalue order, and the plunge of the third (smallest) axis.
    """
    if prefer_catalog_axes and record.catalog_axes is not None:
        ordered = sorted(record.catalog_axes, key=lambda axis: axis.eigenvalue, reverse=True)
        quality = FeatureQuality.OK
        values = [ordered[0].eigenvalue, ordered[1].eigenvalue, ordered[2].eigenvalue]
        if any(abs(a - b) <= DEGENERACY_TOLERANCE * max(abs(v) for v in values)
               for a, b in zip(values, values[1:])):
            quality = FeatureQuality.DEGENERATE
        return FeatureVector(
            az1=float(ordered[0].azimuth) % 360.0,
            az2=float(ordered[1].azimuth) % 360.0,
            az3=float(ordered[2].azimuth) % 360.0,
            plunge3=float(ordered[2].plunge),
            quality=quality,
        )

    axes = symmetric_eig3(record.tensor)
    if axes.degenerate:
        quality = FeatureQuality.DEGENERATE
    elif axes.vertical:
        quality = FeatureQuality.VERTICAL
    else:
        quality = FeatureQuality.OK
    first, second, third = axes.axes
    return FeatureVector(
        az1=first.azimuth,
        az2=second.azimuth,
        az3=third.azimuth,
        plunge3=third.plunge,
        quality=quality,
    )
