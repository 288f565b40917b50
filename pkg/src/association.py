"""
Temporal association tests on binary presence vectors.

Within-mode tests compare the stacked lagged predictor A with the stacked
response B; cross-mode tests compare the cross-stacked predictor C with B;
the pooled control lags a single unseparated vector against itself.
Significance is calibrated by shuffling each full vector independently.
"""

import hashlib
import logging
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from .constants import (
    CHI_SQUARE_REL_TOLERANCE, HALDANE_CORRECTION, LAG_CHOICES, N_PERMUTATIONS,
    PERMUTATION_CHUNK, Comparison,
)
from .entities.table import AssociationResult, ContingencyTable2x2, LaggedPair
from .errors import LengthMismatchError, SeriesTooShortError

logger = logging.getLogger(__name__)


def _as_bits(v) -> np.ndarray:
    bits = np.asarray(v, dtype=np.int8)
    if bits.ndim != 1:
        raise ValueError("presence vectors must be one-dimensional")
    return bits


def _check_lag(n: int, lag: int) -> None:
    if lag not in LAG_CHOICES:
        raise ValueError(f"lag must be one of {LAG_CHOICES}")
    if n <= lag + 1:
        raise SeriesTooShortError(f"series of length {n} too short for lag {lag}")


# =============================================================================
# TABLES
# =============================================================================
def lagged_pair(v1, v2, lag: int) -> LaggedPair:
    """A = v1[:n-lag] + v2[:n-lag], B = v1[lag:] + v2[lag:], C = v2[:n-lag] + v1[:n-lag]."""
    v1, v2 = _as_bits(v1), _as_bits(v2)
    if v1.size != v2.size:
        raise LengthMismatchError(f"vectors of length {v1.size} and {v2.size}")
    n = int(v1.size)
    _check_lag(n, lag)
    head1, head2 = v1[:n - lag], v2[:n - lag]
    return LaggedPair(
        A=np.concatenate([head1, head2]),
        B=np.concatenate([v1[lag:], v2[lag:]]),
        C=np.concatenate([head2, head1]),
        lag=lag,
        n=n,
    )


def contingency(x, y) -> ContingencyTable2x2:
    """n11 = Sum(X*Y), n10 = Sum(X*(1-Y)), n01 = Sum((1-X)*Y), n00 = Sum((1-X)*(1-Y))."""
    x, y = _as_bits(x), _as_bits(y)
    if x.size != y.size:
        raise LengthMismatchError(f"vectors of length {x.size} and {y.size}")
    n11 = int(np.sum(x & y))
    sx, sy = int(x.sum()), int(y.sum())
    return ContingencyTable2x2(
        n11=n11,
        n10=sx - n11,
        n01=sy - n11,
        n00=int(x.size) - sx - sy + n11,
    )


# =============================================================================
# STATISTICS
# =============================================================================
def chi_square_counts(n11, n10, n01, n00) -> np.ndarray:
    """Pearson chi-square of 2x2 tables (vectorised); 0 where any margin is 0."""
    n11, n10, n01, n00 = (np.asarray(c, dtype=np.float64) for c in (n11, n10, n01, n00))
    total = n11 + n10 + n01 + n00
    margins = (n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00)
    cross = n11 * n00 - n10 * n01
    with np.errstate(divide="ignore", invalid="ignore"):
        value = total * cross * cross / margins
    return np.where(margins > 0, value, 0.0)


def log_odds_counts(n11, n10, n01, n00) -> np.ndarray:
    """Log odds ratio with 1/2 added to every cell (vectorised)."""
    h = HALDANE_CORRECTION
    n11, n10, n01, n00 = (np.asarray(c, dtype=np.float64) for c in (n11, n10, n01, n00))
    return np.log((n11 + h) * (n00 + h)) - np.log((n10 + h) * (n01 + h))


def chi_square(table: ContingencyTable2x2) -> float:
    if table.total <= 0:
        raise ValueError("empty table")
    return float(chi_square_counts(*table.as_tuple()))


def log_odds(table: ContingencyTable2x2) -> float:
    if table.total <= 0:
        raise ValueError("empty table")
    return float(log_odds_counts(*table.as_tuple()))


def asymptotic_p(chi: float) -> float:
    """Chi-square(1) tail probability; diagnostic only."""
    return float(stats.chi2.sf(chi, df=1))


# =============================================================================
# PERMUTATION CALIBRATION
# =============================================================================
def derive_seed(global_seed: int, *key) -> int:
    """Stable 63-bit seed from a global seed and a test key."""
    text = "|".join([str(global_seed)] + [str(part) for part in key])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _batch_counts(p1: np.ndarray, p2: Optional[np.ndarray], lag: int,
                  comparison: Comparison) -> Tuple[np.ndarray, ...]:
    """
    2x2 counts for a batch of (rows of) vectors. p1, p2 have shape (k, n);
    for the pooled control p2 is None.
    """
    n = p1.shape[1]
    if comparison is Comparison.POOLED:
        x, y = p1[:, :n - lag], p1[:, lag:]
    else:
        b = np.concatenate([p1[:, lag:], p2[:, lag:]], axis=1)
        if comparison is Comparison.WITHIN:
            x = np.concatenate([p1[:, :n - lag], p2[:, :n - lag]], axis=1)
        else:
            x = np.concatenate([p2[:, :n - lag], p1[:, :n - lag]], axis=1)
        y = b

    x = x.astype(np.int64)
    y = y.astype(np.int64)
    length = x.shape[1]
    n11 = np.sum(x * y, axis=1)
    sx = np.sum(x, axis=1)
    sy = np.sum(y, axis=1)
    return n11, sx - n11, sy - n11, length - sx - sy + n11


def _statistics(counts) -> Tuple[np.ndarray, np.ndarray]:
    return chi_square_counts(*counts), log_odds_counts(*counts)


class PermutationTest:
    """
    Observed statistics plus their permutation calibration for one vector pair.

    Every permutation shuffles v1 and v2 independently as whole vectors and
    rebuilds the lagged table; p_value counts permuted chi-square values at
    or above the observed one, log_odds_percentile counts permuted log odds
    strictly below the observed one.
    """

    def __init__(self, v1, v2, lag: int, comparison: Comparison,
                 n_permutations: int = N_PERMUTATIONS, seed: int = 0):
        self.v1 = _as_bits(v1)
        self.v2 = None if comparison is Comparison.POOLED else _as_bits(v2)
        if self.v2 is not None and self.v1.size != self.v2.size:
            raise LengthMismatchError(f"vectors of length {self.v1.size} and {self.v2.size}")
        _check_lag(int(self.v1.size), lag)
        if n_permutations < 1:
            raise ValueError("n_permutations must be at least 1")
        self.lag = lag
        self.comparison = comparison
        self.n_permutations = n_permutations
        self.seed = seed

    def observed(self) -> Tuple[ContingencyTable2x2, float, float]:
        counts = _batch_counts(self.v1[None, :],
                               None if self.v2 is None else self.v2[None, :],
                               self.lag, self.comparison)
        chi, lo = _statistics(counts)
        table = ContingencyTable2x2(*(int(c[0]) for c in counts))
        return table, float(chi[0]), float(lo[0])

    def run(self) -> Tuple[ContingencyTable2x2, float, float, float, float]:
        """(table, chi_square, log_odds, p_value, log_odds_percentile)."""
        table, chi_obs, lo_obs = self.observed()
        rng = np.random.default_rng(self.seed)
        tolerance = CHI_SQUARE_REL_TOLERANCE * max(1.0, chi_obs)

        exceed = 0
        below = 0
        done = 0
        while done < self.n_permutations:
            k = min(PERMUTATION_CHUNK, self.n_permutations - done)
            p1 = rng.permuted(np.tile(self.v1, (k, 1)), axis=1)
            p2 = None
            if self.v2 is not None:
                p2 = rng.permuted(np.tile(self.v2, (k, 1)), axis=1)
            chi, lo = _statistics(_batch_counts(p1, p2, self.lag, self.comparison))
            exceed += int(np.sum(chi >= chi_obs - tolerance))
            below += int(np.sum(lo < lo_obs))
            done += k

        return (table, chi_obs, lo_obs,
                exceed / self.n_permutations, below / self.n_permutations)


def permutation_calibrate(v1, v2, lag: int, comparison: Comparison,
                          n_perm: int = N_PERMUTATIONS, seed: int = 0) -> Tuple[float, float, ContingencyTable2x2, float, float]:
    """(p_value, log_odds_percentile, table, chi_square, log_odds)."""
    table, chi, lo, p_value, percentile = PermutationTest(v1, v2, lag, comparison, n_perm, seed).run()
    return p_value, percentile, table, chi, lo


def run_test(v1, v2, lag: int, comparison: Comparison, n_perm: int, seed: int,
             region_id: str = "", sub_index: int = 0,
             periods_per_year: int = 26) -> AssociationResult:
    """One calibrated test packaged as an AssociationResult."""
    p_value, percentile, table, chi, lo = permutation_calibrate(v1, v2, lag, comparison, n_perm, seed)
    return AssociationResult(
        region_id=region_id,
        sub_index=sub_index,
        comparison=comparison,
        lag=lag,
        periods_per_year=periods_per_year,
        table=table,
        chi_square=chi,
        log_odds=lo,
        p_value=p_value,
        log_odds_percentile=percentile,
        n_permutations=n_perm,
        seed=seed,
        degenerate=table.has_zero_margin,
        asymptotic_p=asymptotic_p(chi),
    )


def pooled_control(v_all, lag: int, n_perm: int = N_PERMUTATIONS, seed: int = 0,
                   region_id: str = "", sub_index: int = 0,
                   periods_per_year: int = 26) -> AssociationResult:
    """A = v_all[:n-lag], B = v_all[lag:]; only v_all is shuffled."""
    return run_test(v_all, None, lag, Comparison.POOLED, n_perm, seed,
                    region_id=region_id, sub_index=sub_index,
                    periods_per_year=periods_per_year)
