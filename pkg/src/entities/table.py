"""
Lagged vectors, 2x2 contingency tables, and association test results.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..constants import Comparison


@dataclass(frozen=True)
class LaggedPair:
    """Stacked predictor (A), response (B) and cross predictor (C) vectors."""
    A: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    lag: int
    n: int                  # length of the original series


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts of (X, Y) co-occurrence: n11 = Sum(X*Y) and so on."""
    n11: int
    n10: int
    n01: int
    n00: int

    def __post_init__(self):
        if min(self.n11, self.n10, self.n01, self.n00) < 0:
            raise ValueError("contingency counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n11 + self.n10 + self.n01 + self.n00

    @property
    def row_margins(self):
        return self.n11 + self.n10, self.n01 + self.n00

    @property
    def col_margins(self):
        return self.n11 + self.n01, self.n10 + self.n00

    @property
    def has_zero_margin(self) -> bool:
        return min(*self.row_margins, *self.col_margins) == 0

    def as_tuple(self):
        return self.n11, self.n10, self.n01, self.n00


@dataclass(frozen=True)
class AssociationResult:
    """One calibrated association test for a cell."""
    region_id: str
    sub_index: int
    comparison: Comparison
    lag: int
    periods_per_year: int
    table: ContingencyTable2x2
    chi_square: float
    log_odds: float
    p_value: float
    log_odds_percentile: float
    n_permutations: int
    seed: int
    degenerate: bool = False
    asymptotic_p: Optional[float] = None

    @property
    def test_id(self) -> str:
        return (f"{self.region_id}:{self.sub_index}:{self.comparison.value}:"
                f"{self.lag}:{self.periods_per_year}")

    @property
    def family(self) -> str:
        return f"{self.comparison.value}:{self.lag}:{self.periods_per_year}"

    def to_row(self) -> Dict[str, object]:
        n11, n10, n01, n00 = self.table.as_tuple()
        return {
            "region_id": self.region_id,
            "sub_index": self.sub_index,
            "comparison": self.comparison.value,
            "lag": self.lag,
            "periods_per_year": self.periods_per_year,
            "n11": n11,
            "n10": n10,
            "n01": n01,
            "n00": n00,
            "chi_square": self.chi_square,
            "log_odds": self.log_odds,
            "p_value": self.p_value,
            "log_odds_percentile": self.log_odds_percentile,
            "degenerate": self.degenerate,
            "seed": self.seed,
            "asymptotic_p": self.asymptotic_p,
        }
