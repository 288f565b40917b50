"""
Benjamini-Hochberg step-up selection of "interesting" tests.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .constants import DEFAULT_FDR_SCOPE, FDR_SCOPES, FDR_TABLE_COLUMNS
from .entities.table import AssociationResult
from .errors import ConfigError, EmptyInputError

logger = logging.getLogger(__name__)

PValues = Union[Mapping[str, float], Sequence[Tuple[str, float]]]


@dataclass
class FdrOutcome:
    """Result of one BH selection over a family of tests."""
    q: float
    m: int
    sorted_p: List[Tuple[str, float]]         # ascending, ties by id
    threshold_rank: int                       # largest k with p(k) <= k q / m, or 0
    interesting: Dict[str, bool] = field(default_factory=dict)

    @property
    def bh_thresholds(self) -> np.ndarray:
        return self.q * np.arange(1, self.m + 1) / self.m

    @property
    def selected(self) -> List[str]:
        return [test_id for test_id, _ in self.sorted_p[:self.threshold_rank]]

    def rows(self, family: str = "") -> List[Dict[str, object]]:
        thresholds = self.bh_thresholds
        return [
            {
                "test_id": test_id,
                "p_value": p,
                "rank": rank,
                "bh_threshold": float(thresholds[rank - 1]),
                "interesting": rank <= self.threshold_rank,
                "family": family,
            }
            for rank, (test_id, p) in enumerate(self.sorted_p, start=1)
        ]


def bh_select(p_values: PValues, q: float) -> FdrOutcome:
    """Standard step-up: the k smallest p-values are interesting, k maximal with p(k) <= k q / m."""
    items = list(p_values.items()) if isinstance(p_values, Mapping) else list(p_values)
    if not items:
        raise EmptyInputError("no p-values to select from")
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    for test_id, p in items:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value of {test_id} outside [0, 1]: {p}")

    ordered = sorted(((str(test_id), float(p)) for test_id, p in items), key=lambda item: (item[1], item[0]))
    m = len(ordered)
    p_sorted = np.array([p for _, p in ordered])
    passing = np.nonzero(p_sorted <= q * np.arange(1, m + 1) / m)[0]
    k = int(passing[-1]) + 1 if passing.size else 0

    interesting = {test_id: rank < k for rank, (test_id, _) in enumerate(ordered)}
    return FdrOutcome(q=q, m=m, sorted_p=ordered, threshold_rank=k, interesting=interesting)


def family_key(result: AssociationResult, scope: str) -> str:
    if scope == "per-region":
        return f"{result.family}:{result.region_id}"
    return result.family


def select_families(results: Iterable[AssociationResult], q: float,
                    scope: str = DEFAULT_FDR_SCOPE) -> "OrderedDict[str, FdrOutcome]":
    """
    BH per (comparison, lag, periods_per_year) family, pooled across cells
    or split by region.
    """
    if scope not in FDR_SCOPES:
        raise ConfigError(f"fdr scope must be one of {FDR_SCOPES}")
    families: Dict[str, List[Tuple[str, float]]] = {}
    for result in results:
        families.setdefault(family_key(result, scope), []).append((result.test_id, result.p_value))

    outcomes: "OrderedDict[str, FdrOutcome]" = OrderedDict()
    for key in sorted(families):
        outcome = bh_select(families[key], q)
        outcomes[key] = outcome
        logger.info("FDR family %s: %d of %d tests interesting", key, outcome.threshold_rank, outcome.m)
    return outcomes


def outcomes_frame(outcomes: Mapping[str, FdrOutcome]) -> pd.DataFrame:
    rows = [row for key, outcome in outcomes.items() for row in outcome.rows(key)]
    return pd.DataFrame(rows, columns=FDR_TABLE_COLUMNS)
