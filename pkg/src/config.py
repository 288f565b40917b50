"""
Run configuration: defaults from constants, optionally overridden by a JSON
config file and then by command-line flags.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

from .constants import (
    DEFAULT_FDR_SCOPE, DEFAULT_LAGS, DEFAULT_OUTPUT_DIR, DEFAULT_PERIODS_PER_YEAR,
    DEFAULT_REGION_PRESET, DEFAULT_WORKERS, DEPTH_SPLIT_KM, FDR_Q, FDR_SCOPES,
    LAG_CHOICES, MIN_EVENTS_PER_MODE, MIN_MAGNITUDE, N_PERMUTATIONS, PERIODS_CHOICES,
    PREFER_CATALOG_AXES, RANDOM_SEED, SPAN_END_YEAR, SPAN_START_YEAR,
)
from .errors import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Every tunable that affects the results of a run."""
    catalog: List[str] = field(default_factory=list)
    min_mw: float = MIN_MAGNITUDE
    depth_split: float = DEPTH_SPLIT_KM
    span: Tuple[int, int] = (SPAN_START_YEAR, SPAN_END_YEAR)
    periods: Tuple[int, ...] = DEFAULT_PERIODS_PER_YEAR
    lags: Tuple[int, ...] = DEFAULT_LAGS
    nperm: int = N_PERMUTATIONS
    q: float = FDR_Q
    regions: str = DEFAULT_REGION_PRESET
    seed: int = RANDOM_SEED
    fdr_scope: str = DEFAULT_FDR_SCOPE
    min_events: int = MIN_EVENTS_PER_MODE
    out: str = DEFAULT_OUTPUT_DIR
    workers: int = DEFAULT_WORKERS
    strict: bool = False
    prefer_catalog_axes: bool = PREFER_CATALOG_AXES

    def validate(self) -> "RunConfig":
        start, end = self.span
        if start > end:
            raise ConfigError(f"span start {start} after end {end}")
        if not self.periods or any(p not in PERIODS_CHOICES for p in self.periods):
            raise ConfigError(f"periods must be drawn from {PERIODS_CHOICES}, got {self.periods}")
        if not self.lags or any(lag not in LAG_CHOICES for lag in self.lags):
            raise ConfigError(f"lags must be drawn from {LAG_CHOICES}, got {self.lags}")
        if not 0.0 < self.q < 1.0:
            raise ConfigError(f"q must lie in (0, 1), got {self.q}")
        if self.nperm < 1:
            raise ConfigError("nperm must be at least 1")
        if self.fdr_scope not in FDR_SCOPES:
            raise ConfigError(f"fdr scope must be one of {FDR_SCOPES}, got {self.fdr_scope!r}")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.min_events < 0:
            raise ConfigError("min_events must be non-negative")
        return self

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def as_dict(self) -> Dict[str, Any]:
        """JSON-ready echo of the configuration."""
        data = asdict(self)
        data["span"] = list(self.span)
        data["periods"] = list(self.periods)
        data["lags"] = list(self.lags)
        return data

    def merged(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """A copy with every non-None override applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = asdict(self)
        data.update({key: value for key, value in overrides.items() if value is not None})
        return RunConfig(**_normalize(data))


def _normalize(data: Dict[str, Any]) -> Dict[str, Any]:
    """Coerce JSON/flag values into the dataclass field types."""
    out = dict(data)
    try:
        if isinstance(out.get("catalog"), (str, Path)):
            out["catalog"] = [str(out["catalog"])]
        out["catalog"] = [str(path) for path in out.get("catalog", [])]
        out["span"] = parse_span(out["span"]) if isinstance(out["span"], str) else tuple(int(y) for y in out["span"])
        out["periods"] = parse_int_list(out["periods"])
        out["lags"] = parse_int_list(out["lags"])
        for key in ("nperm", "seed", "workers", "min_events"):
            out[key] = int(out[key])
        for key in ("min_mw", "depth_split", "q"):
            out[key] = float(out[key])
        out["regions"] = str(out["regions"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad configuration value: {exc}") from exc
    return out


def parse_span(text: str) -> Tuple[int, int]:
    """'1977:2010' -> (1977, 2010)."""
    try:
        start, end = text.split(":")
        return int(start), int(end)
    except ValueError as exc:
        raise ConfigError(f"span must look like START:END, got {text!r}") from exc


def parse_int_list(value: Union[str, int, List[int], Tuple[int, ...]]) -> Tuple[int, ...]:
    """'1,2' or [1, 2] or 26 -> tuple of ints."""
    if isinstance(value, int):
        return (value,)
    if isinstance(value, str):
        try:
            return tuple(int(part) for part in value.split(",") if part.strip())
        except ValueError as exc:
            raise ConfigError(f"expected a comma-separated list of integers, got {value!r}") from exc
    return tuple(int(v) for v in value)


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Defaults < JSON file < overrides (flags), validated."""
    config = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            file_values = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        config = config.merged(file_values)
        logger.debug("Loaded config file %s", path)
    if overrides:
        config = config.merged(overrides)
    return config.validate()
