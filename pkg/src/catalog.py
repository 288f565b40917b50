"""
Global CMT catalog ingestion: NDK parsing and writing, event filters,
and the canonical event table.

NDK stores one event per 5 lines of 80 columns:
    1: hypocenter reference (catalog, date, time, lat, lon, depth, mb, Ms, region)
    2: CMT event name and inversion info
    3: centroid parameters
    4: tensor exponent, then Mrr, Mtt, Mpp, Mrt, Mrp, Mtp each with its sigma
    5: version, three principal axes (eigenvalue, plunge, azimuth),
       scalar moment, two nodal planes
"""

import gzip
import logging
import math
import re
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import pandas as pd

from .constants import (
    AXES_TABLE_COLUMNS, DEPTH_SPLIT_KM, EVENT_TABLE_COLUMNS, NDK_LINE_WIDTH,
    NDK_LINES_PER_EVENT, TENSOR_FLOAT_FORMAT, DepthClass,
)
from .entities.record import (
    Axis, MomentTensorRecord, moment_to_mw, mw_to_moment, normalize_longitude,
)
from .errors import InvalidRecordError, MalformedBlockError

logger = logging.getLogger(__name__)

TextSource = Union[str, Iterable[str]]

# Line 1 starts a block: 4-char catalog code, then a yyyy/mm/dd date.
_HEADER = re.compile(r"^.{4} ?\d{4}/\d{2}/\d{2}\s")


# =============================================================================
# PARSING
# =============================================================================
class NdkReader:
    """
    Parses NDK text into records.

    In strict mode the first malformed block raises MalformedBlockError.
    In lenient mode malformed blocks are skipped and counted in `skipped`.
    """

    def __init__(self, strict: bool = True):
        self.strict = strict
        self.skipped = 0

    def parse(self, text: TextSource) -> List[MomentTensorRecord]:
        records: List[MomentTensorRecord] = []
        for start_line, block in self._blocks(text):
            try:
                records.append(self._parse_block(block, start_line))
            except MalformedBlockError as exc:
                if self.strict:
                    raise
                self.skipped += 1
                logger.warning("Skipping malformed NDK block: %s", exc)
        return records

    def _blocks(self, text: TextSource):
        """
        Yield (1-based start line, lines) groups split at header lines.

        A group longer than one event keeps its first five lines as an event
        and yields the rest from its own line number.
        """
        lines = text.splitlines() if isinstance(text, str) else [l.rstrip("\n") for l in text]

        block: List[Tuple[int, str]] = []
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            if block and _HEADER.match(line):
                yield from self._split_overlong(block)
                block = []
            block.append((number, line))
        if block:
            yield from self._split_overlong(block)

    @staticmethod
    def _split_overlong(block: List[Tuple[int, str]]):
        if len(block) > NDK_LINES_PER_EVENT and _HEADER.match(block[0][1]):
            head, block = block[:NDK_LINES_PER_EVENT], block[NDK_LINES_PER_EVENT:]
            yield head[0][0], [line for _, line in head]
        yield block[0][0], [line for _, line in block]

    def _parse_block(self, block: Sequence[str], start_line: int) -> MomentTensorRecord:
        if len(block) != NDK_LINES_PER_EVENT:
            raise MalformedBlockError(
                f"expected {NDK_LINES_PER_EVENT} lines per event, got {len(block)}", start_line)
        if not _HEADER.match(block[0]):
            raise MalformedBlockError("missing hypocenter line", start_line)
        if not block[2].lstrip().startswith("CENTROID"):
            raise MalformedBlockError("missing CENTROID line", start_line + 2)

        line_no = start_line
        try:
            hypo = block[0]
            catalog = hypo[:4].strip()
            date_str, time_str, lat, lon, depth, mb, ms = hypo[4:56].split()
            region_name = hypo[56:].strip()
            origin_time = _parse_time(date_str, time_str)

            line_no = start_line + 1
            event_id = block[1][:16].strip()
            if not event_id:
                raise ValueError("empty event name")

            line_no = start_line + 3
            tokens = block[3].split()
            if len(tokens) != 13:
                raise ValueError(f"expected 13 tensor fields, got {len(tokens)}")
            exponent = int(tokens[0])
            scale = 10.0 ** exponent
            tensor = tuple(float(tokens[i]) * scale for i in (1, 3, 5, 7, 9, 11))

            line_no = start_line + 4
            tokens = block[4][3:].split()
            if len(tokens) < 10:
                raise ValueError(f"expected principal axes and moment, got {len(tokens)} fields")
            axes = tuple(
                Axis(eigenvalue=float(tokens[i]) * scale,
                     plunge=float(tokens[i + 1]),
                     azimuth=float(tokens[i + 2]))
                for i in (0, 3, 6)
            )
            scalar_moment = float(tokens[9]) * scale
        except (ValueError, IndexError) as exc:
            raise MalformedBlockError(str(exc), line_no) from exc

        try:
            return MomentTensorRecord(
                event_id=event_id,
                origin_time=origin_time,
                latitude=float(lat),
                longitude=normalize_longitude(float(lon)),
                depth_km=float(depth),
                scalar_moment=scalar_moment,
                magnitude=moment_to_mw(scalar_moment) if scalar_moment > 0 else float("nan"),
                tensor=tensor,
                catalog_axes=axes,
                exponent=exponent,
                catalog=catalog,
                region_name=region_name,
                mb=float(mb),
                ms=float(ms),
            )
        except InvalidRecordError as exc:
            raise InvalidRecordError(str(exc), start_line) from exc


def _parse_time(date_str: str, time_str: str) -> datetime:
    """yyyy/mm/dd and hh:mm:ss.s -> UTC datetime truncated to whole seconds."""
    year, month, day = (int(part) for part in date_str.split("/"))
    hour, minute, second = time_str.split(":")
    seconds = int(float(second))
    base = datetime(year, month, day, int(hour), int(minute), tzinfo=timezone.utc)
    # the catalog has the occasional 60.0 second
    return base + timedelta(seconds=seconds)


def parse_ndk(text: TextSource, strict: bool = True) -> List[MomentTensorRecord]:
    """Parse NDK text into records in file order."""
    return NdkReader(strict=strict).parse(text)


def read_ndk_files(paths: Iterable[Union[str, Path]], strict: bool = False) -> Tuple[List[MomentTensorRecord], int]:
    """Parse one or more NDK files (plain or .gz). Returns (records, skipped blocks)."""
    reader = NdkReader(strict=strict)
    records: List[MomentTensorRecord] = []
    for path in paths:
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt", encoding="ascii", errors="replace") as handle:
            parsed = reader.parse(handle.read())
        logger.info("Parsed %d events from %s", len(parsed), path)
        records.extend(parsed)
    if reader.skipped:
        logger.warning("Skipped %d malformed NDK blocks", reader.skipped)
    return records, reader.skipped


# =============================================================================
# WRITING
# =============================================================================
def choose_exponent(values: Iterable[float]) -> int:
    """Power of ten that brings the largest magnitude into [1, 10)."""
    largest = max((abs(v) for v in values), default=0.0)
    if largest == 0.0:
        return 0
    return int(math.floor(math.log10(largest)))


def format_ndk(record: MomentTensorRecord) -> str:
    """Five 80-column NDK lines for one record."""
    exponent = record.exponent or choose_exponent(record.tensor)
    scale = 10.0 ** exponent

    axes = record.catalog_axes
    if axes is None:
        from .tensor import symmetric_eig3  # local: only needed for records built from tensors
        axes = symmetric_eig3(record.tensor).axes

    t = record.origin_time.astimezone(timezone.utc)
    line1 = (
        f"{record.catalog[:4]:<4} {t:%Y/%m/%d} {t:%H:%M:%S}.0 "
        f"{record.latitude:6.2f} {record.longitude:7.2f} {record.depth_km:5.1f} "
        f"{record.mb:3.1f} {record.ms:3.1f} {record.region_name[:24]:<24}"
    )
    line2 = f"{record.event_id[:16]:<16} B:  0    0   0 S:  0    0   0 M:  0    0   0 CMT: 1 TRIHD:  0.0"
    line3 = (
        f"CENTROID:      0.0 0.0 {record.latitude:6.2f} 0.00 {record.longitude:7.2f} 0.00 "
        f"{record.depth_km:5.1f}  0.0 FREE S-00000000000000"
    )
    line4 = f"{exponent:2d}" + "".join(
        f" {component / scale:6.3f} {0.0:5.3f}" for component in record.tensor
    )
    line5 = "V10" + "".join(
        f"{axis.eigenvalue / scale:8.3f}{int(round(axis.plunge)):3d}{int(round(axis.azimuth)) % 360:4d}"
        for axis in axes
    ) + f"{record.scalar_moment / scale:8.3f}" + f"{0:4d}{0:3d}{0:5d}{0:4d}{0:3d}{0:5d}"

    return "\n".join(line[:NDK_LINE_WIDTH].ljust(NDK_LINE_WIDTH)
                     for line in (line1, line2, line3, line4, line5))


def write_ndk(records: Iterable[MomentTensorRecord]) -> str:
    """Serialize records to NDK text."""
    return "".join(format_ndk(record) + "\n" for record in records)


# =============================================================================
# FILTERS
# =============================================================================
def depth_class(record: MomentTensorRecord, split_km: float = DEPTH_SPLIT_KM) -> DepthClass:
    """Deep iff depth_km > split_km; a depth exactly at the split is Shallow."""
    return record.depth_class(split_km)


def filter_events(records: Iterable[MomentTensorRecord], min_magnitude: float,
                  time_window: Tuple[datetime, datetime]) -> List[MomentTensorRecord]:
    """Keep records with magnitude > min_magnitude and origin_time in [start, end)."""
    start, end = time_window
    if not math.isfinite(min_magnitude):
        raise ValueError("min_magnitude must be finite")
    if not start < end:
        raise ValueError("time window start must precede its end")
    return [
        record for record in records
        if record.magnitude > min_magnitude and start <= record.origin_time < end
    ]


def span_window(start_year: int, end_year: int) -> Tuple[datetime, datetime]:
    """[Jan 1 of start_year, Jan 1 of end_year + 1) in UTC."""
    return (datetime(start_year, 1, 1, tzinfo=timezone.utc),
            datetime(end_year + 1, 1, 1, tzinfo=timezone.utc))


# =============================================================================
# EVENT TABLES
# =============================================================================
TIME_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def format_origin_time(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime(TIME_FORMAT)


def parse_origin_time(text: str) -> datetime:
    return datetime.strptime(text, TIME_FORMAT).replace(tzinfo=timezone.utc)


def events_to_frame(records: Sequence[MomentTensorRecord]) -> pd.DataFrame:
    rows = [
        {
            "event_id": r.event_id,
            "origin_time": format_origin_time(r.origin_time),
            "lat": r.latitude,
            "lon": r.longitude,
            "depth_km": r.depth_km,
            "mw": round(r.magnitude, 3),
            "mrr": r.tensor[0], "mtt": r.tensor[1], "mpp": r.tensor[2],
            "mrt": r.tensor[3], "mrp": r.tensor[4], "mtp": r.tensor[5],
        }
        for r in records
    ]
    return pd.DataFrame(rows, columns=EVENT_TABLE_COLUMNS)


def event_table_csv(records: Sequence[MomentTensorRecord]) -> str:
    """Canonical event CSV; tensor components in scientific notation, 6 significant digits."""
    frame = events_to_frame(records)
    for col in ("mrr", "mtt", "mpp", "mrt", "mrp", "mtp"):
        frame[col] = frame[col].map(lambda v: TENSOR_FLOAT_FORMAT % v)
    return frame.to_csv(index=False)


def write_event_table(records: Sequence[MomentTensorRecord], path: Union[str, Path]) -> None:
    Path(path).write_text(event_table_csv(records))


def axes_to_frame(records: Sequence[MomentTensorRecord]) -> pd.DataFrame:
    rows = []
    for r in records:
        if r.catalog_axes is None:
            continue
        row = {"event_id": r.event_id}
        for i, axis in enumerate(r.catalog_axes, start=1):
            row[f"eigval{i}"] = axis.eigenvalue
            row[f"plunge{i}"] = axis.plunge
            row[f"azimuth{i}"] = axis.azimuth
        rows.append(row)
    return pd.DataFrame(rows, columns=AXES_TABLE_COLUMNS)


def read_event_table(path: Union[str, Path], axes_path: Optional[Union[str, Path]] = None) -> List[MomentTensorRecord]:
    """Rebuild records from the canonical CSV (and, if given, the axes CSV)."""
    frame = pd.read_csv(path, dtype={"event_id": str})
    axes_by_id = {}
    if axes_path is not None and Path(axes_path).exists():
        axes_frame = pd.read_csv(axes_path, dtype={"event_id": str})
        for row in axes_frame.itertuples(index=False):
            axes_by_id[row.event_id] = tuple(
                Axis(float(getattr(row, f"eigval{i}")),
                     float(getattr(row, f"plunge{i}")),
                     float(getattr(row, f"azimuth{i}")))
                for i in (1, 2, 3)
            )

    records = []
    for row in frame.itertuples(index=False):
        tensor = (float(row.mrr), float(row.mtt), float(row.mpp),
                  float(row.mrt), float(row.mrp), float(row.mtp))
        mw = float(row.mw)
        records.append(MomentTensorRecord(
            event_id=row.event_id,
            origin_time=parse_origin_time(row.origin_time),
            latitude=float(row.lat),
            longitude=float(row.lon),
            depth_km=float(row.depth_km),
            scalar_moment=mw_to_moment(mw),
            magnitude=mw,
            tensor=tensor,
            catalog_axes=axes_by_id.get(row.event_id),
            exponent=0,
        ))
    return records
