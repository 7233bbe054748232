"""Charging-event ingestion from delimited files.

Events arrive as CSV rows with separate date and time columns for session
start and end. Column names vary between exports, so callers supply a
mapping from the canonical field names to the concrete header names.
Row-level problems (bad timestamps, negative energy) never raise; they are
counted in the ingest report and the row is dropped. Structural problems
(missing mapped column, unreadable stream) do raise.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Iterable

from .errors import SchemaError

# Canonical field names; charge_point_id may be absent from the mapping.
REQUIRED_FIELDS = (
    "event_id",
    "connector",
    "start_date",
    "start_time",
    "end_date",
    "end_time",
    "energy",
    "organization",
)
OPTIONAL_FIELDS = ("charge_point_id",)

DEFAULT_COLUMNS = {name: name for name in REQUIRED_FIELDS + OPTIONAL_FIELDS}
DEFAULT_COLUMNS["energy"] = "energy_kwh"

DEFAULT_DATE_FORMAT = "%Y-%m-%d"

MINUTES_PER_WEEK = 7 * 24 * 60


@dataclass(frozen=True)
class ChargingEvent:
    """One charging session, timestamps at minute resolution."""

    event_id: str
    charge_point_id: str | None
    connector: int
    start: datetime
    end: datetime
    energy_kwh: float
    organization: str

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError(f"event {self.event_id!r}: end precedes start")
        if self.connector < 1:
            raise ValueError(f"event {self.event_id!r}: connector must be >= 1")
        if self.energy_kwh < 0:
            raise ValueError(f"event {self.event_id!r}: negative energy")

    @property
    def duration_minutes(self) -> int:
        return int((self.end - self.start).total_seconds() // 60)


@dataclass(frozen=True)
class IngestReport:
    """Row accounting for one ingest pass.

    accepted + rejected_overlong + malformed equals the number of data rows
    read. parse_events itself never rejects for duration, so it reports
    rejected_overlong == 0; the build pipeline folds in the filter count via
    with_overlong_removed, keeping the total intact.
    """

    accepted: int = 0
    rejected_overlong: int = 0
    connector_defaulted: int = 0
    malformed: int = 0

    @property
    def total_rows(self) -> int:
        return self.accepted + self.rejected_overlong + self.malformed

    def with_overlong_removed(self, n_removed: int) -> "IngestReport":
        if n_removed > self.accepted:
            raise ValueError("cannot reject more events than were accepted")
        return replace(
            self,
            accepted=self.accepted - n_removed,
            rejected_overlong=self.rejected_overlong + n_removed,
        )

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected_overlong": self.rejected_overlong,
            "connector_defaulted": self.connector_defaulted,
            "malformed": self.malformed,
            "total_rows": self.total_rows,
        }


def _open_source(csv_source) -> tuple[IO[str], bool]:
    """Return a text stream and whether this function owns (must close) it."""
    if isinstance(csv_source, (str, Path)):
        return open(csv_source, "r", encoding="utf-8", newline=""), True
    if isinstance(csv_source, (bytes, bytearray)):
        return io.StringIO(csv_source.decode("utf-8")), True
    if hasattr(csv_source, "read"):
        probe = csv_source.read(0)
        if isinstance(probe, bytes):
            return io.TextIOWrapper(csv_source, encoding="utf-8", newline=""), False
        return csv_source, False
    raise TypeError(f"unsupported csv source: {type(csv_source)!r}")


def _parse_timestamp(date_text: str, time_text: str, date_format: str) -> datetime:
    """Combine date and time columns; seconds, if present, are truncated."""
    day = datetime.strptime(date_text.strip(), date_format)
    clock = time_text.strip()
    for fmt in ("%H:%M:%S", "%H:%M"):
        try:
            t = datetime.strptime(clock, fmt)
            break
        except ValueError:
            continue
    else:
        raise ValueError(f"unparseable time {time_text!r}")
    return day + timedelta(hours=t.hour, minutes=t.minute)


def parse_events(
    csv_source,
    columns: dict[str, str] | None = None,
    date_format: str = DEFAULT_DATE_FORMAT,
) -> tuple[list[ChargingEvent], IngestReport]:
    """Read charging events from a CSV source.

    :param csv_source: path, bytes, or an open text/binary stream.
    :param columns: mapping from canonical field names to CSV header names;
        defaults to the identity mapping (with ``energy`` -> ``energy_kwh``).
    :param date_format: strptime format for the date columns.
    :returns: (events in file order, IngestReport).
    :raises SchemaError: if a required mapped column is missing from the header.

    Row handling: unparseable timestamps, end-before-start intervals, and
    unparseable or negative energy or connector values mark the row malformed
    and drop it. A blank (or NaN) connector defaults to 1 and is counted.
    A blank energy defaults to 0.0. A blank charge point id becomes None.
    """
    colmap = dict(DEFAULT_COLUMNS)
    if columns:
        colmap.update(columns)
    missing_keys = [f for f in REQUIRED_FIELDS if f not in colmap]
    if missing_keys:
        raise SchemaError(f"column mapping lacks required fields: {missing_keys}")

    stream, owned = _open_source(csv_source)
    try:
        reader = csv.DictReader(stream)
        header = reader.fieldnames
        if header is None:
            raise SchemaError("csv source has no header row")
        for field in REQUIRED_FIELDS:
            if colmap[field] not in header:
                raise SchemaError(
                    f"required column {colmap[field]!r} (field {field!r}) not in header"
                )
        has_cp = colmap.get("charge_point_id") in header

        events: list[ChargingEvent] = []
        accepted = 0
        defaulted = 0
        malformed = 0
        for row in reader:
            try:
                start = _parse_timestamp(
                    row[colmap["start_date"]], row[colmap["start_time"]], date_format
                )
                end = _parse_timestamp(
                    row[colmap["end_date"]], row[colmap["end_time"]], date_format
                )
            except (ValueError, TypeError):
                malformed += 1
                continue

            raw_connector = (row[colmap["connector"]] or "").strip()
            if raw_connector == "" or raw_connector.lower() == "nan":
                connector = 1
                defaulted += 1
            else:
                try:
                    connector = int(raw_connector)
                except ValueError:
                    malformed += 1
                    continue

            raw_energy = (row[colmap["energy"]] or "").strip()
            try:
                energy = float(raw_energy) if raw_energy else 0.0
            except ValueError:
                malformed += 1
                continue

            cp_raw = (row.get(colmap.get("charge_point_id", ""), "") or "").strip()
            charge_point = cp_raw if has_cp and cp_raw else None

            try:
                event = ChargingEvent(
                    event_id=(row[colmap["event_id"]] or "").strip(),
                    charge_point_id=charge_point,
                    connector=connector,
                    start=start,
                    end=end,
                    energy_kwh=energy,
                    organization=(row[colmap["organization"]] or "").strip(),
                )
            except ValueError:
                malformed += 1
                continue
            events.append(event)
            accepted += 1
    finally:
        if owned:
            stream.close()

    report = IngestReport(
        accepted=accepted,
        rejected_overlong=0,
        connector_defaulted=defaulted,
        malformed=malformed,
    )
    return events, report


def filter_overlong(
    events: Iterable[ChargingEvent],
    max_duration_minutes: int = MINUTES_PER_WEEK,
) -> tuple[list[ChargingEvent], int]:
    """Drop events strictly longer than the cutoff.

    An event lasting exactly the cutoff is kept. Returns the surviving
    events (order preserved) and the number removed.
    """
    events = list(events)
    kept = [e for e in events if e.duration_minutes <= max_duration_minutes]
    return kept, len(events) - len(kept)
