"""
Trace persistence: one CSV row per optimizer step.

Columns are written in the fixed ``TRACE_COLUMNS`` order, absent optional
values as empty fields, and reals in shortest round-trip form (``repr``) so a
read after a write restores every float bit for bit.
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Protocol, Sequence, TextIO, Union

from diagnostics.trace import TRACE_COLUMNS, TraceRecord

logger = logging.getLogger(__name__)


class TraceFormatError(ValueError):
    """A trace CSV that does not follow the column layout."""


class TraceSinkError(OSError):
    """Writing to a trace sink failed; ``rows_flushed`` rows reached the sink."""

    def __init__(self, rows_flushed: int, cause: Optional[BaseException] = None):
        self.rows_flushed = rows_flushed
        message = f"trace sink failed after {rows_flushed} rows"
        if cause is not None:
            message += f": {cause}"
        super().__init__(message)


class TraceSink(Protocol):
    rows_written: int

    def write(self, record: TraceRecord) -> None: ...

    def flush(self) -> None: ...


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def _row(record: TraceRecord) -> List[str]:
    return [_format(getattr(record, column)) for column in TRACE_COLUMNS]


class MemoryTraceSink:
    """Keeps records in a list; used by tests and by in-process comparisons."""

    def __init__(self):
        self.records: List[TraceRecord] = []

    @property
    def rows_written(self) -> int:
        return len(self.records)

    def write(self, record: TraceRecord) -> None:
        self.records.append(record)

    def flush(self) -> None:
        pass


class CsvTraceSink:
    """
    Streams records to a text stream, header first.

    All records must carry the same set of optional columns. Any ``OSError``
    from the stream is re-raised as ``TraceSinkError`` after flushing what
    was already written.
    """

    def __init__(self, stream: TextIO):
        self.stream = stream
        self.rows_written = 0
        self._schema = None
        self._writer = csv.writer(stream, lineterminator="\n")
        self._guarded(lambda: self._writer.writerow(TRACE_COLUMNS))

    def _guarded(self, action) -> None:
        try:
            action()
        except OSError as exc:
            try:
                self.stream.flush()
            except OSError:
                pass
            raise TraceSinkError(self.rows_written, exc) from exc

    def write(self, record: TraceRecord) -> None:
        schema = record.present_optionals()
        if self._schema is None:
            self._schema = schema
        elif schema != self._schema:
            raise TraceFormatError(
                f"record at t={record.t} has optional columns {sorted(schema)}, "
                f"expected {sorted(self._schema)}"
            )
        self._guarded(lambda: self._writer.writerow(_row(record)))
        self.rows_written += 1

    def flush(self) -> None:
        self._guarded(self.stream.flush)


def write_trace_csv(records: Iterable[TraceRecord], sink: TextIO) -> int:
    """
    Write a header and one row per record.

    Returns:
        Number of records written

    Raises:
        TraceSinkError: On I/O failure, with the number of rows flushed
        TraceFormatError: If records disagree on their optional columns
    """
    writer = CsvTraceSink(sink)
    for record in records:
        writer.write(record)
    writer.flush()
    return writer.rows_written


def _check_header(header: Sequence[str]) -> None:
    names = [name.strip() for name in header]
    for column in TRACE_COLUMNS:
        if column not in names:
            raise TraceFormatError(f"trace header is missing column {column!r}")
    if names != list(TRACE_COLUMNS):
        raise TraceFormatError(
            f"trace header {names} does not match the column order {list(TRACE_COLUMNS)}"
        )


def _parse_float(text: str, column: str, row_number: int) -> Optional[float]:
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        raise TraceFormatError(f"row {row_number}: column {column!r} is not a number: {text!r}") from None


def read_trace_csv(source: Union[TextIO, str, Path]) -> List[TraceRecord]:
    """
    Read a trace written by ``write_trace_csv``.

    Fields are stripped of surrounding whitespace. Row numbers in errors count
    the header as row 1.

    Raises:
        TraceFormatError: On a header mismatch, a row of the wrong arity or a bad value
    """
    if isinstance(source, (str, Path)):
        with Path(source).open("r", encoding="utf-8", newline="") as handle:
            return read_trace_csv(handle)

    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise TraceFormatError("trace file is empty")
    _check_header(header)

    records = []
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not field.strip() for field in row):
            continue
        if len(row) != len(TRACE_COLUMNS):
            raise TraceFormatError(
                f"row {row_number}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}"
            )
        fields = [field.strip() for field in row]
        try:
            t = int(fields[0])
        except ValueError:
            raise TraceFormatError(f"row {row_number}: step {fields[0]!r} is not an integer") from None
        values: Dict[str, Optional[float]] = {
            column: _parse_float(text, column, row_number)
            for column, text in zip(TRACE_COLUMNS[1:], fields[1:])
        }
        for required in ("f_individual", "f_averaged", "alpha_t", "beta1_t"):
            if values[required] is None:
                raise TraceFormatError(f"row {row_number}: column {required!r} is empty")
        try:
            records.append(TraceRecord(t=t, **values))
        except ValueError as exc:
            raise TraceFormatError(f"row {row_number}: {exc}") from None
    return records


def write_comparison_csv(columns: Dict[str, Sequence[TraceRecord]], sink: TextIO) -> int:
    """
    Wide table aligned on t: one individual and one averaged gap column per run.

    Runs without a reference value contribute objective values instead of gaps.
    Steps missing from a run are left empty. Returns the number of data rows.
    """
    labels = list(columns)
    by_step: Dict[str, Dict[int, TraceRecord]] = {
        label: {record.t: record for record in trace} for label, trace in columns.items()
    }
    steps = sorted({t for table in by_step.values() for t in table})

    writer = csv.writer(sink, lineterminator="\n")
    header = ["t"]
    for label in labels:
        header.extend([f"{label}_individual", f"{label}_averaged"])
    writer.writerow(header)
    for t in steps:
        row = [str(t)]
        for label in labels:
            record = by_step[label].get(t)
            if record is None:
                row.extend(["", ""])
                continue
            individual = record.gap_individual if record.gap_individual is not None else record.f_individual
            averaged = record.gap_averaged if record.gap_averaged is not None else record.f_averaged
            row.extend([_format(individual), _format(averaged)])
        writer.writerow(row)
    logger.debug("Comparison table: %d runs, %d steps", len(labels), len(steps))
    return len(steps)
