"""CSV writing and monitor-tally files."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .monitor import MonitorRecordStats
from .records import parse_record, record_label


def format_value(value) -> str:
    """Numbers with 12 significant digits, everything else via ``str``."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".12g")
    if value is None:
        return ""
    if hasattr(value, "item"):  # numpy scalars
        return format_value(value.item())
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Mapping | Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        values = [row[h] for h in header] if isinstance(row, Mapping) else list(row)
        if len(values) != len(header):
            raise ValueError(f"row has {len(values)} fields, header has {len(header)}")
        writer.writerow([format_value(v) for v in values])
    return buf.getvalue()


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_csv(
    path: str | Path,
    rows: Sequence[Mapping],
    header: Sequence[str] | None = None,
) -> None:
    """Write dict rows as CSV; ``header`` defaults to the keys of the first row."""
    if header is None:
        if not rows:
            raise ValueError("an empty table needs an explicit header")
        header = list(rows[0].keys())
    atomic_write_text(path, render_csv(header, rows))


TALLY_HEADER = ("record", "trials", "clicks")


def write_tallies(path: str | Path, stats: Sequence[MonitorRecordStats]) -> None:
    write_csv(
        path,
        [{"record": record_label(s.record), "trials": s.trials, "clicks": s.clicks} for s in stats],
        TALLY_HEADER,
    )


def read_tallies(path: str | Path) -> list[MonitorRecordStats]:
    """Read a ``record,trials,clicks`` CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read tallies {path}: {exc}") from exc
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or set(TALLY_HEADER) - set(reader.fieldnames):
        raise ValueError(f"{path}: expected columns {', '.join(TALLY_HEADER)}")
    out = []
    for line, row in enumerate(reader, start=2):
        try:
            out.append(
                MonitorRecordStats.from_counts(
                    parse_record(row["record"]), int(row["trials"]), int(row["clicks"])
                )
            )
        except ValueError as exc:
            raise ValueError(f"{path}:{line}: {exc}") from None
    return out
