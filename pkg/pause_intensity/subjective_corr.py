"""
Subjective datasets and their correlation with pause metrics.

The two bundled datasets are stored as CSV under ``data/`` with the printed
precision of every value preserved, so external datasets with the same schema
go through the same loader.
"""

import csv
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import stats

from pause_intensity.errors import DatasetError, DomainError, UndefinedCorrelationError
from shared.utils import write_csv

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
DATASET_COLUMNS = ("video_id", "content", "pi", "pause_frequency", "avg_pause_duration", "mos")
CORRELATION_HEADER = ("content", "r_frequency", "r_duration", "r_pi")
CONTENT_LABELS = ("M", "R1", "N", "C", "R2")
HIGH_FREQUENCY = 0.09
COMPOSITION_TOLERANCE = 0.02

BUILTIN_SOURCES = {
    "builtin-table-3": DATA_DIR / "table3.csv",
    "builtin-table-5": DATA_DIR / "table5.csv",
}
BUILTIN_ALIASES = {
    "table3": "builtin-table-3",
    "table5": "builtin-table-5",
    "main": "builtin-table-3",
    "r2": "builtin-table-5",
}


def _decimals(text: str) -> int:
    text = text.strip()
    return len(text.split(".", 1)[1]) if "." in text else 0


def composition_tolerance(
    pause_frequency: float,
    avg_pause_duration: float,
    frequency_decimals: Optional[int] = None,
    duration_decimals: Optional[int] = None,
) -> float:
    """
    Allowed |pi - f * d| for a record whose f and d were printed with the given decimals.

    Each printed value is off by at most half a unit in its last place, which
    propagates into the product on top of the flat 0.02.
    """
    tolerance = COMPOSITION_TOLERANCE
    if frequency_decimals is not None:
        tolerance += 0.5 * 10.0**-frequency_decimals * avg_pause_duration
    if duration_decimals is not None:
        tolerance += 0.5 * 10.0**-duration_decimals * pause_frequency
    return tolerance


@dataclass(frozen=True)
class SubjectiveRecord:
    video_id: int
    content: str
    pi: float
    pause_frequency: float
    avg_pause_duration: float
    mos: float
    source: str = ""
    frequency_decimals: Optional[int] = None
    duration_decimals: Optional[int] = None

    def __post_init__(self) -> None:
        if self.content not in CONTENT_LABELS:
            raise DomainError(
                f"content must be one of {', '.join(CONTENT_LABELS)}, got {self.content!r}"
            )
        if not 0 <= self.pi < 1:
            raise DomainError(f"pi must lie in [0, 1), got {self.pi}")
        if not 1 <= self.mos <= 5:
            raise DomainError(f"mos must lie in [1, 5], got {self.mos}")
        if self.pause_frequency < 0 or self.avg_pause_duration < 0:
            raise DomainError(
                "pause_frequency and avg_pause_duration must be non-negative, got "
                f"{self.pause_frequency}, {self.avg_pause_duration}"
            )

    @property
    def high_frequency(self) -> bool:
        return self.pause_frequency >= HIGH_FREQUENCY

    @property
    def composition_error(self) -> float:
        return abs(self.pi - self.pause_frequency * self.avg_pause_duration)

    def composition_ok(self) -> bool:
        return self.composition_error <= composition_tolerance(
            self.pause_frequency,
            self.avg_pause_duration,
            self.frequency_decimals,
            self.duration_decimals,
        )


@dataclass(frozen=True)
class SubjectiveDataset:
    records: tuple[SubjectiveRecord, ...]
    source: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise DomainError(f"dataset {self.source!r} has no records")
        seen: set[tuple[str, int]] = set()
        for record in self.records:
            key = (record.source or self.source, record.video_id)
            if key in seen:
                raise DomainError(f"duplicate video_id {record.video_id} in source {key[0]!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.records)

    def groups(self) -> dict[str, list[SubjectiveRecord]]:
        """Records by content label, in order of first appearance."""
        grouped: dict[str, list[SubjectiveRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.content, []).append(record)
        return grouped


@dataclass(frozen=True)
class CorrelationRow:
    content: str
    r_frequency: float
    r_duration: float
    r_pi: float

    def as_csv_row(self) -> tuple[str, float, float, float]:
        return (self.content, self.r_frequency, self.r_duration, self.r_pi)


def _as_pair(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise DomainError("correlation inputs must be 1-D")
    if a.size != b.size:
        raise DomainError(f"correlation inputs differ in length: {a.size} vs {b.size}")
    if a.size < 3:
        raise DomainError(f"correlation needs at least 3 samples, got {a.size}")
    return a, b


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Pearson correlation coefficient.

    Raises:
        DomainError: If the lengths differ or fewer than 3 samples are given
        UndefinedCorrelationError: If either input is constant
    """
    a, b = _as_pair(x, y)
    da = a - a.mean()
    db = b - b.mean()
    sa = float(np.dot(da, da))
    sb = float(np.dot(db, db))
    if sa == 0 or sb == 0:
        raise UndefinedCorrelationError("correlation is undefined for a constant input")
    r = float(np.dot(da, db)) / np.sqrt(sa * sb)
    return float(np.clip(r, -1.0, 1.0))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson of average ranks."""
    a, b = _as_pair(x, y)
    return pearson(stats.rankdata(a), stats.rankdata(b))


CORRELATIONS = {"pearson": pearson, "spearman": spearman}


def correlation_table(ds: SubjectiveDataset, method: str = "pearson") -> list[CorrelationRow]:
    """
    Correlation of MOS with pause frequency, pause duration and PI per content group.

    Raises:
        DomainError: If the method is unknown or a group has fewer than 3 records
    """
    try:
        correlate = CORRELATIONS[method]
    except KeyError:
        raise DomainError(f"method must be one of {', '.join(CORRELATIONS)}, got {method!r}")

    rows = []
    for content, records in ds.groups().items():
        if len(records) < 3:
            raise DomainError(
                f"content group {content!r} has {len(records)} records, at least 3 are needed"
            )
        mos = [r.mos for r in records]
        rows.append(
            CorrelationRow(
                content=content,
                r_frequency=correlate([r.pause_frequency for r in records], mos),
                r_duration=correlate([r.avg_pause_duration for r in records], mos),
                r_pi=correlate([r.pi for r in records], mos),
            )
        )
    return rows


def write_correlation_csv(rows: Sequence[CorrelationRow], path: Union[str, Path]) -> Path:
    return write_csv(path, CORRELATION_HEADER, (row.as_csv_row() for row in rows))


def _parse_rows(path: Path, source: str) -> list[SubjectiveRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        fields = [name.strip() for name in (reader.fieldnames or [])]
        missing = [c for c in DATASET_COLUMNS if c not in fields]
        if missing:
            raise DatasetError(f"{path}: missing column(s) {', '.join(missing)}", row=1)
        reader.fieldnames = fields
        for row in reader:
            line = reader.line_num
            try:
                record = SubjectiveRecord(
                    video_id=int(row["video_id"]),
                    content=row["content"].strip(),
                    pi=float(row["pi"]),
                    pause_frequency=float(row["pause_frequency"]),
                    avg_pause_duration=float(row["avg_pause_duration"]),
                    mos=float(row["mos"]),
                    source=source,
                    frequency_decimals=_decimals(row["pause_frequency"]),
                    duration_decimals=_decimals(row["avg_pause_duration"]),
                )
            except (TypeError, ValueError) as exc:
                raise DatasetError(f"{path}: {exc}", row=line)
            if not record.composition_ok():
                logger.warning(
                    "%s row %d: pi %.6g differs from frequency x duration %.6g",
                    path,
                    line,
                    record.pi,
                    record.pause_frequency * record.avg_pause_duration,
                )
            records.append(record)
    return records


def load_dataset(source: Union[str, Path]) -> SubjectiveDataset:
    """
    Load a bundled dataset (``builtin-table-3``, ``builtin-table-5``, the short
    names ``table3``/``table5`` or ``main``/``r2``) or an external CSV file.

    Raises:
        FileNotFoundError: If an external file doesn't exist
        DatasetError: On a missing column or an invalid row, naming the file row
    """
    name = str(source)
    name = BUILTIN_ALIASES.get(name, name)
    if name in BUILTIN_SOURCES:
        path = BUILTIN_SOURCES[name]
    else:
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"Dataset file not found: {path}")
        name = str(path)

    dataset = SubjectiveDataset(tuple(_parse_rows(path, name)), name)
    logger.info("loaded %d records from %s", len(dataset), name)
    return dataset


def merge_datasets(*datasets: SubjectiveDataset) -> SubjectiveDataset:
    """Union of datasets; (source, video_id) must stay unique."""
    if not datasets:
        raise DomainError("nothing to merge")
    records = tuple(r for ds in datasets for r in ds.records)
    return SubjectiveDataset(records, "+".join(ds.source for ds in datasets))
