"""Manifest CSV codec.

Header: ``id,label,income,latitude,longitude,continent,f0,...,f{D-1}``.
Latitude, longitude and continent may be empty; income may be empty only when
the row can be geo-enriched. Floats are written in shortest round-trip form.
"""

from __future__ import annotations

import io
import math
import re
from collections.abc import Callable
from typing import TypeVar

import pandas as pd

from .errors import ManifestParseError, ValidationError
from .geo import ContinentPolygons, enrich_sample
from .models import (
    DEFAULT_INCOME_TABLE,
    Continent,
    ContinentIncomeTable,
    DatasetManifest,
    Sample,
)

FIXED_COLUMNS = ("id", "label", "income", "latitude", "longitude", "continent")
_FEATURE_COLUMN = re.compile(r"f(\d+)")

T = TypeVar("T")


def manifest_header(feature_dim: int) -> list[str]:
    return [*FIXED_COLUMNS, *(f"f{i}" for i in range(feature_dim))]


def _format_float(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def write_manifest(manifest: DatasetManifest) -> str:
    """Render a manifest as CSV text (LF line endings)."""
    rows = [
        [
            s.sample_id,
            str(s.label),
            _format_float(s.income),
            _format_float(s.latitude),
            _format_float(s.longitude),
            s.continent.value if s.continent else "",
            *(repr(float(v)) for v in s.features),
        ]
        for s in manifest.samples
    ]
    frame = pd.DataFrame(rows, columns=manifest_header(manifest.feature_dim), dtype=object)
    return frame.to_csv(index=False, lineterminator="\n")


def _check_header(columns: list[str]) -> int:
    if tuple(columns[: len(FIXED_COLUMNS)]) != FIXED_COLUMNS:
        raise ManifestParseError(
            f"header must start with {','.join(FIXED_COLUMNS)}, got {','.join(columns)}", line=1
        )
    features = columns[len(FIXED_COLUMNS) :]
    if not features:
        raise ManifestParseError("header declares no feature columns", line=1)
    for position, name in enumerate(features):
        match = _FEATURE_COLUMN.fullmatch(name)
        if not match or int(match.group(1)) != position:
            raise ManifestParseError(
                f"expected feature column f{position}", line=1, column=name
            )
    return len(features)


def _cell(parse: Callable[[str], T], raw: str, line: int, column: str) -> T:
    try:
        return parse(raw)
    except (ValueError, ValidationError) as e:
        raise ManifestParseError(f"bad value {raw!r}: {e}", line=line, column=column) from e


def _finite(raw: str) -> float:
    value = float(raw)
    if not math.isfinite(value):
        raise ValueError("not a finite number")
    return value


def _optional_float(raw: str) -> float | None:
    return None if raw == "" else _finite(raw)


def _optional_income(raw: str) -> float | None:
    value = _optional_float(raw)
    if value is not None and value <= 0:
        raise ValueError("income must be > 0")
    return value


def _label(raw: str) -> int:
    value = int(raw)
    if value < 0:
        raise ValueError("label must be >= 0")
    return value


def _optional_continent(raw: str) -> Continent | None:
    return None if raw == "" else Continent.parse(raw)


def _required(raw: str, line: int, column: str) -> str:
    if raw == "":
        raise ManifestParseError("missing required field", line=line, column=column)
    return raw


def parse_manifest(
    text: str,
    num_classes: int | None = None,
    enrich: bool = False,
    override_income: bool = False,
    table: ContinentIncomeTable = DEFAULT_INCOME_TABLE,
    geo_table: ContinentPolygons | None = None,
) -> DatasetManifest:
    """Parse and validate manifest CSV text.

    ``num_classes`` defaults to the largest label plus one. With ``enrich``
    set, missing continents are resolved from coordinates and missing incomes
    filled from ``table`` (``override_income`` replaces present ones too).
    """
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError as e:
        raise ManifestParseError("missing header", line=1) from e
    except pd.errors.ParserError as e:
        raise ManifestParseError(f"malformed CSV: {e}", line=1) from e

    feature_dim = _check_header([str(c) for c in frame.columns])

    feature_columns = manifest_header(feature_dim)[len(FIXED_COLUMNS) :]
    samples: list[Sample] = []
    lines: list[int] = []
    seen: dict[str, int] = {}
    next_line = 2
    for row in frame.itertuples(index=False, name=None):
        # Physical line of this record; quoted newlines push later records down.
        line = next_line
        next_line += 1 + sum(value.count("\n") for value in row if isinstance(value, str))
        # Short and blank rows come back as NaN, not "".
        cells = {
            name: value.strip() if isinstance(value, str) else ""
            for name, value in zip(frame.columns, row, strict=True)
        }
        if not any(cells.values()):
            continue
        sample_id = _required(cells["id"], line, "id")
        if sample_id in seen:
            raise ManifestParseError(
                f"duplicate id {sample_id!r} (first on line {seen[sample_id]})", line=line, column="id"
            )
        seen[sample_id] = line
        features = [
            _cell(_finite, _required(cells[name], line, name), line, name)
            for name in feature_columns
        ]
        try:
            sample = Sample(
                sample_id=sample_id,
                features=features,
                label=_cell(_label, _required(cells["label"], line, "label"), line, "label"),
                income=_cell(_optional_income, cells["income"], line, "income"),
                latitude=_cell(_optional_float, cells["latitude"], line, "latitude"),
                longitude=_cell(_optional_float, cells["longitude"], line, "longitude"),
                continent=_cell(_optional_continent, cells["continent"], line, "continent"),
            )
            if enrich:
                sample = enrich_sample(sample, table, geo_table, override_income)
        except ManifestParseError:
            raise
        except ValidationError as e:
            raise ManifestParseError(str(e), line=line) from e
        if sample.income is None:
            raise ManifestParseError(
                "missing income (no continent or coordinates to derive it)", line=line, column="income"
            )
        samples.append(sample)
        lines.append(line)

    if not samples:
        raise ValidationError("manifest has no samples")

    max_label = max(s.label for s in samples)
    classes = num_classes if num_classes is not None else max_label + 1
    if max_label >= classes:
        index = next(i for i, s in enumerate(samples) if s.label >= classes)
        raise ManifestParseError(
            f"label {samples[index].label} >= num_classes {classes}", line=lines[index], column="label"
        )
    return DatasetManifest(samples=tuple(samples), num_classes=classes, feature_dim=feature_dim)
