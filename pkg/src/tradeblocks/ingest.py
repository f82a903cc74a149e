"""Bilateral trade-flow ingestion, country harmonization, and yearly flow matrices.

Monetary values are carried as integer cents throughout so that duplicate-key
merges and harmonization totals are exact. Conversion to floating weights
happens only in :mod:`tradeblocks.netbuild`.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation, ROUND_HALF_EVEN
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_CENT = Decimal("0.01")

DIRECTION_EXPORTS = "exports"
DIRECTION_IMPORTS = "imports"
DIRECTION_NET_EXPORTS = "net_exports"


class IngestError(ValueError):
    """Unreadable, malformed, or empty flow input."""


@dataclass(frozen=True)
class FlowRecord:
    """One bilateral flow row. Values are integer cents (nominal USD)."""

    reporter: str
    partner: str
    year: int
    export_value: int
    import_value: int


@dataclass(frozen=True)
class IngestFormat:
    """Column layout of a flow CSV plus an optional study-year window.

    Rows outside ``[year_min, year_max]`` are dropped (and counted), not
    rejected, so partial fixtures stay usable.
    """

    reporter: str = "reporter"
    partner: str = "partner"
    year: str = "year"
    export_value: str = "export_value"
    import_value: str = "import_value"
    year_min: int | None = None
    year_max: int | None = None


@dataclass
class FlowTable:
    """Deduplicated bilateral flow records over a fixed country universe."""

    records: list[FlowRecord]
    universe: tuple[str, ...]
    years: tuple[int, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen = set()
        for r in self.records:
            key = (r.reporter, r.partner, r.year)
            if key in seen:
                raise IngestError(f"duplicate key after ingestion: {key}")
            seen.add(key)


@dataclass(frozen=True)
class CodeMap:
    """Raw-to-canonical country code mapping with retirement years.

    ``retired`` maps a canonical code to its last valid year; harmonized
    records carrying the code after that year are dropped.
    """

    entries: dict[str, str]
    retired: dict[str, int] = field(default_factory=dict)


@dataclass
class FlowMatrix:
    """Square nonnegative flow matrix (integer cents) for one year/direction."""

    values: np.ndarray
    year: int
    direction: str
    universe: tuple[str, ...]

    def __post_init__(self) -> None:
        n = len(self.universe)
        if self.values.shape != (n, n):
            raise ValueError(f"matrix shape {self.values.shape} != universe size {n}")
        if np.any(np.diagonal(self.values) != 0):
            raise ValueError("flow matrix has nonzero diagonal")
        if np.any(self.values < 0):
            raise ValueError("flow matrix has negative entries")

    def active_set(self) -> set[str]:
        """Countries with any nonzero row or column this year."""
        mask = (self.values.sum(axis=1) > 0) | (self.values.sum(axis=0) > 0)
        return {c for c, m in zip(self.universe, mask) if m}


def to_cents(value: Decimal) -> int:
    """Exact conversion of a nonnegative decimal USD amount to integer cents."""
    return int(value.quantize(_CENT, rounding=ROUND_HALF_EVEN) * 100)


def _parse_cents(text: str, line_no: int, column: str) -> int:
    try:
        value = Decimal(text.strip())
    except InvalidOperation:
        raise IngestError(f"line {line_no}: non-numeric {column} value {text!r}") from None
    if not value.is_finite():
        raise IngestError(f"line {line_no}: non-finite {column} value {text!r}")
    if value < 0:
        raise IngestError(f"line {line_no}: negative {column} value {text!r}")
    return to_cents(value)


def table_from_records(records: list[FlowRecord], meta: dict | None = None) -> FlowTable:
    """Assemble a FlowTable, merging duplicate (reporter, partner, year) keys by summation."""
    merged: dict[tuple[str, str, int], tuple[int, int]] = {}
    for r in records:
        if r.reporter == r.partner:
            raise IngestError(f"self-loop record for {r.reporter!r} in {r.year}")
        if r.export_value < 0 or r.import_value < 0:
            raise IngestError(f"negative flow value for {(r.reporter, r.partner, r.year)}")
        key = (r.reporter, r.partner, r.year)
        exp, imp = merged.get(key, (0, 0))
        merged[key] = (exp + r.export_value, imp + r.import_value)
    out = [
        FlowRecord(rep, part, year, exp, imp)
        for (rep, part, year), (exp, imp) in sorted(merged.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1]))
    ]
    meta = dict(meta or {})
    meta.setdefault("merged_duplicates", len(records) - len(out))
    universe = tuple(sorted({c for r in out for c in (r.reporter, r.partner)}))
    years = tuple(sorted({r.year for r in out}))
    return FlowTable(records=out, universe=universe, years=years, meta=meta)


def load_flow_table(path: str | Path, fmt: IngestFormat | None = None) -> FlowTable:
    """Load a bilateral flow CSV into a FlowTable.

    Rows with zero export and import value are skipped. Duplicate
    (reporter, partner, year) keys are merged by summation and counted in
    ``meta['merged_duplicates']``. Malformed rows raise IngestError naming
    the offending line.
    """
    fmt = fmt or IngestFormat()
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"flow file not found: {path}")

    records: list[FlowRecord] = []
    skipped_zero = 0
    skipped_window = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        cols = {}
        for name in (fmt.reporter, fmt.partner, fmt.year, fmt.export_value, fmt.import_value):
            if name not in header:
                raise IngestError(f"{path}: missing column {name!r} in header {header}")
            cols[name] = header.index(name)
        width = len(header)

        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise IngestError(f"line {line_no}: expected {width} columns, got {len(row)}")
            reporter = row[cols[fmt.reporter]].strip()
            partner = row[cols[fmt.partner]].strip()
            if not reporter or not partner:
                raise IngestError(f"line {line_no}: empty country code")
            if reporter == partner:
                raise IngestError(f"line {line_no}: reporter equals partner ({reporter!r})")
            try:
                year = int(row[cols[fmt.year]].strip())
            except ValueError:
                raise IngestError(f"line {line_no}: non-integer year {row[cols[fmt.year]]!r}") from None
            exp = _parse_cents(row[cols[fmt.export_value]], line_no, fmt.export_value)
            imp = _parse_cents(row[cols[fmt.import_value]], line_no, fmt.import_value)
            if (fmt.year_min is not None and year < fmt.year_min) or (
                fmt.year_max is not None and year > fmt.year_max
            ):
                skipped_window += 1
                continue
            if exp == 0 and imp == 0:
                skipped_zero += 1
                continue
            records.append(FlowRecord(reporter, partner, year, exp, imp))

    if not records:
        raise IngestError(f"{path}: no usable flow rows")
    rows_read = len(records) + skipped_zero + skipped_window
    table = table_from_records(
        records,
        meta={"rows_read": rows_read, "skipped_zero": skipped_zero, "skipped_out_of_window": skipped_window},
    )
    log.info(
        "loaded %s: %d rows read, %d records after merge (%d duplicates merged, %d zero rows skipped)",
        path, rows_read, len(table.records), table.meta["merged_duplicates"], skipped_zero,
    )
    return table


def load_code_map(path: str | Path) -> CodeMap:
    """Read a code map CSV with columns ``raw,canonical`` and optional ``retired_after``."""
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"code map not found: {path}")
    entries: dict[str, str] = {}
    retired: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "raw" not in reader.fieldnames or "canonical" not in reader.fieldnames:
            raise IngestError(f"{path}: code map needs 'raw' and 'canonical' columns")
        for line_no, row in enumerate(reader, start=2):
            raw = row["raw"].strip()
            canonical = row["canonical"].strip()
            if not raw or not canonical:
                raise IngestError(f"line {line_no}: empty code in code map")
            if raw in entries and entries[raw] != canonical:
                raise IngestError(f"line {line_no}: {raw!r} mapped to both {entries[raw]!r} and {canonical!r}")
            entries[raw] = canonical
            retired_after = (row.get("retired_after") or "").strip()
            if retired_after:
                retired[canonical] = int(retired_after)
    return CodeMap(entries=entries, retired=retired)


def harmonize_countries(table: FlowTable, code_map: CodeMap, strict: bool = False) -> FlowTable:
    """Map raw country codes to canonical ones and drop retired-code records.

    Unknown raw codes pass through unchanged with a warning unless ``strict``.
    Records whose (canonical) reporter or partner is retired and whose year is
    past the code's last valid year are dropped and counted. Records that
    become self-loops after merging successor codes are dropped and counted.
    """
    unknown = sorted(
        {c for r in table.records for c in (r.reporter, r.partner) if c not in code_map.entries}
    )
    if unknown:
        if strict:
            raise IngestError(f"unknown country codes: {', '.join(unknown)}")
        log.warning("passing through %d unmapped country codes: %s", len(unknown), ", ".join(unknown))

    kept: list[FlowRecord] = []
    dropped_retired = 0
    dropped_retired_cents = 0
    dropped_selfloop = 0
    dropped_selfloop_cents = 0
    for r in table.records:
        reporter = code_map.entries.get(r.reporter, r.reporter)
        partner = code_map.entries.get(r.partner, r.partner)
        last_rep = code_map.retired.get(reporter)
        last_part = code_map.retired.get(partner)
        if (last_rep is not None and r.year > last_rep) or (last_part is not None and r.year > last_part):
            dropped_retired += 1
            dropped_retired_cents += r.export_value + r.import_value
            continue
        if reporter == partner:
            dropped_selfloop += 1
            dropped_selfloop_cents += r.export_value + r.import_value
            continue
        kept.append(FlowRecord(reporter, partner, r.year, r.export_value, r.import_value))

    if not kept:
        raise IngestError("harmonization dropped every record")
    merged_before = len(kept)
    out = table_from_records(kept)
    out.meta.update(
        dropped_retired=dropped_retired,
        dropped_retired_cents=dropped_retired_cents,
        dropped_selfloop=dropped_selfloop,
        dropped_selfloop_cents=dropped_selfloop_cents,
        merged_successors=merged_before - len(out.records),
        unknown_codes=len(unknown),
    )
    if dropped_retired or dropped_selfloop:
        log.info(
            "harmonization dropped %d retired-code and %d self-loop records",
            dropped_retired, dropped_selfloop,
        )
    return out


def yearly_flow_matrix(table: FlowTable, year: int, direction: str) -> FlowMatrix:
    """Build the square flow matrix for one year.

    ``exports``: cell (i, j) is i's reported exports to j.
    ``imports``: cell (i, j) is i's reported imports from j, so a table that
    stores mirrored flows yields the transpose of the exports matrix.
    """
    if year not in table.years:
        raise IngestError(f"year {year} not present in table (have {table.years})")
    if direction not in (DIRECTION_EXPORTS, DIRECTION_IMPORTS):
        raise IngestError(f"direction must be 'exports' or 'imports', got {direction!r}")
    index = {c: i for i, c in enumerate(table.universe)}
    n = len(table.universe)
    values = np.zeros((n, n), dtype=np.int64)
    for r in table.records:
        if r.year != year:
            continue
        v = r.export_value if direction == DIRECTION_EXPORTS else r.import_value
        if v:
            values[index[r.reporter], index[r.partner]] += v
    return FlowMatrix(values=values, year=year, direction=direction, universe=table.universe)


def matrix_to_records(matrix: FlowMatrix) -> list[FlowRecord]:
    """Invert yearly_flow_matrix: nonzero cells back to single-direction records."""
    if matrix.direction not in (DIRECTION_EXPORTS, DIRECTION_IMPORTS):
        raise ValueError(f"cannot serialize direction {matrix.direction!r} to records")
    rows, cols = np.nonzero(matrix.values)
    records = []
    for i, j in zip(rows.tolist(), cols.tolist()):
        v = int(matrix.values[i, j])
        exp, imp = (v, 0) if matrix.direction == DIRECTION_EXPORTS else (0, v)
        records.append(FlowRecord(matrix.universe[i], matrix.universe[j], matrix.year, exp, imp))
    return records


def total_cents(table: FlowTable) -> tuple[int, int]:
    """(total export cents, total import cents) over all records."""
    exp = sum(r.export_value for r in table.records)
    imp = sum(r.import_value for r in table.records)
    return exp, imp
