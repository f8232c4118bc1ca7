"""
Flat-file archives for parsed trial records.
Writes and reads the versioned ArchiveRow CSV, the record-per-evaluation JSON documents used for
tautology and ablation sets, and the raw NDJSON transcript archive. Published files with other
column names are imported through a column map.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
import yaml

from src.core.errors import DomainError, SchemaError
from src.core.experiment_engine import RawTranscript, RunArchive, read_run_header
from src.core.model_manager import ModelManager
from src.core.neutrosophic import BinaryEstimate, LossDeclaration, ScalarTIF, TensorEvaluation
from src.core.prompt_templates import Strategy
from src.core.response_parser import (
    STATUS_TO_FAILURE,
    VALID_STATUSES,
    Failure,
    TrialRecord,
    ValidBinary,
    ValidFreeText,
    ValidScalar,
    ValidTensor,
    build_trial_record,
)
from src.core.stimuli import category_of, get_stimulus
from src.utils.helpers import iter_json_lines
from src.utils.logger import logger

ARCHIVE_SCHEMA_VERSION = "1.0"
ARCHIVE_COLUMNS = (
    "schema_version", "model", "provider", "phenomenon", "category", "strategy", "rep",
    "T", "I", "F", "sum", "p_yes", "p_no", "losses", "parse_status", "parse_detail", "raw_text",
)
REQUIRED_COLUMNS = ("model", "phenomenon", "strategy", "rep", "parse_status")
DOCUMENT_KINDS = ("records", "tautology", "ablation")


@dataclass(frozen=True)
class ColumnMap:
    """Import adapter: published column names and values onto the canonical schema."""

    columns: dict = field(default_factory=dict)
    defaults: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def apply(self, row):
        mapped = {self.columns.get(key, key): value for key, value in row.items()}
        for key, value in self.defaults.items():
            if mapped.get(key) in (None, ""):
                mapped[key] = value
        for column, translation in self.values.items():
            if column in mapped and str(mapped[column]) in translation:
                mapped[column] = translation[str(mapped[column])]
        return mapped


def load_column_map(path):
    """
    Reads an import adapter document.

    Args:
        path (str | Path): YAML with optional 'columns', 'defaults' and 'values' mappings.

    Returns:
        ColumnMap: The adapter.
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = yaml.safe_load(handle) or {}
    except (OSError, yaml.YAMLError) as e:
        logger.error(f"Cannot load column map {path}: {e}")
        raise SchemaError(f"cannot load column map: {e}", path=path) from e
    if not isinstance(document, dict):
        raise SchemaError("column map must be a mapping", path=path)
    values = {column: {str(k): v for k, v in (mapping or {}).items()}
              for column, mapping in (document.get("values") or {}).items()}
    return ColumnMap(dict(document.get("columns") or {}), dict(document.get("defaults") or {}), values)


def _num(value):
    return "" if value is None else repr(float(value))


def record_to_row(record):
    """Flattens a TrialRecord into ArchiveRow fields (all strings, CSV-ready)."""
    scalar = record.scalar
    binary = record.binary
    losses = record.losses
    return {
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "model": record.model,
        "provider": record.provider,
        "phenomenon": record.stimulus,
        "category": record.category,
        "strategy": record.strategy.value,
        "rep": str(record.rep),
        "T": _num(scalar.t) if scalar else "",
        "I": _num(scalar.i) if scalar else "",
        "F": _num(scalar.f) if scalar else "",
        "sum": _num(scalar.sum) if scalar else "",
        "p_yes": _num(binary.p_yes) if binary else "",
        "p_no": _num(binary.p_no) if binary else "",
        "losses": json.dumps([loss.to_dict() for loss in losses], ensure_ascii=False) if losses else "",
        "parse_status": record.status,
        "parse_detail": record.outcome.detail,
        "raw_text": record.raw_text,
    }


def write_archive_csv(records, path):
    """
    Writes records as the canonical ArchiveRow CSV (UTF-8, header row, RFC-4180 quoting).

    Args:
        records (iterable[TrialRecord]): Records, written in key order.
        path (str | Path): Destination file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [record_to_row(r) for r in sorted(records, key=lambda r: r.key())]
    frame = pd.DataFrame(rows, columns=list(ARCHIVE_COLUMNS))
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    logger.info(f"Wrote {len(rows)} archive rows to {path}.")
    return path


def _float(row, column, line, path):
    value = row.get(column)
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"not a number: {str(value)[:40]!r}", column=column, line=line, path=path) from None
    if math.isnan(number):
        return None
    return number


def _required_float(row, column, line, path):
    number = _float(row, column, line, path)
    if number is None:
        raise SchemaError("numeric field is empty for a valid row", column=column, line=line, path=path)
    return number


def _losses(row, line, path):
    raw = row.get("losses")
    if isinstance(raw, str):
        if not raw.strip():
            raise SchemaError("losses are empty for a valid S4 row", column="losses", line=line, path=path)
        try:
            raw = json.loads(raw)
        except ValueError:
            raise SchemaError("losses are not valid JSON", column="losses", line=line, path=path) from None
    if not isinstance(raw, list) or not raw:
        raise SchemaError("losses must be a non-empty array", column="losses", line=line, path=path)
    try:
        return tuple(LossDeclaration(str(item["what"]), str(item.get("why") or ""), float(item["severity"]))
                     for item in raw)
    except (TypeError, KeyError, ValueError) as e:
        raise SchemaError(f"malformed loss entry: {e}", column="losses", line=line, path=path) from None


def _outcome(row, strategy, line, path):
    status = str(row.get("parse_status") or "").strip()
    detail = str(row.get("parse_detail") or "")
    if status in STATUS_TO_FAILURE:
        return Failure(STATUS_TO_FAILURE[status], detail)
    if status not in VALID_STATUSES:
        raise SchemaError(f"unknown parse status {status!r}", column="parse_status", line=line, path=path)

    if strategy is Strategy.S5_ABLATION:
        return ValidFreeText(str(row.get("raw_text") or ""))
    if strategy is Strategy.S3_ENTROPY_DERIVED:
        p_yes = _float(row, "p_yes", line, path)
        p_no = _float(row, "p_no", line, path)
        if p_yes is None or p_no is None:
            # published rows may only carry T = P_yes and F = P_no
            p_yes = _required_float(row, "T", line, path)
            p_no = _required_float(row, "F", line, path)
        return ValidBinary(BinaryEstimate(p_yes, p_no))
    scalar = ScalarTIF(
        _required_float(row, "T", line, path),
        _required_float(row, "I", line, path),
        _required_float(row, "F", line, path),
    )
    if strategy is Strategy.S4_TENSOR_LOSSES:
        return ValidTensor(TensorEvaluation(scalar, _losses(row, line, path)))
    return ValidScalar(scalar, constraint_violated=status == "valid_flagged")


class _RowReader:
    def __init__(self, path, column_map=None, model_manager=None):
        self.path = path
        self.column_map = column_map
        self.model_manager = model_manager or ModelManager()

    def check_version(self, row, line):
        version = str(row.get("schema_version") or "").strip()
        if not version:
            raise SchemaError("missing schema version (pass a column map for published files)",
                              column="schema_version", line=line, path=self.path)
        if version.split(".")[0] != ARCHIVE_SCHEMA_VERSION.split(".")[0]:
            raise SchemaError(f"unsupported schema version {version!r}", column="schema_version",
                              line=line, path=self.path)

    def to_record(self, raw_row, line):
        row = self.column_map.apply(raw_row) if self.column_map else dict(raw_row)
        self.check_version(row, line)
        for column in REQUIRED_COLUMNS:
            if row.get(column) in (None, ""):
                raise SchemaError("required value is missing", column=column, line=line, path=self.path)
        try:
            strategy = Strategy.parse(row["strategy"])
        except DomainError as e:
            raise SchemaError(str(e), column="strategy", line=line, path=self.path) from None
        try:
            rep = int(float(row["rep"]))
        except (TypeError, ValueError):
            raise SchemaError(f"rep is not an integer: {row['rep']!r}", column="rep", line=line, path=self.path) from None

        model = self.model_manager.resolve(str(row["model"]))
        stimulus = str(row["phenomenon"])
        try:
            outcome = _outcome(row, strategy, line, self.path)
        except DomainError as e:
            raise SchemaError(str(e), column="parse_status", line=line, path=self.path) from None
        return TrialRecord(
            model=model.slug,
            provider=str(row.get("provider") or model.provider),
            stimulus=stimulus,
            category=str(row.get("category") or category_of(stimulus)),
            strategy=strategy,
            rep=rep,
            outcome=outcome,
            raw_text=str(row.get("raw_text") or ""),
        )


def read_archive_csv(path, column_map=None, model_manager=None):
    """
    Reads an ArchiveRow CSV (or a published CSV through a column map).

    Args:
        path (str | Path): CSV file.
        column_map (ColumnMap, optional): Adapter for files without the canonical header.
        model_manager (ModelManager, optional): Resolves display names to slugs.

    Returns:
        list[TrialRecord]: One record per row. Row numbers in errors count the header as line 1.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise SchemaError("file is empty", line=1, path=path) from None
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as e:
        logger.error(f"Cannot read archive {path}: {e}")
        raise SchemaError(f"cannot read CSV: {e}", path=path) from e

    header = set(frame.columns)
    if column_map is None:
        if "schema_version" not in header:
            raise SchemaError("header has no schema_version column", column="schema_version", line=1, path=path)
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise SchemaError("header is missing a required column", column=column, line=1, path=path)

    reader = _RowReader(path, column_map, model_manager)
    records = [reader.to_record(row, index + 2) for index, row in enumerate(frame.to_dict(orient="records"))]
    logger.info(f"Read {len(records)} records from {path}.")
    return records


def _document_row(record):
    row = record_to_row(record)
    for column in ("T", "I", "F", "sum", "p_yes", "p_no"):
        row[column] = float(row[column]) if row[column] else None
    row["rep"] = record.rep
    row["losses"] = [loss.to_dict() for loss in record.losses]
    return row


def write_record_document(records, path, kind="records"):
    """
    Writes a record-per-evaluation JSON document.

    Args:
        records (iterable[TrialRecord]): Records, written in key order.
        path (str | Path): Destination file.
        kind (str): 'records', 'tautology' or 'ablation'.
    """
    if kind not in DOCUMENT_KINDS:
        raise DomainError(f"document kind must be one of {DOCUMENT_KINDS}, got {kind!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "kind": kind,
        "records": [_document_row(r) for r in sorted(records, key=lambda r: r.key())],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(document, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info(f"Wrote {len(document['records'])} {kind} records to {path}.")
    return path


def read_record_document(path, column_map=None, model_manager=None):
    """
    Reads a record-per-evaluation JSON document (or a bare list of records through a column map).

    Returns:
        list[TrialRecord]: One record per entry; entry numbers are reported as lines.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as e:
        raise SchemaError(f"cannot read document: {e}", path=path) from e
    if not text.strip():
        raise SchemaError("file is empty", line=1, path=path)
    try:
        document = json.loads(text)
    except ValueError as e:
        raise SchemaError(f"not valid JSON: {e}", path=path) from None

    version = None
    if isinstance(document, dict):
        version = document.get("schema_version")
        entries = document.get("records")
    else:
        entries = document
    if not isinstance(entries, list):
        raise SchemaError("document must hold a 'records' list", column="records", path=path)

    reader = _RowReader(path, column_map, model_manager)
    records = []
    for index, entry in enumerate(entries, start=1):
        if not isinstance(entry, dict):
            raise SchemaError("record entries must be objects", line=index, path=path)
        row = dict(entry)
        if version is not None and "schema_version" not in row:
            row["schema_version"] = version
        records.append(reader.to_record(row, index))
    logger.info(f"Read {len(records)} records from {path}.")
    return records


def read_transcripts(path):
    """
    Reads an NDJSON transcript archive written by a run.

    Returns:
        RunArchive: Config snapshot and transcripts in grid order; the file itself is in completion order.
    """
    path = Path(path)
    archive = None
    try:
        for line, data in iter_json_lines(path):
            if archive is None:
                archive = RunArchive(read_run_header(data, path))
                continue
            if data.get("kind") != "transcript":
                raise SchemaError(f"unexpected line kind {data.get('kind')!r}", column="kind", line=line, path=path)
            try:
                archive.append(RawTranscript.from_dict(data))
            except (KeyError, TypeError, ValueError) as e:
                raise SchemaError(f"malformed transcript: {e}", line=line, path=path) from None
    except ValueError as e:
        if isinstance(e, SchemaError):
            raise
        raise SchemaError(f"not valid NDJSON: {e}", path=path) from None
    if archive is None:
        raise SchemaError("file is empty", line=1, path=path)
    return archive.in_grid_order()


def transcripts_to_records(archive, model_manager=None):
    """Parses every transcript of a RunArchive into a TrialRecord."""
    model_manager = model_manager or ModelManager()
    known = {}
    for entry in archive.config_snapshot.get("models", []):
        if isinstance(entry, dict) and entry.get("slug"):
            known[entry["slug"]] = model_manager.from_config(entry)
    records = []
    for transcript in archive:
        model = known.get(transcript.model) or model_manager.resolve(transcript.model)
        records.append(build_trial_record(transcript, model, get_stimulus(transcript.stimulus)))
    return records


def apply_reruns(base, reruns):
    """
    Replaces every base record of a (model, strategy) pair that appears in the rerun set.

    Returns:
        list[TrialRecord]: Merged records in key order.
    """
    base = list(base)
    reruns = list(reruns)
    superseded = {(r.model, r.strategy) for r in reruns}
    kept = [r for r in base if (r.model, r.strategy) not in superseded]
    for model, strategy in sorted(superseded, key=lambda pair: (pair[0], pair[1].value)):
        logger.info(f"Rerun supersedes {model} {strategy.value} records.")
    logger.debug(f"{len(base) - len(kept)} base records superseded by {len(reruns)} rerun records.")
    return sorted(kept + reruns, key=lambda r: r.key())


def load_records(paths, column_map=None, model_manager=None):
    """
    Loads records from any mix of ArchiveRow CSVs, JSON record documents and NDJSON transcripts.

    Args:
        paths (iterable[str | Path]): Input files; the suffix selects the reader.
        column_map (ColumnMap, optional): Adapter for published CSV/JSON files.
        model_manager (ModelManager, optional): Resolves model names.

    Returns:
        list[TrialRecord]: All records in key order.
    """
    records = []
    for path in paths:
        path = Path(path)
        suffix = path.suffix.lower()
        if suffix == ".csv":
            records.extend(read_archive_csv(path, column_map, model_manager))
        elif suffix == ".json":
            records.extend(read_record_document(path, column_map, model_manager))
        elif suffix in (".ndjson", ".jsonl"):
            records.extend(transcripts_to_records(read_transcripts(path), model_manager))
        else:
            raise SchemaError(f"unsupported archive type '{suffix}'", path=path)
    return sorted(records, key=lambda r: r.key())
