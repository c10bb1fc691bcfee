"""Interpret a LinearSequence against a data file.

Sequential reads walk every item and every occurrence; random reads compute
the absolute address of the selected occurrences and touch only those spans.
The canonical text produced by `render_text` is what generated readers must
reproduce byte for byte.
"""

import io
import itertools
import json
import logging
import math
import os
import struct
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

from dfml_model import (
    OPEN,
    ByteOrder,
    Issue,
    Mode,
    Position,
    PrimitiveType,
    Severity,
    ValidationReport,
)
from errors import DecodeError, ReadError, SelectionError, TruncatedDataError
from linearizer import LinearItem, LinearSequence

logger = logging.getLogger(__name__)

# === CONFIG ===
DEFAULT_BYTE_ORDER = ByteOrder.LITTLE
BYTE_TEXT_ENCODING = "latin-1"
CHAR_FILE_ENCODING = "utf-8"
STRUCT_CODES = {
    PrimitiveType.BYTE: "b",
    PrimitiveType.SHORT: "h",
    PrimitiveType.INTEGER: "i",
    PrimitiveType.LONG: "q",
    PrimitiveType.FLOAT: "f",
    PrimitiveType.DOUBLE: "d",
}
ALL_OCCURRENCES = ("*", "all")


# === VALUES ===
class ValueKind(Enum):
    INTEGER = "integer"
    FLOAT = "float"
    TEXT = "text"
    SEPARATOR = "separator"


@dataclass(frozen=True)
class Value:
    kind: ValueKind
    data: Any = None
    source_path: str = ""
    source_location: Optional[Position] = None

    def to_text(self):
        if self.kind is ValueKind.FLOAT:
            return repr(self.data)
        if self.kind is ValueKind.INTEGER:
            return str(self.data)
        if self.kind is ValueKind.TEXT:
            return self.data
        return ""


@dataclass
class RecordSet:
    fields: List[Tuple[str, Value]] = field(default_factory=list)
    records: List[Dict[str, Value]] = field(default_factory=list)
    record_path: Optional[str] = None
    issues: List[Issue] = field(default_factory=list)
    # item path -> every occurrence in row-major order
    occurrences: Dict[str, List[Value]] = field(default_factory=dict)

    def value_of(self, name) -> Value:
        for key, value in self.fields:
            if key == name:
                return value
        raise KeyError(name)


@dataclass(frozen=True)
class Selection:
    path: str
    occurrence: Optional[int] = None  # None selects every occurrence

    @property
    def is_all(self):
        return self.occurrence is None


def parse_selection(text: str) -> Selection:
    """`"Point/X#3"` -> Selection("Point/X", 3); `#*`, `#all` or no `#` select all."""
    path, sep, occurrence = text.rpartition("#")
    if not sep:
        return Selection(text)
    if occurrence.strip().lower() in ALL_OCCURRENCES:
        return Selection(path)
    try:
        number = int(occurrence)
    except ValueError:
        raise SelectionError(f"occurrence must be a number or '*', got {occurrence!r}") from None
    if number < 1:
        raise SelectionError(f"occurrence is 1-based, got {number}")
    return Selection(path, number)


# === PRIMITIVE CODEC ===
def decode_primitive(raw: bytes, dtype: PrimitiveType, byte_order: Optional[ByteOrder] = None) -> Value:
    if dtype.intrinsic_length is not None and len(raw) != dtype.intrinsic_length:
        raise DecodeError(f"{dtype.tag} needs {dtype.intrinsic_length} bytes, got {len(raw)}")
    if dtype is PrimitiveType.STRING:
        return Value(ValueKind.TEXT, raw.decode(BYTE_TEXT_ENCODING).rstrip("\x00 "))
    if dtype is PrimitiveType.CHAR:
        return Value(ValueKind.TEXT, raw.decode(BYTE_TEXT_ENCODING))
    order = byte_order or DEFAULT_BYTE_ORDER
    (number,) = struct.unpack(order.struct_prefix + STRUCT_CODES[dtype], raw)
    if dtype.is_integer:
        return Value(ValueKind.INTEGER, number)
    return Value(ValueKind.FLOAT, float(number))


def encode_primitive(value, dtype: PrimitiveType, byte_order: Optional[ByteOrder] = None) -> bytes:
    if dtype.is_text:
        return str(value).encode(BYTE_TEXT_ENCODING)
    order = byte_order or DEFAULT_BYTE_ORDER
    try:
        return struct.pack(order.struct_prefix + STRUCT_CODES[dtype], value)
    except struct.error as exc:
        raise DecodeError(f"cannot encode {value!r} as {dtype.tag}: {exc}") from exc


# === SOURCES ===
class ByteSource:
    """Random-access view of a data file: `size` plus positioned reads."""

    def __init__(self, handle, size, name="<bytes>"):
        self._handle = handle
        self.size = size
        self.name = name

    @classmethod
    def from_bytes(cls, data: bytes):
        return cls(io.BytesIO(data), len(data))

    @classmethod
    def from_path(cls, path):
        handle = open(path, "rb")
        return cls(handle, os.fstat(handle.fileno()).st_size, str(path))

    def read_at(self, offset, length) -> bytes:
        self._handle.seek(offset)
        return self._handle.read(length)

    def text_lines(self) -> List[str]:
        self._handle.seek(0)
        try:
            text = self._handle.read().decode(CHAR_FILE_ENCODING)
        except UnicodeDecodeError as exc:
            raise DecodeError(f"{self.name}: not {CHAR_FILE_ENCODING} text ({exc.reason} at byte {exc.start})") from None
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return [line[:-1] if line.endswith("\r") else line for line in lines]

    def close(self):
        self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _as_source(source) -> ByteSource:
    if isinstance(source, ByteSource):
        return source
    if isinstance(source, (bytes, bytearray)):
        return ByteSource.from_bytes(bytes(source))
    if isinstance(source, (str, Path)):
        return ByteSource.from_path(source)
    raise ReadError(f"unsupported data source {type(source).__name__}")


@contextmanager
def _opened(source):
    """ByteSource for `source`; a path is opened here and closed on exit."""
    if isinstance(source, (str, Path)):
        with ByteSource.from_path(source) as opened:
            yield opened
    else:
        yield _as_source(source)


def _flat_index(indices, counts):
    flat = 0
    for index, count in zip(indices, counts):
        flat = flat * count + index
    return flat


def unflatten(flat, counts):
    indices = []
    for count in reversed(counts):
        flat, index = divmod(flat, count)
        indices.append(index)
    return tuple(reversed(indices))


# === BYTE MODE ===
class _ByteReader:
    def __init__(self, source: ByteSource):
        self.source = source

    def count(self, level):
        if level.repetition != OPEN:
            return level.repetition
        remaining = self.source.size - level.base
        return math.ceil(remaining / level.interval) if remaining > 0 else 0

    def read(self, item: LinearItem, indices, counts) -> Value:
        address = item.address(indices)
        size = self.source.size
        length = item.length if item.length != OPEN else max(size - address, 0)
        if address > size or address + length > size:
            raise TruncatedDataError(
                item.path,
                _flat_index(indices, counts) + 1,
                f"needs {length} byte(s) at offset {address}, data ends at {size}",
            )
        raw = self.source.read_at(address, length)
        if item.is_separator:
            value = Value(ValueKind.SEPARATOR)
        else:
            value = decode_primitive(raw, item.dtype, item.byte_order)
        return replace(value, source_path=item.occurrence_path(indices), source_location=address)


# === CHAR MODE ===
def _section_length(lines, first_line):
    """Lines from `first_line` (1-based) up to end of file or the first blank line."""
    count = 0
    for line in lines[first_line - 1:]:
        if not line.strip():
            break
        count += 1
    return count


def _text_value(text, dtype: PrimitiveType, path):
    if dtype.is_text:
        return Value(ValueKind.TEXT, text.rstrip(" "))
    token = text.strip()
    try:
        if dtype.is_integer:
            return Value(ValueKind.INTEGER, int(token))
        return Value(ValueKind.FLOAT, float(token))
    except ValueError:
        raise DecodeError(f"{path}: {token!r} is not a valid {dtype.tag}") from None


def _char_value(line: str, item: LinearItem) -> Value:
    if item.is_separator and item.dtype.is_line_terminator:
        return Value(ValueKind.SEPARATOR)
    column = item.start_read_location.column
    if len(line) < column:
        raise ReadError(f"{item.path}: line has {len(line)} characters, field starts at column {column}")
    text = line[column:] if item.length == OPEN else line[column:column + item.length]
    if item.is_separator:
        return Value(ValueKind.SEPARATOR)
    return _text_value(text, item.dtype, item.path)


def read_char_line_fields(line: str, items) -> List[Value]:
    """Decode same-line char-mode items from one line of text."""
    return [_char_value(line, item) for item in items]


class _CharReader:
    def __init__(self, lines: List[str]):
        self.lines = lines
        self.section_end: Dict[str, int] = {}

    def count(self, level):
        if level.repetition != OPEN:
            return level.repetition
        first = level.base.line
        length = _section_length(self.lines, first)
        self.section_end[level.path] = first + length
        return math.ceil(length / level.interval)

    def read(self, item: LinearItem, indices, counts) -> Value:
        position = item.address(indices)
        limit = len(self.lines) + 1
        for level in item.levels:
            if level.repetition == OPEN:
                limit = self.section_end.get(level.path, limit)
        if not 1 <= position.line < limit:
            raise TruncatedDataError(
                item.path, _flat_index(indices, counts) + 1, f"line {position.line} is past the end of the data"
            )
        value = _char_value(self.lines[position.line - 1], item)
        return replace(value, source_path=item.occurrence_path(indices), source_location=position)


def _reader_for(source: ByteSource, seq: LinearSequence):
    if seq.mode is Mode.BYTE:
        return _ByteReader(source)
    return _CharReader(source.text_lines())


# === READING ===
def read_sequential(source, seq: LinearSequence) -> RecordSet:
    """Read every occurrence of every item; expected-value mismatches land on `issues`."""
    record_level = seq.record_level
    result = RecordSet(record_path=record_level.path if record_level else None)

    with _opened(source) as opened:
        reader = _reader_for(opened, seq)
        for item in seq.items:
            counts = [reader.count(level) for level in item.levels]
            record_depth = next((d for d, lv in enumerate(item.levels) if lv.repetition == OPEN), None)
            values = []
            for indices in itertools.product(*(range(c) for c in counts)):
                value = reader.read(item, indices, counts)
                values.append(value)
                if item.is_separator:
                    continue
                if record_depth is None:
                    result.fields.append((value.source_path, value))
                    continue
                k = indices[record_depth]
                while len(result.records) <= k:
                    result.records.append({})
                result.records[k][item.occurrence_path(indices, skip_level=record_depth)] = value
            result.occurrences[item.path] = values
        name = opened.name

    result.issues = check_expected(result, seq).issues
    logger.debug("read %d field(s), %d record(s) from %s", len(result.fields), len(result.records), name)
    return result


def _selection_depth(item: LinearItem, path):
    """How many of the item's levels sit at or above `path`; the occurrence counts over those."""
    return sum(1 for level in item.levels if path == level.path or path.startswith(level.path + "/"))


def select_items(seq: LinearSequence, path) -> List[Tuple[LinearItem, int]]:
    """Items a selection path names, each with its selection depth.

    A leaf path names that item. A group path names every data leaf under
    the group, and the occurrence then counts occurrences of the group.
    """
    item = seq.item(path)
    if item is not None:
        return [(item, len(item.levels))]
    prefix = path.rstrip("/") + "/"
    members = [it for it in seq.items if it.path.startswith(prefix) and not it.is_separator]
    if not members:
        raise SelectionError(f"no item or group with path {path!r}")
    return [(it, _selection_depth(it, path.rstrip("/"))) for it in members]


def _wanted_occurrences(item: LinearItem, depth, counts, sel: Selection):
    total = math.prod(counts[:depth])
    if sel.is_all:
        return range(total)
    if sel.occurrence > total:
        if all(level.repetition != OPEN for level in item.levels[:depth]):
            raise SelectionError(f"{sel.path}: occurrence {sel.occurrence} exceeds repetition {total}")
        raise SelectionError(
            f"{sel.path}: occurrence {sel.occurrence} is beyond the end of data ({total} available)"
        )
    return [sel.occurrence - 1]


def read_random(source, seq: LinearSequence, sel: Selection) -> List[Value]:
    """Read only the selected occurrence(s), addressed as start + (occurrence - 1) x interval."""
    selected = select_items(seq, sel.path)
    values = []
    with _opened(source) as opened:
        reader = _reader_for(opened, seq)
        for item, depth in selected:
            counts = [reader.count(level) for level in item.levels]
            for flat in _wanted_occurrences(item, depth, counts, sel):
                outer = unflatten(flat, counts[:depth])
                for inner in itertools.product(*(range(c) for c in counts[depth:])):
                    values.append(reader.read(item, outer + inner, counts))
    return values


# === EXPECTED VALUES ===
def _expected_literal(item: LinearItem):
    """The constant an item must hold, or None when `value` is only a placeholder."""
    text = item.expected_value
    if item.dtype.is_text:
        return text
    try:
        return int(text) if item.dtype.is_integer else float(text)
    except ValueError:
        return None


def _matches(value: Value, literal):
    if value.data == literal:
        return True
    # a single character over a wider span is a fill
    if isinstance(literal, str) and len(literal) == 1 and value.data:
        return set(value.data) == {literal}
    return False


def check_expected(values: RecordSet, seq: LinearSequence) -> ValidationReport:
    report = ValidationReport()
    for item in seq.items:
        if item.expected_value is None or item.is_separator:
            continue
        literal = _expected_literal(item)
        if literal is None:
            continue
        for value in values.occurrences.get(item.path, []):
            if not _matches(value, literal):
                report.add(
                    Severity.ERROR,
                    value.source_path,
                    f"expected {item.expected_value!r}, found {value.to_text()!r} at {value.source_location}",
                )
    return report


# === CANONICAL OUTPUT ===
def _line(value: Value):
    return f"{value.source_path} = {value.to_text()}\n"


def render_text(result: RecordSet) -> str:
    lines = [_line(value) for _, value in result.fields]
    for record in result.records:
        lines.extend(_line(value) for value in record.values())
    return "".join(lines)


def render_values(values: List[Value]) -> str:
    return "".join(_line(value) for value in values)


def _json_value(value: Value):
    return None if value.kind is ValueKind.SEPARATOR else value.data


def render_json(result: RecordSet) -> str:
    payload = {
        "fields": {name: _json_value(value) for name, value in result.fields},
        "records": [{key: _json_value(v) for key, v in record.items()} for record in result.records],
        "issues": [
            {"severity": i.severity.value, "path": i.node_path, "message": i.message} for i in result.issues
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def render_csv(result: RecordSet) -> str:
    """Header block of `field,value` rows, a blank line, then one row per record."""
    header = pd.DataFrame(
        [{"field": name, "value": value.to_text()} for name, value in result.fields],
        columns=["field", "value"],
    )
    text = header.to_csv(index=False, lineterminator="\n")
    if result.records:
        rows = [{key: v.to_text() for key, v in record.items()} for record in result.records]
        text += "\n" + pd.DataFrame(rows, columns=list(result.records[0])).to_csv(index=False, lineterminator="\n")
    return text
