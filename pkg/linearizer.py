"""Flatten a validated DfmlDocument into a linear read plan.

Every leaf becomes one LinearItem carrying where its first occurrence starts,
how long one value is, and the stride/count of each repeating ancestor.
Group arithmetic follows the usual rule: interval = sum of the lengths of the
group's leaves, repetition = group span / interval (open span => open
repetition). Nested groups apply the rule again at every level.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import pandas as pd

from dfml_model import (
    OPEN,
    ByteOrder,
    CharPos,
    DfmlDocument,
    FormatNode,
    Mode,
    NodeKind,
    Position,
    PrimitiveType,
    SeparatorType,
    format_position,
    position_key,
)
from errors import LinearizeError

logger = logging.getLogger(__name__)

# === CONFIG ===
SUMMARY_COLUMNS = [
    "path", "type", "startReadLocation", "length", "interval",
    "repetition", "byteOrder", "expectedValue", "levels",
]


# === READ PLAN TYPES ===
@dataclass(frozen=True)
class Level:
    """One repeating ancestor: `path` owns the occurrence index."""

    path: str
    base: Position
    interval: int
    repetition: int


@dataclass(frozen=True)
class LinearItem:
    name: str
    path: str
    dtype: Union[PrimitiveType, SeparatorType]
    start_read_location: Position
    length: int
    byte_order: Optional[ByteOrder] = None
    expected_value: Optional[str] = None
    description: Optional[str] = None
    levels: Tuple[Level, ...] = ()

    @property
    def interval(self):
        return self.levels[-1].interval if self.levels else 0

    @property
    def repetition(self):
        return self.levels[-1].repetition if self.levels else 1

    @property
    def is_separator(self):
        return isinstance(self.dtype, SeparatorType)

    @property
    def tag(self):
        return self.dtype.tag

    def address(self, indices) -> Position:
        """Start of the occurrence addressed by 0-based `indices` (one per level)."""
        offset = sum(i * level.interval for i, level in zip(indices, self.levels))
        start = self.start_read_location
        if isinstance(start, CharPos):
            return CharPos(start.line + offset, start.column)
        return start + offset

    def occurrence_path(self, indices, skip_level=None) -> str:
        """Item path with a 1-based `[i]` after each repeating level's path."""
        path = self.path
        for depth in reversed(range(len(self.levels))):
            if depth == skip_level:
                continue
            cut = len(self.levels[depth].path)
            path = f"{path[:cut]}[{indices[depth] + 1}]{path[cut:]}"
        return path


@dataclass(frozen=True)
class LinearSequence:
    mode: Mode
    items: Tuple[LinearItem, ...] = ()
    name: str = ""

    def item(self, path) -> Optional[LinearItem]:
        for item in self.items:
            if item.path == path:
                return item
        return None

    @property
    def record_level(self) -> Optional[Level]:
        """The open-repetition level, if any; its occurrences are the records."""
        for item in self.items:
            for level in item.levels:
                if level.repetition == OPEN:
                    return level
        return None


# === BYTE MODE ===
def _leaf_length(node: FormatNode):
    if node.location is not None:
        span = node.location.span_length()
        if span == OPEN:
            return OPEN
        if node.number not in (None, OPEN) and node.number > 1:
            if span % node.number:
                raise LinearizeError(f"{node.path}: span of {span} does not split into {node.number} equal values")
            return span // node.number
        return span
    if node.intrinsic_length is None:
        raise LinearizeError(f"{node.path}: no location and no intrinsic length")
    return node.intrinsic_length


def _byte_interval(group: FormatNode):
    total = 0
    for child in group.children:
        extent = _byte_extent(child)
        if extent == OPEN:
            return OPEN
        total += extent
    return total


def _byte_repetition(group: FormatNode, interval):
    if group.number is not None:
        closed = group.location is not None and not group.location.open_end
        if closed and OPEN not in (interval, group.number):
            if group.number * interval != group.location.span_length():
                raise LinearizeError(
                    f"{group.path}: {group.number} x {interval} bytes does not fill the span of "
                    f"{group.location.span_length()}"
                )
        return group.number
    if interval == OPEN or group.location is None:
        return 1
    span = group.location.span_length()
    if span == OPEN:
        return OPEN
    if span % interval:
        raise LinearizeError(
            f"{group.path}: group length {span} is not a multiple of its interval {interval}; inconsistent description"
        )
    return span // interval


def _byte_extent(node: FormatNode):
    if node.is_leaf:
        length = _leaf_length(node)
        count = node.number or 1
        return OPEN if OPEN in (length, count) else length * count
    interval = _byte_interval(node)
    repetition = _byte_repetition(node, interval)
    return OPEN if OPEN in (interval, repetition) else interval * repetition


def _make_item(node: FormatNode, start, length, levels):
    return LinearItem(
        name=node.name,
        path=node.path,
        dtype=node.dtype if node.kind is NodeKind.DATA_TYPE else node.sep_type,
        start_read_location=start,
        length=length,
        byte_order=node.byte_order,
        expected_value=node.expected_value,
        description=node.description,
        levels=levels,
    )


def _layout_bytes(nodes, base, levels, items: List[LinearItem]):
    cursor = 0
    blocked_by = None
    for node in nodes:
        if blocked_by is not None:
            raise LinearizeError(f"{node.path}: unreachable, it follows the open-ended {blocked_by!r}")
        offset = node.location.start if node.location is not None else cursor
        start = base + offset
        extent = _byte_extent(node)

        if node.is_leaf:
            length = _leaf_length(node)
            count = node.number or 1
            node_levels = levels
            if count != 1:
                if length == OPEN:
                    raise LinearizeError(f"{node.path}: an open-ended leaf cannot repeat")
                node_levels = levels + (Level(node.path, start, length, count),)
            items.append(_make_item(node, start, length, node_levels))
        else:
            interval = _byte_interval(node)
            repetition = _byte_repetition(node, interval)
            if interval == OPEN and repetition != 1:
                raise LinearizeError(f"{node.path}: a repeating group cannot contain an open-ended member")
            if repetition != 1:
                levels_inside = levels + (Level(node.path, start, interval, repetition),)
            else:
                levels_inside = levels
            _layout_bytes(node.children, start, levels_inside, items)

        if extent == OPEN:
            blocked_by = node.path
        else:
            cursor = offset + extent


# === CHAR MODE ===
def _char_repetition(group: FormatNode):
    """Declared count, OPEN, 1, or None when the count follows from a closed line span."""
    if group.number is not None:
        return group.number
    if _has_open_descendant(group) or group.location is None:
        return 1
    if group.location.end.line == OPEN:
        return OPEN
    return None


def _span_lines(location) -> int:
    end = location.end
    return end.line - location.start.line + (0 if end.column == 0 else 1)


def _has_open_descendant(group: FormatNode):
    for child in group.children:
        if child.is_leaf:
            if child.number == OPEN:
                return True
        elif _char_repetition(child) == OPEN or _has_open_descendant(child):
            return True
    return False


def _layout_chars(nodes, base_line, levels, items: List[LinearItem], cursor: CharPos) -> Optional[CharPos]:
    """Lay out siblings; returns the cursor after them, None once the extent is open."""
    for node in nodes:
        if cursor is None:
            raise LinearizeError(f"{node.path}: unreachable, it follows an open-ended line group")
        if node.location is not None:
            start = CharPos(base_line + node.location.start.line, node.location.start.column)
        elif node.kind is NodeKind.GROUP:
            start = CharPos(cursor.line if cursor.column == 0 else cursor.line + 1, 0)
        else:
            start = cursor

        if node.is_leaf:
            if node.number not in (None, 1):
                raise LinearizeError(f"{node.path}: repeated leaves are not supported in char mode; use a group")
            if node.kind is NodeKind.SEPARATOR and node.sep_type.is_line_terminator:
                items.append(_make_item(node, CharPos(start.line, OPEN), 1, levels))
                cursor = CharPos(start.line + 1, 0)
                continue
            if start.column == OPEN:
                raise LinearizeError(f"{node.path}: no start column, it follows an open-ended field on its line")
            length = _leaf_length(node)
            items.append(_make_item(node, start, length, levels))
            cursor = CharPos(start.line, OPEN if length == OPEN else start.column + length)
            continue

        repetition = _char_repetition(node)
        if repetition == 1:
            cursor = _layout_chars(node.children, base_line, levels, items, start)
            continue

        # a located group keeps its children's line numbers; an unlocated one counts from its first line
        child_base = base_line if node.location is not None else start.line
        trial: List[LinearItem] = []
        end = _layout_chars(node.children, child_base, levels, trial, CharPos(start.line, 0))
        if end is None:
            raise LinearizeError(f"{node.path}: a repeating group cannot contain an open-ended group")
        interval = end.line - start.line + (0 if end.column == 0 else 1)
        if interval < 1:
            raise LinearizeError(f"{node.path}: group occupies no lines")
        if repetition is None:
            span = _span_lines(node.location)
            if span % interval:
                raise LinearizeError(
                    f"{node.path}: group spans {span} lines, not a multiple of its interval {interval}"
                )
            repetition = span // interval
            if repetition == 1:
                cursor = _layout_chars(node.children, base_line, levels, items, start)
                continue
        elif repetition != OPEN and node.location is not None and node.location.end.line != OPEN:
            if repetition * interval != _span_lines(node.location):
                raise LinearizeError(
                    f"{node.path}: {repetition} x {interval} lines does not fill the span of "
                    f"{_span_lines(node.location)} lines"
                )
        level = Level(node.path, CharPos(start.line, 0), interval, repetition)
        _layout_chars(node.children, child_base, levels + (level,), items, CharPos(start.line, 0))
        cursor = None if repetition == OPEN else CharPos(start.line + repetition * interval, 0)
    return cursor


# === ENTRY POINTS ===
def linearize(doc: DfmlDocument) -> LinearSequence:
    """Turn a validated document into items sorted by first-occurrence start."""
    items: List[LinearItem] = []
    if doc.mode is Mode.BYTE:
        _layout_bytes(doc.children, 0, (), items)
    else:
        _layout_chars(doc.children, 0, (), items, CharPos(1, 0))

    open_levels = {level.path for item in items for level in item.levels if level.repetition == OPEN}
    if len(open_levels) > 1:
        raise LinearizeError(f"more than one open repetition: {sorted(open_levels)}")

    items.sort(key=lambda item: position_key(item.start_read_location))
    logger.debug("linearized %r into %d items", doc.name, len(items))
    return LinearSequence(mode=doc.mode, items=tuple(items), name=doc.name)


def sequence_summary(seq: LinearSequence) -> str:
    """Deterministic tab-separated table, one row per item."""
    rows = []
    for item in seq.items:
        rows.append({
            "path": item.path,
            "type": item.tag,
            "startReadLocation": format_position(item.start_read_location),
            "length": str(item.length),
            "interval": str(item.interval),
            "repetition": str(item.repetition),
            "byteOrder": item.byte_order.value if item.byte_order else "",
            "expectedValue": item.expected_value or "",
            "levels": ";".join(
                f"{lv.path}@{format_position(lv.base)}+{lv.interval}x{lv.repetition}" for lv in item.levels
            ),
        })
    df = pd.DataFrame(rows, columns=SUMMARY_COLUMNS)
    return df.to_csv(sep="\t", index=False, lineterminator="\n")
