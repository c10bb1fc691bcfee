"""DFML document model: parse, validate and re-serialize format descriptions.

A DFML document is XML. The root `<dataformat>` carries `name`, `namespace`,
`mode` ("byte" or "char") and `description`; below it sit data-type leaves
(`<integer>`, `<double>`, ...), separator leaves (`<space>`, `<cr>`, ...) and
`<group>` elements that bundle them into records.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator, List, NamedTuple, Optional, Tuple, Union

from lxml import etree

from errors import DfmlParseError, LocationError, UnsupportedFeatureError

logger = logging.getLogger(__name__)

# === CONFIG ===
OPEN = -1  # open end / unknown repetition, written `-1` or `number="unknown"`
UNKNOWN_NUMBER = "unknown"
UNSUPPORTED_TAGS = {"import", "location", "datatype", "separator"}


# === ENUMERATIONS ===
class Mode(Enum):
    BYTE = "byte"
    CHAR = "char"


class NodeKind(Enum):
    DATA_TYPE = "datatype"
    SEPARATOR = "separator"
    GROUP = "group"


class PrimitiveType(Enum):
    BYTE = ("byte", 1)
    SHORT = ("short", 2)
    INTEGER = ("integer", 4)
    LONG = ("long", 8)
    FLOAT = ("float", 4)
    DOUBLE = ("double", 8)
    STRING = ("string", None)
    CHAR = ("char", 1)

    def __init__(self, tag, intrinsic_length):
        self.tag = tag
        self.intrinsic_length = intrinsic_length

    @property
    def is_integer(self):
        return self in (PrimitiveType.BYTE, PrimitiveType.SHORT, PrimitiveType.INTEGER, PrimitiveType.LONG)

    @property
    def is_float(self):
        return self in (PrimitiveType.FLOAT, PrimitiveType.DOUBLE)

    @property
    def is_text(self):
        return self in (PrimitiveType.STRING, PrimitiveType.CHAR)


class SeparatorType(Enum):
    SPACE = ("space", " ")
    TAB = ("tab", "\t")
    CR = ("cr", "\r")
    LF = ("lf", "\n")
    COMMA = ("comma", ",")
    SEMICOLON = ("semicolon", ";")

    def __init__(self, tag, char):
        self.tag = tag
        self.char = char
        self.intrinsic_length = 1

    @property
    def is_line_terminator(self):
        return self in (SeparatorType.CR, SeparatorType.LF)


class ByteOrder(Enum):
    BIG = "bigEndian"
    LITTLE = "littleEndian"

    @property
    def struct_prefix(self):
        return ">" if self is ByteOrder.BIG else "<"


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


DATA_TYPE_TAGS = {t.tag: t for t in PrimitiveType}
DATA_TYPE_TAGS["real"] = PrimitiveType.DOUBLE
SEPARATOR_TAGS = {s.tag: s for s in SeparatorType}
BYTE_ORDER_NAMES = {
    "bigendian": ByteOrder.BIG, "big": ByteOrder.BIG,
    "littleendian": ByteOrder.LITTLE, "little": ByteOrder.LITTLE,
}

ALLOWED_ATTRIBUTES = {
    NodeKind.DATA_TYPE: {"location", "number", "byteOrder", "value", "description", "type", "format"},
    NodeKind.SEPARATOR: {"location", "number", "byteOrder", "value", "description", "type"},
    NodeKind.GROUP: {"location", "number", "byteOrder", "description"},
}
ROOT_ATTRIBUTES = {"name", "namespace", "mode", "description"}


# === LOCATIONS ===
class CharPos(NamedTuple):
    line: int
    column: int

    def __str__(self):
        return f"{self.line} {self.column}"


Position = Union[int, CharPos]


def position_key(pos: Position):
    """Total-order key for a position; OPEN components sort last."""
    if isinstance(pos, CharPos):
        return (math.inf if pos.line == OPEN else pos.line, math.inf if pos.column == OPEN else pos.column)
    return math.inf if pos == OPEN else pos


def format_position(pos: Position) -> str:
    return str(pos)


@dataclass(frozen=True)
class Location:
    mode: Mode
    start: Position
    end: Position

    @property
    def open_end(self):
        if self.mode is Mode.BYTE:
            return self.end == OPEN
        return self.end.column == OPEN or self.end.line == OPEN

    @property
    def single_line(self):
        return self.mode is Mode.CHAR and self.end.line == self.start.line

    def span_length(self):
        """Bytes (byte mode) or characters within one line (char mode); OPEN when open-ended."""
        if self.mode is Mode.BYTE:
            return OPEN if self.end == OPEN else self.end - self.start
        if self.end.column == OPEN:
            return OPEN
        return self.end.column - self.start.column

    def to_text(self):
        return f"{format_position(self.start)},{format_position(self.end)}"


def _coordinate(token, text):
    try:
        value = int(token)
    except ValueError:
        raise LocationError(f"non-numeric location token {token!r} in {text!r}") from None
    if value < OPEN:
        raise LocationError(f"negative location value {value} in {text!r}")
    return value


def parse_location(text: str, mode: Mode) -> Location:
    """Parse `"a,b"` (byte mode) or `"L c,L' c'"` (char mode) into a half-open span."""
    parts = text.split(",")
    if len(parts) != 2:
        raise LocationError(f"location {text!r} must have a start and an end separated by ','")
    arity = 1 if mode is Mode.BYTE else 2
    coords = []
    for part in parts:
        tokens = part.split()
        if len(tokens) != arity:
            raise LocationError(f"location {text!r}: {mode.value} mode expects {arity} value(s) per position")
        coords.append([_coordinate(t, text) for t in tokens])

    if mode is Mode.BYTE:
        start, end = coords[0][0], coords[1][0]
        if start == OPEN:
            raise LocationError(f"location {text!r}: start cannot be open")
        if end != OPEN and end <= start:
            raise LocationError(f"location {text!r}: empty span")
        return Location(mode, start, end)

    start, end = CharPos(*coords[0]), CharPos(*coords[1])
    if OPEN in start:
        raise LocationError(f"location {text!r}: start cannot be open")
    if end.line != OPEN:
        if end.column == OPEN and end.line < start.line:
            raise LocationError(f"location {text!r}: end line precedes start line")
        if end.column != OPEN and (end.line, end.column) <= (start.line, start.column):
            raise LocationError(f"location {text!r}: empty span")
    return Location(mode, start, end)


# === DOCUMENT MODEL ===
@dataclass(frozen=True)
class Issue:
    severity: Severity
    node_path: str
    message: str

    def to_text(self):
        return f"{self.severity.value.upper()}\t{self.node_path or '/'}\t{self.message}"


@dataclass
class ValidationReport:
    issues: List[Issue] = field(default_factory=list)

    def add(self, severity, node_path, message):
        self.issues.append(Issue(severity, node_path, message))

    @property
    def errors(self):
        return [i for i in self.issues if i.severity is Severity.ERROR]

    @property
    def warnings(self):
        return [i for i in self.issues if i.severity is Severity.WARNING]

    @property
    def ok(self):
        return not self.errors

    def to_text(self):
        lines = [issue.to_text() for issue in self.issues]
        lines.append(f"{len(self.errors)} error(s), {len(self.warnings)} warning(s)")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class FormatNode:
    kind: NodeKind
    tag: str
    name: str
    path: str
    dtype: Optional[PrimitiveType] = None
    sep_type: Optional[SeparatorType] = None
    location: Optional[Location] = None
    number: Optional[int] = None
    byte_order: Optional[ByteOrder] = None
    expected_value: Optional[str] = None
    description: Optional[str] = None
    children: Tuple["FormatNode", ...] = ()
    sourceline: Optional[int] = field(default=None, compare=False)

    @property
    def is_leaf(self):
        return self.kind is not NodeKind.GROUP

    @property
    def intrinsic_length(self):
        if self.kind is NodeKind.DATA_TYPE:
            return self.dtype.intrinsic_length
        if self.kind is NodeKind.SEPARATOR:
            return self.sep_type.intrinsic_length
        return None


@dataclass(frozen=True)
class DfmlDocument:
    name: str
    namespace: str
    mode: Mode
    description: Optional[str] = None
    children: Tuple[FormatNode, ...] = ()
    issues: Tuple[Issue, ...] = field(default=(), compare=False)


def iter_leaves(nodes) -> Iterator[FormatNode]:
    """Leaves in depth-first document order."""
    if isinstance(nodes, DfmlDocument):
        nodes = nodes.children
    for node in nodes:
        if node.is_leaf:
            yield node
        else:
            yield from iter_leaves(node.children)


# === PARSING ===
def _local_tag(elem):
    return etree.QName(elem).localname


def _where(elem, path):
    return f"{path or '<dataformat>'} (line {elem.sourceline})"


def _node_names(elements):
    """Sibling names: description when unique, otherwise tag/description plus sibling index."""
    bases = []
    for elem in elements:
        description = (elem.get("description") or "").strip().replace("/", "_")
        bases.append((description, _local_tag(elem)))
    counts = {}
    for description, _ in bases:
        if description:
            counts[description] = counts.get(description, 0) + 1
    names = []
    for index, (description, tag) in enumerate(bases):
        if description and counts[description] == 1:
            names.append(description)
        else:
            names.append(f"{description or tag}_{index}")
    return names


def _parse_number(text, where):
    if text.strip().lower() == UNKNOWN_NUMBER:
        return OPEN
    try:
        number = int(text)
    except ValueError:
        raise DfmlParseError(f"{where}: number must be a positive integer or 'unknown', got {text!r}") from None
    if number < 1:
        raise DfmlParseError(f"{where}: number must be >= 1, got {number}")
    return number


def _parse_byte_order(text, where):
    try:
        return BYTE_ORDER_NAMES[text.strip().lower()]
    except KeyError:
        raise DfmlParseError(f"{where}: unknown byteOrder {text!r}") from None


def _build_node(elem, name, parent_path, mode, issues) -> FormatNode:
    tag = _local_tag(elem)
    path = f"{parent_path}/{name}" if parent_path else name
    where = _where(elem, path)

    if tag in UNSUPPORTED_TAGS:
        raise UnsupportedFeatureError(f"{where}: <{tag}> elements are not supported")
    if tag in DATA_TYPE_TAGS:
        kind = NodeKind.DATA_TYPE
    elif tag in SEPARATOR_TAGS:
        kind = NodeKind.SEPARATOR
    elif tag == "group":
        kind = NodeKind.GROUP
    else:
        raise DfmlParseError(f"{where}: unknown element <{tag}>")

    if "name" in elem.attrib:
        raise UnsupportedFeatureError(f"{where}: named reusable elements (name={elem.get('name')!r}) are not supported")

    for attr in elem.attrib:
        if attr == "format":
            message = "'format' attribute is not supported and was ignored"
        elif attr not in ALLOWED_ATTRIBUTES[kind]:
            message = f"unknown attribute {attr!r} ignored"
        else:
            continue
        logger.warning("%s: %s", where, message)
        issues.append(Issue(Severity.WARNING, path, message))

    dtype = DATA_TYPE_TAGS.get(tag) if kind is NodeKind.DATA_TYPE else None
    sep_type = SEPARATOR_TAGS.get(tag) if kind is NodeKind.SEPARATOR else None
    declared = elem.get("type")
    if declared is not None:
        if kind is NodeKind.DATA_TYPE and DATA_TYPE_TAGS.get(declared.strip().lower()) is not dtype:
            raise DfmlParseError(f"{where}: type={declared!r} disagrees with element <{tag}>")
        if kind is NodeKind.SEPARATOR and SEPARATOR_TAGS.get(declared.strip().lower()) is not sep_type:
            raise DfmlParseError(f"{where}: type={declared!r} disagrees with element <{tag}>")

    location = None
    if elem.get("location") is not None:
        try:
            location = parse_location(elem.get("location"), mode)
        except LocationError as exc:
            raise LocationError(f"{where}: {exc}") from None
    number = _parse_number(elem.get("number"), where) if elem.get("number") is not None else None
    byte_order = _parse_byte_order(elem.get("byteOrder"), where) if elem.get("byteOrder") is not None else None

    child_elems = [c for c in elem if isinstance(c.tag, str)]
    if kind is not NodeKind.GROUP and child_elems:
        raise DfmlParseError(f"{where}: <{tag}> is a leaf and cannot contain elements")
    children = tuple(
        _build_node(child, child_name, path, mode, issues)
        for child, child_name in zip(child_elems, _node_names(child_elems))
    )

    return FormatNode(
        kind=kind,
        tag=tag,
        name=name,
        path=path,
        dtype=dtype,
        sep_type=sep_type,
        location=location,
        number=number,
        byte_order=byte_order,
        expected_value=elem.get("value"),
        description=elem.get("description"),
        children=children,
        sourceline=elem.sourceline,
    )


def parse_document(xml_text: Union[str, bytes]) -> DfmlDocument:
    """Parse DFML text into a DfmlDocument; parse warnings travel on `doc.issues`."""
    data = xml_text.encode("utf-8") if isinstance(xml_text, str) else xml_text
    parser = etree.XMLParser(remove_comments=True, remove_pis=True, resolve_entities=False)
    try:
        root = etree.fromstring(data, parser)
    except etree.XMLSyntaxError as exc:
        raise DfmlParseError(f"malformed XML: {exc}") from exc

    if _local_tag(root) != "dataformat":
        raise DfmlParseError(f"root element must be <dataformat>, got <{_local_tag(root)}>")
    mode_text = root.get("mode")
    if mode_text is None:
        raise DfmlParseError("<dataformat> is missing the 'mode' attribute")
    try:
        mode = Mode(mode_text.strip().lower())
    except ValueError:
        raise DfmlParseError(f"mode must be 'byte' or 'char', got {mode_text!r}") from None

    issues = []
    for attr in root.attrib:
        if attr not in ROOT_ATTRIBUTES:
            logger.warning("<dataformat>: unknown attribute %r ignored", attr)
            issues.append(Issue(Severity.WARNING, "", f"unknown attribute {attr!r} ignored"))

    child_elems = [c for c in root if isinstance(c.tag, str)]
    children = tuple(
        _build_node(child, name, "", mode, issues)
        for child, name in zip(child_elems, _node_names(child_elems))
    )
    doc = DfmlDocument(
        name=root.get("name", ""),
        namespace=root.get("namespace", ""),
        mode=mode,
        description=root.get("description"),
        children=children,
        issues=tuple(issues),
    )
    logger.debug("parsed %r: %s mode, %d top-level nodes", doc.name, mode.value, len(children))
    return doc


def load_document(path) -> DfmlDocument:
    return parse_document(Path(path).read_bytes())


# === SERIALIZATION ===
def _node_element(node: FormatNode, parent):
    elem = etree.SubElement(parent, node.tag)
    if node.location is not None:
        elem.set("location", node.location.to_text())
    if node.number is not None:
        elem.set("number", UNKNOWN_NUMBER if node.number == OPEN else str(node.number))
    if node.byte_order is not None:
        elem.set("byteOrder", node.byte_order.value)
    if node.expected_value is not None:
        elem.set("value", node.expected_value)
    if node.description is not None:
        elem.set("description", node.description)
    for child in node.children:
        _node_element(child, elem)
    return elem


def serialize_document(doc: DfmlDocument) -> str:
    root = etree.Element("dataformat")
    root.set("name", doc.name)
    root.set("namespace", doc.namespace)
    root.set("mode", doc.mode.value)
    if doc.description is not None:
        root.set("description", doc.description)
    for node in doc.children:
        _node_element(node, root)
    return etree.tostring(root, pretty_print=True, encoding="unicode")


# === VALIDATION ===
def _end_key(location: Location):
    if location.mode is Mode.BYTE:
        return math.inf if location.end == OPEN else location.end
    if location.end.line == OPEN:
        return (math.inf, math.inf)
    return (location.end.line, math.inf if location.end.column == OPEN else location.end.column)


def _check_leaf(node: FormatNode, mode: Mode, report: ValidationReport):
    if node.kind is NodeKind.SEPARATOR and node.byte_order is not None:
        report.add(Severity.ERROR, node.path, "byteOrder is only allowed on data-type leaves")
    if node.kind is not NodeKind.DATA_TYPE:
        return
    if node.byte_order is not None and mode is Mode.CHAR:
        report.add(Severity.ERROR, node.path, "byteOrder is only allowed in byte mode")
    if node.location is None:
        if node.dtype is PrimitiveType.STRING:
            report.add(Severity.ERROR, node.path, "a string needs an explicit location")
        return

    location = node.location
    if mode is Mode.CHAR:
        if not location.single_line:
            report.add(Severity.ERROR, node.path, "char-mode data spans must stay within one line")
        return
    if location.open_end:
        if node.dtype is not PrimitiveType.STRING:
            report.add(Severity.ERROR, node.path, f"open-ended span is only allowed for string, not {node.tag}")
        return
    if node.dtype.intrinsic_length is None:
        if node.number not in (None, OPEN) and location.span_length() % node.number:
            report.add(
                Severity.ERROR,
                node.path,
                f"span of {location.span_length()} bytes does not split into {node.number} equal values",
            )
        return
    count = node.number if node.number not in (None, OPEN) else 1
    expected = node.dtype.intrinsic_length * count
    span = location.span_length()
    if span != expected:
        report.add(
            Severity.ERROR,
            node.path,
            f"span of {span} bytes conflicts with the intrinsic length of {node.tag} ({expected} bytes)",
        )


def _byte_extent(node: FormatNode) -> Optional[int]:
    """Bytes a node occupies in total, or None when open or undeclared."""
    count = 1 if node.number is None else node.number
    if count == OPEN:
        return None
    if node.is_leaf:
        if node.location is not None:
            span = node.location.span_length()
            return None if span == OPEN else span
        length = node.intrinsic_length
        return None if length is None else length * count
    interval = 0
    for child in node.children:
        extent = _byte_extent(child)
        if extent is None:
            return None
        interval += extent
    return interval * count


def _check_group_span(group: FormatNode, report: ValidationReport):
    if group.number in (None, OPEN) or group.location is None or group.location.open_end:
        return
    extent = _byte_extent(group)
    span = group.location.span_length()
    if extent is not None and extent != span:
        report.add(
            Severity.ERROR,
            group.path,
            f"{group.number} repetitions need {extent} bytes but the span holds {span}",
        )


def _check_siblings(nodes, mode: Mode, report: ValidationReport, in_group: bool):
    previous = None
    for node in nodes:
        if node.kind is NodeKind.GROUP:
            if node.byte_order is not None:
                report.add(Severity.ERROR, node.path, "byteOrder is only allowed on data-type leaves")
            if not node.children:
                report.add(Severity.ERROR, node.path, "group has no children")
            elif mode is Mode.BYTE:
                _check_group_span(node, report)
            _check_siblings(node.children, mode, report, in_group=True)
        else:
            _check_leaf(node, mode, report)

        location = node.location
        if location is None:
            continue
        if previous is not None:
            if position_key(location.start) < position_key(previous.location.start):
                report.add(Severity.ERROR, node.path, f"span starts before preceding sibling {previous.name!r}")
            elif position_key(location.start) < _end_key(previous.location):
                report.add(Severity.ERROR, node.path, f"span overlaps preceding sibling {previous.name!r}")
        if in_group and mode is Mode.BYTE and node.is_leaf and previous is not None and not previous.location.open_end:
            if location.start != previous.location.end:
                report.add(Severity.WARNING, node.path, "gap before this span; the group interval counts leaf lengths only")
        previous = node


def validate_document(doc: DfmlDocument) -> ValidationReport:
    """Check structural well-formedness; problems come back as issues, never raised."""
    report = ValidationReport(list(doc.issues))
    _check_siblings(doc.children, doc.mode, report, in_group=False)
    logger.debug("validated %r: %d error(s)", doc.name, len(report.errors))
    return report
