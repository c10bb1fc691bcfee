"""Turn a LinearSequence into a standalone reader program.

A target is a directory of Jinja2 section templates plus an emitter that writes
the per-item read loops. The scaffold (section order and template text) is
fixed per target; only the reader body depends on the sequence.
"""

import logging
import math
import stat
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Tuple

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from dfml_model import OPEN, Mode, PrimitiveType
from errors import CodegenError, SelectionError, UnknownTargetError
from linearizer import LinearItem, LinearSequence
from read_engine import DEFAULT_BYTE_ORDER, STRUCT_CODES, Selection, select_items, unflatten

logger = logging.getLogger(__name__)

# === CONFIG ===
TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"
DEFAULT_TARGET = "python"
INDENT = "    "


class SectionKind(Enum):
    IMPORTS = "Imports"
    CONTAINER_DECL = "ContainerDecl"
    READER_ROUTINE = "ReaderRoutine"
    OUTPUT_ROUTINE = "OutputRoutine"
    ENTRY_POINT = "EntryPoint"


@dataclass(frozen=True)
class ScaffoldSection:
    kind: SectionKind
    template: str
    content: str


@dataclass(frozen=True)
class ScaffoldPlan:
    target_id: str
    sections: Tuple[ScaffoldSection, ...]

    def kinds(self):
        return [section.kind for section in self.sections]


@dataclass(frozen=True)
class GeneratedProgram:
    target_id: str
    source_text: str
    entry_contract: str
    file_name: str = "reader.py"


# === PYTHON EMITTER ===
class _Lines:
    def __init__(self):
        self.lines: List[str] = []
        self.depth = 0

    def emit(self, text=""):
        self.lines.append(INDENT * self.depth + text if text else "")

    def text(self):
        return "\n".join(self.lines)


def _sum_expr(base, terms):
    """`base + i0 * 28 + i1 * 4`, dropping the zero base."""
    parts = [str(base)] if base or not terms else []
    parts += [f"i{depth} * {factor}" for depth, factor in terms]
    return " + ".join(parts)


def _path_expr(item: LinearItem):
    """Expression building the occurrence path, e.g. `'Point[{}]/X'.format(i0 + 1)`."""
    depths = range(len(item.levels))
    if not item.levels:
        return repr(item.path)
    cuts = [len(item.levels[d].path) for d in depths]
    pieces = [item.path[a:b] for a, b in zip([0] + cuts, cuts + [len(item.path)])]
    template = "[{}]".join(p.replace("{", "{{").replace("}", "}}") for p in pieces)
    args = ", ".join(f"i{d} + 1" for d in depths)
    return f"{template!r}.format({args})"


def _occurrence_expr(item: LinearItem):
    strides = []
    for depth in range(len(item.levels)):
        stride = 1
        for inner in item.levels[depth + 1:]:
            stride *= inner.repetition
        strides.append((depth, stride))
    return _sum_expr(1, strides)


def _byte_decoder(item: LinearItem):
    if item.is_separator:
        return "sep"
    if item.dtype is PrimitiveType.STRING:
        return "string"
    if item.dtype is PrimitiveType.CHAR:
        return "char"
    order = item.byte_order or DEFAULT_BYTE_ORDER
    return order.struct_prefix + STRUCT_CODES[item.dtype]


def _open_depth(item: LinearItem):
    return next((d for d, level in enumerate(item.levels) if level.repetition == OPEN), None)


def _char_kind(item: LinearItem):
    if item.is_separator:
        return "eol" if item.dtype.is_line_terminator else "sep"
    if item.dtype.is_integer:
        return "int"
    if item.dtype.is_float:
        return "float"
    return "text"


class PythonReaderEmitter:
    """Writes the body of `read(path)`: one block per item, loops per level."""

    def __init__(self, seq: LinearSequence):
        self.seq = seq
        self.out = _Lines()
        self.record_level = seq.record_level

    # --- loops ---
    def _open_condition(self, depth, level):
        if self.seq.mode is Mode.BYTE:
            return f"{level.base} + i{depth} * {level.interval} < size"
        return f"i{depth} * {level.interval} < section_lines"

    def _open_loops(self, item: LinearItem, first=0):
        for depth, level in enumerate(item.levels):
            if depth < first:
                continue
            if level.repetition == OPEN:
                self.out.emit(f"i{depth} = 0")
                self.out.emit(f"while {self._open_condition(depth, level)}:")
            else:
                self.out.emit(f"for i{depth} in range({level.repetition}):")
            self.out.depth += 1

    def _close_loops(self, item: LinearItem, first=0):
        for depth in reversed(range(first, len(item.levels))):
            if item.levels[depth].repetition == OPEN:
                self.out.emit(f"i{depth} += 1")
            self.out.depth -= 1

    # --- one value ---
    def _read_value(self, item: LinearItem, record_depth=None, keep_separators=False):
        """Read one occurrence into `text` and store it under its full occurrence path."""
        offsets = [(depth, level.interval) for depth, level in enumerate(item.levels)]
        occurrence = _occurrence_expr(item)
        store = not item.is_separator or keep_separators
        if self.seq.mode is Mode.BYTE:
            self.out.emit(f"location = {_sum_expr(item.start_read_location, offsets)}")
            length = "max(size - location, 0)" if item.length == OPEN else str(item.length)
            read = f"_read_span(handle, size, location, {length}, {item.path!r}, {occurrence})"
            if not store:
                self.out.emit(read)
                return
            self.out.emit(f"text = _render({read}, {_byte_decoder(item)!r})")
        else:
            start = item.start_read_location
            limit = "section_end" if _open_depth(item) is not None else "len(lines) + 1"
            line = _sum_expr(start.line, offsets)
            column = 0 if start.column == OPEN else start.column
            self.out.emit(
                f"text = _field(lines, {limit}, {line}, {column}, {item.length}, "
                f"{_char_kind(item)!r}, {item.path!r}, {occurrence})"
            )
            if not store:
                return
        record = "None" if record_depth is None else f"i{record_depth}"
        self.out.emit(f"_store({record}, {_path_expr(item)}, text)")

    def _comment(self, item: LinearItem):
        repetition = "open" if item.repetition == OPEN else item.repetition
        self.out.emit(f"# {item.path}: {item.tag}, length {item.length}, repetition {repetition}")

    def _preamble(self):
        if self.seq.mode is Mode.CHAR and self.record_level is not None:
            base = self.record_level.base.line
            self.out.emit(f"section_lines = _section_length(lines, {base})")
            self.out.emit(f"section_end = {base} + section_lines")

    # --- bodies ---
    def sequential(self) -> str:
        self._preamble()
        for item in self.seq.items:
            self._comment(item)
            self._open_loops(item)
            self._read_value(item, record_depth=_open_depth(item))
            self._close_loops(item)
        return self.out.text()

    def _fix_occurrence(self, item: LinearItem, depth, sel: Selection):
        """Pin the levels the occurrence counts over to the selected indices."""
        counts = [level.repetition for level in item.levels[:depth]]
        inner_counts = counts[1:]
        if OPEN in inner_counts:
            raise CodegenError(f"{item.path}: only the outermost level may be open")
        inner = math.prod(inner_counts)
        outer = counts[0] if counts else 1
        if outer != OPEN and sel.occurrence > outer * inner:
            raise SelectionError(f"{sel.path}: occurrence {sel.occurrence} exceeds repetition {outer * inner}")

        if counts:
            first, rest = divmod(sel.occurrence - 1, inner)
            for index_depth, index in enumerate((first,) + unflatten(rest, inner_counts)):
                self.out.emit(f"i{index_depth} = {index}")
        if outer == OPEN:
            message = f"{sel.path}: occurrence {sel.occurrence} is beyond the end of data"
            self.out.emit(f"if not {self._open_condition(0, item.levels[0])}:")
            self.out.emit(f"{INDENT}raise ReadFailure({message!r})")

    def random(self, selected: List[Tuple[LinearItem, int]], sel: Selection) -> str:
        self._preamble()
        for item, depth in selected:
            self._comment(item)
            first = 0 if sel.is_all else depth
            if not sel.is_all:
                self._fix_occurrence(item, depth, sel)
            self._open_loops(item, first)
            self._read_value(item, keep_separators=True)
            self._close_loops(item, first)
        return self.out.text()


# === TARGETS ===
@dataclass(frozen=True)
class EmissionTarget:
    target_id: str
    template_dir: Path
    sections: Tuple[Tuple[SectionKind, str], ...]
    emitter: Callable[[LinearSequence], PythonReaderEmitter]
    entry_contract: str
    file_name: str


TARGETS: Dict[str, EmissionTarget] = {
    "python": EmissionTarget(
        target_id="python",
        template_dir=TEMPLATE_DIR / "python",
        sections=(
            (SectionKind.IMPORTS, "imports.py.j2"),
            (SectionKind.CONTAINER_DECL, "containers.py.j2"),
            (SectionKind.READER_ROUTINE, "reader.py.j2"),
            (SectionKind.OUTPUT_ROUTINE, "output.py.j2"),
            (SectionKind.ENTRY_POINT, "entry.py.j2"),
        ),
        emitter=PythonReaderEmitter,
        entry_contract="python reader.py DATA_FILE  (stdout: 'path = value' lines; exit 1 with 'error: ...' on failure)",
        file_name="reader.py",
    ),
}


def _target(target_id) -> EmissionTarget:
    try:
        return TARGETS[target_id]
    except KeyError:
        raise UnknownTargetError(f"unknown target {target_id!r}; available: {sorted(TARGETS)}") from None


def _environment(target: EmissionTarget) -> Environment:
    return Environment(
        loader=FileSystemLoader(str(target.template_dir)),
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
        undefined=StrictUndefined,
    )


def plan_scaffold(target_id) -> ScaffoldPlan:
    """Ordered section templates for `target_id`; the same id always gives the same plan."""
    target = _target(target_id)
    env = _environment(target)
    sections = []
    for kind, name in target.sections:
        source, _, _ = env.loader.get_source(env, name)
        sections.append(ScaffoldSection(kind, name, source))
    return ScaffoldPlan(target.target_id, tuple(sections))


# === GENERATION ===
def _check_layout(seq: LinearSequence):
    record_level = seq.record_level
    if seq.mode is not Mode.CHAR or record_level is None:
        return
    for item in seq.items:
        in_record = any(level.path == record_level.path for level in item.levels)
        if not in_record and item.start_read_location.line >= record_level.base.line:
            raise CodegenError(f"{item.path}: fields after the open-ended group {record_level.path!r} are not supported")


def _render(seq: LinearSequence, target: EmissionTarget, body: str, mode_label: str) -> GeneratedProgram:
    plan = plan_scaffold(target.target_id)
    env = _environment(target)
    context = {
        "format_name": seq.name or "unnamed format",
        "mode": seq.mode.value,
        "mode_label": mode_label,
        "program_name": target.file_name,
        "body": body,
    }
    source = "".join(env.from_string(section.content).render(**context) for section in plan.sections)
    return GeneratedProgram(target.target_id, source, target.entry_contract, target.file_name)


def generate_sequential(seq: LinearSequence, target_id=DEFAULT_TARGET) -> GeneratedProgram:
    target = _target(target_id)
    _check_layout(seq)
    body = target.emitter(seq).sequential()
    logger.debug("generated sequential %s reader for %r (%d items)", target_id, seq.name, len(seq.items))
    return _render(seq, target, body, "Sequential")


def generate_random(seq: LinearSequence, sel: Selection, target_id=DEFAULT_TARGET) -> GeneratedProgram:
    target = _target(target_id)
    selected = select_items(seq, sel.path)
    _check_layout(seq)
    body = target.emitter(seq).random(selected, sel)
    logger.debug("generated random %s reader for %s", target_id, sel.path)
    return _render(seq, target, body, "Random-access")


def write_program(program: GeneratedProgram, path) -> Path:
    """Write the source to `path` (or into it, when `path` is a directory) and mark it executable."""
    path = Path(path)
    if path.is_dir():
        path = path / program.file_name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(program.source_text, encoding="utf-8")
    path.chmod(path.stat().st_mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    logger.info("wrote %s", path)
    return path
