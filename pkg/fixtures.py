"""Ground-truth data files for the two corpus formats, plus the shipped DFML documents."""

import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

from dfml_model import ByteOrder, DfmlDocument, PrimitiveType, load_document
from read_engine import encode_primitive

logger = logging.getLogger(__name__)

# === CONFIG ===
CORPUS_DIR = Path(__file__).resolve().parent / "corpus"
CORPUS_DOCUMENTS = {
    "shapefile": "shapefile_point.dfml",
    "swmm": "swmm_subcatchments.dfml",
}

SHP_FILE_CODE = 9994
SHP_VERSION = 1000
SHP_POINT_TYPE = 1
SHP_HEADER_LENGTH = 100
SHP_POINT_RECORD_LENGTH = 28
SHP_POINT_CONTENT_WORDS = 10  # shape type + X + Y = 20 bytes

SWMM_SECTION = "[SUBCATCHMENTS]"
SWMM_LINE_WIDTH = 92
# content columns: (field, start, end), half-open
SWMM_COLUMNS = [
    ("Name", 0, 10),
    ("Rgage", 10, 23),
    ("OutID", 23, 34),
    ("Area", 34, 43),
    ("%Imperv", 43, 55),
    ("Width", 55, 65),
    ("Slope", 65, 75),
    ("Clength", 75, 87),
    ("Spack", 87, 92),
]
SWMM_HEADER_COLUMNS = [
    ("Name", 2), ("Rgage", 10), ("OutID", 23), ("Area", 34), ("%Imperv", 43),
    ("Width", 55), ("Slope", 65), ("Clength", 75), ("Spack", 87),
]
SWMM_NUMERIC_FIELDS = {"Area", "%Imperv", "Width", "Slope", "Clength"}


@dataclass(frozen=True)
class PointRecord:
    record_number: int
    x: float
    y: float


# === CORPUS DOCUMENTS ===
def corpus_path(name) -> Path:
    try:
        return CORPUS_DIR / CORPUS_DOCUMENTS[name]
    except KeyError:
        raise ValueError(f"unknown corpus document {name!r}; choose from {sorted(CORPUS_DOCUMENTS)}") from None


def load_corpus_document(name) -> DfmlDocument:
    return load_document(corpus_path(name))


# === SHAPEFILE ===
def _int(value, order):
    return encode_primitive(value, PrimitiveType.INTEGER, order)


def _double(value):
    return encode_primitive(value, PrimitiveType.DOUBLE, ByteOrder.LITTLE)


def build_point_shapefile(points: Sequence[PointRecord]) -> bytes:
    """Main-file bytes: 100-byte header, then one 28-byte record per point."""
    total = SHP_HEADER_LENGTH + SHP_POINT_RECORD_LENGTH * len(points)
    if points:
        xs = [p.x for p in points]
        ys = [p.y for p in points]
        bbox = (min(xs), min(ys), max(xs), max(ys))
    else:
        bbox = (0.0, 0.0, 0.0, 0.0)

    header = b"".join([
        _int(SHP_FILE_CODE, ByteOrder.BIG),
        _int(0, ByteOrder.BIG) * 5,
        _int(total // 2, ByteOrder.BIG),  # 16-bit words
        _int(SHP_VERSION, ByteOrder.LITTLE),
        _int(SHP_POINT_TYPE, ByteOrder.LITTLE),
        *(_double(v) for v in bbox),
        _double(0.0) * 4,  # Z and M ranges
    ])
    records = b"".join(
        _int(p.record_number, ByteOrder.BIG)
        + _int(SHP_POINT_CONTENT_WORDS, ByteOrder.BIG)
        + _int(SHP_POINT_TYPE, ByteOrder.LITTLE)
        + _double(p.x)
        + _double(p.y)
        for p in points
    )
    return header + records


def sample_points(n) -> List[PointRecord]:
    return [PointRecord(i, 118.5 + i * 0.1, 32.0 - i * 0.05) for i in range(1, n + 1)]


# === SWMM ===
def _swmm_header_line():
    line = ";;"
    for name, column in SWMM_HEADER_COLUMNS:
        line = line.ljust(column) + name
    return line


def build_swmm_subcatchments(rows: Sequence[Sequence]) -> str:
    """`[SUBCATCHMENTS]`, annotated header, `;;===` separator, then one fixed-width line per row."""
    lines = [SWMM_SECTION, _swmm_header_line(), ";;" + "=" * (SWMM_LINE_WIDTH - 2)]
    for number, row in enumerate(rows, start=1):
        if len(row) != len(SWMM_COLUMNS):
            raise ValueError(f"row {number}: expected {len(SWMM_COLUMNS)} fields, got {len(row)}")
        cells = []
        for (name, start, end), value in zip(SWMM_COLUMNS, row):
            text = str(value)
            if len(text) > end - start:
                raise ValueError(f"row {number}: {name} {text!r} is wider than its {end - start}-column span")
            cells.append(text)
        lines.append("".join(text.ljust(end - start) for (_, start, end), text in zip(SWMM_COLUMNS[:-1], cells)) + cells[-1])
    return "\n".join(lines) + "\n"


def sample_swmm_rows(n) -> List[List[str]]:
    rows = []
    for i in range(1, n + 1):
        rows.append([
            f"S{i}",
            "RG1",
            f"J{i}",
            f"{5.7 + i * 0.25:g}",
            f"{25 + i % 50}",
            "500",
            "0.5",
            "0",
            "SP1" if i % 2 else "",
        ])
    return rows


# === FIXTURE FILES ===
def write_fixture_files(directory) -> Dict[str, Path]:
    """Write the stable-named fixtures and the corpus documents into `directory`."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = {
        "points3.shp": build_point_shapefile(sample_points(3)),
        "points0.shp": build_point_shapefile([]),
        "subcatchments2.inp": build_swmm_subcatchments(sample_swmm_rows(2)).encode("utf-8"),
    }
    paths = {}
    for name, data in written.items():
        paths[name] = directory / name
        paths[name].write_bytes(data)
    for file_name in CORPUS_DOCUMENTS.values():
        paths[file_name] = directory / file_name
        shutil.copyfile(CORPUS_DIR / file_name, paths[file_name])
    logger.debug("wrote %d fixture files to %s", len(paths), directory)
    return paths


if __name__ == "__main__":
    import argparse

    parser = argparse.ArgumentParser(description="write sample data files and corpus descriptions")
    parser.add_argument("directory", nargs="?", default="data")
    for path in write_fixture_files(parser.parse_args().directory).values():
        print(path)
