import pytest

from dfml_model import (
    OPEN,
    ByteOrder,
    CharPos,
    Mode,
    NodeKind,
    PrimitiveType,
    Severity,
    iter_leaves,
    parse_document,
    parse_location,
    serialize_document,
    validate_document,
)
from errors import DfmlParseError, LocationError, UnsupportedFeatureError
from fixtures import load_corpus_document


def _doc(body, mode="byte"):
    return parse_document(f'<dataformat name="t" namespace="test" mode="{mode}">{body}</dataformat>')


# === PARSING ===
def test_parse_shapefile_listing(shapefile_doc):
    assert shapefile_doc.name == "ESRI Shapefile Format"
    assert shapefile_doc.mode is Mode.BYTE
    # File Code, unused group, File Length, Version, Geometry, 8 bounds, Point group
    assert len(shapefile_doc.children) == 14
    assert [n.name for n in shapefile_doc.children[:3]] == ["File Code", "group_1", "File Length"]


def test_parse_swmm_listing(swmm_doc):
    assert swmm_doc.name == "subcatchmentSection"
    assert swmm_doc.mode is Mode.CHAR
    content = swmm_doc.children[1].children[2]
    assert content.path == "section body/table content"
    assert content.number == OPEN


def test_parse_empty_document():
    doc = parse_document('<dataformat name="x" mode="byte"></dataformat>')
    assert doc.children == ()
    assert doc.mode is Mode.BYTE


def test_leaf_attributes(shapefile_doc):
    code = shapefile_doc.children[0]
    assert code.kind is NodeKind.DATA_TYPE
    assert code.dtype is PrimitiveType.INTEGER
    assert code.byte_order is ByteOrder.BIG
    assert code.expected_value == "9994"
    unused = shapefile_doc.children[1].children[0]
    assert unused.number == 5
    assert unused.location is None


def test_real_is_double_alias():
    doc = _doc('<real location="0,8"></real>')
    assert doc.children[0].dtype is PrimitiveType.DOUBLE


def test_repeated_descriptions_get_indexed_names(swmm_doc):
    header = swmm_doc.children[1].children[0]
    names = [child.name for child in header.children]
    assert names[:4] == ["annotator", "Name", "space_2", "Rgage"]
    assert names[-1] == "cr_19"


def test_iter_leaves_in_document_order(shapefile_doc):
    leaves = list(iter_leaves(shapefile_doc))
    assert len(leaves) == 18
    assert leaves[1].path == "group_1/Unused"
    assert leaves[-1].path == "Point/Y"


@pytest.mark.parametrize(
    "xml, error",
    [
        ("<dataformat", DfmlParseError),
        ('<format mode="byte"></format>', DfmlParseError),
        ('<dataformat name="x"></dataformat>', DfmlParseError),
        ('<dataformat name="x" mode="bits"></dataformat>', DfmlParseError),
        ('<dataformat name="x" mode="byte"><import href="a.dfml"/></dataformat>', UnsupportedFeatureError),
        ('<dataformat name="x" mode="byte"><integer name="id" location="0,4"/></dataformat>', UnsupportedFeatureError),
        ('<dataformat name="x" mode="byte"><widget location="0,4"/></dataformat>', DfmlParseError),
        ('<dataformat name="x" mode="byte"><integer type="double" location="0,4"/></dataformat>', DfmlParseError),
        ('<dataformat name="x" mode="byte"><integer number="0" location="0,4"/></dataformat>', DfmlParseError),
        ('<dataformat name="x" mode="byte"><integer byteOrder="middle" location="0,4"/></dataformat>', DfmlParseError),
        ('<dataformat name="x" mode="byte"><integer location="0,4"><space/></integer></dataformat>', DfmlParseError),
        ('<dataformat name="x" mode="byte"><integer location="4,0"/></dataformat>', LocationError),
    ],
)
def test_parse_errors(xml, error):
    with pytest.raises(error):
        parse_document(xml)


def test_unsupported_element_is_a_parse_error():
    assert issubclass(UnsupportedFeatureError, DfmlParseError)


def test_format_attribute_is_ignored_with_warning():
    doc = _doc('<double location="0,8" format="%.3f"></double>')
    report = validate_document(doc)
    assert report.ok
    assert len(report.warnings) == 1
    assert "format" in report.warnings[0].message


def test_number_unknown_is_open():
    doc = _doc('<group location="0,-1" number="unknown"><integer location="0,4"/></group>')
    assert doc.children[0].number == OPEN


# === LOCATIONS ===
def test_parse_byte_location_open_end():
    location = parse_location("100, -1", Mode.BYTE)
    assert (location.start, location.end) == (100, OPEN)
    assert location.open_end
    assert location.span_length() == OPEN


def test_parse_char_location():
    location = parse_location("2 0,2 -1", Mode.CHAR)
    assert location.start == CharPos(2, 0)
    assert location.end == CharPos(2, OPEN)
    assert location.single_line


def test_char_span_length():
    assert parse_location("0 34,0 43", Mode.CHAR).span_length() == 9


@pytest.mark.parametrize(
    "text, mode",
    [
        ("0,0", Mode.BYTE),
        ("8,4", Mode.BYTE),
        ("4", Mode.BYTE),
        ("a,4", Mode.BYTE),
        ("-2,4", Mode.BYTE),
        ("-1,4", Mode.BYTE),
        ("0 4,8", Mode.BYTE),
        ("2 5,2 5", Mode.CHAR),
        ("3 0,2 -1", Mode.CHAR),
        ("2,3", Mode.CHAR),
    ],
)
def test_bad_locations(text, mode):
    with pytest.raises(LocationError):
        parse_location(text, mode)


def test_location_text_round_trip():
    for text, mode in [("0,4", Mode.BYTE), ("100,-1", Mode.BYTE), ("2 0,2 -1", Mode.CHAR)]:
        assert parse_location(text, mode).to_text() == text


# === VALIDATION ===
@pytest.mark.parametrize("name", ["shapefile", "swmm"])
def test_corpus_documents_validate(name):
    report = validate_document(load_corpus_document(name))
    assert report.errors == []
    assert report.to_text().endswith("0 error(s), 0 warning(s)\n")


def test_string_without_location_is_an_error():
    report = validate_document(_doc("<string></string>"))
    assert len(report.errors) == 1
    assert report.errors[0].node_path == "string_0"


def test_overlapping_siblings_are_rejected():
    report = validate_document(_doc('<double location="0,8"/><double location="4,12"/>'))
    assert len(report.errors) == 1
    assert "overlaps" in report.errors[0].message
    assert report.errors[0].node_path == "double_1"


def test_out_of_order_siblings_are_rejected():
    report = validate_document(_doc('<integer location="4,8"/><integer location="0,4"/>'))
    assert len(report.errors) == 1
    assert "before" in report.errors[0].message


def test_span_must_match_intrinsic_length():
    report = validate_document(_doc('<integer location="0,8"/>'))
    assert len(report.errors) == 1
    assert "intrinsic" in report.errors[0].message


def test_repeated_leaf_span_counts_every_occurrence():
    assert validate_document(_doc('<short location="0,6" number="3"/>')).ok


def test_open_span_only_for_strings():
    assert validate_document(_doc('<string location="0,-1"/>')).ok
    assert not validate_document(_doc('<integer location="0,-1"/>')).ok


def test_empty_group_is_an_error():
    report = validate_document(_doc('<group location="0,4"></group>'))
    assert [i.message for i in report.errors] == ["group has no children"]


def test_byte_order_rules():
    report = validate_document(_doc('<integer location="1 0,1 4" byteOrder="bigEndian"/>', mode="char"))
    assert len(report.errors) == 1
    report = validate_document(_doc('<space location="0,1" byteOrder="bigEndian"/>'))
    assert len(report.errors) == 1


def test_multi_line_char_leaf_is_an_error():
    report = validate_document(_doc('<string location="1 0,2 4"/>', mode="char"))
    assert len(report.errors) == 1


def test_gap_inside_group_is_a_warning():
    report = validate_document(_doc('<group location="0,-1"><integer location="0,4"/><integer location="8,12"/></group>'))
    assert report.ok
    assert len(report.warnings) == 1
    assert report.warnings[0].severity is Severity.WARNING


def test_group_count_must_fill_its_span():
    report = validate_document(
        _doc(
            '<group location="0,8" number="4"><short location="0,2"/><short location="2,4"/></group>'
            '<integer location="8,12"/>'
        )
    )
    assert len(report.errors) == 1
    assert report.errors[0].node_path == "group_0"
    assert "16 bytes" in report.errors[0].message


def test_group_count_filling_its_span_is_valid():
    doc = _doc('<group location="0,8" number="2"><short location="0,2"/><short location="2,4"/></group>')
    assert validate_document(doc).errors == []


@pytest.mark.parametrize("number, errors", [(2, 0), (5, 0), (3, 1), (4, 1)])
def test_repeated_string_span_splits_evenly(number, errors):
    report = validate_document(_doc(f'<string location="0,10" number="{number}"/>'))
    assert len(report.errors) == errors


# === SERIALIZATION ===
@pytest.mark.parametrize("name", ["shapefile", "swmm"])
def test_parse_serialize_identity(name):
    doc = load_corpus_document(name)
    assert parse_document(serialize_document(doc)) == doc


def test_serialize_keeps_unknown_number():
    doc = _doc('<group location="0,-1" number="unknown"><integer location="0,4"/></group>')
    assert 'number="unknown"' in serialize_document(doc)
