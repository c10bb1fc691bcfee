import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from fixtures import (  # noqa: E402
    build_point_shapefile,
    build_swmm_subcatchments,
    load_corpus_document,
    sample_points,
    sample_swmm_rows,
)
from linearizer import linearize  # noqa: E402


@pytest.fixture
def shapefile_doc():
    return load_corpus_document("shapefile")


@pytest.fixture
def swmm_doc():
    return load_corpus_document("swmm")


@pytest.fixture
def shapefile_seq(shapefile_doc):
    return linearize(shapefile_doc)


@pytest.fixture
def swmm_seq(swmm_doc):
    return linearize(swmm_doc)


@pytest.fixture
def points3_bytes():
    return build_point_shapefile(sample_points(3))


@pytest.fixture
def swmm2_bytes():
    return build_swmm_subcatchments(sample_swmm_rows(2)).encode("utf-8")


@pytest.fixture
def points3_file(tmp_path, points3_bytes):
    path = tmp_path / "points3.shp"
    path.write_bytes(points3_bytes)
    return path


@pytest.fixture
def swmm2_file(tmp_path, swmm2_bytes):
    path = tmp_path / "subcatchments2.inp"
    path.write_bytes(swmm2_bytes)
    return path
