"""Correspondence files, ASCII PLY parsing, JSON report round trips."""

import numpy as np
import pytest

from tlsreg.errors import (
    InputError,
    MalformedHeader,
    ShortFile,
    UnsupportedFormat,
)
from tlsreg.fileio import (
    FORMAT_VERSION,
    format_correspondences,
    format_ply_ascii,
    parse_correspondences,
    parse_pairs,
    parse_ply_ascii,
    parse_report,
    read_correspondences,
    report_dict,
    report_to_json,
    write_correspondences,
)
from tlsreg.geometry import CorrespondenceSet, Transform, random_rotation
from tlsreg.pipeline import PipelineConfig, register


@pytest.fixture(scope="module")
def small_result():
    rng = np.random.default_rng(3)
    gt = Transform(1.6, random_rotation(rng), np.array([0.2, -0.4, 1.0]))
    src = rng.normal(size=(8, 3))
    c = CorrespondenceSet(src, gt.apply(src), np.full(8, 1e-3))
    return register(c, PipelineConfig(max_rotation_tims=6))


def test_parse_correspondences_variants():
    text = """
    # comment line
    0 0 0  1 1 1  0.5
    1 0 0  2 1 1          # trailing comment, beta from default
    """
    c = parse_correspondences(text, default_beta=0.25)
    assert len(c) == 2
    assert c.betas.tolist() == [0.5, 0.25]
    assert c.source[1].tolist() == [1.0, 0.0, 0.0]
    assert c.target[0].tolist() == [1.0, 1.0, 1.0]


def test_parse_correspondences_errors():
    with pytest.raises(InputError):
        parse_correspondences("1 2 3 4 5\n")  # five columns
    with pytest.raises(InputError):
        parse_correspondences("1 2 3 4 5 6 7 8\n")  # eight columns
    with pytest.raises(InputError):
        parse_correspondences("1 2 three 4 5 6\n", default_beta=1.0)
    with pytest.raises(InputError):
        parse_correspondences("1 2 3 4 5 6\n")  # no beta anywhere
    with pytest.raises(InputError):
        parse_correspondences("# only comments\n\n")


def test_correspondence_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    c = CorrespondenceSet(
        rng.normal(size=(5, 3)), rng.normal(size=(5, 3)), rng.random(5) + 0.1
    )
    path = tmp_path / "pairs.txt"
    write_correspondences(str(path), c)
    c2 = read_correspondences(str(path))
    assert np.array_equal(c.source, c2.source)
    assert np.array_equal(c.target, c2.target)
    assert np.array_equal(c.betas, c2.betas)


def test_parse_pairs():
    idx, betas = parse_pairs("0 1\n2 3\n")
    assert idx.tolist() == [[0, 1], [2, 3]]
    assert betas is None
    idx, betas = parse_pairs("0 1 0.5\n2 3 0.7\n")
    assert betas.tolist() == [0.5, 0.7]
    with pytest.raises(InputError):
        parse_pairs("0 1 0.5\n2 3\n")  # mixed beta presence
    with pytest.raises(InputError):
        parse_pairs("0\n")
    with pytest.raises(InputError):
        parse_pairs("a b\n")
    with pytest.raises(InputError):
        parse_pairs("# nothing\n")


def test_ply_round_trip_is_exact():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(7, 3)) * np.pi
    text = format_ply_ascii(pts)
    back = parse_ply_ascii(text)
    assert np.array_equal(pts, back)
    # byte input is accepted too
    assert np.array_equal(pts, parse_ply_ascii(text.encode()))
    with pytest.raises(InputError):
        format_ply_ascii(np.zeros((3, 2)))


def test_ply_permuted_and_extra_properties():
    text = "\n".join(
        [
            "ply",
            "format ascii 1.0",
            "comment made by hand",
            "element vertex 2",
            "property float z",
            "property float confidence",
            "property float y",
            "property float x",
            "end_header",
            "3.0 0.9 2.0 1.0",
            "6.0 0.8 5.0 4.0",
        ]
    )
    pts = parse_ply_ascii(text)
    assert pts.tolist() == [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]


def test_ply_skips_other_elements():
    text = "\n".join(
        [
            "ply",
            "format ascii 1.0",
            "element edge 2",
            "property int vertex1",
            "property int vertex2",
            "element vertex 2",
            "property double x",
            "property double y",
            "property double z",
            "element face 1",
            "property list uchar int vertex_indices",
            "end_header",
            "0 1",
            "1 0",
            "1.5 2.5 3.5",
            "4.5 5.5 6.5",
            "3 0 1 0",
        ]
    )
    pts = parse_ply_ascii(text)
    assert pts.tolist() == [[1.5, 2.5, 3.5], [4.5, 5.5, 6.5]]


def test_ply_error_taxonomy():
    good = [
        "ply",
        "format ascii 1.0",
        "element vertex 1",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
        "1 2 3",
    ]
    with pytest.raises(MalformedHeader):
        parse_ply_ascii("\n".join(["not_ply"] + good[1:]))
    with pytest.raises(UnsupportedFormat):
        parse_ply_ascii("\n".join(good).replace("ascii", "binary_little_endian"))
    with pytest.raises(UnsupportedFormat):
        parse_ply_ascii(b"ply\n\xff\xfe binary junk")
    with pytest.raises(MalformedHeader):
        parse_ply_ascii("\n".join(line for line in good if line != "end_header"))
    with pytest.raises(MalformedHeader):
        parse_ply_ascii("\n".join(good).replace("property float y\n", ""))
    no_vertex = good[:2] + ["element face 1", "property float x", "end_header", "1"]
    with pytest.raises(MalformedHeader):
        parse_ply_ascii("\n".join(no_vertex))
    with pytest.raises(MalformedHeader):
        parse_ply_ascii("\n".join(good[:3] + ["property banana x"] + good[4:]))
    with pytest.raises(MalformedHeader):
        parse_ply_ascii("\n".join(["ply", "property float x"] + good[1:]))
    with pytest.raises(UnsupportedFormat):
        parse_ply_ascii(
            "\n".join(
                good[:6] + ["property list uchar int idx"] + good[6:]
            )
        )
    with pytest.raises(ShortFile):
        parse_ply_ascii("\n".join(good).replace("element vertex 1", "element vertex 3"))
    with pytest.raises(ShortFile):
        parse_ply_ascii("\n".join(good[:-1] + ["1 2"]))
    with pytest.raises(MalformedHeader):
        parse_ply_ascii("\n".join(good[:-1] + ["1 2 banana"]))


def test_report_round_trip(small_result):
    text = report_to_json(small_result, config_echo={"seed": 0})
    doc = parse_report(text)
    assert doc["format_version"] == FORMAT_VERSION
    tf = small_result.transform
    assert doc["transform"]["scale"] == tf.s
    assert doc["transform"]["rotation_row_major"] == [float(v) for v in tf.R.reshape(-1)]
    assert doc["transform"]["translation"] == [float(v) for v in tf.t]
    assert doc["certificate"]["tight"] is True
    assert doc["certificate"]["subopt_bound"] == small_result.rotation_cert.subopt_bound
    assert doc["inliers"]["clique_vertices"] == list(range(8))
    assert doc["inliers"]["rotation_accepted"] == [1] * 6
    assert doc["config"] == {"seed": 0}
    assert "timings" not in doc


def test_report_timings_toggle(small_result):
    doc = report_dict(small_result, include_timings=True)
    assert set(doc["timings"]) == {
        "graph", "scale", "clique", "rotation", "translation", "total",
    }


def test_report_version_gate(small_result):
    text = report_to_json(small_result)
    minor_bump = text.replace('"format_version": "1.0"', '"format_version": "1.7"')
    assert parse_report(minor_bump)["format_version"] == "1.7"
    major_bump = text.replace('"format_version": "1.0"', '"format_version": "2.0"')
    with pytest.raises(UnsupportedFormat):
        parse_report(major_bump)
    with pytest.raises(InputError):
        parse_report("{not json")
    with pytest.raises(UnsupportedFormat):
        parse_report("{}")
