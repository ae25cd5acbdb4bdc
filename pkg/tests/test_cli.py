"""Command-line interface: subcommands, file routes, exit codes."""

import json

import numpy as np
import pytest

from tlsreg.cli import main
from tlsreg.fileio import format_ply_ascii, parse_report
from tlsreg.geometry import Transform, random_rotation

INCONSISTENT = "\n".join(
    [
        "0 0 0   0 0 0    0.001",
        "1 0 0   10 0 0   0.001",
        "0 1 0   0 100 0  0.001",
    ]
) + "\n"


def make_scene_files(tmp_path, n=10, seed=5, beta=1e-3):
    rng = np.random.default_rng(seed)
    gt = Transform(1.9, random_rotation(rng), np.array([0.1, 0.7, -0.4]))
    src = rng.normal(size=(n, 3))
    tgt = gt.apply(src)
    rows = [
        " ".join(repr(float(v)) for v in list(a) + list(b) + [beta])
        for a, b in zip(src, tgt)
    ]
    path = tmp_path / "corr.txt"
    path.write_text("\n".join(rows) + "\n")
    return path, gt, src, tgt


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "tlsreg" in capsys.readouterr().out


def test_register_demo(capsys):
    assert main(["register", "--demo", "--max-tims", "8"]) == 0
    doc = parse_report(capsys.readouterr().out)
    assert doc["transform"]["scale"] == pytest.approx(1.7, abs=1e-6)
    assert doc["certificate"]["tight"] is True


def test_register_correspondence_file(tmp_path, capsys):
    path, gt, _, _ = make_scene_files(tmp_path)
    out = tmp_path / "report.json"
    code = main(["register", str(path), "--max-tims", "8", "--out", str(out), "--timings"])
    assert code == 0
    assert capsys.readouterr().out == ""
    doc = parse_report(out.read_text())
    assert doc["transform"]["scale"] == pytest.approx(gt.s, abs=1e-6)
    r = np.array(doc["transform"]["rotation_row_major"]).reshape(3, 3)
    assert np.abs(r - gt.R).max() < 1e-5
    assert "timings" in doc
    assert doc["config"]["n_correspondences"] == 10


def test_register_ply_route(tmp_path, capsys):
    _, gt, src, tgt = make_scene_files(tmp_path)
    sp = tmp_path / "source.ply"
    tp = tmp_path / "target.ply"
    pp = tmp_path / "pairs.txt"
    sp.write_text(format_ply_ascii(src))
    # target cloud stored in reversed order; the pair file undoes it
    tp.write_text(format_ply_ascii(tgt[::-1]))
    n = src.shape[0]
    pp.write_text("\n".join(f"{i} {n - 1 - i}" for i in range(n)) + "\n")
    code = main(
        [
            "register",
            "--source-ply", str(sp),
            "--target-ply", str(tp),
            "--pairs", str(pp),
            "--beta", "1e-3",
            "--max-tims", "8",
        ]
    )
    assert code == 0
    doc = parse_report(capsys.readouterr().out)
    assert doc["transform"]["scale"] == pytest.approx(gt.s, abs=1e-6)


def test_register_input_errors(tmp_path, capsys):
    # no input source at all
    assert main(["register"]) == 1
    assert "error:" in capsys.readouterr().err
    # two input sources at once
    path, _, _, _ = make_scene_files(tmp_path)
    assert main(["register", str(path), "--demo"]) == 1
    capsys.readouterr()
    # missing file
    assert main(["register", str(tmp_path / "nope.txt")]) == 1
    capsys.readouterr()
    # too few correspondences
    two = tmp_path / "two.txt"
    two.write_text("0 0 0 1 1 1 0.1\n1 0 0 2 1 1 0.1\n")
    assert main(["register", str(two)]) == 1
    capsys.readouterr()
    # incomplete ply route
    assert main(["register", "--source-ply", "a.ply"]) == 1
    capsys.readouterr()
    # pairs index out of range
    sp = tmp_path / "s.ply"
    tp = tmp_path / "t.ply"
    pp = tmp_path / "p.txt"
    sp.write_text(format_ply_ascii(np.zeros((3, 3))))
    tp.write_text(format_ply_ascii(np.zeros((3, 3))))
    pp.write_text("0 0\n1 1\n2 9\n")
    code = main(
        ["register", "--source-ply", str(sp), "--target-ply", str(tp),
         "--pairs", str(pp), "--beta", "0.1"]
    )
    assert code == 1
    capsys.readouterr()
    # pairs without betas and no --beta fallback
    pp.write_text("0 0\n1 1\n2 2\n")
    code = main(
        ["register", "--source-ply", str(sp), "--target-ply", str(tp), "--pairs", str(pp)]
    )
    assert code == 1
    capsys.readouterr()


def test_register_numerical_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text(INCONSISTENT)
    # fixing the scale makes every pair ratio inconsistent: pruning empties
    # the graph and the cascade reports a numerical failure
    assert main(["register", str(path), "--known-scale", "1.0"]) == 2
    assert "numerical failure:" in capsys.readouterr().err


def test_gen_then_register_round_trip(tmp_path, capsys):
    prefix = tmp_path / "scene"
    code = main(
        [
            "gen", "--n", "12", "--outlier-rate", "0.1", "--sigma", "0.004",
            "--beta", "0.0222", "--seed", "7", "--out-prefix", str(prefix),
        ]
    )
    assert code == 0
    assert "wrote" in capsys.readouterr().out
    truth = json.loads((tmp_path / "scene_truth.json").read_text())
    assert len(truth["inlier_mask"]) == 12
    code = main(
        ["register", str(tmp_path / "scene_correspondences.txt"), "--max-tims", "8"]
    )
    assert code == 0
    doc = parse_report(capsys.readouterr().out)
    assert doc["transform"]["scale"] == pytest.approx(truth["scale"], abs=0.02)
    r_est = np.array(doc["transform"]["rotation_row_major"]).reshape(3, 3)
    r_true = np.array(truth["rotation_row_major"]).reshape(3, 3)
    assert np.abs(r_est - r_true).max() < 0.05


def test_bench_scale_only(tmp_path, capsys):
    out = tmp_path / "bench.json"
    code = main(
        [
            "bench", "--mode", "scale_only", "--n", "20", "--trials", "3",
            "--outlier-rate", "0.2", "--seed", "1", "--out", str(out),
        ]
    )
    assert code == 0
    table = capsys.readouterr().out
    assert table.splitlines()[0].startswith("metric")
    assert "scale_error" in table
    doc = json.loads(out.read_text())
    assert doc["config"]["mode"] == "scale_only"
    assert doc["summary"]["n_trials"] == 3
    assert len(doc["trials"]) == 3
    # timings stripped unless requested
    assert "elapsed" not in doc["summary"]
    assert all("elapsed" not in t for t in doc["trials"])


def test_bench_stdout_json_with_timings(capsys):
    code = main(
        ["bench", "--mode", "translation_only", "--n", "15", "--trials", "2",
         "--timings"]
    )
    assert code == 0
    out = capsys.readouterr().out
    # table first, JSON document after it
    start = out.index("{")
    doc = json.loads(out[start:])
    assert "elapsed" in doc["summary"]
    assert doc["summary"]["translation_error"]["median"] < 0.05


def test_bench_bad_config_exit_code(capsys):
    assert main(["bench", "--outlier-rate", "1.5"]) == 1
    assert "error:" in capsys.readouterr().err


def test_gen_requires_prefix(capsys):
    assert main(["gen"]) == 1
    capsys.readouterr()
