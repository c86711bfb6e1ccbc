"""End-to-end runs of every CLI command through click's test runner."""

import filecmp
import json

import numpy as np
import pytest
from click.testing import CliRunner

from hierattr.cli import main
from hierattr.imageio import read_csv_matrix, read_pgm, write_pgm


@pytest.fixture
def runner():
    return CliRunner()


def square_image(size=32, lo=255.0, hi=0.0):
    img = np.full((size, size), lo)
    q = size // 4
    img[q + 4 : 3 * q + 4, q + 4 : 3 * q + 4] = hi
    return img


def write_golden(tmp_path, size=32):
    path = tmp_path / "img.pgm"
    write_pgm(path, square_image(size))
    return path


def test_segment_golden(runner, tmp_path):
    img = write_golden(tmp_path)
    out = tmp_path / "seg"
    result = runner.invoke(main, ["segment", "--input", str(img), "--out", str(out)])
    assert result.exit_code == 0, result.output
    doc = json.loads((out / "hierarchy.json").read_text())
    assert doc["n_features"] == 1024
    meta = json.loads((out / "meta.json").read_text())
    assert meta["pct_lower"] == 75.0 and meta["pct_upper"] == 90.0
    levels = sorted(out.glob("level_*.pgm"))
    assert levels
    # some level resolves the square against the background
    assert any(len(np.unique(read_pgm(p))) >= 2 for p in levels)


def test_segment_bad_percentiles_exit_2(runner, tmp_path):
    img = write_golden(tmp_path)
    result = runner.invoke(
        main,
        ["segment", "--input", str(img), "--out", str(tmp_path / "o"),
         "--pct-lower", "95", "--pct-upper", "50"],
    )
    assert result.exit_code == 2


def test_segment_unknown_scorer_exit_2(runner, tmp_path):
    img = write_golden(tmp_path)
    result = runner.invoke(
        main,
        ["segment", "--input", str(img), "--out", str(tmp_path / "o"),
         "--scorer", "nonsense"],
    )
    assert result.exit_code == 2


def test_explain_shapley_matches_owen_small(runner, tmp_path):
    # 4x4 image with an additive scorer: both methods give the pixel weights
    img = tmp_path / "small.pgm"
    arr = np.arange(16, dtype=float).reshape(4, 4) * 10
    write_pgm(img, arr)
    outs = {}
    for method in ("shapley", "owen"):
        out = tmp_path / method
        result = runner.invoke(
            main,
            ["explain", "--input", str(img), "--method", method,
             "--scorer", "sum", "--baseline", "zero", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        outs[method] = read_csv_matrix(out / "attribution.csv")
    assert np.abs(outs["shapley"] - outs["owen"]).max() < 1e-9
    assert np.abs(outs["shapley"] - arr).max() < 1e-9


def test_explain_heatmap_hits_extremes(runner, tmp_path):
    img = tmp_path / "small.pgm"
    write_pgm(img, np.arange(16, dtype=float).reshape(4, 4) * 10)
    out = tmp_path / "o"
    result = runner.invoke(
        main,
        ["explain", "--input", str(img), "--method", "shapley",
         "--scorer", "sum", "--baseline", "zero", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    hm = read_pgm(out / "heatmap.pgm")
    assert hm.min() == 0 and hm.max() == 255


def test_explain_owen_byte_reproducible(runner, tmp_path):
    img = write_golden(tmp_path)
    for name in ("a", "b"):
        result = runner.invoke(
            main, ["explain", "--input", str(img), "--out", str(tmp_path / name)]
        )
        assert result.exit_code == 0, result.output
    for fname in ("attribution.csv", "heatmap.pgm"):
        assert filecmp.cmp(tmp_path / "a" / fname, tmp_path / "b" / fname, shallow=False)
    stats = json.loads((tmp_path / "a" / "stats.json").read_text())
    assert stats["method"].startswith("owen")
    assert stats["predicted_eval_count"] >= 1
    assert stats["distinct_evals"] >= 1


def test_explain_mc_shapley_runs(runner, tmp_path):
    img = tmp_path / "small.pgm"
    write_pgm(img, np.arange(16, dtype=float).reshape(4, 4) * 10)
    out = tmp_path / "mc"
    result = runner.invoke(
        main,
        ["explain", "--input", str(img), "--method", "shapley", "--mc", "200",
         "--seed", "7", "--scorer", "sum", "--baseline", "zero", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    attr = read_csv_matrix(out / "attribution.csv")
    assert attr.shape == (4, 4)


def test_check_t_pass_and_fail(runner, tmp_path):
    img = write_golden(tmp_path, 16)
    seg = tmp_path / "seg"
    assert runner.invoke(
        main, ["segment", "--input", str(img), "--out", str(seg)]
    ).exit_code == 0
    # with tau = -inf no region can fall below threshold: pass, exit 0
    ok = runner.invoke(
        main,
        ["check-t", "--input", str(img), "--hierarchy", str(seg / "hierarchy.json"),
         "--tau", "-1e30"],
    )
    assert ok.exit_code == 0, ok.output
    assert json.loads(ok.output)["pass"] is True
    # report JSON and exit code must agree for a mid-range tau too
    bad = runner.invoke(
        main,
        ["check-t", "--input", str(img), "--hierarchy", str(seg / "hierarchy.json"),
         "--tau", "300", "--out", str(tmp_path / "report.json")],
    )
    assert bad.exit_code in (0, 3)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["pass"] is (bad.exit_code == 0)


def test_check_t_violation_exit_3(runner, tmp_path):
    from hierattr import prop4_counterexample, axis_aligned_hierarchy

    bundle = prop4_counterexample()
    img = tmp_path / "cx.pgm"
    write_pgm(img, bundle.image)
    h = axis_aligned_hierarchy(32, 32, [2, 2])
    hpath = tmp_path / "h.json"
    hpath.write_text(h.to_json())
    result = runner.invoke(
        main,
        ["check-t", "--input", str(img), "--hierarchy", str(hpath),
         "--scorer", "mean", "--baseline", "mean", "--tau", str(bundle.tau)],
    )
    assert result.exit_code == 3
    assert json.loads(result.output)["pass"] is False


def test_metrics_command(runner, tmp_path):
    attr = np.zeros((8, 8))
    attr[2:6, 2:6] = 1.0
    attr_path = tmp_path / "attr.csv"
    from hierattr.imageio import write_csv_matrix

    write_csv_matrix(attr_path, attr)
    mask_path = tmp_path / "mask.pgm"
    write_pgm(mask_path, np.where(attr > 0, 255.0, 0.0))
    result = runner.invoke(
        main,
        ["metrics", "--attr", str(attr_path), "--mask", str(mask_path),
         "--bbox", "2,2,5,5", "--out", str(tmp_path / "m.json")],
    )
    assert result.exit_code == 0, result.output
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["ebpg"] == 1.0 and doc["miou"] == 1.0 and doc["bbox"] == 1.0
    assert doc["f1"] == 1.0 and doc["auc"] == 1.0
    lines = result.output.strip().splitlines()
    assert lines[-2].startswith("ebpg,")
    assert len(lines[-1].split(",")) == 6


def test_metrics_bad_bbox_exit_2(runner, tmp_path):
    from hierattr.imageio import write_csv_matrix

    attr_path = tmp_path / "attr.csv"
    write_csv_matrix(attr_path, np.ones((4, 4)))
    result = runner.invoke(
        main, ["metrics", "--attr", str(attr_path), "--bbox", "1,2,3"]
    )
    assert result.exit_code == 2


def test_compare_cost_table(runner):
    result = CliRunner().invoke(
        main, ["compare-cost", "--n-features", "50", "--fanout", "2,5,5"]
    )
    assert result.exit_code == 0, result.output
    lines = result.output.strip().splitlines()
    assert lines[0] == "method,predicted_per_feature,measured_distinct"
    assert lines[1] == f"flat_shapley,{1 << 50},"
    owen = lines[2].split(",")
    assert owen[0] == "hierarchical_owen"
    assert owen[1] == "4096"
    assert int(owen[2]) >= 4096


def test_compare_cost_mismatched_fanout_exit_2(runner):
    result = runner.invoke(
        main, ["compare-cost", "--n-features", "10", "--fanout", "2,5,5"]
    )
    assert result.exit_code == 2


def test_bench_csv_deterministic(runner, tmp_path):
    args = ["bench", "--sizes", "8", "--out"]
    outputs = []
    for name in ("r1.csv", "r2.csv"):
        path = tmp_path / name
        result = runner.invoke(main, args + [str(path)])
        assert result.exit_code == 0, result.output
        outputs.append(path.read_text().splitlines())
    assert outputs[0][0] == "size,pixels,shapley_feasible,distinct_evals,total_requests,wall_time_s"
    # all columns except wall time agree across runs
    a = outputs[0][1].split(",")[:-1]
    b = outputs[1][1].split(",")[:-1]
    assert a == b
    assert a[0] == "8" and a[1] == "64" and a[2] == "no"
