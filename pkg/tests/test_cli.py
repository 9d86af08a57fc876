import numpy as np
import pytest

from lfseg.cli import main, parse_config_file
from lfseg.lightfield import Mask, read_mask, write_mask
from lfseg.synth import emit, example_scene_spec, generate


@pytest.fixture(scope="module")
def emitted(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli_scene")
    scene = generate(example_scene_spec(width=64, height=64, seed=0))
    emit(scene, path, flows="exact")
    return path, scene


def test_segment_subcommand(emitted, tmp_path, capsys):
    lf_dir, scene = emitted
    code = main(["--verbose", "segment", "--lf", str(lf_dir), "--out", str(tmp_path),
                 "--flow-source", str(lf_dir), "--tau", "0.9"])
    assert code == 0
    assert (tmp_path / "mask.png").is_file()
    assert "energy" in capsys.readouterr().out


def test_features_subcommand(emitted, tmp_path):
    lf_dir, _ = emitted
    code = main(["features", "--lf", str(lf_dir), "--out", str(tmp_path),
                 "--flow-source", str(lf_dir)])
    assert code == 0
    assert (tmp_path / "E.png").is_file()
    assert not (tmp_path / "mask.png").exists()


def test_corrupt_manifest_exits_2(tmp_path, capsys):
    lf = tmp_path / "lf"
    lf.mkdir()
    (lf / "manifest").write_text("grid_rows=5\ngrid_cols=5\nview bogus\n")
    code = main(["segment", "--lf", str(lf), "--out", str(tmp_path / "out")])
    assert code == 2
    assert "line 3" in capsys.readouterr().err


def test_usage_error_exits_1(capsys):
    assert main(["segment", "--lf"]) == 1
    assert main(["nonsense"]) == 1


def test_bad_config_file_exits_1(emitted, tmp_path, capsys):
    lf_dir, _ = emitted
    cfg = tmp_path / "cfg"
    cfg.write_text("alpha=70\nbogus_key=3\n")
    code = main(["--config", str(cfg), "segment", "--lf", str(lf_dir), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "bogus_key" in capsys.readouterr().err


def test_config_file_and_flag_override(emitted, tmp_path):
    cfg = tmp_path / "cfg"
    cfg.write_text("# pipeline knobs\nalpha=50\ntau=0.9\nsubset=uniform9\n")
    values = parse_config_file(cfg)
    assert values == {"alpha": 50.0, "tau": 0.9, "subset": "uniform9"}
    lf_dir, _ = emitted
    code = main(["--config", str(cfg), "segment", "--lf", str(lf_dir),
                 "--out", str(tmp_path / "out"), "--flow-source", str(lf_dir),
                 "--subset", "all"])
    assert code == 0


def test_synth_subcommand(tmp_path, capsys):
    spec = tmp_path / "scene.txt"
    spec.write_text("width=48\nheight=40\nregion=disk 24 20 10\nbg_disparity=0.5\n")
    out = tmp_path / "scene"
    code = main(["--verbose", "synth", "--spec", str(spec), "--out", str(out),
                 "--seed", "3", "--emit-flows"])
    assert code == 0
    assert (out / "manifest").is_file()
    assert (out / "gt_mask.png").is_file()
    assert (out / "flow_f_1_0.flo").is_file()
    assert "25 views" in capsys.readouterr().out


def test_synth_bad_spec_exits_1(tmp_path, capsys):
    spec = tmp_path / "scene.txt"
    spec.write_text("width=48\n")  # height missing
    assert main(["synth", "--spec", str(spec), "--out", str(tmp_path / "o")]) == 1


def test_eval_pair(tmp_path, capsys):
    gt = Mask(np.array([[1, 1], [0, 0]], np.uint8))
    pred = Mask(np.array([[1, 0], [0, 0]], np.uint8))
    write_mask(gt, tmp_path / "gt.png")
    write_mask(pred, tmp_path / "pred.png")
    code = main(["eval", "--pred", str(tmp_path / "pred.png"), "--gt", str(tmp_path / "gt.png")])
    assert code == 0
    out = capsys.readouterr().out
    assert "precision=1.000000" in out and "recall=0.500000" in out


def test_eval_requires_inputs(capsys):
    assert main(["eval"]) == 1


def test_eval_batch(tmp_path, capsys):
    for scene, flip in (("s0", False), ("s1", True)):
        d = tmp_path / "batch" / scene
        d.mkdir(parents=True)
        gt = Mask(np.array([[1, 0], [0, 1]], np.uint8))
        pred = gt if not flip else Mask(np.array([[0, 1], [1, 0]], np.uint8))
        write_mask(gt, d / "gt_mask.png")
        write_mask(pred, d / "method_a.png")
    code = main(["eval", "--batch", str(tmp_path / "batch"), "--csv", str(tmp_path / "out.csv")])
    assert code == 0
    out = capsys.readouterr().out
    assert "method_a" in out and "(average)" in out
    csv = (tmp_path / "out.csv").read_text().splitlines()
    assert csv[0] == "scene,method,precision,recall,f"
    assert any(line.startswith("average,method_a,0.5") for line in csv)


def test_flow_subcommand(tmp_path):
    scene = generate(example_scene_spec(width=32, height=32, seed=2,
                                        with_region=False, with_occluder=False))
    emit(scene, tmp_path / "lf", flows=None)
    cfg = tmp_path / "cfg"
    cfg.write_text("flow_levels=1\nflow_search_radius=3\nflow_patch_radius=2\n")
    code = main(["--config", str(cfg), "flow", "--lf", str(tmp_path / "lf"), "--out", str(tmp_path / "cache")])
    assert code == 0
    flo = sorted((tmp_path / "cache").glob("flow_*.flo"))
    assert len(flo) == 48
    # cache is importable by segment
    code = main(["--config", str(cfg), "segment", "--lf", str(tmp_path / "lf"),
                 "--out", str(tmp_path / "out"), "--flow-source", str(tmp_path / "cache"), "--tau", "2.0"])
    assert code == 0
    mask = read_mask(tmp_path / "out" / "mask.png")
    assert mask.data.mean() < 0.05
