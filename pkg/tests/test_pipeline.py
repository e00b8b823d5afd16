# tests/test_pipeline.py
import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from laryngen.cli import cli
from laryngen.exceptions import ContractError
from laryngen.grid import SemClass
from laryngen.palette import DEFAULT_PALETTE, class_histogram, decode_label_image, read_label_image
from laryngen.pipeline import BatchSummary, ImageOutcome, RunConfig, list_backgrounds, run_batch
from laryngen.samples import make_sample_background
from laryngen.scene import GROUP_TEMPLATES

runner = CliRunner()


def tree(root: Path):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generate_and_verify(background_dir, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["generate", "-i", str(background_dir), "-o", str(out), "-g", "2", "-n", "3", "-q"])
    assert result.exit_code == 0, result.output
    assert "3/3" in result.output
    assert sorted(p.name for p in (out / "labels").iterdir()) == ["0000.png", "0001.png", "0002.png"]
    assert (out / "summary.md").is_file()

    result = runner.invoke(cli, ["verify", "--dir", str(out)])
    assert result.exit_code == 0, result.output
    assert result.output.count("✓") == 3


def test_verify_json(background_dir, tmp_path):
    out = tmp_path / "out"
    runner.invoke(cli, ["generate", "-i", str(background_dir), "-o", str(out), "-g", "1", "-q"])
    result = runner.invoke(cli, ["verify", "--image", str(out / "labels/0000.png"),
                                 "--meta", str(out / "meta/0000.json"), "--json"])
    assert result.exit_code == 0
    assert json.loads(result.output)["passed"] is True


def test_verify_needs_inputs():
    result = runner.invoke(cli, ["verify"])
    assert result.exit_code == 3


@pytest.mark.parametrize("jobs", [1, 2])
def test_same_seed_same_tree(background_dir, tmp_path, jobs):
    args = ["generate", "-i", str(background_dir), "-g", "2", "-n", "4", "--seed", "11", "-q"]
    a = runner.invoke(cli, args + ["-o", str(tmp_path / "a")])
    b = runner.invoke(cli, args + ["-o", str(tmp_path / "b"), "-j", str(jobs)])
    assert a.exit_code == b.exit_code == 0
    assert tree(tmp_path / "a") == tree(tmp_path / "b")


def test_different_seed_different_images(background_dir, tmp_path):
    base = ["generate", "-i", str(background_dir), "-g", "1", "-q"]
    runner.invoke(cli, base + ["-o", str(tmp_path / "a"), "--seed", "1"])
    runner.invoke(cli, base + ["-o", str(tmp_path / "b"), "--seed", "2"])
    a = (tmp_path / "a/labels/0000.png").read_bytes()
    b = (tmp_path / "b/labels/0000.png").read_bytes()
    assert a != b


@pytest.mark.slow
@pytest.mark.parametrize("group", sorted(GROUP_TEMPLATES))
def test_group_presence(background_dir, tmp_path, group):
    cfg = RunConfig(input_dir=background_dir, output_dir=tmp_path, count=5, group=group,
                    master_seed=group, quiet=True)
    summary = run_batch(cfg)
    assert summary.exit_code == 0
    dynamic = {SemClass.PATHOLOGY, SemClass.INTUBATION, SemClass.SURGICAL_TOOL}
    for outcome in summary.outcomes:
        grid = decode_label_image(read_label_image(tmp_path / outcome.image), DEFAULT_PALETTE)
        present = set(class_histogram(grid)) & dynamic
        assert present == set(GROUP_TEMPLATES[group])


def test_scene_file(background_dir, tmp_path):
    scene = tmp_path / "tools.scene"
    scene.write_text("scene { object surgical_tool { count = 2; half_width = 3; } }\n")
    out = tmp_path / "out"
    result = runner.invoke(cli, ["generate", "-i", str(background_dir), "-o", str(out), "-s", str(scene), "-q"])
    assert result.exit_code == 0, result.output
    meta = json.loads((out / "meta/0000.json").read_text())
    assert [o["task"] for o in meta["objects"]] == ["surgical_tool", "surgical_tool#2"]
    assert meta["scene"]["group"] is None


def test_bad_scene_is_fatal(background_dir, tmp_path):
    scene = tmp_path / "bad.scene"
    scene.write_text("scene { object pathology { pivots = 7; } }")
    result = runner.invoke(cli, ["generate", "-i", str(background_dir), "-o", str(tmp_path / "out"),
                                 "-s", str(scene), "-q"])
    assert result.exit_code == 1
    assert "pivot count must be even" in result.output


def test_group_and_scene_are_exclusive(background_dir, tmp_path):
    with pytest.raises(ContractError):
        RunConfig(input_dir=background_dir, output_dir=tmp_path, group=1, scene_path=tmp_path / "x.scene")
    with pytest.raises(ContractError):
        RunConfig(input_dir=background_dir, output_dir=tmp_path)


def test_missing_input_dir(tmp_path):
    result = runner.invoke(cli, ["generate", "-i", str(tmp_path / "none"), "-o", str(tmp_path / "out"), "-g", "1"])
    assert result.exit_code == 1


def test_infeasible_background_skips_every_image(tmp_path):
    from laryngen.grid import CellGrid, GridGeometry
    from laryngen.palette import encode_label_image, write_label_image

    backgrounds = tmp_path / "bg"
    backgrounds.mkdir()
    void = CellGrid.filled(GridGeometry(), SemClass.VOID)
    write_label_image(encode_label_image(void, DEFAULT_PALETTE), backgrounds / "void.png")
    cfg = RunConfig(input_dir=backgrounds, output_dir=tmp_path / "out", count=2, group=1, quiet=True)
    summary = run_batch(cfg)
    assert summary.exit_code == 1
    assert [o.stage for o in summary.outcomes] == ["compile", "compile"]
    assert "compile" in (tmp_path / "out/summary.md").read_text()


def test_partial_success_exit_code():
    ok = ImageOutcome(0, "a.png", image="labels/0000.png")
    bad = ImageOutcome(1, "b.png", ok=False, stage="generate_pathology", stages={"choose_block": 32})
    summary = BatchSummary(2, [ok, bad])
    assert summary.exit_code == 2
    assert summary.stage_counts == [("generate_pathology/choose_block", 32), ("generate_pathology", 1)]
    assert BatchSummary(1, [ok]).exit_code == 0


def test_backgrounds_are_round_robin(background_dir, tmp_path):
    from laryngen.samples import write_sample_background

    write_sample_background(background_dir / "second.ppm")
    assert [p.name for p in list_backgrounds(background_dir)] == ["sample.png", "second.ppm"]
    cfg = RunConfig(input_dir=background_dir, output_dir=tmp_path / "out", count=3, group=3, quiet=True)
    summary = run_batch(cfg)
    assert [Path(o.background).name for o in summary.outcomes] == ["sample.png", "second.ppm", "sample.png"]


def test_strip_command(tmp_path):
    from laryngen.grid import CellGrid
    from laryngen.palette import encode_label_image, write_label_image

    src = tmp_path / "in"
    src.mkdir()
    grid = make_sample_background()
    cells = grid.cells.copy()
    cells[200:220, 40:60] = int(SemClass.PATHOLOGY)
    write_label_image(encode_label_image(CellGrid(grid.geometry, cells), DEFAULT_PALETTE), src / "a.png")
    (src / "b.png").write_bytes(b"garbage")

    result = runner.invoke(cli, ["strip", "-i", str(src), "-o", str(tmp_path / "out")])
    assert result.exit_code == 0
    assert "b.png" in result.output
    stripped = decode_label_image(read_label_image(tmp_path / "out/a.png"), DEFAULT_PALETTE)
    assert stripped == grid


def test_new_workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    result = runner.invoke(cli, ["new", "ws"])
    assert result.exit_code == 0
    assert (tmp_path / "ws/backgrounds/sample.png").is_file()
    assert (tmp_path / "ws/default.palette").is_file()
    assert sorted(p.name for p in (tmp_path / "ws/scenes").iterdir()) == [f"group{n}.scene" for n in range(1, 6)]
    assert runner.invoke(cli, ["new", "ws"]).exit_code == 1

    result = runner.invoke(cli, ["generate", "-i", "ws/backgrounds", "-o", "ws/out",
                                 "-s", "ws/scenes/group3.scene", "-q"])
    assert result.exit_code == 0, result.output


def test_check_scene(tmp_path):
    good = tmp_path / "good.scene"
    good.write_text("scene { group = 1; }")
    result = runner.invoke(cli, ["check-scene", str(good)])
    assert result.exit_code == 0
    assert "object pathology {" in result.output

    bad = tmp_path / "bad.scene"
    bad.write_text("scene {\n  object tumour { }\n}\n")
    result = runner.invoke(cli, ["check-scene", str(bad)])
    assert result.exit_code == 1
    assert f"{bad}:2:10: unknown class 'tumour'" in result.output

    result = runner.invoke(cli, ["check-scene", str(bad), "--json"])
    payload = json.loads(result.output)
    assert payload["error"]["code"] == "SCENE_UNKNOWN_CLASS"
    assert payload["error"]["details"] == {"line": 2, "column": 10}
