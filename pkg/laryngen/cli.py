# laryngen/cli.py
"""
Command-line interface for laryngen.

Commands: ``generate`` builds a dataset, ``verify`` checks generated samples,
``strip`` prepares backgrounds, ``new`` scaffolds a workspace and
``check-scene`` validates a scene file.
"""

import json
from pathlib import Path
from typing import List, NoReturn, Optional

import typer

from .exceptions import LaryngenError, SceneError, VerificationError, error_payload
from .grid import GridGeometry
from .log import configure_logging
from .palette import default_palette_path, load_palette
from .pipeline import RunConfig, default_jobs, run_batch, strip_directory
from .samples import sample_scene_text, write_sample_background
from .scene import GROUP_TEMPLATES, format_scene_spec, load_scene
from .search import SearchOptions
from .verify import verified_pairs, verify_output

cli = typer.Typer(help="Generate labeled laryngoscopy label maps by guess and check.")


@cli.callback()
def main(debug: bool = typer.Option(False, "--debug", help="Log every failed attempt")):
    configure_logging(debug or None)


def _fail(exc: LaryngenError, as_json: bool = False) -> NoReturn:
    if as_json:
        typer.echo(json.dumps(error_payload(exc), sort_keys=True))
    else:
        typer.echo(f"Error: {exc}", err=True)
    raise typer.Exit(exc.exit_code)


@cli.command()
def generate(
    input_dir: Path = typer.Option(..., "--input", "-i", help="Directory of background label maps"),
    out: Path = typer.Option(..., "--out", "-o", help="Output directory"),
    group: Optional[int] = typer.Option(None, "--group", "-g", min=1, max=5, help="Group template 1..5"),
    scene: Optional[Path] = typer.Option(None, "--scene", "-s", help="Scene file"),
    count: int = typer.Option(1, "--count", "-n", min=1),
    seed: int = typer.Option(0, "--seed"),
    palette: Optional[Path] = typer.Option(None, "--palette", help="Palette file"),
    exhaustive: bool = typer.Option(False, "--exhaustive", help="Enumerate paths exhaustively"),
    jobs: int = typer.Option(default_jobs(), "--jobs", "-j", min=1),
    block: int = typer.Option(64, "--block", min=1, help="Block side in cells"),
    sub: int = typer.Option(8, "--sub", min=1, help="Sub-block side in cells"),
    neighborhood: int = typer.Option(8, "--neighborhood", help="Sub-block adjacency, 4 or 8"),
    retries: int = typer.Option(32, "--retries", min=1, help="Attempts per object"),
    budget: int = typer.Option(20000, "--budget", min=1, help="Best-first expansions per pivot pair"),
    column_penalty: bool = typer.Option(False, "--column-penalty", help="Also penalise column alignment"),
    snap: Optional[int] = typer.Option(None, "--snap", min=0, help="Snap background colors within this distance"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="No progress bar"),
):
    """
    Generate a labeled dataset.
    """
    try:
        geometry = GridGeometry(block_dim=block, sub_dim=sub, neighborhood=neighborhood)
        cfg = RunConfig(
            input_dir=input_dir, output_dir=out, count=count, group=group, scene_path=scene,
            master_seed=seed, palette_path=palette, geometry=geometry,
            search=SearchOptions(exhaustive=exhaustive, budget=budget, retries=retries,
                                 column_penalty=column_penalty),
            jobs=jobs, snap=snap, quiet=quiet,
        )
        summary = run_batch(cfg)
    except LaryngenError as exc:
        _fail(exc)
    typer.echo(f"✓ {len(summary.succeeded)}/{summary.requested} image(s) written to {out}")
    for stage, n in summary.stage_counts:
        typer.echo(f"  {stage}: {n}")
    raise typer.Exit(summary.exit_code)


@cli.command()
def verify(
    image: Optional[Path] = typer.Option(None, "--image", help="Label image"),
    meta: Optional[Path] = typer.Option(None, "--meta", help="Metadata record"),
    tree: Optional[Path] = typer.Option(None, "--dir", help="Verify every sample of a generated tree"),
    palette: Optional[Path] = typer.Option(None, "--palette", help="Palette file"),
    background: Optional[Path] = typer.Option(None, "--background", help="Override the recorded background"),
    as_json: bool = typer.Option(False, "--json", help="Print reports as JSON"),
):
    """
    Check generated samples against every constraint.

    Exits 0 when all pass, 1 when a constraint fails, 3 when files are
    unreadable or do not belong together.
    """
    if tree is not None:
        pairs = verified_pairs(tree)
    elif image is not None and meta is not None:
        pairs = [(image, meta)]
    else:
        typer.echo("Error: give --image and --meta, or --dir", err=True)
        raise typer.Exit(3)
    try:
        pal = load_palette(palette)
    except LaryngenError as exc:
        _fail(VerificationError(str(exc)), as_json)

    failed = 0
    for img_path, meta_path in pairs:
        try:
            report = verify_output(img_path, meta_path, pal, background)
        except VerificationError as exc:
            _fail(exc, as_json)
        if as_json:
            typer.echo(json.dumps({"image": str(img_path), **report.to_dict()}, sort_keys=True))
        elif report.passed:
            typer.echo(f"✓ {img_path}")
        else:
            typer.echo(f"✗ {img_path}")
            for problem in report.problems:
                typer.echo(f"  {problem}")
        failed += not report.passed
    raise typer.Exit(1 if failed else 0)


@cli.command()
def strip(
    input_dir: Path = typer.Option(..., "--input", "-i"),
    out: Path = typer.Option(..., "--out", "-o"),
    palette: Optional[Path] = typer.Option(None, "--palette"),
    snap: Optional[int] = typer.Option(None, "--snap", min=0),
):
    """
    Remove pathology, intubation and tools from a directory of label maps.
    """
    try:
        results = strip_directory(input_dir, out, load_palette(palette), snap=snap)
    except LaryngenError as exc:
        _fail(exc)
    bad: List[str] = [name for name, status in results.items() if status != "ok"]
    typer.echo(f"✓ stripped {len(results) - len(bad)} background(s) into {out}")
    for name in bad:
        typer.echo(f"⚠ {name}: {results[name]}")
    raise typer.Exit(0 if len(bad) < len(results) else 1)


@cli.command()
def new(name: str):
    """
    Create a workspace with a sample background, the palette and one scene per group.
    """
    root = Path(name)
    if root.exists():
        typer.echo(f"Error: Directory '{name}' already exists")
        raise typer.Exit(1)
    root.mkdir(parents=True)
    write_sample_background(root / "backgrounds" / "sample.png")
    (root / "default.palette").write_text(default_palette_path().read_text(encoding="utf-8"), encoding="utf-8")
    scenes = root / "scenes"
    scenes.mkdir()
    for group in GROUP_TEMPLATES:
        (scenes / f"group{group}.scene").write_text(sample_scene_text(group), encoding="utf-8")
    typer.echo(f"✓ Created laryngen workspace: {name}")
    typer.echo(f"  laryngen generate -i {name}/backgrounds -o {name}/out -s {name}/scenes/group2.scene -n 10")


@cli.command("check-scene")
def check_scene(
    path: Path,
    as_json: bool = typer.Option(False, "--json", help="Print diagnostics as JSON"),
):
    """
    Parse a scene file and print its canonical form.
    """
    try:
        spec = load_scene(path)
    except SceneError as exc:
        if as_json:
            _fail(exc, True)
        typer.echo(f"{path}:{exc.line}:{exc.column}: {exc.message}", err=True)
        raise typer.Exit(1)
    except OSError as exc:
        typer.echo(f"Error: {exc}", err=True)
        raise typer.Exit(1)
    typer.echo(format_scene_spec(spec), nl=False)


if __name__ == "__main__":
    cli()
