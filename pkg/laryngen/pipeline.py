# laryngen/pipeline.py
"""
Batch generation.

``run_batch`` turns a directory of background label maps into a paired
dataset::

    out/
      labels/0000.png
      meta/0000.json
      summary.md

Image ``i`` uses background ``i mod N`` (sorted by name) and the sub-seed
``derive_seed(master_seed, i)``, so its content does not depend on which
worker produced it or in what order.
"""

import os
import tempfile
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

from tqdm import tqdm

from .cache import get_default_cache
from .exceptions import (
    CompileError,
    ContractError,
    DecodeError,
    GenerationFailure,
    GeometryError,
    LaryngenError,
    error_payload,
)
from .grid import DYNAMIC_CLASSES, CellGrid, GridGeometry
from .log import logger
from .metadata import emit_metadata, write_metadata
from .palette import (
    ClassPalette,
    class_histogram,
    decode_label_image,
    encode_label_image,
    file_digest,
    load_palette,
    read_label_image,
    strip_classes,
    write_label_image,
)
from .plan import compile_plan, derive_seed
from .report import render_summary
from .scene import SceneSpec, format_scene_spec, load_scene, scene_for_group
from .search import SearchOptions
from .synth import run_plan

BACKGROUND_SUFFIXES = (".png", ".ppm")
JOBS_ENV = "LARYNGEN_JOBS"


def default_jobs() -> int:
    """Worker count from LARYNGEN_JOBS, else 1."""
    try:
        return max(int(os.getenv(JOBS_ENV, "1")), 1)
    except ValueError:
        return 1


@dataclass(frozen=True)
class RunConfig:
    """
    Configuration of one ``generate`` run.

    Attributes:
        input_dir: Directory of background label maps
        output_dir: Root of the generated tree
        count: Number of images to generate
        group: Group template id (exclusive with scene_path)
        scene_path: Scene file (exclusive with group)
        master_seed: Seed every image sub-seed derives from
        palette_path: Palette file; None resolves LARYNGEN_PALETTE, then the default
        geometry: Block partitioning; width and height follow each background
        search: Search options
        jobs: Worker processes
        snap: Color snapping tolerance for backgrounds saved with lossy colors
        quiet: Disable the progress bar
    """

    input_dir: Path
    output_dir: Path
    count: int = 1
    group: Optional[int] = None
    scene_path: Optional[Path] = None
    master_seed: int = 0
    palette_path: Optional[Path] = None
    geometry: GridGeometry = field(default_factory=GridGeometry)
    search: SearchOptions = field(default_factory=SearchOptions)
    jobs: int = 1
    snap: Optional[int] = None
    quiet: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise ContractError("count must be at least 1", count=self.count)
        if (self.group is None) == (self.scene_path is None):
            raise ContractError("give exactly one of group and scene")
        if self.jobs < 1:
            raise ContractError("jobs must be at least 1", jobs=self.jobs)
        if self.search.retries < 1:
            raise ContractError("retries must be at least 1", retries=self.search.retries)

    def load_scene(self) -> SceneSpec:
        if self.scene_path is not None:
            return load_scene(self.scene_path)
        return scene_for_group(int(self.group))  # type: ignore[arg-type]


@dataclass(frozen=True)
class ImageOutcome:
    index: int
    background: str
    image: str = ""
    ok: bool = True
    stage: str = ""
    message: str = ""
    histogram: Dict[str, int] = field(default_factory=dict)
    stages: Dict[str, int] = field(default_factory=dict)


@dataclass
class BatchSummary:
    """
    Result of a batch.

    ``exit_code`` is 0 when every image was generated, 2 when some were,
    1 when none were.
    """

    requested: int
    outcomes: List[ImageOutcome] = field(default_factory=list)

    @property
    def succeeded(self) -> List[ImageOutcome]:
        return [o for o in self.outcomes if o.ok]

    @property
    def failed(self) -> List[ImageOutcome]:
        return [o for o in self.outcomes if not o.ok]

    @property
    def stage_counts(self) -> List[Tuple[str, int]]:
        """Failed attempts per stage over the whole batch, most frequent first."""
        counts: Counter = Counter()
        for o in self.failed:
            counts[o.stage] += 1
            counts.update({f"{o.stage}/{k}": v for k, v in o.stages.items()})
        return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))

    @property
    def exit_code(self) -> int:
        if not self.succeeded:
            return 1
        return 0 if not self.failed else 2


def list_backgrounds(input_dir: Union[str, Path]) -> List[Path]:
    """
    Background files of a directory, sorted by name.

    Raises:
        ContractError: If the directory is missing or holds no background
    """
    root = Path(input_dir)
    if not root.is_dir():
        raise ContractError(f"input directory {root} does not exist")
    found = sorted(p for p in root.iterdir() if p.is_file() and p.suffix.lower() in BACKGROUND_SUFFIXES)
    if not found:
        raise ContractError(f"no .png or .ppm background in {root}")
    return found


def load_background(path: Path, palette: ClassPalette, geometry: GridGeometry,
                    snap: Optional[int] = None) -> Tuple[CellGrid, str]:
    """
    Decode and strip a background, memoised per process.

    Returns:
        tuple: (stripped grid, file sha256)
    """
    digest = file_digest(path)
    key = (str(path), digest, palette.digest, geometry.block_dim, geometry.sub_dim,
           geometry.neighborhood, snap)
    cache = get_default_cache()
    hit = cache.get(key)
    if hit is not None:
        return hit, digest
    img = read_label_image(path)
    grid = decode_label_image(img, palette, geometry.with_size(img.width, img.height), snap=snap)
    stripped = strip_classes(grid, DYNAMIC_CLASSES)
    cache.set(key, stripped)
    return stripped, digest


def _atomic_image(grid: CellGrid, palette: ClassPalette, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.stem}.", suffix=path.suffix, dir=path.parent)
    os.close(fd)
    try:
        write_label_image(encode_label_image(grid, palette), tmp)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def generate_one(cfg: RunConfig, scene: SceneSpec, palette: ClassPalette,
                 index: int, background: Path) -> ImageOutcome:
    """Generate, encode and write image ``index``; never raises a LaryngenError."""
    stem = f"{index:04d}"
    seed = derive_seed(cfg.master_seed, index)
    try:
        base, digest = load_background(background, palette, cfg.geometry, cfg.snap)
        plan = compile_plan(scene, base, seed)
        grid, instances = run_plan(base, plan, cfg.search)
    except (GeometryError, DecodeError) as exc:
        return ImageOutcome(index, str(background), ok=False, stage="background", message=str(exc))
    except CompileError as exc:
        return ImageOutcome(index, str(background), ok=False, stage="compile", message=str(exc))
    except GenerationFailure as exc:
        return ImageOutcome(index, str(background), ok=False, stage=f"generate_{exc.cls_name}",
                            message=str(exc), stages=dict(exc.stages))

    image = f"labels/{stem}.png"
    _atomic_image(grid, palette, cfg.output_dir / image)
    record = emit_metadata(
        instances, plan, index=index, image=image, background=background,
        background_sha256=digest, scene=scene, master_seed=cfg.master_seed,
        geometry=grid.geometry, search=cfg.search, palette=palette, snap=cfg.snap,
    )
    write_metadata(record, cfg.output_dir / "meta" / f"{stem}.json")
    histogram = {sem.slug: n for sem, n in class_histogram(grid).items() if sem in DYNAMIC_CLASSES}
    return ImageOutcome(index, str(background), image=image, histogram=histogram)


def _generate_star(args: Tuple[RunConfig, SceneSpec, ClassPalette, int, Path]) -> ImageOutcome:
    return generate_one(*args)


def run_batch(cfg: RunConfig) -> BatchSummary:
    """
    Generate ``cfg.count`` images.

    Failed images are logged and skipped; the summary counts them per stage.

    Returns:
        BatchSummary: Per-image outcomes in index order

    Raises:
        LaryngenError: On fatal configuration problems (unreadable input,
            palette or scene); these exit with status 1
    """
    scene = cfg.load_scene()
    palette = load_palette(cfg.palette_path)
    backgrounds = list_backgrounds(cfg.input_dir)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    logger.info("generating %d image(s) from %d background(s) into %s",
                cfg.count, len(backgrounds), cfg.output_dir)

    jobs = [(cfg, scene, palette, i, backgrounds[i % len(backgrounds)]) for i in range(cfg.count)]
    summary = BatchSummary(cfg.count)
    progress = dict(total=cfg.count, disable=cfg.quiet, unit="img", desc="generate")
    if cfg.jobs > 1 and cfg.count > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results: Iterable[ImageOutcome] = tqdm(pool.map(_generate_star, jobs), **progress)
            summary.outcomes.extend(results)
    else:
        summary.outcomes.extend(tqdm(map(_generate_star, jobs), **progress))

    for outcome in summary.failed:
        logger.warning("skipped image %d (%s): %s", outcome.index, outcome.stage, outcome.message)
    (cfg.output_dir / "summary.md").write_text(
        render_summary(summary, cfg, format_scene_spec(scene)), encoding="utf-8"
    )
    logger.info("%d generated, %d skipped", len(summary.succeeded), len(summary.failed))
    return summary


def strip_directory(input_dir: Union[str, Path], output_dir: Union[str, Path],
                    palette: Optional[ClassPalette] = None, geometry: Optional[GridGeometry] = None,
                    snap: Optional[int] = None) -> Dict[str, str]:
    """
    Remove pathology, intubation and tools from every background.

    Args:
        input_dir: Directory of label maps
        output_dir: Where stripped ``.png`` files are written, same stems
        palette: Palette, defaults to the configured one
        geometry: Block partitioning (sizes follow each image)
        snap: Color snapping tolerance

    Returns:
        dict: Input name -> ``"ok"`` or the error message for unreadable files
    """
    palette = palette or load_palette()
    geometry = geometry or GridGeometry()
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results: Dict[str, str] = {}
    for path in list_backgrounds(input_dir):
        try:
            img = read_label_image(path)
            grid = decode_label_image(img, palette, geometry.with_size(img.width, img.height), snap=snap)
        except LaryngenError as exc:
            logger.warning("cannot strip %s: %s", path.name, error_payload(exc)["error"]["message"])
            results[path.name] = str(exc)
            continue
        _atomic_image(strip_classes(grid, DYNAMIC_CLASSES), palette, out / f"{path.stem}.png")
        results[path.name] = "ok"
    return results
