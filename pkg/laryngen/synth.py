# laryngen/synth.py
"""
Object generators.

Each generator guesses a placement, checks it against the background and
either returns the new grid or retries with a fresh sub-seed. A pathology
or an intubation is a centre, a ring of contour pivots, a connected path of
sub-blocks through them and the area that path encloses; a surgical tool is
a thick segment entering from the image border.
"""

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Set, Tuple

import numpy as np
from scipy import ndimage
from skimage.draw import line as draw_line

from .exceptions import GenerationFailure, InfeasibleError, OpenContourError
from .grid import (
    BlockRef,
    Cell,
    CellGrid,
    SemClass,
    block_slices,
    cell_to_refs,
    eligible_blocks,
    subblock_slices,
)
from .log import logger
from .plan import TOOL_BACKGROUND, GenerationPlan, border_mask
from .scene import ObjectSpec
from .search import ContourPivot, LineKind, PathSelection, SearchOptions, connect_pivots

SHAPE_CLOSED = "closed"
SHAPE_SEMI = "semi"
SHAPE_ROD = "rod"

# (row, col) steps counterclockwise from east
_COMPASS: Tuple[Cell, ...] = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))
_COMPASS_KIND: Tuple[LineKind, ...] = (
    LineKind.ROW, LineKind.SEC_DIAG, LineKind.COL, LineKind.MAIN_DIAG,
    LineKind.ROW, LineKind.SEC_DIAG, LineKind.COL, LineKind.MAIN_DIAG,
)


@dataclass(frozen=True)
class ToolSegment:
    entry: Cell
    tip: Cell
    half_width: int


@dataclass(frozen=True)
class ObjectInstance:
    """
    One generated object and everything needed to replay it.

    Attributes:
        cls: Generated class
        placement_cls: Class the object was allowed to overwrite
        chosen_block: Block of the centre (pathology: the block it is confined to)
        center: Centre cell (tools: the tip)
        pivots: Contour pivots in idfp order, empty for tools
        selection: Contour sub-blocks, empty for tools
        filled: Boolean mask of recolored cells
        spec: Parameters the object was generated with
        seed: Sub-seed of the successful attempt
        attempt: 0-based index of the successful attempt
        shape: ``closed``, ``semi`` or ``rod``
        segment: Tool geometry, tools only
    """

    cls: SemClass
    placement_cls: SemClass
    chosen_block: BlockRef
    center: Cell
    pivots: Tuple[ContourPivot, ...]
    selection: PathSelection
    filled: Optional[np.ndarray] = field(repr=False, compare=False)
    spec: ObjectSpec
    seed: int = 0
    attempt: int = 0
    shape: str = SHAPE_CLOSED
    segment: Optional[ToolSegment] = None

    @property
    def filled_cells(self) -> Set[Cell]:
        if self.filled is None:
            return set()
        return {(int(x), int(y)) for x, y in np.argwhere(self.filled)}


# ---------------------------
# GUESSES
# ---------------------------
def choose_block(grid: CellGrid, placement_cls: SemClass, min_fraction: float,
                 rng: np.random.Generator) -> BlockRef:
    """
    Uniformly random eligible block.

    Raises:
        InfeasibleError: If no block is eligible
    """
    blocks = eligible_blocks(grid, placement_cls, min_fraction)
    if not blocks:
        raise InfeasibleError(f"no block is {min_fraction:.0%} {placement_cls.slug}", stage="choose_block")
    return blocks[int(rng.integers(len(blocks)))]


def choose_center(grid: CellGrid, block: BlockRef, margin: int, placement_cls: SemClass,
                  rng: np.random.Generator) -> Cell:
    """
    Uniformly random centre whose ``margin`` neighbourhood is inside the
    block and made only of ``placement_cls`` cells.

    Raises:
        InfeasibleError: If no cell qualifies
    """
    xs, ys = block_slices(grid.geometry, block)
    inside = grid.mask(placement_cls)[xs, ys]
    if margin > 0:
        inside = ndimage.minimum_filter(inside.astype(np.uint8), size=2 * margin + 1,
                                        mode="constant", cval=0).astype(bool)
    candidates = np.argwhere(inside)
    if not len(candidates):
        raise InfeasibleError(f"no centre with margin {margin} in block {block.idb}", stage="choose_center")
    r, c = candidates[int(rng.integers(len(candidates)))]
    return xs.start + int(r), ys.start + int(c)


def half_lines(pivot_count: int, upper_only: bool = False) -> List[Tuple[float, float, LineKind]]:
    """
    Unit steps of the pivot half-lines, counterclockwise from east.

    Steps are scaled so the larger component is 1, so ``d`` steps land at
    Chebyshev distance ``d``. ``upper_only`` keeps east through west.
    """
    count = pivot_count // 2 + 1 if upper_only else pivot_count
    out = []
    for k in range(count):
        if pivot_count == 8:
            dr, dc = _COMPASS[k]
            out.append((float(dr), float(dc), _COMPASS_KIND[k]))
            continue
        theta = 2 * math.pi * k / pivot_count
        dr, dc = -math.sin(theta), math.cos(theta)
        m = max(abs(dr), abs(dc))
        out.append((dr / m, dc / m, _COMPASS_KIND[int(round(k * 8 / pivot_count)) % 8]))
    return out


def _ray_cell(center: Cell, dr: float, dc: float, d: int) -> Cell:
    return center[0] + int(round(d * dr)), center[1] + int(round(d * dc))


def _free_run(allowed: np.ndarray, center: Cell, dr: float, dc: float, limit: int) -> int:
    h, w = allowed.shape
    run = 0
    for d in range(1, limit + 1):
        x, y = _ray_cell(center, dr, dc, d)
        if not (0 <= x < h and 0 <= y < w and allowed[x, y]):
            break
        run = d
    return run


def guess_contour_pivots(grid: CellGrid, block: Optional[BlockRef], center: Cell, spec: ObjectSpec,
                         rng: np.random.Generator, upper_only: bool = False) -> List[ContourPivot]:
    """
    One pivot per half-line around ``center``.

    Each distance is drawn uniformly from [min_pivot_dist, min(max_pivot_dist,
    free run)], the free run being how far the half-line stays on placement
    cells (and inside ``block`` when given).

    Distances that keep the pivot in the centre's sub-block, or that land on
    an earlier pivot, are skipped.

    Raises:
        InfeasibleError: If a half-line is too short
    """
    g = grid.geometry
    allowed = grid.mask(spec.placement_cls)
    if block is not None:
        scope = np.zeros_like(allowed)
        scope[block_slices(g, block)] = True
        allowed &= scope
    center_sub = cell_to_refs(g, *center)[1]
    pivots: List[ContourPivot] = []
    taken: Set[Cell] = set()
    for idfp, (dr, dc, kind) in enumerate(half_lines(spec.pivot_count, upper_only)):
        hi = min(spec.max_pivot_dist, _free_run(allowed, center, dr, dc, spec.max_pivot_dist))
        if hi < spec.min_pivot_dist:
            raise InfeasibleError(f"half-line {idfp} leaves the placement area after {hi} cells",
                                  stage="guess_pivots")
        cells = [_ray_cell(center, dr, dc, d) for d in range(spec.min_pivot_dist, hi + 1)]
        reach = [c for c in cells if cell_to_refs(g, *c)[1] != center_sub and c not in taken]
        if not reach:
            raise InfeasibleError(f"half-line {idfp} has no free cell outside the centre sub-block",
                                  stage="guess_pivots")
        position = reach[int(rng.integers(len(reach)))]
        taken.add(position)
        pivots.append(ContourPivot(idfp, position, kind))
    return pivots


# ---------------------------
# RASTERIZATION
# ---------------------------
def selection_mask(grid: CellGrid, selection: PathSelection) -> np.ndarray:
    mask = np.zeros(grid.cells.shape, dtype=bool)
    for ref in selection.chosen:
        mask[subblock_slices(grid.geometry, ref)] = True
    return mask


def fill_mask(grid: CellGrid, selection: PathSelection, center: Cell, placement_cls: SemClass,
              shape: str = SHAPE_CLOSED) -> np.ndarray:
    """
    Cells an object recolors: placement cells of the selected sub-blocks plus
    the placement cells enclosed by them.

    The contour must close: a 4-connected flood from the centre over
    non-selected cells may not reach the border of the selection's bounding
    window. For the semi shape the window ends at the centre row, only its
    top, left and right borders count, and the area under the centre row is
    then filled down to the image border across the selection's columns.

    Raises:
        OpenContourError: If the flood escapes
    """
    contour = selection_mask(grid, selection)
    if not contour.any():
        raise OpenContourError("empty selection")
    rows, cols = np.nonzero(contour)
    x0, x1, y0, y1 = int(rows.min()), int(rows.max()), int(cols.min()), int(cols.max())
    cx, cy = center
    semi = shape == SHAPE_SEMI
    if semi:
        x1 = cx
    if not (x0 <= cx <= x1 and y0 <= cy <= y1) or contour[cx, cy]:
        raise OpenContourError("centre is not inside the contour window")

    window = (slice(x0, x1 + 1), slice(y0, y1 + 1))
    labels, _ = ndimage.label(~contour[window])
    flood = labels == labels[cx - x0, cy - y0]
    escaped = flood[0, :].any() or flood[:, 0].any() or flood[:, -1].any()
    if not semi:
        escaped = escaped or flood[-1, :].any()
    if escaped:
        raise OpenContourError()

    placement = grid.mask(placement_cls)
    mask = contour & placement
    labels, _ = ndimage.label(placement[window] & ~contour[window])
    if labels[cx - x0, cy - y0]:
        mask[window] |= labels == labels[cx - x0, cy - y0]
    if semi:
        below = np.zeros_like(mask)
        below[cx + 1:, int(cols.min()):int(cols.max()) + 1] = True
        mask |= below & placement
    return mask


def rasterize_and_fill(grid: CellGrid, instance: ObjectInstance, cls: SemClass) -> CellGrid:
    """
    Recolor the contour and its interior to ``cls``.

    Raises:
        OpenContourError: If the contour does not enclose the centre
    """
    return grid.replace(
        fill_mask(grid, instance.selection, instance.center, instance.placement_cls, instance.shape), cls
    )


# ---------------------------
# GENERATORS
# ---------------------------
Attempt = Callable[[CellGrid, ObjectSpec, np.random.Generator, SearchOptions], ObjectInstance]


def _with_retries(grid: CellGrid, spec: ObjectSpec, rng: np.random.Generator,
                  options: Optional[SearchOptions], attempt_fn: Attempt) -> Tuple[CellGrid, ObjectInstance]:
    options = options or SearchOptions()
    failures: Counter = Counter()
    for attempt in range(options.retries):
        seed = int(rng.integers(2 ** 63))
        try:
            draft = attempt_fn(grid, spec, np.random.default_rng(seed), options)
            if draft.shape == SHAPE_ROD:
                out = grid.replace(draft.filled, spec.cls)
            else:
                out = rasterize_and_fill(grid, draft, spec.cls)
        except InfeasibleError as exc:
            failures[exc.stage] += 1
            logger.debug("%s attempt %d failed at %s: %s", spec.cls.slug, attempt, exc.stage, exc.detail)
            continue
        filled = out.cells != grid.cells
        return out, replace(draft, filled=filled, seed=seed, attempt=attempt)
    raise GenerationFailure(spec.cls.slug, options.retries, failures)


def _pathology_attempt(grid: CellGrid, spec: ObjectSpec, rng: np.random.Generator,
                       options: SearchOptions) -> ObjectInstance:
    block = choose_block(grid, spec.placement_cls, spec.min_fraction, rng)
    center = choose_center(grid, block, spec.center_margin, spec.placement_cls, rng)
    pivots = guess_contour_pivots(grid, block, center, spec, rng)
    selection = connect_pivots(grid, pivots, spec, rng, options, center=center, scope=block)
    return ObjectInstance(spec.cls, spec.placement_cls, block, center, tuple(pivots),
                          selection, None, spec, shape=SHAPE_CLOSED)


def generate_pathology(grid: CellGrid, spec: ObjectSpec, rng: np.random.Generator,
                       options: Optional[SearchOptions] = None) -> Tuple[CellGrid, ObjectInstance]:
    """
    Place one tumor inside a single eligible block.

    Args:
        grid: Current grid
        spec: Pathology parameters
        rng: Generator the per-attempt sub-seeds are drawn from
        options: Search options, ``retries`` bounds the attempts

    Returns:
        tuple: (new grid, ObjectInstance)

    Raises:
        GenerationFailure: If every attempt fails; carries per-stage counts
    """
    return _with_retries(grid, spec, rng, options, _pathology_attempt)


def _glottal_access(grid: CellGrid, cls: SemClass) -> np.ndarray:
    """Cells of ``cls`` whose column is ``cls`` all the way to the bottom border."""
    inside = grid.mask(cls)
    return np.flip(np.logical_and.accumulate(np.flip(inside, axis=0), axis=0), axis=0)


def _intubation_attempt(grid: CellGrid, spec: ObjectSpec, rng: np.random.Generator,
                        options: SearchOptions) -> ObjectInstance:
    access = _glottal_access(grid, spec.placement_cls)
    if not access[-1, :].any():
        raise InfeasibleError(f"{spec.placement_cls.slug} does not reach the bottom border",
                              stage="choose_center")
    band = np.zeros_like(access)
    band[max(grid.geometry.height - spec.band_rows, 0):, :] = True
    candidates = np.argwhere(access & band)
    x, y = candidates[int(rng.integers(len(candidates)))]
    center = (int(x), int(y))
    pivots = guess_contour_pivots(grid, None, center, spec, rng, upper_only=True)
    selection = connect_pivots(grid, pivots, spec, rng, options, center=center, closed=False)
    block = cell_to_refs(grid.geometry, *center)[0]
    return ObjectInstance(spec.cls, spec.placement_cls, block, center, tuple(pivots),
                          selection, None, spec, shape=SHAPE_SEMI)


def generate_intubation(grid: CellGrid, spec: ObjectSpec, rng: np.random.Generator,
                        options: Optional[SearchOptions] = None) -> Tuple[CellGrid, ObjectInstance]:
    """
    Place the intubation tube: an upper semi-oval in the glottal space,
    extended straight down to the bottom border.
    """
    return _with_retries(grid, spec, rng, options, _intubation_attempt)


def _tool_attempt(grid: CellGrid, spec: ObjectSpec, rng: np.random.Generator,
                  options: SearchOptions) -> ObjectInstance:
    eligible = grid.mask(*TOOL_BACKGROUND)
    entries = np.argwhere(eligible & border_mask(eligible.shape))
    if not len(entries):
        raise InfeasibleError("no eligible cell on the image border", stage="choose_entry")
    entry = entries[int(rng.integers(len(entries)))]
    tips = np.argwhere(grid.mask(spec.placement_cls))
    length = np.hypot(tips[:, 0] - entry[0], tips[:, 1] - entry[1])
    tips = tips[(length >= spec.min_length) & (length <= spec.max_length)]
    if not len(tips):
        raise InfeasibleError("no tip within the length range", stage="choose_tip")
    tip = tips[int(rng.integers(len(tips)))]

    rod = np.zeros(eligible.shape, dtype=bool)
    rr, cc = draw_line(int(entry[0]), int(entry[1]), int(tip[0]), int(tip[1]))
    rod[rr, cc] = True
    if spec.half_width > 0:
        # a square past 2*max(h, w) - 1 already covers the grid from any cell
        size = min(2 * spec.half_width + 1, 2 * max(rod.shape) - 1)
        rod = ndimage.binary_dilation(rod, structure=np.ones((size, 1), dtype=bool))
        rod = ndimage.binary_dilation(rod, structure=np.ones((1, size), dtype=bool))
    tip_cell = (int(tip[0]), int(tip[1]))
    return ObjectInstance(
        spec.cls, spec.placement_cls, cell_to_refs(grid.geometry, *tip_cell)[0], tip_cell, (),
        PathSelection(), rod & eligible, spec, shape=SHAPE_ROD,
        segment=ToolSegment((int(entry[0]), int(entry[1])), tip_cell, spec.half_width),
    )


def generate_tool(grid: CellGrid, spec: ObjectSpec, rng: np.random.Generator,
                  options: Optional[SearchOptions] = None) -> Tuple[CellGrid, ObjectInstance]:
    """
    Place one surgical tool as a rod from the border to a tip cell.

    Only vocal folds and glottal space are recolored, so pathology and
    intubation already in the grid are kept.
    """
    return _with_retries(grid, spec, rng, options, _tool_attempt)


GENERATORS: Dict[SemClass, Callable[..., Tuple[CellGrid, ObjectInstance]]] = {
    SemClass.PATHOLOGY: generate_pathology,
    SemClass.INTUBATION: generate_intubation,
    SemClass.SURGICAL_TOOL: generate_tool,
}


def run_plan(grid: CellGrid, plan: GenerationPlan,
             options: Optional[SearchOptions] = None) -> Tuple[CellGrid, List[ObjectInstance]]:
    """
    Run every task of a plan in order, each with a generator seeded by its
    own sub-seed.

    Raises:
        GenerationFailure: On the first task that exhausts its retries
    """
    instances = []
    for task in plan.tasks:
        generator = GENERATORS[task.spec.cls]
        grid, instance = generator(grid, task.spec, np.random.default_rng(task.seed), options)
        logger.debug("%s placed at %s after %d attempt(s)", task.label, instance.center, instance.attempt + 1)
        instances.append(instance)
    return grid, instances
