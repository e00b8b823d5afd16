# laryngen/verify.py
"""
Post-hoc verification of generated samples.

The verifier reads a label image and its metadata record, rebuilds the
stripped background, replays every recorded object on top of it and checks
the hard constraints and soft costs from those artifacts alone. It shares
the grid and palette modules with the generator but none of the search,
fill or rasterization code: those are implemented again here so the two
can catch each other's mistakes.
"""

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple, Union

import numpy as np
from scipy.ndimage import maximum_filter
from skimage.draw import line as draw_line

from .exceptions import DecodeError, GeometryError, LaryngenError, VerificationError
from .grid import (
    DYNAMIC_CLASSES,
    BlockRef,
    Cell,
    CellGrid,
    GridGeometry,
    SemClass,
    SubBlockRef,
    block_slices,
    cell_to_refs,
    subblock_position,
    subblock_slices,
)
from .palette import ClassPalette, decode_label_image, file_digest, load_palette, read_label_image, strip_classes

CHECKS = (
    "placement_safety",
    "containment",
    "pivot_geometry",
    "connectivity",
    "contour_closure",
    "group_presence",
    "soft_cost",
    "fill_consistency",
)

_DIRECTIONS = {0: (0, 1), 1: (-1, 1), 2: (-1, 0), 3: (-1, -1), 4: (0, -1), 5: (1, -1), 6: (1, 0), 7: (1, 1)}
_LINES = ("row", "sec_diag", "col", "main_diag", "row", "sec_diag", "col", "main_diag")
_TOOL_BACKGROUND = (SemClass.VOCAL_FOLDS, SemClass.GLOTTAL_SPACE)


@dataclass
class VerificationReport:
    """
    Outcome of verifying one sample.

    Attributes:
        checks: Pass/fail per constraint, keys from CHECKS
        recomputed_costs: Soft cost of each object recomputed from its selection
        recorded_costs: Soft cost of each object as stored in the metadata
        diff_cells: Cells where the replay differs from the image
        problems: Human-readable reasons for every failed check
    """

    checks: Dict[str, bool] = field(default_factory=lambda: {name: True for name in CHECKS})
    recomputed_costs: List[int] = field(default_factory=list)
    recorded_costs: List[int] = field(default_factory=list)
    diff_cells: int = 0
    problems: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def fail(self, check: str, message: str) -> None:
        self.checks[check] = False
        self.problems.append(f"{check}: {message}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "checks": dict(self.checks),
            "recomputed_costs": list(self.recomputed_costs),
            "recorded_costs": list(self.recorded_costs),
            "diff_cells": self.diff_cells,
            "problems": list(self.problems),
        }


# ---------------------------
# INDEPENDENT PRIMITIVES
# ---------------------------
def _flood(allowed: np.ndarray, start: Cell) -> np.ndarray:
    """4-connected flood over ``allowed`` from ``start``."""
    seen = np.zeros_like(allowed, dtype=bool)
    if not allowed[start]:
        return seen
    h, w = allowed.shape
    seen[start] = True
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for nx, ny in ((x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)):
            if 0 <= nx < h and 0 <= ny < w and allowed[nx, ny] and not seen[nx, ny]:
                seen[nx, ny] = True
                queue.append((nx, ny))
    return seen


def _touches(a: Cell, b: Cell, neighborhood: int) -> bool:
    dr, dc = abs(a[0] - b[0]), abs(a[1] - b[1])
    if neighborhood == 4:
        return dr + dc == 1
    return max(dr, dc) == 1


def _connected(positions: Set[Cell], neighborhood: int) -> bool:
    if not positions:
        return False
    start = next(iter(positions))
    seen = {start}
    queue = deque([start])
    while queue:
        v = queue.popleft()
        for w in positions:
            if w not in seen and _touches(v, w, neighborhood):
                seen.add(w)
                queue.append(w)
    return seen == positions


def _soft_cost(positions: Iterable[Cell], neighborhood: int, column_penalty: bool) -> int:
    items = sorted(positions)
    cost = 0
    for i, a in enumerate(items):
        for b in items[i + 1:]:
            if _touches(a, b, neighborhood):
                continue
            if a[0] == b[0]:
                cost += 1
            if column_penalty and a[1] == b[1]:
                cost += 1
    return cost


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


# ---------------------------
# LOADING
# ---------------------------
def _load_meta(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        meta = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VerificationError(f"cannot read metadata {path}: {exc}") from None
    if not isinstance(meta, dict) or meta.get("schema") != "laryngen.sample/1":
        raise VerificationError(f"{path} is not a laryngen sample record")
    return meta


def _decode(path: Path, palette: ClassPalette, geometry: GridGeometry,
            snap: Optional[int] = None) -> CellGrid:
    try:
        return decode_label_image(read_label_image(path), palette, geometry, snap=snap)
    except (GeometryError, DecodeError) as exc:
        raise VerificationError(f"cannot decode {path}: {exc}") from None


# ---------------------------
# REPLAY
# ---------------------------
def _replay_contour(obj: Dict[str, Any], cells: np.ndarray, g: GridGeometry,
                    column_penalty: bool, report: VerificationReport) -> None:
    cls = SemClass.from_slug(obj["class"])
    placement = SemClass.from_slug(obj["placement"])
    params = obj["parameters"]
    semi = obj["shape"] == "semi"
    center = (int(obj["center"][0]), int(obj["center"][1]))
    label = obj.get("task", cls.slug)

    pivots = [(int(p["idfp"]), (int(p["x"]), int(p["y"])), p["line"]) for p in obj["pivots"]]
    n = int(params["pivot_count"])
    expected = n // 2 + 1 if semi else n
    if [p[0] for p in pivots] != list(range(expected)):
        report.fail("pivot_geometry", f"{label}: expected pivots 0..{expected - 1}")
    if len({p[1] for p in pivots}) != len(pivots):
        report.fail("pivot_geometry", f"{label}: pivots are not distinct")
    for idfp, (x, y), kind in pivots:
        dist = max(abs(x - center[0]), abs(y - center[1]))
        if not params["min_pivot_dist"] <= dist <= params["max_pivot_dist"]:
            report.fail("pivot_geometry", f"{label}: pivot {idfp} at distance {dist}")
        if not (0 <= x < g.height and 0 <= y < g.width) or cells[x, y] != placement:
            report.fail("placement_safety", f"{label}: pivot {idfp} is not on {placement.slug}")
        if n == 8 and 0 <= idfp < 8:
            dx, dy = x - center[0], y - center[1]
            straight = dx == 0 or dy == 0 or abs(dx) == abs(dy)
            if not straight or (_sign(dx), _sign(dy)) != _DIRECTIONS[idfp] or kind != _LINES[idfp]:
                report.fail("pivot_geometry", f"{label}: pivot {idfp} is off its half-line")

    selected = [SubBlockRef(int(i), int(j)) for i, j in obj["selected_subblocks"]]
    positions = {subblock_position(g, s) for s in selected}
    if not _connected(positions, g.neighborhood):
        report.fail("connectivity", f"{label}: selection is not connected")
    for idfp, (x, y), _ in pivots:
        if 0 <= x < g.height and 0 <= y < g.width and cell_to_refs(g, x, y)[1] not in selected:
            report.fail("connectivity", f"{label}: pivot {idfp} sub-block not selected")
    if cls is SemClass.PATHOLOGY and any(s.idb != obj["chosen_block"] for s in selected):
        report.fail("containment", f"{label}: selection leaves block {obj['chosen_block']}")

    cost = _soft_cost(positions, g.neighborhood, column_penalty)
    report.recomputed_costs.append(cost)
    report.recorded_costs.append(int(obj["soft_cost"]))
    if cost != obj["soft_cost"]:
        report.fail("soft_cost", f"{label}: recorded {obj['soft_cost']}, recomputed {cost}")

    contour = np.zeros(cells.shape, dtype=bool)
    for s in selected:
        contour[subblock_slices(g, s)] = True
    if not contour.any():
        report.fail("contour_closure", f"{label}: empty selection")
        return
    rows, cols = np.nonzero(contour)
    x0, x1, y0, y1 = rows.min(), rows.max(), cols.min(), cols.max()
    if semi:
        x1 = center[0]
    if not (x0 <= center[0] <= x1 and y0 <= center[1] <= y1):
        report.fail("contour_closure", f"{label}: centre outside the contour window")
        return
    window = (slice(x0, x1 + 1), slice(y0, y1 + 1))
    local = (center[0] - x0, center[1] - y0)
    outside = _flood(~contour[window], local)
    edges = [outside[0, :], outside[:, 0], outside[:, -1]] + ([] if semi else [outside[-1, :]])
    if any(edge.any() for edge in edges) or not outside.any():
        report.fail("contour_closure", f"{label}: contour does not enclose the centre")
        return

    place = cells == placement
    recolor = contour & place
    recolor[window] |= _flood(place[window] & ~contour[window], local)
    if semi:
        recolor[center[0] + 1:, y0:y1 + 1] |= place[center[0] + 1:, y0:y1 + 1]
    cells[recolor] = int(cls)


def _replay_rod(obj: Dict[str, Any], cells: np.ndarray, g: GridGeometry,
                report: VerificationReport) -> None:
    params = obj["parameters"]
    label = obj.get("task", obj["class"])
    seg = obj["segment"]
    entry, tip, w = tuple(seg["entry"]), tuple(seg["tip"]), int(seg["half_width"])
    on_border = entry[0] in (0, g.height - 1) or entry[1] in (0, g.width - 1)
    if not on_border or cells[entry] not in _TOOL_BACKGROUND:
        report.fail("placement_safety", f"{label}: entry {entry} is not an eligible border cell")
    if cells[tip] != SemClass.from_slug(obj["placement"]):
        report.fail("placement_safety", f"{label}: tip {tip} is not on {obj['placement']}")
    length = float(np.hypot(tip[0] - entry[0], tip[1] - entry[1]))
    if not params["min_length"] <= length <= params["max_length"]:
        report.fail("pivot_geometry", f"{label}: segment length {length:.1f} out of range")
    rod = np.zeros(cells.shape, dtype=np.uint8)
    rr, cc = draw_line(entry[0], entry[1], tip[0], tip[1])
    rod[rr, cc] = 1
    rod = maximum_filter(rod, size=2 * w + 1, mode="constant", cval=0).astype(bool)
    eligible = np.isin(cells, [int(c) for c in _TOOL_BACKGROUND])
    cells[rod & eligible] = int(SemClass.SURGICAL_TOOL)


def verify_output(image_path: Union[str, Path], meta_path: Union[str, Path],
                  palette: Optional[ClassPalette] = None,
                  background: Optional[Union[str, Path]] = None) -> VerificationReport:
    """
    Verify one (label image, metadata) pair.

    Args:
        image_path: Generated label image
        meta_path: Its metadata record
        palette: Palette the image is encoded with; defaults to the configured one
        background: Background image, overriding the path stored in the record

    Returns:
        VerificationReport: ``passed`` is True iff every check holds

    Raises:
        VerificationError: If the artifacts are unreadable, corrupt or do not
            belong together (as opposed to breaking a constraint)
    """
    meta = _load_meta(meta_path)
    try:
        g = GridGeometry(**meta["geometry"])
        palette = palette or load_palette()
        if palette.digest != meta["palette_sha256"]:
            raise VerificationError("palette differs from the one the sample was encoded with")
        bg_path = Path(background if background is not None else meta["background"]["path"])
        if not bg_path.is_file():
            raise VerificationError(f"background {bg_path} not found")
        if file_digest(bg_path) != meta["background"]["sha256"]:
            raise VerificationError(f"background {bg_path} does not match the recorded digest")
        image = _decode(Path(image_path), palette, g)
        base = strip_classes(_decode(bg_path, palette, g, meta["background"].get("snap")), DYNAMIC_CLASSES)
        objects = meta["objects"]
        column_penalty = bool(meta["search"]["column_penalty"])
        declared = {SemClass.from_slug(c) for c in meta["scene"]["classes"]}
    except VerificationError:
        raise
    except (KeyError, TypeError, ValueError, LaryngenError) as exc:
        raise VerificationError(f"malformed metadata {meta_path}: {exc}") from None

    report = VerificationReport()
    cells = base.cells.copy()
    try:
        for obj in objects:
            if obj["shape"] == "rod":
                _replay_rod(obj, cells, g, report)
            else:
                _replay_contour(obj, cells, g, column_penalty, report)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise VerificationError(f"malformed object entry in {meta_path}: {exc}") from None

    report.diff_cells = int((cells != image.cells).sum())
    if report.diff_cells:
        report.fail("fill_consistency", f"{report.diff_cells} cell(s) differ from the replay")

    changed = image.cells != base.cells
    allowed: Dict[int, Set[int]] = {int(SemClass.SURGICAL_TOOL): {int(c) for c in _TOOL_BACKGROUND}}
    for obj in objects:
        if obj["shape"] != "rod":
            allowed.setdefault(int(SemClass.from_slug(obj["class"])), set()).add(
                int(SemClass.from_slug(obj["placement"]))
            )
    for value in np.unique(image.cells[changed]):
        value = int(value)
        here = changed & (image.cells == value)
        if value not in allowed or not any(o["class"] == SemClass(value).slug for o in objects):
            report.fail("placement_safety", f"{int(here.sum())} cell(s) changed to {SemClass(value).slug}")
            continue
        bad = here & ~np.isin(base.cells, sorted(allowed[value]))
        if bad.any():
            report.fail("placement_safety",
                        f"{int(bad.sum())} {SemClass(value).slug} cell(s) over a forbidden class")

    tumor = image.cells == SemClass.PATHOLOGY
    for obj in objects:
        if obj["class"] == SemClass.PATHOLOGY.slug:
            inside = np.zeros_like(tumor)
            inside[block_slices(g, BlockRef(int(obj["chosen_block"])))] = True
            if (tumor & ~inside).any():
                report.fail("containment", f"pathology leaves block {obj['chosen_block']}")

    present = {SemClass(int(v)) for v in np.unique(image.cells)} & DYNAMIC_CLASSES
    if present != declared:
        report.fail(
            "group_presence",
            f"image has {sorted(c.slug for c in present)}, scene asks for {sorted(c.slug for c in declared)}",
        )
    return report


def verified_pairs(output_dir: Union[str, Path]) -> List[Tuple[Path, Path]]:
    """(label image, metadata) pairs of a generated tree, by matching stem."""
    root = Path(output_dir)
    pairs = []
    for meta in sorted((root / "meta").glob("*.json")):
        image = root / "labels" / f"{meta.stem}.png"
        pairs.append((image, meta))
    return pairs
