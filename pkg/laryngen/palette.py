# laryngen/palette.py
"""
Label image codec and class palette.

Label maps are 24-bit RGB images whose colors name classes. Decoding is an
exact color match against the active ClassPalette (optionally snapping
colors within an L-infinity distance), encoding is a table lookup, so the two
are inverse on palette-conformant data. Files are read and written with
Pillow: portable pixmap (.ppm) and PNG.
"""

import hashlib
import os
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
from PIL import Image

from .exceptions import ContractError, DecodeError, GeometryError, PaletteError
from .grid import (
    DYNAMIC_CLASSES,
    CellGrid,
    GridGeometry,
    SemClass,
    block_counts,
)

RGB = Tuple[int, int, int]

PALETTE_ENV = "LARYNGEN_PALETTE"

DEFAULT_COLORS: Dict[SemClass, RGB] = {
    SemClass.VOID: (128, 128, 128),
    SemClass.VOCAL_FOLDS: (128, 255, 128),
    SemClass.OTHER_TISSUE: (0, 128, 0),
    SemClass.GLOTTAL_SPACE: (0, 0, 255),
    SemClass.PATHOLOGY: (128, 0, 255),
    SemClass.SURGICAL_TOOL: (255, 0, 0),
    SemClass.INTUBATION: (255, 255, 0),
}


def _pack(rgb: np.ndarray) -> np.ndarray:
    rgb = rgb.astype(np.uint32)
    return (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]


@dataclass(frozen=True)
class ClassPalette:
    """
    Bijection between the seven classes and RGB colors.

    Raises:
        PaletteError: If a class is missing, a component is out of range,
            or two classes share a color
    """

    colors: Mapping[SemClass, RGB]

    def __post_init__(self):
        missing = [c.slug for c in SemClass if c not in self.colors]
        if missing:
            raise PaletteError(f"palette has no color for: {', '.join(missing)}", missing=missing)
        seen: Dict[RGB, SemClass] = {}
        for sem in SemClass:
            rgb = tuple(int(v) for v in self.colors[sem])
            if len(rgb) != 3 or any(not 0 <= v <= 255 for v in rgb):
                raise PaletteError(f"{sem.slug}: color must be three values in 0..255", cls=sem.slug)
            if rgb in seen:
                raise PaletteError(
                    f"{sem.slug} and {seen[rgb].slug} share color {rgb}",
                    classes=[seen[rgb].slug, sem.slug],
                )
            seen[rgb] = sem
        object.__setattr__(self, "colors", {sem: tuple(int(v) for v in self.colors[sem]) for sem in SemClass})

    def __getitem__(self, sem: SemClass) -> RGB:
        return self.colors[sem]

    def lookup_table(self) -> np.ndarray:
        """(7, 3) uint8 array indexed by class value."""
        return np.array([self.colors[sem] for sem in SemClass], dtype=np.uint8)

    def to_text(self) -> str:
        lines = [f"{sem.slug} = {r},{g},{b}" for sem, (r, g, b) in self.colors.items()]
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


DEFAULT_PALETTE = ClassPalette(DEFAULT_COLORS)


def parse_palette(text: str, source: str = "<palette>") -> ClassPalette:
    """
    Parse ``class = R,G,B`` lines; ``#`` starts a comment.

    Raises:
        PaletteError: On malformed lines, unknown or repeated classes
    """
    colors: Dict[SemClass, RGB] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise PaletteError(f"{source}:{lineno}: expected 'class = R,G,B'", line=lineno)
        try:
            sem = SemClass.from_slug(key)
        except KeyError:
            raise PaletteError(f"{source}:{lineno}: unknown class '{key.strip()}'", line=lineno) from None
        if sem in colors:
            raise PaletteError(f"{source}:{lineno}: {sem.slug} assigned twice", line=lineno)
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 3 or not all(p.isdigit() for p in parts):
            raise PaletteError(f"{source}:{lineno}: color must be R,G,B integers", line=lineno)
        colors[sem] = (int(parts[0]), int(parts[1]), int(parts[2]))
    return ClassPalette(colors)


def default_palette_path() -> Path:
    return Path(str(resources.files("laryngen") / "palettes" / "default.palette"))


def resolve_palette_path(path: Optional[Union[str, Path]] = None) -> Path:
    """Explicit path, else $LARYNGEN_PALETTE, else the shipped default."""
    if path:
        return Path(path)
    env = os.getenv(PALETTE_ENV)
    if env:
        return Path(env)
    return default_palette_path()


def load_palette(path: Optional[Union[str, Path]] = None) -> ClassPalette:
    """
    Load the palette config file.

    Args:
        path: Palette file; falls back to $LARYNGEN_PALETTE and the shipped default

    Raises:
        PaletteError: If the file cannot be read or is invalid
    """
    resolved = resolve_palette_path(path)
    try:
        text = resolved.read_text(encoding="utf-8")
    except OSError as exc:
        raise PaletteError(f"cannot read palette {resolved}: {exc.strerror}", path=str(resolved)) from None
    return parse_palette(text, source=str(resolved))


@dataclass(eq=False)
class LabelImage:
    """RGB label image as an (height, width, 3) uint8 array."""

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise GeometryError(f"label image must be HxWx3, got {pixels.shape}")
        self.pixels = pixels

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


def read_label_image(path: Union[str, Path]) -> LabelImage:
    """
    Read a lossless label image file.

    Raises:
        GeometryError: If the file cannot be read as an image
    """
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode != "RGB":
                im = im.convert("RGB")
            return LabelImage(np.asarray(im, dtype=np.uint8).copy())
    except (OSError, ValueError) as exc:
        raise GeometryError(f"cannot read label image {path}: {exc}", path=str(path)) from None


def write_label_image(img: LabelImage, path: Union[str, Path]) -> None:
    """Write ``img`` as PNG or PPM depending on the suffix."""
    path = Path(path)
    im = Image.fromarray(np.ascontiguousarray(img.pixels))
    if path.suffix.lower() == ".ppm":
        im.save(path, format="PPM")
    else:
        im.save(path, format="PNG", compress_level=6)


def decode_label_image(img: LabelImage, p: ClassPalette,
                       geometry: Optional[GridGeometry] = None,
                       snap: Optional[int] = None) -> CellGrid:
    """
    Map every pixel of ``img`` to its class.

    Args:
        img: Label image
        p: Active palette
        geometry: Partitioning; defaults to the standard block/sub-block sizes
            over the image's own dimensions
        snap: Optional L-infinity tolerance for colors absent from the palette

    Returns:
        CellGrid: Decoded grid

    Raises:
        GeometryError: If the dimensions do not fit the geometry
        DecodeError: At the first (row-major) pixel whose color is unknown
    """
    if geometry is None:
        geometry = GridGeometry().with_size(img.width, img.height)
    elif (geometry.width, geometry.height) != (img.width, img.height):
        raise GeometryError(
            f"image is {img.height}x{img.width}, geometry expects {geometry.height}x{geometry.width}"
        )

    table = p.lookup_table()
    keys = _pack(table)
    order = np.argsort(keys)
    sorted_keys = keys[order]

    packed = _pack(img.pixels)
    idx = np.clip(np.searchsorted(sorted_keys, packed), 0, len(sorted_keys) - 1)
    known = sorted_keys[idx] == packed
    classes = order[idx].astype(np.uint8)

    if not known.all():
        if snap is None:
            x, y = (int(v) for v in np.argwhere(~known)[0])
            raise DecodeError(x, y, tuple(img.pixels[x, y]))
        unknown = np.argwhere(~known)
        colors = img.pixels[~known].astype(np.int16)
        dist = np.abs(colors[:, None, :] - table[None, :, :].astype(np.int16)).max(axis=2)
        nearest = dist.argmin(axis=1)
        too_far = dist[np.arange(len(nearest)), nearest] > snap
        if too_far.any():
            x, y = (int(v) for v in unknown[np.argmax(too_far)])
            raise DecodeError(x, y, tuple(img.pixels[x, y]), snap=snap)
        classes[~known] = nearest.astype(np.uint8)

    return CellGrid(geometry, classes)


def encode_label_image(grid: CellGrid, p: ClassPalette) -> LabelImage:
    """Pixel (x, y) takes the palette color of grid(x, y)."""
    return LabelImage(p.lookup_table()[grid.cells])


@dataclass(frozen=True)
class ReplacementRule:
    """
    Class that replaces each stripped dynamic class.

    ``surgical_tool`` set to None means: the majority of vocal folds and
    glottal space in the cell's block, searching outward ring by ring when
    the block holds neither.
    """

    pathology: SemClass = SemClass.VOCAL_FOLDS
    intubation: SemClass = SemClass.GLOTTAL_SPACE
    surgical_tool: Optional[SemClass] = None


def _majority_background(grid: CellGrid) -> np.ndarray:
    """Per-block choice between vocal folds and glottal space (ties: vocal folds)."""
    folds = block_counts(grid, SemClass.VOCAL_FOLDS)
    glottis = block_counts(grid, SemClass.GLOTTAL_SPACE)
    rows, cols = folds.shape
    choice = np.full(folds.shape, int(SemClass.VOCAL_FOLDS), dtype=np.uint8)
    for r in range(rows):
        for c in range(cols):
            for ring in range(max(rows, cols)):
                r0, r1 = max(r - ring, 0), min(r + ring, rows - 1) + 1
                c0, c1 = max(c - ring, 0), min(c + ring, cols - 1) + 1
                f = int(folds[r0:r1, c0:c1].sum())
                gl = int(glottis[r0:r1, c0:c1].sum())
                if f or gl:
                    if gl > f:
                        choice[r, c] = int(SemClass.GLOTTAL_SPACE)
                    break
    return choice


def strip_classes(grid: CellGrid, victims: Iterable[SemClass],
                  rule: Optional[ReplacementRule] = None) -> CellGrid:
    """
    Replace dynamic-class cells with background classes.

    Args:
        grid: Source grid
        victims: Classes to remove, a subset of pathology, intubation and surgical tool
        rule: Replacement rule, defaults to ReplacementRule()

    Returns:
        CellGrid: Grid without victim cells; every other cell unchanged

    Raises:
        ContractError: If a victim is a background class
    """
    victims = frozenset(victims)
    stray = victims - DYNAMIC_CLASSES
    if stray:
        raise ContractError(
            "only pathology, intubation and surgical_tool can be stripped",
            classes=sorted(c.slug for c in stray),
        )
    rule = rule or ReplacementRule()
    cells = grid.cells.copy()
    if SemClass.PATHOLOGY in victims:
        cells[cells == SemClass.PATHOLOGY] = int(rule.pathology)
    if SemClass.INTUBATION in victims:
        cells[cells == SemClass.INTUBATION] = int(rule.intubation)
    if SemClass.SURGICAL_TOOL in victims:
        tool = cells == SemClass.SURGICAL_TOOL
        if tool.any():
            if rule.surgical_tool is not None:
                cells[tool] = int(rule.surgical_tool)
            else:
                g = grid.geometry
                choice = _majority_background(CellGrid(g, cells))
                per_cell = np.repeat(np.repeat(choice, g.block_dim, axis=0), g.block_dim, axis=1)
                cells[tool] = per_cell[tool]
    return CellGrid(grid.geometry, cells)


def class_histogram(grid: CellGrid) -> Counter:
    """
    Cell count per class present in the grid.

    Returns:
        Counter: SemClass -> count; absent classes read as 0
    """
    counts = np.bincount(grid.cells.ravel(), minlength=len(SemClass))
    return Counter({SemClass(i): int(n) for i, n in enumerate(counts) if n})


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
