# laryngen/grid.py
"""
Grid data model for label maps.

A CellGrid is a dense matrix of semantic classes addressed as (x=row, y=col),
row 0 at the top. The grid is partitioned into square blocks and each block
into square sub-blocks; both are numbered row-major, so ids follow from
integer division alone.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import FrozenSet, Iterable, List, Tuple

import numpy as np

from .exceptions import BoundsError, ContractError, GeometryError

Cell = Tuple[int, int]


class SemClass(IntEnum):
    """The seven label classes; the value is the class index stored in grids."""

    VOID = 0
    VOCAL_FOLDS = 1
    OTHER_TISSUE = 2
    GLOTTAL_SPACE = 3
    PATHOLOGY = 4
    SURGICAL_TOOL = 5
    INTUBATION = 6

    @property
    def slug(self) -> str:
        """Lower-case name used in scene files, palettes and metadata."""
        return self.name.lower()

    @classmethod
    def from_slug(cls, name: str) -> "SemClass":
        """
        Look up a class by its slug.

        Raises:
            KeyError: If the name is not a class slug
        """
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise KeyError(name) from None


BACKGROUND_CLASSES: FrozenSet[SemClass] = frozenset(
    {SemClass.VOCAL_FOLDS, SemClass.OTHER_TISSUE, SemClass.GLOTTAL_SPACE}
)
DYNAMIC_CLASSES: FrozenSet[SemClass] = frozenset(
    {SemClass.PATHOLOGY, SemClass.INTUBATION, SemClass.SURGICAL_TOOL}
)


@dataclass(frozen=True)
class GridGeometry:
    """
    Grid dimensions and partitioning.

    Attributes:
        width: Columns of cells
        height: Rows of cells
        block_dim: Side of a block in cells
        sub_dim: Side of a sub-block in cells
        neighborhood: Sub-block adjacency, 8 (edge or corner) or 4 (edge only)
    """

    width: int = 512
    height: int = 512
    block_dim: int = 64
    sub_dim: int = 8
    neighborhood: int = 8

    def __post_init__(self):
        for name in ("width", "height", "block_dim", "sub_dim"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be positive", **{name: getattr(self, name)})
        if self.width % self.block_dim or self.height % self.block_dim:
            raise GeometryError(
                f"block_dim {self.block_dim} must divide {self.height}x{self.width}",
                width=self.width, height=self.height, block_dim=self.block_dim,
            )
        if self.block_dim % self.sub_dim:
            raise GeometryError(
                f"sub_dim {self.sub_dim} must divide block_dim {self.block_dim}",
                block_dim=self.block_dim, sub_dim=self.sub_dim,
            )
        if self.neighborhood not in (4, 8):
            raise GeometryError("neighborhood must be 4 or 8", neighborhood=self.neighborhood)

    @property
    def blocks_per_row(self) -> int:
        return self.width // self.block_dim

    @property
    def blocks_per_col(self) -> int:
        return self.height // self.block_dim

    @property
    def block_count(self) -> int:
        return self.blocks_per_row * self.blocks_per_col

    @property
    def subs_per_side(self) -> int:
        return self.block_dim // self.sub_dim

    @property
    def subs_per_block(self) -> int:
        return self.subs_per_side ** 2

    @property
    def sub_rows(self) -> int:
        """Number of sub-block rows across the whole grid."""
        return self.height // self.sub_dim

    @property
    def sub_cols(self) -> int:
        """Number of sub-block columns across the whole grid."""
        return self.width // self.sub_dim

    def with_size(self, width: int, height: int) -> "GridGeometry":
        """Same partitioning over a grid of another size."""
        return GridGeometry(width, height, self.block_dim, self.sub_dim, self.neighborhood)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "block_dim": self.block_dim,
            "sub_dim": self.sub_dim,
            "neighborhood": self.neighborhood,
        }


@dataclass(frozen=True, order=True)
class BlockRef:
    idb: int


@dataclass(frozen=True, order=True)
class SubBlockRef:
    idb: int
    idsb: int

    @property
    def block(self) -> BlockRef:
        return BlockRef(self.idb)


@dataclass(eq=False)
class CellGrid:
    """
    Immutable matrix of class indices.

    The array is copied on construction and made read-only; operations that
    change classes return a new CellGrid.
    """

    geometry: GridGeometry
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.uint8, copy=True)
        if cells.shape != (self.geometry.height, self.geometry.width):
            raise GeometryError(
                f"cell matrix {cells.shape} does not match geometry "
                f"{self.geometry.height}x{self.geometry.width}"
            )
        if cells.size and int(cells.max()) >= len(SemClass):
            raise ContractError("cell matrix holds an index that is not a class")
        cells.setflags(write=False)
        self.cells = cells

    @classmethod
    def filled(cls, geometry: GridGeometry, sem: SemClass) -> "CellGrid":
        return cls(geometry, np.full((geometry.height, geometry.width), int(sem), dtype=np.uint8))

    def __getitem__(self, xy: Cell) -> SemClass:
        x, y = xy
        check_cell(self.geometry, x, y)
        return SemClass(int(self.cells[x, y]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CellGrid):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self.cells, other.cells)

    def mask(self, *classes: SemClass) -> np.ndarray:
        """Boolean matrix of cells whose class is one of ``classes``."""
        return np.isin(self.cells, [int(c) for c in classes])

    def replace(self, where: np.ndarray, sem: SemClass) -> "CellGrid":
        """New grid with ``where`` cells set to ``sem``."""
        cells = self.cells.copy()
        cells[where] = int(sem)
        return CellGrid(self.geometry, cells)


def check_cell(g: GridGeometry, x: int, y: int) -> None:
    if not (0 <= x < g.height and 0 <= y < g.width):
        raise BoundsError(f"cell ({x}, {y}) outside {g.height}x{g.width} grid", x=x, y=y)


def check_subblock(g: GridGeometry, s: SubBlockRef) -> None:
    if not (0 <= s.idb < g.block_count and 0 <= s.idsb < g.subs_per_block):
        raise BoundsError(f"invalid sub-block reference ({s.idb}, {s.idsb})", idb=s.idb, idsb=s.idsb)


def check_block(g: GridGeometry, b: BlockRef) -> None:
    if not 0 <= b.idb < g.block_count:
        raise BoundsError(f"invalid block reference {b.idb}", idb=b.idb)


def cell_to_refs(g: GridGeometry, x: int, y: int) -> Tuple[BlockRef, SubBlockRef]:
    """
    Block and sub-block containing cell (x, y).

    Args:
        g: Grid geometry
        x: Row
        y: Column

    Returns:
        tuple: (BlockRef, SubBlockRef)

    Raises:
        BoundsError: If the cell is outside the grid

    Example:
        >>> cell_to_refs(GridGeometry(), 100, 200)
        (BlockRef(idb=11), SubBlockRef(idb=11, idsb=33))
    """
    check_cell(g, x, y)
    idb = (x // g.block_dim) * g.blocks_per_row + (y // g.block_dim)
    lx, ly = x % g.block_dim, y % g.block_dim
    idsb = (lx // g.sub_dim) * g.subs_per_side + (ly // g.sub_dim)
    return BlockRef(idb), SubBlockRef(idb, idsb)


def subblock_origin(g: GridGeometry, s: SubBlockRef) -> Cell:
    """Top-left cell of a sub-block."""
    check_subblock(g, s)
    x = (s.idb // g.blocks_per_row) * g.block_dim + (s.idsb // g.subs_per_side) * g.sub_dim
    y = (s.idb % g.blocks_per_row) * g.block_dim + (s.idsb % g.subs_per_side) * g.sub_dim
    return x, y


def block_origin(g: GridGeometry, b: BlockRef) -> Cell:
    """Top-left cell of a block."""
    check_block(g, b)
    return (b.idb // g.blocks_per_row) * g.block_dim, (b.idb % g.blocks_per_row) * g.block_dim


def block_slices(g: GridGeometry, b: BlockRef) -> Tuple[slice, slice]:
    x0, y0 = block_origin(g, b)
    return slice(x0, x0 + g.block_dim), slice(y0, y0 + g.block_dim)


def subblock_slices(g: GridGeometry, s: SubBlockRef) -> Tuple[slice, slice]:
    x0, y0 = subblock_origin(g, s)
    return slice(x0, x0 + g.sub_dim), slice(y0, y0 + g.sub_dim)


def subblock_cells(g: GridGeometry, s: SubBlockRef) -> List[Cell]:
    """
    All cells of a sub-block, row-major.

    Raises:
        BoundsError: If the reference is invalid
    """
    x0, y0 = subblock_origin(g, s)
    return [(x, y) for x in range(x0, x0 + g.sub_dim) for y in range(y0, y0 + g.sub_dim)]


def subblock_position(g: GridGeometry, s: SubBlockRef) -> Cell:
    """Global (sub-row, sub-col) of a sub-block."""
    x0, y0 = subblock_origin(g, s)
    return x0 // g.sub_dim, y0 // g.sub_dim


def subblock_at(g: GridGeometry, sr: int, sc: int) -> SubBlockRef:
    """Sub-block at global (sub-row, sub-col)."""
    if not (0 <= sr < g.sub_rows and 0 <= sc < g.sub_cols):
        raise BoundsError(f"sub-block position ({sr}, {sc}) outside grid", sr=sr, sc=sc)
    return cell_to_refs(g, sr * g.sub_dim, sc * g.sub_dim)[1]


def neighbor_offsets(neighborhood: int) -> Tuple[Cell, ...]:
    if neighborhood == 4:
        return ((-1, 0), (0, -1), (0, 1), (1, 0))
    return ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def adjacent_subblocks(g: GridGeometry, s: SubBlockRef) -> FrozenSet[SubBlockRef]:
    """
    Sub-blocks touching ``s`` under the geometry's neighborhood, across block
    boundaries too. Never contains ``s``.
    """
    sr, sc = subblock_position(g, s)
    found = set()
    for dr, dc in neighbor_offsets(g.neighborhood):
        r, c = sr + dr, sc + dc
        if 0 <= r < g.sub_rows and 0 <= c < g.sub_cols:
            found.add(subblock_at(g, r, c))
    return frozenset(found)


def block_counts(grid: CellGrid, *classes: SemClass) -> np.ndarray:
    """Per-block count of cells in ``classes``, shaped (blocks_per_col, blocks_per_row)."""
    g = grid.geometry
    m = grid.mask(*classes).reshape(g.blocks_per_col, g.block_dim, g.blocks_per_row, g.block_dim)
    return m.sum(axis=(1, 3))


def eligible_blocks(grid: CellGrid, cls: SemClass, min_fraction: float) -> List[BlockRef]:
    """
    Blocks whose share of ``cls`` cells is at least ``min_fraction``.

    Args:
        grid: Label grid
        cls: Target class
        min_fraction: Threshold in (0, 1]

    Returns:
        list: BlockRefs in ascending id order

    Raises:
        ContractError: If min_fraction is outside (0, 1]
    """
    if not 0 < min_fraction <= 1:
        raise ContractError("min_fraction must be in (0, 1]", min_fraction=min_fraction)
    g = grid.geometry
    fraction = block_counts(grid, cls) / float(g.block_dim * g.block_dim)
    ids = np.flatnonzero(fraction.ravel() >= min_fraction)
    return [BlockRef(int(i)) for i in ids]


def all_subblocks(g: GridGeometry) -> Iterable[SubBlockRef]:
    for idb in range(g.block_count):
        for idsb in range(g.subs_per_block):
            yield SubBlockRef(idb, idsb)


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))
