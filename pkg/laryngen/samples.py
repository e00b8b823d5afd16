# laryngen/samples.py
"""
Synthetic backgrounds shaped like a laryngoscopy label map: void margin at
the top, two vocal folds framing the glottal space, which runs down to the
bottom border, and other tissue everywhere else.
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np

from .grid import CellGrid, GridGeometry, SemClass
from .palette import DEFAULT_PALETTE, ClassPalette, encode_label_image, write_label_image
from .scene import GROUP_TEMPLATES, format_scene_spec, scene_for_group


def make_sample_background(geometry: Optional[GridGeometry] = None) -> CellGrid:
    """
    Background whose proportions follow the grid size.

    On the default 512x512 grid: rows 0..31 void, vocal folds on rows 96..447
    at columns 0..223 and 288..511, glottal space on rows 96..511 at columns
    224..287.
    """
    g = geometry or GridGeometry()
    h, w = g.height, g.width
    cells = np.full((h, w), int(SemClass.OTHER_TISSUE), dtype=np.uint8)
    cells[: h // 16, :] = int(SemClass.VOID)
    top, folds_end = 3 * h // 16, 7 * h // 8
    left, right = 7 * w // 16, 9 * w // 16
    cells[top:folds_end, :left] = int(SemClass.VOCAL_FOLDS)
    cells[top:folds_end, right:] = int(SemClass.VOCAL_FOLDS)
    cells[top:, left:right] = int(SemClass.GLOTTAL_SPACE)
    return CellGrid(g, cells)


def write_sample_background(path: Union[str, Path], geometry: Optional[GridGeometry] = None,
                            palette: ClassPalette = DEFAULT_PALETTE) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_label_image(encode_label_image(make_sample_background(geometry), palette), path)
    return path


def sample_scene_text(group: int) -> str:
    """Canonical scene file for a group, with a header comment."""
    classes = ", ".join(c.slug for c in GROUP_TEMPLATES[group])
    return f"# group {group}: {classes}\n" + format_scene_spec(scene_for_group(group))
