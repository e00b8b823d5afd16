# laryngen/__init__.py
"""
laryngen - labeled laryngoscopy label maps generated by guess and check.
"""

from .grid import (
    BlockRef, CellGrid, GridGeometry, SemClass, SubBlockRef,
    cell_to_refs, subblock_cells, adjacent_subblocks, eligible_blocks,
)
from .palette import (
    ClassPalette, LabelImage, ReplacementRule, DEFAULT_PALETTE,
    decode_label_image, encode_label_image, strip_classes, class_histogram,
    load_palette, read_label_image, write_label_image,
)
from .scene import ObjectSpec, SceneSpec, parse_scene_spec, format_scene_spec, expand_group_template
from .plan import GenerationPlan, GenerationTask, compile_plan, derive_seed
from .search import (
    ContourPivot, LineKind, PathSelection, SearchOptions,
    bounding_rect, path_cost, connect_pair, connect_pivots, brute_force_min_cost,
)
from .synth import (
    ObjectInstance, choose_block, choose_center, guess_contour_pivots, rasterize_and_fill,
    generate_pathology, generate_intubation, generate_tool, run_plan,
)
from .metadata import SampleRecord, emit_metadata, read_metadata, write_metadata
from .verify import VerificationReport, verify_output
from .pipeline import RunConfig, BatchSummary, run_batch, strip_directory
from .exceptions import LaryngenError, error_payload
from .cache import Cache, get_default_cache
from .cli import cli

__version__ = "0.1.0"
__all__ = [
    "BlockRef", "CellGrid", "GridGeometry", "SemClass", "SubBlockRef",
    "cell_to_refs", "subblock_cells", "adjacent_subblocks", "eligible_blocks",
    "ClassPalette", "LabelImage", "ReplacementRule", "DEFAULT_PALETTE",
    "decode_label_image", "encode_label_image", "strip_classes", "class_histogram",
    "load_palette", "read_label_image", "write_label_image",
    "ObjectSpec", "SceneSpec", "parse_scene_spec", "format_scene_spec", "expand_group_template",
    "GenerationPlan", "GenerationTask", "compile_plan", "derive_seed",
    "ContourPivot", "LineKind", "PathSelection", "SearchOptions",
    "bounding_rect", "path_cost", "connect_pair", "connect_pivots", "brute_force_min_cost",
    "ObjectInstance", "choose_block", "choose_center", "guess_contour_pivots", "rasterize_and_fill",
    "generate_pathology", "generate_intubation", "generate_tool", "run_plan",
    "SampleRecord", "emit_metadata", "read_metadata", "write_metadata",
    "VerificationReport", "verify_output",
    "RunConfig", "BatchSummary", "run_batch", "strip_directory",
    "LaryngenError", "error_payload", "Cache", "get_default_cache", "cli",
]
