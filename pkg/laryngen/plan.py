# laryngen/plan.py
"""
Compile a SceneSpec against a background grid into an ordered list of
generation tasks, each with its own sub-seed.
"""

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .exceptions import CompileError
from .grid import CellGrid, SemClass, eligible_blocks
from .scene import ObjectSpec, SceneSpec, object_label, scene_digest, sorted_objects

TOOL_BACKGROUND = (SemClass.VOCAL_FOLDS, SemClass.GLOTTAL_SPACE)


def derive_seed(master: int, *path: int) -> int:
    """
    Stable 64-bit sub-seed of ``master`` along ``path``.

    Example:
        >>> derive_seed(7, 0) == derive_seed(7, 0) != derive_seed(7, 1)
        True
    """
    text = ":".join(str(int(p)) for p in (master, *path))
    return int.from_bytes(hashlib.sha256(text.encode("ascii")).digest()[:8], "big")


@dataclass(frozen=True)
class GenerationTask:
    index: int
    label: str
    spec: ObjectSpec
    seed: int

    def to_dict(self) -> Dict[str, object]:
        return {"index": self.index, "label": self.label, "seed": self.seed, "spec": self.spec.to_dict()}


@dataclass(frozen=True)
class GenerationPlan:
    """
    Ordered tasks: pathology, then intubation, then surgical tools.

    Attributes:
        tasks: Tasks in execution order
        master_seed: Seed the task sub-seeds derive from
        spec_digest: SHA-256 of the scene's canonical text
    """

    tasks: Tuple[GenerationTask, ...]
    master_seed: int
    spec_digest: str


def border_mask(shape: Tuple[int, int]) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[0, :] = m[-1, :] = True
    m[:, 0] = m[:, -1] = True
    return m


def _precheck(task: GenerationTask, grid: CellGrid) -> None:
    spec = task.spec
    if spec.cls is SemClass.PATHOLOGY:
        if not eligible_blocks(grid, spec.placement_cls, spec.min_fraction):
            raise CompileError(f"no eligible block for {task.label}", task=task.label)
    elif spec.cls is SemClass.INTUBATION:
        if not grid.mask(spec.placement_cls)[-1, :].any():
            raise CompileError(
                f"no {spec.placement_cls.slug} cells on the bottom border for {task.label}",
                task=task.label,
            )
    else:
        if not (grid.mask(*TOOL_BACKGROUND) & border_mask(grid.cells.shape)).any():
            raise CompileError(f"no eligible border cell for {task.label}", task=task.label)
        if not grid.mask(spec.placement_cls).any():
            raise CompileError(
                f"no {spec.placement_cls.slug} cell for the tip of {task.label}", task=task.label
            )


def compile_plan(spec: SceneSpec, grid: CellGrid, master_seed: int) -> GenerationPlan:
    """
    Order the scene's objects and derive one sub-seed per task.

    Args:
        spec: Parsed scene
        grid: Stripped background
        master_seed: Per-image master seed

    Returns:
        GenerationPlan: Same inputs always give the same plan

    Raises:
        CompileError: If a task cannot be placed on this background at all
    """
    tasks: List[GenerationTask] = []
    for obj in sorted_objects(spec.objects):
        for ordinal in range(obj.count):
            index = len(tasks)
            tasks.append(GenerationTask(index, object_label(obj, ordinal), obj,
                                        derive_seed(master_seed, index)))
    for task in tasks:
        _precheck(task, grid)
    return GenerationPlan(tuple(tasks), master_seed, scene_digest(spec))
