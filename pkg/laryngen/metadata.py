# laryngen/metadata.py
"""
Per-image provenance records.

Every generated label map gets a JSON sidecar naming its background, scene,
seeds, effective configuration and, for each object, the guesses that
produced it. The verifier replays an image from this record alone.
"""

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from .exceptions import VerificationError
from .grid import GridGeometry
from .palette import ClassPalette
from .plan import GenerationPlan
from .scene import SceneSpec, format_scene_spec, scene_digest
from .search import SearchOptions
from .synth import ObjectInstance

SCHEMA = "laryngen.sample/1"


@dataclass
class SampleRecord:
    """One ``meta/NNNN.json`` document."""

    index: int
    image: str
    background: Dict[str, Any]
    scene: Dict[str, Any]
    master_seed: int
    seed: int
    geometry: Dict[str, int]
    search: Dict[str, Any]
    palette_sha256: str
    objects: List[Dict[str, Any]] = field(default_factory=list)
    schema: str = SCHEMA

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SampleRecord":
        """
        Raises:
            VerificationError: On a foreign schema or missing fields
        """
        if data.get("schema") != SCHEMA:
            raise VerificationError(f"unsupported metadata schema {data.get('schema')!r}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise VerificationError(f"malformed metadata: {exc}") from None


def object_record(instance: ObjectInstance, task: str) -> Dict[str, Any]:
    """Metadata entry of one generated object."""
    record: Dict[str, Any] = {
        "class": instance.cls.slug,
        "placement": instance.placement_cls.slug,
        "task": task,
        "seed": instance.seed,
        "attempt": instance.attempt,
        "shape": instance.shape,
        "chosen_block": instance.chosen_block.idb,
        "center": list(instance.center),
        "pivots": [
            {"idfp": p.idfp, "x": p.position[0], "y": p.position[1], "line": p.line_kind.value}
            for p in instance.pivots
        ],
        "selected_subblocks": [[s.idb, s.idsb] for s in sorted(instance.selection.chosen)],
        "pair_costs": list(instance.selection.pair_costs),
        "soft_cost": instance.selection.cost,
        "parameters": instance.spec.to_dict(),
    }
    if instance.segment is not None:
        record["segment"] = {
            "entry": list(instance.segment.entry),
            "tip": list(instance.segment.tip),
            "half_width": instance.segment.half_width,
        }
    return record


def emit_metadata(instances: Sequence[ObjectInstance], plan: GenerationPlan, *, index: int,
                  image: str, background: Union[str, Path], background_sha256: str,
                  scene: SceneSpec, master_seed: int, geometry: GridGeometry,
                  search: SearchOptions, palette: ClassPalette,
                  snap: Optional[int] = None) -> SampleRecord:
    """
    Build the record of one generated image.

    Args:
        instances: Generated objects, in plan order
        plan: The plan they were generated from
        index: Image index within the batch
        image: Label image path, relative to the output directory
        background: Background path as given on the command line
        background_sha256: Digest of the background file
        scene: Scene the image satisfies
        master_seed: Batch master seed
        geometry: Effective grid geometry
        search: Effective search options
        palette: Palette the image is encoded with
        snap: Color snapping tolerance used to decode the background
    """
    return SampleRecord(
        index=index,
        image=image,
        background={"path": str(background), "sha256": background_sha256, "snap": snap},
        scene={
            "group": scene.group,
            "digest": scene_digest(scene),
            "text": format_scene_spec(scene),
            "classes": [c.slug for c in scene.classes],
        },
        master_seed=master_seed,
        seed=plan.master_seed,
        geometry=geometry.to_dict(),
        search=search.to_dict(),
        palette_sha256=palette.digest,
        objects=[object_record(inst, task.label) for inst, task in zip(instances, plan.tasks)],
    )


def write_metadata(record: SampleRecord, path: Union[str, Path]) -> None:
    """Write the record as sorted, indented JSON; replaces ``path`` atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.stem}.", suffix=".json", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(record.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def read_metadata(path: Union[str, Path]) -> SampleRecord:
    """
    Raises:
        VerificationError: If the file is unreadable or not a sample record
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VerificationError(f"cannot read metadata {path}: {exc}") from None
    if not isinstance(data, dict):
        raise VerificationError(f"{path} is not a metadata record")
    return SampleRecord.from_dict(data)
