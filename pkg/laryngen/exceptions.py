# laryngen/exceptions.py
"""
Exception hierarchy for laryngen.

Every error raised by the package derives from LaryngenError, which carries
a machine-readable error code, the process exit status the CLI should use,
and a dictionary of extra context. ``error_payload`` renders any of them as
the JSON envelope used in diagnostics and failure logs.
"""

from collections import Counter
from typing import Any, Dict, Mapping, Optional, Tuple


class LaryngenError(Exception):
    """
    Base laryngen exception class.

    Attributes:
        detail (Any): Error message or details
        exit_code (int): Process exit status used by the CLI
        error_code (str): Machine-readable error code
        extra (dict): Additional error context
    """

    default_detail = "laryngen error"
    default_code = "LARYNGEN_ERROR"

    def __init__(self, detail: Any = None, exit_code: int = 1,
                 error_code: Optional[str] = None, **kwargs):
        """
        Initialize laryngen error.

        Args:
            detail: Error message or details
            exit_code: Process exit status, defaults to 1
            error_code: Machine-readable error code, defaults to the class code
            **kwargs: Additional context to include in the error payload
        """
        self.detail = detail if detail is not None else self.default_detail
        self.exit_code = exit_code
        self.error_code = error_code or self.default_code
        self.extra = kwargs
        super().__init__(str(self.detail))


class GeometryError(LaryngenError):
    """Invalid grid geometry, or an image that does not fit the geometry."""

    default_detail = "Invalid grid geometry"
    default_code = "GEOMETRY_ERROR"


class BoundsError(LaryngenError):
    """Coordinates or block/sub-block references outside the grid."""

    default_detail = "Out of bounds"
    default_code = "BOUNDS_ERROR"


class ContractError(LaryngenError):
    """A precondition of an operation was violated by the caller."""

    default_detail = "Contract violated"
    default_code = "CONTRACT_ERROR"


class PaletteError(LaryngenError):
    """Palette file unreadable, partial, or not injective."""

    default_detail = "Invalid palette"
    default_code = "PALETTE_ERROR"


class DecodeError(LaryngenError):
    """
    A pixel color is not part of the active palette.

    Attributes:
        x (int): Pixel row
        y (int): Pixel column
        color (tuple): Offending RGB triple
    """

    default_detail = "Unknown label color"
    default_code = "DECODE_ERROR"

    def __init__(self, x: int, y: int, color: Tuple[int, int, int], **kwargs):
        self.x = x
        self.y = y
        self.color = tuple(int(c) for c in color)
        super().__init__(
            f"pixel ({x}, {y}) has color {self.color} which is not in the palette",
            x=x, y=y, color=list(self.color), **kwargs,
        )


class SceneError(LaryngenError):
    """
    Located diagnostic produced while reading a scene specification.

    Attributes:
        line (int): 1-based line of the offending token
        column (int): 1-based column of the offending token
        message (str): Diagnostic without the location prefix
    """

    default_code = "SCENE_ERROR"

    def __init__(self, message: str, line: int, column: int, **kwargs):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}",
                         line=line, column=column, **kwargs)


class SceneSyntaxError(SceneError):
    """Lexical or grammatical error."""

    default_code = "SCENE_SYNTAX"


class UnknownClassError(SceneError):
    """A class name that is not one of the seven semantic classes."""

    default_code = "SCENE_UNKNOWN_CLASS"


class DuplicateFieldError(SceneError):
    """The same field was assigned twice in one block."""

    default_code = "SCENE_DUPLICATE_FIELD"


class SceneConstraintError(SceneError):
    """Well-formed input whose values break an ObjectSpec or SceneSpec invariant."""

    default_code = "SCENE_CONSTRAINT"


class TemplateError(LaryngenError):
    """Group template id outside 1..5."""

    default_detail = "Unknown group template"
    default_code = "TEMPLATE_ERROR"


class CompileError(LaryngenError):
    """
    A plan task cannot be satisfied by the background at all.

    Attributes:
        task (str): Label of the infeasible task
    """

    default_code = "COMPILE_ERROR"

    def __init__(self, detail: str, task: str, **kwargs):
        self.task = task
        super().__init__(detail, task=task, **kwargs)


class InfeasibleError(LaryngenError):
    """
    One guess stage found no candidate.

    Attributes:
        stage (str): Name of the failing stage
    """

    default_code = "INFEASIBLE"

    def __init__(self, detail: str, stage: str, **kwargs):
        self.stage = stage
        super().__init__(detail, stage=stage, **kwargs)


class OpenContourError(InfeasibleError):
    """The flood from the centre escaped the contour window."""

    default_code = "OPEN_CONTOUR"

    def __init__(self, detail: str = "contour is not closed around the centre", **kwargs):
        super().__init__(detail, stage="rasterize", **kwargs)


class GenerationFailure(LaryngenError):
    """
    Retry budget exhausted for one object.

    Attributes:
        cls_name (str): Class of the object being generated
        stages (Counter): Failure count per stage across all attempts
    """

    default_code = "GENERATION_FAILED"

    def __init__(self, cls_name: str, attempts: int, stages: Mapping[str, int], **kwargs):
        self.cls_name = cls_name
        self.attempts = attempts
        self.stages = Counter(stages)
        summary = ", ".join(f"{stage}={n}" for stage, n in sorted(self.stages.items()))
        super().__init__(
            f"could not generate {cls_name} after {attempts} attempt(s) ({summary or 'no attempts'})",
            cls=cls_name, attempts=attempts, stages=dict(self.stages), **kwargs,
        )


class OracleBoundError(LaryngenError):
    """Region too large for exhaustive subset enumeration."""

    default_detail = "Region exceeds the brute-force bound"
    default_code = "ORACLE_BOUND"


class VerificationError(LaryngenError):
    """Artifacts are unreadable, corrupt, or do not belong together."""

    default_detail = "Cannot verify artifacts"
    default_code = "VERIFICATION_ERROR"

    def __init__(self, detail: Any = None, **kwargs):
        super().__init__(detail, exit_code=3, **kwargs)


def error_payload(exc: LaryngenError) -> Dict[str, Any]:
    """
    Render a laryngen exception as a JSON-ready envelope.

    Args:
        exc: Exception instance

    Returns:
        dict: ``{"error": {"code", "message", "exit_code"[, "details"]}}``

    Example:
        >>> error_payload(TemplateError("group 9"))["error"]["code"]
        'TEMPLATE_ERROR'
    """
    payload: Dict[str, Any] = {
        "error": {
            "code": exc.error_code,
            "message": str(exc.detail),
            "exit_code": exc.exit_code,
        }
    }
    if exc.extra:
        payload["error"]["details"] = exc.extra
    return payload
