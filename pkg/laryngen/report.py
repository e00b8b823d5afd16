# laryngen/report.py
"""
Markdown summary of a generation batch, rendered with Jinja2.

The summary holds no timestamps or absolute timings so that two runs with
the same configuration write identical trees.
"""

from typing import TYPE_CHECKING, List, Optional

from jinja2 import Environment, PackageLoader, StrictUndefined

from .grid import DYNAMIC_CLASSES, SemClass

if TYPE_CHECKING:
    from .pipeline import BatchSummary, RunConfig

_env: Optional[Environment] = None


def get_env() -> Environment:
    """Get or create the Jinja2 environment over ``laryngen/templates``."""
    global _env
    if _env is None:
        _env = Environment(
            loader=PackageLoader("laryngen", "templates"),
            autoescape=False,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
            undefined=StrictUndefined,
        )
    return _env


def render_summary(summary: "BatchSummary", config: "RunConfig", scene_text: str) -> str:
    """
    Render ``summary.md``.

    Args:
        summary: Batch outcome
        config: Effective run configuration
        scene_text: Canonical scene text

    Returns:
        str: Markdown document
    """
    classes: List[SemClass] = sorted(DYNAMIC_CLASSES)
    header = ["image", "background"] + [f"{c.slug} cells" for c in classes]
    rows = [
        [o.image, o.background] + [str(o.histogram.get(c.slug, 0)) for c in classes]
        for o in summary.outcomes
        if o.ok
    ]
    return get_env().get_template("summary.md.j2").render(
        summary=summary, config=config, scene_text=scene_text, header=header, rows=rows,
    )
