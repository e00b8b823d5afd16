# laryngen/scene.py
"""
Scene specification language.

A scene file declares which objects a generated label map must contain and
how they are shaped::

    # group 2 with a larger tumor
    scene {
        group = 2;
        object pathology {
            placement = vocal_folds;
            size = large;
        }
    }

The grammar is shipped as EBNF in docs/core-concepts/scene-language.md.
Every input either parses into a SceneSpec or raises exactly one SceneError
carrying the line and column of the offending token.
"""

import hashlib
import re
from dataclasses import dataclass, fields, replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import (
    DuplicateFieldError,
    SceneConstraintError,
    SceneSyntaxError,
    TemplateError,
    UnknownClassError,
)
from .grid import BACKGROUND_CLASSES, DYNAMIC_CLASSES, SemClass

# Tumor always present / tumor + instruments + intubation / intubation only /
# instruments + intubation / instruments + intubation (blood and dressing have
# no label class, so group 5 equals group 4 at the label level).
GROUP_TEMPLATES: Dict[int, Tuple[SemClass, ...]] = {
    1: (SemClass.PATHOLOGY,),
    2: (SemClass.PATHOLOGY, SemClass.INTUBATION, SemClass.SURGICAL_TOOL),
    3: (SemClass.INTUBATION,),
    4: (SemClass.INTUBATION, SemClass.SURGICAL_TOOL),
    5: (SemClass.INTUBATION, SemClass.SURGICAL_TOOL),
}

SIZE_PRESETS: Dict[str, Tuple[int, int]] = {
    "small": (4, 10),
    "medium": (6, 16),
    "large": (12, 24),
}

_MAX_NUMBER_DIGITS = 18

# Upper bounds on object parameters; extents are in cells.
MAX_PIVOTS = 256
MAX_COUNT = 16
MAX_EXTENT = 4096


@dataclass(frozen=True)
class ObjectSpec:
    """
    Resolved parameters for one object to generate.

    Attributes:
        cls: Object class (pathology, intubation or surgical_tool)
        placement_cls: Background class the object may overwrite
            (for tools: the class of the tip cell)
        pivot_count: Contour pivots, even and at least 4
        min_pivot_dist: Smallest Chebyshev distance of a pivot from the centre
        max_pivot_dist: Largest Chebyshev distance of a pivot from the centre
        center_margin: Chebyshev radius around the centre that must be placement class
        min_fraction: Share of placement cells that makes a block eligible
        padding: Dilation of each pivot pair's bounding rectangle, in cells
        band_rows: Height of the bottom band holding the intubation centre
        count: Number of instances (surgical tools only)
        half_width: Tool half-width in cells
        min_length: Shortest tool segment, in cells
        max_length: Longest tool segment, in cells
    """

    cls: SemClass
    placement_cls: SemClass
    pivot_count: int = 8
    min_pivot_dist: int = 4
    max_pivot_dist: int = 24
    center_margin: int = 16
    min_fraction: float = 1.0
    padding: int = 0
    band_rows: int = 48
    count: int = 1
    half_width: int = 6
    min_length: int = 64
    max_length: int = 256

    def problems(self) -> List[Tuple[str, str]]:
        """Invariant violations as (attribute, message) pairs."""
        found = []
        if self.cls not in DYNAMIC_CLASSES:
            found.append(("cls", f"{self.cls.slug} cannot be generated"))
        if self.placement_cls not in BACKGROUND_CLASSES:
            found.append(("placement_cls", "placement must be a background class"))
        if self.pivot_count % 2:
            found.append(("pivot_count", "pivot count must be even"))
        elif self.pivot_count < 4:
            found.append(("pivot_count", "pivot count must be at least 4"))
        elif self.pivot_count > MAX_PIVOTS:
            found.append(("pivot_count", f"pivot count must be at most {MAX_PIVOTS}"))
        if self.min_pivot_dist < 1:
            found.append(("min_pivot_dist", "min_pivot_dist must be at least 1"))
        elif self.max_pivot_dist <= self.min_pivot_dist:
            found.append(("max_pivot_dist", "max_pivot_dist must exceed min_pivot_dist"))
        if self.center_margin < 0:
            found.append(("center_margin", "center_margin must not be negative"))
        if not 0 < self.min_fraction <= 1:
            found.append(("min_fraction", "coverage must be in (0, 1]"))
        if self.padding < 0:
            found.append(("padding", "padding must not be negative"))
        if self.band_rows < 1:
            found.append(("band_rows", "band must be at least 1"))
        if self.count < 1:
            found.append(("count", "count must be at least 1"))
        elif self.count > MAX_COUNT:
            found.append(("count", f"count must be at most {MAX_COUNT}"))
        elif self.count > 1 and self.cls is not SemClass.SURGICAL_TOOL:
            found.append(("count", f"only one {self.cls.slug} per image"))
        if self.half_width < 0:
            found.append(("half_width", "half_width must not be negative"))
        if self.min_length < 1:
            found.append(("min_length", "min_length must be at least 1"))
        elif self.max_length < self.min_length:
            found.append(("max_length", "max_length must be at least min_length"))
        for attr in ("max_pivot_dist", "center_margin", "padding", "band_rows", "half_width", "max_length"):
            if getattr(self, attr) > MAX_EXTENT and not any(a == attr for a, _ in found):
                key = next(k for k, (a, _) in _FIELDS.items() if a == attr)
                found.append((attr, f"{key} must be at most {MAX_EXTENT}"))
        return found

    def to_dict(self) -> Dict[str, Union[int, float, str]]:
        out: Dict[str, Union[int, float, str]] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.slug if isinstance(value, SemClass) else value
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Union[int, float, str]]) -> "ObjectSpec":
        kwargs = dict(data)
        kwargs["cls"] = SemClass.from_slug(str(kwargs["cls"]))
        kwargs["placement_cls"] = SemClass.from_slug(str(kwargs["placement_cls"]))
        kwargs["min_fraction"] = float(kwargs["min_fraction"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SceneSpec:
    """
    Parsed desiderata: an optional group template and the resolved objects.
    """

    objects: Tuple[ObjectSpec, ...]
    group: Optional[int] = None

    @property
    def classes(self) -> Tuple[SemClass, ...]:
        return tuple(o.cls for o in self.objects)


def default_object_spec(cls: SemClass) -> ObjectSpec:
    """Defaults for one object class."""
    if cls is SemClass.PATHOLOGY:
        return ObjectSpec(cls, SemClass.VOCAL_FOLDS)
    if cls is SemClass.INTUBATION:
        return ObjectSpec(cls, SemClass.GLOTTAL_SPACE, center_margin=0)
    if cls is SemClass.SURGICAL_TOOL:
        return ObjectSpec(cls, SemClass.VOCAL_FOLDS, center_margin=0)
    raise TemplateError(f"{cls.slug} is not a generated class", cls=cls.slug)


def expand_group_template(n: int) -> List[ObjectSpec]:
    """
    Objects of one dataset group, with default parameters.

    Args:
        n: Group id in 1..5

    Returns:
        list: ObjectSpecs in template order

    Raises:
        TemplateError: If n is not a group id

    Example:
        >>> [o.cls.slug for o in expand_group_template(3)]
        ['intubation']
    """
    if isinstance(n, bool) or not isinstance(n, int) or n not in GROUP_TEMPLATES:
        raise TemplateError(f"group must be between 1 and 5, got {n!r}", group=n)
    return [default_object_spec(cls) for cls in GROUP_TEMPLATES[n]]


# ---------------------------
# FIELDS
# ---------------------------
# DSL key -> (ObjectSpec attribute, value kind)
_FIELDS: Dict[str, Tuple[str, str]] = {
    "placement": ("placement_cls", "class"),
    "pivots": ("pivot_count", "int"),
    "min_pivot_dist": ("min_pivot_dist", "int"),
    "max_pivot_dist": ("max_pivot_dist", "int"),
    "center_margin": ("center_margin", "int"),
    "coverage": ("min_fraction", "number"),
    "padding": ("padding", "int"),
    "size": ("", "size"),
    "band": ("band_rows", "int"),
    "count": ("count", "int"),
    "half_width": ("half_width", "int"),
    "min_length": ("min_length", "int"),
    "max_length": ("max_length", "int"),
}

_APPLICABLE: Dict[SemClass, Tuple[str, ...]] = {
    SemClass.PATHOLOGY: ("placement", "pivots", "min_pivot_dist", "max_pivot_dist",
                         "center_margin", "coverage", "padding", "size"),
    SemClass.INTUBATION: ("placement", "pivots", "min_pivot_dist", "max_pivot_dist",
                          "padding", "band", "size"),
    SemClass.SURGICAL_TOOL: ("placement", "count", "half_width", "min_length", "max_length"),
}


def applicable_fields(cls: SemClass) -> Tuple[str, ...]:
    return _APPLICABLE[cls]


# ---------------------------
# LEXER
# ---------------------------
@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
      (?P<ws>[ \t\r\f\v]+)
    | (?P<newline>\n)
    | (?P<comment>\#[^\n]*)
    | (?P<number>[0-9]+(?:\.[0-9]+)?)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<punct>[{}=;])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> Iterator[Token]:
    """
    Split scene text into tokens, ending with an ``eof`` token.

    Raises:
        SceneSyntaxError: On a character no token can start with
    """
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SceneSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind, value = m.lastgroup, m.group()
        if kind == "newline":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                yield Token(kind, value, line, col)
            col += len(value)
        pos = m.end()
    yield Token("eof", "", line, col)


def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as exc:
        head = data[: exc.start]
        line = head.count(b"\n") + 1
        last = head.rfind(b"\n")
        column = len(head[last + 1:].decode("utf-8", errors="replace")) + 1
        raise SceneSyntaxError("input is not valid UTF-8", line, column) from None


# ---------------------------
# PARSER
# ---------------------------
def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    """Recursive-descent parser over the token stream."""

    def __init__(self, text: str):
        self.tokens = list(tokenize(text))
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str, text: Optional[str] = None, what: Optional[str] = None) -> Token:
        tok = self.current
        if tok.kind != kind or (text is not None and tok.text != text):
            wanted = what or (repr(text) if text else kind)
            raise SceneSyntaxError(f"expected {wanted} but found {_describe(tok)}", tok.line, tok.column)
        return self.advance()

    def number(self, tok: Token, integer: bool) -> Union[int, float]:
        whole = tok.text.split(".", 1)[0]
        if len(whole) > _MAX_NUMBER_DIGITS:
            raise SceneConstraintError("number is too large", tok.line, tok.column)
        if integer:
            if "." in tok.text:
                raise SceneConstraintError("expected an integer", tok.line, tok.column)
            return int(tok.text)
        return float(tok.text)

    def sem_class(self, tok: Token) -> SemClass:
        if tok.kind != "ident":
            raise SceneSyntaxError(f"expected a class name but found {_describe(tok)}", tok.line, tok.column)
        try:
            return SemClass.from_slug(tok.text)
        except KeyError:
            raise UnknownClassError(f"unknown class '{tok.text}'", tok.line, tok.column) from None

    def parse(self) -> SceneSpec:
        head = self.expect("ident", "scene", "'scene'")
        self.expect("punct", "{")
        group: Optional[int] = None
        group_tok: Optional[Token] = None
        explicit: List[Tuple[Token, ObjectSpec]] = []
        while not (self.current.kind == "punct" and self.current.text == "}"):
            tok = self.current
            if tok.kind == "ident" and tok.text == "group":
                self.advance()
                if group_tok is not None:
                    raise DuplicateFieldError("field 'group' assigned twice", tok.line, tok.column)
                group_tok = tok
                self.expect("punct", "=")
                value = self.expect("number", what="a group number")
                group = int(self.number(value, integer=True))
                if group not in GROUP_TEMPLATES:
                    raise SceneConstraintError("group must be between 1 and 5", value.line, value.column)
                self.expect("punct", ";")
            elif tok.kind == "ident" and tok.text == "object":
                self.advance()
                cls_tok, spec = self.parse_object()
                if any(prev.cls is spec.cls for _, prev in explicit):
                    raise SceneConstraintError(
                        f"object {spec.cls.slug} declared twice", cls_tok.line, cls_tok.column
                    )
                explicit.append((cls_tok, spec))
            else:
                raise SceneSyntaxError(
                    f"expected 'group', 'object' or '}}' but found {_describe(tok)}", tok.line, tok.column
                )
        self.advance()
        self.expect("eof", what="end of input")

        objects: List[ObjectSpec] = expand_group_template(group) if group is not None else []
        for _, spec in explicit:
            slot = next((i for i, o in enumerate(objects) if o.cls is spec.cls), None)
            if slot is None:
                objects.append(spec)
            else:
                objects[slot] = spec
        if not objects:
            raise SceneConstraintError("scene declares no objects", head.line, head.column)
        return SceneSpec(tuple(objects), group)

    def parse_object(self) -> Tuple[Token, ObjectSpec]:
        cls_tok = self.current
        cls = self.sem_class(self.advance())
        if cls not in DYNAMIC_CLASSES:
            raise SceneConstraintError(f"{cls.slug} cannot be generated", cls_tok.line, cls_tok.column)
        self.expect("punct", "{")
        seen: Dict[str, Token] = {}
        values: Dict[str, object] = {}
        size: Optional[Tuple[int, int]] = None
        while not (self.current.kind == "punct" and self.current.text == "}"):
            key = self.expect("ident", what="a field name or '}'")
            if key.text not in _FIELDS:
                raise SceneConstraintError(f"unknown field '{key.text}'", key.line, key.column)
            if key.text not in applicable_fields(cls):
                raise SceneConstraintError(
                    f"field '{key.text}' does not apply to {cls.slug}", key.line, key.column
                )
            if key.text in seen:
                raise DuplicateFieldError(f"field '{key.text}' assigned twice", key.line, key.column)
            self.expect("punct", "=")
            value = self.current
            if value.kind not in ("number", "ident"):
                raise SceneSyntaxError(f"expected a value but found {_describe(value)}", value.line, value.column)
            self.advance()
            self.expect("punct", ";")
            seen[key.text] = value
            attr, kind = _FIELDS[key.text]
            if kind == "class":
                values[attr] = self.sem_class(value)
            elif kind == "size":
                if value.kind != "ident" or value.text not in SIZE_PRESETS:
                    raise SceneConstraintError("size must be small, medium or large", value.line, value.column)
                size = SIZE_PRESETS[value.text]
            else:
                if value.kind != "number":
                    raise SceneConstraintError(f"field '{key.text}' expects a number", value.line, value.column)
                values[attr] = self.number(value, integer=(kind == "int"))
        self.advance()

        spec = default_object_spec(cls)
        if size is not None:
            spec = replace(spec, min_pivot_dist=size[0], max_pivot_dist=size[1])
        spec = replace(spec, **values)
        problems = spec.problems()
        if problems:
            attr, message = problems[0]
            tok = self._locate(attr, seen, cls_tok)
            raise SceneConstraintError(message, tok.line, tok.column)
        return cls_tok, spec

    @staticmethod
    def _locate(attr: str, seen: Dict[str, Token], fallback: Token) -> Token:
        """Token of the field that set ``attr``; for pair checks, the partner field."""
        partners = {"max_pivot_dist": ("max_pivot_dist", "min_pivot_dist", "size"),
                    "max_length": ("max_length", "min_length")}
        keys = [k for k, (a, _) in _FIELDS.items() if a == attr]
        for key in partners.get(attr, tuple(keys)):
            if key in seen:
                return seen[key]
        return fallback


def parse_scene_spec(text: Union[str, bytes]) -> SceneSpec:
    """
    Parse a scene specification.

    Args:
        text: Scene source, str or UTF-8 bytes

    Returns:
        SceneSpec: Objects after template expansion

    Raises:
        SceneError: Exactly one located diagnostic (syntax, unknown class,
            duplicate field or constraint violation)

    Example:
        >>> parse_scene_spec("scene { group = 1; }").classes
        (<SemClass.PATHOLOGY: 4>,)
    """
    if isinstance(text, (bytes, bytearray)):
        text = _decode(bytes(text))
    return _Parser(text).parse()


def format_scene_spec(spec: SceneSpec) -> str:
    """
    Canonical text of a scene: every applicable field, resolved.

    ``format_scene_spec(parse_scene_spec(format_scene_spec(s)))`` equals
    ``format_scene_spec(s)``.
    """
    lines = ["scene {"]
    if spec.group is not None:
        lines.append(f"    group = {spec.group};")
    for obj in spec.objects:
        lines.append(f"    object {obj.cls.slug} {{")
        for key in applicable_fields(obj.cls):
            attr, kind = _FIELDS[key]
            if kind == "size":
                continue
            value = getattr(obj, attr)
            if kind == "class":
                text = value.slug
            elif kind == "number":
                text = np.format_float_positional(float(value), trim="0")
            else:
                text = str(value)
            lines.append(f"        {key} = {text};")
        lines.append("    }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def scene_digest(spec: SceneSpec) -> str:
    """SHA-256 of the canonical text."""
    return hashlib.sha256(format_scene_spec(spec).encode("utf-8")).hexdigest()


def load_scene(path) -> SceneSpec:
    """Read and parse a ``.scene`` file (UTF-8)."""
    with open(path, "rb") as fh:
        return parse_scene_spec(fh.read())


def scene_for_group(n: int) -> SceneSpec:
    """SceneSpec equivalent to ``scene { group = n; }``."""
    return SceneSpec(tuple(expand_group_template(n)), n)


def object_label(spec: ObjectSpec, ordinal: int = 0) -> str:
    return spec.cls.slug if ordinal == 0 else f"{spec.cls.slug}#{ordinal + 1}"


def sorted_objects(objects: Sequence[ObjectSpec]) -> List[ObjectSpec]:
    """Pathology before intubation before surgical tools; stable otherwise."""
    rank = {SemClass.PATHOLOGY: 0, SemClass.INTUBATION: 1, SemClass.SURGICAL_TOOL: 2}
    return sorted(objects, key=lambda o: rank[o.cls])
