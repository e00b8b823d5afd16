# tests/test_scene.py
import random
import re
from dataclasses import replace
from pathlib import Path

import pytest

from laryngen.exceptions import (
    DuplicateFieldError,
    SceneConstraintError,
    SceneError,
    SceneSyntaxError,
    TemplateError,
    UnknownClassError,
)
from laryngen.grid import SemClass
from laryngen.scene import (
    GROUP_TEMPLATES,
    SIZE_PRESETS,
    ObjectSpec,
    SceneSpec,
    expand_group_template,
    format_scene_spec,
    load_scene,
    object_label,
    parse_scene_spec,
    scene_digest,
    scene_for_group,
    sorted_objects,
    tokenize,
)

GOLDEN = Path(__file__).parent / "golden"
P, I, T = SemClass.PATHOLOGY, SemClass.INTUBATION, SemClass.SURGICAL_TOOL


def test_group_scene_uses_template():
    spec = parse_scene_spec("scene { group = 1; }")
    assert spec.group == 1
    assert spec.classes == (P,)
    assert spec.objects[0].placement_cls is SemClass.VOCAL_FOLDS


def test_single_object_keeps_defaults():
    spec = parse_scene_spec("scene { object pathology { placement = vocal_folds; pivots = 8; } }")
    assert spec.group is None
    assert len(spec.objects) == 1
    obj = spec.objects[0]
    assert obj == ObjectSpec(P, SemClass.VOCAL_FOLDS)


def test_odd_pivot_count_is_rejected():
    with pytest.raises(SceneConstraintError) as info:
        parse_scene_spec("scene { object pathology { pivots = 7; } }")
    assert info.value.message == "pivot count must be even"
    assert (info.value.line, info.value.column) == (1, 37)


@pytest.mark.parametrize(
    "group, classes",
    [
        (1, (P,)),
        (2, (P, I, T)),
        (3, (I,)),
        (4, (I, T)),
        (5, (I, T)),
    ],
)
def test_group_templates(group, classes):
    assert tuple(o.cls for o in expand_group_template(group)) == classes
    assert scene_for_group(group).classes == classes
    assert parse_scene_spec(f"scene {{ group = {group}; }}") == scene_for_group(group)


@pytest.mark.parametrize("bad", [0, 6, -1, True, "2"])
def test_group_template_range(bad):
    with pytest.raises(TemplateError):
        expand_group_template(bad)


def test_template_placements():
    pathology, intubation, tool = expand_group_template(2)
    assert pathology.placement_cls is SemClass.VOCAL_FOLDS
    assert intubation.placement_cls is SemClass.GLOTTAL_SPACE
    assert tool.placement_cls is SemClass.VOCAL_FOLDS


def test_explicit_object_overrides_template_slot():
    spec = parse_scene_spec("scene { group = 2; object pathology { size = large; } }")
    assert spec.classes == (P, I, T)
    assert (spec.objects[0].min_pivot_dist, spec.objects[0].max_pivot_dist) == SIZE_PRESETS["large"]


def test_explicit_field_wins_over_size_preset():
    spec = parse_scene_spec("scene { object pathology { max_pivot_dist = 30; size = small; } }")
    assert (spec.objects[0].min_pivot_dist, spec.objects[0].max_pivot_dist) == (4, 30)


def test_object_outside_template_is_appended():
    spec = parse_scene_spec("scene { group = 3; object pathology { } }")
    assert spec.classes == (I, P)


def test_coverage_is_a_float():
    spec = parse_scene_spec("scene { object pathology { coverage = 0.5; } }")
    assert spec.objects[0].min_fraction == 0.5


@pytest.mark.parametrize(
    "text, error",
    [
        ("scene { group = 1 }", SceneSyntaxError),
        ("scene { object blood { } }", UnknownClassError),
        ("scene { object pathology { padding = 1; padding = 1; } }", DuplicateFieldError),
        ("scene { group = 1; group = 2; }", DuplicateFieldError),
        ("scene { object pathology { half_width = 3; } }", SceneConstraintError),
        ("scene { object intubation { count = 2; } }", SceneConstraintError),
        ("scene { object surgical_tool { min_length = 50; max_length = 10; } }", SceneConstraintError),
        ("scene { object pathology { placement = pathology; } }", SceneConstraintError),
        ("scene { group = 99999999999999999999; }", SceneConstraintError),
        ("", SceneSyntaxError),
    ],
)
def test_error_kinds(text, error):
    with pytest.raises(error):
        parse_scene_spec(text)


@pytest.mark.parametrize(
    "body, message",
    [
        ("object pathology { pivots = 258; }", "pivot count must be at most 256"),
        ("object surgical_tool { count = 17; }", "count must be at most 16"),
        ("object surgical_tool { half_width = 100000000000; }", "half_width must be at most 4096"),
        ("object intubation { band = 5000; }", "band must be at most 4096"),
        ("object pathology { max_pivot_dist = 9000; }", "max_pivot_dist must be at most 4096"),
    ],
)
def test_parameters_are_bounded(body, message):
    with pytest.raises(SceneConstraintError) as info:
        parse_scene_spec(f"scene {{ {body} }}")
    assert info.value.message == message


def test_largest_bounded_values_parse():
    spec = parse_scene_spec("scene { object surgical_tool { count = 16; half_width = 4096; } }")
    assert (spec.objects[0].count, spec.objects[0].half_width) == (16, 4096)


def test_invalid_utf8_is_located():
    with pytest.raises(SceneSyntaxError) as info:
        parse_scene_spec(b"scene {\n  \xff }")
    assert (info.value.line, info.value.column) == (2, 3)


def test_tokenizer_positions():
    tokens = list(tokenize("scene {\n  group = 1; # c\n}"))
    assert [(t.text, t.line, t.column) for t in tokens] == [
        ("scene", 1, 1), ("{", 1, 7), ("group", 2, 3), ("=", 2, 9), ("1", 2, 11), (";", 2, 12),
        ("}", 3, 1), ("", 3, 2),
    ]


# ---------------------------
# GOLDEN FILES
# ---------------------------
_EXPECT = re.compile(r"# expect: (\d+):(\d+) (\w+)")


@pytest.mark.parametrize("path", sorted((GOLDEN / "valid").glob("*.scene")), ids=lambda p: p.stem)
def test_golden_valid(path):
    header = path.read_text(encoding="utf-8").splitlines()[0].strip()
    expected = [SemClass.from_slug(s) for s in header.removeprefix("# classes:").split(",")]
    spec = load_scene(path)
    assert list(spec.classes) == expected


@pytest.mark.parametrize("path", sorted((GOLDEN / "invalid").glob("*.scene")), ids=lambda p: p.stem)
def test_golden_invalid(path):
    m = _EXPECT.match(path.read_text(encoding="utf-8"))
    assert m, f"{path.name} has no expect header"
    with pytest.raises(SceneError) as info:
        load_scene(path)
    assert type(info.value).__name__ == m.group(3)
    assert (info.value.line, info.value.column) == (int(m.group(1)), int(m.group(2)))


def test_golden_suite_size():
    assert len(list((GOLDEN / "valid").glob("*.scene"))) >= 10
    assert len(list((GOLDEN / "invalid").glob("*.scene"))) >= 10


# ---------------------------
# PRINTER
# ---------------------------
def _all_specs():
    specs = [scene_for_group(n) for n in GROUP_TEMPLATES]
    specs += [load_scene(p) for p in sorted((GOLDEN / "valid").glob("*.scene"))]
    specs.append(SceneSpec((replace(expand_group_template(1)[0], min_fraction=0.00001),)))
    return specs


@pytest.mark.parametrize("spec", _all_specs())
def test_format_is_a_fixpoint(spec):
    text = format_scene_spec(spec)
    reparsed = parse_scene_spec(text)
    assert format_scene_spec(reparsed) == text
    assert reparsed == spec
    assert scene_digest(reparsed) == scene_digest(spec)


def test_format_prints_resolved_fields():
    text = format_scene_spec(scene_for_group(1))
    assert "pivots = 8;" in text
    assert "coverage = 1.0;" in text
    assert "size" not in text


# ---------------------------
# FUZZ
# ---------------------------
def _mutate(rnd: random.Random, data: bytes) -> bytes:
    buf = bytearray(data)
    for _ in range(rnd.randint(1, 4)):
        op = rnd.randrange(3)
        pos = rnd.randrange(len(buf) + 1)
        if op == 0 and buf:
            del buf[min(pos, len(buf) - 1)]
        elif op == 1:
            buf[pos:pos] = bytes([rnd.choice(b"{}=;# \n0123456789.abz_\xc3")])
        elif buf:
            buf[min(pos, len(buf) - 1)] = rnd.randrange(256)
    return bytes(buf)


def test_parse_is_total():
    rnd = random.Random(20240601)
    seeds = [format_scene_spec(s).encode() for s in _all_specs()]
    for i in range(10_000):
        if i % 2:
            data = _mutate(rnd, rnd.choice(seeds))
        else:
            data = bytes(rnd.randrange(256) for _ in range(rnd.randrange(64)))
        try:
            spec = parse_scene_spec(data)
        except SceneError as exc:
            assert exc.line >= 1 and exc.column >= 1
        else:
            assert spec.objects


# ---------------------------
# HELPERS
# ---------------------------
def test_object_label():
    tool = expand_group_template(4)[1]
    assert object_label(tool) == "surgical_tool"
    assert object_label(tool, 1) == "surgical_tool#2"


def test_sorted_objects_orders_by_class():
    tool, pathology = parse_scene_spec(
        "scene { object surgical_tool { } object pathology { } }"
    ).objects
    assert sorted_objects([tool, pathology]) == [pathology, tool]
