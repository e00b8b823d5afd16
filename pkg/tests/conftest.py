# tests/conftest.py
from pathlib import Path

import numpy as np
import pytest

from laryngen.cache import get_default_cache
from laryngen.grid import CellGrid, GridGeometry, SemClass
from laryngen.samples import make_sample_background, write_sample_background


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    monkeypatch.delenv("LARYNGEN_PALETTE", raising=False)
    monkeypatch.delenv("LARYNGEN_DEBUG", raising=False)
    monkeypatch.delenv("LARYNGEN_JOBS", raising=False)
    get_default_cache().clear()
    yield
    get_default_cache().clear()


@pytest.fixture
def geometry() -> GridGeometry:
    return GridGeometry()


@pytest.fixture
def small_geometry() -> GridGeometry:
    """16x16 grid, 8x8 blocks, 2x2 sub-blocks."""
    return GridGeometry(16, 16, 8, 2)


@pytest.fixture
def background() -> CellGrid:
    return make_sample_background()


@pytest.fixture
def folds_only(small_geometry) -> CellGrid:
    return CellGrid.filled(small_geometry, SemClass.VOCAL_FOLDS)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def background_dir(tmp_path) -> Path:
    root = tmp_path / "backgrounds"
    write_sample_background(root / "sample.png")
    return root
