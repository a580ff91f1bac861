from __future__ import annotations

import json
from pathlib import Path

import pytest

from leanbench.scanner import SourceFile

FIXTURES = Path(__file__).parent / "fixtures"
GOLDENS = Path(__file__).parent / "goldens"


def load_source(rel: str, name: str | None = None) -> SourceFile:
    path = FIXTURES / rel
    return SourceFile.from_text(name or path.name, path.read_text(encoding="utf-8"))


def load_fixture_json(rel: str) -> dict:
    return json.loads((FIXTURES / rel).read_text(encoding="utf-8"))


def golden(name: str) -> str:
    return (GOLDENS / name).read_text(encoding="utf-8")


@pytest.fixture
def square_file() -> SourceFile:
    return load_source("square/Square.lean")


@pytest.fixture
def rect_file() -> SourceFile:
    return load_source("rect/Rect.lean")


@pytest.fixture
def repo3() -> list[SourceFile]:
    return [
        load_source("repo3/Geometry/Shapes.lean", "Geometry/Shapes.lean"),
        load_source("repo3/Geometry/Area.lean", "Geometry/Area.lean"),
        load_source("repo3/Util.lean", "Util.lean"),
    ]


@pytest.fixture
def square_checker_fixture() -> dict:
    return load_fixture_json("checker_square.json")


@pytest.fixture
def rect_checker_fixture() -> dict:
    return load_fixture_json("checker_rect.json")


@pytest.fixture
def e2e_checker_fixture() -> dict:
    return load_fixture_json("checker_e2e.json")
