"""Shared pytest setup: import paths and common fixtures."""

import shutil
import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
sys.path.insert(0, str(TESTS_DIR))
sys.path.insert(0, str(TESTS_DIR.parent / "src"))

from settings import FIXTURES_DIR  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-seed training experiments (still run by default)")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES_DIR


@pytest.fixture
def read_fixture():
    def _read(name: str) -> bytes:
        return (FIXTURES_DIR / name).read_bytes()
    return _read


@pytest.fixture
def corpus_dir(tmp_path) -> Path:
    """Three documents over two years: mini.xml and extra_2010.xml (2010), meta_fallback.xml (2011)"""
    target = tmp_path / "corpus"
    target.mkdir()
    for name in ("mini.xml", "extra_2010.xml", "meta_fallback.xml"):
        shutil.copy(FIXTURES_DIR / name, target / name)
    return target


@pytest.fixture
def workdir(tmp_path) -> Path:
    path = tmp_path / "work"
    path.mkdir()
    return path
