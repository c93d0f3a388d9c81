"""Configuración y fixtures compartidas para pytest."""

import pytest
import tempfile
import shutil
from pathlib import Path
from typing import Generator, List

from config import MergeConfig, ToolkitConfig
from logger import app_logger
from pattern import DEFAULT_ALPHABET, Alphabet
from instances import Instance
from tests.fixtures import scenes


@pytest.fixture(autouse=True)
def setup_logging():
    """Logger en stderr a nivel WARNING para cada test."""
    app_logger.setup_logger(level="WARNING", force=True)
    yield


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Crea un directorio temporal para tests."""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def log_dir(temp_dir: Path) -> Path:
    """Crea un directorio temporal para logs de prueba."""
    log_path = temp_dir / "logs"
    log_path.mkdir(exist_ok=True)
    return log_path


@pytest.fixture
def alphabet() -> Alphabet:
    return DEFAULT_ALPHABET


@pytest.fixture
def digits_alphabet_file(temp_dir: Path) -> Path:
    """Alfabeto reducido: espacio, dígitos y guion."""
    path = temp_dir / "digits.txt"
    path.write_text(" 0123456789-\n", encoding="utf-8")
    return path


@pytest.fixture
def merge_config() -> MergeConfig:
    return MergeConfig(alpha=1.0, max_iterations=10)


@pytest.fixture
def toolkit_config() -> ToolkitConfig:
    return ToolkitConfig()


@pytest.fixture
def two_codes_scene() -> List[Instance]:
    return scenes.two_codes_scene()


@pytest.fixture
def uic_fragments() -> List[Instance]:
    return scenes.uic_fragments_scene()


@pytest.fixture
def time_scene() -> List[Instance]:
    return scenes.time_scene()
