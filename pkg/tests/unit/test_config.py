"""Tests unitarios para modelos de configuración."""

import pytest
from pathlib import Path
from pydantic import ValidationError

from config import (
    DEFAULT_TOOLKIT_CONFIG,
    EditDistanceMode,
    EvaluationConfig,
    JoinerMode,
    MergeConfig,
    PatternConfig,
    SamplingConfig,
    ToolkitConfig,
)


class TestPatternConfig:
    """Tests para PatternConfig."""

    def test_default_values(self):
        """Test valores por defecto de PatternConfig."""
        config = PatternConfig()

        assert config.capacity == 25
        assert config.alphabet_file is None

    def test_capacity_validation(self):
        """Test validación de la capacidad M."""
        with pytest.raises(ValidationError):
            PatternConfig(capacity=0)

        with pytest.raises(ValidationError):
            PatternConfig(capacity=1000)

    def test_alphabet_file_exists(self, digits_alphabet_file):
        """Test archivo de alfabeto existente."""
        config = PatternConfig(alphabet_file=digits_alphabet_file)

        assert config.alphabet_file == digits_alphabet_file

    def test_alphabet_file_missing(self, temp_dir):
        """Test archivo de alfabeto inexistente."""
        with pytest.raises(ValidationError, match="Archivo de alfabeto no encontrado"):
            PatternConfig(alphabet_file=temp_dir / "missing.txt")

    def test_frozen(self):
        """Test que la configuración es inmutable."""
        config = PatternConfig()

        with pytest.raises(ValidationError):
            config.capacity = 10


class TestMergeConfig:
    """Tests para MergeConfig."""

    def test_default_values(self):
        """Test valores por defecto de MergeConfig."""
        config = MergeConfig()

        assert config.alpha == 1.0
        assert config.max_iterations == 100
        assert config.freeze_matched is True
        assert config.joiner is JoinerMode.AUTO

    def test_alpha_positive(self):
        """Test alpha debe ser positivo."""
        with pytest.raises(ValidationError):
            MergeConfig(alpha=0)

    def test_joiner_from_string(self):
        """Test modo de unión desde cadena."""
        assert MergeConfig(joiner="none").joiner is JoinerMode.NONE


class TestSamplingConfig:
    """Tests para SamplingConfig."""

    def test_probability_range(self):
        """Test p_exact fuera de [0, 1]."""
        with pytest.raises(ValidationError):
            SamplingConfig(p_exact=1.1)

        with pytest.raises(ValidationError):
            SamplingConfig(p_exact=-0.1)

    def test_count_positive(self):
        """Test número de consultas positivo."""
        with pytest.raises(ValidationError):
            SamplingConfig(count=0)


class TestEvaluationConfig:
    """Tests para EvaluationConfig."""

    def test_default_values(self):
        """Test valores por defecto de EvaluationConfig."""
        config = EvaluationConfig()

        assert config.iou_threshold == 0.5
        assert config.edit_distance_mode is EditDistanceMode.MATCHED
        assert config.by_category is False

    def test_threshold_range(self):
        """Test umbral fuera de (0, 1)."""
        with pytest.raises(ValidationError):
            EvaluationConfig(iou_threshold=1.0)


class TestToolkitConfig:
    """Tests para ToolkitConfig."""

    def test_default_values(self):
        """Test valores por defecto de ToolkitConfig."""
        assert DEFAULT_TOOLKIT_CONFIG.log_level == "WARNING"
        assert DEFAULT_TOOLKIT_CONFIG.log_dir is None
        assert DEFAULT_TOOLKIT_CONFIG.pattern.capacity == 25

    def test_log_level_normalized(self):
        """Test nivel de logging en minúsculas."""
        assert ToolkitConfig(log_level="debug").log_level == "DEBUG"

    def test_log_level_invalid(self):
        """Test nivel de logging desconocido."""
        with pytest.raises(ValidationError, match="Nivel de logging no válido"):
            ToolkitConfig(log_level="VERBOSE")

    def test_from_env_empty(self):
        """Test entorno sin variables del kit."""
        assert ToolkitConfig.from_env({}) == ToolkitConfig()

    def test_from_env(self, digits_alphabet_file, log_dir):
        """Test lectura de variables de entorno."""
        config = ToolkitConfig.from_env(
            {
                "KDX_SPOT_CAPACITY": "32",
                "KDX_SPOT_ALPHABET": str(digits_alphabet_file),
                "KDX_SPOT_LOG_LEVEL": "info",
                "KDX_SPOT_LOG_DIR": str(log_dir),
            }
        )

        assert config.pattern.capacity == 32
        assert config.pattern.alphabet_file == digits_alphabet_file
        assert config.log_level == "INFO"
        assert config.log_dir == log_dir

    def test_from_env_invalid_capacity(self):
        """Test capacidad no numérica en el entorno."""
        with pytest.raises(ValidationError):
            ToolkitConfig.from_env({"KDX_SPOT_CAPACITY": "many"})

    def test_from_env_ignores_other_variables(self):
        """Test que otras variables no afectan."""
        config = ToolkitConfig.from_env({"CAPACITY": "3", "HOME": str(Path.home())})

        assert config.pattern.capacity == 25
