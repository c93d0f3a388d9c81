"""Modelos de configuración con validación Pydantic.

Este módulo define las configuraciones del kit de spotting de texto
estructurado utilizando Pydantic para validación robusta: capacidad de
los patrones, fusión de instancias, muestreo de consultas y protocolo
de evaluación.
"""

from pydantic import BaseModel, ConfigDict, Field, field_validator
from typing import Optional, Mapping
from pathlib import Path
from enum import Enum
import os


LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")

ENV_PREFIX = "KDX_SPOT_"


class JoinerMode(str, Enum):
    """Cómo se unen las transcripciones de dos instancias fusionadas."""

    AUTO = "auto"
    SPACE = "space"
    NONE = "none"


class EditDistanceMode(str, Enum):
    """Base sobre la que se promedia la distancia de edición."""

    MATCHED = "matched"
    PENALIZED = "penalized"


class PatternConfig(BaseModel):
    """Configuración del compilador de patrones.

    Define la longitud máxima de reconocimiento M y el alfabeto sobre el
    que se construyen las codificaciones.
    """

    model_config = ConfigDict(frozen=True)

    capacity: int = Field(
        default=25,
        ge=1,
        le=512,
        description="Longitud máxima de reconocimiento M",
    )
    alphabet_file: Optional[Path] = Field(
        default=None,
        description="Archivo de alfabeto. Si es None, ASCII imprimible (95 caracteres)",
    )

    @field_validator("alphabet_file")
    @classmethod
    def validate_alphabet_file(cls, v):
        """Valida que el archivo de alfabeto exista si se especifica."""
        if v is not None and not Path(v).is_file():
            raise ValueError(f"Archivo de alfabeto no encontrado: {v}")
        return v


class MergeConfig(BaseModel):
    """Configuración de la fusión de instancias en post-procesado.

    El umbral de distancia es tau = alpha x altura media de las cajas
    del par candidato.
    """

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(
        default=1.0,
        gt=0,
        description="Multiplicador del umbral de distancia",
    )
    max_iterations: int = Field(
        default=100,
        ge=1,
        description="Máximo de iteraciones de la estrategia iterativa",
    )
    freeze_matched: bool = Field(
        default=True,
        description="Las instancias que ya coinciden no se vuelven a fusionar",
    )
    joiner: JoinerMode = Field(
        default=JoinerMode.AUTO,
        description="Separador entre transcripciones fusionadas",
    )


class SamplingConfig(BaseModel):
    """Configuración del muestreo de consultas de entrenamiento."""

    model_config = ConfigDict(frozen=True)

    p_exact: float = Field(
        default=0.2,
        ge=0.0,
        le=1.0,
        description="Probabilidad de forzar el carácter exacto en una posición",
    )
    count: int = Field(default=100, ge=1, description="Número de consultas a generar")
    seed: int = Field(default=0, ge=0, description="Semilla maestra del muestreo")


class EvaluationConfig(BaseModel):
    """Configuración del protocolo de evaluación."""

    model_config = ConfigDict(frozen=True)

    iou_threshold: float = Field(
        default=0.5,
        gt=0.0,
        lt=1.0,
        description="Umbral de IoU (estricto) para emparejar predicción y ground truth",
    )
    edit_distance_mode: EditDistanceMode = Field(
        default=EditDistanceMode.MATCHED,
        description="Promediar la distancia de edición solo sobre pares emparejados o penalizar",
    )
    by_category: bool = Field(
        default=False,
        description="Desglosar métricas por categoría de código",
    )


class DatasetConfig(BaseModel):
    """Configuración de la transformación de anotaciones jerárquicas."""

    model_config = ConfigDict(frozen=True)

    skip_illegible: bool = Field(
        default=True,
        description="Descartar palabras marcadas como ilegibles",
    )


class ToolkitConfig(BaseModel):
    """Configuración principal del kit de spotting estructurado.

    Esta clase centraliza toda la configuración usando modelos pydantic
    para validación robusta.
    """

    model_config = ConfigDict(frozen=True)

    pattern: PatternConfig = Field(default_factory=PatternConfig)
    merge: MergeConfig = Field(default_factory=MergeConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    log_level: str = Field(default="WARNING", description="Nivel de logging de consola")
    log_dir: Optional[Path] = Field(
        default=None,
        description="Directorio para archivos de log (opcional)",
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        """Valida que el nivel de logging sea conocido por loguru."""
        level = str(v).upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"Nivel de logging no válido: {v}")
        return level

    @classmethod
    def from_env(cls, environ: Optional[Mapping[str, str]] = None) -> "ToolkitConfig":
        """Construye la configuración a partir de variables de entorno.

        Args:
            environ: Mapa de variables. Si es None, usa os.environ.

        Returns:
            ToolkitConfig con los valores del entorno aplicados
        """
        env = os.environ if environ is None else environ
        pattern_kwargs = {}
        if env.get(f"{ENV_PREFIX}CAPACITY"):
            pattern_kwargs["capacity"] = env[f"{ENV_PREFIX}CAPACITY"]
        if env.get(f"{ENV_PREFIX}ALPHABET"):
            pattern_kwargs["alphabet_file"] = Path(env[f"{ENV_PREFIX}ALPHABET"])

        kwargs = {"pattern": PatternConfig(**pattern_kwargs)}
        if env.get(f"{ENV_PREFIX}LOG_LEVEL"):
            kwargs["log_level"] = env[f"{ENV_PREFIX}LOG_LEVEL"]
        if env.get(f"{ENV_PREFIX}LOG_DIR"):
            kwargs["log_dir"] = Path(env[f"{ENV_PREFIX}LOG_DIR"])
        return cls(**kwargs)


# Configuración por defecto del kit
DEFAULT_PATTERN_CONFIG = PatternConfig()
DEFAULT_MERGE_CONFIG = MergeConfig()
DEFAULT_SAMPLING_CONFIG = SamplingConfig()
DEFAULT_EVALUATION_CONFIG = EvaluationConfig()
DEFAULT_DATASET_CONFIG = DatasetConfig()
DEFAULT_TOOLKIT_CONFIG = ToolkitConfig()
