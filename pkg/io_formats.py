"""Formatos de archivo del kit: esquemas, lectura y escritura JSON.

Todos los artefactos son JSON con un campo ``schema_version``. La salida
es determinista: claves ordenadas, sangría de 2 espacios, sin escapar
caracteres no ASCII y entradas ordenadas por id de imagen.
La ruta ``-`` representa stdin/stdout.
"""

import json
import sys
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple, Type, TypeVar, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from logger import app_logger
from geometry import Polygon
from instances import Instance
from dataset import (
    HierAnnotation,
    MalformedHierarchy,
    Origin,
    SampledQuery,
    StructuredAnnotation,
    StructuredInstance,
)


SCHEMA_VERSION = 1
STDIO = "-"

PathLike = Union[str, Path]
ModelT = TypeVar("ModelT", bound=BaseModel)


class InputFormatError(Exception):
    """Archivo de entrada ilegible o que no cumple su esquema."""

    pass


def _validate_polygon(v: List[List[float]]) -> List[List[float]]:
    if len(v) < 3:
        raise ValueError(f"Un polígono necesita al menos 3 vértices, tiene {len(v)}")
    if any(len(point) != 2 for point in v):
        raise ValueError("Cada vértice debe ser un par [x, y]")
    return v


class VersionedFile(BaseModel):
    """Base de los archivos con versión de esquema."""

    schema_version: int = Field(default=SCHEMA_VERSION, ge=1)

    @field_validator("schema_version")
    @classmethod
    def validate_schema_version(cls, v):
        """Rechaza versiones de esquema posteriores a la soportada."""
        if v > SCHEMA_VERSION:
            raise ValueError(f"Versión de esquema {v} no soportada (máximo {SCHEMA_VERSION})")
        return v


class InstanceRecord(BaseModel):
    """Detección serializada."""

    id: str = Field(min_length=1)
    polygon: List[List[float]]
    text: str
    score: float = Field(default=1.0, ge=0.0, le=1.0)

    @field_validator("polygon")
    @classmethod
    def validate_polygon(cls, v):
        return _validate_polygon(v)

    def to_instance(self) -> Instance:
        return Instance(
            id=self.id,
            polygon=Polygon.from_points(self.polygon),
            text=self.text,
            score=self.score,
        )

    @classmethod
    def from_instance(cls, instance: Instance) -> "InstanceRecord":
        return cls(
            id=instance.id,
            polygon=instance.polygon.to_json(),
            text=instance.text,
            score=instance.score,
        )


class DetectionsEntry(BaseModel):
    """Detecciones de una imagen, opcionalmente para una consulta y categoría."""

    image_id: str = Field(min_length=1)
    query: Optional[str] = None
    category: Optional[str] = None
    instances: List[InstanceRecord] = Field(default_factory=list)

    @field_validator("instances")
    @classmethod
    def validate_unique_ids(cls, v):
        """Valida que los ids de instancia sean únicos en la imagen."""
        ids = [record.id for record in v]
        duplicated = sorted({i for i in ids if ids.count(i) > 1})
        if duplicated:
            raise ValueError(f"Ids de instancia duplicados: {', '.join(duplicated)}")
        return v

    @property
    def key(self) -> Tuple[str, str]:
        """Unidad de evaluación (imagen, consulta)."""
        return (self.image_id, self.query or "")

    def to_instances(self) -> List[Instance]:
        try:
            return [record.to_instance() for record in self.instances]
        except ValidationError as e:
            raise InputFormatError(f"Instancia inválida en {self.image_id}: {e}") from e


class DetectionsFile(VersionedFile):
    """Archivo de detecciones (predicciones o ground truth)."""

    entries: List[DetectionsEntry] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_unique_keys(self):
        """Cada par (imagen, consulta) aparece una sola vez."""
        keys = [entry.key for entry in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("Entradas repetidas para el mismo par (imagen, consulta)")
        return self

    def sorted_entries(self) -> List[DetectionsEntry]:
        return sorted(self.entries, key=lambda entry: entry.key)


class StructuredInstanceRecord(BaseModel):
    id: str = Field(min_length=1)
    polygon: List[List[float]]
    text: str
    origin: Origin = Origin.SINGLE

    @field_validator("polygon")
    @classmethod
    def validate_polygon(cls, v):
        return _validate_polygon(v)


class StructuredAnnotationEntry(BaseModel):
    image_id: str = Field(min_length=1)
    instances: List[StructuredInstanceRecord] = Field(default_factory=list)


class StructuredAnnotationFile(VersionedFile):
    """Salida de la transformación del dataset."""

    annotations: List[StructuredAnnotationEntry] = Field(default_factory=list)

    @classmethod
    def from_annotations(
        cls, annotations: Sequence[StructuredAnnotation]
    ) -> "StructuredAnnotationFile":
        entries = [
            StructuredAnnotationEntry(
                image_id=annotation.image_id,
                instances=[
                    StructuredInstanceRecord(
                        id=instance.id,
                        polygon=instance.polygon.to_json(),
                        text=instance.text,
                        origin=instance.origin,
                    )
                    for instance in annotation.instances
                ],
            )
            for annotation in sorted(annotations, key=lambda a: a.image_id)
        ]
        return cls(annotations=entries)

    def to_annotations(self) -> List[StructuredAnnotation]:
        """Reconstruye las anotaciones validando cada instancia.

        Raises:
            InputFormatError: Si alguna instancia no cumple las restricciones
        """
        try:
            return [
                StructuredAnnotation(
                    image_id=entry.image_id,
                    instances=tuple(
                        StructuredInstance(
                            id=record.id,
                            polygon=Polygon.from_points(record.polygon),
                            text=record.text,
                            origin=record.origin,
                        )
                        for record in entry.instances
                    ),
                )
                for entry in self.annotations
            ]
        except ValidationError as e:
            raise InputFormatError(f"Anotación estructurada inválida: {e}") from e


class QueryEntry(BaseModel):
    """Consulta: patrón, categoría e imágenes a las que aplica."""

    pattern: str = Field(min_length=1)
    category: Optional[str] = None
    image_ids: Optional[List[str]] = None
    instance_id: Optional[str] = None
    positive_ids: Optional[List[str]] = None
    seed: Optional[int] = None
    p_exact: Optional[float] = Field(default=None, ge=0.0, le=1.0)


class QuerySetFile(VersionedFile):
    queries: List[QueryEntry] = Field(default_factory=list)

    @classmethod
    def from_sampled(cls, sampled: Sequence[SampledQuery]) -> "QuerySetFile":
        """Serializa consultas muestreadas, manteniendo su orden de generación."""
        return cls(
            queries=[
                QueryEntry(
                    pattern=query.pattern,
                    image_ids=[query.image_id],
                    instance_id=query.instance_id,
                    positive_ids=list(query.positive_ids),
                    seed=query.seed,
                    p_exact=query.p_exact,
                )
                for query in sampled
            ]
        )


def dumps(data: Any) -> str:
    """Serializa de forma canónica (byte a byte reproducible)."""
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json", exclude_none=True)
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def read_text(path: PathLike) -> str:
    """Lee un archivo de texto, o stdin si la ruta es ``-``.

    Raises:
        InputFormatError: Si el archivo no existe o no se puede leer
    """
    if str(path) == STDIO:
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise InputFormatError(f"No se puede leer {path}: {e}") from e


def read_json(path: PathLike) -> Any:
    """Lee un documento JSON de archivo o stdin.

    Raises:
        InputFormatError: Si el contenido no es JSON válido
    """
    content = read_text(path)
    try:
        return json.loads(content)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"JSON inválido en {path}: {e}") from e


def write_text(content: str, path: PathLike) -> None:
    if str(path) == STDIO:
        sys.stdout.write(content)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(content, encoding="utf-8")
    app_logger.get_logger().info(f"Escrito {target}")


def write_json(data: Any, path: PathLike) -> None:
    """Escribe JSON canónico en archivo o stdout."""
    write_text(dumps(data), path)


def load_model(path: PathLike, model: Type[ModelT]) -> ModelT:
    """Lee y valida un archivo contra un esquema pydantic.

    Raises:
        InputFormatError: Si el JSON es inválido o no cumple el esquema
    """
    data = read_json(path)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise InputFormatError(f"{path} no cumple el esquema {model.__name__}: {e}") from e


def load_detections(path: PathLike) -> DetectionsFile:
    detections = load_model(path, DetectionsFile)
    app_logger.get_logger().debug(f"{path}: {len(detections.entries)} entradas de detección")
    return detections


def load_query_set(path: PathLike) -> QuerySetFile:
    return load_model(path, QuerySetFile)


def load_structured(path: PathLike) -> List[StructuredAnnotation]:
    return load_model(path, StructuredAnnotationFile).to_annotations()


def load_hiertext(path: PathLike) -> HierAnnotation:
    """Lee un archivo HierText.

    Raises:
        InputFormatError: Si el contenido no es JSON válido
        MalformedHierarchy: Si falta algún nivel o campo de la jerarquía
    """
    data = read_json(path)
    try:
        return HierAnnotation.model_validate(data)
    except ValidationError as e:
        raise MalformedHierarchy(f"Anotación jerárquica inválida en {path}: {e}") from e


def load_strings(path: PathLike) -> List[str]:
    """Lee una cadena por línea; solo se eliminan los saltos de línea."""
    content = read_text(path)
    return content.splitlines()


def detections_entry(
    image_id: str,
    instances: Sequence[Instance],
    query: Optional[str] = None,
    category: Optional[str] = None,
) -> DetectionsEntry:
    return DetectionsEntry(
        image_id=image_id,
        query=query,
        category=category,
        instances=[InstanceRecord.from_instance(instance) for instance in instances],
    )
