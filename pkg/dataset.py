"""Transformación de anotaciones jerárquicas y muestreo de consultas.

Este módulo convierte anotaciones estilo HierText (párrafo, línea,
palabra) en anotaciones de texto estructurado con espacios, y genera las
consultas de entrenamiento a partir de ellas:

- Se conservan las palabras con al menos un carácter no alfabético.
- Cada palabra conservada se fusiona además con su vecina izquierda y
  con su vecina derecha de la misma línea.
- Cada consulta se genera a partir de una instancia: por carácter, su
  clase completa o, con probabilidad p_exact, el carácter exacto.
"""

import random
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from logger import app_logger
from config import (
    DEFAULT_DATASET_CONFIG,
    DEFAULT_PATTERN_CONFIG,
    DEFAULT_SAMPLING_CONFIG,
    DatasetConfig,
    SamplingConfig,
)
from geometry import GeometryError, Polygon, merge_polygons
from pattern import (
    DEFAULT_ALPHABET,
    LETTERS,
    SPACE,
    Alphabet,
    CharClass,
    LengthOverflow,
    MultiHotEncoding,
    QueryPattern,
    UnknownCharacter,
    canonical_pattern,
    class_members,
    class_of,
    encode_multi_hot,
    matches_multi,
)


class DatasetError(Exception):
    """Excepción base para errores de transformación del dataset."""

    pass


class MalformedHierarchy(DatasetError):
    """Anotación jerárquica incompleta o inválida."""

    pass


class CapacityExceeded(DatasetError, LengthOverflow):
    """El texto de la instancia es más largo que la capacidad M."""

    pass


class HierWord(BaseModel):
    """Palabra anotada: polígono y texto."""

    vertices: List[List[float]] = Field(description="Polígono [[x, y], ...]")
    text: str = Field(min_length=1)
    legible: bool = True
    vertical: bool = False


class HierLine(BaseModel):
    """Línea anotada: palabras en orden de lectura."""

    words: List[HierWord] = Field(default_factory=list)
    text: Optional[str] = None
    vertices: Optional[List[List[float]]] = None
    legible: bool = True


class HierParagraph(BaseModel):
    """Párrafo anotado: líneas en orden de lectura.

    Un párrafo ilegible se descarta entero al construir el dataset.
    """

    lines: List[HierLine] = Field(default_factory=list)
    vertices: Optional[List[List[float]]] = None
    legible: bool = True


class HierImage(BaseModel):
    """Anotaciones de una imagen, identificada por ``image_id``."""

    image_id: str
    paragraphs: List[HierParagraph] = Field(default_factory=list)


class HierAnnotation(BaseModel):
    """Archivo HierText: imágenes, párrafos, líneas y palabras."""

    annotations: List[HierImage] = Field(default_factory=list)


class Origin(str, Enum):
    """Procedencia de una instancia estructurada."""

    SINGLE = "single"
    LEFT_MERGE = "left-merge"
    RIGHT_MERGE = "right-merge"


def is_non_alphabetical(char: str) -> bool:
    return char not in LETTERS


class StructuredInstance(BaseModel):
    """Instancia de texto estructurado con, como mucho, un espacio."""

    model_config = ConfigDict(frozen=True)

    id: str
    polygon: Polygon
    text: str = Field(min_length=1)
    origin: Origin = Origin.SINGLE

    @field_validator("text")
    @classmethod
    def validate_text(cls, v):
        """Valida el carácter no alfabético obligatorio y el máximo de un espacio."""
        if not any(is_non_alphabetical(c) and c != SPACE for c in v):
            raise ValueError(f"Texto sin caracteres no alfabéticos: {v!r}")
        if v.count(SPACE) > 1:
            raise ValueError(f"Texto con más de un espacio: {v!r}")
        return v


class StructuredAnnotation(BaseModel):
    """Instancias estructuradas de una imagen."""

    model_config = ConfigDict(frozen=True)

    image_id: str
    instances: Tuple[StructuredInstance, ...] = ()


class SampledQuery(BaseModel):
    """Consulta de entrenamiento generada a partir de una instancia."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pattern: str = Field(description="Patrón canónico")
    encoding: MultiHotEncoding
    image_id: str
    instance_id: str
    positive_ids: Tuple[str, ...]
    seed: int
    p_exact: float = Field(ge=0.0, le=1.0)


def _word_polygon(word: HierWord, where: str) -> Polygon:
    try:
        return Polygon.from_points(word.vertices)
    except (ValidationError, IndexError, TypeError) as e:
        raise MalformedHierarchy(f"Polígono inválido en {where}: {e}") from e


def _merge(left: HierWord, right: HierWord, where: str) -> Tuple[Polygon, str]:
    try:
        polygon = merge_polygons(_word_polygon(left, where), _word_polygon(right, where))
    except GeometryError as e:
        raise MalformedHierarchy(f"Fusión degenerada en {where}: {e}") from e
    return polygon, f"{left.text}{SPACE}{right.text}"


def build_structured(
    image: HierImage, config: Optional[DatasetConfig] = None
) -> StructuredAnnotation:
    """Construye las instancias estructuradas de una imagen.

    Por cada palabra con al menos un carácter no alfabético se emite la
    propia palabra y, si existen en la misma línea, la fusión con su
    vecina izquierda y con su vecina derecha.

    Args:
        image: Imagen anotada jerárquicamente
        config: Configuración del dataset. Si es None, usa la configuración por defecto.

    Returns:
        StructuredAnnotation de la imagen

    Raises:
        MalformedHierarchy: Línea vacía, polígono ausente o inválido
    """
    config = config or DEFAULT_DATASET_CONFIG
    logger = app_logger.get_logger()
    instances: List[StructuredInstance] = []

    for p, paragraph in enumerate(image.paragraphs):
        for n, line in enumerate(paragraph.lines):
            prefix = f"{image.image_id}/p{p}/l{n}"
            if not line.words:
                raise MalformedHierarchy(f"Línea sin palabras en {prefix}")

            words = line.words
            usable = [not (config.skip_illegible and not w.legible) for w in words]
            for w, word in enumerate(words):
                word_id = f"{prefix}/w{w}"
                if SPACE in word.text:
                    raise MalformedHierarchy(f"Palabra con espacios en {word_id}")
                polygon = _word_polygon(word, word_id)
                if not usable[w] or not any(is_non_alphabetical(c) for c in word.text):
                    continue

                instances.append(
                    StructuredInstance(id=word_id, polygon=polygon, text=word.text)
                )
                if w > 0 and usable[w - 1]:
                    merged, text = _merge(words[w - 1], word, word_id)
                    instances.append(
                        StructuredInstance(
                            id=f"{prefix}/w{w - 1}+w{w}",
                            polygon=merged,
                            text=text,
                            origin=Origin.LEFT_MERGE,
                        )
                    )
                if w + 1 < len(words) and usable[w + 1]:
                    merged, text = _merge(word, words[w + 1], word_id)
                    instances.append(
                        StructuredInstance(
                            id=f"{prefix}/w{w}+w{w + 1}",
                            polygon=merged,
                            text=text,
                            origin=Origin.RIGHT_MERGE,
                        )
                    )

    logger.debug(f"Imagen {image.image_id}: {len(instances)} instancias estructuradas")
    return StructuredAnnotation(image_id=image.image_id, instances=tuple(instances))


def build_dataset(
    annotation: HierAnnotation, config: Optional[DatasetConfig] = None
) -> List[StructuredAnnotation]:
    """Transforma todas las imágenes, ordenadas por id."""
    result = [build_structured(image, config) for image in annotation.annotations]
    result.sort(key=lambda a: a.image_id)
    total = sum(len(a.instances) for a in result)
    app_logger.get_logger().info(
        f"Dataset estructurado: {len(result)} imágenes, {total} instancias"
    )
    return result


def _position_set(char: str, exact: bool, alphabet: Alphabet) -> frozenset:
    char_class = class_of(char, alphabet)
    if exact or char_class is CharClass.SPECIAL:
        return frozenset(char)
    return class_members(char_class, alphabet)


def sample_query(
    instance: StructuredInstance,
    candidates: Sequence[StructuredInstance],
    p_exact: float,
    seed: int,
    image_id: str = "",
    alphabet: Optional[Alphabet] = None,
    capacity: Optional[int] = None,
) -> SampledQuery:
    """Genera la consulta de una instancia y lista sus positivos.

    Para cada carácter se sortea si se fuerza el carácter exacto
    (probabilidad p_exact); si no, la posición admite toda su clase. Los
    caracteres especiales siempre se fuerzan.

    Args:
        instance: Instancia semilla
        candidates: Instancias de la misma imagen (posibles positivos)
        p_exact: Probabilidad de forzar el carácter exacto
        seed: Semilla de esta consulta
        image_id: Imagen de origen
        alphabet: Alfabeto. Si es None, usa el ASCII imprimible.
        capacity: Longitud máxima M. Si es None, usa la configuración por defecto.

    Returns:
        SampledQuery con el patrón canónico y los ids positivos

    Raises:
        CapacityExceeded: Si el texto supera M caracteres
        UnknownCharacter: Si el texto tiene caracteres fuera del alfabeto
    """
    if not 0.0 <= p_exact <= 1.0:
        raise ValueError(f"p_exact fuera de [0, 1]: {p_exact}")
    alphabet = alphabet or DEFAULT_ALPHABET
    capacity = capacity or DEFAULT_PATTERN_CONFIG.capacity
    if len(instance.text) > capacity:
        raise CapacityExceeded(
            f"La instancia {instance.id} tiene {len(instance.text)} caracteres (M={capacity})"
        )

    rng = random.Random(seed)
    positions = tuple(
        _position_set(char, rng.random() < p_exact, alphabet) for char in instance.text
    )
    pattern = QueryPattern(
        positions=positions,
        source=canonical_pattern(positions, alphabet),
        alphabet=alphabet,
    )
    encoding = encode_multi_hot(pattern, capacity)

    positives: List[str] = []
    for candidate in candidates:
        try:
            if matches_multi(encoding, candidate.text) and candidate.id not in positives:
                positives.append(candidate.id)
        except UnknownCharacter:
            continue
    if instance.id not in positives:
        positives.insert(0, instance.id)

    return SampledQuery(
        pattern=pattern.source,
        encoding=encoding,
        image_id=image_id,
        instance_id=instance.id,
        positive_ids=tuple(positives),
        seed=seed,
        p_exact=p_exact,
    )


def sample_queries(
    annotations: Sequence[StructuredAnnotation],
    config: Optional[SamplingConfig] = None,
    alphabet: Optional[Alphabet] = None,
    capacity: Optional[int] = None,
) -> List[SampledQuery]:
    """Genera ``count`` consultas de forma determinista a partir de la semilla maestra.

    Cada consulta sortea una imagen, una de sus instancias y una semilla
    propia, como hace el cargador de datos al muestrear una imagen.
    """
    config = config or DEFAULT_SAMPLING_CONFIG
    logger = app_logger.get_logger()
    images = sorted((a for a in annotations if a.instances), key=lambda a: a.image_id)
    if not images:
        logger.warning("No hay instancias estructuradas para muestrear consultas")
        return []

    master = random.Random(config.seed)
    queries: List[SampledQuery] = []
    skipped = 0
    for _ in range(config.count):
        image = images[master.randrange(len(images))]
        instance = image.instances[master.randrange(len(image.instances))]
        query_seed = master.randrange(2**32)
        try:
            queries.append(
                sample_query(
                    instance,
                    image.instances,
                    config.p_exact,
                    query_seed,
                    image_id=image.image_id,
                    alphabet=alphabet,
                    capacity=capacity,
                )
            )
        except (CapacityExceeded, UnknownCharacter) as e:
            skipped += 1
            logger.warning(f"Consulta descartada para {instance.id}: {e}")

    logger.info(f"Generadas {len(queries)} consultas ({skipped} descartadas)")
    return queries
