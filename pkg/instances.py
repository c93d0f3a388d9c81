"""Instancias detectadas y estrategias de post-procesado.

Este módulo implementa el patrón Strategy para adaptar la salida de un
detector genérico (a nivel de palabra) a consultas estructuradas que
pueden contener espacios:

- ValidationStrategy: consultas con 0 o 1 espacio; se divide la consulta
  en dos sub-consultas y se fusionan pares cercanos que las satisfacen.
- IterativeStrategy: consultas arbitrarias; se fusionan iterativamente
  los pares más cercanos y se congelan las instancias que coinciden.
"""

from abc import ABC, abstractmethod
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from logger import app_logger
from config import DEFAULT_MERGE_CONFIG, JoinerMode, MergeConfig
from geometry import Polygon, gap_distance, merge_polygons
from pattern import (
    SPACE,
    MultiHotEncoding,
    QueryPattern,
    UnknownCharacter,
    encode_multi_hot,
    matches_multi,
)


class PostProcessingError(Exception):
    """Excepción base para errores de post-procesado."""

    pass


class NoSpace(PostProcessingError):
    """La consulta no contiene ninguna posición de espacio."""

    pass


class MultipleSpaces(PostProcessingError):
    """La consulta contiene más de una posición de espacio."""

    pass


class Instance(BaseModel):
    """Una detección: polígono, transcripción y confianza.

    ``merged_from`` guarda los ids de las detecciones originales que
    componen la instancia.
    """

    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1, description="Identificador único por imagen")
    polygon: Polygon
    text: str = Field(description="Transcripción")
    score: float = Field(default=1.0, ge=0.0, le=1.0, description="Confianza")
    merged_from: Tuple[str, ...] = Field(default=(), description="Ids de origen")

    @model_validator(mode="before")
    @classmethod
    def default_provenance(cls, data):
        """Una instancia sin procedencia explícita procede de sí misma."""
        if isinstance(data, dict) and not data.get("merged_from") and data.get("id"):
            data = {**data, "merged_from": (data["id"],)}
        return data


def _encoding_for(pattern: QueryPattern) -> MultiHotEncoding:
    return encode_multi_hot(pattern, capacity=max(pattern.length, 1))


def _matches(encoding: MultiHotEncoding, instance: Instance) -> bool:
    # Una transcripción con caracteres fuera del alfabeto no coincide
    try:
        return matches_multi(encoding, instance.text)
    except UnknownCharacter:
        app_logger.get_logger().debug(
            f"Instancia {instance.id} con caracteres fuera del alfabeto: {instance.text!r}"
        )
        return False


def filter_matching(instances: Sequence[Instance], pattern: QueryPattern) -> List[Instance]:
    """Conserva exactamente las instancias cuyo texto coincide con el patrón.

    Args:
        instances: Instancias detectadas
        pattern: Patrón analizado

    Returns:
        Instancias coincidentes, en el orden de entrada
    """
    encoding = _encoding_for(pattern)
    return [instance for instance in instances if _matches(encoding, instance)]


def split_query_at_space(pattern: QueryPattern) -> Tuple[QueryPattern, QueryPattern]:
    """Divide una consulta con un único espacio en dos sub-consultas.

    Raises:
        NoSpace: Si la consulta no tiene posición de espacio
        MultipleSpaces: Si tiene más de una
    """
    spaces = pattern.space_positions()
    if not spaces:
        raise NoSpace(f"La consulta {pattern.source!r} no contiene espacios")
    if len(spaces) > 1:
        raise MultipleSpaces(
            f"La consulta {pattern.source!r} contiene {len(spaces)} espacios (máximo 1)"
        )
    split = spaces[0]
    if split == 0 or split == pattern.length - 1:
        raise NoSpace(f"El espacio de {pattern.source!r} no separa dos sub-consultas")
    return pattern.sub_pattern(0, split), pattern.sub_pattern(split + 1, pattern.length)


def merge_threshold(a: Instance, b: Instance, config: MergeConfig) -> float:
    """Umbral tau = alpha x altura media de las cajas del par."""
    return config.alpha * (a.polygon.bbox.height + b.polygon.bbox.height) / 2.0


def order_pair(a: Instance, b: Instance) -> Tuple[Instance, Instance]:
    """Ordena un par de izquierda a derecha por el centroide (y luego arriba-abajo)."""
    key_a = (a.polygon.centroid[0], a.polygon.centroid[1], a.id)
    key_b = (b.polygon.centroid[0], b.polygon.centroid[1], b.id)
    return (a, b) if key_a <= key_b else (b, a)


def merge_instances(left: Instance, right: Instance, joiner: str = SPACE) -> Instance:
    """Fusiona dos instancias: envolvente convexa, textos unidos y confianza media."""
    return Instance(
        id=f"{left.id}+{right.id}",
        polygon=merge_polygons(left.polygon, right.polygon),
        text=f"{left.text}{joiner}{right.text}",
        score=(left.score + right.score) / 2.0,
        merged_from=left.merged_from + right.merged_from,
    )


def _pair_key(left: Instance, right: Instance, gap: float) -> tuple:
    lx, ly = left.polygon.centroid
    rx, ry = right.polygon.centroid
    return (gap, lx, ly, rx, ry, left.id, right.id)


class PostProcessingStrategy(ABC):
    """Estrategia abstracta de post-procesado.

    Define la interfaz común para adaptar detecciones a una consulta.
    """

    name: str = ""

    def __init__(self, config: Optional[MergeConfig] = None):
        self.config = config or DEFAULT_MERGE_CONFIG
        self.logger = app_logger.get_logger()

    @abstractmethod
    def process(self, instances: Sequence[Instance], pattern: QueryPattern) -> List[Instance]:
        """Aplica la estrategia.

        Args:
            instances: Detecciones de una imagen
            pattern: Consulta analizada

        Returns:
            Instancias que satisfacen la consulta completa
        """
        pass


class ValidationStrategy(PostProcessingStrategy):
    """Estrategia para consultas con 0 o 1 espacio.

    Sin espacio, solo filtra. Con un espacio, filtra por las sub-consultas
    y fusiona pares (izquierda, derecha) más cercanos que el umbral.
    """

    name = "validation"

    def process(self, instances: Sequence[Instance], pattern: QueryPattern) -> List[Instance]:
        spaces = pattern.space_positions()
        if not spaces:
            kept = filter_matching(instances, pattern)
            self.logger.debug(f"Consulta sin espacio: {len(kept)}/{len(instances)} coinciden")
            return kept

        left_pattern, right_pattern = split_query_at_space(pattern)

        # Las que ya contienen el espacio y coinciden pasan sin fusionar
        direct = filter_matching(instances, pattern)
        used = {id(instance) for instance in direct}
        rest = [instance for instance in instances if id(instance) not in used]
        left_matches = filter_matching(rest, left_pattern)
        right_matches = filter_matching(rest, right_pattern)

        candidates = []
        for left in left_matches:
            for right in right_matches:
                if left is right:
                    continue
                if order_pair(left, right)[0] is not left:
                    continue
                gap = gap_distance(left.polygon, right.polygon)
                if gap is None or gap > merge_threshold(left, right, self.config):
                    continue
                candidates.append((_pair_key(left, right, gap), left, right))

        merged: List[Instance] = []
        for _, left, right in sorted(candidates, key=lambda item: item[0]):
            if id(left) in used or id(right) in used:
                continue
            used.update((id(left), id(right)))
            merged.append(merge_instances(left, right, SPACE))

        result = direct + filter_matching(merged, pattern)
        self.logger.debug(
            f"Estrategia de validación: {len(direct)} directas, {len(merged)} fusionadas"
        )
        return result


class IterativeStrategy(PostProcessingStrategy):
    """Estrategia iterativa para consultas con cualquier número de espacios.

    En la ronda 0 se congelan las instancias que ya coinciden. En cada
    iteración se fusiona el par no congelado más cercano bajo el umbral y,
    si el resultado coincide, se congela. Devuelve solo las congeladas.
    """

    name = "iterative"

    def _joiner(self, pattern: QueryPattern) -> str:
        if self.config.joiner is JoinerMode.SPACE:
            return SPACE
        if self.config.joiner is JoinerMode.NONE:
            return ""
        return SPACE if pattern.space_positions() else ""

    def _closest_pair(self, pool: Sequence[Instance]) -> Optional[Tuple[Instance, Instance]]:
        best: Optional[tuple] = None
        for i, first in enumerate(pool):
            for second in pool[i + 1 :]:
                left, right = order_pair(first, second)
                gap = gap_distance(left.polygon, right.polygon)
                if gap is None or gap > merge_threshold(left, right, self.config):
                    continue
                key = _pair_key(left, right, gap)
                if best is None or key < best[0]:
                    best = (key, left, right)
        if best is None:
            return None
        return best[1], best[2]

    def process(self, instances: Sequence[Instance], pattern: QueryPattern) -> List[Instance]:
        encoding = _encoding_for(pattern)
        joiner = self._joiner(pattern)

        frozen: List[Instance] = []
        pool: List[Instance] = []
        for instance in instances:
            if _matches(encoding, instance):
                frozen.append(instance)
            else:
                pool.append(instance)
        if not self.config.freeze_matched:
            pool = list(instances)
            frozen = []

        iterations = 0
        while iterations < self.config.max_iterations:
            pair = self._closest_pair(pool)
            if pair is None:
                break
            left, right = pair
            merged = merge_instances(left, right, joiner)
            pool = [p for p in pool if p is not left and p is not right]
            iterations += 1

            if _matches(encoding, merged):
                self.logger.debug(f"Iteración {iterations}: {merged.text!r} coincide")
                if self.config.freeze_matched:
                    frozen.append(merged)
                    continue
            pool.append(merged)

        if not self.config.freeze_matched:
            frozen = [p for p in pool if _matches(encoding, p)]

        self.logger.debug(
            f"Estrategia iterativa: {iterations} fusiones, {len(frozen)} instancias coinciden"
        )
        return frozen


class PostProcessor:
    """Gestor de estrategias de post-procesado.

    Selecciona la estrategia por nombre y la aplica imagen a imagen.
    """

    STRATEGIES: Dict[str, type] = {
        ValidationStrategy.name: ValidationStrategy,
        IterativeStrategy.name: IterativeStrategy,
    }

    def __init__(self, strategy: str = "validation", config: Optional[MergeConfig] = None):
        """Inicializa el gestor.

        Args:
            strategy: ``validation`` o ``iterative``
            config: Configuración de fusión. Si es None, usa la configuración por defecto.
        """
        if strategy not in self.STRATEGIES:
            raise ValueError(f"Estrategia desconocida: {strategy}")
        self.config = config or DEFAULT_MERGE_CONFIG
        self.logger = app_logger.get_logger()
        self._strategy: PostProcessingStrategy = self.STRATEGIES[strategy](self.config)

    @property
    def strategy_name(self) -> str:
        return self._strategy.name

    def process(self, instances: Sequence[Instance], pattern: QueryPattern) -> List[Instance]:
        return self._strategy.process(instances, pattern)


def postprocess_validation(
    instances: Sequence[Instance],
    pattern: QueryPattern,
    config: Optional[MergeConfig] = None,
) -> List[Instance]:
    """Estrategia de validación (consultas con 0 o 1 espacio)."""
    return ValidationStrategy(config).process(instances, pattern)


def postprocess_iterative(
    instances: Sequence[Instance],
    pattern: QueryPattern,
    config: Optional[MergeConfig] = None,
) -> List[Instance]:
    """Estrategia iterativa (cualquier consulta)."""
    return IterativeStrategy(config).process(instances, pattern)
