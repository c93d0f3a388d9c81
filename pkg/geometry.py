"""Geometría de polígonos para post-procesado y evaluación.

Este módulo representa los polígonos de las instancias y ofrece las
operaciones que necesitan el resto de módulos: IoU exacto por recorte de
polígonos (shapely), distancia horizontal entre instancias de una misma
línea y fusión de polígonos por envolvente convexa.
"""

import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from shapely.geometry import LinearRing, MultiPoint
from shapely.geometry import Polygon as ShapelyPolygon

from logger import app_logger


Point = Tuple[float, float]

# Solape vertical mínimo, relativo a la caja más baja, para considerar
# que dos instancias están en la misma línea
MIN_VERTICAL_OVERLAP = 0.5


class GeometryError(Exception):
    """Excepción base para errores geométricos."""

    pass


class DegenerateGeometry(GeometryError):
    """El resultado geométrico colapsa por debajo de 3 vértices o área nula."""

    pass


class BBox(BaseModel):
    """Caja alineada con los ejes, en píxeles."""

    model_config = ConfigDict(frozen=True)

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @model_validator(mode="after")
    def validate_bounds(self):
        """Valida que los mínimos no superen a los máximos."""
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"Caja inválida: {self}")
        return self

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height


class Polygon(BaseModel):
    """Polígono de una instancia: vértices ordenados en píxeles.

    La orientación se normaliza a antihoraria al construirlo.
    """

    model_config = ConfigDict(frozen=True)

    vertices: Tuple[Point, ...] = Field(description="Vértices [(x, y), ...]")

    @field_validator("vertices")
    @classmethod
    def normalize_vertices(cls, v):
        """Valida el número de vértices y coordenadas, y orienta en sentido antihorario."""
        if len(v) < 3:
            raise ValueError(f"Un polígono necesita al menos 3 vértices, tiene {len(v)}")
        for x, y in v:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"Coordenada no finita: ({x}, {y})")
        vertices = tuple((float(x), float(y)) for x, y in v)
        if not LinearRing(vertices).is_ccw:
            vertices = tuple(reversed(vertices))
        return vertices

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]]) -> "Polygon":
        """Construye un polígono desde una lista [[x, y], ...]."""
        return cls(vertices=tuple((p[0], p[1]) for p in points))

    @classmethod
    def from_bbox(cls, x_min: float, y_min: float, x_max: float, y_max: float) -> "Polygon":
        """Rectángulo alineado con los ejes, desde la esquina superior izquierda.

        Args:
            x_min: Borde izquierdo
            y_min: Borde superior
            x_max: Borde derecho
            y_max: Borde inferior

        Returns:
            Polígono de cuatro vértices
        """
        return cls(vertices=((x_min, y_min), (x_max, y_min), (x_max, y_max), (x_min, y_max)))

    def to_shapely(self) -> ShapelyPolygon:
        """Polígono equivalente de shapely, sin validar."""
        return ShapelyPolygon(self.vertices)

    def to_json(self) -> List[List[float]]:
        """Vértices como lista [[x, y], ...] para serializar."""
        return [[x, y] for x, y in self.vertices]

    @property
    def bbox(self) -> BBox:
        xs = [x for x, _ in self.vertices]
        ys = [y for _, y in self.vertices]
        return BBox(x_min=min(xs), y_min=min(ys), x_max=max(xs), y_max=max(ys))

    @property
    def area(self) -> float:
        return self.to_shapely().area

    @property
    def is_simple(self) -> bool:
        return self.to_shapely().is_valid

    @property
    def centroid(self) -> Point:
        """Centroide del área; si el polígono es degenerado, media de vértices."""
        shape = self.to_shapely()
        if shape.is_valid and shape.area > 0:
            return (shape.centroid.x, shape.centroid.y)
        xs = [x for x, _ in self.vertices]
        ys = [y for _, y in self.vertices]
        return (sum(xs) / len(xs), sum(ys) / len(ys))


class IoUResult(NamedTuple):
    """Valor de IoU y si se calculó con el recurso de cajas."""

    value: float
    bbox_fallback: bool = False


def bbox_iou(a: BBox, b: BBox) -> float:
    """IoU entre dos cajas alineadas con los ejes."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0.0
    intersection = w * h
    union = a.area + b.area - intersection
    if union <= 0:
        return 0.0
    return intersection / union


def compute_iou(a: Polygon, b: Polygon) -> IoUResult:
    """Calcula el IoU exacto entre dos polígonos.

    Si alguno no es simple (auto-intersección), se usa el IoU de sus cajas
    y se marca el resultado. Un polígono de área nula o con todos sus
    vértices alineados da IoU 0.

    Args:
        a: Primer polígono
        b: Segundo polígono

    Returns:
        IoUResult con el valor en [0, 1]
    """
    shape_a, shape_b = a.to_shapely(), b.to_shapely()
    # Vértices colineales
    if shape_a.convex_hull.area <= 0 or shape_b.convex_hull.area <= 0:
        return IoUResult(0.0)
    if not (shape_a.is_valid and shape_b.is_valid):
        app_logger.get_logger().warning(
            "Polígono no simple en el cálculo de IoU, usando cajas envolventes"
        )
        return IoUResult(bbox_iou(a.bbox, b.bbox), bbox_fallback=True)

    if shape_a.area <= 0 or shape_b.area <= 0:
        return IoUResult(0.0)

    intersection = shape_a.intersection(shape_b).area
    union = shape_a.area + shape_b.area - intersection
    if union <= 0:
        return IoUResult(0.0)
    return IoUResult(min(1.0, max(0.0, intersection / union)))


def iou(a: Polygon, b: Polygon) -> float:
    """Intersección sobre unión de dos polígonos, en [0, 1]."""
    return compute_iou(a, b).value


def gap_distance(a: Polygon, b: Polygon) -> Optional[float]:
    """Distancia horizontal entre las cajas de dos instancias de una misma línea.

    Args:
        a: Primer polígono
        b: Segundo polígono

    Returns:
        Hueco horizontal en píxeles (0 si se solapan), o None si las cajas
        no comparten al menos la mitad de la altura de la más baja
    """
    box_a, box_b = a.bbox, b.bbox
    shorter = min(box_a.height, box_b.height)
    overlap = min(box_a.y_max, box_b.y_max) - max(box_a.y_min, box_b.y_min)
    if shorter <= 0 or overlap < MIN_VERTICAL_OVERLAP * shorter:
        return None
    return max(0.0, max(box_a.x_min, box_b.x_min) - min(box_a.x_max, box_b.x_max))


def merge_polygons(a: Polygon, b: Polygon) -> Polygon:
    """Fusiona dos polígonos en la envolvente convexa de todos sus vértices.

    Raises:
        DegenerateGeometry: Si la envolvente tiene menos de 3 vértices
    """
    hull = MultiPoint(list(a.vertices) + list(b.vertices)).convex_hull
    if not isinstance(hull, ShapelyPolygon) or hull.area <= 0:
        raise DegenerateGeometry(f"La envolvente convexa es degenerada: {hull.geom_type}")
    # El anillo exterior repite el primer vértice al final
    return Polygon(vertices=tuple(hull.exterior.coords)[:-1])
