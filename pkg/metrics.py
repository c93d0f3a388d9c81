"""Protocolo de evaluación: detección, extremo a extremo y distancia de edición.

Las predicciones se emparejan con el ground truth de forma voraz por
orden de confianza; un par cuenta si su IoU supera estrictamente el
umbral (0.5 por defecto). Un par es además acierto extremo a extremo si
las transcripciones son idénticas byte a byte.
"""

from collections import defaultdict
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import editdistance
from pydantic import BaseModel, ConfigDict, Field

from logger import app_logger
from config import DEFAULT_EVALUATION_CONFIG, EditDistanceMode, EvaluationConfig
from geometry import compute_iou
from instances import Instance
from io_formats import DetectionsEntry, DetectionsFile, detections_entry
from pattern import Alphabet, PatternError, format_query


UNCATEGORIZED = "uncategorized"


class MatchPair(BaseModel):
    """Par (predicción, ground truth) emparejado con IoU sobre el umbral."""

    model_config = ConfigDict(frozen=True)

    prediction_id: str = Field(description="Id de la predicción")
    gt_id: str = Field(description="Id de la instancia de ground truth")
    iou: float = Field(gt=0.0, le=1.0, description="IoU del par")


class MatchResult(BaseModel):
    """Emparejamiento uno a uno entre predicciones y ground truth."""

    model_config = ConfigDict(frozen=True)

    pairs: Tuple[MatchPair, ...] = ()
    unmatched_predictions: Tuple[str, ...] = ()
    unmatched_gts: Tuple[str, ...] = ()

    @property
    def num_predictions(self) -> int:
        return len(self.pairs) + len(self.unmatched_predictions)

    @property
    def num_gts(self) -> int:
        return len(self.pairs) + len(self.unmatched_gts)


def match_instances(
    predictions: Sequence[Instance],
    gts: Sequence[Instance],
    iou_threshold: Optional[float] = None,
) -> MatchResult:
    """Empareja predicciones y ground truth de una imagen.

    Las predicciones se recorren por confianza descendente (empates por
    id); cada una toma el ground truth libre de mayor IoU si supera
    estrictamente el umbral. Los empates de IoU se resuelven por el menor
    id de ground truth.

    Args:
        predictions: Instancias predichas
        gts: Instancias de ground truth
        iou_threshold: Umbral estricto. Si es None, usa la configuración por defecto.

    Returns:
        MatchResult con los pares y los no emparejados
    """
    threshold = DEFAULT_EVALUATION_CONFIG.iou_threshold if iou_threshold is None else iou_threshold
    free = sorted(gts, key=lambda gt: gt.id)
    pairs: List[MatchPair] = []
    unmatched: List[str] = []

    for prediction in sorted(predictions, key=lambda p: (-p.score, p.id)):
        best: Optional[Tuple[float, Instance]] = None
        for gt in free:
            value = compute_iou(prediction.polygon, gt.polygon).value
            if value > threshold and (best is None or value > best[0]):
                best = (value, gt)
        if best is None:
            unmatched.append(prediction.id)
            continue
        free.remove(best[1])
        pairs.append(MatchPair(prediction_id=prediction.id, gt_id=best[1].id, iou=best[0]))

    return MatchResult(
        pairs=tuple(pairs),
        unmatched_predictions=tuple(sorted(unmatched)),
        unmatched_gts=tuple(gt.id for gt in free),
    )


class PRF(BaseModel):
    """Precisión, exhaustividad y F-score.

    Con denominador nulo el valor se informa como 0 y se marca como
    indefinido.
    """

    model_config = ConfigDict(frozen=True)

    precision: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f_score: float = Field(ge=0.0, le=1.0)
    precision_undefined: bool = False
    recall_undefined: bool = False

    @classmethod
    def from_counts(cls, true_positives: int, num_predictions: int, num_gts: int) -> "PRF":
        precision = true_positives / num_predictions if num_predictions else 0.0
        recall = true_positives / num_gts if num_gts else 0.0
        total = precision + recall
        return cls(
            precision=precision,
            recall=recall,
            f_score=2 * precision * recall / total if total > 0 else 0.0,
            precision_undefined=num_predictions == 0,
            recall_undefined=num_gts == 0,
        )


def _by_id(instances: Sequence[Instance]) -> Dict[str, Instance]:
    return {instance.id: instance for instance in instances}


def detection_metrics(match: MatchResult) -> PRF:
    """Precisión, exhaustividad y F de detección.

    Args:
        match: Emparejamiento de una unidad de evaluación

    Returns:
        PRF con TP = pares emparejados
    """
    return PRF.from_counts(len(match.pairs), match.num_predictions, match.num_gts)


def e2e_true_positives(
    match: MatchResult, predictions: Sequence[Instance], gts: Sequence[Instance]
) -> int:
    """Pares emparejados cuya transcripción coincide exactamente."""
    preds, truths = _by_id(predictions), _by_id(gts)
    return sum(
        1 for pair in match.pairs if preds[pair.prediction_id].text == truths[pair.gt_id].text
    )


def e2e_metrics(
    match: MatchResult, predictions: Sequence[Instance], gts: Sequence[Instance]
) -> PRF:
    """Precisión, exhaustividad y F extremo a extremo.

    Args:
        match: Emparejamiento de una unidad de evaluación
        predictions: Predicciones emparejadas en ``match``
        gts: Ground truth emparejado en ``match``

    Returns:
        PRF con TP = pares con transcripción idéntica
    """
    return PRF.from_counts(
        e2e_true_positives(match, predictions, gts), match.num_predictions, match.num_gts
    )


def levenshtein(a: str, b: str) -> int:
    """Distancia de Levenshtein con costes unitarios."""
    return int(editdistance.eval(a, b))


def _edit_distance_terms(
    match: MatchResult,
    predictions: Sequence[Instance],
    gts: Sequence[Instance],
    mode: EditDistanceMode,
) -> Tuple[int, int]:
    preds, truths = _by_id(predictions), _by_id(gts)
    total = sum(
        levenshtein(preds[pair.prediction_id].text, truths[pair.gt_id].text)
        for pair in match.pairs
    )
    count = len(match.pairs)
    if mode is EditDistanceMode.PENALIZED:
        # Cada no emparejado cuesta su longitud completa
        total += sum(len(preds[i].text) for i in match.unmatched_predictions)
        total += sum(len(truths[i].text) for i in match.unmatched_gts)
        count += len(match.unmatched_predictions) + len(match.unmatched_gts)
    return total, count


def avg_edit_distance(
    match: MatchResult,
    predictions: Sequence[Instance],
    gts: Sequence[Instance],
    mode: EditDistanceMode = EditDistanceMode.MATCHED,
) -> Optional[float]:
    """Distancia de edición media entre transcripciones emparejadas.

    Returns:
        Media, o None si no hay ningún término que promediar
    """
    total, count = _edit_distance_terms(match, predictions, gts, mode)
    if count == 0:
        return None
    return total / count


class EntryCounts(BaseModel):
    """Contadores acumulables de una unidad de evaluación."""

    model_config = ConfigDict(frozen=True)

    num_predictions: int = 0
    num_gts: int = 0
    detection_tp: int = 0
    e2e_tp: int = 0
    edit_distance_sum: int = 0
    edit_distance_count: int = 0

    def __add__(self, other: "EntryCounts") -> "EntryCounts":
        return EntryCounts(
            **{
                name: getattr(self, name) + getattr(other, name)
                for name in EntryCounts.model_fields
            }
        )


def evaluate_entry(
    predictions: Sequence[Instance],
    gts: Sequence[Instance],
    config: Optional[EvaluationConfig] = None,
) -> EntryCounts:
    """Evalúa una unidad (imagen, consulta) y devuelve sus contadores."""
    config = config or DEFAULT_EVALUATION_CONFIG
    match = match_instances(predictions, gts, config.iou_threshold)
    total, count = _edit_distance_terms(match, predictions, gts, config.edit_distance_mode)
    return EntryCounts(
        num_predictions=match.num_predictions,
        num_gts=match.num_gts,
        detection_tp=len(match.pairs),
        e2e_tp=e2e_true_positives(match, predictions, gts),
        edit_distance_sum=total,
        edit_distance_count=count,
    )


class CategoryMetrics(BaseModel):
    """Métricas de un grupo de unidades (global o una categoría).

    Se derivan de los conteos acumulados; la distancia de edición media es
    None cuando el grupo no aporta ningún término.
    """

    model_config = ConfigDict(frozen=True)

    detection: PRF = Field(description="Métricas de detección")
    e2e: PRF = Field(description="Métricas extremo a extremo")
    avg_edit_distance: Optional[float] = Field(
        default=None, ge=0.0, description="Distancia de edición media"
    )
    counts: EntryCounts

    @classmethod
    def from_counts(cls, counts: EntryCounts) -> "CategoryMetrics":
        return cls(
            detection=PRF.from_counts(counts.detection_tp, counts.num_predictions, counts.num_gts),
            e2e=PRF.from_counts(counts.e2e_tp, counts.num_predictions, counts.num_gts),
            avg_edit_distance=(
                counts.edit_distance_sum / counts.edit_distance_count
                if counts.edit_distance_count
                else None
            ),
            counts=counts,
        )

    def to_json(self) -> dict:
        return {
            "detection": self.detection.model_dump(),
            "e2e": self.e2e.model_dump(),
            "avg_edit_distance": self.avg_edit_distance,
        }


class MetricsReport(BaseModel):
    """Informe global (micro-promedio) y por categoría."""

    model_config = ConfigDict(frozen=True)

    overall: CategoryMetrics
    by_category: Dict[str, CategoryMetrics] = Field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "overall": self.overall.to_json(),
            "by_category": {
                name: {**metrics.to_json(), "counts": metrics.counts.model_dump()}
                for name, metrics in sorted(self.by_category.items())
            },
            "counts": self.overall.counts.model_dump(),
        }


def per_category_report(
    results: Sequence[Tuple[Optional[str], EntryCounts]], by_category: bool = True
) -> MetricsReport:
    """Agrega contadores por categoría y en global.

    Si ninguna unidad tiene categoría, o ``by_category`` es False, el
    informe solo contiene el global. Las unidades sin categoría se
    agrupan en ``uncategorized`` cuando otras sí la tienen.

    Args:
        results: Pares (categoría, contadores) por unidad de evaluación
        by_category: Incluir el desglose por categoría

    Returns:
        MetricsReport con las métricas calculadas
    """
    overall = sum((counts for _, counts in results), EntryCounts())
    groups: Dict[str, EntryCounts] = defaultdict(EntryCounts)
    if by_category and any(category is not None for category, _ in results):
        for category, counts in results:
            key = category if category is not None else UNCATEGORIZED
            groups[key] = groups[key] + counts

    return MetricsReport(
        overall=CategoryMetrics.from_counts(overall),
        by_category={name: CategoryMetrics.from_counts(c) for name, c in groups.items()},
    )


def _index_entries(detections: DetectionsFile) -> Mapping[Tuple[str, str], DetectionsEntry]:
    return {entry.key: entry for entry in detections.entries}


def evaluate(
    gt_file: DetectionsFile,
    pred_file: DetectionsFile,
    config: Optional[EvaluationConfig] = None,
) -> MetricsReport:
    """Evalúa un archivo de predicciones contra su ground truth.

    La unidad de evaluación es el par (imagen, consulta). Las unidades
    presentes solo en predicciones cuentan todas sus instancias como
    falsos positivos; las presentes solo en ground truth, como fallos.

    Args:
        gt_file: Ground truth
        pred_file: Predicciones
        config: Configuración de evaluación. Si es None, usa la configuración por defecto.

    Returns:
        MetricsReport global y, si se pide, por categoría
    """
    config = config or DEFAULT_EVALUATION_CONFIG
    logger = app_logger.get_logger()
    gts, preds = _index_entries(gt_file), _index_entries(pred_file)

    results: List[Tuple[Optional[str], EntryCounts]] = []
    for key in sorted(set(gts) | set(preds)):
        gt_entry, pred_entry = gts.get(key), preds.get(key)
        if gt_entry is None:
            logger.warning(f"Sin ground truth para {key}: predicciones como falsos positivos")
        elif pred_entry is None:
            logger.warning(f"Sin predicciones para {key}: ground truth como fallos")

        category = (gt_entry and gt_entry.category) or (pred_entry and pred_entry.category)
        counts = evaluate_entry(
            pred_entry.to_instances() if pred_entry else [],
            gt_entry.to_instances() if gt_entry else [],
            config,
        )
        logger.debug(f"{key}: {counts}")
        results.append((category or None, counts))

    report = per_category_report(results, config.by_category)
    logger.info(
        f"Evaluación: {len(results)} unidades, F detección={report.overall.detection.f_score:.3f}, "
        f"F e2e={report.overall.e2e.f_score:.3f}"
    )
    return report


def derive_query_entries(
    gt_file: DetectionsFile,
    alphabet: Optional[Alphabet] = None,
    capacity: Optional[int] = None,
) -> DetectionsFile:
    """Reparte el ground truth sin consulta en una entrada por consulta de formato.

    Cada instancia de una entrada sin ``query`` se agrupa bajo la consulta
    de formato de su texto (ver ``pattern.format_query``). Las entradas que
    ya tienen consulta se conservan tal cual.

    Args:
        gt_file: Ground truth
        alphabet: Alfabeto. Si es None, usa el ASCII imprimible.
        capacity: Longitud máxima M. Si es None, usa la configuración por defecto.

    Returns:
        DetectionsFile con todas las entradas asociadas a una consulta
    """
    logger = app_logger.get_logger()
    entries = [entry for entry in gt_file.entries if entry.query]
    taken = {entry.key for entry in entries}

    for entry in gt_file.sorted_entries():
        if entry.query:
            continue
        groups: Dict[str, List[Instance]] = defaultdict(list)
        for instance in entry.to_instances():
            try:
                groups[format_query(instance.text, alphabet, capacity)].append(instance)
            except PatternError as e:
                logger.warning(f"{entry.image_id}/{instance.id}: sin consulta de formato ({e})")
        for query in sorted(groups):
            if (entry.image_id, query) in taken:
                logger.warning(f"Consulta derivada {query!r} ya presente en {entry.image_id}")
                continue
            taken.add((entry.image_id, query))
            entries.append(detections_entry(entry.image_id, groups[query], query, entry.category))

    logger.info(f"Consultas de formato derivadas: {len(entries)} entradas")
    return DetectionsFile(entries=entries)
