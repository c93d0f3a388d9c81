"""Kit de spotting de texto estructurado: interfaz de línea de comandos.

Este es el módulo principal que coordina todos los componentes del kit,
implementando el patrón Facade para simplificar la interacción entre el
compilador de patrones, el post-procesado, la transformación del dataset
y la evaluación.

Comandos: compile, match, postprocess, build-dataset, sample-queries,
evaluate. Todas las entradas y salidas admiten ``-`` (stdin/stdout).
"""

import argparse
import sys
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from logger import app_logger
from config import (
    DEFAULT_TOOLKIT_CONFIG,
    DatasetConfig,
    EditDistanceMode,
    EvaluationConfig,
    MergeConfig,
    PatternConfig,
    SamplingConfig,
    ToolkitConfig,
)
from pattern import (
    PatternError,
    UnknownCharacter,
    compile_pattern,
    encode_multi_hot,
    encode_one_hot,
    matches_multi,
    matches_one,
    parse_pattern,
    resolve_alphabet,
)
from geometry import GeometryError
from instances import PostProcessingError, PostProcessor
from dataset import (
    DatasetError,
    HierAnnotation,
    StructuredAnnotation,
    build_dataset,
    sample_queries,
)
from metrics import derive_query_entries, evaluate
from io_formats import (
    STDIO,
    DetectionsFile,
    InputFormatError,
    QuerySetFile,
    StructuredAnnotationFile,
    detections_entry,
    load_detections,
    load_hiertext,
    load_strings,
    load_structured,
    write_json,
    write_text,
)


__version__ = "1.0.0"

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_INTERNAL_ERROR = 3

# Errores de entrada o de datos: se informan sin traza
INPUT_ERRORS = (
    PatternError,
    InputFormatError,
    DatasetError,
    PostProcessingError,
    GeometryError,
    ValidationError,
    OSError,
)


class SpottingToolkit:
    """Fachada del kit de spotting de texto estructurado.

    Esta clase implementa el patrón Facade: cada operación de la CLI es
    un método puro sobre artefactos ya cargados, con el alfabeto y la
    capacidad resueltos una sola vez.
    """

    def __init__(self, config: Optional[ToolkitConfig] = None):
        """Inicializa el kit.

        Args:
            config: Configuración del kit. Si es None, usa la configuración por defecto.
        """
        self.config = config or DEFAULT_TOOLKIT_CONFIG
        self.logger = app_logger.get_logger()
        self.alphabet = resolve_alphabet(self.config.pattern)
        self.capacity = self.config.pattern.capacity
        self.logger.debug(
            f"Kit inicializado: alfabeto '{self.alphabet.name}' (K={self.alphabet.size}), "
            f"M={self.capacity}"
        )

    def compile(self, src: str, encoding: str = "multi") -> dict:
        """Compila un patrón y devuelve su codificación serializada."""
        compiled = compile_pattern(src, self.alphabet, self.capacity, encoding)
        data = compiled.to_json()
        data["pattern"] = src
        data["encoding"] = encoding
        return data

    def match(
        self, src: str, strings: Sequence[str], encoding: str = "multi"
    ) -> List[Tuple[bool, str]]:
        """Decide, para cada cadena, si coincide con el patrón.

        Una cadena con caracteres fuera del alfabeto no coincide.
        """
        pattern = parse_pattern(src, self.alphabet, self.capacity)
        if encoding == "multi":
            multi = encode_multi_hot(pattern, self.capacity)

            def matcher(text: str) -> bool:
                return matches_multi(multi, text)

        elif encoding == "one":
            one = encode_one_hot(pattern, self.capacity)

            def matcher(text: str) -> bool:
                return matches_one(one, text)

        else:
            raise ValueError(f"Codificación desconocida: {encoding}")

        verdicts = []
        for text in strings:
            try:
                verdicts.append((matcher(text), text))
            except UnknownCharacter:
                self.logger.warning(f"Cadena con caracteres fuera del alfabeto: {text!r}")
                verdicts.append((False, text))
        return verdicts

    def postprocess(
        self,
        detections: DetectionsFile,
        src: Optional[str] = None,
        strategy: str = "validation",
        gt: Optional[DetectionsFile] = None,
    ) -> DetectionsFile:
        """Aplica la estrategia de post-procesado a cada entrada.

        Args:
            detections: Detecciones por imagen
            src: Patrón de consulta. Si es None, se usa el ``query`` de cada entrada.
            strategy: ``validation`` o ``iterative``
            gt: Ground truth del que derivar las consultas de formato de las
                entradas sin ``query`` (una entrada de salida por consulta)

        Returns:
            DetectionsFile con las instancias que satisfacen la consulta

        Raises:
            InputFormatError: Si una entrada no tiene consulta, ni patrón ni ground truth
        """
        processor = PostProcessor(strategy, self.config.merge)
        derived: Dict[str, List[Tuple[str, Optional[str]]]] = defaultdict(list)
        if gt is not None and not src:
            derived_gt = derive_query_entries(gt, self.alphabet, self.capacity)
            for gt_entry in derived_gt.sorted_entries():
                derived[gt_entry.image_id].append((gt_entry.query or "", gt_entry.category))

        entries = []
        taken = set()
        for entry in detections.sorted_entries():
            query = src or entry.query
            if query:
                targets = [(query, entry.category)]
            elif gt is not None:
                targets = derived.get(entry.image_id, [])
                if not targets:
                    self.logger.warning(f"{entry.image_id}: sin consultas derivables del ground truth")
            else:
                raise InputFormatError(f"La entrada {entry.image_id} no tiene consulta")

            instances = entry.to_instances()
            for target, category in targets:
                if (entry.image_id, target) in taken:
                    self.logger.warning(f"{entry.image_id}: consulta {target!r} repetida, se omite")
                    continue
                taken.add((entry.image_id, target))
                pattern = parse_pattern(target, self.alphabet, self.capacity)
                result = processor.process(instances, pattern)
                self.logger.info(
                    f"{entry.image_id} {target!r}: {len(instances)} detecciones -> "
                    f"{len(result)} instancias"
                )
                entries.append(
                    detections_entry(entry.image_id, result, target, category or entry.category)
                )
        return DetectionsFile(entries=entries)

    def build_dataset(self, annotation: HierAnnotation) -> StructuredAnnotationFile:
        """Transforma anotaciones jerárquicas en anotaciones estructuradas."""
        return StructuredAnnotationFile.from_annotations(
            build_dataset(annotation, self.config.dataset)
        )

    def sample_queries(self, annotations: Sequence[StructuredAnnotation]) -> QuerySetFile:
        """Genera el conjunto de consultas de entrenamiento."""
        sampled = sample_queries(
            annotations, self.config.sampling, self.alphabet, self.capacity
        )
        return QuerySetFile.from_sampled(sampled)

    def evaluate(
        self, gt: DetectionsFile, predictions: DetectionsFile, derive_query: bool = False
    ) -> dict:
        """Evalúa predicciones contra ground truth y devuelve el informe JSON.

        Con ``derive_query``, las entradas de ground truth sin consulta se
        reparten por la consulta de formato de cada texto.
        """
        if derive_query:
            gt = derive_query_entries(gt, self.alphabet, self.capacity)
        return evaluate(gt, predictions, self.config.evaluation).to_json()


def _override(model, **updates):
    """Crea una copia validada del modelo con los valores no nulos actualizados."""
    values = {key: value for key, value in updates.items() if value is not None}
    if not values:
        return model
    return type(model)(**{**model.model_dump(), **values})


def build_config(args: argparse.Namespace) -> ToolkitConfig:
    """Combina el entorno (KDX_SPOT_*) con los flags de la CLI.

    Los flags tienen prioridad sobre las variables de entorno.
    """
    config = ToolkitConfig.from_env()
    pattern: PatternConfig = _override(
        config.pattern, capacity=args.capacity, alphabet_file=args.alphabet
    )
    merge: MergeConfig = _override(
        config.merge,
        alpha=getattr(args, "alpha", None),
        max_iterations=getattr(args, "max_iter", None),
    )
    sampling: SamplingConfig = _override(
        config.sampling,
        p_exact=getattr(args, "p_exact", None),
        seed=getattr(args, "seed", None),
        count=getattr(args, "count", None),
    )
    evaluation: EvaluationConfig = _override(
        config.evaluation,
        iou_threshold=getattr(args, "iou_threshold", None),
        edit_distance_mode=getattr(args, "ed_mode", None),
        by_category=True if getattr(args, "by_category", False) else None,
    )
    dataset: DatasetConfig = _override(
        config.dataset,
        skip_illegible=False if getattr(args, "keep_illegible", False) else None,
    )
    return _override(
        config,
        pattern=pattern,
        merge=merge,
        sampling=sampling,
        evaluation=evaluation,
        dataset=dataset,
        log_level=args.log_level,
        log_dir=args.log_dir,
    )


def build_parser() -> argparse.ArgumentParser:
    """Construye el parser de la CLI.

    Las opciones globales (alfabeto, capacidad y logging) preceden al
    subcomando; cada subcomando añade sus propios flags.

    Returns:
        ArgumentParser con un subparser por operación
    """
    parser = argparse.ArgumentParser(
        prog="kdx-spot",
        description="Kit de spotting de texto estructurado",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--alphabet", type=Path, help="Archivo de alfabeto (texto o .json)")
    parser.add_argument("--capacity", type=int, help="Longitud máxima de reconocimiento M")
    parser.add_argument("--log-level", help="Nivel de logging en stderr (por defecto WARNING)")
    parser.add_argument("--log-dir", type=Path, help="Directorio para archivos de log")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="Compila un patrón a su codificación")
    p.add_argument("pattern")
    p.add_argument("--encoding", choices=("multi", "one"), default="multi")
    p.add_argument("--out", default=STDIO)

    p = sub.add_parser("match", help="Comprueba cadenas (una por línea) contra un patrón")
    p.add_argument("pattern")
    p.add_argument("strings", help="Archivo de cadenas, o - para stdin")
    p.add_argument("--encoding", choices=("multi", "one"), default="multi")
    p.add_argument("--out", default=STDIO)

    p = sub.add_parser("postprocess", help="Adapta detecciones a una consulta")
    p.add_argument("detections")
    p.add_argument("--pattern", help="Consulta; por defecto, el campo query de cada entrada")
    p.add_argument(
        "--strategy", choices=sorted(PostProcessor.STRATEGIES), default="validation"
    )
    p.add_argument("--alpha", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument(
        "--derive-query",
        metavar="GT",
        help="Ground truth del que derivar las consultas de las entradas sin query",
    )
    p.add_argument("--out", default=STDIO)

    p = sub.add_parser("build-dataset", help="Transforma anotaciones HierText")
    p.add_argument("hiertext")
    p.add_argument("--keep-illegible", action="store_true")
    p.add_argument("--out", default=STDIO)

    p = sub.add_parser("sample-queries", help="Genera consultas de entrenamiento")
    p.add_argument("annotations")
    p.add_argument("--p-exact", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--out", default=STDIO)

    p = sub.add_parser("evaluate", help="Evalúa predicciones contra ground truth")
    p.add_argument("gt")
    p.add_argument("predictions")
    p.add_argument("--by-category", action="store_true")
    p.add_argument("--ed-mode", choices=[m.value for m in EditDistanceMode])
    p.add_argument("--iou-threshold", type=float)
    p.add_argument(
        "--derive-query",
        action="store_true",
        help="Reparte el ground truth sin query por la consulta de formato de cada texto",
    )
    p.add_argument("--out", default=STDIO)

    return parser


def run(args: argparse.Namespace, toolkit: SpottingToolkit) -> None:
    """Ejecuta el comando ya analizado."""
    if args.command == "compile":
        write_json(toolkit.compile(args.pattern, args.encoding), args.out)
    elif args.command == "match":
        verdicts = toolkit.match(args.pattern, load_strings(args.strings), args.encoding)
        lines = "".join(f"{'true' if ok else 'false'}\t{text}\n" for ok, text in verdicts)
        write_text(lines, args.out)
    elif args.command == "postprocess":
        gt = load_detections(args.derive_query) if args.derive_query else None
        result = toolkit.postprocess(
            load_detections(args.detections), args.pattern, args.strategy, gt
        )
        write_json(result, args.out)
    elif args.command == "build-dataset":
        write_json(toolkit.build_dataset(load_hiertext(args.hiertext)), args.out)
    elif args.command == "sample-queries":
        write_json(toolkit.sample_queries(load_structured(args.annotations)), args.out)
    elif args.command == "evaluate":
        report = toolkit.evaluate(
            load_detections(args.gt), load_detections(args.predictions), args.derive_query
        )
        write_json(report, args.out)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Función principal de la CLI.

    Returns:
        0 si todo fue bien, 2 ante errores de entrada y 3 ante errores internos
    """
    args = build_parser().parse_args(argv)
    app_logger.setup_logger(force=True)
    logger = app_logger.get_logger()

    try:
        config = build_config(args)
        app_logger.setup_logger(level=config.log_level, log_dir=config.log_dir, force=True)
        logger.info(f"=== kdx-spot {args.command} ===")
        run(args, SpottingToolkit(config))
        return EXIT_OK
    except INPUT_ERRORS as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.exception(f"Error interno: {e}")
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
