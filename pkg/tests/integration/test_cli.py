"""Tests de integración para la línea de comandos."""

import json

import pytest

from main import EXIT_INPUT_ERROR, EXIT_OK, main
from io_formats import DetectionsFile, detections_entry, write_json
from tests.fixtures import scenes


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Aísla los tests de las variables KDX_SPOT_* del entorno."""
    for name in ("CAPACITY", "ALPHABET", "LOG_LEVEL", "LOG_DIR"):
        monkeypatch.delenv(f"KDX_SPOT_{name}", raising=False)


def read(path):
    return json.loads(path.read_text(encoding="utf-8"))


def write_detections(path, entries):
    write_json(DetectionsFile(entries=entries), path)
    return path


class TestCompileCommand:
    """Tests para el comando compile."""

    def test_uic_pattern(self, temp_dir):
        """Test patrón de once dígitos, guion y dígito."""
        out = temp_dir / "enc.json"

        assert main(["compile", r"\d{11}-\d", "--out", str(out)]) == EXIT_OK

        data = read(out)
        assert data["active_length"] == 13
        assert data["capacity"] == 25
        assert len(data["rows"]) == 13
        assert all(len(row) == 10 for row in data["rows"][:11])
        assert len(data["rows"][11]) == 1

    def test_single_hyphen(self, temp_dir):
        """Test patrón formado solo por un guion."""
        out = temp_dir / "enc.json"

        assert main(["compile", "-", "--out", str(out)]) == EXIT_OK
        assert len(read(out)["rows"]) == 1

    def test_one_hot(self, temp_dir):
        """Test codificación one-hot."""
        out = temp_dir / "enc.json"

        assert main(["compile", r"\d{2}:\d{2}", "--encoding", "one", "--out", str(out)]) == EXIT_OK
        classes = read(out)["classes"]
        assert classes[:5] == ["number", "number", "special", "number", "number"]
        assert set(classes[5:]) == {"padding"}

    def test_stdout(self, capsys):
        """Test salida por stdout por defecto."""
        assert main(["compile", "ab"]) == EXIT_OK

        data = json.loads(capsys.readouterr().out)
        assert data["rows"] and data["pattern"] == "ab"

    def test_custom_alphabet(self, temp_dir, digits_alphabet_file):
        """Test alfabeto cargado desde archivo."""
        out = temp_dir / "enc.json"

        argv = ["--alphabet", str(digits_alphabet_file), "compile", r"\d-", "--out", str(out)]
        assert main(argv) == EXIT_OK

        data = read(out)
        assert data["alphabet_id"] == "digits"
        assert data["rows"] == [list(range(1, 11)), [11]]

    def test_unsupported_operand(self, capsys):
        """Test cuantificador no soportado."""
        assert main(["compile", "A+"]) == EXIT_INPUT_ERROR
        assert "error:" in capsys.readouterr().err

    def test_capacity_overflow(self):
        """Test patrón más largo que la capacidad."""
        assert main(["--capacity", "4", "compile", r"\d{5}"]) == EXIT_INPUT_ERROR

    def test_invalid_log_level(self):
        """Test nivel de logging desconocido."""
        assert main(["--log-level", "VERBOSE", "compile", "a"]) == EXIT_INPUT_ERROR

    def test_unknown_command(self):
        """Test comando inexistente."""
        with pytest.raises(SystemExit) as exc_info:
            main(["decompile", "a"])

        assert exc_info.value.code == 2


class TestMatchCommand:
    """Tests para el comando match."""

    def test_verdicts(self, temp_dir):
        """Test veredictos por línea, incluida la línea vacía."""
        strings = temp_dir / "strings.txt"
        strings.write_text("BICU 342894 0\nBICU3428940\n\n", encoding="utf-8")
        out = temp_dir / "verdicts.txt"

        argv = ["match", r"[A-Z]{4}\s\d{6}\s\d", str(strings), "--out", str(out)]
        assert main(argv) == EXIT_OK

        assert out.read_text(encoding="utf-8") == (
            "true\tBICU 342894 0\nfalse\tBICU3428940\nfalse\t\n"
        )

    def test_one_hot_encoding(self, temp_dir):
        """Test veredictos con la codificación one-hot."""
        strings = temp_dir / "strings.txt"
        strings.write_text("12:30\n1230\n", encoding="utf-8")
        out = temp_dir / "verdicts.txt"

        argv = ["match", r"\d{2}:\d{2}", str(strings), "--encoding", "one", "--out", str(out)]
        assert main(argv) == EXIT_OK
        assert out.read_text(encoding="utf-8") == "true\t12:30\nfalse\t1230\n"

    def test_missing_strings_file(self, temp_dir):
        """Test archivo de cadenas inexistente."""
        assert main(["match", "a", str(temp_dir / "missing.txt")]) == EXIT_INPUT_ERROR


class TestPostprocessCommand:
    """Tests para el comando postprocess."""

    def test_validation_strategy(self, temp_dir):
        """Test escena de dos códigos con la consulta de cada entrada."""
        detections = write_detections(
            temp_dir / "det.json",
            [detections_entry("img0", scenes.two_codes_scene(), query=scenes.TWO_CODES_QUERY)],
        )
        out = temp_dir / "post.json"

        assert main(["postprocess", str(detections), "--out", str(out)]) == EXIT_OK

        entry = read(out)["entries"][0]
        assert entry["query"] == scenes.TWO_CODES_QUERY
        assert [i["text"] for i in entry["instances"]] == ["AB12 CD34"]

    def test_iterative_strategy(self, temp_dir):
        """Test fragmentos con la estrategia iterativa."""
        detections = write_detections(
            temp_dir / "det.json", [detections_entry("img0", scenes.uic_fragments_scene())]
        )
        out = temp_dir / "post.json"
        argv = [
            "postprocess",
            str(detections),
            "--pattern",
            scenes.UIC_FRAGMENTS_QUERY,
            "--strategy",
            "iterative",
            "--out",
            str(out),
        ]

        assert main(argv) == EXIT_OK
        assert [i["text"] for i in read(out)["entries"][0]["instances"]] == ["12345678901-2"]

    def test_empty_detections(self, temp_dir):
        """Test archivo sin entradas."""
        detections = write_detections(temp_dir / "det.json", [])
        out = temp_dir / "post.json"

        assert main(["postprocess", str(detections), "--pattern", "a", "--out", str(out)]) == EXIT_OK
        assert read(out)["entries"] == []

    def test_missing_query(self, temp_dir):
        """Test entrada sin consulta y sin --pattern."""
        detections = write_detections(
            temp_dir / "det.json", [detections_entry("img0", scenes.time_scene())]
        )

        assert main(["postprocess", str(detections)]) == EXIT_INPUT_ERROR

    def test_invalid_json(self, temp_dir):
        """Test archivo de detecciones corrupto."""
        detections = temp_dir / "det.json"
        detections.write_text("{", encoding="utf-8")

        assert main(["postprocess", str(detections), "--pattern", "a"]) == EXIT_INPUT_ERROR


class TestDatasetCommands:
    """Tests para build-dataset y sample-queries."""

    @pytest.fixture
    def hiertext_file(self, temp_dir):
        path = temp_dir / "hiertext.json"
        raw = scenes.hiertext_raw([["Release", "v1.0", "notes"], ["Open", "12:30"]])
        path.write_text(json.dumps(raw), encoding="utf-8")
        return path

    def test_build_dataset(self, temp_dir, hiertext_file):
        """Test transformación del dataset de juguete."""
        out = temp_dir / "structured.json"

        assert main(["build-dataset", str(hiertext_file), "--out", str(out)]) == EXIT_OK

        instances = read(out)["annotations"][0]["instances"]
        assert [i["text"] for i in instances] == [
            "v1.0",
            "Release v1.0",
            "v1.0 notes",
            "12:30",
            "Open 12:30",
        ]

    def test_malformed_hierarchy(self, temp_dir):
        """Test anotación sin image_id."""
        path = temp_dir / "hiertext.json"
        path.write_text('{"annotations": [{"paragraphs": []}]}', encoding="utf-8")

        assert main(["build-dataset", str(path)]) == EXIT_INPUT_ERROR

    def test_sample_queries(self, temp_dir, hiertext_file):
        """Test muestreo reproducible de consultas."""
        structured = temp_dir / "structured.json"
        first, second = temp_dir / "q1.json", temp_dir / "q2.json"
        main(["build-dataset", str(hiertext_file), "--out", str(structured)])

        for out in (first, second):
            argv = ["sample-queries", str(structured), "--count", "8", "--seed", "5"]
            assert main(argv + ["--out", str(out)]) == EXIT_OK

        assert first.read_bytes() == second.read_bytes()
        queries = read(first)["queries"]
        assert len(queries) == 8
        assert all(q["instance_id"] in q["positive_ids"] for q in queries)


class TestEvaluateCommand:
    """Tests para el comando evaluate."""

    def test_identity(self, temp_dir):
        """Test ground truth evaluado contra sí mismo."""
        gt, _ = scenes.evaluation_files()
        gt_path = temp_dir / "gt.json"
        write_json(gt, gt_path)
        out = temp_dir / "report.json"

        assert main(["evaluate", str(gt_path), str(gt_path), "--out", str(out)]) == EXIT_OK

        report = read(out)
        assert report["overall"]["detection"]["f_score"] == 1.0
        assert report["overall"]["e2e"]["f_score"] == 1.0
        assert report["overall"]["avg_edit_distance"] == 0.0

    def test_by_category_reproducible(self, temp_dir):
        """Test desglose por categoría y salida byte a byte idéntica."""
        gt, predictions = scenes.evaluation_files()
        gt_path, pred_path = temp_dir / "gt.json", temp_dir / "pred.json"
        write_json(gt, gt_path)
        write_json(predictions, pred_path)
        outputs = [temp_dir / "r1.json", temp_dir / "r2.json"]

        for out in outputs:
            argv = ["evaluate", str(gt_path), str(pred_path), "--by-category", "--out", str(out)]
            assert main(argv) == EXIT_OK

        assert outputs[0].read_bytes() == outputs[1].read_bytes()
        report = read(outputs[0])
        assert sorted(report["by_category"]) == ["BIC", "TARE", "UIC"]
        assert report["overall"]["detection"]["precision"] == pytest.approx(4 / 6)

    def test_penalized_mode(self, temp_dir):
        """Test distancia de edición penalizada desde la CLI."""
        gt, predictions = scenes.evaluation_files()
        gt_path, pred_path = temp_dir / "gt.json", temp_dir / "pred.json"
        write_json(gt, gt_path)
        write_json(predictions, pred_path)
        out = temp_dir / "report.json"

        argv = ["evaluate", str(gt_path), str(pred_path), "--ed-mode", "penalized"]
        assert main(argv + ["--out", str(out)]) == EXIT_OK
        assert read(out)["overall"]["avg_edit_distance"] == pytest.approx(
            scenes.EXPECTED_PENALIZED_ED
        )

    def test_log_files(self, temp_dir, log_dir):
        """Test que --log-dir crea el archivo de log principal."""
        gt, _ = scenes.evaluation_files()
        gt_path = temp_dir / "gt.json"
        write_json(gt, gt_path)

        argv = ["--log-dir", str(log_dir), "--log-level", "INFO", "evaluate"]
        assert main(argv + [str(gt_path), str(gt_path), "--out", str(temp_dir / "r.json")]) == EXIT_OK
        assert (log_dir / "spotting.log").exists()


class TestDeriveQuery:
    """Tests para --derive-query en postprocess y evaluate."""

    @pytest.fixture
    def gt_path(self, temp_dir):
        gt = [
            detections_entry(
                "img0", [scenes.make_instance("g0", "12345678901-2", (0, 0, 140, 20))]
            )
        ]
        return write_detections(temp_dir / "gt.json", gt)

    def test_postprocess_and_evaluate(self, temp_dir, gt_path):
        """Test consultas derivadas del ground truth en todo el flujo."""
        detections = write_detections(
            temp_dir / "det.json", [detections_entry("img0", scenes.uic_fragments_scene())]
        )
        post, report = temp_dir / "post.json", temp_dir / "report.json"

        argv = ["postprocess", str(detections), "--strategy", "iterative"]
        assert main(argv + ["--derive-query", str(gt_path), "--out", str(post)]) == EXIT_OK

        entry = read(post)["entries"][0]
        assert entry["query"] == r"\d{11}-\d"
        assert [i["text"] for i in entry["instances"]] == ["12345678901-2"]

        argv = ["evaluate", str(gt_path), str(post), "--derive-query", "--out", str(report)]
        assert main(argv) == EXIT_OK
        assert read(report)["overall"]["e2e"]["f_score"] == 1.0

    def test_evaluate_without_derivation(self, temp_dir, gt_path):
        """Test sin --derive-query las unidades no se emparejan por consulta."""
        post = write_detections(
            temp_dir / "post.json",
            [
                detections_entry(
                    "img0",
                    [scenes.make_instance("p0", "12345678901-2", (0, 0, 140, 20))],
                    query=r"\d{11}-\d",
                )
            ],
        )
        report = temp_dir / "report.json"

        assert main(["evaluate", str(gt_path), str(post), "--out", str(report)]) == EXIT_OK
        assert read(report)["overall"]["e2e"]["f_score"] == 0.0
