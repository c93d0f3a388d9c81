"""Tests unitarios para instancias y estrategias de post-procesado."""

import pytest
from pydantic import ValidationError

from config import JoinerMode, MergeConfig
from pattern import parse_pattern
from instances import (
    Instance,
    IterativeStrategy,
    MultipleSpaces,
    NoSpace,
    PostProcessor,
    ValidationStrategy,
    filter_matching,
    merge_instances,
    merge_threshold,
    order_pair,
    postprocess_iterative,
    postprocess_validation,
    split_query_at_space,
)
from tests.fixtures.scenes import (
    TWO_CODES_QUERY,
    UIC_FRAGMENTS_QUERY,
    make_instance,
    uic_fragments_with_match_scene,
)


class TestInstance:
    """Tests para Instance."""

    def test_default_provenance(self):
        """Test que una detección procede de sí misma."""
        instance = make_instance("a", "AB12", (0, 0, 10, 10))

        assert instance.merged_from == ("a",)

    def test_score_range(self):
        """Test confianza fuera de [0, 1]."""
        with pytest.raises(ValidationError):
            make_instance("a", "x", (0, 0, 10, 10), score=1.5)


class TestFilterMatching:
    """Tests para filter_matching."""

    def test_keeps_exact_matches(self, two_codes_scene):
        """Test que solo se conservan las coincidencias, en orden."""
        kept = filter_matching(two_codes_scene, parse_pattern(r"[A-Za-z]{2}\d{2}"))

        assert [i.id for i in kept] == ["w0", "w1", "w3"]

    def test_unknown_characters_do_not_match(self):
        """Test transcripciones fuera del alfabeto."""
        instances = [make_instance("a", "é1", (0, 0, 10, 10))]

        assert filter_matching(instances, parse_pattern(".1")) == []


class TestSplitQuery:
    """Tests para split_query_at_space."""

    def test_split(self):
        """Test división en dos sub-consultas."""
        left, right = split_query_at_space(parse_pattern(TWO_CODES_QUERY))

        assert left.length == 4
        assert right.length == 4
        assert left.source == r"[A-Za-z]{2}\d{2}"
        assert left.matches("AB12")

    def test_no_space(self):
        """Test consulta sin espacio."""
        with pytest.raises(NoSpace):
            split_query_at_space(parse_pattern(r"\d{4}"))

    def test_multiple_spaces(self):
        """Test consulta con dos espacios."""
        with pytest.raises(MultipleSpaces):
            split_query_at_space(parse_pattern(r"[A-Z]{4}\s\d{6}\s\d"))

    def test_space_at_edge(self):
        """Test espacio al principio de la consulta."""
        with pytest.raises(NoSpace):
            split_query_at_space(parse_pattern(r"\s\d"))


class TestMergeHelpers:
    """Tests para los auxiliares de fusión."""

    def test_threshold_uses_mean_height(self):
        """Test tau = alpha x altura media."""
        a = make_instance("a", "x", (0, 0, 10, 20))
        b = make_instance("b", "y", (20, 0, 30, 40))

        assert merge_threshold(a, b, MergeConfig(alpha=0.5)) == 15

    def test_order_pair(self):
        """Test orden izquierda-derecha por centroide."""
        right = make_instance("r", "x", (50, 0, 60, 10))
        left = make_instance("l", "y", (0, 0, 10, 10))

        assert order_pair(right, left) == (left, right)

    def test_merge_instances(self):
        """Test fusión: texto, confianza media y procedencia."""
        a = make_instance("a", "AB12", (0, 0, 40, 20), 0.9)
        b = make_instance("b", "CD34", (50, 0, 90, 20), 0.5)
        merged = merge_instances(a, b)

        assert merged.id == "a+b"
        assert merged.text == "AB12 CD34"
        assert merged.score == pytest.approx(0.7)
        assert merged.merged_from == ("a", "b")
        assert merged.polygon.bbox.width == 90


class TestValidationStrategy:
    """Tests para ValidationStrategy."""

    def test_two_codes_scene(self, two_codes_scene):
        """Test dos códigos adyacentes producen una sola instancia."""
        result = postprocess_validation(two_codes_scene, parse_pattern(TWO_CODES_QUERY))

        assert len(result) == 1
        assert result[0].text == "AB12 CD34"
        assert result[0].merged_from == ("w0", "w1")
        assert parse_pattern(TWO_CODES_QUERY).matches(result[0].text)

    def test_far_pair_not_merged(self, two_codes_scene):
        """Test que un umbral pequeño impide la fusión."""
        result = postprocess_validation(
            two_codes_scene, parse_pattern(TWO_CODES_QUERY), MergeConfig(alpha=0.1)
        )

        assert result == []

    def test_no_space_query_filters(self, two_codes_scene):
        """Test consulta sin espacio: solo filtrado."""
        result = ValidationStrategy().process(two_codes_scene, parse_pattern("hello"))

        assert [i.id for i in result] == ["w2"]

    def test_direct_match_passes_through(self):
        """Test instancia que ya contiene el espacio y coincide."""
        instances = [make_instance("a", "AB12 CD34", (0, 0, 90, 20))]

        result = postprocess_validation(instances, parse_pattern(TWO_CODES_QUERY))

        assert [i.id for i in result] == ["a"]

    def test_each_instance_used_once(self):
        """Test emparejamiento uno a uno: el par más cercano gana."""
        instances = [
            make_instance("a", "AB12", (0, 0, 40, 20)),
            make_instance("b", "CD34", (45, 0, 85, 20)),
            make_instance("c", "EF56", (95, 0, 135, 20)),
        ]

        result = postprocess_validation(instances, parse_pattern(TWO_CODES_QUERY))

        assert [i.merged_from for i in result] == [("a", "b")]

    def test_empty_input(self):
        """Test entrada vacía."""
        assert postprocess_validation([], parse_pattern(TWO_CODES_QUERY)) == []

    def test_multiple_spaces_rejected(self):
        """Test consulta con varios espacios."""
        with pytest.raises(MultipleSpaces):
            postprocess_validation([], parse_pattern(r"\d\s\d\s\d"))


class TestIterativeStrategy:
    """Tests para IterativeStrategy."""

    def test_uic_fragments_converge(self, uic_fragments):
        """Test tres fragmentos convergen a una instancia."""
        config = MergeConfig(max_iterations=3)
        result = postprocess_iterative(uic_fragments, parse_pattern(UIC_FRAGMENTS_QUERY), config)

        assert len(result) == 1
        assert result[0].text == "12345678901-2"
        assert result[0].merged_from == ("f0", "f1", "f2")

    def test_frozen_instances_not_remerged(self):
        """Test que una instancia ya coincidente no se vuelve a fusionar."""
        result = postprocess_iterative(
            uic_fragments_with_match_scene(), parse_pattern(UIC_FRAGMENTS_QUERY)
        )

        provenance = sorted(i.merged_from for i in result)
        assert provenance == [("f0", "f1", "f2"), ("f3",)]

    def test_without_freezing(self):
        """Test que sin congelar ambos códigos acaban fusionados en una cadena inválida."""
        config = MergeConfig(freeze_matched=False)
        result = postprocess_iterative(
            uic_fragments_with_match_scene(), parse_pattern(UIC_FRAGMENTS_QUERY), config
        )

        assert result == []

    def test_iteration_limit(self, uic_fragments):
        """Test que el límite de iteraciones detiene la fusión."""
        config = MergeConfig(max_iterations=1)
        result = postprocess_iterative(uic_fragments, parse_pattern(UIC_FRAGMENTS_QUERY), config)

        assert result == []

    def test_two_codes_scene(self, two_codes_scene):
        """Test la estrategia iterativa también resuelve la consulta espaciada."""
        result = postprocess_iterative(two_codes_scene, parse_pattern(TWO_CODES_QUERY))

        assert [i.text for i in result] == ["AB12 CD34"]

    def test_joiner_space(self, uic_fragments):
        """Test unión con espacio forzada."""
        config = MergeConfig(joiner=JoinerMode.SPACE)
        result = postprocess_iterative(uic_fragments, parse_pattern(r"\d{5} \d{6}"), config)

        assert [i.text for i in result] == ["12345 678901"]

    def test_multiple_space_query(self):
        """Test consulta con dos espacios."""
        instances = [
            make_instance("a", "ABCU", (0, 0, 40, 20)),
            make_instance("b", "342894", (50, 0, 110, 20)),
            make_instance("c", "0", (120, 0, 130, 20)),
        ]

        result = postprocess_iterative(instances, parse_pattern(r"[A-Z]{4}\s\d{6}\s\d"))

        assert [i.text for i in result] == ["ABCU 342894 0"]

    def test_wrong_total_length(self):
        """Test fragmentos cuya concatenación no tiene la longitud de la consulta."""
        instances = [
            make_instance("f0", "12345", (0, 0, 50, 20)),
            make_instance("f1", "6789", (55, 0, 95, 20)),
            make_instance("f2", "-2", (100, 0, 120, 20)),
        ]

        result = postprocess_iterative(instances, parse_pattern(UIC_FRAGMENTS_QUERY))

        assert result == []

    def test_input_id_like_merged_id(self):
        """Test que una entrada con id "a+b" sobrevive a la fusión de a y b."""
        instances = [
            make_instance("a", "12", (0, 0, 20, 20)),
            make_instance("b", "34", (25, 0, 45, 20)),
            make_instance("c", "78", (50, 0, 70, 20)),
            make_instance("a+b", "56", (0, 200, 20, 220)),
            make_instance("d", "7890", (28, 200, 68, 220)),
        ]

        result = postprocess_iterative(instances, parse_pattern(r"\d{6}"))

        assert sorted(i.text for i in result) == ["123478", "567890"]
        assert ("a+b", "d") in [i.merged_from for i in result]


class TestPostProcessor:
    """Tests para PostProcessor."""

    def test_strategy_selection(self):
        """Test selección por nombre."""
        assert PostProcessor("validation").strategy_name == "validation"
        assert isinstance(PostProcessor("iterative")._strategy, IterativeStrategy)

    def test_unknown_strategy(self):
        """Test estrategia desconocida."""
        with pytest.raises(ValueError, match="Estrategia desconocida"):
            PostProcessor("greedy")
