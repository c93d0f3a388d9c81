"""Compilador del subconjunto de expresiones regulares de longitud fija.

Este módulo analiza los patrones de consulta (clases de caracteres,
escapes y repetición fija ``{n}``), los expande posición a posición y los
compila a las dos codificaciones que usa el sistema:

- multi-hot: matriz binaria M x K sobre el alfabeto, una fila por posición.
- one-hot: una clase gruesa por posición (espacio, número, letra,
  separador, especial, relleno). Es una proyección con pérdida.

La coincidencia es siempre anclada a la cadena completa y de longitud fija.
"""

import json
import re
import string
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from logger import app_logger
from config import DEFAULT_PATTERN_CONFIG, PatternConfig


SPACE = " "
DEFAULT_ALPHABET_CHARS = "".join(chr(code) for code in range(32, 127))
DEFAULT_ALPHABET_NAME = "printable-ascii"

DIGITS = frozenset(string.digits)
LETTERS = frozenset(string.ascii_letters)
SEPARATORS = frozenset(",-_")
WORD_CHARS = LETTERS | DIGITS | {"_"}

# Operandos de longitud variable, alternancia, grupos y anclas
UNSUPPORTED_OPERANDS = frozenset("+*?|()^$")
# Metacaracteres que se escapan al emitir un patrón canónico
METACHARS = frozenset(".^$*+?{}[]\\|()")
CLASS_METACHARS = frozenset("\\]^-[")

_VARIABLE_REPETITION = re.compile(r"\s*\d*\s*[,\-]\s*\d*\s*")


class PatternError(Exception):
    """Excepción base para errores de patrones y codificaciones."""

    pass


class UnsupportedOperand(PatternError):
    """El patrón usa un operando que no se puede codificar con longitud fija."""

    pass


class EmptyClass(PatternError):
    """Una clase de caracteres no contiene ningún carácter del alfabeto."""

    pass


class LengthOverflow(PatternError):
    """La longitud expandida del patrón supera la capacidad M."""

    pass


class PatternSyntaxError(PatternError):
    """Patrón mal formado (corchetes, llaves o escapes)."""

    pass


class NotRepresentable(PatternError):
    """Una posición abarca varias clases y no admite codificación one-hot."""

    pass


class UnknownCharacter(PatternError):
    """Carácter fuera del alfabeto configurado."""

    pass


class AlphabetError(PatternError):
    """Alfabeto inválido o incompatible con una codificación."""

    pass


@lru_cache(maxsize=32)
def _index_map(chars: str) -> Dict[str, int]:
    return {char: index for index, char in enumerate(chars)}


@lru_cache(maxsize=32)
def _member_set(chars: str) -> FrozenSet[str]:
    return frozenset(chars)


class Alphabet(BaseModel):
    """Conjunto ordenado de caracteres sobre el que se codifican los patrones.

    El índice k de cada carácter es su posición en ``chars``; la relación
    índice-carácter es biyectiva.
    """

    model_config = ConfigDict(frozen=True)

    chars: str = Field(
        default=DEFAULT_ALPHABET_CHARS,
        min_length=1,
        description="Caracteres del alfabeto en orden",
    )
    name: str = Field(
        default=DEFAULT_ALPHABET_NAME,
        description="Identificador del alfabeto en los artefactos JSON",
    )

    @field_validator("chars")
    @classmethod
    def validate_chars(cls, v):
        """Valida que los caracteres sean distintos e incluyan el espacio."""
        if len(set(v)) != len(v):
            raise ValueError("El alfabeto contiene caracteres duplicados")
        if SPACE not in v:
            raise ValueError("El alfabeto debe incluir el carácter espacio")
        return v

    @property
    def size(self) -> int:
        """Número de caracteres K."""
        return len(self.chars)

    @property
    def members(self) -> FrozenSet[str]:
        return _member_set(self.chars)

    def index(self, char: str) -> int:
        """Obtiene el índice k de un carácter.

        Args:
            char: Carácter a buscar

        Returns:
            Índice del carácter en el alfabeto

        Raises:
            UnknownCharacter: Si el carácter no pertenece al alfabeto
        """
        try:
            return _index_map(self.chars)[char]
        except KeyError:
            raise UnknownCharacter(f"Carácter fuera del alfabeto: {char!r}") from None

    def __contains__(self, char: object) -> bool:
        return char in _index_map(self.chars)


DEFAULT_ALPHABET = Alphabet()


def load_alphabet(path: Union[str, Path]) -> Alphabet:
    """Carga un alfabeto desde archivo.

    Los archivos ``.json`` contienen una lista de caracteres o una cadena;
    cualquier otro archivo se lee como texto plano, en orden, ignorando
    los saltos de línea.

    Args:
        path: Ruta del archivo de alfabeto

    Returns:
        Alphabet cargado

    Raises:
        AlphabetError: Si el archivo no es legible o el alfabeto es inválido
    """
    file_path = Path(path)
    try:
        content = file_path.read_text(encoding="utf-8")
    except OSError as e:
        raise AlphabetError(f"No se puede leer el alfabeto {file_path}: {e}") from e

    if file_path.suffix.lower() == ".json":
        try:
            data = json.loads(content)
        except ValueError as e:
            raise AlphabetError(f"Alfabeto JSON inválido {file_path}: {e}") from e
        if isinstance(data, list):
            if not all(isinstance(item, str) and len(item) == 1 for item in data):
                raise AlphabetError("El alfabeto JSON debe listar caracteres sueltos")
            chars = "".join(data)
        elif isinstance(data, str):
            chars = data
        else:
            raise AlphabetError("El alfabeto JSON debe ser una lista o una cadena")
    else:
        chars = content.replace("\r", "").replace("\n", "")

    try:
        alphabet = Alphabet(chars=chars, name=file_path.stem)
    except ValidationError as e:
        raise AlphabetError(f"Alfabeto inválido en {file_path}: {e}") from e

    app_logger.get_logger().debug(f"Alfabeto '{alphabet.name}' cargado: K={alphabet.size}")
    return alphabet


def resolve_alphabet(config: Optional[PatternConfig] = None) -> Alphabet:
    """Obtiene el alfabeto indicado por la configuración."""
    config = config or DEFAULT_PATTERN_CONFIG
    if config.alphabet_file is None:
        return DEFAULT_ALPHABET
    return load_alphabet(config.alphabet_file)


class CharClass(str, Enum):
    """Las seis clases de la codificación one-hot."""

    SPACE = "space"
    NUMBER = "number"
    LETTER = "letter"
    SEPARATOR = "separator"
    SPECIAL = "special"
    PADDING = "padding"


CLASS_ORDER: Tuple[CharClass, ...] = tuple(CharClass)


def class_of(char: str, alphabet: Optional[Alphabet] = None) -> CharClass:
    """Clasifica un carácter en una de las clases one-hot.

    Args:
        char: Carácter del alfabeto
        alphabet: Alfabeto de referencia. Si es None, usa el ASCII imprimible.

    Returns:
        Clase del carácter (nunca PADDING)

    Raises:
        UnknownCharacter: Si el carácter no pertenece al alfabeto
    """
    alphabet = alphabet or DEFAULT_ALPHABET
    if char not in alphabet:
        raise UnknownCharacter(f"Carácter fuera del alfabeto: {char!r}")
    if char == SPACE:
        return CharClass.SPACE
    if char in DIGITS:
        return CharClass.NUMBER
    if char in LETTERS:
        return CharClass.LETTER
    if char in SEPARATORS:
        return CharClass.SEPARATOR
    return CharClass.SPECIAL


@lru_cache(maxsize=64)
def class_members(char_class: CharClass, alphabet: Optional[Alphabet] = None) -> FrozenSet[str]:
    """Caracteres del alfabeto que pertenecen a una clase."""
    alphabet = alphabet or DEFAULT_ALPHABET
    if char_class is CharClass.PADDING:
        return frozenset()
    return frozenset(c for c in alphabet.chars if class_of(c, alphabet) is char_class)


class QueryPattern(BaseModel):
    """Patrón analizado: un conjunto de caracteres por posición expandida.

    Las repeticiones ``{n}`` ya están expandidas, de modo que la posición m
    corresponde al carácter m de cualquier cadena que coincida.
    """

    model_config = ConfigDict(frozen=True)

    positions: Tuple[FrozenSet[str], ...]
    source: str = Field(description="Patrón original, literal")
    alphabet: Alphabet = Field(default=DEFAULT_ALPHABET)

    @model_validator(mode="after")
    def validate_positions(self):
        """Valida que cada posición sea un subconjunto no vacío del alfabeto."""
        if not self.positions:
            raise ValueError("Un patrón necesita al menos una posición")
        members = self.alphabet.members
        for m, charset in enumerate(self.positions, start=1):
            if not charset:
                raise ValueError(f"La posición {m} está vacía")
            if not charset <= members:
                raise ValueError(f"La posición {m} contiene caracteres fuera del alfabeto")
        return self

    @property
    def length(self) -> int:
        """Longitud activa M_p."""
        return len(self.positions)

    def space_positions(self) -> List[int]:
        """Índices (desde 0) de las posiciones que solo admiten el espacio."""
        return [m for m, charset in enumerate(self.positions) if charset == {SPACE}]

    def sub_pattern(self, start: int, stop: int) -> "QueryPattern":
        """Extrae las posiciones [start, stop) como un patrón independiente."""
        positions = self.positions[start:stop]
        return QueryPattern(
            positions=positions,
            source=canonical_pattern(positions, self.alphabet),
            alphabet=self.alphabet,
        )

    def matches(self, text: str) -> bool:
        """Coincidencia anclada por pertenencia posición a posición."""
        if len(text) != self.length:
            return False
        return all(char in charset for char, charset in zip(text, self.positions))


class PatternParser:
    """Analizador descendente recursivo del subconjunto de regex soportado.

    Gramática:
        pattern    -> (atom repeat?)+
        atom       -> literal | escape | class
        repeat     -> '{' n '}'            (n >= 1)
        class      -> '[' '^'? item+ ']'
        item       -> char | char '-' char | escape
        escape     -> '\\' (d D s S w W b | carácter no alfanumérico)
    """

    def __init__(self, src: str, alphabet: Alphabet, capacity: int):
        self.src = src
        self.alphabet = alphabet
        self.capacity = capacity
        self.pos = 0
        self._members = alphabet.members

    def parse(self) -> QueryPattern:
        """Analiza el patrón completo.

        Returns:
            QueryPattern con las posiciones expandidas
        """
        if not self.src:
            raise PatternSyntaxError("El patrón está vacío")

        positions: List[FrozenSet[str]] = []
        last: Optional[FrozenSet[str]] = None

        while self._peek() is not None:
            if self._peek() == "{":
                if last is None:
                    raise PatternSyntaxError(
                        f"Repetición sin token previo en la posición {self.pos}"
                    )
                count = self._parse_repetition()
                self._check_capacity(len(positions) + count - 1)
                positions.extend([last] * (count - 1))
                last = None
                continue

            token = self._parse_atom()
            if token is None:
                # \b no ocupa posición
                last = None
                continue
            self._check_capacity(len(positions) + 1)
            positions.append(token)
            last = token

        if not positions:
            raise PatternSyntaxError(f"El patrón no contiene posiciones: {self.src!r}")
        return QueryPattern(positions=tuple(positions), source=self.src, alphabet=self.alphabet)

    def _peek(self, offset: int = 0) -> Optional[str]:
        pos = self.pos + offset
        if pos < len(self.src):
            return self.src[pos]
        return None

    def _advance(self, count: int = 1) -> None:
        self.pos += count

    def _check_capacity(self, length: int) -> None:
        if length > self.capacity:
            raise LengthOverflow(
                f"El patrón {self.src!r} se expande a más de {self.capacity} posiciones"
            )

    def _literal(self, char: str) -> FrozenSet[str]:
        if char not in self._members:
            raise UnknownCharacter(
                f"Carácter {char!r} fuera del alfabeto en el patrón {self.src!r}"
            )
        return frozenset(char)

    def _non_empty(self, charset: FrozenSet[str], what: str) -> FrozenSet[str]:
        if not charset:
            raise EmptyClass(f"{what} no contiene ningún carácter del alfabeto")
        return charset

    def _parse_atom(self) -> Optional[FrozenSet[str]]:
        ch = self._peek()
        if ch in UNSUPPORTED_OPERANDS:
            raise UnsupportedOperand(
                f"Operando no soportado {ch!r} en la posición {self.pos} de {self.src!r}"
            )
        if ch == "[":
            return self._parse_class()
        if ch == "\\":
            return self._parse_escape(in_class=False)
        self._advance()
        return self._literal(ch)

    def _parse_repetition(self) -> int:
        start = self.pos
        end = self.src.find("}", start)
        if end < 0:
            raise PatternSyntaxError(f"Llave sin cerrar en la posición {start}")
        body = self.src[start + 1 : end]
        self.pos = end + 1

        if body.isascii() and body.isdigit():
            count = int(body)
            if count < 1:
                raise PatternSyntaxError(f"Repetición {{{body}}} inválida: n debe ser >= 1")
            return count
        if _VARIABLE_REPETITION.fullmatch(body):
            raise UnsupportedOperand(
                f"Repetición de longitud variable {{{body}}} no soportada en {self.src!r}"
            )
        raise PatternSyntaxError(f"Repetición mal formada {{{body}}} en la posición {start}")

    def _parse_escape(self, in_class: bool) -> Optional[FrozenSet[str]]:
        start = self.pos
        self._advance()
        ch = self._peek()
        if ch is None:
            raise PatternSyntaxError("Escape incompleto al final del patrón")
        self._advance()

        members = self._members
        if ch == "d":
            return self._non_empty(DIGITS & members, "\\d")
        if ch == "D":
            return self._non_empty(members - DIGITS, "\\D")
        if ch == "s":
            return frozenset(SPACE)
        if ch == "S":
            return self._non_empty(members - {SPACE}, "\\S")
        if ch == "w":
            return self._non_empty(WORD_CHARS & members, "\\w")
        if ch == "W":
            return self._non_empty(members - WORD_CHARS, "\\W")
        if ch == "b":
            if in_class:
                raise PatternSyntaxError(f"\\b no admitido dentro de una clase (posición {start})")
            return None
        if not ch.isalnum() and ch.isprintable():
            return frozenset(ch) if in_class else self._literal(ch)
        raise PatternSyntaxError(f"Escape no soportado '\\{ch}' en la posición {start}")

    def _parse_class_char(self) -> FrozenSet[str]:
        if self._peek() == "\\":
            return self._parse_escape(in_class=True)
        ch = self._peek()
        self._advance()
        # Dentro de una clase se admite cualquier carácter; luego se recorta al alfabeto
        return frozenset(ch)

    def _parse_class(self) -> FrozenSet[str]:
        start = self.pos
        self._advance()
        negated = False
        if self._peek() == "^":
            negated = True
            self._advance()

        items: set = set()
        while True:
            ch = self._peek()
            if ch is None:
                raise PatternSyntaxError(f"Clase sin cerrar en la posición {start}")
            if ch == "]":
                self._advance()
                break

            item = self._parse_class_char()
            if self._peek() == "-" and self._peek(1) not in ("]", None):
                self._advance()
                end_item = self._parse_class_char()
                if len(item) != 1 or len(end_item) != 1:
                    raise PatternSyntaxError(f"Rango inválido en la clase de la posición {start}")
                low, high = ord(next(iter(item))), ord(next(iter(end_item)))
                if low > high:
                    raise PatternSyntaxError(
                        f"Rango invertido {chr(low)}-{chr(high)} en la posición {start}"
                    )
                items.update(chr(code) for code in range(low, high + 1))
            else:
                items.update(item)

        text = self.src[start : self.pos]
        if not items:
            raise EmptyClass(f"La clase {text} está vacía")
        charset = frozenset(items) & self._members
        if negated:
            charset = self._members - frozenset(items)
        return self._non_empty(charset, f"La clase {text}")


def parse_pattern(
    src: str,
    alphabet: Optional[Alphabet] = None,
    capacity: Optional[int] = None,
) -> QueryPattern:
    """Analiza un patrón del subconjunto soportado.

    Args:
        src: Patrón de consulta
        alphabet: Alfabeto. Si es None, usa el ASCII imprimible.
        capacity: Longitud máxima M. Si es None, usa la configuración por defecto.

    Returns:
        QueryPattern expandido

    Raises:
        UnsupportedOperand: ``+ * ? | ( )``, anclas o repetición variable
        EmptyClass: Clase vacía o negación que cubre todo el alfabeto
        LengthOverflow: Longitud expandida mayor que M
        PatternSyntaxError: Corchetes, llaves o escapes mal formados
    """
    alphabet = alphabet or DEFAULT_ALPHABET
    capacity = capacity or DEFAULT_PATTERN_CONFIG.capacity
    return PatternParser(src, alphabet, capacity).parse()


class MultiHotEncoding(BaseModel):
    """Matriz binaria H de M x K.

    La fila m marca los caracteres admitidos en la posición m; las filas
    posteriores a la longitud activa son de relleno (todo ceros).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rows: np.ndarray
    active_length: int = Field(ge=1)
    capacity: int = Field(ge=1)
    alphabet: Alphabet = Field(default=DEFAULT_ALPHABET)

    @field_validator("rows", mode="before")
    @classmethod
    def freeze_rows(cls, v):
        """Copia la matriz como uint8 de solo lectura."""
        rows = np.array(v, dtype=np.uint8, copy=True)
        rows.setflags(write=False)
        return rows

    @model_validator(mode="after")
    def validate_rows(self):
        """Valida forma, valores binarios y filas de relleno."""
        if self.rows.shape != (self.capacity, self.alphabet.size):
            raise ValueError(
                f"Forma {self.rows.shape} incompatible con M={self.capacity}, "
                f"K={self.alphabet.size}"
            )
        if self.active_length > self.capacity:
            raise ValueError("La longitud activa supera la capacidad")
        if np.any(self.rows > 1):
            raise ValueError("La matriz multi-hot debe ser binaria")
        if not self.rows[: self.active_length].any(axis=1).all():
            raise ValueError("Cada fila activa necesita al menos un 1")
        if self.rows[self.active_length :].any():
            raise ValueError("Las filas de relleno deben ser todo ceros")
        return self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiHotEncoding):
            return NotImplemented
        return (
            self.capacity == other.capacity
            and self.active_length == other.active_length
            and self.alphabet == other.alphabet
            and np.array_equal(self.rows, other.rows)
        )

    def allowed(self, m: int) -> FrozenSet[str]:
        """Caracteres admitidos en la posición m (desde 0)."""
        return frozenset(self.alphabet.chars[k] for k in np.flatnonzero(self.rows[m]))

    def to_json(self) -> dict:
        """Serialización dispersa: índices k de los unos de cada fila activa."""
        return {
            "capacity": self.capacity,
            "active_length": self.active_length,
            "alphabet_id": self.alphabet.name,
            "rows": [
                [int(k) for k in np.flatnonzero(row)]
                for row in self.rows[: self.active_length]
            ],
        }

    @classmethod
    def from_json(cls, data: dict, alphabet: Optional[Alphabet] = None) -> "MultiHotEncoding":
        """Reconstruye la codificación desde su forma JSON dispersa."""
        alphabet = alphabet or DEFAULT_ALPHABET
        if data.get("alphabet_id") != alphabet.name:
            raise AlphabetError(
                f"Codificación para el alfabeto {data.get('alphabet_id')!r}, "
                f"se esperaba {alphabet.name!r}"
            )
        rows = np.zeros((data["capacity"], alphabet.size), dtype=np.uint8)
        for m, indices in enumerate(data["rows"]):
            rows[m, indices] = 1
        return cls(
            rows=rows,
            active_length=data["active_length"],
            capacity=data["capacity"],
            alphabet=alphabet,
        )


class OneHotEncoding(BaseModel):
    """Secuencia de M clases gruesas; relleno después de la longitud activa."""

    model_config = ConfigDict(frozen=True)

    classes: Tuple[CharClass, ...]
    active_length: int = Field(ge=1)
    alphabet: Alphabet = Field(default=DEFAULT_ALPHABET)

    @model_validator(mode="after")
    def validate_classes(self):
        """Valida que el relleno aparezca exactamente tras la longitud activa."""
        if self.active_length > len(self.classes):
            raise ValueError("La longitud activa supera la capacidad")
        active = self.classes[: self.active_length]
        if any(c is CharClass.PADDING for c in active):
            raise ValueError("Las posiciones activas no pueden ser relleno")
        if any(c is not CharClass.PADDING for c in self.classes[self.active_length :]):
            raise ValueError("Las posiciones tras la longitud activa deben ser relleno")
        return self

    @property
    def capacity(self) -> int:
        return len(self.classes)

    def to_matrix(self) -> np.ndarray:
        """Matriz one-hot M x 6 en el orden de CLASS_ORDER."""
        matrix = np.zeros((self.capacity, len(CLASS_ORDER)), dtype=np.uint8)
        for m, char_class in enumerate(self.classes):
            matrix[m, CLASS_ORDER.index(char_class)] = 1
        return matrix

    def to_json(self) -> dict:
        """Serialización con una clase por fila, relleno incluido hasta M.

        Returns:
            Diccionario con capacity, active_length y classes
        """
        return {
            "capacity": self.capacity,
            "active_length": self.active_length,
            "classes": [c.value for c in self.classes],
        }

    @classmethod
    def from_json(cls, data: dict, alphabet: Optional[Alphabet] = None) -> "OneHotEncoding":
        """Reconstruye la codificación desde su forma JSON.

        Args:
            data: Diccionario generado por ``to_json``
            alphabet: Alfabeto. Si es None, usa el ASCII imprimible.

        Returns:
            OneHotEncoding validada
        """
        return cls(
            classes=tuple(CharClass(c) for c in data["classes"]),
            active_length=data["active_length"],
            alphabet=alphabet or DEFAULT_ALPHABET,
        )


def encode_multi_hot(pattern: QueryPattern, capacity: Optional[int] = None) -> MultiHotEncoding:
    """Compila un patrón a su codificación multi-hot.

    Args:
        pattern: Patrón analizado
        capacity: Longitud máxima M. Si es None, usa la configuración por defecto.

    Returns:
        MultiHotEncoding con h[m, k] = 1 si alphabet[k] está en la posición m

    Raises:
        LengthOverflow: Si M_p > M
    """
    capacity = capacity or DEFAULT_PATTERN_CONFIG.capacity
    if pattern.length > capacity:
        raise LengthOverflow(
            f"El patrón {pattern.source!r} tiene {pattern.length} posiciones (M={capacity})"
        )
    alphabet = pattern.alphabet
    rows = np.zeros((capacity, alphabet.size), dtype=np.uint8)
    for m, charset in enumerate(pattern.positions):
        rows[m, [alphabet.index(c) for c in charset]] = 1
    return MultiHotEncoding(
        rows=rows,
        active_length=pattern.length,
        capacity=capacity,
        alphabet=alphabet,
    )


def encode_one_hot(pattern: QueryPattern, capacity: Optional[int] = None) -> OneHotEncoding:
    """Proyecta un patrón a la codificación one-hot de seis clases.

    La proyección descarta qué carácter concreto se pide en cada posición.

    Raises:
        NotRepresentable: Si una posición abarca dos o más clases
        LengthOverflow: Si M_p > M
    """
    capacity = capacity or DEFAULT_PATTERN_CONFIG.capacity
    if pattern.length > capacity:
        raise LengthOverflow(
            f"El patrón {pattern.source!r} tiene {pattern.length} posiciones (M={capacity})"
        )
    alphabet = pattern.alphabet
    classes: List[CharClass] = []
    for m, charset in enumerate(pattern.positions, start=1):
        spanned = {class_of(c, alphabet) for c in charset}
        if len(spanned) != 1:
            names = ", ".join(sorted(c.value for c in spanned))
            raise NotRepresentable(
                f"La posición {m} de {pattern.source!r} mezcla clases: {names}"
            )
        classes.append(spanned.pop())
    classes.extend([CharClass.PADDING] * (capacity - pattern.length))
    return OneHotEncoding(classes=tuple(classes), active_length=pattern.length, alphabet=alphabet)


def matches_multi(encoding: MultiHotEncoding, text: str) -> bool:
    """Decide si una cadena coincide (anclada) con una codificación multi-hot.

    Raises:
        UnknownCharacter: Si la cadena contiene caracteres fuera del alfabeto
    """
    indices = [encoding.alphabet.index(c) for c in text]
    if len(indices) != encoding.active_length:
        return False
    return bool(encoding.rows[np.arange(len(indices)), indices].all())


def matches_one(encoding: OneHotEncoding, text: str) -> bool:
    """Decide si la secuencia de clases de una cadena coincide con la codificación.

    Raises:
        UnknownCharacter: Si la cadena contiene caracteres fuera del alfabeto
    """
    classes = [class_of(c, encoding.alphabet) for c in text]
    if len(classes) != encoding.active_length:
        return False
    return all(a is b for a, b in zip(classes, encoding.classes))


def compile_pattern(
    src: str,
    alphabet: Optional[Alphabet] = None,
    capacity: Optional[int] = None,
    encoding: str = "multi",
) -> Union[MultiHotEncoding, OneHotEncoding]:
    """Analiza y compila un patrón en un solo paso."""
    capacity = capacity or DEFAULT_PATTERN_CONFIG.capacity
    pattern = parse_pattern(src, alphabet, capacity)
    if encoding == "multi":
        return encode_multi_hot(pattern, capacity)
    if encoding == "one":
        return encode_one_hot(pattern, capacity)
    raise ValueError(f"Codificación desconocida: {encoding}")


def _escape_literal(char: str) -> str:
    if char in METACHARS:
        return "\\" + char
    return char


def _class_body(chars: Iterable[str]) -> str:
    """Cuerpo de una clase con rangos comprimidos (a-z) para tramos de 3 o más."""
    ordered = sorted(chars, key=ord)
    parts: List[str] = []
    run: List[str] = []

    def flush() -> None:
        if not run:
            return
        escaped = ["\\" + c if c in CLASS_METACHARS else c for c in (run[0], run[-1])]
        if len(run) >= 3:
            parts.append(f"{escaped[0]}-{escaped[1]}")
        else:
            parts.extend("\\" + c if c in CLASS_METACHARS else c for c in run)
        run.clear()

    for char in ordered:
        if run and ord(char) != ord(run[-1]) + 1:
            flush()
        run.append(char)
    flush()
    return "".join(parts)


def position_token(charset: FrozenSet[str], alphabet: Optional[Alphabet] = None) -> str:
    """Token canónico que representa el conjunto de una posición."""
    alphabet = alphabet or DEFAULT_ALPHABET
    members = alphabet.members
    if charset == {SPACE}:
        return "\\s"
    if charset == DIGITS & members:
        return "\\d"
    if charset == LETTERS & members:
        return "[A-Za-z]"
    if charset == SEPARATORS & members:
        return "[,\\-_]"
    if len(charset) == 1:
        return _escape_literal(next(iter(charset)))
    complement = members - charset
    if complement and len(complement) < len(charset):
        return f"[^{_class_body(complement)}]"
    return f"[{_class_body(charset)}]"


def canonical_pattern(
    positions: Sequence[FrozenSet[str]], alphabet: Optional[Alphabet] = None
) -> str:
    """Emite un patrón con tokens por posición agrupados en repeticiones.

    Ejemplo: dígitos, dígitos, ':', dígitos, dígitos -> ``\\d{2}:\\d{2}``.
    """
    tokens = [position_token(charset, alphabet) for charset in positions]
    parts: List[str] = []
    index = 0
    while index < len(tokens):
        token = tokens[index]
        run = 1
        while index + run < len(tokens) and tokens[index + run] == token:
            run += 1
        parts.append(token if run == 1 else f"{token}{{{run}}}")
        index += run
    return "".join(parts)


# Clases que una consulta de formato conserva carácter a carácter
EXACT_FORMAT_CLASSES = frozenset({CharClass.SEPARATOR, CharClass.SPECIAL})


def format_query(
    text: str,
    alphabet: Optional[Alphabet] = None,
    capacity: Optional[int] = None,
) -> str:
    """Deriva la consulta de formato de una transcripción.

    Cada letra, dígito o espacio se sustituye por su clase; separadores y
    caracteres especiales se conservan exactos. La longitud se mantiene.

    Ejemplo: ``Abcd 123-1`` -> ``[A-Za-z]{4}\\s\\d{3}-\\d``.

    Args:
        text: Transcripción de ground truth
        alphabet: Alfabeto. Si es None, usa el ASCII imprimible.
        capacity: Longitud máxima M. Si es None, usa la configuración por defecto.

    Returns:
        Patrón canónico que acepta el texto y todos los de su formato

    Raises:
        PatternSyntaxError: Si el texto está vacío
        LengthOverflow: Si el texto supera M caracteres
        UnknownCharacter: Si el texto tiene caracteres fuera del alfabeto
    """
    alphabet = alphabet or DEFAULT_ALPHABET
    capacity = capacity or DEFAULT_PATTERN_CONFIG.capacity
    if not text:
        raise PatternSyntaxError("No se puede derivar una consulta de un texto vacío")
    if len(text) > capacity:
        raise LengthOverflow(f"El texto {text!r} tiene {len(text)} caracteres (M={capacity})")

    positions = []
    for char in text:
        char_class = class_of(char, alphabet)
        if char_class in EXACT_FORMAT_CLASSES:
            positions.append(frozenset(char))
        else:
            positions.append(class_members(char_class, alphabet))
    return canonical_pattern(positions, alphabet)
