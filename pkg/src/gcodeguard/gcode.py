"""Parse, serialize, and simulate a pragmatic g-code subset.

The accepted format is line-oriented ASCII. Each line is one of:

    command  ::=  CODE (" " PARAM)* (" "* ";" text)?      "G1 X5.0 Y1.0 E2.00000"
    comment  ::=  ";" text                                 ";LAYER:12"
    blank    ::=  whitespace only

``CODE`` is an uppercase letter followed by an unsigned integer (``G0``,
``G1``, ``G92``, ``M82``, ...). ``PARAM`` is a single uppercase letter
directly followed by a signed decimal number. The numeric text of every
parameter is preserved verbatim, so a document that is parsed and then
serialized without modification reproduces its input byte for byte.
Lines rebuilt after an edit are rendered canonically: code and parameters
separated by single spaces, parameters in their original order.

Only absolute extrusion is supported. ``M83`` (relative extrusion) is
rejected at parse time rather than silently misinterpreted.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, NamedTuple

__all__ = [
    "MalformedLineError",
    "MalformedFileError",
    "LineKind",
    "Param",
    "GcodeLine",
    "GcodeDocument",
    "PrinterState",
    "PrintSummary",
    "parse_line",
    "parse_document",
    "serialize",
    "simulate",
    "count_decimals",
]


class MalformedLineError(ValueError):
    """A single line does not match the accepted grammar."""

    def __init__(self, message: str, text: str = "", line_index: int | None = None):
        # line_index is 0-based like document line lists; messages are 1-based.
        location = f" (line {line_index + 1})" if line_index is not None else ""
        super().__init__(f"{message}{location}: {text!r}")
        self.text = text
        self.line_index = line_index


class MalformedFileError(ValueError):
    """A document-level failure: undecodable bytes or an unparseable line."""


class LineKind(enum.Enum):
    COMMAND = "command"
    COMMENT = "comment"
    BLANK = "blank"


class Param(NamedTuple):
    """One command parameter, e.g. ``X12.5`` -> ``Param("X", "12.5", 12.5)``.

    ``text`` is the exact numeric token from the source (or the token chosen
    when a line is rebuilt); ``value`` is its float interpretation.
    """

    letter: str
    text: str
    value: float

    @property
    def decimals(self) -> int:
        return count_decimals(self.text)


# Number tokens are plain decimals: no exponents, no leading letters, at most
# one dot. float() alone would admit "1e3", "nan" and "1_0", so syntax is
# checked by regex and float() is used only for the value.
_COMMAND_RE = re.compile(
    r"(?P<code>[A-Z][0-9]+)"
    r"(?P<params>(?:[ \t]+[A-Z][-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+))*)"
    r"[ \t]*(?:;(?P<comment>.*))?\Z"
)
_PARAM_RE = re.compile(r"([A-Z])([-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+))")
_LAYER_MARK_RE = re.compile(r"LAYER:([0-9]+)\Z")


def count_decimals(number_text: str) -> int:
    """Number of digits after the decimal point in a numeric token.

    ``"2.00000"`` -> 5, ``"2.0"`` -> 1, ``"2"`` -> 0. The count is textual:
    trailing zeros are significant here even though they do not change the
    float value.
    """
    dot = number_text.find(".")
    return 0 if dot < 0 else len(number_text) - dot - 1


@dataclass(frozen=True, slots=True)
class GcodeLine:
    """One source line plus its parse.

    ``raw_text`` has no trailing newline and is authoritative for
    serialization. ``params`` is empty for comments and blanks. ``comment``
    holds the text after ``;`` for both comment lines and inline command
    comments (without the semicolon).
    """

    raw_text: str
    kind: LineKind
    line_index: int = 0
    code: str | None = None
    params: tuple[Param, ...] = ()
    comment: str | None = None

    def param(self, letter: str) -> Param | None:
        for p in self.params:
            if p.letter == letter:
                return p
        return None

    def has_param(self, letter: str) -> bool:
        return self.param(letter) is not None

    def is_command(self, code: str) -> bool:
        return self.kind is LineKind.COMMAND and self.code == code

    @property
    def layer_number(self) -> int | None:
        """Layer index when this is a ``;LAYER:<n>`` marker comment."""
        if self.kind is not LineKind.COMMENT or self.comment is None:
            return None
        m = _LAYER_MARK_RE.fullmatch(self.comment.strip())
        return int(m.group(1)) if m else None


def render_command(code: str, params: Iterable[Param], comment: str | None = None) -> str:
    """Canonical text for a rebuilt command line."""
    parts = [code]
    parts.extend(f"{p.letter}{p.text}" for p in params)
    if comment is not None:
        parts.append(f";{comment}")
    return " ".join(parts)


def make_command(
    code: str,
    params: Iterable[Param] = (),
    comment: str | None = None,
    line_index: int = 0,
) -> GcodeLine:
    """Build a command line from parts; raw text is the canonical rendering."""
    params = tuple(params)
    return GcodeLine(
        raw_text=render_command(code, params, comment),
        kind=LineKind.COMMAND,
        line_index=line_index,
        code=code,
        params=params,
        comment=comment,
    )


def parse_line(text: str, line_index: int = 0) -> GcodeLine:
    """Parse one line (no newline characters allowed) into a ``GcodeLine``.

    Raises
    ------
    MalformedLineError
        On grammar violations, duplicate parameter letters, or ``M83``.
    """
    if "\n" in text or "\r" in text:
        raise MalformedLineError("line contains a newline", text, line_index)
    stripped = text.strip()
    if not stripped:
        return GcodeLine(raw_text=text, kind=LineKind.BLANK, line_index=line_index)
    if stripped.startswith(";"):
        return GcodeLine(
            raw_text=text,
            kind=LineKind.COMMENT,
            line_index=line_index,
            comment=stripped[1:],
        )

    m = _COMMAND_RE.fullmatch(stripped)
    if m is None:
        raise MalformedLineError("unrecognized line syntax", text, line_index)
    code = m.group("code")
    if code == "M83":
        raise MalformedLineError(
            "relative extrusion (M83) is outside the supported subset", text, line_index
        )
    params = tuple(
        Param(letter, num, float(num))
        for letter, num in _PARAM_RE.findall(m.group("params"))
    )
    if len({p.letter for p in params}) != len(params):
        raise MalformedLineError("duplicate parameter letter", text, line_index)
    return GcodeLine(
        raw_text=text,
        kind=LineKind.COMMAND,
        line_index=line_index,
        code=code,
        params=params,
        comment=m.group("comment"),
    )


@dataclass(frozen=True, slots=True)
class GcodeDocument:
    """An ordered, immutable sequence of parsed lines.

    ``layer_marks`` pairs each ``;LAYER:<n>`` comment with its line index, in
    document order. ``final_newline`` records whether the source ended with a
    newline so serialization can reproduce it.
    """

    lines: tuple[GcodeLine, ...]
    layer_marks: tuple[tuple[int, int], ...] = ()
    source_path: str | None = None
    final_newline: bool = True

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self) -> Iterator[GcodeLine]:
        return iter(self.lines)

    @property
    def layer_count(self) -> int:
        return len(self.layer_marks)

    def commands(self, *codes: str) -> Iterator[GcodeLine]:
        """Iterate command lines, optionally restricted to the given codes."""
        wanted = set(codes) or None
        for line in self.lines:
            if line.kind is LineKind.COMMAND and (wanted is None or line.code in wanted):
                yield line

    @staticmethod
    def from_lines(
        lines: Iterable[GcodeLine],
        source_path: str | None = None,
        final_newline: bool = True,
    ) -> "GcodeDocument":
        """Assemble a document, reassigning line indices and layer marks."""
        indexed = []
        marks = []
        for i, line in enumerate(lines):
            if line.line_index != i:
                line = replace(line, line_index=i)
            indexed.append(line)
            layer = line.layer_number
            if layer is not None:
                marks.append((i, layer))
        return GcodeDocument(
            lines=tuple(indexed),
            layer_marks=tuple(marks),
            source_path=source_path,
            final_newline=final_newline,
        )


def parse_document(data: bytes | str, source_path: str | None = None) -> GcodeDocument:
    """Parse a whole file.

    Accepts bytes (must decode as ASCII) or str. Raises
    ``MalformedFileError`` carrying the first offending line, if any.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("ascii")
        except UnicodeDecodeError as exc:
            raise MalformedFileError(f"{source_path or '<data>'}: not ASCII: {exc}") from exc
    else:
        text = data
    text = text.replace("\r\n", "\n")
    if "\r" in text:
        raise MalformedFileError(f"{source_path or '<data>'}: bare carriage return")

    raw_lines = text.split("\n")
    final_newline = True
    if raw_lines and raw_lines[-1] == "":
        raw_lines.pop()
    elif raw_lines:
        final_newline = False

    lines = []
    marks = []
    last_layer = None
    for i, raw in enumerate(raw_lines):
        try:
            line = parse_line(raw, line_index=i)
        except MalformedLineError as exc:
            raise MalformedFileError(f"{source_path or '<data>'}: {exc}") from exc
        lines.append(line)
        layer = line.layer_number
        if layer is not None:
            if last_layer is not None and layer <= last_layer:
                raise MalformedFileError(
                    f"{source_path or '<data>'}: layer markers not increasing "
                    f"({last_layer} then {layer} at line {i + 1})"
                )
            last_layer = layer
            marks.append((i, layer))
    return GcodeDocument(
        lines=tuple(lines),
        layer_marks=tuple(marks),
        source_path=source_path,
        final_newline=final_newline,
    )


def serialize(doc: GcodeDocument) -> bytes:
    """Render the document back to bytes.

    For a document straight out of ``parse_document`` this is the inverse of
    parsing, byte for byte. Rebuilt lines contribute their canonical text.
    """
    body = "\n".join(line.raw_text for line in doc.lines)
    if doc.lines and doc.final_newline:
        body += "\n"
    return body.encode("ascii")


@dataclass(slots=True)
class PrinterState:
    """Mutable machine registers tracked during simulation.

    Extrusion is absolute (M82): each extruding move contributes
    ``max(0, E_target - E_register)`` of filament, then the register jumps to
    the target. G92 rebases a register without extruding.
    """

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    e: float = 0.0
    extruded: float = 0.0

    def apply_move(self, line: GcodeLine) -> None:
        for p in line.params:
            if p.letter == "X":
                self.x = p.value
            elif p.letter == "Y":
                self.y = p.value
            elif p.letter == "Z":
                self.z = p.value
            elif p.letter == "E":
                if line.code == "G1":
                    self.extruded += max(0.0, p.value - self.e)
                self.e = p.value

    def apply_set_position(self, line: GcodeLine) -> None:
        for p in line.params:
            if p.letter == "X":
                self.x = p.value
            elif p.letter == "Y":
                self.y = p.value
            elif p.letter == "Z":
                self.z = p.value
            elif p.letter == "E":
                self.e = p.value


@dataclass(frozen=True, slots=True)
class PrintSummary:
    """Aggregates produced by one simulation pass over a document."""

    final_e: float
    total_extruded: float
    bounds: dict[str, tuple[float, float]]
    layer_count: int
    command_counts: dict[str, int]
    comment_lines: int
    blank_lines: int
    total_lines: int
    e_decimal_histogram: dict[int, int]


def simulate(doc: GcodeDocument) -> PrintSummary:
    """Execute the document against a fresh ``PrinterState``.

    Bounds cover only axis values named explicitly on G0/G1 moves; modal
    carry-over never widens them. The E-decimal histogram counts the textual
    decimal places of every E parameter on any command, G92 included.
    """
    state = PrinterState()
    counts: dict[str, int] = {}
    bounds: dict[str, tuple[float, float]] = {}
    histogram: dict[int, int] = {}
    comments = 0
    blanks = 0

    for line in doc.lines:
        if line.kind is LineKind.COMMENT:
            comments += 1
            continue
        if line.kind is LineKind.BLANK:
            blanks += 1
            continue
        code = line.code or ""
        counts[code] = counts.get(code, 0) + 1
        for p in line.params:
            if p.letter == "E":
                d = p.decimals
                histogram[d] = histogram.get(d, 0) + 1
        if code in ("G0", "G1"):
            for p in line.params:
                if p.letter in ("X", "Y", "Z"):
                    lo, hi = bounds.get(p.letter, (p.value, p.value))
                    bounds[p.letter] = (min(lo, p.value), max(hi, p.value))
            state.apply_move(line)
        elif code == "G92":
            state.apply_set_position(line)

    return PrintSummary(
        final_e=state.e,
        total_extruded=state.extruded,
        bounds=bounds,
        layer_count=doc.layer_count,
        command_counts=counts,
        comment_lines=comments,
        blank_lines=blanks,
        total_lines=len(doc.lines),
        e_decimal_histogram=histogram,
    )
