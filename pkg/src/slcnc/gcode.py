"""Lexing and parsing of raw G-code into a command list.

The accepted language is deliberately small: ``G00``/``G01`` motion with
``X Y Z A B C`` axis words and an optional feed ``F``, ``N`` block labels,
standalone assignments (``X = 5``), parenthesised or ``;`` comments, and four
extension keywords for concurrent programs::

    RESOURCE handoff IN shared_zone
    THREAD A:
    G01 X10 Y10 F100
    WITH handoff
      G01 X30
      G00 X10
    END

No geometry is evaluated here.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

from .errors import GCodeSyntaxError, UndeclaredResource, UnsupportedCommand

AXIS_WORDS = ("X", "Y", "Z", "A", "B", "C")
LINEAR_AXES = ("X", "Y", "Z")
ROTARY_AXES = ("A", "B", "C")

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")
_ASSIGN = re.compile(r"^([A-Za-z])\s*=\s*(\S+)$")
_COMMENT = re.compile(r"\([^)]*\)")


@dataclass
class Assignment:
    var: str
    value: float
    line: int = field(default=0, compare=False)
    label: int | None = None


@dataclass
class Rapid:
    targets: dict[str, float]
    line: int = field(default=0, compare=False)
    label: int | None = None


@dataclass
class Linear:
    targets: dict[str, float]
    feed: float | None = None
    line: int = field(default=0, compare=False)
    label: int | None = None


@dataclass
class ResourceDecl:
    name: str
    region: str
    line: int = field(default=0, compare=False)


@dataclass
class WithBlock:
    resource: str
    body: list = field(default_factory=list)
    line: int = field(default=0, compare=False)
    end_line: int = field(default=0, compare=False)


RawCommand = Union[Assignment, Rapid, Linear, ResourceDecl, WithBlock]
Motion = (Rapid, Linear)


@dataclass
class RawProgram:
    commands: list = field(default_factory=list)
    threads: dict[str, list] = field(default_factory=dict)
    resources: list[ResourceDecl] = field(default_factory=list)

    @property
    def is_concurrent(self) -> bool:
        return bool(self.threads)


def source_ref(cmd) -> str:
    """Human-readable location of a command: its N label if any, else the line."""
    label = getattr(cmd, "label", None)
    if label is not None:
        return f"N{label}"
    return f"line {cmd.line}"


# ---------------------------------------------------------------------------
# lexing


def _strip_comments(raw: str) -> str:
    text = _COMMENT.sub(" ", raw)
    if "(" in text or ")" in text:
        raise GCodeSyntaxError("unbalanced parenthesis in comment")
    return text.split(";", 1)[0].strip()


def _parse_number(token: str, lineno: int) -> float:
    if not _NUMBER.fullmatch(token):
        raise GCodeSyntaxError(f"malformed number {token!r}", lineno)
    value = float(token)
    if not math.isfinite(value):
        raise GCodeSyntaxError(f"non-finite number {token!r}", lineno)
    return value


def tokenize(text: str, lineno: int) -> list[tuple[str, str]]:
    """Split a block into ``(letter, number-text)`` words.

    Both ``X3Y4`` and ``X 3 Y 4`` are accepted.
    """
    words = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if not ch.isalpha():
            raise GCodeSyntaxError(f"expected an address letter at {text[i:]!r}", lineno)
        letter = ch.upper()
        i += 1
        while i < n and text[i].isspace():
            i += 1
        m = _NUMBER.match(text, i)
        if m is None:
            raise GCodeSyntaxError(f"malformed number after {letter!r}", lineno)
        i = m.end()
        if i < n and not (text[i].isspace() or text[i].isalpha()):
            raise GCodeSyntaxError(f"malformed number {text[m.start():i + 1]!r}", lineno)
        words.append((letter, m.group()))
    return words


# ---------------------------------------------------------------------------
# parsing


class _Parser:
    def __init__(self):
        self.program = RawProgram()
        self.modes: dict[str | None, type | None] = {}
        self.thread: str | None = None
        self.stack: list[WithBlock] = []

    @property
    def sink(self) -> list:
        if self.stack:
            return self.stack[-1].body
        if self.thread is not None:
            return self.program.threads[self.thread]
        return self.program.commands

    def feed_line(self, raw: str, lineno: int) -> None:
        text = _strip_comments(raw)
        if not text:
            return
        head = text.split(None, 1)
        keyword = head[0].rstrip(":").upper()
        if keyword == "THREAD":
            return self._thread(text, lineno)
        if keyword == "RESOURCE":
            return self._resource(text, lineno)
        if keyword == "WITH":
            return self._with(text, lineno)
        if keyword == "END":
            return self._end(text, lineno)
        m = _ASSIGN.match(text)
        if m:
            var = m.group(1).upper()
            if var not in AXIS_WORDS + ("F",):
                raise UnsupportedCommand(f"assignment to unknown word {var!r}", lineno)
            self.sink.append(Assignment(var, _parse_number(m.group(2), lineno), lineno))
            return
        self._block(text, lineno)

    def _thread(self, text: str, lineno: int) -> None:
        parts = text.split()
        if self.stack:
            raise GCodeSyntaxError("THREAD header inside a WITH block", lineno)
        if len(parts) != 2:
            raise GCodeSyntaxError("expected 'THREAD <id>:'", lineno)
        tid = parts[1].rstrip(":")
        if not tid:
            raise GCodeSyntaxError("empty thread id", lineno)
        if tid in self.program.threads:
            raise GCodeSyntaxError(f"duplicate thread id {tid!r}", lineno)
        if self.program.commands:
            raise GCodeSyntaxError("commands before the first THREAD header", lineno)
        self.program.threads[tid] = []
        self.thread = tid

    def _resource(self, text: str, lineno: int) -> None:
        parts = text.split()
        if self.stack:
            raise GCodeSyntaxError("RESOURCE declared inside a WITH block", lineno)
        if len(parts) == 4 and parts[2].upper() == "IN":
            name, region = parts[1], parts[3]
        elif len(parts) == 2:
            name = region = parts[1]
        else:
            raise GCodeSyntaxError("expected 'RESOURCE <name> IN <region>'", lineno)
        if any(r.name == name for r in self.program.resources):
            raise GCodeSyntaxError(f"resource {name!r} declared twice", lineno)
        self.program.resources.append(ResourceDecl(name, region, lineno))

    def _with(self, text: str, lineno: int) -> None:
        parts = text.split()
        if len(parts) == 3 and parts[2].upper() == "DO":
            parts = parts[:2]
        if len(parts) != 2:
            raise GCodeSyntaxError("expected 'WITH <resource>'", lineno)
        name = parts[1]
        if any(b.resource == name for b in self.stack):
            raise GCodeSyntaxError(f"nested WITH on resource {name!r}", lineno)
        block = WithBlock(name, [], lineno)
        self.sink.append(block)
        self.stack.append(block)

    def _end(self, text: str, lineno: int) -> None:
        if len(text.split()) != 1:
            raise GCodeSyntaxError("END takes no arguments", lineno)
        if not self.stack:
            raise GCodeSyntaxError("END without matching WITH", lineno)
        self.stack.pop().end_line = lineno

    def _block(self, text: str, lineno: int) -> None:
        words = tokenize(text, lineno)
        label = None
        mode = None
        targets: dict[str, float] = {}
        feed = None
        for letter, num in words:
            if letter == "N":
                if label is not None:
                    raise GCodeSyntaxError("two N labels in one block", lineno)
                if not re.fullmatch(r"\d+", num):
                    raise GCodeSyntaxError(f"malformed block label N{num}", lineno)
                label = int(num)
            elif letter == "G":
                try:
                    code = float(num)
                except ValueError:
                    raise GCodeSyntaxError(f"malformed G-word G{num}", lineno) from None
                if code == 0 and "." not in num:
                    new_mode = Rapid
                elif code == 1 and "." not in num:
                    new_mode = Linear
                else:
                    raise UnsupportedCommand(f"unsupported G-word G{num}", lineno)
                if mode is not None:
                    raise GCodeSyntaxError("two motion G-words in one block", lineno)
                mode = new_mode
            elif letter in AXIS_WORDS:
                if letter in targets:
                    raise GCodeSyntaxError(f"axis word {letter} repeated", lineno)
                targets[letter] = _parse_number(num, lineno)
            elif letter == "F":
                if feed is not None:
                    raise GCodeSyntaxError("feed word repeated", lineno)
                feed = _parse_number(num, lineno)
            else:
                raise UnsupportedCommand(f"unsupported word {letter}{num}", lineno)

        if mode is not None:
            self.modes[self.thread] = mode
        if not targets:
            if feed is not None:
                self.sink.append(Assignment("F", feed, lineno, label))
            return
        active = mode or self.modes.get(self.thread)
        if active is None:
            raise GCodeSyntaxError("axis words without an active G00/G01 mode", lineno)
        if active is Rapid:
            # feed has no spatial meaning; on a rapid block it is simply dropped
            self.sink.append(Rapid(targets, lineno, label))
        else:
            self.sink.append(Linear(targets, feed, lineno, label))

    def finish(self) -> RawProgram:
        if self.stack:
            raise GCodeSyntaxError(f"WITH {self.stack[-1].resource} never closed", self.stack[-1].line)
        declared = {r.name for r in self.program.resources}
        for cmds in [self.program.commands, *self.program.threads.values()]:
            for block in _walk_with(cmds):
                if block.resource not in declared:
                    raise UndeclaredResource(block.resource, block.line)
        return self.program


def _walk_with(commands):
    for cmd in commands:
        if isinstance(cmd, WithBlock):
            yield cmd
            yield from _walk_with(cmd.body)


def parse_program(text: str) -> RawProgram:
    """Parse G-code text into a :class:`RawProgram`."""
    parser = _Parser()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parser.feed_line(raw, lineno)
    return parser.finish()


# ---------------------------------------------------------------------------
# canonical rendering


def _fmt(value: float) -> str:
    return repr(float(value))


def _render_cmd(cmd, indent: str, out: list[str]) -> None:
    prefix = indent + (f"N{cmd.label} " if getattr(cmd, "label", None) is not None else "")
    if isinstance(cmd, Assignment):
        out.append(f"{prefix}{cmd.var} = {_fmt(cmd.value)}")
    elif isinstance(cmd, (Rapid, Linear)):
        words = [("G00" if isinstance(cmd, Rapid) else "G01")]
        words += [f"{axis}{_fmt(cmd.targets[axis])}" for axis in AXIS_WORDS if axis in cmd.targets]
        if isinstance(cmd, Linear) and cmd.feed is not None:
            words.append(f"F{_fmt(cmd.feed)}")
        out.append(prefix + " ".join(words))
    elif isinstance(cmd, WithBlock):
        out.append(f"{indent}WITH {cmd.resource}")
        for inner in cmd.body:
            _render_cmd(inner, indent + "  ", out)
        out.append(f"{indent}END")
    else:
        raise TypeError(f"cannot render {cmd!r}")


def render_program(program: RawProgram) -> str:
    """Canonical text form; ``parse_program(render_program(p)) == p``."""
    out: list[str] = []
    for res in program.resources:
        out.append(f"RESOURCE {res.name} IN {res.region}")
    for cmd in program.commands:
        _render_cmd(cmd, "", out)
    for tid, cmds in program.threads.items():
        out.append(f"THREAD {tid}:")
        for cmd in cmds:
            _render_cmd(cmd, "  ", out)
    return "\n".join(out) + ("\n" if out else "")
