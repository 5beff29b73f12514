"""Exception hierarchy.

Verification faults are *results* (see :mod:`slcnc.prover`); the classes here
cover malformed input and misconfiguration only.
"""

from __future__ import annotations


class VerifierError(Exception):
    """Base class for every error raised by the package."""


class ParseError(VerifierError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class GCodeSyntaxError(ParseError):
    """Malformed number or word layout."""


class UnsupportedCommand(ParseError):
    """A G-word or address letter outside the accepted grammar."""


class UndeclaredResource(ParseError):
    def __init__(self, name: str, line: int | None = None):
        self.name = name
        super().__init__(f"WITH references undeclared resource {name!r}", line)


class SceneError(VerifierError):
    """The scene itself is inconsistent (overlapping assets, tool outside W...)."""


class OutOfWorkspace(VerifierError):
    def __init__(self, line: int | None, voxels=()):
        self.line = line
        self.voxels = frozenset(voxels)
        sample = sorted(self.voxels)[:4]
        super().__init__(f"line {line}: motion leaves the workspace at {sample}")


class ConfigError(VerifierError):
    """Rotary words without a rotary configuration, sweep budget exceeded, ..."""


class DomainError(VerifierError):
    """Heap mutation at a voxel outside the heap's domain."""


class OracleOverflow(VerifierError):
    """The exhaustive interleaving oracle ran out of its step budget."""
