"""Collision verification of G-code by separation-logic symbolic execution over a voxel heap."""

from .compiler import Scene, SLTriple, compile_program, dumps_triple, format_triple, loads_triple
from .concurrency import compile_concurrent, interleaving_oracle, verify_concurrent, verify_parallel
from .gcode import parse_program, render_program
from .heap import SpatialHeap, heap_from_assertion, satisfies
from .prover import VerificationReport, execute

__all__ = [
    "Scene",
    "SLTriple",
    "SpatialHeap",
    "VerificationReport",
    "compile_concurrent",
    "compile_program",
    "dumps_triple",
    "execute",
    "format_triple",
    "heap_from_assertion",
    "interleaving_oracle",
    "loads_triple",
    "parse_program",
    "render_program",
    "satisfies",
    "verify_concurrent",
    "verify_parallel",
]
