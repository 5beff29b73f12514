"""Command-line front end: ``slcnc verify | compile | dump-heap``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .compiler import PATH_MODES, Scene, compile_program, dumps_triple, format_triple
from .concurrency import compile_concurrent, verify_concurrent
from .errors import ParseError, VerifierError
from .gcode import RawProgram, parse_program
from .heap import heap_from_assertion
from .prover import VerificationReport, execute

EXIT_SAFE, EXIT_ERROR, EXIT_FAULT = 0, 1, 2


@dataclass
class RunConfig:
    scene: Path
    programs: list = field(default_factory=list)
    mu: int | None = None
    epsilon: int | None = None
    path_mode: str = "bresenham"
    report: str = "text"
    dump_voxels: Path | None = None
    dump_triple: Path | None = None
    keep_going: bool = False

    def validate(self) -> None:
        if self.mu is not None and self.mu < 1:
            raise ValueError("--mu must be at least 1")
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("--epsilon must be non-negative")
        if self.path_mode not in PATH_MODES:
            raise ValueError(f"--path-mode must be one of {PATH_MODES}")
        if not self.programs:
            raise ValueError("at least one program file is required")


def _read(path: Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {path}") from None


def load_program(scene: Scene, paths) -> RawProgram:
    """One file is a whole program; several files are one thread each, in scene order."""
    parsed = []
    for p in paths:
        text = _read(p)
        try:
            parsed.append(parse_program(text))
        except ParseError as exc:
            raise ParseError(f"{p}: {exc}") from exc
    if len(parsed) == 1:
        return parsed[0]
    if any(prog.is_concurrent for prog in parsed):
        raise ValueError("THREAD sections are not allowed when passing one file per thread")
    if len(scene.threads) < len(parsed):
        raise ValueError(f"{len(parsed)} program files but the scene declares {len(scene.threads)} threads")
    merged = RawProgram()
    for spec, prog in zip(scene.threads, parsed):
        merged.threads[spec.id] = prog.commands
        for res in prog.resources:
            if all(r.name != res.name for r in merged.resources):
                merged.resources.append(res)
    return merged


def _compile(config: RunConfig):
    scene = Scene.load(_checked(config.scene)).with_overrides(config.mu, config.epsilon)
    program = load_program(scene, config.programs)
    if program.is_concurrent:
        return compile_concurrent(scene, program, config.path_mode)
    return compile_program(scene, program, config.path_mode)


def _checked(path) -> Path:
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return Path(path)


def verify(config: RunConfig) -> VerificationReport:
    compiled = _compile(config)
    triple = compiled.triple if hasattr(compiled, "threads") else compiled
    if config.dump_triple is not None:
        Path(config.dump_triple).write_text(dumps_triple(triple), encoding="utf-8")
    if hasattr(compiled, "threads"):
        report = verify_concurrent(compiled)
    else:
        report = execute(compiled, heap_from_assertion(compiled.pre), keep_going=config.keep_going)
    if config.dump_voxels is not None and report.heap is not None:
        Path(config.dump_voxels).write_text(report.heap.dump(), encoding="utf-8")
    return report


def render_report(report: VerificationReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=False) + "\n"
    return report.to_text()


def run(config: RunConfig, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        config.validate()
        report = verify(config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_ERROR
    except ParseError as exc:
        print(f"parse error: {exc}", file=err)
        return EXIT_ERROR
    except (VerifierError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=err)
        return EXIT_ERROR
    out.write(render_report(report, config.report))
    return EXIT_SAFE if report.safe else EXIT_FAULT


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("scene", type=Path, help="scene description (JSON)")
    p.add_argument("programs", type=Path, nargs="+", help="G-code file, or one file per thread")
    p.add_argument("--mu", type=int, help="override the grid multiplier")
    p.add_argument("--epsilon", type=int, help="override the tool safety margin (voxels)")
    p.add_argument("--path-mode", choices=PATH_MODES, default="bresenham")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slcnc", description="Separation-logic collision verifier for G-code")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="compile and verify a program")
    _common(v)
    v.add_argument("--report", choices=("text", "json"), default="text")
    v.add_argument("--dump-voxels", type=Path, metavar="PATH", help="write the final (or pre-fault) heap")
    v.add_argument("--dump-triple", type=Path, metavar="PATH", help="write the compiled triple as JSON")
    v.add_argument("--continue", dest="keep_going", action="store_true", help="keep scanning after the first fault")

    c = sub.add_parser("compile", help="print the compiled triple")
    _common(c)
    c.add_argument("--format", choices=("text", "json"), default="text")

    d = sub.add_parser("dump-heap", help="verify and print the final heap when safe")
    _common(d)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(
        scene=args.scene,
        programs=list(args.programs),
        mu=args.mu,
        epsilon=args.epsilon,
        path_mode=args.path_mode,
        report=getattr(args, "report", "text"),
        dump_voxels=getattr(args, "dump_voxels", None),
        dump_triple=getattr(args, "dump_triple", None),
        keep_going=getattr(args, "keep_going", False),
    )
    if args.command == "verify":
        return run(config)
    try:
        config.validate()
        if args.command == "compile":
            compiled = _compile(config)
            triple = compiled.triple if hasattr(compiled, "threads") else compiled
            sys.stdout.write(dumps_triple(triple) if args.format == "json" else format_triple(triple))
            return EXIT_SAFE
        report = verify(config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (VerifierError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    if not report.safe:
        sys.stderr.write(report.to_text())
        return EXIT_FAULT
    sys.stdout.write(report.heap.dump())
    return EXIT_SAFE


if __name__ == "__main__":
    raise SystemExit(main())
