"""Brute-force reference simulator used as a differential oracle.

It shares nothing with the compiler or prover beyond the path definitions:
the tool is stamped at every point of the trajectory, each stamp is checked
against the grid, and the grid is updated voxel by voxel.  Only 3-axis
sequential programs are supported.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import geometry as geo
from .errors import ConfigError, OutOfWorkspace, SceneError
from .gcode import LINEAR_AXES, ROTARY_AXES, Assignment, Linear, Rapid, RawProgram


@dataclass
class SimResult:
    safe: bool
    grid: dict  # voxel -> state name
    fault_line: int | None = None
    fault_class: str | None = None
    contested: frozenset = frozenset()
    motions: int = 0


def _box_cells(box, mu):
    lo = geo.scale_grid(box.lo, mu)
    hi = geo.scale_grid(box.hi, mu)
    return [
        (x, y, z)
        for x in range(lo[0], hi[0] + 1)
        for y in range(lo[1], hi[1] + 1)
        for z in range(lo[2], hi[2] + 1)
    ]


def _tool_cells(scene):
    if scene.tool_voxels is not None:
        raw = {tuple(int(v) for v in c) for c in scene.tool_voxels}
    else:
        raw = {c for b in scene.tool for c in _box_cells(b, scene.mu)}
    e = scene.epsilon
    return sorted(
        {(x + dx, y + dy, z + dz) for x, y, z in raw for dx in range(-e, e + 1) for dy in range(-e, e + 1) for dz in range(-e, e + 1)}
    )


def simulate(scene, program: RawProgram, path_mode: str = "bresenham") -> SimResult:
    if program.is_concurrent:
        raise ConfigError("the reference simulator is sequential only")
    mu = scene.mu
    grid = {c: "Empty" for c in _box_cells(scene.workspace, mu)}
    for b in scene.env:
        for c in _box_cells(b, mu):
            grid[c] = "Environment"
    for b in scene.stock:
        for c in _box_cells(b, mu):
            if grid.get(c) == "Environment":
                raise SceneError("environment and stock overlap")
            grid[c] = "Stock"
    tool = _tool_cells(scene)
    store = {ax: v for ax, v in zip(LINEAR_AXES, scene.home)}
    pos = geo.scale_grid(scene.home, mu)

    def stamp(p):
        return [(p[0] + a, p[1] + b, p[2] + c) for a, b, c in tool]

    for c in stamp(pos):
        grid[c] = "Tool"

    motions = 0
    for cmd in program.commands:
        if isinstance(cmd, Assignment):
            if cmd.var in LINEAR_AXES:
                store[cmd.var] = cmd.value
            continue
        if not isinstance(cmd, (Rapid, Linear)):
            raise ConfigError(f"unsupported command {cmd!r}")
        if any(ax in cmd.targets for ax in ROTARY_AXES):
            raise ConfigError("the reference simulator has no rotary axes")
        motions += 1
        for ax, v in cmd.targets.items():
            store[ax] = v
        target = geo.scale_grid(tuple(store[ax] for ax in LINEAR_AXES), mu)
        if isinstance(cmd, Rapid):
            points = sorted(geo.path_box(pos, target))
        elif path_mode == "supercover":
            points = geo.path_supercover(pos, target)
        else:
            points = geo.path_lin(pos, target)

        hit_env, hit_stock, swept = set(), set(), []
        for p in points:
            for c in stamp(p):
                state = grid.get(c)
                if state is None:
                    raise OutOfWorkspace(cmd.line, [c])
                if state == "Environment":
                    hit_env.add(c)
                elif state == "Stock":
                    hit_stock.add(c)
                swept.append(c)
        if hit_env:
            contested = hit_env | hit_stock if isinstance(cmd, Rapid) else hit_env
            return SimResult(False, grid, cmd.line, "EnvCollision", frozenset(contested), motions)
        if hit_stock and isinstance(cmd, Rapid):
            return SimResult(False, grid, cmd.line, "StockCollision", frozenset(hit_stock), motions)
        # the cut: everything swept is vacated, then the tool sits at the target
        for c in swept:
            grid[c] = "Empty"
        for c in stamp(target):
            grid[c] = "Tool"
        pos = target
    return SimResult(True, grid, motions=motions)
