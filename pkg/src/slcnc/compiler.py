"""Compilation of raw G-code into a concrete separation-logic triple.

The compiler owns every continuous quantity (the *store*): axis values,
angles, the grid multiplier and the safety margin.  What it emits is
``{pre} body {post}`` where every assertion and motion carries literal voxel
sets, so the prover never needs a variable store.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Union

from . import geometry as geo
from .errors import ConfigError, OutOfWorkspace, SceneError
from .gcode import (
    LINEAR_AXES,
    ROTARY_AXES,
    Assignment,
    Linear,
    Rapid,
    RawProgram,
    WithBlock,
)
from .geometry import Voxel, minkowski_sum, translate
from .heap import (
    EMPTY,
    ENVIRONMENT,
    STOCK,
    TOOL,
    TRUE,
    Assertion,
    Emp,
    Occupancy,
    PointsTo,
    Pure,
    Region,
    Star,
    TrueAssertion,
    format_voxels,
    render,
    star,
)

PATH_MODES = ("bresenham", "supercover")


# ---------------------------------------------------------------------------
# scene


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in machine units; both corners are inclusive."""

    lo: tuple
    hi: tuple

    def voxels(self, mu: int) -> frozenset:
        return geo.box_voxels(geo.scale_grid(self.lo, mu), geo.scale_grid(self.hi, mu))


@dataclass(frozen=True)
class RotaryConfig:
    primary_axis: str
    secondary_axis: str
    pivot: tuple = (0, 0, 0)

    def __post_init__(self):
        # validates axis labels
        geo.RotationSpec(self.primary_axis, self.secondary_axis)


@dataclass
class ThreadSpec:
    id: str
    local: Union[list, str]
    home: tuple = (0, 0, 0)


@dataclass
class ResourceSpec:
    name: str
    region: Union[list, str]
    invariant: dict | None = None


@dataclass
class Scene:
    workspace: Box
    env: list = field(default_factory=list)
    stock: list = field(default_factory=list)
    tool: list = field(default_factory=lambda: [Box((0, 0, 0), (0, 0, 0))])
    tool_voxels: list | None = None
    home: tuple = (0, 0, 0)
    mu: int = 1
    epsilon: int = 0
    rotary: RotaryConfig | None = None
    regions: dict = field(default_factory=dict)
    threads: list = field(default_factory=list)
    resources: list = field(default_factory=list)

    def with_overrides(self, mu: int | None = None, epsilon: int | None = None) -> "Scene":
        changes = {}
        if mu is not None:
            changes["mu"] = mu
        if epsilon is not None:
            changes["epsilon"] = epsilon
        return replace(self, **changes)

    # -- discretization -----------------------------------------------------

    def _boxes_voxels(self, boxes: Iterable[Box]) -> frozenset:
        out: set = set()
        for b in boxes:
            out |= b.voxels(self.mu)
        return frozenset(out)

    def region(self, ref) -> frozenset:
        """Voxels of a named region or of an inline box list."""
        if isinstance(ref, str):
            if ref not in self.regions:
                raise SceneError(f"unknown region {ref!r}")
            return self._boxes_voxels(self.regions[ref])
        return self._boxes_voxels(ref)

    def tool_footprint(self) -> frozenset:
        """``V_tool``: the scaled tool dilated once by the Chebyshev ball."""
        if self.tool_voxels is not None:
            raw = frozenset(tuple(int(v) for v in c) for c in self.tool_voxels)
        else:
            raw = self._boxes_voxels(self.tool)
        if not raw:
            raise SceneError("tool geometry is empty")
        return minkowski_sum(raw, geo.chebyshev_ball(self.epsilon))

    def layout(self) -> "Layout":
        if self.mu < 1 or int(self.mu) != self.mu:
            raise SceneError(f"mu must be a positive integer, got {self.mu!r}")
        if self.epsilon < 0 or int(self.epsilon) != self.epsilon:
            raise SceneError(f"epsilon must be a non-negative integer, got {self.epsilon!r}")
        workspace = self.workspace.voxels(self.mu)
        env = self._boxes_voxels(self.env)
        stock = self._boxes_voxels(self.stock)
        if env & stock:
            raise SceneError(f"environment and stock overlap at {format_voxels(env & stock)}")
        outside = (env | stock) - workspace
        if outside:
            raise SceneError(f"assets outside the workspace at {format_voxels(sorted(outside)[:8])}")
        pivot = None
        if self.rotary is not None:
            pivot = geo.scale_grid(self.rotary.pivot, self.mu)
        return Layout(
            workspace=workspace,
            env=env,
            stock=stock,
            tool=self.tool_footprint(),
            home=geo.scale_grid(self.home, self.mu),
            mu=self.mu,
            rotary=self.rotary,
            pivot=pivot,
        )

    # -- file format --------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        try:
            return _scene_from_dict(data)
        except SceneError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed scene: {exc}") from exc

    @classmethod
    def load(cls, path) -> "Scene":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SceneError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def _triple(v, what: str) -> tuple:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise SceneError(f"{what} must be an [x, y, z] triple")
    for c in v:
        if isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c):
            raise SceneError(f"{what} has a non-finite or non-numeric coordinate")
    return tuple(v)


def _box(d, what: str) -> Box:
    if not isinstance(d, dict) or "min" not in d or "max" not in d:
        raise SceneError(f"{what} must be a box {{min, max}}")
    return Box(_triple(d["min"], what + ".min"), _triple(d["max"], what + ".max"))


def _boxes(v, what: str) -> list:
    if v is None:
        return []
    if isinstance(v, dict):
        return [_box(v, what)]
    if isinstance(v, list):
        return [_box(b, f"{what}[{i}]") for i, b in enumerate(v)]
    raise SceneError(f"{what} must be a box or a list of boxes")


def _region_ref(v, what: str):
    return v if isinstance(v, str) else _boxes(v, what)


def _scene_from_dict(data: dict) -> Scene:
    if not isinstance(data, dict):
        raise SceneError("scene must be a JSON object")
    if "workspace" not in data:
        raise SceneError("scene lacks a workspace")
    tool = data.get("tool", {"min": [0, 0, 0], "max": [0, 0, 0]})
    tool_voxels = None
    tool_boxes: list = []
    if isinstance(tool, dict) and "voxels" in tool:
        tool_voxels = [_triple(c, "tool.voxels[]") for c in tool["voxels"]]
        if any(int(c) != c for v in tool_voxels for c in v):
            raise SceneError("tool voxels must be integers")
    else:
        tool_boxes = _boxes(tool, "tool")
    rotary = None
    if data.get("rotary") is not None:
        r = data["rotary"]
        try:
            rotary = RotaryConfig(
                str(r["primary_axis"]).upper(),
                str(r["secondary_axis"]).upper(),
                _triple(r.get("pivot", [0, 0, 0]), "rotary.pivot"),
            )
        except ValueError as exc:
            raise SceneError(f"rotary: {exc}") from exc
    mu = data.get("mu", 1)
    eps = data.get("epsilon", 0)
    if isinstance(mu, bool) or not isinstance(mu, int) or mu < 1:
        raise SceneError("mu must be a positive integer")
    if isinstance(eps, bool) or not isinstance(eps, int) or eps < 0:
        raise SceneError("epsilon must be a non-negative integer")
    regions = {str(k): _boxes(v, f"regions.{k}") for k, v in (data.get("regions") or {}).items()}
    threads = [
        ThreadSpec(
            str(t["id"]),
            _region_ref(t["local_region"], f"threads[{i}].local_region"),
            _triple(t.get("home", [0, 0, 0]), f"threads[{i}].home"),
        )
        for i, t in enumerate(data.get("threads") or [])
    ]
    resources = []
    for i, r in enumerate(data.get("resources") or []):
        inv = r.get("invariant")
        if inv is not None:
            if not isinstance(inv, dict):
                raise SceneError("resource invariant must map states to boxes")
            inv = {Occupancy.parse(k).kind: _boxes(v, f"resources[{i}].invariant.{k}") for k, v in inv.items()}
        resources.append(ResourceSpec(str(r["name"]), _region_ref(r["region"], f"resources[{i}].region"), inv))
    return Scene(
        workspace=_box(data["workspace"], "workspace"),
        env=_boxes(data.get("env"), "env"),
        stock=_boxes(data.get("stock"), "stock"),
        tool=tool_boxes,
        tool_voxels=tool_voxels,
        home=_triple(data.get("home", [0, 0, 0]), "home"),
        mu=mu,
        epsilon=eps,
        rotary=rotary,
        regions=regions,
        threads=threads,
        resources=resources,
    )


@dataclass(frozen=True)
class Layout:
    """A scene after scaling: every asset is a concrete voxel set."""

    workspace: frozenset
    env: frozenset
    stock: frozenset
    tool: frozenset
    home: Voxel
    mu: int
    rotary: RotaryConfig | None = None
    pivot: Voxel | None = None

    def place(self, pos: Voxel) -> frozenset:
        return translate(self.tool, pos)


# ---------------------------------------------------------------------------
# target language


@dataclass(frozen=True)
class Assert:
    assertion: Assertion
    line: int = 0
    label: int | None = None


@dataclass(frozen=True)
class Move:
    """``G00`` / ``G01`` over concrete start, final and swept tool volumes."""

    kind: str
    v_start: frozenset
    v_final: frozenset
    v_path: frozenset
    line: int = 0
    label: int | None = None


@dataclass(frozen=True)
class Move5x:
    """Simultaneous linear tool motion and rotary stock motion."""

    kind: str
    v_start: frozenset
    v_final: frozenset
    v_path: frozenset
    stock_start: frozenset
    stock_final: frozenset
    stock_path: frozenset
    line: int = 0
    label: int | None = None


@dataclass(frozen=True)
class Mutate:
    voxel: Voxel
    state: Occupancy
    line: int = 0
    label: int | None = None


@dataclass(frozen=True)
class Foreach:
    """``foreach c in voxels do [c] := state``."""

    voxels: frozenset
    state: Occupancy
    line: int = 0
    label: int | None = None


@dataclass(frozen=True)
class With:
    """Critical region; ``entry``/``exit`` are the tool volumes around it."""

    resource: str
    body: tuple
    entry: frozenset = frozenset()
    exit: frozenset = frozenset()
    line: int = 0
    label: int | None = None


@dataclass(frozen=True)
class Parallel:
    threads: tuple  # ((thread id, tuple of commands), ...)
    line: int = 0
    label: int | None = None


SLCommand = Union[Assert, Move, Move5x, Mutate, Foreach, With, Parallel]


@dataclass(frozen=True)
class SLTriple:
    pre: Assertion
    body: tuple
    post: Assertion


def source_ref(cmd) -> str:
    if cmd.label is not None:
        return f"N{cmd.label}"
    return f"L{cmd.line}"


# ---------------------------------------------------------------------------
# compilation


@dataclass
class CompileState:
    """The compiler's running view of the heap it is compiling against.

    ``domain`` is the set of voxels currently owned (the whole workspace for a
    sequential program, the local heap plus held resources for a thread);
    ``env``, ``stock`` and ``empty`` are the snapshots frozen into emitted
    assertions.
    """

    workspace: frozenset
    domain: frozenset
    env: frozenset
    stock: frozenset
    empty: frozenset
    tool: frozenset
    pos: Voxel
    mu: int
    occupancy: Occupancy = TOOL
    store: dict = field(default_factory=dict)
    angles: dict = field(default_factory=dict)
    rotary: RotaryConfig | None = None
    pivot: Voxel | None = None
    path_mode: str = "bresenham"
    resources: dict = field(default_factory=dict)  # name -> (region, {voxel: state})


def _frac(v) -> Fraction:
    return Fraction(str(v)) if isinstance(v, float) else Fraction(v)


def initial_state(
    layout: Layout,
    home_voxel: Voxel,
    home_raw: tuple,
    *,
    domain: frozenset | None = None,
    occupancy: Occupancy = TOOL,
    path_mode: str = "bresenham",
    resources: dict | None = None,
) -> CompileState:
    if path_mode not in PATH_MODES:
        raise ConfigError(f"unknown path mode {path_mode!r}")
    domain = layout.workspace if domain is None else domain
    v_start = layout.place(home_voxel)
    env = layout.env & domain
    stock = layout.stock & domain
    return CompileState(
        workspace=layout.workspace,
        domain=domain,
        env=env,
        stock=stock,
        empty=domain - env - stock - v_start,
        tool=layout.tool,
        pos=home_voxel,
        mu=layout.mu,
        occupancy=occupancy,
        store={ax: _frac(v) for ax, v in zip(LINEAR_AXES, home_raw)}
        | {ax: Fraction(0) for ax in ROTARY_AXES},
        angles={ax: Fraction(0) for ax in ROTARY_AXES},
        rotary=layout.rotary,
        pivot=layout.pivot,
        path_mode=path_mode,
        resources=dict(resources or {}),
    )


def _check_scene_placement(layout: Layout, v_start: frozenset, who: str = "tool") -> None:
    if not v_start <= layout.workspace:
        raise SceneError(f"{who} at home lies outside the workspace")
    clash = v_start & (layout.env | layout.stock)
    if clash:
        raise SceneError(f"{who} at home overlaps assets at {format_voxels(clash)}")


class Compiler:
    """Sequential compiler over a :class:`CompileState` (mutated in place)."""

    def __init__(self, state: CompileState):
        self.state = state

    # -- helpers --------------------------------------------------------------

    def _place(self, pos: Voxel) -> frozenset:
        return translate(self.state.tool, pos)

    def _require_inside(self, voxels: frozenset, line: int) -> None:
        outside = voxels - self.state.workspace
        if outside:
            raise OutOfWorkspace(line, outside)

    def _commit(self, v_path: frozenset, v_final: frozenset, new_stock: frozenset) -> None:
        st = self.state
        st.stock = new_stock & st.domain
        st.empty = ((st.empty | v_path) - v_final - st.env - st.stock) & st.domain

    def _linear_path(self, a: Voxel, b: Voxel) -> list:
        if self.state.path_mode == "supercover":
            return geo.path_supercover(a, b)
        return geo.path_lin(a, b)

    # -- entry points ----------------------------------------------------------

    def compile_sequence(self, commands) -> list:
        out: list = []
        for cmd in commands:
            out.extend(self.compile_command(cmd))
        return out

    def compile_command(self, cmd) -> list:
        st = self.state
        if isinstance(cmd, Assignment):
            st.store[cmd.var] = _frac(cmd.value)
            return []
        if isinstance(cmd, (Rapid, Linear)):
            return self._motion(cmd)
        if isinstance(cmd, WithBlock):
            return [self._with(cmd)]
        raise TypeError(f"cannot compile {cmd!r}")

    def _motion(self, cmd) -> list:
        st = self.state
        for axis, value in cmd.targets.items():
            st.store[axis] = _frac(value)
        kind = "G00" if isinstance(cmd, Rapid) else "G01"
        c_start = st.pos
        c_final = tuple(geo.scale_grid(st.store[ax], st.mu) for ax in LINEAR_AXES)
        rotary_words = [ax for ax in ROTARY_AXES if ax in cmd.targets]
        turning = [ax for ax in ROTARY_AXES if st.store[ax] != st.angles[ax]]
        if rotary_words or turning:
            out = self._motion_5x(cmd, kind, c_start, c_final, rotary_words + turning)
        else:
            out = self._motion_3x(cmd, kind, c_start, c_final)
        st.pos = c_final
        return out

    def _motion_3x(self, cmd, kind, c_start, c_final) -> list:
        st = self.state
        line, label = cmd.line, cmd.label
        traj = geo.path_box(c_start, c_final) if kind == "G00" else self._linear_path(c_start, c_final)
        v_start, v_final = self._place(c_start), self._place(c_final)
        v_path = minkowski_sum(traj, st.tool)
        self._require_inside(v_path, line)
        occ = st.occupancy
        if kind == "G00":
            out = [
                Assert(star(Region(v_start, occ), Region(v_path - v_start, EMPTY), TRUE), line, label),
                Move("G00", v_start, v_final, v_path, line, label),
            ]
            self._commit(v_path, v_final, st.stock - v_path)
            return out
        v_cut = (v_path - v_start) & st.stock
        out = [
            Assert(
                star(
                    Region(v_start, occ),
                    Region(st.env, ENVIRONMENT),
                    Region(st.stock, STOCK),
                    Region(st.empty, EMPTY),
                ),
                line,
                label,
            ),
            Assert(
                Pure(
                    "subset",
                    v_path - v_start,
                    st.stock | st.empty,
                    "V_path \\ V_start <= C_stock u C_empty",
                ),
                line,
                label,
            ),
            Move("G01", v_start, v_final, v_path, line, label),
        ]
        if v_cut - v_final:
            out.append(Foreach(v_cut - v_final, EMPTY, line, label))
        self._commit(v_path, v_final, st.stock - v_cut)
        return out

    def _motion_5x(self, cmd, kind, c_start, c_final, axes) -> list:
        st = self.state
        line, label = cmd.line, cmd.label
        cfg = st.rotary
        if cfg is None:
            raise ConfigError(f"line {line}: rotary motion but the scene has no rotary configuration")
        configured = (cfg.primary_axis, cfg.secondary_axis)
        for ax in axes:
            if ax not in configured:
                raise ConfigError(f"line {line}: axis {ax} is not one of the configured rotary axes {configured}")
        spec = geo.RotationSpec(
            cfg.primary_axis,
            cfg.secondary_axis,
            start_angles=(float(st.angles[cfg.primary_axis]), float(st.angles[cfg.secondary_axis])),
            end_angles=(float(st.store[cfg.primary_axis]), float(st.store[cfg.secondary_axis])),
            pivot=st.pivot,
        )
        traj = geo.path_box(c_start, c_final) if kind == "G00" else self._linear_path(c_start, c_final)
        v_start, v_final = self._place(c_start), self._place(c_final)
        v_path = minkowski_sum(traj, st.tool)
        stock_start = st.stock
        stock_path = geo.stock_sweep(stock_start, spec)
        stock_final = geo.rotate_set(stock_start, spec)
        self._require_inside(v_path | stock_path, line)
        occ = st.occupancy

        if kind == "G00":
            out = [
                Assert(
                    Pure(
                        "disjoint",
                        v_path | stock_path,
                        st.env,
                        "(V_path u Stock_path) & C_env == {}",
                        fault="EnvCollision",
                    ),
                    line,
                    label,
                ),
                Assert(
                    Pure("disjoint", v_path, stock_path, "V_path & Stock_path == {}", fault="StockCollision"),
                    line,
                    label,
                ),
                Assert(
                    star(
                        Region(v_start, occ),
                        Region(stock_start, STOCK),
                        Region(st.env, ENVIRONMENT),
                        Region((v_path - v_start) | (stock_path - stock_start), EMPTY),
                        TRUE,
                    ),
                    line,
                    label,
                ),
                Move5x("G00", v_start, v_final, v_path, stock_start, stock_final, stock_path, line, label),
            ]
            new_stock = stock_final
        else:
            v_cut = v_path & stock_path
            out = [
                Assert(
                    star(
                        Region(v_start, occ),
                        Region(stock_start, STOCK),
                        Region(st.empty, EMPTY),
                        Region(st.env, ENVIRONMENT),
                    ),
                    line,
                    label,
                ),
                Assert(
                    Pure("subset", v_path - v_start, st.empty | v_cut, "V_path \\ V_start <= C_empty u V_cut"),
                    line,
                    label,
                ),
                Assert(
                    Pure(
                        "subset",
                        stock_path - stock_start,
                        st.empty | v_cut,
                        "Stock_path \\ Stock_start <= C_empty u V_cut",
                    ),
                    line,
                    label,
                ),
                Move5x("G01", v_start, v_final, v_path, stock_start, stock_final, stock_path, line, label),
            ]
            new_stock = stock_final - v_cut
        st.angles[cfg.primary_axis] = st.store[cfg.primary_axis]
        st.angles[cfg.secondary_axis] = st.store[cfg.secondary_axis]
        self._commit(v_path | stock_path, v_final, new_stock)
        return out

    def _with(self, block: WithBlock) -> With:
        st = self.state
        if block.resource not in st.resources:
            raise ConfigError(f"line {block.line}: WITH {block.resource} needs a concurrent program")
        region, cells = st.resources[block.resource]
        entry = self._place(st.pos)
        saved_domain = st.domain
        st.domain = st.domain | region
        st.env |= frozenset(c for c, s in cells.items() if s == ENVIRONMENT)
        st.stock |= frozenset(c for c, s in cells.items() if s == STOCK)
        st.empty |= frozenset(c for c, s in cells.items() if s == EMPTY)
        body = self.compile_sequence(block.body)
        st.domain = saved_domain
        st.env -= region
        st.stock -= region
        st.empty -= region
        return With(block.resource, tuple(body), entry, self._place(st.pos), block.line, None)


def compile_sequence(commands, pos: Voxel, v_tool: frozenset, state: CompileState):
    """Compile ``commands`` starting at ``pos``; returns ``(sl_commands, pos_final)``.

    ``state`` carries the running copies of ``C_stock`` / ``C_empty`` and is
    updated in place.
    """
    state.pos = pos
    state.tool = frozenset(v_tool)
    for ax, v in zip(LINEAR_AXES, pos):
        state.store[ax] = Fraction(v, state.mu)
    compiler = Compiler(state)
    out = compiler.compile_sequence(commands)
    return out, state.pos


def compile_multiaxis(commands, pos: Voxel, angles: dict, v_tool: frozenset, state: CompileState):
    """Like :func:`compile_sequence` but with explicit starting table angles.

    Returns ``(sl_commands, pos_final, angles_final)``.
    """
    if state.rotary is None:
        raise ConfigError("multi-axis compilation needs a rotary configuration")
    for ax, v in angles.items():
        state.angles[ax] = state.store[ax] = _frac(v)
    out, final = compile_sequence(commands, pos, v_tool, state)
    return out, final, {ax: float(v) for ax, v in state.angles.items()}


def initial_assertion(layout: Layout, v_start: frozenset, occ: Occupancy = TOOL) -> Assertion:
    empty = layout.workspace - layout.env - layout.stock - v_start
    return star(
        Region(v_start, occ),
        Region(layout.env, ENVIRONMENT),
        Region(layout.stock, STOCK),
        Region(empty, EMPTY),
    )


def compile_program(scene: Scene, program: RawProgram, path_mode: str = "bresenham") -> SLTriple:
    """``{Σ0} body {R(V_final, Tool) * true}`` for a sequential program."""
    if program.is_concurrent:
        raise ConfigError("program has THREAD sections; use slcnc.concurrency.compile_concurrent")
    layout = scene.layout()
    v_start = layout.place(layout.home)
    _check_scene_placement(layout, v_start)
    pre = initial_assertion(layout, v_start)
    state = initial_state(layout, layout.home, scene.home, path_mode=path_mode)
    compiler = Compiler(state)
    body = compiler.compile_sequence(program.commands)
    post = star(Region(layout.place(state.pos), TOOL), TRUE)
    return SLTriple(pre, tuple(body), post)


# ---------------------------------------------------------------------------
# serialization


def _vox_list(voxels) -> list:
    return [list(c) for c in sorted(voxels)]


def _vox_set(items) -> frozenset:
    return frozenset(tuple(int(v) for v in c) for c in items)


def assertion_to_dict(P: Assertion) -> dict:
    if isinstance(P, Emp):
        return {"emp": {}}
    if isinstance(P, TrueAssertion):
        return {"true": {}}
    if isinstance(P, PointsTo):
        return {"points_to": {"voxel": list(P.voxel), "state": str(P.state)}}
    if isinstance(P, Region):
        return {"region": {"voxels": _vox_list(P.voxels), "state": str(P.state)}}
    if isinstance(P, Pure):
        return {
            "pure": {
                "op": P.op,
                "lhs": _vox_list(P.lhs),
                "rhs": _vox_list(P.rhs),
                "text": P.text,
                "fault": P.fault,
            }
        }
    if isinstance(P, Star):
        return {"star": [assertion_to_dict(p) for p in P.parts]}
    raise TypeError(f"not an assertion: {P!r}")


def assertion_from_dict(d: dict) -> Assertion:
    (tag, v), = d.items()
    if tag == "emp":
        return Emp()
    if tag == "true":
        return TrueAssertion()
    if tag == "points_to":
        return PointsTo(tuple(v["voxel"]), Occupancy.parse(v["state"]))
    if tag == "region":
        return Region(_vox_set(v["voxels"]), Occupancy.parse(v["state"]))
    if tag == "pure":
        return Pure(v["op"], _vox_set(v["lhs"]), _vox_set(v["rhs"]), v.get("text", ""), v.get("fault"))
    if tag == "star":
        return Star(tuple(assertion_from_dict(p) for p in v))
    raise ValueError(f"unknown assertion tag {tag!r}")


def command_to_dict(cmd) -> dict:
    meta = {"line": cmd.line, "label": cmd.label}
    if isinstance(cmd, Assert):
        return {"assert": assertion_to_dict(cmd.assertion), **meta}
    if isinstance(cmd, Move):
        return {
            "move": {
                "kind": cmd.kind,
                "v_start": _vox_list(cmd.v_start),
                "v_final": _vox_list(cmd.v_final),
                "v_path": _vox_list(cmd.v_path),
            },
            **meta,
        }
    if isinstance(cmd, Move5x):
        return {
            "move5x": {
                "kind": cmd.kind,
                "v_start": _vox_list(cmd.v_start),
                "v_final": _vox_list(cmd.v_final),
                "v_path": _vox_list(cmd.v_path),
                "stock_start": _vox_list(cmd.stock_start),
                "stock_final": _vox_list(cmd.stock_final),
                "stock_path": _vox_list(cmd.stock_path),
            },
            **meta,
        }
    if isinstance(cmd, Mutate):
        return {"mutate": {"voxel": list(cmd.voxel), "state": str(cmd.state)}, **meta}
    if isinstance(cmd, Foreach):
        return {"foreach": {"voxels": _vox_list(cmd.voxels), "state": str(cmd.state)}, **meta}
    if isinstance(cmd, With):
        return {
            "with": {
                "resource": cmd.resource,
                "body": [command_to_dict(c) for c in cmd.body],
                "entry": _vox_list(cmd.entry),
                "exit": _vox_list(cmd.exit),
            },
            **meta,
        }
    if isinstance(cmd, Parallel):
        return {
            "parallel": [[tid, [command_to_dict(c) for c in body]] for tid, body in cmd.threads],
            **meta,
        }
    raise TypeError(f"not a command: {cmd!r}")


def command_from_dict(d: dict):
    d = dict(d)
    line, label = d.pop("line", 0), d.pop("label", None)
    (tag, v), = d.items()
    if tag == "assert":
        return Assert(assertion_from_dict(v), line, label)
    if tag == "move":
        return Move(v["kind"], _vox_set(v["v_start"]), _vox_set(v["v_final"]), _vox_set(v["v_path"]), line, label)
    if tag == "move5x":
        return Move5x(
            v["kind"],
            _vox_set(v["v_start"]),
            _vox_set(v["v_final"]),
            _vox_set(v["v_path"]),
            _vox_set(v["stock_start"]),
            _vox_set(v["stock_final"]),
            _vox_set(v["stock_path"]),
            line,
            label,
        )
    if tag == "mutate":
        return Mutate(tuple(v["voxel"]), Occupancy.parse(v["state"]), line, label)
    if tag == "foreach":
        return Foreach(_vox_set(v["voxels"]), Occupancy.parse(v["state"]), line, label)
    if tag == "with":
        return With(
            v["resource"],
            tuple(command_from_dict(c) for c in v["body"]),
            _vox_set(v["entry"]),
            _vox_set(v["exit"]),
            line,
            label,
        )
    if tag == "parallel":
        return Parallel(tuple((tid, tuple(command_from_dict(c) for c in body)) for tid, body in v), line, label)
    raise ValueError(f"unknown command tag {tag!r}")


def triple_to_dict(triple: SLTriple) -> dict:
    return {
        "version": 1,
        "pre": assertion_to_dict(triple.pre),
        "body": [command_to_dict(c) for c in triple.body],
        "post": assertion_to_dict(triple.post),
    }


def triple_from_dict(d: dict) -> SLTriple:
    if d.get("version") != 1:
        raise ValueError(f"unsupported triple version {d.get('version')!r}")
    return SLTriple(
        assertion_from_dict(d["pre"]),
        tuple(command_from_dict(c) for c in d["body"]),
        assertion_from_dict(d["post"]),
    )


def dumps_triple(triple: SLTriple) -> str:
    """Canonical JSON text: sorted keys and lexicographically sorted voxels."""
    return json.dumps(triple_to_dict(triple), sort_keys=True, separators=(",", ":")) + "\n"


def loads_triple(text: str) -> SLTriple:
    return triple_from_dict(json.loads(text))


def format_command(cmd, indent: str = "") -> list[str]:
    ref = source_ref(cmd)
    if isinstance(cmd, Assert):
        return [f"{indent}{ref}: assert {render(cmd.assertion)}"]
    if isinstance(cmd, Move):
        sets = ",".join(format_voxels(s) for s in (cmd.v_start, cmd.v_final, cmd.v_path))
        return [f"{indent}{ref}: {cmd.kind}({sets})"]
    if isinstance(cmd, Move5x):
        sets = ",".join(
            format_voxels(s)
            for s in (cmd.v_start, cmd.v_final, cmd.v_path, cmd.stock_start, cmd.stock_final, cmd.stock_path)
        )
        return [f"{indent}{ref}: {cmd.kind}_5x({sets})"]
    if isinstance(cmd, Mutate):
        x, y, z = cmd.voxel
        return [f"{indent}{ref}: [({x},{y},{z})] := {cmd.state}"]
    if isinstance(cmd, Foreach):
        return [f"{indent}{ref}: foreach c in {format_voxels(cmd.voxels)} do [c] := {cmd.state}"]
    if isinstance(cmd, With):
        lines = [f"{indent}{ref}: with {cmd.resource} do"]
        for inner in cmd.body:
            lines += format_command(inner, indent + "  ")
        return lines + [f"{indent}end"]
    if isinstance(cmd, Parallel):
        lines = [f"{indent}parallel"]
        for tid, body in cmd.threads:
            lines.append(f"{indent}  thread {tid}:")
            for inner in body:
                lines += format_command(inner, indent + "    ")
        return lines + [f"{indent}end"]
    raise TypeError(f"not a command: {cmd!r}")


def format_triple(triple: SLTriple) -> str:
    """Readable canonical listing, one command per line."""
    lines = [f"{{ {render(triple.pre)} }}"]
    for cmd in triple.body:
        lines += format_command(cmd)
    lines.append(f"{{ {render(triple.post)} }}")
    return "\n".join(lines) + "\n"
