"""Concurrent verification: disjoint parallel composition and critical regions.

Each thread owns a local region of the workspace.  Shared regions are guarded
by named resources with an invariant that must hold whenever no thread holds
the lock.  Verification is static: footprints are compared pairwise, each
thread is executed over its own sub-heap, and every ``With`` block must leave
the invariant restored.  :func:`interleaving_oracle` brute-forces schedules to
cross-check that verdict on small instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from . import geometry as geo
from .compiler import (
    Compiler,
    Foreach,
    Move,
    Move5x,
    Mutate,
    Parallel,
    Scene,
    SLTriple,
    With,
    initial_state,
    _check_scene_placement,
)
from .errors import ConfigError, OracleOverflow, SceneError
from .gcode import RawProgram
from .heap import (
    EMPTY,
    ENVIRONMENT,
    STOCK,
    TRUE,
    Assertion,
    Region,
    SpatialHeap,
    diagnose,
    format_voxels,
    heap_from_assertion,
    regions_of,
    render,
    star,
    tool,
)
from .prover import Executor, FaultDetail, SharedResource, TraceEntry, VerificationReport


@dataclass(frozen=True)
class ResourceDecl:
    name: str
    region: frozenset
    invariant: Assertion | None = None

    @property
    def ri(self) -> Assertion:
        if self.invariant is None:
            return Region(self.region, EMPTY)
        return self.invariant


@dataclass
class ThreadProgram:
    id: str
    local: frozenset
    commands: tuple
    start: frozenset = frozenset()  # tool volume at thread start
    pre: Assertion | None = None
    post: Assertion | None = None

    @property
    def occupancy(self):
        return tool(self.id)


@dataclass
class ConcurrentProgram:
    triple: SLTriple
    threads: list
    resources: list
    initial: SpatialHeap = field(repr=False, default=None)


def thread_footprint(t: ThreadProgram, resources=()) -> frozenset:
    """Voxels the thread sweeps outside its critical regions.

    ``With`` bodies are excluded; only the tool volumes at block entry and
    exit count, minus any shared region (the block owns those at that time).
    """
    shared = frozenset().union(*(r.region for r in resources)) if resources else frozenset()
    out: set = set(t.start)
    for cmd in t.commands:
        if isinstance(cmd, Move):
            out |= cmd.v_path
        elif isinstance(cmd, Move5x):
            out |= cmd.v_path | cmd.stock_path
        elif isinstance(cmd, Foreach):
            out |= cmd.voxels
        elif isinstance(cmd, Mutate):
            out.add(cmd.voxel)
        elif isinstance(cmd, With):
            out |= (cmd.entry | cmd.exit) - shared
    return frozenset(out)


def _invariant_cells(decl: ResourceDecl) -> dict:
    cells = regions_of(decl.ri)
    return {c: cells.get(c, EMPTY) for c in decl.region}


# ---------------------------------------------------------------------------
# compilation


def _resolve_resources(scene: Scene, program: RawProgram) -> list[ResourceDecl]:
    specs = {r.name: r for r in scene.resources}
    names = [r.name for r in program.resources]
    names += [n for n in specs if n not in names]
    decls = []
    gcode_regions = {r.name: r.region for r in program.resources}
    mu = scene.mu
    for name in names:
        spec = specs.get(name)
        if spec is not None:
            region = scene.region(spec.region)
        else:
            region = scene.region(gcode_regions[name])
        invariant = None
        if spec is not None and spec.invariant:
            cells = {c: EMPTY for c in region}
            for kind, boxes in spec.invariant.items():
                state = {"Environment": ENVIRONMENT, "Stock": STOCK, "Empty": EMPTY}.get(kind)
                if state is None:
                    raise SceneError(f"resource {name}: invariant cannot mention {kind}")
                for b in boxes:
                    for c in b.voxels(mu):
                        if c not in region:
                            raise SceneError(f"resource {name}: invariant voxel {c} outside its region")
                        cells[c] = state
            by_state: dict = {}
            for c, s in cells.items():
                by_state.setdefault(s, set()).add(c)
            invariant = star(*(Region(frozenset(v), s) for s, v in sorted(by_state.items())))
        decls.append(ResourceDecl(name, region, invariant))
    return decls


def compile_concurrent(scene: Scene, program: RawProgram, path_mode: str = "bresenham") -> ConcurrentProgram:
    """Compile every thread against its own local heap."""
    if not program.is_concurrent:
        raise ConfigError("program has no THREAD sections")
    layout = scene.layout()
    specs = {t.id: t for t in scene.threads}
    missing = [tid for tid in program.threads if tid not in specs]
    if missing:
        raise SceneError(f"scene declares no local region for thread(s) {', '.join(missing)}")
    resources = _resolve_resources(scene, program)

    locals_ = {tid: scene.region(specs[tid].local) for tid in program.threads}
    for (a, la), (b, lb) in combinations(locals_.items(), 2):
        if la & lb:
            raise SceneError(f"local regions of {a} and {b} overlap at {format_voxels(sorted(la & lb)[:8])}")
    for r in resources:
        if not r.region <= layout.workspace:
            raise SceneError(f"resource {r.name} region leaves the workspace")
        for tid, loc in locals_.items():
            if r.region & loc:
                raise SceneError(f"resource {r.name} overlaps the local region of {tid}")
    for r1, r2 in combinations(resources, 2):
        if r1.region & r2.region:
            raise SceneError(f"resources {r1.name} and {r2.name} overlap")
    for tid, loc in locals_.items():
        if not loc <= layout.workspace:
            raise SceneError(f"local region of {tid} leaves the workspace")

    starts = {}
    for tid in program.threads:
        home = specs[tid].home
        pos = geo.scale_grid(home, scene.mu)
        v_start = layout.place(pos)
        _check_scene_placement(layout, v_start, f"tool {tid}")
        if not v_start <= locals_[tid]:
            raise SceneError(f"tool {tid} does not start inside its local region")
        starts[tid] = (pos, home, v_start)

    res_table = {r.name: (r.region, _invariant_cells(r)) for r in resources}
    threads = []
    parallel = []
    finals = []
    for tid, cmds in program.threads.items():
        pos, home, v_start = starts[tid]
        occ = tool(tid)
        state = initial_state(
            layout, pos, home, domain=locals_[tid], occupancy=occ, path_mode=path_mode, resources=res_table
        )
        pre = star(
            Region(v_start, occ),
            Region(state.env, ENVIRONMENT),
            Region(state.stock, STOCK),
            Region(state.empty, EMPTY),
        )
        body = tuple(Compiler(state).compile_sequence(cmds))
        v_final = layout.place(state.pos)
        post = star(Region(v_final, occ), TRUE)
        threads.append(ThreadProgram(tid, locals_[tid], body, v_start, pre, post))
        parallel.append((tid, body))
        finals.append(Region(v_final, occ))

    all_starts = frozenset().union(*(s[2] for s in starts.values()))
    empty = layout.workspace - layout.env - layout.stock - all_starts
    pre = star(
        *(Region(starts[tid][2], tool(tid)) for tid in program.threads),
        Region(layout.env, ENVIRONMENT),
        Region(layout.stock, STOCK),
        Region(empty, EMPTY),
    )
    triple = SLTriple(pre, (Parallel(tuple(parallel)),), star(*finals, TRUE))
    initial = heap_from_assertion(pre)
    for r in resources:
        diag = diagnose(initial.restrict(r.region), r.ri)
        if not diag.ok:
            raise SceneError(
                f"resource {r.name}: initial contents violate its invariant at {format_voxels(sorted(diag.contested)[:8])}"
            )
    return ConcurrentProgram(triple, threads, resources, initial)


# ---------------------------------------------------------------------------
# static verification


def _fault(cls, contested, thread=None, message="", cmd=None, assertion="") -> FaultDetail:
    line = getattr(cmd, "line", None)
    label = getattr(cmd, "label", None)
    return FaultDetail(cls, None, line, label, assertion, frozenset(contested), thread, message)


def verify_parallel(threads, resources, initial: SpatialHeap, *, order: str = "lex", on_step=None) -> VerificationReport:
    """Parallel composition check followed by per-thread local verification."""
    threads = list(threads)
    resources = list(resources)
    shared = {r.name: r for r in resources}
    dom = initial.dom
    for a, b in combinations(threads, 2):
        if a.local & b.local:
            raise SceneError(f"local regions of {a.id} and {b.id} overlap")
    for r in resources:
        if not r.region <= dom:
            raise SceneError(f"resource {r.name} region is not part of the heap")
        if any(r.region & t.local for t in threads):
            raise SceneError(f"resource {r.name} overlaps a local region")

    footprints = {t.id: thread_footprint(t, resources) for t in threads}
    for a, b in combinations(threads, 2):
        clash = footprints[a.id] & footprints[b.id]
        if clash:
            return VerificationReport(
                "Fault",
                _fault("MultiToolRace", clash, f"{a.id}|{b.id}", "thread footprints overlap outside critical regions"),
                initial,
            )
    for t in threads:
        stray = footprints[t.id] - t.local
        if stray:
            return VerificationReport(
                "Fault",
                _fault("OwnershipViolation", stray, t.id, "thread sweeps voxels outside its local region"),
                initial,
            )

    table = {r.name: SharedResource(r.region, r.ri) for r in resources}
    local_heaps = {}
    steps = 0
    trace: list[TraceEntry] = []
    pool = {name: initial.restrict(r.region) for name, r in shared.items()}
    for t in threads:
        h = initial.restrict(t.local)
        if t.pre is not None:
            diag = diagnose(h, t.pre)
            if not diag.ok:
                return VerificationReport(
                    "Fault",
                    _fault("AssertUnsat", diag.contested, t.id, "local heap violates the thread precondition", assertion=render(t.pre)),
                    initial,
                )
        ex = Executor(
            h,
            occupancy=t.occupancy,
            order=order,
            on_step=on_step,
            resources=table,
            pool=dict(pool),
            thread=t.id,
        )
        fault = ex.run(t.commands)
        steps += ex.steps
        trace += ex.trace
        if fault is not None:
            return VerificationReport("Fault", fault, _merge(initial, local_heaps | {t.id: ex.heap}, threads, pool), steps, trace)
        if t.post is not None:
            diag = diagnose(ex.heap, t.post)
            if not diag.ok:
                return VerificationReport(
                    "Fault",
                    _fault("PostconditionUnsat", diag.contested, t.id, "thread postcondition fails", assertion=render(t.post)),
                    _merge(initial, local_heaps | {t.id: ex.heap}, threads, pool),
                    steps,
                    trace,
                )
        local_heaps[t.id] = ex.heap
    return VerificationReport("Safe", None, _merge(initial, local_heaps, threads, pool), steps, trace)


def _merge(initial: SpatialHeap, local_heaps: dict, threads, pool: dict) -> SpatialHeap:
    cells = dict(initial.items())
    for t in threads:
        h = local_heaps.get(t.id)
        if h is not None:
            cells.update(h.restrict(t.local).items())
    for h in pool.values():
        cells.update(h.items())
    return SpatialHeap(cells)


def verify_concurrent(program: ConcurrentProgram, **kwargs) -> VerificationReport:
    return verify_parallel(program.threads, program.resources, program.initial, **kwargs)


# ---------------------------------------------------------------------------
# exhaustive interleaving oracle


@dataclass(frozen=True)
class _Event:
    kind: str  # begin | end | acquire | release | write
    cmd: object
    resource: str | None = None


def _events(commands) -> list:
    out = []
    for cmd in commands:
        if isinstance(cmd, (Move, Move5x)):
            out.append(_Event("begin", cmd))
            out.append(_Event("end", cmd))
        elif isinstance(cmd, (Mutate, Foreach)):
            out.append(_Event("write", cmd))
        elif isinstance(cmd, With):
            out.append(_Event("acquire", cmd, cmd.resource))
            out += _events(cmd.body)
            out.append(_Event("release", cmd, cmd.resource))
        elif isinstance(cmd, Parallel):
            raise TypeError("nested parallel composition is not supported")
    return out


@dataclass
class OracleVerdict:
    violations: dict = field(default_factory=dict)  # kind -> example contested voxels
    states: int = 0

    @property
    def safe(self) -> bool:
        return not self.violations

    @property
    def kinds(self) -> set:
        return set(self.violations)


def interleaving_oracle(threads, resources, initial: SpatialHeap, max_steps: int = 200_000) -> OracleVerdict:
    """Enumerate every schedule of thread events.

    A move is split into ``begin`` (its swept volume becomes claimed) and
    ``end`` (the heap is updated and the claim dropped), so two moves can be
    in flight at once.  A race is a begin whose sweep meets another thread's
    tool or live claim.  Acquire is enabled only while the resource is free;
    release checks the invariant.
    """
    threads = list(threads)
    programs = [_events(t.commands) for t in threads]
    occs = [t.occupancy for t in threads]
    names = sorted(r.name for r in resources)
    invariants = {r.name: (r.region, r.ri) for r in resources}
    verdict = OracleVerdict()
    seen: set = set()
    base = dict(initial.items())

    def note(kind, voxels):
        verdict.violations.setdefault(kind, frozenset(voxels))

    def explore(pcs, holders, claims, changed):
        key = (pcs, holders, frozenset(changed.items()))
        if key in seen:
            return
        seen.add(key)
        verdict.states += 1
        if verdict.states > max_steps:
            raise OracleOverflow(f"more than {max_steps} interleaving states")
        for i, prog in enumerate(programs):
            if pcs[i] >= len(prog):
                continue
            ev = prog[pcs[i]]
            nxt = pcs[:i] + (pcs[i] + 1,) + pcs[i + 1 :]
            if ev.kind == "acquire":
                slot = names.index(ev.resource)
                if holders[slot] is not None:
                    continue
                explore(nxt, holders[:slot] + (i,) + holders[slot + 1 :], claims, changed)
            elif ev.kind == "release":
                slot = names.index(ev.resource)
                region, ri = invariants[ev.resource]
                diag = diagnose(SpatialHeap({c: changed.get(c, base[c]) for c in region}), ri)
                if not diag.ok:
                    note("InvariantViolation", diag.contested)
                    continue
                explore(nxt, holders[:slot] + (None,) + holders[slot + 1 :], claims, changed)
            elif ev.kind == "begin":
                cmd = ev.cmd
                swept = cmd.v_path | cmd.stock_path if isinstance(cmd, Move5x) else cmd.v_path
                others = set()
                for j, cl in enumerate(claims):
                    if j != i:
                        others |= swept & cl
                for c in swept:
                    s = changed.get(c, base.get(c))
                    if s is not None and s.is_tool and s != occs[i]:
                        others.add(c)
                if others:
                    note("MultiToolRace", others)
                    continue
                env = {c for c in swept if changed.get(c, base.get(c)) == ENVIRONMENT}
                if env:
                    note("EnvCollision", env)
                    continue
                if cmd.kind == "G00" and isinstance(cmd, Move):
                    stock = {c for c in swept if changed.get(c, base.get(c)) == STOCK}
                    if stock:
                        note("StockCollision", stock)
                        continue
                new_claims = claims[:i] + (frozenset(swept),) + claims[i + 1 :]
                explore(nxt, holders, new_claims, changed)
            elif ev.kind == "end":
                cmd = ev.cmd
                upd = dict(changed)
                if isinstance(cmd, Move5x):
                    swept = cmd.v_path | cmd.stock_path
                    keep = cmd.stock_final - (cmd.v_path & cmd.stock_path) if cmd.kind == "G01" else cmd.stock_final
                    for c in swept:
                        upd[c] = EMPTY
                    for c in keep:
                        upd[c] = STOCK
                else:
                    for c in cmd.v_path:
                        upd[c] = EMPTY
                for c in cmd.v_final:
                    upd[c] = occs[i]
                upd = {c: s for c, s in upd.items() if base.get(c) != s}
                new_claims = claims[:i] + (frozenset(),) + claims[i + 1 :]
                explore(nxt, holders, new_claims, upd)
            elif ev.kind == "write":
                upd = dict(changed)
                voxels = (ev.cmd.voxel,) if isinstance(ev.cmd, Mutate) else ev.cmd.voxels
                for c in voxels:
                    upd[c] = ev.cmd.state
                upd = {c: s for c, s in upd.items() if base.get(c) != s}
                explore(nxt, holders, claims, upd)

    explore((0,) * len(programs), (None,) * len(names), (frozenset(),) * len(programs), {})
    return verdict
