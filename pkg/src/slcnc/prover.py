"""Zero-store symbolic execution of compiled triples over a spatial heap.

Every ``Assert`` is a gateway: if it fails, no later command touches the heap.
Motion commands apply the small-step semantics of G00/G01 (and their 5-axis
forms) directly; there is no variable store to consult.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .compiler import Assert, Foreach, Move, Move5x, Mutate, Parallel, SLTriple, With, source_ref
from .heap import (
    EMPTY,
    ENVIRONMENT,
    STOCK,
    TOOL,
    Assertion,
    Occupancy,
    Pure,
    SpatialHeap,
    atoms,
    diagnose,
    format_voxels,
    render,
)

FAULT_CLASSES = (
    "EnvCollision",
    "StockCollision",
    "AssertUnsat",
    "PostconditionUnsat",
    "OwnershipViolation",
    "MultiToolRace",
    "InvariantViolation",
)
ORDERS = ("lex", "reverse")


@dataclass(frozen=True)
class Fault:
    """Outcome of a motion whose fault set is hit."""

    fault_class: str
    contested: frozenset
    reason: str = ""


@dataclass
class FaultDetail:
    fault_class: str
    command_index: int | None
    line: int | None
    label: int | None
    assertion: str
    contested: frozenset
    thread: str | None = None
    message: str = ""

    @property
    def source(self) -> str:
        if self.label is not None:
            return f"N{self.label}"
        if self.line:
            return f"line {self.line}"
        return "program"

    def to_dict(self) -> dict:
        return {
            "class": self.fault_class,
            "command_index": self.command_index,
            "line": self.line,
            "label": self.label,
            "source": self.source,
            "thread": self.thread,
            "assertion": self.assertion,
            "contested": [list(c) for c in sorted(self.contested)],
            "message": self.message,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaultDetail":
        return cls(
            d["class"],
            d["command_index"],
            d["line"],
            d["label"],
            d["assertion"],
            frozenset(tuple(c) for c in d["contested"]),
            d.get("thread"),
            d.get("message", ""),
        )


@dataclass
class TraceEntry:
    index: int
    source: str
    op: str
    status: str
    thread: str | None = None


@dataclass
class VerificationReport:
    verdict: str  # "Safe" | "Fault"
    fault: FaultDetail | None = None
    heap: SpatialHeap | None = None  # final heap when safe, pre-fault heap otherwise
    steps: int = 0
    trace: list = field(default_factory=list)
    extra_faults: list = field(default_factory=list)

    @property
    def safe(self) -> bool:
        return self.verdict == "Safe"

    def to_dict(self) -> dict:
        tool_voxels = []
        if self.heap is not None:
            tool_voxels = [list(c) for c in sorted(self.heap.voxels_of_kind("Tool"))]
        return {
            "version": 1,
            "verdict": self.verdict,
            "steps": self.steps,
            "fault": self.fault.to_dict() if self.fault else None,
            "additional_faults": [f.to_dict() for f in self.extra_faults],
            "tool": tool_voxels,
            "trace": [
                {"index": t.index, "source": t.source, "op": t.op, "status": t.status, "thread": t.thread}
                for t in self.trace
            ],
        }

    def to_text(self) -> str:
        lines = []
        if self.safe:
            lines.append("SAFE")
        else:
            f = self.fault
            where = f.source if f.command_index is None else f"{f.source} (command {f.command_index})"
            if f.thread is not None:
                where += f" in thread {f.thread}"
            lines.append(f"FAULT {f.fault_class} at {where}")
            if f.message:
                lines.append(f"  reason: {f.message}")
            if f.assertion:
                lines.append(f"  assertion: {_shorten(f.assertion)}")
            lines.append(f"  contested: {format_voxels(f.contested)}")
        lines.append(f"steps: {self.steps}")
        if self.heap is not None:
            for owner, voxels in _tools_by_owner(self.heap):
                label = "tool" if owner is None else f"tool[{owner}]"
                lines.append(f"{label}: {format_voxels(voxels)}")
        for f in self.extra_faults:
            lines.append(f"also: {f.fault_class} at {f.source}, contested {format_voxels(f.contested)}")
        lines.append("trace:")
        for t in self.trace:
            who = f"[{t.thread}] " if t.thread is not None else ""
            lines.append(f"  {t.index:4d} {who}{t.source:<8} {t.op:<8} {t.status}")
        return "\n".join(lines) + "\n"


def _shorten(text: str, limit: int = 400) -> str:
    return text if len(text) <= limit else text[: limit - 3] + "..."


def _tools_by_owner(h: SpatialHeap):
    groups: dict = {}
    for c, s in h.items():
        if s.is_tool:
            groups.setdefault(s.owner, set()).add(c)
    return sorted(((k, frozenset(v)) for k, v in groups.items()), key=lambda kv: str(kv[0]))


# ---------------------------------------------------------------------------
# motion semantics


def _ordered(voxels, order: str):
    return sorted(voxels, reverse=(order == "reverse"))


def _foreign_tools(h: SpatialHeap, voxels, occ: Occupancy) -> frozenset:
    return frozenset(c for c in voxels if (s := h.get(c)) is not None and s.is_tool and s != occ)


def _outside(h: SpatialHeap, voxels) -> frozenset:
    return frozenset(c for c in voxels if c not in h)


def _relocate(h, clear, place_stock, v_final, occ, order) -> SpatialHeap:
    out = h.copy()
    for c in _ordered(clear, order):
        out[c] = EMPTY
    for c in _ordered(place_stock, order):
        out[c] = STOCK
    for c in _ordered(v_final, order):
        out[c] = occ
    return out


def exec_g00(h: SpatialHeap, v_start, v_final, v_path, occupancy: Occupancy = TOOL, order: str = "lex"):
    """Rapid move: returns the new heap, or a :class:`Fault` if the box sweep hits anything."""
    missing = _outside(h, v_path)
    if missing:
        return Fault("OwnershipViolation", missing, "swept volume leaves the owned heap")
    env = frozenset(c for c in v_path if h[c] == ENVIRONMENT)
    stock = frozenset(c for c in v_path if h[c] == STOCK)
    if env:
        return Fault("EnvCollision", env | stock, "rapid sweep meets the environment")
    if stock:
        return Fault("StockCollision", stock, "rapid sweep meets stock")
    others = _foreign_tools(h, v_path, occupancy)
    if others:
        return Fault("MultiToolRace", others, "rapid sweep meets another tool")
    return _relocate(h, frozenset(v_path) - frozenset(v_final), (), v_final, occupancy, order)


def exec_g01(h: SpatialHeap, v_start, v_final, v_path, occupancy: Occupancy = TOOL, order: str = "lex"):
    """Linear cut: stock along the sweep is consumed, the environment is a fault."""
    missing = _outside(h, v_path)
    if missing:
        return Fault("OwnershipViolation", missing, "swept volume leaves the owned heap")
    env = frozenset(c for c in v_path if h[c] == ENVIRONMENT)
    if env:
        return Fault("EnvCollision", env, "cutting sweep meets the environment")
    others = _foreign_tools(h, v_path, occupancy)
    if others:
        return Fault("MultiToolRace", others, "cutting sweep meets another tool")
    return _relocate(h, frozenset(v_path) - frozenset(v_final), (), v_final, occupancy, order)


def _exec_5x(kind, h, v_start, v_final, v_path, stock_start, stock_final, stock_path, occupancy, order):
    v_path, stock_path = frozenset(v_path), frozenset(stock_path)
    swept = v_path | stock_path
    missing = _outside(h, swept)
    if missing:
        return Fault("OwnershipViolation", missing, "swept volume leaves the owned heap")
    env = frozenset(c for c in swept if h[c] == ENVIRONMENT)
    if env:
        return Fault("EnvCollision", env, "tool or stock sweep meets the environment")
    others = _foreign_tools(h, swept, occupancy)
    if others:
        return Fault("MultiToolRace", others, "sweep meets another tool")
    v_cut = v_path & stock_path
    if kind == "G00":
        if v_cut:
            return Fault("StockCollision", v_cut, "rapid tool sweep meets the moving stock")
        new_stock = frozenset(stock_final)
    else:
        new_stock = frozenset(stock_final) - v_cut
    return _relocate(h, swept, new_stock, v_final, occupancy, order)


def exec_g00_5x(h, v_start, v_final, v_path, stock_start, stock_final, stock_path, occupancy=TOOL, order="lex"):
    return _exec_5x("G00", h, v_start, v_final, v_path, stock_start, stock_final, stock_path, occupancy, order)


def exec_g01_5x(h, v_start, v_final, v_path, stock_start, stock_final, stock_path, occupancy=TOOL, order="lex"):
    return _exec_5x("G01", h, v_start, v_final, v_path, stock_start, stock_final, stock_path, occupancy, order)


# ---------------------------------------------------------------------------
# assertion failures


def classify_assert_failure(h: SpatialHeap, P: Assertion, occupancy: Occupancy = TOOL):
    """``(fault class, contested voxels)`` for a failed assertion, ``None`` if it holds."""
    diag = diagnose(h, P)
    if diag.ok:
        return None
    for pure in diag.failed_pures:
        if pure.fault is not None:
            return pure.fault, pure.witness()
    contested = diag.contested
    outside = diag.missing | frozenset(c for c in contested if c not in h)
    if outside:
        return "OwnershipViolation", outside
    values = {c: h.get(c) for c in contested}
    env = frozenset(c for c, s in values.items() if s == ENVIRONMENT)
    stock = frozenset(c for c, s in values.items() if s == STOCK)
    others = frozenset(c for c, s in values.items() if s is not None and s.is_tool and s != occupancy)
    if env:
        return "EnvCollision", contested
    if others:
        return "MultiToolRace", others
    if stock and not diag.overlap:
        return "StockCollision", contested
    return "AssertUnsat", contested


def _op_name(cmd) -> str:
    if isinstance(cmd, Assert):
        return "pure" if all(isinstance(a, Pure) for a in atoms(cmd.assertion)) else "assert"
    if isinstance(cmd, Move):
        return cmd.kind
    if isinstance(cmd, Move5x):
        return cmd.kind + "_5x"
    if isinstance(cmd, With):
        return "with"
    return type(cmd).__name__.lower()


# ---------------------------------------------------------------------------
# executor


class _Abort(Exception):
    pass


@dataclass
class SharedResource:
    """What the executor needs to know about a lockable region."""

    region: frozenset
    invariant: Assertion


class Executor:
    """Runs a command list over a heap.

    ``pool`` holds the heaps of currently free shared resources; a ``With``
    block moves its region from the pool into the working heap and back.
    ``on_step(index, command, heap)`` is called after every executed command.
    """

    def __init__(
        self,
        heap: SpatialHeap,
        *,
        occupancy: Occupancy = TOOL,
        order: str = "lex",
        on_step: Callable | None = None,
        keep_going: bool = False,
        resources: dict | None = None,
        pool: dict | None = None,
        thread: str | None = None,
    ):
        if order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        self.heap = heap
        self.occupancy = occupancy
        self.order = order
        self.on_step = on_step
        self.keep_going = keep_going
        self.resources = resources or {}
        self.pool = pool if pool is not None else {}
        self.thread = thread
        self.steps = 0
        self.trace: list[TraceEntry] = []
        self.faults: list[FaultDetail] = []
        self._skip_line: int | None = None

    @property
    def fault(self) -> FaultDetail | None:
        return self.faults[0] if self.faults else None

    def run(self, commands) -> FaultDetail | None:
        try:
            self._run(commands)
        except _Abort:
            pass
        return self.fault

    def _record(self, cmd, fault_class, contested, assertion="", message="", index=None):
        detail = FaultDetail(
            fault_class,
            self.steps if index is None else index,
            cmd.line,
            cmd.label,
            assertion,
            frozenset(contested),
            self.thread,
            message,
        )
        self.faults.append(detail)
        self.trace.append(TraceEntry(detail.command_index, source_ref(cmd), _op_name(cmd), "FAULT", self.thread))
        if not self.keep_going:
            raise _Abort()
        # keep scanning, but skip the remainder of the faulting source block
        self._skip_line = cmd.line

    def _run(self, commands) -> None:
        for cmd in commands:
            if self._skip_line is not None:
                if cmd.line == self._skip_line and not isinstance(cmd, With):
                    self.trace.append(TraceEntry(self.steps, source_ref(cmd), _op_name(cmd), "skipped", self.thread))
                    continue
                self._skip_line = None
            self.steps += 1
            self._step(cmd)

    def _step(self, cmd) -> None:
        h = self.heap
        index = self.steps
        if isinstance(cmd, Assert):
            failure = classify_assert_failure(h, cmd.assertion, self.occupancy)
            if failure is not None:
                self._record(cmd, failure[0], failure[1], render(cmd.assertion))
                return
        elif isinstance(cmd, (Move, Move5x)):
            if isinstance(cmd, Move):
                fn = exec_g00 if cmd.kind == "G00" else exec_g01
                result = fn(h, cmd.v_start, cmd.v_final, cmd.v_path, self.occupancy, self.order)
            else:
                fn = exec_g00_5x if cmd.kind == "G00" else exec_g01_5x
                result = fn(
                    h,
                    cmd.v_start,
                    cmd.v_final,
                    cmd.v_path,
                    cmd.stock_start,
                    cmd.stock_final,
                    cmd.stock_path,
                    self.occupancy,
                    self.order,
                )
            if isinstance(result, Fault):
                self._record(cmd, result.fault_class, result.contested, message=result.reason)
                return
            self.heap = result
        elif isinstance(cmd, (Mutate, Foreach)):
            voxels = (cmd.voxel,) if isinstance(cmd, Mutate) else _ordered(cmd.voxels, self.order)
            missing = _outside(h, voxels)
            if missing:
                self._record(cmd, "OwnershipViolation", missing, message="mutation outside the owned heap")
                return
            out = h.copy()
            for c in voxels:
                out[c] = cmd.state
            self.heap = out
        elif isinstance(cmd, With):
            self._with(cmd, index)
            return
        elif isinstance(cmd, Parallel):
            raise TypeError("parallel composition is verified by slcnc.concurrency.verify_parallel")
        else:
            raise TypeError(f"unknown command {cmd!r}")
        self.trace.append(TraceEntry(index, source_ref(cmd), _op_name(cmd), "ok", self.thread))
        if self.on_step is not None:
            self.on_step(index, cmd, self.heap)

    def _with(self, cmd: With, index: int) -> None:
        res = self.resources.get(cmd.resource)
        if res is None:
            self._record(cmd, "OwnershipViolation", frozenset(), message=f"unknown resource {cmd.resource}")
            return
        if cmd.resource not in self.pool:
            self._record(cmd, "OwnershipViolation", res.region, message=f"resource {cmd.resource} is not available")
            return
        shared = self.pool.pop(cmd.resource)
        self.trace.append(TraceEntry(index, source_ref(cmd), "acquire", "ok", self.thread))
        self.heap = self.heap.extend(shared)
        if self.on_step is not None:
            self.on_step(index, cmd, self.heap)
        self._run(cmd.body)
        if self.faults and not self.keep_going:
            return
        released = self.heap.restrict(res.region)
        diag = diagnose(released, res.invariant)
        if not diag.ok:
            self._record(
                cmd,
                "InvariantViolation",
                diag.contested,
                render(res.invariant),
                f"invariant of {cmd.resource} not restored at release",
                index,
            )
            # diagnostic mode: hand back the region as it was acquired
            released = shared
        self.heap = self.heap.without(res.region)
        self.pool[cmd.resource] = released
        self.trace.append(TraceEntry(index, source_ref(cmd), "release", "ok", self.thread))


def execute(
    triple: SLTriple,
    initial: SpatialHeap,
    *,
    order: str = "lex",
    on_step: Callable | None = None,
    keep_going: bool = False,
    occupancy: Occupancy = TOOL,
) -> VerificationReport:
    """Check ``initial |= pre``, run the body, then check the postcondition."""
    failure = classify_assert_failure(initial, triple.pre, occupancy)
    if failure is not None:
        detail = FaultDetail("AssertUnsat", None, None, None, render(triple.pre), failure[1], None, "initial heap does not satisfy the precondition")
        return VerificationReport("Fault", detail, initial, 0)
    ex = Executor(initial, occupancy=occupancy, order=order, on_step=on_step, keep_going=keep_going)
    fault = ex.run(triple.body)
    if fault is not None:
        return VerificationReport("Fault", fault, ex.heap, ex.steps, ex.trace, ex.faults[1:])
    post = diagnose(ex.heap, triple.post)
    if not post.ok:
        detail = FaultDetail(
            "PostconditionUnsat", None, None, None, render(triple.post), post.contested, None, "final heap does not satisfy the postcondition"
        )
        return VerificationReport("Fault", detail, ex.heap, ex.steps, ex.trace)
    return VerificationReport("Safe", None, ex.heap, ex.steps, ex.trace)
