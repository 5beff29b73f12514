"""Spatial heap, assertion language and the satisfaction relation ``h |= P``.

The heap is a finite partial map from voxels to :class:`Occupancy`.  The
assertion fragment is the one the compiler emits: ``emp``, points-to,
iterated regions ``R(C, state)``, pure set formulas, ``true`` and the
separating conjunction over those.  Because every spatial atom carries a
concrete footprint, a star is decided by footprint accounting instead of
searching over heap splits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union

from .errors import DomainError
from .geometry import Voxel


@dataclass(frozen=True, order=True)
class Occupancy:
    kind: str
    owner: str | None = None

    def __str__(self) -> str:
        if self.owner is None:
            return self.kind
        return f"{self.kind}[{self.owner}]"

    @property
    def is_tool(self) -> bool:
        return self.kind == "Tool"

    @classmethod
    def parse(cls, text: str) -> "Occupancy":
        text = text.strip()
        if text.endswith("]") and "[" in text:
            kind, owner = text[:-1].split("[", 1)
            occ = cls(kind, owner)
        else:
            occ = cls(text)
        if occ.kind not in KINDS:
            raise ValueError(f"unknown occupancy {text!r}")
        if occ.owner is not None and occ.kind != "Tool":
            raise ValueError("only Tool occupancy carries an owner")
        return occ


KINDS = ("Tool", "Environment", "Stock", "Empty")
TOOL = Occupancy("Tool")
ENVIRONMENT = Occupancy("Environment")
STOCK = Occupancy("Stock")
EMPTY = Occupancy("Empty")


def tool(owner: str | None = None) -> Occupancy:
    return Occupancy("Tool", owner)


# ---------------------------------------------------------------------------
# heap


class SpatialHeap:
    """Finite partial map ``Voxel -> Occupancy``.

    Item assignment only overwrites existing voxels: motions change values,
    never the domain.  Use :meth:`extend` / :meth:`without` for the explicit
    domain transfers of critical regions.
    """

    __slots__ = ("_cells",)

    def __init__(self, cells: Mapping[Voxel, Occupancy] | Iterable = ()):
        self._cells: dict[Voxel, Occupancy] = dict(cells)

    @classmethod
    def from_regions(cls, regions: Iterable[tuple[Iterable[Voxel], Occupancy]]) -> "SpatialHeap":
        cells: dict[Voxel, Occupancy] = {}
        for voxels, state in regions:
            for c in voxels:
                if c in cells:
                    raise ValueError(f"voxel {c} claimed twice")
                cells[c] = state
        return cls(cells)

    @property
    def dom(self) -> frozenset:
        return frozenset(self._cells)

    def __getitem__(self, c: Voxel) -> Occupancy:
        return self._cells[c]

    def get(self, c: Voxel, default=None):
        return self._cells.get(c, default)

    def __setitem__(self, c: Voxel, state: Occupancy) -> None:
        if c not in self._cells:
            raise DomainError(f"voxel {c} is outside the heap domain")
        self._cells[c] = state

    def __contains__(self, c) -> bool:
        return c in self._cells

    def __len__(self) -> int:
        return len(self._cells)

    def __iter__(self) -> Iterator[Voxel]:
        return iter(self._cells)

    def items(self):
        return self._cells.items()

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpatialHeap):
            return NotImplemented
        return self._cells == other._cells

    def __repr__(self) -> str:
        return f"SpatialHeap({len(self._cells)} voxels)"

    def copy(self) -> "SpatialHeap":
        return SpatialHeap(self._cells)

    def restrict(self, voxels: Iterable[Voxel]) -> "SpatialHeap":
        cells = self._cells
        return SpatialHeap({c: cells[c] for c in voxels if c in cells})

    def without(self, voxels: Iterable[Voxel]) -> "SpatialHeap":
        drop = frozenset(voxels)
        return SpatialHeap({c: s for c, s in self._cells.items() if c not in drop})

    def extend(self, other: "SpatialHeap") -> "SpatialHeap":
        """Disjoint union ``self ⊎ other``."""
        if not disjoint(self, other):
            raise ValueError("heaps overlap; disjoint union undefined")
        merged = dict(self._cells)
        merged.update(other._cells)
        return SpatialHeap(merged)

    def voxels_with(self, state: Occupancy) -> frozenset:
        return frozenset(c for c, s in self._cells.items() if s == state)

    def voxels_of_kind(self, kind: str) -> frozenset:
        return frozenset(c for c, s in self._cells.items() if s.kind == kind)

    def dump(self) -> str:
        """One ``x y z state`` record per voxel, lexicographic order."""
        lines = [f"{x} {y} {z} {self._cells[(x, y, z)]}" for x, y, z in sorted(self._cells)]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def load(cls, text: str) -> "SpatialHeap":
        cells = {}
        for raw in text.splitlines():
            if not raw.strip():
                continue
            x, y, z, state = raw.split()
            cells[(int(x), int(y), int(z))] = Occupancy.parse(state)
        return cls(cells)


def disjoint(h1: SpatialHeap, h2: SpatialHeap) -> bool:
    small, big = (h1, h2) if len(h1) <= len(h2) else (h2, h1)
    return not any(c in big for c in small)


def mutate(h: SpatialHeap, c: Voxel, state: Occupancy) -> SpatialHeap:
    """``h[c := state]`` as a new heap."""
    out = h.copy()
    out[c] = state
    return out


# ---------------------------------------------------------------------------
# assertions


@dataclass(frozen=True)
class Emp:
    pass


@dataclass(frozen=True)
class PointsTo:
    voxel: Voxel
    state: Occupancy


@dataclass(frozen=True)
class Region:
    """Iterated separating conjunction of ``c |-> state`` over ``voxels``."""

    voxels: frozenset
    state: Occupancy


@dataclass(frozen=True)
class Pure:
    """Heap-independent set formula over concrete voxel sets.

    ``op`` is ``"subset"`` (lhs ⊆ rhs), ``"equal"`` or ``"disjoint"``
    (lhs ∩ rhs = ∅).  ``text`` names the sets for diagnostics and ``fault``
    optionally fixes the fault class reported when the formula is false.
    """

    op: str
    lhs: frozenset
    rhs: frozenset
    text: str = field(default="", compare=False)
    fault: str | None = field(default=None, compare=False)

    def holds(self) -> bool:
        if self.op == "subset":
            return self.lhs <= self.rhs
        if self.op == "equal":
            return self.lhs == self.rhs
        if self.op == "disjoint":
            return not (self.lhs & self.rhs)
        raise ValueError(f"unknown pure operator {self.op!r}")

    def witness(self) -> frozenset:
        """Voxels that make the formula false (empty when it holds)."""
        if self.op == "subset":
            return self.lhs - self.rhs
        if self.op == "equal":
            return self.lhs ^ self.rhs
        return self.lhs & self.rhs


@dataclass(frozen=True)
class TrueAssertion:
    pass


@dataclass(frozen=True)
class Star:
    parts: tuple


Assertion = Union[Emp, PointsTo, Region, Pure, TrueAssertion, Star]
EMP = Emp()
TRUE = TrueAssertion()


def star(*parts: Assertion) -> Assertion:
    """Separating conjunction, flattened, with ``emp`` and ``R(∅, _)`` dropped."""
    flat = [a for a in _flatten(parts) if not _is_unit(a)]
    if not flat:
        return EMP
    if len(flat) == 1:
        return flat[0]
    return Star(tuple(flat))


def _is_unit(a) -> bool:
    return isinstance(a, Emp) or (isinstance(a, Region) and not a.voxels)


def _flatten(parts) -> Iterator[Assertion]:
    for p in parts:
        if isinstance(p, Star):
            yield from _flatten(p.parts)
        else:
            yield p


def atoms(P: Assertion) -> list[Assertion]:
    return list(_flatten([P]))


def footprint(P: Assertion) -> frozenset:
    """Voxels claimed by the spatial atoms of ``P``."""
    out: set = set()
    for a in atoms(P):
        if isinstance(a, Region):
            out |= a.voxels
        elif isinstance(a, PointsTo):
            out.add(a.voxel)
    return frozenset(out)


def regions_of(P: Assertion) -> dict[Voxel, Occupancy]:
    """Voxel → state map described by the spatial atoms of ``P``."""
    cells: dict[Voxel, Occupancy] = {}
    for a in atoms(P):
        if isinstance(a, Region):
            for c in a.voxels:
                cells[c] = a.state
        elif isinstance(a, PointsTo):
            cells[a.voxel] = a.state
    return cells


def heap_from_assertion(P: Assertion) -> SpatialHeap:
    """The heap exactly described by a star of region / points-to atoms."""
    regions = []
    for a in atoms(P):
        if isinstance(a, Region):
            regions.append((a.voxels, a.state))
        elif isinstance(a, PointsTo):
            regions.append(((a.voxel,), a.state))
    return SpatialHeap.from_regions(regions)


@dataclass
class Diagnosis:
    """Why ``h |= P`` failed (all sets empty when it holds)."""

    overlap: frozenset = frozenset()
    missing: frozenset = frozenset()
    mismatched: frozenset = frozenset()
    uncovered: frozenset = frozenset()
    failed_pures: tuple = ()

    @property
    def ok(self) -> bool:
        return not (
            self.overlap or self.missing or self.mismatched or self.uncovered or self.failed_pures
        )

    @property
    def contested(self) -> frozenset:
        out = self.overlap | self.missing | self.mismatched | self.uncovered
        for p in self.failed_pures:
            out |= p.witness()
        return out


def diagnose(h: SpatialHeap, P: Assertion) -> Diagnosis:
    parts = atoms(P)
    absorbs = False
    failed = []
    claimed: set = set()
    overlap: set = set()
    missing: set = set()
    mismatched: set = set()
    for a in parts:
        if isinstance(a, TrueAssertion):
            absorbs = True
        elif isinstance(a, Pure):
            # a pure formula says nothing about the heap: true, it behaves like
            # ``true``; false, the whole star fails and only the witness matters
            absorbs = True
            if not a.holds():
                failed.append(a)
        elif isinstance(a, Emp):
            continue
        else:
            if isinstance(a, Region):
                voxels, state = a.voxels, a.state
            elif isinstance(a, PointsTo):
                voxels, state = (a.voxel,), a.state
            else:
                raise TypeError(f"not an assertion: {a!r}")
            for c in voxels:
                if c in claimed:
                    overlap.add(c)
                    continue
                claimed.add(c)
                got = h.get(c)
                if got is None:
                    missing.add(c)
                elif got != state:
                    mismatched.add(c)
    uncovered = frozenset() if absorbs else frozenset(c for c in h if c not in claimed)
    return Diagnosis(
        frozenset(overlap), frozenset(missing), frozenset(mismatched), uncovered, tuple(failed)
    )


def satisfies(h: SpatialHeap, P: Assertion) -> bool:
    """Decide ``h |= P``."""
    return diagnose(h, P).ok


# ---------------------------------------------------------------------------
# rendering


def format_voxels(voxels: Iterable[Voxel]) -> str:
    return "{" + ",".join(f"({x},{y},{z})" for x, y, z in sorted(voxels)) + "}"


def render(P: Assertion) -> str:
    if isinstance(P, Emp):
        return "emp"
    if isinstance(P, TrueAssertion):
        return "true"
    if isinstance(P, PointsTo):
        x, y, z = P.voxel
        return f"({x},{y},{z}) |-> {P.state}"
    if isinstance(P, Region):
        return f"R({format_voxels(P.voxels)},{P.state})"
    if isinstance(P, Pure):
        lhs, rhs = format_voxels(P.lhs), format_voxels(P.rhs)
        if P.op == "subset":
            return f"{lhs} <= {rhs}"
        if P.op == "equal":
            return f"{lhs} == {rhs}"
        return f"{lhs} & {rhs} == {{}}"
    if isinstance(P, Star):
        return " * ".join(render(p) for p in P.parts)
    raise TypeError(f"not an assertion: {P!r}")
