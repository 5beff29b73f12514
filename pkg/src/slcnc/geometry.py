"""Integer-domain spatial computation.

Everything the compiler needs to turn continuous kinematics into concrete
voxel sets lives here: grid scaling, the Chebyshev safety ball, Minkowski
sums, discrete line/box paths and rotary stock sweeps.

Voxels are plain ``(x, y, z)`` integer tuples and voxel sets are
``frozenset`` instances, so set algebra is the standard Python operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

Voxel = tuple[int, int, int]
VoxelSet = frozenset  # frozenset[Voxel]

ORIGIN: Voxel = (0, 0, 0)
MIN_SWEEP_STEPS = 16
MAX_SWEEP_STEPS = 1 << 20
_REFINE_DEPTH = 40


# ---------------------------------------------------------------------------
# scaling


def _scale_scalar(value, mu: int) -> int:
    if isinstance(value, (int, Fraction)) and not isinstance(value, bool):
        return math.floor(value * mu)
    if isinstance(value, Decimal):
        dec = value
    else:
        if isinstance(value, float) and not math.isfinite(value):
            raise ValueError(f"cannot scale non-finite value {value!r}")
        # str() of a float is its shortest round-trip literal, so 0.29 stays 0.29
        dec = Decimal(str(value))
    if not dec.is_finite():
        raise ValueError(f"cannot scale non-finite value {value!r}")
    return math.floor(dec * mu)


def scale_grid(value, mu: int):
    """Scale machine units onto the voxel grid, flooring toward -inf.

    Accepts a scalar or an ``(x, y, z)`` triple; returns an ``int`` or a voxel.
    Arithmetic is done in decimal so literals such as ``0.29`` with ``mu=100``
    land on 29 rather than 28.
    """
    if mu < 1 or int(mu) != mu:
        raise ValueError(f"grid multiplier must be a positive integer, got {mu!r}")
    if isinstance(value, (tuple, list)):
        if len(value) != 3:
            raise ValueError("expected an (x, y, z) triple")
        return tuple(_scale_scalar(v, mu) for v in value)
    return _scale_scalar(value, mu)


# ---------------------------------------------------------------------------
# set primitives


def box_voxels(lo: Voxel, hi: Voxel) -> VoxelSet:
    """All voxels ``c`` with ``min(lo, hi) <= c <= max(lo, hi)`` pointwise."""
    a = tuple(min(p, q) for p, q in zip(lo, hi))
    b = tuple(max(p, q) for p, q in zip(lo, hi))
    return frozenset(
        product(range(a[0], b[0] + 1), range(a[1], b[1] + 1), range(a[2], b[2] + 1))
    )


def chebyshev_ball(epsilon: int) -> VoxelSet:
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    return box_voxels((-epsilon,) * 3, (epsilon,) * 3)


def translate(voxels: Iterable[Voxel], offset: Voxel) -> VoxelSet:
    ox, oy, oz = offset
    return frozenset((x + ox, y + oy, z + oz) for x, y, z in voxels)


def minkowski_sum(a: Iterable[Voxel], b: Iterable[Voxel]) -> VoxelSet:
    a = frozenset(a)
    b = frozenset(b)
    if len(a) > len(b):
        a, b = b, a
    out: set[Voxel] = set()
    for offset in a:
        out.update(translate(b, offset))
    return frozenset(out)


def chebyshev_distance(p: Sequence[float], q: Sequence[float]) -> float:
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]), abs(p[2] - q[2]))


# ---------------------------------------------------------------------------
# paths


def path_box(c_start: Voxel, c_target: Voxel) -> VoxelSet:
    """Worst-case bounding box of an uncoordinated rapid move."""
    return box_voxels(c_start, c_target)


def _sign(v: int) -> int:
    return (v > 0) - (v < 0)


def path_lin(c_start: Voxel, c_target: Voxel) -> list[Voxel]:
    """3-D Bresenham trace from ``c_start`` to ``c_target``, endpoints included.

    The driving axis is the one with the largest delta (ties resolved x, y, z).
    A secondary axis steps when its decision variable reaches zero, i.e. a
    midpoint tie moves the secondary axis.
    """
    cur = list(c_start)
    delta = [t - s for s, t in zip(c_start, c_target)]
    mag = [abs(d) for d in delta]
    step = [_sign(d) for d in delta]
    drive = max(range(3), key=lambda i: (mag[i], -i))
    others = [i for i in range(3) if i != drive]

    trace = [tuple(cur)]
    n = mag[drive]
    err = {i: 2 * mag[i] - n for i in others}
    for _ in range(n):
        cur[drive] += step[drive]
        for i in others:
            if err[i] >= 0:
                cur[i] += step[i]
                err[i] -= 2 * n
            err[i] += 2 * mag[i]
        trace.append(tuple(cur))
    return trace


def path_supercover(c_start: Voxel, c_target: Voxel) -> list[Voxel]:
    """Every voxel the continuous segment between voxel centres touches.

    Crossing times are exact fractions; when several axes cross at the same
    instant (an edge or corner) all the touched neighbour cells are emitted.
    """
    delta = [t - s for s, t in zip(c_start, c_target)]
    step = [_sign(d) for d in delta]
    events: dict[Fraction, list[int]] = {}
    for axis in range(3):
        n = abs(delta[axis])
        for k in range(n):
            events.setdefault(Fraction(2 * k + 1, 2 * n), []).append(axis)

    cur = list(c_start)
    trace = [tuple(cur)]
    seen = {trace[0]}
    for t in sorted(events):
        axes = events[t]
        for size in range(1, len(axes) + 1):
            for subset in combinations(axes, size):
                cell = list(cur)
                for axis in subset:
                    cell[axis] += step[axis]
                cell = tuple(cell)
                if cell not in seen:
                    seen.add(cell)
                    trace.append(cell)
        for axis in axes:
            cur[axis] += step[axis]
    return trace


# ---------------------------------------------------------------------------
# rotary kinematics

AXES = ("A", "B", "C")


def rotation_matrix(axis: str, degrees: float) -> np.ndarray:
    """Right-handed rotation about X (A), Y (B) or Z (C)."""
    th = math.radians(degrees)
    c, s = math.cos(th), math.sin(th)
    if axis == "A":
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == "B":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == "C":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"unknown rotary axis {axis!r}")


@dataclass(frozen=True)
class RotationSpec:
    primary_axis: str
    secondary_axis: str
    start_angles: tuple[float, float] = (0.0, 0.0)
    end_angles: tuple[float, float] = (0.0, 0.0)
    pivot: Voxel = ORIGIN

    def __post_init__(self):
        for axis in (self.primary_axis, self.secondary_axis):
            if axis not in AXES:
                raise ValueError(f"rotary axis must be one of {AXES}, got {axis!r}")
        if self.primary_axis == self.secondary_axis:
            raise ValueError("primary and secondary rotary axes must differ")
        for a in (*self.start_angles, *self.end_angles):
            if not math.isfinite(a):
                raise ValueError("rotary angles must be finite")

    @property
    def is_static(self) -> bool:
        return tuple(self.start_angles) == tuple(self.end_angles)

    def angles_at(self, t: float) -> tuple[float, float]:
        (p0, s0), (p1, s1) = self.start_angles, self.end_angles
        return p0 + t * (p1 - p0), s0 + t * (s1 - s0)

    def matrix(self, primary_deg: float, secondary_deg: float) -> np.ndarray:
        return rotation_matrix(self.primary_axis, primary_deg) @ rotation_matrix(
            self.secondary_axis, secondary_deg
        )

    def relative_matrix(self, t: float) -> np.ndarray:
        """Rigid motion carrying the table pose at ``t=0`` to the pose at ``t``."""
        start = self.matrix(*self.start_angles)
        return self.matrix(*self.angles_at(t)) @ start.T

    def swept_radians(self) -> float:
        (p0, s0), (p1, s1) = self.start_angles, self.end_angles
        return math.radians(abs(p1 - p0) + abs(s1 - s0))


def rotate_point(p: Sequence[float], spec: RotationSpec, t: float) -> tuple[float, float, float]:
    """Position at interpolation time ``t`` of a point that sits at ``p`` when ``t=0``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    if t == 0 or spec.is_static:
        return (float(p[0]), float(p[1]), float(p[2]))
    pivot = np.asarray(spec.pivot, dtype=float)
    out = spec.relative_matrix(t) @ (np.asarray(p, dtype=float) - pivot) + pivot
    return (float(out[0]), float(out[1]), float(out[2]))


def round_half_away(v: float) -> int:
    return int(math.copysign(math.floor(abs(v) + 0.5), v))


def voxelize_point(p: Sequence[float]) -> Voxel:
    """Voxel whose centre is nearest to ``p`` (halves round away from zero)."""
    return (round_half_away(p[0]), round_half_away(p[1]), round_half_away(p[2]))


def _round_array(a: np.ndarray) -> np.ndarray:
    return (np.sign(a) * np.floor(np.abs(a) + 0.5)).astype(np.int64)


def _positions(points: np.ndarray, spec: RotationSpec, ts: Sequence[float]) -> np.ndarray:
    pivot = np.asarray(spec.pivot, dtype=float)
    rel = points - pivot
    out = np.empty((len(ts), len(points), 3))
    for i, t in enumerate(ts):
        out[i] = rel @ spec.relative_matrix(t).T + pivot
    return out


def sweep_step_count(stock: Iterable[Voxel], spec: RotationSpec, requested: int = 0) -> int:
    """Number of base samples used by :func:`stock_sweep`.

    The farthest stock point moves at most half a voxel between samples; the
    count is then rounded up to a power of two so that denser sweeps always
    contain the samples of sparser ones.
    """
    pivot = spec.pivot
    r_max = max(
        (math.dist(p, pivot) for p in stock),
        default=0.0,
    )
    need = max(MIN_SWEEP_STEPS, math.ceil(2 * r_max * spec.swept_radians()), requested)
    return 1 << (need - 1).bit_length()


def stock_sweep(
    stock: Iterable[Voxel],
    spec: RotationSpec,
    steps: int = 0,
    max_steps: int = MAX_SWEEP_STEPS,
) -> VoxelSet:
    """Union of the voxels visited by every stock point during the rotation."""
    stock = frozenset(stock)
    if not stock or spec.is_static:
        return stock
    n = sweep_step_count(stock, spec, steps)
    if n > max_steps:
        raise ConfigError(
            f"rotary sweep needs {n} samples to keep per-step motion under half a voxel "
            f"(budget {max_steps})"
        )
    points = np.array(sorted(stock), dtype=float)
    ts = [i / n for i in range(n + 1)]
    cells = _round_array(_positions(points, spec, ts))
    result: set[Voxel] = {tuple(int(v) for v in c) for c in cells.reshape(-1, 3)}

    # consecutive samples that jump diagonally may skip a corner cell
    jumps = (cells[1:] != cells[:-1]).sum(axis=2) > 1
    for i, j in zip(*np.nonzero(jumps)):
        _refine(points[j : j + 1], spec, ts[i], ts[i + 1], cells[i, j], cells[i + 1, j], result, 0)
    return frozenset(result)


def _refine(point, spec, ta, tb, ca, cb, out, depth):
    if depth >= _REFINE_DEPTH:
        return
    tm = (ta + tb) / 2
    cm = _round_array(_positions(point, spec, [tm]))[0, 0]
    out.add(tuple(int(v) for v in cm))
    if (ca != cm).sum() > 1:
        _refine(point, spec, ta, tm, ca, cm, out, depth + 1)
    if (cm != cb).sum() > 1:
        _refine(point, spec, tm, tb, cm, cb, out, depth + 1)


def rotate_set(stock: Iterable[Voxel], spec: RotationSpec) -> VoxelSet:
    """Voxelized stock at the end of the rotation (``t = 1``)."""
    stock = frozenset(stock)
    if not stock or spec.is_static:
        return stock
    points = np.array(sorted(stock), dtype=float)
    cells = _round_array(_positions(points, spec, [1.0]))[0]
    return frozenset(tuple(int(v) for v in c) for c in cells)


def sorted_voxels(voxels: Iterable[Voxel]) -> list[Voxel]:
    return sorted(voxels)
