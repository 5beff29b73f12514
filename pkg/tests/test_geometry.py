from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slcnc import geometry as geo
from slcnc.errors import ConfigError

coord = st.integers(-6, 6)
voxel = st.tuples(coord, coord, coord)
small_set = st.frozensets(voxel, max_size=6)


# -- scaling -----------------------------------------------------------------


def test_scale_grid_examples():
    assert geo.scale_grid(3.0, 1) == 3
    assert geo.scale_grid(1.25, 10) == 12
    assert geo.scale_grid(-0.15, 10) == -2
    assert geo.scale_grid(0.29, 100) == 29
    assert geo.scale_grid((1.5, -0.5, 2), 2) == (3, -1, 4)
    assert geo.scale_grid(Fraction(1, 3), 3) == 1


@pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
def test_scale_grid_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        geo.scale_grid(bad, 1)


def test_scale_grid_rejects_bad_multiplier():
    with pytest.raises(ValueError):
        geo.scale_grid(1.0, 0)


@given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6), st.integers(1, 1000))
def test_scale_grid_is_order_preserving(a, b, mu):
    lo, hi = min(a, b), max(a, b)
    assert geo.scale_grid(lo, mu) <= geo.scale_grid(hi, mu)


# -- balls and Minkowski sums ----------------------------------------------------


def test_chebyshev_ball_examples():
    assert geo.chebyshev_ball(0) == {(0, 0, 0)}
    assert len(geo.chebyshev_ball(1)) == 27
    b2 = geo.chebyshev_ball(2)
    assert len(b2) == 125
    assert (2, -2, 2) in b2
    assert (3, 0, 0) not in b2


@pytest.mark.parametrize("eps", [1, 2, 3])
def test_ball_decomposes(eps):
    assert geo.chebyshev_ball(eps) == geo.minkowski_sum(geo.chebyshev_ball(1), geo.chebyshev_ball(eps - 1))


def test_minkowski_examples():
    a = frozenset({(0, 0, 0), (1, 0, 0)})
    assert geo.minkowski_sum(a, {(0, 0, 0)}) == a
    assert geo.minkowski_sum(frozenset(), geo.chebyshev_ball(1)) == frozenset()
    dilated = geo.minkowski_sum(a, geo.chebyshev_ball(1))
    # oracle: every pair, deduplicated
    pairs = {tuple(p + q for p, q in zip(u, v)) for u in a for v in product(range(-1, 2), repeat=3)}
    assert dilated == pairs
    assert len(dilated) == 36
    xs = sorted({c[0] for c in dilated})
    assert xs == [-1, 0, 1, 2]


@given(small_set, small_set)
def test_minkowski_commutes(a, b):
    assert geo.minkowski_sum(a, b) == geo.minkowski_sum(b, a)


@given(small_set, small_set, small_set)
@settings(max_examples=50)
def test_minkowski_associates_and_is_bounded(a, b, c):
    ab = geo.minkowski_sum(a, b)
    assert geo.minkowski_sum(ab, c) == geo.minkowski_sum(a, geo.minkowski_sum(b, c))
    assert len(ab) <= len(a) * len(b)


# -- paths ----------------------------------------------------------------------


def test_path_lin_examples():
    assert geo.path_lin((0, 0, 0), (3, 0, 0)) == [(0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0)]
    assert set(geo.path_lin((0, 0, 0), (1, 0, 0))) == {(0, 0, 0), (1, 0, 0)}
    assert geo.path_lin((0, 0, 0), (2, 2, 2)) == [(0, 0, 0), (1, 1, 1), (2, 2, 2)]
    assert geo.path_lin((4, 4, 4), (4, 4, 4)) == [(4, 4, 4)]


def _segment_samples(a, b, n=1000):
    for i in range(n + 1):
        t = i / n
        yield tuple(p + t * (q - p) for p, q in zip(a, b))


def test_path_lin_tracks_segment_4_2_1():
    a, b = (0, 0, 0), (4, 2, 1)
    trace = geo.path_lin(a, b)
    assert len(trace) == 5
    for s in _segment_samples(a, b):
        nearest = geo.voxelize_point(s)
        assert min(geo.chebyshev_distance(nearest, c) for c in trace) <= 1


def _check_trace(a, b, trace):
    assert trace[0] == a and trace[-1] == b
    assert len(trace) == len(set(trace))
    assert len(trace) == max(abs(p - q) for p, q in zip(a, b)) + 1
    for u, v in zip(trace, trace[1:]):
        assert max(abs(p - q) for p, q in zip(u, v)) == 1


@given(voxel, voxel)
def test_path_lin_is_a_trace(a, b):
    _check_trace(a, b, geo.path_lin(a, b))


@given(voxel, voxel)
def test_path_lin_within_one_of_segment(a, b):
    for trace in (geo.path_lin(a, b), geo.path_lin(b, a)):
        for s in _segment_samples(a, b, 200):
            assert min(geo.chebyshev_distance(s, c) for c in trace) <= 1


@given(voxel, st.sampled_from([(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1), (1, -1, 1), (-1, 1, 0)]), st.integers(0, 6))
def test_path_lin_reversal_on_axis_and_diagonal(a, d, k):
    b = tuple(p + k * q for p, q in zip(a, d))
    assert set(geo.path_lin(a, b)) == set(geo.path_lin(b, a))


@given(voxel, voxel)
def test_path_lin_inside_box(a, b):
    assert set(geo.path_lin(a, b)) <= geo.path_box(a, b)


def test_path_box_examples():
    assert geo.path_box((2, 2, 2), (2, 2, 2)) == {(2, 2, 2)}
    assert len(geo.path_box((0, 0, 0), (1, 2, 0))) == 6
    assert geo.path_box((3, 0, 1), (0, 2, 0)) == geo.path_box((0, 2, 0), (3, 0, 1))


def _touches(a, b, cell):
    # slab test of the closed segment against the closed unit cube around cell
    t0, t1 = 0.0, 1.0
    for p, q, c in zip(a, b, cell):
        lo, hi = c - 0.5, c + 0.5
        d = q - p
        if d == 0:
            if not lo <= p <= hi:
                return False
            continue
        u, v = sorted(((lo - p) / d, (hi - p) / d))
        t0, t1 = max(t0, u), min(t1, v)
        if t0 > t1 + 1e-12:
            return False
    return True


@given(st.tuples(*[st.integers(-4, 4)] * 3), st.tuples(*[st.integers(-4, 4)] * 3))
@settings(max_examples=60)
def test_supercover_is_every_touched_cell(a, b):
    cover = geo.path_supercover(a, b)
    assert cover[0] == a and cover[-1] == b
    box = geo.path_box(a, b)
    oracle = {c for c in box if _touches(a, b, c)}
    assert set(cover) == oracle
    assert set(geo.path_lin(a, b)) <= set(cover)


# -- rotation -----------------------------------------------------------------


C90 = geo.RotationSpec("C", "A", (0, 0), (90, 0))


def test_rotate_point_examples():
    assert geo.rotate_point((10, 0, 0), C90, 0) == (10.0, 0.0, 0.0)
    end = geo.rotate_point((10, 0, 0), C90, 1)
    assert end == pytest.approx((0, 10, 0), abs=1e-9)
    mid = geo.rotate_point((10, 0, 0), C90, 0.5)
    assert mid == pytest.approx((10 * math.cos(math.pi / 4), 10 * math.sin(math.pi / 4), 0), abs=1e-9)


def test_rotate_point_rejects_t_outside_unit_interval():
    with pytest.raises(ValueError):
        geo.rotate_point((1, 0, 0), C90, 1.5)


def test_rotate_point_about_pivot():
    spec = geo.RotationSpec("C", "A", (0, 0), (90, 0), pivot=(5, 5, 0))
    assert geo.rotate_point((6, 5, 0), spec, 1) == pytest.approx((5, 6, 0), abs=1e-9)


def test_rotation_spec_validation():
    with pytest.raises(ValueError):
        geo.RotationSpec("C", "C")
    with pytest.raises(ValueError):
        geo.RotationSpec("Q", "A")
    with pytest.raises(ValueError):
        geo.RotationSpec("C", "A", (0, 0), (float("nan"), 0))


def test_rotation_matrices_are_rotations():
    for axis in "ABC":
        m = geo.rotation_matrix(axis, 37.0)
        assert np.allclose(m @ m.T, np.eye(3))
        assert np.linalg.det(m) == pytest.approx(1.0)


def dense_sweep(stock, spec, n=10_000):
    """Oracle: sample every point at n+1 uniform times and round."""
    out = set()
    for p in stock:
        for i in range(n + 1):
            out.add(geo.voxelize_point(geo.rotate_point(p, spec, i / n)))
    return frozenset(out)


def test_quarter_circle_sweep():
    swept = geo.stock_sweep({(10, 0, 0)}, C90)
    assert (10, 0, 0) in swept and (0, 10, 0) in swept
    for x, y, z in swept:
        assert 9 <= math.hypot(x, y) <= 11
        assert z == 0
    assert swept == dense_sweep({(10, 0, 0)}, C90)


def test_half_ring_sweep():
    spec = geo.RotationSpec("C", "A", (0, 0), (180, 0))
    swept = geo.stock_sweep({(1, 0, 0)}, spec)
    assert {(1, 0, 0), (0, 1, 0), (-1, 0, 0)} <= swept
    assert swept == dense_sweep({(1, 0, 0)}, spec)


def test_zero_angle_sweep_is_identity():
    stock = {(1, 2, 3), (4, 0, 0)}
    spec = geo.RotationSpec("C", "B", (30, 10), (30, 10))
    assert geo.stock_sweep(stock, spec) == frozenset(stock)
    assert geo.rotate_set(stock, spec) == frozenset(stock)


def test_sweep_contains_both_endpoints_of_each_point():
    stock = {(3, 1, 0), (4, 2, 1), (2, 2, 2)}
    spec = geo.RotationSpec("B", "C", (0, 0), (60, -45), pivot=(1, 1, 1))
    swept = geo.stock_sweep(stock, spec)
    assert frozenset(stock) <= swept
    assert geo.rotate_set(stock, spec) <= swept


@given(
    st.frozensets(st.tuples(st.integers(-5, 5), st.integers(-5, 5), st.integers(-2, 2)), min_size=1, max_size=3),
    st.integers(-180, 180),
    st.integers(-90, 90),
)
@settings(max_examples=40, deadline=None)
def test_denser_sampling_never_removes_voxels(stock, dp, ds):
    spec = geo.RotationSpec("C", "A", (0, 0), (dp, ds))
    base = geo.stock_sweep(stock, spec)
    n = geo.sweep_step_count(stock, spec)
    for factor in (2, 4):
        assert base <= geo.stock_sweep(stock, spec, steps=n * factor)


def test_sweep_budget_is_a_config_error():
    with pytest.raises(ConfigError):
        geo.stock_sweep({(1000, 0, 0)}, C90, max_steps=64)
